"""
Run configuration.

Configuration is TOML with dotted keys::

    mode = "simulate"
    lattice.a1_m = [0.35, 0.0, 0.0]
    lattice.a2_m = [0.0, 0.35, 0.0]
    incidence.theta_deg = 50.0
    incidence.f_min_hz = 30e6
    incidence.f_max_hz = 140e6

Tables (``[incidence]``) and dotted keys are interchangeable. Every key is
checked against a fixed schema; unknown keys, missing required keys and
inconsistent values raise :class:`~floquetdg.exceptions.ConfigurationError`
naming the dotted key and, when it can be found, its line.
"""

from __future__ import annotations

import json
import math
import os
import re
import sys
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ._constants import CFL_MAX, CFL_MIN, CFL_TOL, INCIDENT_FLOOR, SI, UnitSystem
from .exceptions import ConfigurationError
from .mesh import Mesh, generate_box_mesh, load_mesh
from .operators import MaterialTable
from .types import Block, IncidenceConfig, Lattice2, Layer, LayerStack, Material

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

MODES = ("simulate", "stability", "oracle", "verify")

# dotted key -> (kind, default); a default of ... marks a required key.
_SCHEMA: dict[str, tuple[str, Any]] = {
    "mode": ("str", "simulate"),
    "lattice.a1_m": ("vec3", ...),
    "lattice.a2_m": ("vec3", ...),
    "mesh.file": ("str", ""),
    "mesh.order": ("int", 3),
    "mesh.nx": ("int", 0),
    "mesh.ny": ("int", 0),
    "mesh.nz": ("int_list", []),
    "mesh.points_per_wavelength": ("float", 10.0),
    "mesh.stagger": ("bool", False),
    "structure.z_breaks": ("float_list", [0.0, 0.5, 1.0, 2.0, 2.5, 2.75, 3.0]),
    "structure.layer_materials": ("int_list", [1, 1, 1, 1, 1, 1]),
    "structure.blocks": ("blocks", []),
    "incidence.theta_deg": ("float", 0.0),
    "incidence.phi_deg": ("float", 0.0),
    "incidence.polarization": ("str", "TE"),
    "incidence.f_min_hz": ("float", ...),
    "incidence.f_max_hz": ("float", ...),
    "incidence.amplitude": ("float", 1.0),
    "incidence.direction": ("str", "down"),
    "planes.z_tfsf": ("float", None),
    "planes.z_reflect": ("float", None),
    "planes.z_transmit": ("float", None),
    "time.t_final_s": ("float", None),
    "time.n_periods": ("float", 10.0),
    "time.v_cfl": ("float", 1.0),
    "time.energy_every": ("int", 10),
    "output.directory": ("str", "out"),
    "output.spectra_csv": ("str", "spectra.csv"),
    "output.time_series_csv": ("str", "time_series.csv"),
    "output.oracle_csv": ("str", "oracle.csv"),
    "output.stability_csv": ("str", "stability.csv"),
    "output.plot_script": ("bool", False),
    "tolerances.geometric_m": ("float", None),
    "tolerances.incident_floor": ("float", INCIDENT_FLOOR),
    "stability.thetas_deg": ("float_list", [0.0, 10.0, 30.0, 50.0, 70.0]),
    "stability.v_min": ("float", CFL_MIN),
    "stability.v_max": ("float", CFL_MAX),
    "stability.tolerance": ("float", CFL_TOL),
    "stability.probe_periods": ("float", 5.0),
    "stability.order": ("int", 2),
    "stability.elements_per_wavelength": ("float", 10.0),
    "oracle.num_freqs": ("int", 561),
}

_MATERIAL_KEY = re.compile(r"^materials\.(\d+)\.(eps_r|mu_r|pec)$")
_LINE_IN_MESSAGE = re.compile(r"line (\d+)")
_HEADER = re.compile(r"^\s*\[\s*([^\[\]]+?)\s*\]\s*(#.*)?$")
_ASSIGN = re.compile(r"^\s*([A-Za-z0-9_.\-\"' ]+?)\s*=")


# -- Parsed configuration -----------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters with every default filled in.

    Plane heights and the final time are always set: when absent from the
    text they are derived from the layer breaks and the pulse design.
    """

    mode: str
    lattice: Lattice2
    mesh_file: str
    order: int
    nx: int
    ny: int
    nz: tuple[int, ...]
    points_per_wavelength: float
    stagger: bool
    z_breaks: tuple[float, ...]
    layer_materials: tuple[int, ...]
    blocks: tuple[Block, ...]
    materials: dict[int, Material]
    theta_deg: float
    phi_deg: float
    polarization: str
    f_min: float
    f_max: float
    amplitude: float
    direction: str
    z_tfsf: float
    z_reflect: float
    z_transmit: float
    t_final: float
    n_periods: float
    v_cfl: float
    energy_every: int
    output_dir: str
    spectra_csv: str
    time_series_csv: str
    oracle_csv: str
    stability_csv: str
    plot_script: bool
    geometric_tol: float
    incident_floor: float
    stability_thetas_deg: tuple[float, ...]
    stability_v_min: float
    stability_v_max: float
    stability_tolerance: float
    stability_probe_periods: float
    stability_order: int
    stability_elements_per_wavelength: float
    oracle_num_freqs: int
    units: UnitSystem = SI
    raw: dict[str, Any] = field(default_factory=dict, repr=False)

    # -- Derived objects ---------------------------------------------------------

    @property
    def theta(self) -> float:
        return math.radians(self.theta_deg)

    @property
    def phi(self) -> float:
        return math.radians(self.phi_deg)

    def incidence(self) -> IncidenceConfig:
        return IncidenceConfig.for_band(
            self.f_min,
            self.f_max,
            theta=self.theta,
            phi=self.phi,
            polarization=self.polarization,  # type: ignore[arg-type]
            amplitude=self.amplitude,
            direction=self.direction,  # type: ignore[arg-type]
            z_ref=self.z_tfsf,
        )

    def material_table(self) -> MaterialTable:
        return MaterialTable(self.materials, self.units)

    def layer_divisions(self) -> tuple[int, int, tuple[int, ...]]:
        """Box-mesh divisions, derived from the wavelength rule where unset."""
        a1, a2 = self.lattice.lengths
        used = set(self.layer_materials) | {b.material_id for b in self.blocks}
        index = max(_index(self.materials[m]) for m in used if not self.materials[m].pec)
        h_xy = self._target_h(index)
        nx = self.nx or max(1, math.ceil(a1 / h_xy - 1e-9))
        ny = self.ny or max(1, math.ceil(a2 / h_xy - 1e-9))
        if self.nz:
            return nx, ny, self.nz
        nz = []
        for i, m in enumerate(self.layer_materials):
            mat = self.materials[m]
            h = self._target_h(1.0 if mat.pec else _index(mat))
            nz.append(max(1, math.ceil((self.z_breaks[i + 1] - self.z_breaks[i]) / h - 1e-9)))
        return nx, ny, tuple(nz)

    def _target_h(self, index: float) -> float:
        """Element size giving the requested nodes per shortest wavelength."""
        wavelength = self.units.c0 / (self.f_max * index)
        return wavelength * self.order / self.points_per_wavelength

    def build_mesh(self) -> Mesh:
        if self.mesh_file:
            return load_mesh(self.mesh_file)
        nx, ny, nz = self.layer_divisions()
        return generate_box_mesh(
            self.lattice,
            self.z_breaks,
            nx,
            ny,
            nz,
            self.layer_materials,
            stagger=self.stagger,
            blocks=self.blocks,
            pec_materials=[m for m, mat in self.materials.items() if mat.pec],
        )

    def layer_stack(self) -> LayerStack:
        """Planar stack seen by the incident wave, incident medium first.

        Raises:
            ConfigurationError: If the structure is not laterally uniform.
        """
        if self.blocks or any(self.materials[m].pec for m in self.layer_materials):
            raise ConfigurationError(
                "the multilayer oracle needs a laterally uniform dielectric structure",
                fields={"structure.blocks": "not supported by the oracle"},
            )
        layers = [
            Layer(
                self.z_breaks[i + 1] - self.z_breaks[i],
                self.materials[m].eps_r,
                self.materials[m].mu_r,
            )
            for i, m in enumerate(self.layer_materials)
        ]
        if self.direction == "down":
            layers.reverse()
        # Merge neighbours with equal parameters so the end media are semi-infinite.
        merged: list[Layer] = []
        for layer in layers:
            if merged and (merged[-1].eps_r, merged[-1].mu_r) == (layer.eps_r, layer.mu_r):
                prev = merged.pop()
                layer = Layer(prev.thickness + layer.thickness, layer.eps_r, layer.mu_r)
            merged.append(layer)
        if len(merged) == 1:
            merged.append(Layer(0.0, merged[0].eps_r, merged[0].mu_r))
        return LayerStack(tuple(merged))

    def output_path(self, name: str) -> Path:
        return Path(self.output_dir) / name

    def to_dict(self) -> dict[str, Any]:
        """Flattened, defaults-filled mapping keyed like the configuration text."""
        out: dict[str, Any] = {
            "mode": self.mode,
            "lattice.a1_m": list(self.lattice.a1),
            "lattice.a2_m": list(self.lattice.a2),
            "mesh.file": self.mesh_file,
            "mesh.order": self.order,
            "mesh.nx": self.nx,
            "mesh.ny": self.ny,
            "mesh.nz": list(self.nz),
            "mesh.points_per_wavelength": self.points_per_wavelength,
            "mesh.stagger": self.stagger,
            "structure.z_breaks": list(self.z_breaks),
            "structure.layer_materials": list(self.layer_materials),
            "structure.blocks": [b.to_dict() for b in self.blocks],
            "incidence.theta_deg": self.theta_deg,
            "incidence.phi_deg": self.phi_deg,
            "incidence.polarization": self.polarization,
            "incidence.f_min_hz": self.f_min,
            "incidence.f_max_hz": self.f_max,
            "incidence.amplitude": self.amplitude,
            "incidence.direction": self.direction,
            "planes.z_tfsf": self.z_tfsf,
            "planes.z_reflect": self.z_reflect,
            "planes.z_transmit": self.z_transmit,
            "time.t_final_s": self.t_final,
            "time.n_periods": self.n_periods,
            "time.v_cfl": self.v_cfl,
            "time.energy_every": self.energy_every,
            "output.directory": self.output_dir,
            "output.spectra_csv": self.spectra_csv,
            "output.time_series_csv": self.time_series_csv,
            "output.oracle_csv": self.oracle_csv,
            "output.stability_csv": self.stability_csv,
            "output.plot_script": self.plot_script,
            "tolerances.geometric_m": self.geometric_tol,
            "tolerances.incident_floor": self.incident_floor,
            "stability.thetas_deg": list(self.stability_thetas_deg),
            "stability.v_min": self.stability_v_min,
            "stability.v_max": self.stability_v_max,
            "stability.tolerance": self.stability_tolerance,
            "stability.probe_periods": self.stability_probe_periods,
            "stability.order": self.stability_order,
            "stability.elements_per_wavelength": self.stability_elements_per_wavelength,
            "oracle.num_freqs": self.oracle_num_freqs,
        }
        for mid, mat in sorted(self.materials.items()):
            if mat.pec:
                out[f"materials.{mid}.pec"] = True
            else:
                out[f"materials.{mid}.eps_r"] = mat.eps_r
                out[f"materials.{mid}.mu_r"] = mat.mu_r
        return out


def _index(mat: Material) -> float:
    return math.sqrt(mat.eps_r * mat.mu_r)


# -- Parsing ---------------------------------------------------------------------------


def _flatten(table: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in table.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


def _key_lines(text: str) -> dict[str, int]:
    """First line on which each dotted key is assigned."""
    lines: dict[str, int] = {}
    table = ""
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        header = _HEADER.match(line)
        if header:
            table = header.group(1).replace('"', "").replace("'", "").replace(" ", "")
            continue
        assign = _ASSIGN.match(line)
        if assign:
            key = assign.group(1).replace('"', "").replace("'", "").replace(" ", "")
            full = f"{table}.{key}" if table else key
            lines.setdefault(full, number)
    return lines


class _Reader:
    """Typed access to the flattened table with per-key diagnostics."""

    def __init__(self, flat: dict[str, Any], lines: dict[str, int]) -> None:
        self.flat = flat
        self.lines = lines

    def fail(self, key: str, problem: str, message: str | None = None) -> ConfigurationError:
        return ConfigurationError(
            message or f"{key}: {problem}", fields={key: problem}, line=self.lines.get(key)
        )

    def get(self, key: str) -> Any:
        kind, default = _SCHEMA[key]
        if key not in self.flat:
            if default is ...:
                return self._missing(key)
            return list(default) if isinstance(default, list) else default
        value = self.flat[key]
        try:
            return _coerce(kind, value)
        except (TypeError, ValueError) as exc:
            raise self.fail(key, str(exc)) from None

    def _missing(self, key: str) -> Any:
        raise ConfigurationError(f"missing required key {key}", fields={key: "required"})


def _coerce(kind: str, value: Any) -> Any:
    if kind == "str":
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise TypeError("expected true or false")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError("expected an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        return float(value)
    if kind in ("float_list", "vec3"):
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise TypeError("expected a list of numbers")
        if kind == "vec3" and len(value) != 3:
            raise ValueError("expected exactly 3 components")
        return [float(v) for v in value]
    if kind == "int_list":
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise TypeError("expected a list of integers")
        return list(value)
    if kind == "blocks":
        if not isinstance(value, list):
            raise TypeError("expected a list of {lo, hi, material} tables")
        blocks = []
        for item in value:
            if not isinstance(item, Mapping) or set(item) != {"lo", "hi", "material"}:
                raise ValueError("each block needs exactly lo, hi and material")
            lo, hi = _coerce("vec3", item["lo"]), _coerce("vec3", item["hi"])
            blocks.append(Block(tuple(lo), tuple(hi), _coerce("int", item["material"])))
        return blocks
    raise ValueError(f"unknown kind {kind}")  # pragma: no cover


def parse_config(text: str, units: UnitSystem = SI) -> RunConfig:
    """Parse and validate configuration text.

    Args:
        text: TOML configuration.
        units: Unit system the physical values are expressed in.

    Returns:
        A :class:`RunConfig` with every default filled in.

    Raises:
        ConfigurationError: On syntax errors, unknown or missing keys,
            wrongly typed values or inconsistent geometry.
    """
    try:
        table = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        found = _LINE_IN_MESSAGE.search(str(exc))
        raise ConfigurationError(
            f"configuration is not valid TOML: {exc}",
            fields={"<text>": "syntax"},
            line=int(found.group(1)) if found else None,
        ) from None

    flat = _flatten(table)
    lines = _key_lines(text)
    reader = _Reader(flat, lines)

    materials_raw: dict[int, dict[str, Any]] = {}
    for key, value in flat.items():
        if key in _SCHEMA:
            continue
        match = _MATERIAL_KEY.match(key)
        if match is None:
            raise reader.fail(key, "unknown key", f"unknown configuration key {key}")
        materials_raw.setdefault(int(match.group(1)), {})[match.group(2)] = value

    mode = reader.get("mode")
    if mode not in MODES:
        raise reader.fail("mode", f"must be one of {', '.join(MODES)}")

    a1, a2 = reader.get("lattice.a1_m"), reader.get("lattice.a2_m")
    try:
        lattice = Lattice2(tuple(a1), tuple(a2))
    except ConfigurationError as exc:
        raise reader.fail("lattice.a1_m", exc.message, exc.message) from None
    materials = _materials(materials_raw, reader)

    theta_deg = reader.get("incidence.theta_deg")
    if not 0.0 <= theta_deg < 90.0:
        raise reader.fail("incidence.theta_deg", "must lie in [0, 90)")
    polarization = reader.get("incidence.polarization")
    if polarization not in ("TE", "TM"):
        raise reader.fail("incidence.polarization", "must be TE or TM")
    direction = reader.get("incidence.direction")
    if direction not in ("down", "up"):
        raise reader.fail("incidence.direction", "must be down or up")
    f_min, f_max = reader.get("incidence.f_min_hz"), reader.get("incidence.f_max_hz")
    if not 0.0 < f_min < f_max:
        raise reader.fail("incidence.f_min_hz", "need 0 < f_min_hz < f_max_hz")

    order = reader.get("mesh.order")
    if not 1 <= order <= 8:
        raise reader.fail("mesh.order", "must lie in 1..8")
    z_breaks = reader.get("structure.z_breaks")
    if len(z_breaks) < 2 or any(b <= a for a, b in zip(z_breaks, z_breaks[1:])):
        raise reader.fail("structure.z_breaks", "must be strictly increasing")
    layer_materials = reader.get("structure.layer_materials")
    if len(layer_materials) != len(z_breaks) - 1:
        raise reader.fail(
            "structure.layer_materials", f"expected {len(z_breaks) - 1} entries, one per layer"
        )
    nz = reader.get("mesh.nz")
    if nz and len(nz) != len(layer_materials):
        raise reader.fail("mesh.nz", f"expected {len(layer_materials)} entries")
    blocks = reader.get("structure.blocks")
    for m in list(layer_materials) + [b.material_id for b in blocks]:
        if m not in materials:
            key = "structure.layer_materials" if m in layer_materials else "structure.blocks"
            raise reader.fail(key, f"material {m} is not defined")

    planes = _planes(reader, z_breaks, layer_materials, materials, direction, blocks)

    incidence = IncidenceConfig.for_band(f_min, f_max, theta=math.radians(theta_deg))
    t_final = reader.get("time.t_final_s")
    n_periods = reader.get("time.n_periods")
    if t_final is None:
        n_max = max(_index(m) for m in materials.values() if not m.pec)
        transit = (z_breaks[-1] - z_breaks[0]) * n_max / units.c0
        t_final = 2.0 * incidence.t0 + transit + n_periods / f_min
    elif t_final <= 0.0:
        raise reader.fail("time.t_final_s", "must be positive")
    v_cfl = reader.get("time.v_cfl")
    if v_cfl <= 0.0:
        raise reader.fail("time.v_cfl", "must be positive")
    energy_every = reader.get("time.energy_every")
    if energy_every < 1:
        raise reader.fail("time.energy_every", "must be >= 1")

    geometric_tol = reader.get("tolerances.geometric_m")
    if geometric_tol is None:
        geometric_tol = lattice.default_tolerance()

    v_min, v_max = reader.get("stability.v_min"), reader.get("stability.v_max")
    if not 0.0 < v_min < v_max:
        raise reader.fail("stability.v_min", "need 0 < v_min < v_max")

    return RunConfig(
        mode=mode,
        lattice=lattice,
        mesh_file=reader.get("mesh.file"),
        order=order,
        nx=reader.get("mesh.nx"),
        ny=reader.get("mesh.ny"),
        nz=tuple(nz),
        points_per_wavelength=reader.get("mesh.points_per_wavelength"),
        stagger=reader.get("mesh.stagger"),
        z_breaks=tuple(z_breaks),
        layer_materials=tuple(layer_materials),
        blocks=tuple(blocks),
        materials=materials,
        theta_deg=theta_deg,
        phi_deg=reader.get("incidence.phi_deg"),
        polarization=polarization,
        f_min=f_min,
        f_max=f_max,
        amplitude=reader.get("incidence.amplitude"),
        direction=direction,
        z_tfsf=planes["planes.z_tfsf"],
        z_reflect=planes["planes.z_reflect"],
        z_transmit=planes["planes.z_transmit"],
        t_final=t_final,
        n_periods=n_periods,
        v_cfl=v_cfl,
        energy_every=energy_every,
        output_dir=reader.get("output.directory"),
        spectra_csv=reader.get("output.spectra_csv"),
        time_series_csv=reader.get("output.time_series_csv"),
        oracle_csv=reader.get("output.oracle_csv"),
        stability_csv=reader.get("output.stability_csv"),
        plot_script=reader.get("output.plot_script"),
        geometric_tol=geometric_tol,
        incident_floor=reader.get("tolerances.incident_floor"),
        stability_thetas_deg=tuple(reader.get("stability.thetas_deg")),
        stability_v_min=v_min,
        stability_v_max=v_max,
        stability_tolerance=reader.get("stability.tolerance"),
        stability_probe_periods=reader.get("stability.probe_periods"),
        stability_order=reader.get("stability.order"),
        stability_elements_per_wavelength=reader.get("stability.elements_per_wavelength"),
        oracle_num_freqs=reader.get("oracle.num_freqs"),
        units=units,
        raw=flat,
    )


def load_config(path: str | os.PathLike[str], units: UnitSystem = SI) -> RunConfig:
    """Read and parse a configuration file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(
            f"cannot read configuration {path}: {exc}", fields={"--config": "unreadable"}
        ) from None
    return parse_config(text, units)


def _materials(raw: dict[int, dict[str, Any]], reader: _Reader) -> dict[int, Material]:
    materials: dict[int, Material] = {1: Material()}
    for mid, values in sorted(raw.items()):
        key = f"materials.{mid}"
        pec = values.get("pec", False)
        if not isinstance(pec, bool):
            raise reader.fail(f"{key}.pec", "expected true or false")
        if pec:
            if set(values) - {"pec"}:
                raise reader.fail(f"{key}.pec", "a PEC material takes no eps_r or mu_r")
            materials[mid] = Material(pec=True)
            continue
        params = {}
        for name in ("eps_r", "mu_r"):
            value = values.get(name, 1.0)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise reader.fail(f"{key}.{name}", "expected a number")
            if not math.isfinite(value) or value < 1.0:
                raise reader.fail(f"{key}.{name}", "must be a finite number >= 1")
            params[name] = float(value)
        materials[mid] = Material(**params)
    return materials


def _planes(
    reader: _Reader,
    z_breaks: list[float],
    layer_materials: list[int],
    materials: dict[int, Material],
    direction: str,
    blocks: list[Block],
) -> dict[str, float]:
    values: dict[str, float] = {}
    n = len(z_breaks)
    defaults_down = {
        "planes.z_transmit": 1,
        "planes.z_tfsf": n - 3,
        "planes.z_reflect": n - 2,
    }
    defaults = (
        defaults_down
        if direction == "down"
        else {"planes.z_transmit": n - 2, "planes.z_tfsf": 2, "planes.z_reflect": 1}
    )
    for key, idx in defaults.items():
        value = reader.get(key)
        if value is None:
            if n < 5:
                raise reader.fail(
                    key, "cannot be derived from fewer than five z_breaks; set it explicitly"
                )
            value = z_breaks[idx]
        values[key] = value

    tol = 1e-9 * (z_breaks[-1] - z_breaks[0])
    for key, z in values.items():
        if not z_breaks[0] < z < z_breaks[-1]:
            raise reader.fail(key, "must lie strictly inside the structure")
        if not any(abs(z - b) <= tol for b in z_breaks):
            raise reader.fail(key, "must coincide with one of structure.z_breaks")
        for block in blocks:
            if block.lo[2] < z < block.hi[2]:
                raise reader.fail(key, "is crossed by a structure block")

    zt, zs, zr = values["planes.z_transmit"], values["planes.z_tfsf"], values["planes.z_reflect"]
    ordered = zt < zs < zr if direction == "down" else zr < zs < zt
    if not ordered:
        problem = (
            "z_reflect must lie in the scattered-field region, on the incident side of z_tfsf"
        )
        raise reader.fail("planes.z_reflect", problem)

    # The incident wave is injected into a homogeneous medium.
    idx = int(np.argmin(np.abs(np.asarray(z_breaks) - zs)))
    below, above = materials[layer_materials[idx - 1]], materials[layer_materials[idx]]
    if below != above or below.pec:
        raise reader.fail("planes.z_tfsf", "must lie inside one homogeneous dielectric")
    return values


# -- Manifest and plot script ---------------------------------------------------------


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(value, Mapping):
        inner = ", ".join(f"{k} = {_toml_value(v)}" for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot render {type(value).__name__} as TOML")


def render_manifest(flat: Mapping[str, Any], derived: Mapping[str, Any] | None = None) -> str:
    """Render the run manifest as TOML, grouped by section.

    ``flat`` is :meth:`RunConfig.to_dict` output; ``derived`` values go to
    a trailing ``[derived]`` table (nested mappings become sub-tables).
    """
    sections: dict[str, list[tuple[str, Any]]] = {}
    top: list[tuple[str, Any]] = []
    for key, value in flat.items():
        if value is None:
            continue
        if "." not in key:
            top.append((key, value))
            continue
        section, name = key.rsplit(".", 1)
        sections.setdefault(section, []).append((name, value))

    out = [f"{name} = {_toml_value(value)}" for name, value in top]
    for section, items in sections.items():
        out.append("")
        out.append(f"[{section}]")
        out.extend(f"{name} = {_toml_value(value)}" for name, value in items)

    def emit(prefix: str, table: Mapping[str, Any]) -> None:
        scalars = [(k, v) for k, v in table.items() if not isinstance(v, Mapping) and v is not None]
        nested = [(k, v) for k, v in table.items() if isinstance(v, Mapping)]
        out.append("")
        out.append(f"[{prefix}]")
        out.extend(f"{k} = {_toml_value(v)}" for k, v in scalars)
        for k, v in nested:
            emit(f"{prefix}.{k}", v)

    if derived:
        emit("derived", derived)
    return "\n".join(out).lstrip("\n") + "\n"


PLOT_SCRIPT = '''\
"""Plot the spectra and time series written by floquetdg."""

import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent

fig, (ax_t, ax_f) = plt.subplots(2, 1, figsize=(8, 8))
series = np.genfromtxt(here / "{time_series}", delimiter=",", names=True)
for name in ("A00x", "A00y", "A00z"):
    ax_t.plot(series["t_s"], series[name], label=name)
ax_t.set_xlabel("t (s)")
ax_t.legend()

spectra = np.genfromtxt(here / "{spectra}", delimiter=",", names=True)
ax_f.plot(spectra["f_hz"] / 1e6, spectra["R"], label="R")
ax_f.plot(spectra["f_hz"] / 1e6, spectra["T"], label="T")
oracle = here / "{oracle}"
if oracle.exists():
    ref = np.genfromtxt(oracle, delimiter=",", names=True)
    ax_f.plot(ref["f_hz"] / 1e6, ref["R"], "k--", label="R (multilayer)")
ax_f.set_xlabel("f (MHz)")
ax_f.set_ylim(0.0, 1.05)
ax_f.legend()
fig.tight_layout()
fig.savefig(here / "spectra.png", dpi=150)
'''


def write_plot_script(cfg: RunConfig) -> Path:
    """Write ``plot_spectra.py`` next to the CSV outputs."""
    path = cfg.output_path("plot_spectra.py")
    path.write_text(
        PLOT_SCRIPT.format(
            time_series=cfg.time_series_csv, spectra=cfg.spectra_csv, oracle=cfg.oracle_csv
        ),
        encoding="utf-8",
    )
    return path
