"""
Type definitions for floquetdg
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Literal

import numpy as np

from ._constants import BAND_EDGE_LEVEL, DELAY_WIDTHS, GEOMETRIC_TOL_SCALE, SI, UnitSystem
from .exceptions import ConfigurationError, MaterialError

Polarization = Literal["TE", "TM"]
Direction = Literal["down", "up"]


class BoundaryTag(IntEnum):
    """Tag carried by every element face.

    The integer values of ``PEC``, ``ABC_TOP`` and ``ABC_BOTTOM`` are the
    physical tags used for boundary triangles in MSH files.
    """

    INTERIOR = 0
    PEC = 1
    ABC_TOP = 2
    ABC_BOTTOM = 3
    PERIODIC_X = 4
    PERIODIC_Y = 5


@dataclass(frozen=True)
class Lattice2:
    """Orthogonal 2-lattice spanned by ``a1`` and ``a2`` (metres)."""

    a1: tuple[float, float, float]
    a2: tuple[float, float, float]

    def __post_init__(self) -> None:
        a1 = np.asarray(self.a1, dtype=float)
        a2 = np.asarray(self.a2, dtype=float)
        if a1.shape != (3,) or a2.shape != (3,):
            raise ConfigurationError(
                "lattice vectors must be 3-vectors", fields={"lattice": "shape"}
            )
        n1, n2 = float(np.linalg.norm(a1)), float(np.linalg.norm(a2))
        if n1 <= 0.0 or n2 <= 0.0:
            raise ConfigurationError(
                "lattice vectors must be nonzero", fields={"lattice": "zero length"}
            )
        if a1[2] != 0.0 or a2[2] != 0.0:
            raise ConfigurationError(
                "lattice vectors must lie in the xy-plane", fields={"lattice": "nonzero z"}
            )
        if abs(float(a1 @ a2)) > 1e-12 * n1 * n2:
            raise ConfigurationError(
                "lattice vectors must be orthogonal", fields={"lattice": "a1.a2 != 0"}
            )

    @classmethod
    def rectangular(cls, ax: float, ay: float) -> Lattice2:
        """Lattice with ``a1 = ax x`` and ``a2 = ay y``."""
        return cls(a1=(float(ax), 0.0, 0.0), a2=(0.0, float(ay), 0.0))

    @property
    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.a1, dtype=float), np.asarray(self.a2, dtype=float)

    @property
    def lengths(self) -> tuple[float, float]:
        a1, a2 = self.vectors
        return float(np.linalg.norm(a1)), float(np.linalg.norm(a2))

    @property
    def cell_area(self) -> float:
        l1, l2 = self.lengths
        return l1 * l2

    def default_tolerance(self) -> float:
        """Geometric tolerance scaled to the larger lattice vector."""
        return GEOMETRIC_TOL_SCALE * max(self.lengths)

    def to_dict(self) -> dict[str, Any]:
        return {"a1_m": list(self.a1), "a2_m": list(self.a2)}


@dataclass(frozen=True)
class Material:
    """Isotropic lossless material, or a perfect electric conductor."""

    eps_r: float = 1.0
    mu_r: float = 1.0
    pec: bool = False

    def __post_init__(self) -> None:
        if self.pec:
            return
        if not (math.isfinite(self.eps_r) and math.isfinite(self.mu_r)):
            raise MaterialError("material parameters must be finite")
        if self.eps_r < 1.0 or self.mu_r < 1.0:
            raise MaterialError(
                f"relative parameters must be >= 1 (eps_r={self.eps_r}, mu_r={self.mu_r})"
            )

    def impedance(self, units: UnitSystem = SI) -> float:
        """Wave impedance ``Z0 sqrt(mu_r / eps_r)`` in ohms."""
        if self.pec:
            raise MaterialError("a PEC material has no wave impedance")
        return units.z0 * math.sqrt(self.mu_r / self.eps_r)

    def admittance(self, units: UnitSystem = SI) -> float:
        return 1.0 / self.impedance(units)

    def to_dict(self) -> dict[str, Any]:
        if self.pec:
            return {"pec": True}
        return {"eps_r": self.eps_r, "mu_r": self.mu_r}


@dataclass(frozen=True)
class Block:
    """Axis-aligned box overriding the material of the hexes it contains."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    material_id: int

    def contains(self, point: np.ndarray) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= np.asarray(self.lo)) and np.all(p <= np.asarray(self.hi)))

    def to_dict(self) -> dict[str, Any]:
        return {"lo": list(self.lo), "hi": list(self.hi), "material": self.material_id}


@dataclass(frozen=True)
class IncidenceConfig:
    """Obliquely incident planewave and its modulated-Gaussian time signature.

    Angles are in radians. ``direction="down"`` means the wave travels
    towards -z, so the z-component of the unit wavevector is ``-cos(theta)``
    while ``theta`` itself is reported unsigned. ``z_ref`` is the height at
    which the pulse peak passes at ``t = t0``.

    Attributes:
        theta: Polar angle from the z-axis, in ``[0, pi/2)``.
        phi: Azimuth of the plane of incidence.
        polarization: ``"TE"`` (E perpendicular to the plane of incidence)
            or ``"TM"``.
        f_c: Carrier frequency (Hz).
        tau: Gaussian width (s).
        t0: Delay of the pulse peak (s).
        amplitude: Peak field ``E0`` (V/m).
        direction: ``"down"`` or ``"up"``.
        z_ref: Reference height (m).
    """

    theta: float = 0.0
    phi: float = 0.0
    polarization: Polarization = "TE"
    f_c: float = 1.0
    tau: float = 1.0
    t0: float = 4.5
    amplitude: float = 1.0
    direction: Direction = "down"
    z_ref: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta < math.pi / 2:
            raise ConfigurationError(
                f"theta must lie in [0, 90) degrees, got {math.degrees(self.theta):.6g}",
                fields={"incidence.theta_deg": "out of range"},
            )
        if self.polarization not in ("TE", "TM"):
            raise ConfigurationError(
                f"unknown polarization {self.polarization!r}",
                fields={"incidence.polarization": "must be TE or TM"},
            )
        if self.direction not in ("down", "up"):
            raise ConfigurationError(
                f"unknown direction {self.direction!r}",
                fields={"incidence.direction": "must be down or up"},
            )
        if self.tau <= 0.0:
            raise ConfigurationError("pulse width must be positive", fields={"tau": "<= 0"})

    @classmethod
    def for_band(
        cls,
        f_min: float,
        f_max: float,
        theta: float = 0.0,
        phi: float = 0.0,
        polarization: Polarization = "TE",
        amplitude: float = 1.0,
        direction: Direction = "down",
        z_ref: float = 0.0,
    ) -> IncidenceConfig:
        """Design a pulse covering ``[f_min, f_max]``.

        The carrier sits mid-band and the width is chosen so the spectrum
        drops to 10% of its peak at both band edges. The delay is 4.5 widths,
        which puts the turn-on transient below 1e-8 of the peak.
        """
        if not 0.0 < f_min < f_max:
            raise ConfigurationError(
                f"need 0 < f_min < f_max, got f_min={f_min}, f_max={f_max}",
                fields={"incidence.f_min_hz": "must be below f_max_hz"},
            )
        half_band = 0.5 * (f_max - f_min)
        tau = math.sqrt(-math.log(BAND_EDGE_LEVEL)) / (math.pi * half_band)
        return cls(
            theta=theta,
            phi=phi,
            polarization=polarization,
            f_c=0.5 * (f_min + f_max),
            tau=tau,
            t0=DELAY_WIDTHS * tau,
            amplitude=amplitude,
            direction=direction,
            z_ref=z_ref,
        )

    # -- Geometry ----------------------------------------------------------------

    @property
    def sign(self) -> float:
        """+1 for upward travel, -1 for downward travel."""
        return 1.0 if self.direction == "up" else -1.0

    @property
    def k_hat(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), self.sign * math.cos(self.theta)]
        )

    @property
    def k_parallel(self) -> np.ndarray:
        """Transverse components ``(kappa_x, kappa_y)`` of the unit wavevector."""
        return self.k_hat[:2].copy()

    @property
    def k_perp(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.k_hat[2]])

    @property
    def e_te(self) -> np.ndarray:
        return np.array([-math.sin(self.phi), math.cos(self.phi), 0.0])

    @property
    def e_tm(self) -> np.ndarray:
        return np.cross(self.k_hat, self.e_te)

    @property
    def polarization_vector(self) -> np.ndarray:
        return self.e_te if self.polarization == "TE" else self.e_tm

    def waveform(self, u: Any) -> Any:
        """Modulated Gaussian ``exp(-u^2/tau^2) sin(2 pi f_c u)``."""
        u = np.asarray(u, dtype=float)
        return np.exp(-((u / self.tau) ** 2)) * np.sin(2.0 * np.pi * self.f_c * u)

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta_deg": math.degrees(self.theta),
            "phi_deg": math.degrees(self.phi),
            "polarization": self.polarization,
            "f_c_hz": self.f_c,
            "tau_s": self.tau,
            "t0_s": self.t0,
            "amplitude": self.amplitude,
            "direction": self.direction,
            "z_ref_m": self.z_ref,
        }


@dataclass(frozen=True)
class Layer:
    """Planar layer; ``thickness`` is ignored for the two semi-infinite ends."""

    thickness: float
    eps_r: float = 1.0
    mu_r: float = 1.0


@dataclass(frozen=True)
class LayerStack:
    """Ordered multilayer, first and last layers semi-infinite."""

    layers: tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if len(self.layers) < 2:
            raise ConfigurationError(
                "a layer stack needs at least the two semi-infinite media",
                fields={"layers": "fewer than 2"},
            )
        for i, layer in enumerate(self.layers):
            if layer.eps_r < 1.0 or layer.mu_r < 1.0:
                raise MaterialError(f"layer {i}: eps_r and mu_r must be >= 1")
            if 0 < i < len(self.layers) - 1 and layer.thickness <= 0.0:
                raise ConfigurationError(
                    f"layer {i}: interior thickness must be positive",
                    fields={f"layers[{i}].thickness": "<= 0"},
                )

    @classmethod
    def slab(cls, thickness: float, eps_r: float, mu_r: float = 1.0) -> LayerStack:
        """Single slab between two half-spaces of vacuum."""
        return cls((Layer(0.0), Layer(thickness, eps_r, mu_r), Layer(0.0)))

    def reversed(self) -> LayerStack:
        return LayerStack(tuple(reversed(self.layers)))
