"""
Run orchestration: time marching, spectra and the CFL scale search.

Example::

    from floquetdg import load_config, run_simulation

    cfg = load_config("configs/slab_te.toml")
    result = run_simulation(cfg)
    freqs, R, T = result.power_spectra()
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._constants import (
    BLOWUP_FACTOR,
    CFL_MAX,
    CFL_MIN,
    CFL_TOL,
    INCIDENT_FLOOR,
    SI,
    STABILITY_GROWTH,
    ZERO_PAD,
    UnitSystem,
)
from .config import RunConfig
from .exceptions import BlowUpError, ProbeError, SearchFailureError
from .mesh import generate_box_mesh
from .operators import MaterialTable
from .periodic import pair_periodic_faces
from .postproc import (
    PlaneProbe,
    Spectrum,
    build_probe,
    incident_reference_spectrum,
    power_coefficient,
    record_A00,
    spectrum,
)
from .solver import Discretization, compute_dt, compute_rhs, lsrk4_step
from .types import IncidenceConfig, Lattice2, Material, Polarization

logger = logging.getLogger(__name__)


# -- Time marching -------------------------------------------------------------------


@dataclass(frozen=True)
class MarchRecord:
    """Samples collected while marching.

    ``a00`` holds one ``(n_steps + 1, 3)`` series per probe. ``energy`` is
    ``nan`` on steps where it was not sampled.
    """

    times: np.ndarray
    a00: tuple[np.ndarray, ...]
    energy: np.ndarray
    steps: int
    q: np.ndarray

    def sampled_energy(self) -> tuple[np.ndarray, np.ndarray]:
        keep = np.isfinite(self.energy)
        return self.times[keep], self.energy[keep]


def march(
    disc: Discretization,
    dt: float,
    n_steps: int,
    probes: Sequence[PlaneProbe] = (),
    energy_every: int = 10,
    q0: np.ndarray | None = None,
    injection_end: float | None = None,
) -> MarchRecord:
    """Advance from ``t = 0`` for ``n_steps`` steps of size ``dt``.

    Blow-up is declared on a non-finite state or when the energy exceeds
    ``BLOWUP_FACTOR`` times the largest energy seen up to ``injection_end``
    (the initial energy when no injection is running).

    Raises:
        BlowUpError: On blow-up, carrying the detection time.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be non-negative, got {n_steps}")
    if energy_every < 1:
        raise ValueError(f"energy_every must be >= 1, got {energy_every}")
    q = disc.zeros() if q0 is None else np.array(q0, dtype=float)
    resid = np.zeros_like(q)
    times = dt * np.arange(n_steps + 1)
    a00 = [np.zeros((n_steps + 1, 3)) for _ in probes]
    energy = np.full(n_steps + 1, np.nan)

    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        return compute_rhs(state, t, disc)

    def sample(step: int) -> None:
        for series, probe in zip(a00, probes):
            series[step] = record_A00(q, probe)

    sample(0)
    energy[0] = disc.energy(q)
    reference = energy[0]
    for step in range(1, n_steps + 1):
        t = times[step - 1]
        lsrk4_step(q, t, dt, rhs, resid)
        sample(step)
        if step % energy_every and step != n_steps:
            continue
        e = disc.energy(q)
        energy[step] = e
        if not math.isfinite(e):
            raise BlowUpError(f"non-finite energy at t={times[step]:.6e} s", time=times[step])
        if injection_end is not None and times[step] <= injection_end:
            reference = max(reference, e)
        elif reference > 0.0 and e > BLOWUP_FACTOR * reference:
            raise BlowUpError(
                f"energy {e:.3e} exceeds {BLOWUP_FACTOR:.0e} x reference {reference:.3e} "
                f"at t={times[step]:.6e} s",
                time=times[step],
            )
        logger.debug("step %d/%d  t=%.6e  energy=%.6e", step, n_steps, times[step], e)
    return MarchRecord(times=times, a00=tuple(a00), energy=energy, steps=n_steps, q=q)


# -- Simulation -------------------------------------------------------------------------


def _transverse_kz_over_mu(material: Material, theta: float) -> float:
    """Normal power-flow factor ``Re(k_z/k0) / mu_r`` of a plane wave in ``material``."""
    arg = material.eps_r * material.mu_r - math.sin(theta) ** 2
    return math.sqrt(arg) / material.mu_r if arg > 0.0 else 0.0


@dataclass(frozen=True)
class SimulationResult:
    """Recorded time series of one run.

    Attributes:
        times: ``(n,)`` sample times (s).
        a00_reflect: ``(n, 3)`` cell-averaged ``P`` on the reflection plane.
        a00_transmit: ``(n, 3)`` cell-averaged ``P`` on the transmission plane.
        energy: ``(n,)`` discrete energy, ``nan`` where not sampled.
        dt: Step size (s).
        steps: Number of steps taken.
        incidence: The excitation.
        f_min, f_max: Analysis band (Hz).
        transmit_factor: Ratio of normal power-flow factors between the
            transmission and incidence media.
        summary: Derived quantities echoed to the manifest.
    """

    times: np.ndarray
    a00_reflect: np.ndarray
    a00_transmit: np.ndarray
    energy: np.ndarray
    dt: float
    steps: int
    incidence: IncidenceConfig
    f_min: float
    f_max: float
    transmit_factor: float = 1.0
    incident_floor: float = INCIDENT_FLOOR
    summary: dict[str, Any] = field(default_factory=dict)

    def spectra(self) -> tuple[Spectrum, Spectrum, Spectrum]:
        """Continuous-normalized reflected, transmitted and incident spectra."""
        reflected = spectrum(self.a00_reflect, self.dt).to_continuous()
        transmitted = spectrum(self.a00_transmit, self.dt).to_continuous()
        incident = incident_reference_spectrum(self.incidence, reflected.freqs)
        return reflected, transmitted, incident

    def power_spectra(
        self, band_only: bool = True
    ) -> tuple[np.ndarray, np.ma.MaskedArray, np.ma.MaskedArray]:
        """``(f, R, T)``; frequencies outside the band are dropped when ``band_only``."""
        reflected, transmitted, incident = self.spectra()
        r = power_coefficient(reflected, incident, self.incident_floor)
        t = power_coefficient(transmitted, incident, self.incident_floor) * self.transmit_factor
        if not band_only:
            return reflected.freqs, r, t
        keep = reflected.band(self.f_min, self.f_max)
        return reflected.freqs[keep], r[keep], t[keep]

    def band_average(self) -> tuple[float, float]:
        _, r, t = self.power_spectra()
        return float(np.ma.mean(r)), float(np.ma.mean(t))


def _probe_medium(disc: Discretization, probe: PlaneProbe) -> Material:
    ids = np.unique(disc.mesh.material[probe.elem])
    if len(ids) > 1:
        logger.warning(
            "recording plane z=%.6g m touches materials %s; using %d",
            probe.z,
            ids.tolist(),
            int(ids[0]),
        )
    return disc.materials[int(ids[0])]


def run_simulation(cfg: RunConfig) -> SimulationResult:
    """Build the discretization for ``cfg`` and march to ``cfg.t_final``.

    Raises:
        BlowUpError: If the state blows up.
        ProbeError: If a plane is not a full face layer of the mesh.
    """
    started = time.perf_counter()
    units = cfg.units
    mesh = cfg.build_mesh()
    incidence = cfg.incidence()
    materials = cfg.material_table()
    pmap = pair_periodic_faces(mesh, cfg.lattice, tolerance=cfg.geometric_tol)
    disc = Discretization.build(
        mesh,
        cfg.order,
        materials,
        incidence,
        lattice=cfg.lattice,
        pmap=pmap,
        z_tfsf=cfg.z_tfsf,
    )
    cell_area = cfg.lattice.cell_area
    probe_r = build_probe(mesh, disc.ref, disc.geo, cfg.z_reflect, cell_area)
    probe_t = build_probe(mesh, disc.ref, disc.geo, cfg.z_transmit, cell_area)

    incident_medium = _probe_medium(disc, probe_r)
    transmit_medium = _probe_medium(disc, probe_t)
    for medium in (incident_medium, transmit_medium):
        if medium.pec:
            raise ProbeError("a recording plane lies on a PEC region")
    transmit_factor = _transverse_kz_over_mu(
        transmit_medium, incidence.theta
    ) / _transverse_kz_over_mu(incident_medium, incidence.theta)

    dt = compute_dt(mesh.h_min, cfg.order, cfg.v_cfl, units)
    n_steps = max(1, math.ceil(cfg.t_final / dt - 1e-9))
    logger.info(
        "time stepping: dt=%.6e s, %d steps to t=%.6e s (V=%.3g)",
        dt,
        n_steps,
        n_steps * dt,
        cfg.v_cfl,
    )
    record = march(
        disc,
        dt,
        n_steps,
        probes=(probe_r, probe_t),
        energy_every=cfg.energy_every,
        injection_end=2.0 * incidence.t0,
    )
    wall = time.perf_counter() - started
    logger.info("run finished: %d steps in %.1f s", n_steps, wall)

    summary = {
        "dt_s": dt,
        "steps": n_steps,
        "t_end_s": float(record.times[-1]),
        "Np": disc.ref.np_,
        "K": disc.num_elements,
        "dofs": disc.summary["dofs"],
        "df_hz": 1.0 / (record.times.size * dt * ZERO_PAD),
        "transmit_factor": transmit_factor,
        "incidence": incidence.to_dict(),
        "mesh": mesh.stats(),
        "periodic": pmap.stats(),
        "wall_time_s": wall,
    }
    return SimulationResult(
        times=record.times,
        a00_reflect=record.a00[0],
        a00_transmit=record.a00[1],
        energy=record.energy,
        dt=dt,
        steps=n_steps,
        incidence=incidence,
        f_min=cfg.f_min,
        f_max=cfg.f_max,
        transmit_factor=transmit_factor,
        incident_floor=cfg.incident_floor,
        summary=summary,
    )


# -- CFL scale search ---------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityProbe:
    """Free-space cell used to probe time-step stability.

    The cell is square with side ``lambda_min / 2`` and element size
    ``lambda_min / elements_per_wavelength``, three equal layers high, and
    excited from the TF/SF plane at two thirds of its height.
    """

    f_min: float
    f_max: float
    order: int = 2
    elements_per_wavelength: float = 10.0
    probe_periods: float = 5.0
    polarization: Polarization = "TE"
    phi: float = 0.0
    units: UnitSystem = SI

    @classmethod
    def from_config(cls, cfg: RunConfig) -> StabilityProbe:
        return cls(
            f_min=cfg.f_min,
            f_max=cfg.f_max,
            order=cfg.stability_order,
            elements_per_wavelength=cfg.stability_elements_per_wavelength,
            probe_periods=cfg.stability_probe_periods,
            polarization=cfg.polarization,  # type: ignore[arg-type]
            phi=cfg.phi,
            units=cfg.units,
        )

    @property
    def wavelength_min(self) -> float:
        return self.units.c0 / self.f_max

    def lattice(self) -> Lattice2:
        side = 0.5 * self.wavelength_min
        return Lattice2.rectangular(side, side)

    def discretization(self, theta: float) -> Discretization:
        lattice = self.lattice()
        side = lattice.lengths[0]
        n = max(1, math.ceil(self.elements_per_wavelength / 2.0 - 1e-9))
        mesh = generate_box_mesh(
            lattice, (0.0, side, 2.0 * side, 3.0 * side), n, n, (n, n, n), (1, 1, 1)
        )
        incidence = IncidenceConfig.for_band(
            self.f_min,
            self.f_max,
            theta=theta,
            phi=self.phi,
            polarization=self.polarization,
            z_ref=2.0 * side,
        )
        return Discretization.build(
            mesh,
            self.order,
            MaterialTable({1: Material()}, self.units),
            incidence,
            lattice=lattice,
            z_tfsf=2.0 * side,
        )

    def duration(self, incidence: IncidenceConfig) -> float:
        return 2.0 * incidence.t0 + self.probe_periods / self.f_min


def is_stable(disc: Discretization, v_cfl: float, duration: float) -> bool:
    """Whether a run at scale ``v_cfl`` stays bounded after the excitation.

    Stable means no blow-up and, after the pulse has been injected, energy
    never exceeds ``STABILITY_GROWTH`` times its value when injection ended.
    """
    dt = compute_dt(disc.mesh.h_min, disc.ref.order, v_cfl, disc.units)
    injection_end = 2.0 * disc.incidence.t0
    n_steps = max(1, math.ceil(duration / dt))
    every = max(1, n_steps // 200)
    try:
        record = march(disc, dt, n_steps, energy_every=every, injection_end=injection_end)
    except BlowUpError as exc:
        logger.info("V=%.4g unstable: %s", v_cfl, exc.message)
        return False
    times, energy = record.sampled_energy()
    after = times > injection_end
    if not after.any():
        return True
    start = int(np.flatnonzero(after)[0])
    reference = energy[max(start - 1, 0)]
    peak = float(energy[start:].max())
    stable = peak <= STABILITY_GROWTH * reference if reference > 0.0 else peak == 0.0
    logger.info(
        "V=%.4g %s: post-excitation peak %.3e vs %.3e",
        v_cfl,
        "stable" if stable else "unstable",
        peak,
        reference,
    )
    return stable


def find_min_stable_scale(
    theta: float,
    setup: StabilityProbe,
    v_min: float = CFL_MIN,
    v_max: float = CFL_MAX,
    tol: float = CFL_TOL,
) -> float:
    """Smallest stable CFL scale ``V`` for incidence angle ``theta`` (radians).

    Bisects on ``[v_min, v_max]``; the returned scale is stable and lies
    within ``tol`` of the stability threshold.

    Raises:
        SearchFailureError: If even ``v_max`` is unstable.
    """
    if not 0.0 < v_min < v_max or tol <= 0.0:
        raise ValueError(f"invalid bracket [{v_min}, {v_max}] or tolerance {tol}")
    disc = setup.discretization(theta)
    duration = setup.duration(disc.incidence)
    logger.info("stability search at theta=%.2f deg", math.degrees(theta))
    if is_stable(disc, v_min, duration):
        return v_min
    if not is_stable(disc, v_max, duration):
        raise SearchFailureError(
            f"unstable even at V={v_max:g} for theta={math.degrees(theta):.4g} deg",
            details={"theta_deg": math.degrees(theta), "v_max": v_max},
        )
    lo, hi = v_min, v_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_stable(disc, mid, duration):
            hi = mid
        else:
            lo = mid
    logger.info("theta=%.2f deg: V=%.4g", math.degrees(theta), hi)
    return hi
