"""
Property suites behind the ``verify`` mode.

Every check builds its own small problem in natural units, so the suite
runs in seconds and is independent of any configuration file.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ._constants import NATURAL
from .mesh import generate_box_mesh
from .operators import MaterialTable
from .oracle import multilayer_RT
from .periodic import pair_periodic_faces
from .solver import (
    Discretization,
    bc_jump,
    compute_dt,
    compute_rhs,
    incident_fields,
    lsrk4_step,
    maxwell_rhs,
    numerical_flux,
)
from .types import BoundaryTag, IncidenceConfig, Lattice2, LayerStack, Material

logger = logging.getLogger(__name__)

# (theta in degrees, CFL scale) of the PEC cavities.
DISSIPATION_CASES = ((0.0, 1.0), (30.0, 2.0))


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one property check: ``measured`` is compared against ``limit``."""

    name: str
    passed: bool
    measured: float
    limit: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name:<32} {self.measured:.3e} (limit {self.limit:.1e}){extra}"


def _check(name: str, measured: float, limit: float, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(measured <= limit), float(measured), limit, detail)


# -- Small fixtures ----------------------------------------------------------------------


def _smooth_state(disc: Discretization, seed: int = 7) -> np.ndarray:
    """Low-order trigonometric field, periodic over the cell, with random coefficients."""
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((6, 3))
    lo, hi = disc.mesh.bounding_box
    span = hi - lo

    def field(points: np.ndarray) -> np.ndarray:
        x = 2.0 * math.pi * (points[..., 0] - lo[0]) / span[0]
        y = 2.0 * math.pi * (points[..., 1] - lo[1]) / span[1]
        z = math.pi * (points[..., 2] - lo[2]) / span[2]
        basis = np.stack([np.cos(x), np.sin(y), np.sin(z) * np.cos(x + y)], axis=-1)
        return basis @ coeffs.T

    return disc.project(field)


def _cell_disc(
    theta: float,
    order: int = 2,
    pec_walls: bool = False,
    z_tfsf: float | None = None,
) -> Discretization:
    """Air/dielectric/air stack on a unit cell, three layers of two elements each."""
    lattice = Lattice2.rectangular(1.0, 1.0)
    wall = BoundaryTag.PEC if pec_walls else None
    mesh = generate_box_mesh(
        lattice,
        (0.0, 1.0, 2.0, 3.0),
        2,
        2,
        (2, 2, 2),
        (1, 2, 1),
        top_tag=wall or BoundaryTag.ABC_TOP,
        bottom_tag=wall or BoundaryTag.ABC_BOTTOM,
    )
    incidence = IncidenceConfig.for_band(0.3, 0.9, theta=theta, z_ref=z_tfsf or 0.0)
    materials = MaterialTable({1: Material(), 2: Material(eps_r=4.0)}, NATURAL)
    return Discretization.build(mesh, order, materials, incidence, lattice=lattice, z_tfsf=z_tfsf)


# -- Checks --------------------------------------------------------------------------------


def check_oracle() -> list[CheckResult]:
    """Energy balance, quarter-wave reflectance and TE/TM agreement at normal incidence."""
    stack = LayerStack.slab(1.0, 4.0)
    f = np.linspace(0.05, 2.0, 97)
    r_te, t_te = multilayer_RT(stack, math.radians(50.0), f, "TE", NATURAL)
    r_tm, t_tm = multilayer_RT(stack, math.radians(50.0), f, "TM", NATURAL)
    balance = max(np.max(np.abs(r_te + t_te - 1.0)), np.max(np.abs(r_tm + t_tm - 1.0)))
    quarter, _ = multilayer_RT(LayerStack.slab(0.125, 4.0), 0.0, 1.0, "TE", NATURAL)
    r0_te, _ = multilayer_RT(stack, 0.0, f, "TE", NATURAL)
    r0_tm, _ = multilayer_RT(stack, 0.0, f, "TM", NATURAL)
    return [
        _check("oracle R+T=1", balance, 1e-12),
        _check("oracle quarter-wave R=0.36", abs(quarter - 0.36), 1e-12),
        _check("oracle TE=TM at normal", float(np.max(np.abs(r0_te - r0_tm))), 1e-12),
    ]


def check_flux_and_jumps() -> list[CheckResult]:
    flux = numerical_flux([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], 1.0, 1.0, 1.0, 1.0, [0, 0, 1])
    expected = np.array([-0.5, 0.0, 0.0, 0.0, 0.5, 0.0])
    jp, js = bc_jump("ABC", "TE", [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], math.radians(60.0))
    jump_err = float(np.max(np.abs(jp - [-1.0, 0.0, 0.0])) + np.max(np.abs(js - [0, -2.0, 0])))
    return [
        _check("flux unit jump", float(np.max(np.abs(flux - expected))), 1e-15),
        _check("ABC TE jump at 60 deg", jump_err, 1e-15),
    ]


def check_incident_phase() -> list[CheckResult]:
    inc = IncidenceConfig.for_band(0.3, 0.9, theta=math.radians(40.0), phi=0.3)
    pts = np.array([[0.0, 0.0, 0.4], [0.37, -1.2, 0.4], [2.5, 0.8, 0.4]])
    worst = 0.0
    for t in (inc.t0 - inc.tau, inc.t0, inc.t0 + 0.5 * inc.tau):
        p, s = incident_fields(pts, t, inc, 1.0, NATURAL)
        worst = max(worst, float(np.max(np.abs(p - p[0]))))
        impedance_gap = np.abs(np.linalg.norm(s, axis=1) - np.linalg.norm(p, axis=1))
        worst = max(worst, float(np.max(impedance_gap)))
    return [_check("incident field transverse phase", worst, 1e-14)]


def check_time_integrator() -> list[CheckResult]:
    y = np.zeros(1)
    lsrk4_step(y, 0.0, 1.0, lambda t, _: np.array([t * t]))
    errors = []
    for dt in (0.1, 0.05, 0.025):
        state = np.ones(1)
        for n in range(round(1.0 / dt)):
            lsrk4_step(state, n * dt, dt, lambda _, q: -q)
        errors.append(abs(state[0] - math.exp(-1.0)))
    slopes = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    return [
        _check("LSRK4 integrates t^2 exactly", abs(y[0] - 1.0 / 3.0), 1e-12),
        _check("LSRK4 order", max(abs(s - 4.0) for s in slopes), 0.1, f"slopes {slopes}"),
    ]


def check_uniform_state() -> list[CheckResult]:
    lattice = Lattice2.rectangular(1.0, 1.0)
    mesh = generate_box_mesh(
        lattice,
        (0.0, 1.0),
        2,
        2,
        (2,),
        (1,),
        top_tag=BoundaryTag.PEC,
        bottom_tag=BoundaryTag.PEC,
    )
    incidence = IncidenceConfig.for_band(0.3, 0.9, theta=math.radians(30.0))
    disc = Discretization.build(
        mesh, 2, MaterialTable({1: Material()}, NATURAL), incidence, lattice=lattice
    )
    # P normal to the walls leaves no tangential jump there.
    q = disc.zeros()
    q[2] = 0.7
    q[3:] = np.array([0.3, -0.4, 0.2])[:, None, None]
    rhs = compute_rhs(q, 0.0, disc)
    return [_check("uniform state is steady", float(np.max(np.abs(rhs))), 1e-10)]


def check_normal_incidence_reduction(steps: int = 100) -> list[CheckResult]:
    disc = _cell_disc(0.0, z_tfsf=2.0)
    q_a = _smooth_state(disc)
    q_b = q_a.copy()
    dt = compute_dt(disc.mesh.h_min, disc.ref.order, 2.0, NATURAL)
    for n in range(steps):
        lsrk4_step(q_a, n * dt, dt, lambda t, q: compute_rhs(q, t, disc))
        lsrk4_step(q_b, n * dt, dt, lambda t, q: maxwell_rhs(q, t, disc))
    rel = float(np.max(np.abs(q_a - q_b)) / max(np.max(np.abs(q_b)), 1e-300))
    return [_check("normal-incidence reduction", rel, 1e-11, f"{steps} steps")]


def _worst_energy_growth(disc: Discretization, q0: np.ndarray, dt: float, steps: int) -> float:
    """Largest relative energy change over single steps of size ``dt``."""
    q = q0.copy()
    energy = disc.energy(q)
    worst = -math.inf
    for n in range(steps):
        lsrk4_step(q, n * dt, dt, lambda t, s: compute_rhs(s, t, disc))
        e = disc.energy(q)
        worst = max(worst, (e - energy) / energy)
        energy = e
    return worst


def check_energy_dissipation(steps: int = 200) -> list[CheckResult]:
    """PEC cavity energy never grows, at the step rule and again at half the step.

    Normal incidence runs at V=1, the bare rule; the 30 degree cavity at V=2.
    """
    results: list[CheckResult] = []
    for theta_deg, v_cfl in DISSIPATION_CASES:
        disc = _cell_disc(math.radians(theta_deg), pec_walls=True)
        q0 = _smooth_state(disc)
        dt = compute_dt(disc.mesh.h_min, disc.ref.order, v_cfl, NATURAL)
        full = _worst_energy_growth(disc, q0, dt, steps)
        half = _worst_energy_growth(disc, q0, 0.5 * dt, 2 * steps)
        results.append(
            _check(
                f"PEC cavity energy at {theta_deg:g} deg",
                max(full, half, 0.0),
                1e-10,
                f"V={v_cfl:g}, {steps} steps, dt/2 worst {half:.1e}",
            )
        )
    return results


def check_fragment_area() -> list[CheckResult]:
    lattice = Lattice2.rectangular(1.0, 1.0)
    mesh = generate_box_mesh(lattice, (0.0, 1.0), 3, 2, (2,), (1,), stagger=True)
    pmap = pair_periodic_faces(mesh, lattice)
    return [
        _check(
            "fragment area conservation",
            pmap.area_error(),
            1e-12,
            f"{pmap.num_fragments} fragments",
        )
    ]


SUITES: dict[str, Callable[[], list[CheckResult]]] = {
    "oracle": check_oracle,
    "flux": check_flux_and_jumps,
    "incident": check_incident_phase,
    "integrator": check_time_integrator,
    "uniform": check_uniform_state,
    "reduction": check_normal_incidence_reduction,
    "dissipation": check_energy_dissipation,
    "fragments": check_fragment_area,
}


def run_verification(names: list[str] | None = None) -> list[CheckResult]:
    """Run the named suites (all of them by default) and collect their checks."""
    selected = names or list(SUITES)
    unknown = [n for n in selected if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown verification suites: {', '.join(unknown)}")
    results: list[CheckResult] = []
    for name in selected:
        logger.info("verify: %s", name)
        results.extend(SUITES[name]())
    return results


def format_report(results: list[CheckResult]) -> str:
    passed = sum(r.passed for r in results)
    lines = [r.line() for r in results]
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
