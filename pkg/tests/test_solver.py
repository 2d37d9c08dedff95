"""
Unit tests for floquetdg -- upwind flux, boundary jumps, incident field,
discretization assembly and the low-storage Runge-Kutta integrator.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from floquetdg._constants import NATURAL
from floquetdg.exceptions import BlowUpError, MaterialError, ProbeError
from floquetdg.mesh import generate_box_mesh
from floquetdg.operators import MaterialTable
from floquetdg.solver import (
    Discretization,
    FieldState,
    bc_jump,
    compute_dt,
    compute_rhs,
    incident_fields,
    lsrk4_step,
    numerical_flux,
)
from floquetdg.types import BoundaryTag, IncidenceConfig, Lattice2, Material

LATTICE = Lattice2.rectangular(1.0, 1.0)
Z_HAT = [0.0, 0.0, 1.0]


# -- Helpers ------------------------------------------------------------------

def cell(theta_deg: float = 0.0, pec: bool = False, z_tfsf=None, polarization="TE"):
    """Air/dielectric/air cell of height 3 on a unit lattice, order 2."""
    tag_top = BoundaryTag.PEC if pec else BoundaryTag.ABC_TOP
    tag_bottom = BoundaryTag.PEC if pec else BoundaryTag.ABC_BOTTOM
    mesh = generate_box_mesh(
        LATTICE,
        (0.0, 1.0, 2.0, 3.0),
        2,
        2,
        (1, 1, 1),
        (1, 2, 1),
        top_tag=tag_top,
        bottom_tag=tag_bottom,
    )
    inc = IncidenceConfig.for_band(
        0.3,
        0.9,
        theta=math.radians(theta_deg),
        polarization=polarization,
        z_ref=z_tfsf or 0.0,
    )
    materials = MaterialTable({1: Material(), 2: Material(eps_r=4.0)}, NATURAL)
    return Discretization.build(mesh, 2, materials, inc, lattice=LATTICE, z_tfsf=z_tfsf)


def staggered_cell(theta_deg: float = 0.0):
    """cell() between PEC walls on a 3 x 2 checkerboard split; the x planes do not match."""
    mesh = generate_box_mesh(
        LATTICE,
        (0.0, 1.0, 2.0, 3.0),
        3,
        2,
        (1, 1, 1),
        (1, 2, 1),
        stagger=True,
        top_tag=BoundaryTag.PEC,
        bottom_tag=BoundaryTag.PEC,
    )
    inc = IncidenceConfig.for_band(0.3, 0.9, theta=math.radians(theta_deg))
    materials = MaterialTable({1: Material(), 2: Material(eps_r=4.0)}, NATURAL)
    return Discretization.build(mesh, 2, materials, inc, lattice=LATTICE)


def periodic_field(period: float = 1.0):
    def field(pts):
        x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
        k = 2.0 * math.pi / period
        out = np.zeros(pts.shape[:-1] + (6,))
        out[..., 0] = np.cos(k * x) * np.sin(math.pi * z / 3.0)
        out[..., 1] = np.sin(k * y) * np.sin(math.pi * z / 3.0)
        out[..., 5] = np.cos(k * (x + y))
        return out

    return field


def quadratic_in_z(pts):
    out = np.zeros(pts.shape[:-1] + (6,))
    out[..., 0] = pts[..., 2] * (3.0 - pts[..., 2])
    return out


# -- numerical_flux() ---------------------------------------------------------

class TestNumericalFlux:
    def test_unit_tangential_jump_in_p(self):
        flux = numerical_flux([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], 1.0, 1.0, 1.0, 1.0, Z_HAT)
        np.testing.assert_allclose(flux, [-0.5, 0.0, 0.0, 0.0, 0.5, 0.0], atol=1e-15)

    def test_unit_tangential_jump_in_s(self):
        flux = numerical_flux([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0, 1.0, 1.0, 1.0, Z_HAT)
        np.testing.assert_allclose(flux, [0.0, -0.5, 0.0, -0.5, 0.0, 0.0], atol=1e-15)

    def test_zero_jump_gives_zero_flux(self):
        flux = numerical_flux(np.zeros(3), np.zeros(3), 2.0, 1.0, 0.5, 1.0, Z_HAT)
        np.testing.assert_array_equal(flux, np.zeros(6))

    def test_normal_jump_does_not_contribute(self):
        flux = numerical_flux(Z_HAT, Z_HAT, 1.0, 1.0, 1.0, 1.0, Z_HAT)
        np.testing.assert_allclose(flux, np.zeros(6), atol=1e-15)

    def test_flux_is_tangential(self):
        rng = np.random.default_rng(3)
        n = np.array([0.6, 0.0, 0.8])
        flux = numerical_flux(rng.normal(size=3), rng.normal(size=3), 1.3, 0.7, 1 / 1.3, 1 / 0.7, n)
        assert abs(flux[:3] @ n) < 1e-14
        assert abs(flux[3:] @ n) < 1e-14

    def test_impedance_weighting(self):
        # Jump in S seen from a side whose neighbour has impedance 3 and itself 1.
        flux = numerical_flux([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 3.0, 1.0, 1 / 3, 1.0, Z_HAT)
        np.testing.assert_allclose(flux[:3], [0.0, -0.75, 0.0], atol=1e-15)

    def test_broadcasts_over_leading_axes(self):
        jp = np.tile([1.0, 0.0, 0.0], (4, 5, 1))
        flux = numerical_flux(jp, np.zeros_like(jp), np.ones((4, 5)), 1.0, 1.0, 1.0, Z_HAT)
        assert flux.shape == (4, 5, 6)
        np.testing.assert_allclose(flux[2, 3], [-0.5, 0.0, 0.0, 0.0, 0.5, 0.0], atol=1e-15)

    def test_rejects_non_positive_impedance(self):
        with pytest.raises(MaterialError, match="positive"):
            numerical_flux(np.zeros(3), np.zeros(3), 0.0, 1.0, 1.0, 1.0, Z_HAT)


# -- bc_jump() ----------------------------------------------------------------

class TestBcJump:
    P = np.array([1.0, 2.0, 3.0])
    S = np.array([-1.0, 0.5, 0.0])

    def test_pec(self):
        jp, js = bc_jump("PEC", "TE", self.P, self.S)
        np.testing.assert_allclose(jp, -2.0 * self.P)
        np.testing.assert_allclose(js, 0.0)

    def test_abc_te_scales_p(self):
        jp, js = bc_jump("ABC", "TE", self.P, self.S, math.radians(60.0))
        np.testing.assert_allclose(jp, -self.P, atol=1e-15)
        np.testing.assert_allclose(js, -2.0 * self.S)

    def test_abc_tm_scales_s(self):
        jp, js = bc_jump("ABC", "TM", self.P, self.S, math.radians(60.0))
        np.testing.assert_allclose(jp, -2.0 * self.P)
        np.testing.assert_allclose(js, -self.S, atol=1e-15)

    def test_abc_normal_incidence_is_polarization_free(self):
        te = bc_jump("ABC", "TE", self.P, self.S, 0.0)
        tm = bc_jump("ABC", "TM", self.P, self.S, 0.0)
        for a, b in zip(te, tm):
            np.testing.assert_allclose(a, b)

    def test_tfsf_adds_signed_incident_field(self):
        p_plus, s_plus = np.zeros(3), np.ones(3)
        p_inc, s_inc = np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0])
        jp, js = bc_jump(
            "TFSF", "TE", self.P, self.S, p_plus=p_plus, s_plus=s_plus,
            p_inc=p_inc, s_inc=s_inc, sign=-1.0,
        )
        np.testing.assert_allclose(jp, p_plus - self.P - p_inc)
        np.testing.assert_allclose(js, s_plus - self.S - s_inc)

    def test_tfsf_accepts_per_point_signs(self):
        pm = np.zeros((2, 3))
        inc = np.tile([1.0, 0.0, 0.0], (2, 1))
        jp, _ = bc_jump(
            "TFSF", "TE", pm, pm, p_plus=pm, s_plus=pm, p_inc=inc, s_inc=inc,
            sign=np.array([1.0, -1.0]),
        )
        np.testing.assert_allclose(jp[:, 0], [1.0, -1.0])

    def test_tfsf_without_incident_field_raises(self):
        with pytest.raises(ValueError, match="TF/SF"):
            bc_jump("TFSF", "TE", self.P, self.S)

    def test_unknown_kind_raises(self):
        with pytest.raises(ValueError, match="unknown boundary kind"):
            bc_jump("MIRROR", "TE", self.P, self.S)  # type: ignore[arg-type]


# -- incident_fields() --------------------------------------------------------

class TestIncidentFields:
    def test_vanishes_at_pulse_centre(self):
        inc = IncidenceConfig.for_band(0.3, 0.9, theta=0.5)
        p, s = incident_fields([[0.0, 0.0, 0.0]], inc.t0, inc, 1.0, NATURAL)
        np.testing.assert_allclose(p, 0.0, atol=1e-15)
        np.testing.assert_allclose(s, 0.0, atol=1e-15)

    def test_independent_of_transverse_position(self):
        inc = IncidenceConfig.for_band(0.3, 0.9, theta=0.7, phi=0.4)
        pts = [[0.0, 0.0, 0.2], [3.0, -1.0, 0.2], [0.1, 7.5, 0.2]]
        p, _ = incident_fields(pts, inc.t0 + 0.3, inc, 1.0, NATURAL)
        np.testing.assert_allclose(p, np.broadcast_to(p[0], p.shape), atol=1e-15)

    @pytest.mark.parametrize("polarization", ["TE", "TM"])
    def test_s_is_k_cross_p_over_impedance(self, polarization):
        inc = IncidenceConfig.for_band(0.3, 0.9, theta=0.6, polarization=polarization)
        p, s = incident_fields([[0.0, 0.0, 0.0]], inc.t0 + 0.4, inc, 0.5, NATURAL)
        np.testing.assert_allclose(s[0], np.cross(inc.k_hat, p[0]) / 0.5, atol=1e-14)
        assert abs(p[0] @ inc.k_hat) < 1e-14

    def test_downward_wave_arrives_later_below(self):
        inc = IncidenceConfig.for_band(0.3, 0.9, theta=math.radians(60.0))
        t = inc.t0 + 0.37
        upper, _ = incident_fields([[0.0, 0.0, 1.0]], t, inc, 1.0, NATURAL)
        # cos(60) = 1/2, so the wave needs half a time unit to drop one unit.
        lower, _ = incident_fields([[0.0, 0.0, 0.0]], t + 0.5, inc, 1.0, NATURAL)
        np.testing.assert_allclose(lower, upper, atol=1e-14)


# -- Discretization.build() ---------------------------------------------------

class TestDiscretization:
    def test_summary(self):
        disc = cell()
        assert disc.summary["K"] == 6 * 2 * 2 * 3
        assert disc.summary["Np"] == 10
        assert disc.summary["dofs"] == 6 * 72 * 10
        assert disc.summary["fragments"] == 0
        assert not disc.has_fragments

    def test_every_face_node_has_an_exterior_node(self):
        disc = cell()
        assert disc.vmap_p.shape == (72, 4 * disc.ref.nfp)
        assert disc.vmap_p.max() < 72 * disc.np_

    def test_exterior_nodes_coincide_in_space(self):
        disc = cell()
        nodes = disc.nodes().reshape(-1, 3)
        inner = disc.face_points.reshape(-1, 3)
        outer = nodes[disc.vmap_p.reshape(-1)]
        interior = np.repeat(disc.mesh.face_tags == BoundaryTag.INTERIOR, disc.ref.nfp, axis=1)
        np.testing.assert_allclose(outer[interior.reshape(-1)], inner[interior.reshape(-1)],
                                   atol=1e-12)

    def test_impedances_follow_materials(self):
        disc = cell()
        assert set(np.unique(disc.z_minus).round(12)) == {0.5, 1.0}

    def test_boundary_masks(self):
        disc = cell()
        nfp = disc.ref.nfp
        assert disc.abc_mask.sum() == 16 * nfp
        assert disc.pec_mask.sum() == 0
        assert cell(pec=True).pec_mask.sum() == 16 * nfp

    def test_tfsf_signs_mark_both_sides_of_the_plane(self):
        disc = cell(z_tfsf=2.0)
        nfp = disc.ref.nfp
        assert np.count_nonzero(disc.tfsf_sign > 0) == 8 * nfp
        assert np.count_nonzero(disc.tfsf_sign < 0) == 8 * nfp

    def test_downward_scattered_region_is_above(self):
        disc = cell(z_tfsf=2.0)
        rows, cols = np.nonzero(disc.tfsf_sign)
        z_elem = disc.mesh.element_centroids()[rows, 2]
        # Faces owned by elements below the plane see the scattered region outside.
        assert np.all(disc.tfsf_sign[rows, cols][z_elem < 2.0] > 0.0)
        assert np.all(disc.tfsf_sign[rows, cols][z_elem > 2.0] < 0.0)

    def test_tfsf_plane_off_the_mesh_raises(self):
        with pytest.raises(ProbeError, match="TF/SF plane"):
            cell(z_tfsf=1.3)

    def test_periodic_mesh_needs_lattice(self):
        disc = cell()
        with pytest.raises(ValueError, match="lattice"):
            Discretization.build(disc.mesh, 1, disc.materials, disc.incidence)

    def test_energy_of_constant_field(self):
        disc = cell()
        q = disc.zeros()
        q[0] = 1.0
        # eps is 1 in the air layers and 4 in the slab, each of volume 1.
        assert disc.energy(q) == pytest.approx(0.5 * (1.0 + 4.0 + 1.0), rel=1e-12)
        assert disc.energy(disc.zeros()) == 0.0

    def test_project_samples_nodes(self):
        disc = cell()
        q = disc.project(lambda pts: np.repeat(pts[..., 2:3], 6, axis=-1))
        assert q.shape == (6, disc.num_elements, disc.np_)
        np.testing.assert_allclose(q[4], disc.geo.z)

    def test_field_state(self):
        state = FieldState.zeros(3, 4)
        assert state.P.shape == state.S.shape == (3, 3, 4)
        assert state.is_finite()
        state.q[0, 0, 0] = np.inf
        assert not state.is_finite()


# -- compute_rhs() ------------------------------------------------------------

class TestComputeRhs:
    def test_zero_state_without_injection_is_steady(self):
        disc = cell(theta_deg=40.0)
        np.testing.assert_array_equal(compute_rhs(disc.zeros(), 0.0, disc), 0.0)

    def test_uniform_state_between_pec_walls_is_steady(self):
        disc = cell(theta_deg=30.0, pec=True)
        q = disc.zeros()
        q[2] = 0.7
        q[3:] = np.array([0.3, -0.4, 0.2])[:, None, None]
        # The slab carries eps = 4 but the uniform P is still curl free.
        assert np.max(np.abs(compute_rhs(q, 0.0, disc))) < 1e-10

    def test_non_finite_state_raises(self):
        disc = cell()
        q = disc.zeros()
        q[1, 3, 2] = np.nan
        with pytest.raises(BlowUpError, match="non-finite"):
            compute_rhs(q, 0.25, disc)

    def test_injection_drives_the_field(self):
        disc = cell(theta_deg=20.0, z_tfsf=2.0)
        rhs = compute_rhs(disc.zeros(), disc.incidence.t0 + 0.3, disc)
        assert np.max(np.abs(rhs)) > 1e-3

    @pytest.mark.parametrize("build", [lambda: cell(pec=True), staggered_cell])
    def test_quadratic_field_has_exact_rhs(self, build):
        disc = build()
        rhs = compute_rhs(disc.project(quadratic_in_z), 0.0, disc)
        # P_x = z (3 - z) vanishes on both walls; only S_y moves, at -dP_x/dz.
        expected = np.zeros_like(rhs)
        expected[4] = 2.0 * disc.geo.z - 3.0
        np.testing.assert_allclose(rhs, expected, atol=1e-9)

    def test_half_cell_shift_symmetry_survives_stepping(self):
        # x = 0 faces couple through the periodic map, x = 1/2 faces to an interior
        # neighbour. A field of period 1/2 keeps the shift symmetry only if both agree.
        disc = cell(theta_deg=30.0, pec=True)
        q = disc.project(periodic_field(0.5))
        dt = compute_dt(disc.mesh.h_min, 2, 4.0, NATURAL)
        for n in range(10):
            lsrk4_step(q, n * dt, dt, lambda t, s: compute_rhs(s, t, disc))
        # Elements run hex by hex, x fastest, six tets per hex.
        blocks = q.reshape(6, 3, 2, 2, 6, disc.np_)
        atol = 1e-12 * np.abs(q).max()
        np.testing.assert_allclose(np.roll(blocks, 1, axis=3), blocks, atol=atol)
        np.testing.assert_allclose(np.roll(blocks, 1, axis=2), blocks, atol=atol)


# -- lsrk4_step() / compute_dt() ----------------------------------------------

class TestTimeStepping:
    def test_zero_rhs_leaves_state(self):
        q = np.arange(6.0)
        lsrk4_step(q, 0.0, 0.1, lambda t, y: np.zeros_like(y))
        np.testing.assert_array_equal(q, np.arange(6.0))

    def test_integrates_quadratic_in_time_exactly(self):
        y = np.zeros(1)
        lsrk4_step(y, 0.0, 1.0, lambda t, _: np.array([t * t]))
        assert y[0] == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_fourth_order_convergence(self):
        errors = []
        for dt in (0.1, 0.05):
            y = np.ones(1)
            for n in range(round(1.0 / dt)):
                lsrk4_step(y, n * dt, dt, lambda _, q: -q)
            errors.append(abs(y[0] - math.exp(-1.0)))
        assert math.log2(errors[0] / errors[1]) == pytest.approx(4.0, abs=0.2)

    def test_reuses_scratch_register(self):
        q, resid = np.ones(3), np.full(3, 9.0)
        lsrk4_step(q, 0.0, 0.1, lambda t, y: np.zeros_like(y), resid)
        np.testing.assert_array_equal(q, np.ones(3))

    def test_rejects_non_positive_step(self):
        with pytest.raises(ValueError, match="positive"):
            lsrk4_step(np.ones(1), 0.0, 0.0, lambda t, y: y)

    def test_compute_dt(self):
        assert compute_dt(0.1, 2, 1.0, NATURAL) == pytest.approx(0.025)
        assert compute_dt(0.1, 2, 2.0, NATURAL) == pytest.approx(0.0125)

    def test_compute_dt_rejects_bad_input(self):
        with pytest.raises(ValueError):
            compute_dt(0.0, 2, 1.0, NATURAL)
        with pytest.raises(ValueError):
            compute_dt(0.1, 2, -1.0, NATURAL)


# -- Non-conformal periodic faces ---------------------------------------------

class TestNonConformalFaces:
    def test_mesh_couples_through_fragments(self):
        disc = staggered_cell()
        assert disc.has_fragments
        assert disc.summary["fragments"] > 0

    def test_uniform_state_is_steady(self):
        disc = staggered_cell(theta_deg=30.0)
        q = disc.zeros()
        q[2] = 0.7
        q[3:] = np.array([0.3, -0.4, 0.2])[:, None, None]
        assert np.max(np.abs(compute_rhs(q, 0.0, disc))) < 1e-10

    def test_energy_does_not_grow(self):
        disc = staggered_cell(theta_deg=30.0)
        q = disc.project(periodic_field())
        dt = compute_dt(disc.mesh.h_min, 2, 4.0, NATURAL)
        energy = [disc.energy(q)]
        for n in range(40):
            lsrk4_step(q, n * dt, dt, lambda t, s: compute_rhs(s, t, disc))
            energy.append(disc.energy(q))
        assert np.all(np.diff(energy) <= 1e-10 * energy[0])
        assert energy[-1] < energy[0]
