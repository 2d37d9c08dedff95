"""
Unit tests for floquetdg -- geometric factors, material tables and the periodic matrix.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from floquetdg._constants import NATURAL, SI
from floquetdg.exceptions import MaterialError, SingularityError
from floquetdg.mesh import generate_box_mesh
from floquetdg.operators import (
    MaterialTable,
    assemble_Q,
    cross_matrix,
    expanded_Q,
    geometric_factors,
    local_matrices,
)
from floquetdg.reference_element import build_reference
from floquetdg.types import IncidenceConfig, Lattice2, Material


# -- Helpers ------------------------------------------------------------------

def slab_mesh():
    return generate_box_mesh(
        Lattice2.rectangular(1.0, 0.5), (0.0, 0.4, 1.0), 2, 1, (1, 2), (1, 2)
    )


def incidence(theta_deg: float = 0.0, phi: float = 0.0) -> IncidenceConfig:
    return IncidenceConfig.for_band(0.3, 0.9, theta=math.radians(theta_deg), phi=phi)


# -- geometric_factors() ------------------------------------------------------

class TestGeometricFactors:
    def test_jacobians_sum_to_cell_volume(self):
        geo = geometric_factors(slab_mesh(), build_reference(2))
        assert np.all(geo.J > 0.0)
        assert geo.J.sum() * 4.0 / 3.0 == pytest.approx(0.5, rel=1e-12)

    def test_face_areas_match_mesh(self):
        mesh = slab_mesh()
        geo = geometric_factors(mesh, build_reference(1))
        expected = [[mesh.face_area(k, f) for f in range(4)] for k in range(mesh.num_elements)]
        np.testing.assert_allclose(geo.face_areas(), expected, rtol=1e-12)

    def test_normals_are_outward_units(self):
        mesh = slab_mesh()
        geo = geometric_factors(mesh, build_reference(1))
        np.testing.assert_allclose(np.linalg.norm(geo.normals, axis=2), 1.0, atol=1e-14)
        centroids = mesh.element_centroids()
        for k in range(mesh.num_elements):
            for f in range(4):
                face_centre = mesh.face_coordinates(k, f).mean(axis=0)
                assert geo.normals[k, f] @ (face_centre - centroids[k]) > 0.0

    def test_nodes_lie_inside_elements(self):
        geo = geometric_factors(slab_mesh(), build_reference(3))
        nodes = geo.nodes
        assert nodes.shape[-1] == 3
        assert nodes[..., 2].min() >= -1e-14
        assert nodes[..., 2].max() <= 1.0 + 1e-14


# -- local_matrices() ---------------------------------------------------------

class TestLocalOperators:
    def test_curl_of_linear_field_is_exact(self):
        ref = build_reference(2)
        ops = local_matrices(ref, geometric_factors(slab_mesh(), ref))
        x, y, z = ops.geo.x, ops.geo.y, ops.geo.z
        curl = ops.curl(y, z, x)
        np.testing.assert_allclose(curl, -1.0, atol=1e-11)

    def test_gradient_of_quadratic_is_exact(self):
        ref = build_reference(2)
        ops = local_matrices(ref, geometric_factors(slab_mesh(), ref))
        x, y, z = ops.geo.x, ops.geo.y, ops.geo.z
        dx, dy, dz = ops.gradient(x * x + y * z)
        np.testing.assert_allclose(dx, 2.0 * x, atol=1e-10)
        np.testing.assert_allclose(dy, z, atol=1e-10)
        np.testing.assert_allclose(dz, y, atol=1e-10)

    def test_differentiation_matrix_matches_gradient(self):
        ref = build_reference(2)
        ops = local_matrices(ref, geometric_factors(slab_mesh(), ref))
        u = np.sin(ops.geo.x) + ops.geo.z
        _, _, dz = ops.gradient(u)
        np.testing.assert_allclose(ops.differentiation_matrix(3, 2) @ u[3], dz[3], atol=1e-12)

    def test_mass_matrix_integrates_element_volume(self):
        ref = build_reference(2)
        ops = local_matrices(ref, geometric_factors(slab_mesh(), ref))
        ones = np.ones(ref.np_)
        assert ones @ ops.mass_matrix(0) @ ones == pytest.approx(ops.geo.J[0] * 4.0 / 3.0)

    def test_rejects_mismatched_reference(self):
        geo = geometric_factors(slab_mesh(), build_reference(2))
        with pytest.raises(ValueError, match="nodes per element"):
            local_matrices(build_reference(3), geo)


# -- MaterialTable ------------------------------------------------------------

class TestMaterialTable:
    def test_lookup_and_units(self):
        table = MaterialTable({1: Material(), 2: Material(eps_r=4.0)}, NATURAL)
        assert table.epsilon(2) == 4.0
        assert table.impedance(2) == pytest.approx(0.5)
        assert table.admittance(1) == pytest.approx(1.0)

    def test_si_impedance_of_vacuum(self):
        assert MaterialTable({1: Material()}).impedance(1) == pytest.approx(376.730313, rel=1e-6)

    def test_per_element_gathers_by_id(self):
        table = MaterialTable({1: Material(), 2: Material(eps_r=4.0)}, NATURAL)
        values = table.per_element(np.array([2, 1, 2]), "impedance")
        np.testing.assert_allclose(values, [0.5, 1.0, 0.5])

    def test_unknown_id_raises(self):
        with pytest.raises(MaterialError, match="material id 3"):
            MaterialTable({1: Material()})[3]

    def test_empty_table_raises(self):
        with pytest.raises(MaterialError, match="empty"):
            MaterialTable({})

    def test_pec_ids_and_dict(self):
        table = MaterialTable({1: Material(), 4: Material(pec=True)})
        assert table.pec_ids() == [4]
        assert table.to_dict() == {"1": {"eps_r": 1.0, "mu_r": 1.0}, "4": {"pec": True}}


# -- assemble_Q() / expanded_Q() -------------------------------------------------

class TestAssembleQ:
    def test_cross_matrix(self):
        v, w = np.array([0.3, -1.2, 2.0]), np.array([1.5, 0.4, -0.7])
        np.testing.assert_allclose(cross_matrix(v) @ w, np.cross(v, w), atol=1e-15)

    def test_normal_incidence_is_diagonal(self):
        pq = assemble_Q(Material(eps_r=4.0, mu_r=2.0), incidence(), NATURAL)
        np.testing.assert_allclose(pq.Q, np.diag([4.0, 4.0, 4.0, 2.0, 2.0, 2.0]), atol=1e-15)

    def test_symmetric_with_inverse(self):
        pq = assemble_Q(Material(eps_r=2.0), incidence(40.0, 0.6), NATURAL)
        np.testing.assert_allclose(pq.Q, pq.Q.T, atol=1e-15)
        np.testing.assert_allclose(pq.Q @ pq.Qinv, np.eye(6), atol=1e-12)

    def test_vacuum_eigenvalues(self):
        theta = math.radians(50.0)
        pq = assemble_Q(Material(), incidence(50.0, 0.3), NATURAL)
        eig = pq.eigenvalues()
        assert eig.min() == pytest.approx(1.0 - math.sin(theta), rel=1e-12)
        assert eig.max() == pytest.approx(1.0 + math.sin(theta), rel=1e-12)

    def test_transverse_wavevector_components(self):
        pq = assemble_Q(Material(), incidence(30.0, math.pi / 2), NATURAL)
        assert pq.kappa_x == pytest.approx(0.0, abs=1e-15)
        assert pq.kappa_y == pytest.approx(0.5)

    def test_si_units_scale_blocks(self):
        pq = assemble_Q(Material(eps_r=2.0), incidence(), SI)
        assert pq.Q[0, 0] == pytest.approx(2.0 * SI.eps0)
        assert pq.Q[3, 3] == pytest.approx(SI.mu0)

    def test_expanded_form_reduces_to_q_for_one_node(self):
        inc = incidence(35.0, 0.4)
        pq = assemble_Q(Material(eps_r=3.0), inc, NATURAL)
        big = expanded_Q(3.0, 1.0, pq.kappa_x, pq.kappa_y, 1.0, 1)
        np.testing.assert_allclose(big, pq.Q, atol=1e-15)

    def test_expanded_form_has_identity_blocks(self):
        big = expanded_Q(2.0, 1.0, 0.3, 0.1, 1.0, 4)
        assert big.shape == (24, 24)
        np.testing.assert_allclose(big[:4, :4], 2.0 * np.eye(4))
        np.testing.assert_allclose(big[:4, 20:], 0.1 * np.eye(4))

    def test_pec_material_raises(self):
        with pytest.raises(MaterialError, match="PEC"):
            assemble_Q(Material(pec=True), incidence(), NATURAL)

    def test_grazing_incidence_raises(self):
        with pytest.raises(SingularityError, match="grazing"):
            assemble_Q(Material(), incidence(89.99999), NATURAL)
