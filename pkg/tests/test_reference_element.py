"""
Unit tests for floquetdg -- nodal reference tetrahedron and triangle quadrature.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from floquetdg.exceptions import ConfigurationError
from floquetdg.reference_element import (
    FACE_AXES,
    ORIENTATIONS,
    build_reference,
    face_orientation,
    num_face_nodes,
    num_nodes,
    triangle_quadrature,
)


# -- build_reference() ---------------------------------------------------------

class TestBuildReference:
    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_node_counts(self, order):
        ref = build_reference(order)
        assert ref.np_ == num_nodes(order) == (order + 1) * (order + 2) * (order + 3) // 6
        assert ref.nfp == num_face_nodes(order)
        assert ref.fmask.shape == (4, ref.nfp)

    @pytest.mark.parametrize("order", [0, 9])
    def test_rejects_order_out_of_range(self, order):
        with pytest.raises(ConfigurationError, match="mesh.order"):
            build_reference(order)

    def test_rejects_bool_order(self):
        with pytest.raises(ConfigurationError):
            build_reference(True)

    def test_is_cached(self):
        assert build_reference(3) is build_reference(3)

    @pytest.mark.parametrize("order", [1, 3, 5])
    def test_mass_matrix_integrates_volume(self, order):
        ref = build_reference(order)
        ones = np.ones(ref.np_)
        assert ones @ ref.mass @ ones == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_mass_matrix_is_symmetric_positive(self):
        ref = build_reference(3)
        np.testing.assert_allclose(ref.mass, ref.mass.T, atol=1e-14)
        assert np.linalg.eigvalsh(ref.mass).min() > 0.0

    @pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
    def test_lift_integrates_face_traces(self, order):
        ref = build_reference(order)
        ones = np.ones(ref.np_)
        # Integral of (1 + a)^P over the reference triangle a, b >= -1, a + b <= 0.
        exact = 2.0 ** (order + 2) / ((order + 1) * (order + 2))
        for f in range(4):
            a = ref.nodes[ref.fmask[f], FACE_AXES[f][0]]
            block = ref.lift[:, f * ref.nfp : (f + 1) * ref.nfp]
            assert ones @ ref.mass @ block @ (1.0 + a) ** order == pytest.approx(exact, rel=1e-10)

    @pytest.mark.parametrize("order", [2, 4])
    def test_differentiation_of_coordinates(self, order):
        ref = build_reference(order)
        np.testing.assert_allclose(ref.Dr @ ref.r, 1.0, atol=1e-10)
        np.testing.assert_allclose(ref.Dr @ ref.s, 0.0, atol=1e-10)
        np.testing.assert_allclose(ref.Ds @ ref.s, 1.0, atol=1e-10)
        np.testing.assert_allclose(ref.Dt @ ref.t, 1.0, atol=1e-10)

    def test_differentiates_polynomial_of_full_degree(self):
        ref = build_reference(3)
        u = ref.r**3 + ref.r * ref.s * ref.t
        np.testing.assert_allclose(ref.Dr @ u, 3.0 * ref.r**2 + ref.s * ref.t, atol=1e-9)

    def test_face_nodes_lie_on_their_faces(self):
        ref = build_reference(3)
        np.testing.assert_allclose(ref.t[ref.fmask[0]], -1.0, atol=1e-12)
        np.testing.assert_allclose(ref.s[ref.fmask[1]], -1.0, atol=1e-12)
        face2 = ref.r[ref.fmask[2]] + ref.s[ref.fmask[2]] + ref.t[ref.fmask[2]]
        np.testing.assert_allclose(face2, -1.0, atol=1e-12)
        np.testing.assert_allclose(ref.r[ref.fmask[3]], -1.0, atol=1e-12)

    def test_identity_orientation_is_identity_permutation(self):
        ref = build_reference(3)
        np.testing.assert_array_equal(ref.face_perms[0], np.arange(ref.nfp))

    def test_interpolation_at_nodes_is_identity(self):
        ref = build_reference(2)
        np.testing.assert_allclose(ref.interpolation_matrix(ref.nodes), np.eye(ref.np_), atol=1e-10)


# -- face_orientation() --------------------------------------------------------

class TestFaceOrientation:
    TRIANGLE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])

    @pytest.mark.parametrize("index", range(len(ORIENTATIONS)))
    def test_recovers_every_permutation(self, index):
        other = self.TRIANGLE[list(ORIENTATIONS[index])]
        assert face_orientation(self.TRIANGLE, other, 1e-12) == index

    def test_works_on_vertex_ids(self):
        assert face_orientation([[4], [7], [9]], [[7], [4], [9]], 0.5) == 2

    def test_raises_for_different_faces(self):
        shifted = self.TRIANGLE + [0.0, 0.0, 1.0]
        with pytest.raises(ValueError, match="vertex triple"):
            face_orientation(self.TRIANGLE, shifted, 1e-9)


# -- triangle_quadrature() -----------------------------------------------------

class TestTriangleQuadrature:
    @pytest.mark.parametrize("degree", [1, 2, 5, 12, 40])
    def test_weights_sum_to_unit_triangle_area(self, degree):
        rule = triangle_quadrature(degree)
        assert rule.weights.sum() == pytest.approx(0.5, rel=1e-13)
        assert np.all(rule.weights > 0.0)

    @pytest.mark.parametrize("a, b", [(2, 0), (1, 1), (3, 2), (0, 6)])
    def test_monomials_integrated_exactly(self, a, b):
        rule = triangle_quadrature(a + b)
        x, y = rule.xy[:, 0], rule.xy[:, 1]
        exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
        assert (rule.weights * x**a * y**b).sum() == pytest.approx(exact, rel=1e-12)

    def test_points_are_barycentric(self):
        rule = triangle_quadrature(6)
        np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-14)
        assert np.all(rule.points >= -1e-14)

    def test_on_triangle_scales_weights_by_area(self):
        tri = np.array([[0.0, 0.0, 1.0], [3.0, 0.0, 1.0], [0.0, 2.0, 1.0]])
        points, weights = triangle_quadrature(4).on_triangle(tri)
        assert weights.sum() == pytest.approx(3.0, rel=1e-13)
        np.testing.assert_allclose(points[:, 2], 1.0)

    @pytest.mark.parametrize("degree", [0, 41, 2.5])
    def test_rejects_invalid_degree(self, degree):
        with pytest.raises(ConfigurationError, match="degree"):
            triangle_quadrature(degree)
