"""
Nodal basis on the reference tetrahedron.

The reference tetrahedron has vertices ``(-1,-1,-1)``, ``(1,-1,-1)``,
``(-1,1,-1)`` and ``(-1,-1,1)``; local vertex ``i`` of every mesh element
maps onto reference vertex ``i``. Nodes are warp-and-blend optimised (they
reduce to equidistant nodes for ``P <= 2``), the modal basis is the
orthonormal collapsed-coordinate family, and all matrices follow from the
Vandermonde matrix ``V``:

- ``Dr, Ds, Dt``: nodal differentiation, ``V_r V^-1`` etc.
- ``mass``: ``(V V^T)^-1``
- ``lift``: ``V V^T E``, with ``E`` the face mass matrices scattered into
  the face-node columns.

Face nodes are stored in a canonical order shared by all four faces, so
that matching two faces reduces to one of six vertex permutations.

Example::

    from floquetdg.reference_element import build_reference

    ref = build_reference(3)
    du_dr = ref.Dr @ u
"""

from __future__ import annotations

import functools
import logging
import math
import operator
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import eval_jacobi, gammaln, roots_jacobi

from ._constants import ALPHA_OPT, MAX_ORDER, MAX_QUADRATURE_DEGREE, MIN_ORDER, NODE_TOL
from .exceptions import ConfigurationError, NodeSetError

logger = logging.getLogger(__name__)

# Local vertex triples of the four faces: t=-1, s=-1, r+s+t=-1, r=-1.
FACE_VERTICES: tuple[tuple[int, int, int], ...] = ((0, 1, 2), (0, 1, 3), (1, 2, 3), (0, 2, 3))
# Reference coordinates spanning each face for the face Vandermonde.
FACE_AXES: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2), (1, 2))
ORIENTATIONS: tuple[tuple[int, int, int], ...] = (
    (0, 1, 2),
    (0, 2, 1),
    (1, 0, 2),
    (1, 2, 0),
    (2, 0, 1),
    (2, 1, 0),
)
# Per warped face: opposite vertex, then the face vertices as top, left, right.
_WARP_FACES = ((3, 2, 0, 1), (2, 3, 0, 1), (0, 3, 1, 2), (1, 3, 0, 2))

REFERENCE_VERTICES = np.array(
    [[-1.0, -1.0, -1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
)

_SQ3 = math.sqrt(3.0)
_SQ6 = math.sqrt(6.0)
# Equilateral tetrahedron used while warping.
_EQ_VERTICES = np.array(
    [
        [-1.0, -1.0 / _SQ3, -1.0 / _SQ6],
        [1.0, -1.0 / _SQ3, -1.0 / _SQ6],
        [0.0, 2.0 / _SQ3, -1.0 / _SQ6],
        [0.0, 0.0, 3.0 / _SQ6],
    ]
)


def num_nodes(order: int) -> int:
    return (order + 1) * (order + 2) * (order + 3) // 6


def num_face_nodes(order: int) -> int:
    return (order + 1) * (order + 2) // 2


# -- Orthonormal polynomials ----------------------------------------------------


def jacobi_p(x: Any, alpha: float, beta: float, n: int) -> np.ndarray:
    """Jacobi polynomial normalised to unit weighted L2 norm on [-1, 1]."""
    x = np.asarray(x, dtype=float)
    log_gamma = (
        (alpha + beta + 1.0) * math.log(2.0)
        - math.log(2.0 * n + alpha + beta + 1.0)
        + gammaln(n + alpha + 1.0)
        + gammaln(n + beta + 1.0)
        - gammaln(n + alpha + beta + 1.0)
        - gammaln(n + 1.0)
    )
    return np.asarray(eval_jacobi(n, alpha, beta, x) / math.exp(0.5 * log_gamma))


def grad_jacobi_p(x: Any, alpha: float, beta: float, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    return math.sqrt(n * (n + alpha + beta + 1.0)) * jacobi_p(x, alpha + 1.0, beta + 1.0, n - 1)


def jacobi_gl(n: int) -> np.ndarray:
    """Legendre-Gauss-Lobatto points of order ``n`` on [-1, 1]."""
    if n < 1:
        return np.array([0.0])
    if n == 1:
        return np.array([-1.0, 1.0])
    interior = roots_jacobi(n - 1, 1.0, 1.0)[0]
    return np.concatenate(([-1.0], np.sort(interior), [1.0]))


def rst_to_abc(r: Any, s: Any, t: Any) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapsed coordinates of points in the reference tetrahedron."""
    r, s, t = (np.asarray(v, dtype=float) for v in (r, s, t))
    st = -s - t
    ok_a = np.abs(st) > NODE_TOL * 1e-3
    a = np.where(ok_a, 2.0 * (1.0 + r) / np.where(ok_a, st, 1.0) - 1.0, -1.0)
    ok_b = np.abs(1.0 - t) > NODE_TOL * 1e-3
    b = np.where(ok_b, 2.0 * (1.0 + s) / np.where(ok_b, 1.0 - t, 1.0) - 1.0, -1.0)
    return a, b, t.copy()


def simplex_3d_p(
    a: np.ndarray, b: np.ndarray, c: np.ndarray, i: int, j: int, k: int
) -> np.ndarray:
    h1 = jacobi_p(a, 0.0, 0.0, i)
    h2 = jacobi_p(b, 2.0 * i + 1.0, 0.0, j)
    h3 = jacobi_p(c, 2.0 * (i + j) + 2.0, 0.0, k)
    return 2.0 * math.sqrt(2.0) * h1 * h2 * (1.0 - b) ** i * h3 * (1.0 - c) ** (i + j)


def grad_simplex_3d_p(
    a: np.ndarray, b: np.ndarray, c: np.ndarray, i: int, j: int, k: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient of :func:`simplex_3d_p` with respect to ``(r, s, t)``."""
    fa = jacobi_p(a, 0.0, 0.0, i)
    dfa = grad_jacobi_p(a, 0.0, 0.0, i)
    gb = jacobi_p(b, 2.0 * i + 1.0, 0.0, j)
    dgb = grad_jacobi_p(b, 2.0 * i + 1.0, 0.0, j)
    hc = jacobi_p(c, 2.0 * (i + j) + 2.0, 0.0, k)
    dhc = grad_jacobi_p(c, 2.0 * (i + j) + 2.0, 0.0, k)
    half_b = 0.5 * (1.0 - b)
    half_c = 0.5 * (1.0 - c)

    dr = dfa * gb * hc
    if i > 0:
        dr = dr * half_b ** (i - 1)
    if i + j > 0:
        dr = dr * half_c ** (i + j - 1)

    ds = 0.5 * (1.0 + a) * dr
    tmp = dgb * half_b**i
    if i > 0:
        tmp = tmp - 0.5 * i * gb * half_b ** (i - 1)
    if i + j > 0:
        tmp = tmp * half_c ** (i + j - 1)
    tmp = fa * tmp * hc
    ds = ds + tmp

    dt = 0.5 * (1.0 + a) * dr + 0.5 * (1.0 + b) * tmp
    tmp = dhc * half_c ** (i + j)
    if i + j > 0:
        tmp = tmp - 0.5 * (i + j) * hc * half_c ** (i + j - 1)
    tmp = fa * gb * tmp * half_b**i
    dt = dt + tmp

    scale = 2.0 ** (2 * i + j + 1.5)
    return dr * scale, ds * scale, dt * scale


def _mode_indices(order: int) -> list[tuple[int, int, int]]:
    return [
        (i, j, k)
        for i in range(order + 1)
        for j in range(order + 1 - i)
        for k in range(order + 1 - i - j)
    ]


def basis_matrix(nodes: Any, order: int) -> np.ndarray:
    """Orthonormal modes of degree ``<= order`` sampled at arbitrary points."""
    pts = np.atleast_2d(np.asarray(nodes, dtype=float))
    a, b, c = rst_to_abc(pts[:, 0], pts[:, 1], pts[:, 2])
    cols = [simplex_3d_p(a, b, c, i, j, k) for i, j, k in _mode_indices(order)]
    return np.stack(cols, axis=1)


def vandermonde(nodes: Any, order: int) -> np.ndarray:
    """Generalised Vandermonde matrix ``V[i, j] = phi_j(node_i)``.

    Args:
        nodes: ``(Np, 3)`` reference coordinates.
        order: Polynomial degree; ``Np`` must equal ``num_nodes(order)``.

    Raises:
        ValueError: If the node count does not match the order.
        NodeSetError: If the nodes are not unisolvent.
    """
    pts = np.atleast_2d(np.asarray(nodes, dtype=float))
    if pts.shape != (num_nodes(order), 3):
        raise ValueError(
            f"expected {num_nodes(order)} nodes for order {order}, got shape {pts.shape}"
        )
    v = basis_matrix(pts, order)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > 1e12:
        raise NodeSetError(f"Vandermonde matrix of order {order} is singular (cond={cond:.3g})")
    return v


def grad_vandermonde(nodes: Any, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pts = np.atleast_2d(np.asarray(nodes, dtype=float))
    a, b, c = rst_to_abc(pts[:, 0], pts[:, 1], pts[:, 2])
    grads = [grad_simplex_3d_p(a, b, c, i, j, k) for i, j, k in _mode_indices(order)]
    return (
        np.stack([g[0] for g in grads], axis=1),
        np.stack([g[1] for g in grads], axis=1),
        np.stack([g[2] for g in grads], axis=1),
    )


def vandermonde_2d(r: Any, s: Any, order: int) -> np.ndarray:
    """Orthonormal triangle modes on ``r, s >= -1, r + s <= 0``."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    ok = np.abs(1.0 - s) > NODE_TOL * 1e-3
    a = np.where(ok, 2.0 * (1.0 + r) / np.where(ok, 1.0 - s, 1.0) - 1.0, -1.0)
    cols = []
    for i in range(order + 1):
        for j in range(order + 1 - i):
            h1 = jacobi_p(a, 0.0, 0.0, i)
            h2 = jacobi_p(s, 2.0 * i + 1.0, 0.0, j)
            cols.append(math.sqrt(2.0) * h1 * h2 * (1.0 - s) ** i)
    return np.stack(cols, axis=1)


# -- Node placement -------------------------------------------------------------


def tet_barycentric(nodes: Any) -> np.ndarray:
    """Barycentric weights of reference points, one column per local vertex."""
    pts = np.atleast_2d(np.asarray(nodes, dtype=float))
    r, s, t = pts[:, 0], pts[:, 1], pts[:, 2]
    return np.stack(
        [-(1.0 + r + s + t) / 2.0, (1.0 + r) / 2.0, (1.0 + s) / 2.0, (1.0 + t) / 2.0], axis=1
    )


def warp_factor(order: int, rout: np.ndarray) -> np.ndarray:
    """1-D Gauss-Lobatto warp divided by the edge bubble ``1 - r^2``."""
    lgl = jacobi_gl(order)
    req = np.linspace(-1.0, 1.0, order + 1)
    veq = np.stack([jacobi_p(req, 0.0, 0.0, n) for n in range(order + 1)], axis=1)
    pmat = np.stack([jacobi_p(rout, 0.0, 0.0, n) for n in range(order + 1)])
    lmat = np.linalg.solve(veq.T, pmat)
    warp = lmat.T @ (lgl - req)
    interior = (np.abs(rout) < 1.0 - 1e-10).astype(float)
    sf = 1.0 - (interior * rout) ** 2
    return warp / sf + warp * (interior - 1.0)


def _face_shift(
    order: int, alpha: float, l1: np.ndarray, l2: np.ndarray, l3: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    w1 = 4.0 * l2 * l3 * warp_factor(order, l3 - l2) * (1.0 + (alpha * l1) ** 2)
    w2 = 4.0 * l1 * l3 * warp_factor(order, l1 - l3) * (1.0 + (alpha * l2) ** 2)
    w3 = 4.0 * l1 * l2 * warp_factor(order, l2 - l1) * (1.0 + (alpha * l3) ** 2)
    dx = w1 + math.cos(2.0 * math.pi / 3.0) * w2 + math.cos(4.0 * math.pi / 3.0) * w3
    dy = math.sin(2.0 * math.pi / 3.0) * w2 + math.sin(4.0 * math.pi / 3.0) * w3
    return dx, dy


def equidistant_nodes(order: int) -> np.ndarray:
    pts = [
        (-1.0 + 2.0 * q / order, -1.0 + 2.0 * m / order, -1.0 + 2.0 * n / order)
        for n in range(order + 1)
        for m in range(order + 1 - n)
        for q in range(order + 1 - n - m)
    ]
    return np.array(pts, dtype=float)


def warp_blend_nodes(order: int) -> np.ndarray:
    """Warp-and-blend nodes in reference coordinates, shape ``(Np, 3)``."""
    if order == 0:
        return np.array([[-0.5, -0.5, -0.5]])
    alpha = ALPHA_OPT[order - 1] if order <= len(ALPHA_OPT) else 1.0
    tol = 1e-10
    lam = tet_barycentric(equidistant_nodes(order))
    v1, v2, v3, v4 = _EQ_VERTICES
    t1 = np.array([v2 - v1, v2 - v1, v3 - v2, v3 - v1])
    t2 = np.array(
        [v3 - 0.5 * (v1 + v2), v4 - 0.5 * (v1 + v2), v4 - 0.5 * (v2 + v3), v4 - 0.5 * (v1 + v3)]
    )
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 /= np.linalg.norm(t2, axis=1, keepdims=True)

    xyz = lam @ _EQ_VERTICES
    shift = np.zeros_like(xyz)
    for face, (ia, ib, ic, id_) in enumerate(_WARP_FACES):
        la, lb, lc, ld = lam[:, ia], lam[:, ib], lam[:, ic], lam[:, id_]
        warp1, warp2 = _face_shift(order, alpha, lb, lc, ld)
        blend = lb * lc * ld
        denom = (lb + 0.5 * la) * (lc + 0.5 * la) * (ld + 0.5 * la)
        ids = denom > tol
        blend[ids] = (1.0 + (alpha * la[ids]) ** 2) * blend[ids] / denom[ids]
        shift += np.outer(blend * warp1, t1[face]) + np.outer(blend * warp2, t2[face])
        on_edge = (la < tol) & (
            (lb > tol).astype(int) + (lc > tol).astype(int) + (ld > tol).astype(int) < 3
        )
        shift[on_edge] = np.outer(warp1[on_edge], t1[face]) + np.outer(warp2[on_edge], t2[face])
    xyz = xyz + shift

    rhs = xyz - 0.5 * (v2 + v3 + v4 - v1)
    amat = np.column_stack([0.5 * (v2 - v1), 0.5 * (v3 - v1), 0.5 * (v4 - v1)])
    return np.asarray(np.linalg.solve(amat, rhs.T).T)


# -- Quadrature ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TriangleQuadrature:
    """Collapsed Gauss-Jacobi rule on the unit right triangle.

    Attributes:
        points: ``(n, 3)`` barycentric coordinates ``(1 - x - y, x, y)``.
        weights: Positive weights summing to 1/2, the unit triangle area.
        degree: Total polynomial degree integrated exactly.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]

    def on_triangle(self, vertices: Any) -> tuple[np.ndarray, np.ndarray]:
        """Map the rule onto a physical triangle; weights scale with its area."""
        v = np.asarray(vertices, dtype=float)
        area = 0.5 * float(np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0])))
        return self.points @ v, self.weights * (2.0 * area)


def _as_int(value: Any, name: str, lo: int, hi: int) -> int:
    try:
        number = operator.index(value)
    except TypeError:
        number = None
    if number is None or isinstance(value, bool) or not lo <= number <= hi:
        raise ConfigurationError(
            f"{name} must be an integer in {lo}..{hi}, got {value!r}",
            fields={name: "out of range"},
        )
    return number


def triangle_quadrature(degree: int) -> TriangleQuadrature:
    """Build a triangle rule exact for polynomials of total degree ``degree``.

    Raises:
        ConfigurationError: If ``degree`` is outside ``1..40``.
    """
    return _collapsed_rule(_as_int(degree, "degree", 1, MAX_QUADRATURE_DEGREE))


@functools.lru_cache(maxsize=None)
def _collapsed_rule(degree: int) -> TriangleQuadrature:
    n = (degree + 2) // 2
    xa, wa = roots_jacobi(n, 0.0, 0.0)
    xb, wb = roots_jacobi(n, 1.0, 0.0)
    a, b = np.meshgrid(xa, xb, indexing="ij")
    w = np.outer(wa, wb) / 8.0
    x = (1.0 + a) * (1.0 - b) / 4.0
    y = (1.0 + b) / 2.0
    x, y, w = x.ravel(), y.ravel(), w.ravel()
    points = np.stack([1.0 - x - y, x, y], axis=1)
    points.setflags(write=False)
    w.setflags(write=False)
    return TriangleQuadrature(points=points, weights=w, degree=degree)


# -- Reference element -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    """Order-``P`` nodal tetrahedron and its local operators.

    ``fmask[f]`` lists the volume indices of face ``f``'s nodes in the
    canonical face order; ``face_perms[o]`` maps face node ``i`` to the node
    of the opposite face when the opposite face's vertex ``m`` coincides with
    this face's vertex ``ORIENTATIONS[o][m]``.
    """

    order: int
    nodes: np.ndarray
    V: np.ndarray
    Vinv: np.ndarray
    Dr: np.ndarray
    Ds: np.ndarray
    Dt: np.ndarray
    mass: np.ndarray
    fmask: np.ndarray
    lift: np.ndarray
    face_barycentric: np.ndarray
    face_perms: np.ndarray
    condition_number: float

    @property
    def np_(self) -> int:
        return self.nodes.shape[0]

    @property
    def nfp(self) -> int:
        return self.fmask.shape[1]

    @property
    def r(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def s(self) -> np.ndarray:
        return self.nodes[:, 1]

    @property
    def t(self) -> np.ndarray:
        return self.nodes[:, 2]

    @property
    def fmask_flat(self) -> np.ndarray:
        return self.fmask.reshape(-1)

    def interpolation_matrix(self, points: Any) -> np.ndarray:
        """Rows evaluating the nodal interpolant at reference ``points``."""
        return basis_matrix(points, self.order) @ self.Vinv

    def orientation_of(self, this_face: Any, other_face: Any, tol: float) -> int:
        """Index into ``ORIENTATIONS`` matching two vertex triples.

        Args:
            this_face: ``(3, d)`` vertices (coordinates or ids) of this face.
            other_face: ``(3, d)`` vertices of the matching face.
            tol: Matching tolerance on vertex distance.

        Raises:
            ValueError: If no permutation makes the triples coincide.
        """
        return face_orientation(this_face, other_face, tol)


def face_orientation(this_face: Any, other_face: Any, tol: float) -> int:
    """Module-level form of :meth:`ReferenceElement.orientation_of`."""
    a = np.asarray(this_face, dtype=float).reshape(3, -1)
    b = np.asarray(other_face, dtype=float).reshape(3, -1)
    for idx, perm in enumerate(ORIENTATIONS):
        if np.all(np.linalg.norm(b - a[list(perm)], axis=1) <= tol):
            return idx
    raise ValueError("faces do not share a vertex triple")


def _canonical_faces(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lam = tet_barycentric(nodes)
    r, s, t = nodes[:, 0], nodes[:, 1], nodes[:, 2]
    on_face = (
        np.abs(1.0 + t) < NODE_TOL,
        np.abs(1.0 + s) < NODE_TOL,
        np.abs(1.0 + r + s + t) < NODE_TOL,
        np.abs(1.0 + r) < NODE_TOL,
    )
    raw = [np.flatnonzero(mask) for mask in on_face]
    triples = [lam[idx][:, FACE_VERTICES[f]] for f, idx in enumerate(raw)]

    order0 = np.lexsort(np.round(triples[0], 10).T[::-1])
    canonical = triples[0][order0]
    tree = cKDTree(canonical)
    fmask = [raw[0][order0]]
    for f in range(1, 4):
        dist, j = cKDTree(triples[f]).query(canonical)
        if np.max(dist) > 1e-10 or len(set(j.tolist())) != len(j):
            raise NodeSetError(f"face {f} node set differs from face 0")
        fmask.append(raw[f][j])

    perms = []
    for perm in ORIENTATIONS:
        dist, j = tree.query(canonical[:, list(perm)])
        if np.max(dist) > 1e-10:
            raise NodeSetError("face node set is not symmetric under vertex permutations")
        perms.append(j)
    return np.array(fmask, dtype=np.intp), np.array(perms, dtype=np.intp), canonical


def build_reference(order: int) -> ReferenceElement:
    """Construct the order-``order`` nodal reference tetrahedron.

    Args:
        order: Polynomial degree ``P``, between 1 and 8.

    Returns:
        An immutable :class:`ReferenceElement`, cached per order.

    Raises:
        ConfigurationError: If ``order`` is out of range.
        NodeSetError: If the nodes fail to be unisolvent or face-symmetric.
    """
    return _build_reference(_as_int(order, "mesh.order", MIN_ORDER, MAX_ORDER))


@functools.lru_cache(maxsize=None)
def _build_reference(order: int) -> ReferenceElement:
    nodes = warp_blend_nodes(order)
    v = vandermonde(nodes, order)
    vinv = np.linalg.inv(v)
    vr, vs, vt = grad_vandermonde(nodes, order)
    mass = np.linalg.inv(v @ v.T)
    mass = 0.5 * (mass + mass.T)

    fmask, perms, canonical = _canonical_faces(nodes)
    nfp = num_face_nodes(order)
    if fmask.shape != (4, nfp):
        raise NodeSetError(f"expected {nfp} nodes per face, found {fmask.shape[1]}")

    emat = np.zeros((nodes.shape[0], 4 * nfp))
    for f in range(4):
        idx = fmask[f]
        ax, ay = FACE_AXES[f]
        vf = vandermonde_2d(nodes[idx, ax], nodes[idx, ay], order)
        emat[idx, f * nfp : (f + 1) * nfp] = np.linalg.inv(vf @ vf.T)
    lift = v @ (v.T @ emat)

    cond = float(np.linalg.cond(v))
    logger.debug("order %d reference element: Np=%d, cond(V)=%.3e", order, nodes.shape[0], cond)

    ref = ReferenceElement(
        order=order,
        nodes=nodes,
        V=v,
        Vinv=vinv,
        Dr=vr @ vinv,
        Ds=vs @ vinv,
        Dt=vt @ vinv,
        mass=mass,
        fmask=fmask,
        lift=lift,
        face_barycentric=canonical,
        face_perms=perms,
        condition_number=cond,
    )
    for arr in (
        ref.nodes, ref.V, ref.Vinv, ref.Dr, ref.Ds, ref.Dt, ref.mass, ref.fmask, ref.lift
    ):
        arr.setflags(write=False)
    return ref
