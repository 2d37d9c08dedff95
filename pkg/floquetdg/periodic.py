"""
Periodic face maps between opposite unit-cell planes.

Faces on ``x = x_min`` are paired with faces on ``x = x_min + |a1|`` (and
likewise in y). Where the two triangulations coincide after translation
the pair is *conformal* and nodes map one to one. Everything left over is
clipped triangle against triangle into convex *fragments* of 3 to 6
vertices, which carry their own quadrature for the surface integrals.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from ._constants import GEOMETRIC_TOL_SCALE, SLIVER_FRACTION
from .exceptions import ConfigurationError, GeometryError, TopologyError
from .mesh import Mesh
from .reference_element import face_orientation, triangle_quadrature
from .types import BoundaryTag, Lattice2

logger = logging.getLogger(__name__)

# Relative area deficit above which a non-conformal face counts as uncovered.
_COVERAGE_RTOL = 1e-9


# -- Planar clipping ------------------------------------------------------------------


@dataclass(frozen=True)
class ClipFragment:
    """Convex intersection of triangle ``index_a`` with triangle ``index_b``.

    ``polygon`` holds 3 to 6 vertices, counter-clockwise about the plane
    normal of side A, in side-A coordinates.
    """

    polygon: np.ndarray
    area: float
    index_a: int
    index_b: int


def _plane_frame(points: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Origin and in-plane orthonormal axes ``(e1, e2)`` of coplanar ``points``."""
    origin = points[0]
    rel = points - origin
    normal = np.cross(rel[1], rel[2])
    norm = float(np.linalg.norm(normal))
    if norm <= tol * tol:
        raise GeometryError("first triangle is degenerate")
    normal /= norm
    distance = np.abs(rel @ normal)
    if float(distance.max()) > tol:
        raise GeometryError(
            "triangles are not coplanar after translation",
            details={"max_offset_m": float(distance.max())},
        )
    e1 = rel[1] / np.linalg.norm(rel[1])
    e2 = np.cross(normal, e1)
    return origin, e1, e2


def _shoelace(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _ccw(tri: np.ndarray) -> np.ndarray:
    return tri if _shoelace(tri) >= 0.0 else tri[::-1]


def _clip_convex(subject: np.ndarray, clip: np.ndarray, tol: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon by a CCW convex polygon."""
    output = subject
    for i in range(len(clip)):
        if len(output) == 0:
            break
        a, b = clip[i], clip[(i + 1) % len(clip)]
        edge = b - a
        length = float(np.hypot(edge[0], edge[1]))
        # Signed distance to the edge line, positive inside.
        side = (edge[0] * (output[:, 1] - a[1]) - edge[1] * (output[:, 0] - a[0])) / length
        inside = side >= -tol
        kept: list[np.ndarray] = []
        n = len(output)
        for j in range(n):
            cur, nxt = output[j], output[(j + 1) % n]
            sc, sn = side[j], side[(j + 1) % n]
            if inside[j]:
                kept.append(cur)
            if inside[j] != inside[(j + 1) % n]:
                w = sc / (sc - sn)
                kept.append(cur + w * (nxt - cur))
        output = np.array(kept) if kept else np.empty((0, 2))
    return output


def _simplify(poly: np.ndarray, tol: float) -> np.ndarray:
    """Drop repeated and collinear vertices."""
    if len(poly) == 0:
        return poly
    pts: list[np.ndarray] = []
    for p in poly:
        if not pts or np.hypot(*(p - pts[-1])) > tol:
            pts.append(p)
    while len(pts) > 1 and np.hypot(*(pts[0] - pts[-1])) <= tol:
        pts.pop()
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        for j in range(len(pts)):
            prev, cur, nxt = pts[j - 1], pts[j], pts[(j + 1) % len(pts)]
            u, v = cur - prev, nxt - cur
            cross = u[0] * v[1] - u[1] * v[0]
            if abs(cross) <= tol * max(np.hypot(*u), np.hypot(*v)):
                del pts[j]
                changed = True
                break
    return np.array(pts) if pts else np.empty((0, 2))


def clip_faces(
    triangles_a: Any,
    triangles_b: Any,
    translation: Sequence[float],
    tol: float | None = None,
) -> list[ClipFragment]:
    """Intersect every triangle of side A with every triangle of side B.

    Args:
        triangles_a: ``(na, 3, 3)`` triangle vertices of side A.
        triangles_b: ``(nb, 3, 3)`` triangle vertices of side B.
        translation: Shift applied to side B to bring it onto side A.
        tol: Geometric tolerance; defaults to 1e-8 of the point cloud extent.

    Returns:
        Fragments with area above ``tol**2``, in side-A coordinates.

    Raises:
        GeometryError: If the translated triangles are not coplanar.
    """
    ta = np.asarray(triangles_a, dtype=float).reshape(-1, 3, 3)
    tb = np.asarray(triangles_b, dtype=float).reshape(-1, 3, 3) + np.asarray(
        translation, dtype=float
    )
    if len(ta) == 0 or len(tb) == 0:
        return []
    cloud = np.concatenate([ta.reshape(-1, 3), tb.reshape(-1, 3)])
    if tol is None:
        tol = GEOMETRIC_TOL_SCALE * float(np.ptp(cloud, axis=0).max())
    origin, e1, e2 = _plane_frame(cloud, max(tol, 1e-300))

    def project(tris: np.ndarray) -> np.ndarray:
        rel = tris - origin
        return np.stack([rel @ e1, rel @ e2], axis=-1)

    pa, pb = project(ta), project(tb)
    lo_b, hi_b = pb.min(axis=1), pb.max(axis=1)
    fragments: list[ClipFragment] = []
    for i, tri_a in enumerate(pa):
        lo, hi = tri_a.min(axis=0), tri_a.max(axis=0)
        overlap = np.all((lo_b <= hi[None, :] + tol) & (hi_b >= lo[None, :] - tol), axis=1)
        subject = _ccw(tri_a)
        for j in np.flatnonzero(overlap):
            poly = _simplify(_clip_convex(subject, _ccw(pb[j]), tol), tol)
            if len(poly) < 3:
                continue
            area = _shoelace(poly)
            if area < tol * tol:
                continue
            if len(poly) > 6:
                raise GeometryError(f"triangle intersection with {len(poly)} vertices")
            xyz = origin + poly[:, :1] * e1 + poly[:, 1:] * e2
            fragments.append(ClipFragment(polygon=xyz, area=area, index_a=i, index_b=int(j)))
    return fragments


# -- Periodic map --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConformalPair:
    """Two periodic faces that coincide under translation by ``shift``.

    ``orientation`` indexes ``ORIENTATIONS``: vertex ``m`` of face B, moved
    back by ``shift``, equals vertex ``ORIENTATIONS[orientation][m]`` of
    face A.
    """

    elem_a: int
    face_a: int
    elem_b: int
    face_b: int
    orientation: int
    shift: np.ndarray
    orientation_ba: int = 0


@dataclass(frozen=True)
class Fragment:
    """Piece of a non-conformal periodic interface.

    Attributes:
        elem_a, face_a: Parent face on the lower plane.
        elem_b, face_b: Parent face on the upper plane.
        polygon: Convex vertices on the lower plane (metres).
        area: Polygon area (m²).
        shift: Translation taking the lower plane onto the upper one.
        parent_area: Area of face A, used for the sliver threshold.
    """

    elem_a: int
    face_a: int
    elem_b: int
    face_b: int
    polygon: np.ndarray
    area: float
    shift: np.ndarray
    parent_area: float

    @property
    def num_vertices(self) -> int:
        return int(self.polygon.shape[0])

    def triangles(self) -> np.ndarray:
        """``(n, 3, 3)`` fan triangulation about the vertex centroid."""
        c = self.polygon.mean(axis=0)
        nxt = np.roll(self.polygon, -1, axis=0)
        return np.stack([np.broadcast_to(c, self.polygon.shape), self.polygon, nxt], axis=1)

    def quadrature(self, degree: int) -> tuple[np.ndarray, np.ndarray]:
        """Points on the lower plane and physical weights of a degree-``degree`` rule."""
        rule = triangle_quadrature(degree)
        points, weights = [], []
        for tri in self.triangles():
            area = 0.5 * float(np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0])))
            if area <= SLIVER_FRACTION * self.parent_area:
                continue
            p, w = rule.on_triangle(tri)
            points.append(p)
            weights.append(w)
        if not points:
            return np.empty((0, 3)), np.empty(0)
        return np.concatenate(points), np.concatenate(weights)


@dataclass(frozen=True)
class PeriodicMap:
    """Conformal pairs and fragments for both lattice directions."""

    pairs: tuple[ConformalPair, ...]
    fragments: tuple[Fragment, ...]
    plane_area: dict[str, float] = field(default_factory=dict)
    covered_area: dict[str, float] = field(default_factory=dict)
    sliver_area: float = 0.0

    @property
    def num_conformal(self) -> int:
        return len(self.pairs)

    @property
    def num_fragments(self) -> int:
        return len(self.fragments)

    def nonconformal_faces(self) -> set[tuple[int, int]]:
        """``(element, face)`` pairs whose coupling goes through fragments."""
        faces: set[tuple[int, int]] = set()
        for frag in self.fragments:
            faces.add((frag.elem_a, frag.face_a))
            faces.add((frag.elem_b, frag.face_b))
        return faces

    def area_error(self) -> float:
        """Worst relative mismatch between covered and total plane area."""
        errors = [
            abs(self.covered_area[key] - total) / total
            for key, total in self.plane_area.items()
            if total > 0.0
        ]
        return max(errors, default=0.0)

    def stats(self) -> dict[str, Any]:
        counts = {n: 0 for n in range(3, 7)}
        for frag in self.fragments:
            counts[frag.num_vertices] += 1
        return {
            "conformal_pairs": self.num_conformal,
            "fragments": self.num_fragments,
            "fragment_vertices": counts,
            "area_error": self.area_error(),
        }


def _split_plane(
    mesh: Mesh, faces: np.ndarray, axis: int, lo: float, hi: float, tol: float
) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    low: list[tuple[int, int]] = []
    high: list[tuple[int, int]] = []
    for k, f in faces:
        c = float(mesh.face_coordinates(int(k), int(f))[:, axis].mean())
        if abs(c - lo) <= tol:
            low.append((int(k), int(f)))
        elif abs(c - hi) <= tol:
            high.append((int(k), int(f)))
        else:
            raise TopologyError(f"periodic face ({k}, {f}) lies off the bounding planes")
    return low, high


def pair_periodic_faces(
    mesh: Mesh, lattice: Lattice2, tolerance: float | None = None
) -> PeriodicMap:
    """Pair the periodic faces of ``mesh`` across the unit cell.

    Args:
        mesh: Mesh whose periodic faces carry ``PERIODIC_X``/``PERIODIC_Y``.
        lattice: Axis-aligned lattice; its lengths must match the mesh
            extent in x and y.
        tolerance: Matching tolerance in metres; defaults to
            ``1e-8 * max(|a1|, |a2|)``.

    Raises:
        ConfigurationError: If the lattice is not axis aligned.
        TopologyError: If the mesh period disagrees with the lattice or a
            face is left partially uncovered.
    """
    a1, a2 = lattice.vectors
    if abs(a1[1]) > 0.0 or abs(a2[0]) > 0.0:
        raise ConfigurationError(
            "periodic pairing needs a1 along x and a2 along y",
            fields={"lattice.a1_m": "not axis aligned"},
        )
    tol = lattice.default_tolerance() if tolerance is None else float(tolerance)
    bb_lo, bb_hi = mesh.bounding_box

    pairs: list[ConformalPair] = []
    fragments: list[Fragment] = []
    plane_area: dict[str, float] = {}
    covered: dict[str, float] = {}
    sliver_area = 0.0
    uncovered = 0.0

    for axis, tag, length, key in (
        (0, BoundaryTag.PERIODIC_X, lattice.lengths[0], "x"),
        (1, BoundaryTag.PERIODIC_Y, lattice.lengths[1], "y"),
    ):
        faces = mesh.faces_with_tag(tag)
        if len(faces) == 0:
            continue
        extent = float(bb_hi[axis] - bb_lo[axis])
        if abs(extent - length) > tol:
            raise TopologyError(
                f"mesh period along {key} is {extent:.9g} m, lattice says {length:.9g} m",
                details={"axis": key, "mesh_extent_m": extent, "lattice_length_m": length},
            )
        shift = np.zeros(3)
        shift[axis] = extent
        low, high = _split_plane(mesh, faces, axis, float(bb_lo[axis]), float(bb_hi[axis]), tol)
        coords_low = np.array([mesh.face_coordinates(k, f) for k, f in low]).reshape(-1, 3, 3)
        coords_high = np.array([mesh.face_coordinates(k, f) for k, f in high]).reshape(-1, 3, 3)
        areas_low = np.array([mesh.face_area(k, f) for k, f in low])
        areas_high = np.array([mesh.face_area(k, f) for k, f in high])
        plane_area[key] = float(areas_low.sum())

        matched_low = np.zeros(len(low), dtype=bool)
        matched_high = np.zeros(len(high), dtype=bool)
        if len(high) and len(low):
            tree = cKDTree(coords_high.mean(axis=1) - shift)
            dist, j = tree.query(coords_low.mean(axis=1), distance_upper_bound=10.0 * tol)
            for i, (d, jj) in enumerate(zip(dist, j)):
                if not np.isfinite(d) or matched_high[jj]:
                    continue
                try:
                    o_ab = face_orientation(coords_low[i], coords_high[jj] - shift, tol)
                    o_ba = face_orientation(coords_high[jj] - shift, coords_low[i], tol)
                except ValueError:
                    continue
                matched_low[i] = matched_high[jj] = True
                (ka, fa), (kb, fb) = low[i], high[jj]
                pairs.append(ConformalPair(ka, fa, kb, fb, o_ab, shift.copy(), o_ba))

        rest_low = np.flatnonzero(~matched_low)
        rest_high = np.flatnonzero(~matched_high)
        clipped = clip_faces(coords_low[rest_low], coords_high[rest_high], -shift, tol)
        cover_low = np.zeros(len(low))
        cover_high = np.zeros(len(high))
        for clip in clipped:
            i, jj = int(rest_low[clip.index_a]), int(rest_high[clip.index_b])
            cover_low[i] += clip.area
            cover_high[jj] += clip.area
            (ka, fa), (kb, fb) = low[i], high[jj]
            if clip.area <= SLIVER_FRACTION * areas_low[i]:
                sliver_area += clip.area
                continue
            fragments.append(
                Fragment(ka, fa, kb, fb, clip.polygon, clip.area, shift.copy(), float(areas_low[i]))
            )

        covered[key] = float(areas_low[matched_low].sum() + cover_low.sum())
        sides = ((rest_low, cover_low, areas_low), (rest_high, cover_high, areas_high))
        for rest, cover, areas in sides:
            deficit = areas[rest] - cover[rest]
            uncovered += float(deficit[deficit > _COVERAGE_RTOL * areas[rest]].sum())
        if len(rest_low):
            logger.warning(
                "non-conformal periodic plane %s: %d + %d faces clipped into %d fragments",
                key,
                len(rest_low),
                len(rest_high),
                len(clipped),
            )

    if uncovered > 0.0:
        raise TopologyError(
            f"periodic faces left without a partner, uncovered area {uncovered:.3e} m²",
            uncovered_area=uncovered,
        )
    pmap = PeriodicMap(
        pairs=tuple(pairs),
        fragments=tuple(fragments),
        plane_area=plane_area,
        covered_area=covered,
        sliver_area=sliver_area,
    )
    logger.info(
        "periodic map: %d conformal pairs, %d fragments, area error %.2e",
        pmap.num_conformal,
        pmap.num_fragments,
        pmap.area_error(),
    )
    return pmap
