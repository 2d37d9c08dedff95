"""
Tetrahedral unit-cell meshes.

A :class:`Mesh` is immutable once built. It is produced either by
:func:`load_mesh` from an MSH 2.2 stream (read with ``meshio``) or by
:func:`generate_box_mesh`, which splits a layered structured hex grid into
tetrahedra. Both paths go through the same validation: elements are
oriented to positive volume, interior faces must be shared by exactly two
elements, and every boundary face gets exactly one :class:`BoundaryTag`.
Boundary faces without an explicit tag are accepted only on the four
lateral planes of the bounding box, where they become periodic.

Example::

    from floquetdg.mesh import generate_box_mesh
    from floquetdg.types import Lattice2

    mesh = generate_box_mesh(
        Lattice2.rectangular(0.35, 0.35),
        z_breaks=[0.0, 1.0, 2.0, 3.0],
        nx=2, ny=2, nz=[3, 3, 3],
        layer_materials=[1, 2, 1],
    )
"""

from __future__ import annotations

import io
import itertools
import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass
from typing import IO, Any, Callable, Optional, Union

import meshio
import numpy as np

from ._constants import GEOMETRIC_TOL_SCALE
from .exceptions import ConfigurationError, MeshError
from .reference_element import FACE_VERTICES
from .types import Block, BoundaryTag, Lattice2

logger = logging.getLogger(__name__)

MeshSource = Union[bytes, str, "os.PathLike[str]", IO[bytes]]
TagFunction = Callable[[tuple[int, int, int], np.ndarray], Optional[int]]

_FILE_TAGS = {int(BoundaryTag.PEC), int(BoundaryTag.ABC_TOP), int(BoundaryTag.ABC_BOTTOM)}
_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass(frozen=True, eq=False)
class Mesh:
    """Tetrahedral mesh with face connectivity and boundary tags.

    Attributes:
        vertices: ``(Nv, 3)`` coordinates in metres.
        elements: ``(K, 4)`` vertex indices, positively oriented.
        material: ``(K,)`` material id per element.
        face_tags: ``(K, 4)`` :class:`BoundaryTag` value per local face.
        neighbors: ``(K, 4)`` adjacent element across each face, ``-1`` on
            the boundary.
        neighbor_faces: ``(K, 4)`` local face index inside the neighbour.
        h: ``(K,)`` inscribed-sphere diameter per element (metres), the
            length scale of the time-step rule.
    """

    vertices: np.ndarray
    elements: np.ndarray
    material: np.ndarray
    face_tags: np.ndarray
    neighbors: np.ndarray
    neighbor_faces: np.ndarray
    h: np.ndarray

    @property
    def num_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def h_min(self) -> float:
        return float(self.h.min())

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def geometric_tolerance(self) -> float:
        lo, hi = self.bounding_box
        return GEOMETRIC_TOL_SCALE * float(max(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]))

    def face_vertex_ids(self, k: int, f: int) -> np.ndarray:
        return self.elements[k, list(FACE_VERTICES[f])]

    def face_coordinates(self, k: int, f: int) -> np.ndarray:
        """``(3, 3)`` vertex coordinates of local face ``f`` of element ``k``."""
        return self.vertices[self.face_vertex_ids(k, f)]

    def face_area(self, k: int, f: int) -> float:
        v = self.face_coordinates(k, f)
        return 0.5 * float(np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0])))

    def faces_with_tag(self, tag: BoundaryTag | int) -> np.ndarray:
        """``(n, 2)`` array of ``(element, face)`` pairs carrying ``tag``."""
        return np.argwhere(self.face_tags == int(tag))

    def faces_on_plane(self, axis: int, value: float, tol: float) -> np.ndarray:
        """``(n, 2)`` array of ``(element, face)`` pairs lying in a coordinate plane.

        Both sides of an interior face are returned.
        """
        coord = self.vertices[:, axis][self.elements]  # (K, 4)
        corners = coord[:, np.array(FACE_VERTICES)]  # (K, 4, 3)
        on_plane = np.all(np.abs(corners - value) <= tol, axis=2)
        return np.argwhere(on_plane)

    def element_centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    def translated(self, shift: Sequence[float]) -> Mesh:
        """Copy of the mesh rigidly shifted by ``shift``."""
        return _freeze(
            Mesh(
                vertices=self.vertices + np.asarray(shift, dtype=float),
                elements=self.elements.copy(),
                material=self.material.copy(),
                face_tags=self.face_tags.copy(),
                neighbors=self.neighbors.copy(),
                neighbor_faces=self.neighbor_faces.copy(),
                h=self.h.copy(),
            )
        )

    def stats(self) -> dict[str, Any]:
        """Summary numbers echoed to logs and to the run manifest."""
        counts = {tag.name: int(np.count_nonzero(self.face_tags == tag)) for tag in BoundaryTag}
        lo, hi = self.bounding_box
        return {
            "elements": self.num_elements,
            "vertices": self.num_vertices,
            "h_min_m": self.h_min,
            "h_max_m": float(self.h.max()),
            "z_min_m": float(lo[2]),
            "z_max_m": float(hi[2]),
            "faces": counts,
        }


def _freeze(mesh: Mesh) -> Mesh:
    for arr in (
        mesh.vertices,
        mesh.elements,
        mesh.material,
        mesh.face_tags,
        mesh.neighbors,
        mesh.neighbor_faces,
        mesh.h,
    ):
        arr.setflags(write=False)
    return mesh


# -- Validation and connectivity -----------------------------------------------


def _assemble_mesh(
    vertices: np.ndarray,
    elements: np.ndarray,
    material: np.ndarray,
    tag_of: TagFunction,
) -> Mesh:
    """Validate raw arrays and build a :class:`Mesh`.

    ``tag_of`` receives the sorted vertex ids (already renumbered) and the
    coordinates of each boundary face and returns its tag, or ``None`` to
    fall back to periodic-plane detection.
    """
    vertices = np.asarray(vertices, dtype=float)
    elements = np.asarray(elements, dtype=np.intp).copy()
    material = np.asarray(material, dtype=np.intp).copy()
    if elements.ndim != 2 or elements.shape[1] != 4 or elements.shape[0] == 0:
        raise MeshError("mesh must contain at least one tetrahedron")
    if elements.min() < 0 or elements.max() >= vertices.shape[0]:
        raise MeshError("element references a vertex that does not exist")

    used, remap = np.unique(elements, return_inverse=True)
    elements = remap.reshape(elements.shape).astype(np.intp)
    vertices = vertices[used]

    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    extent = float(np.max(hi - lo))
    tol = GEOMETRIC_TOL_SCALE * extent

    x = vertices[elements]
    vol6 = np.einsum("ki,ki->k", x[:, 1] - x[:, 0], np.cross(x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]))
    edges = np.stack([np.linalg.norm(x[:, a] - x[:, b], axis=1) for a, b in _EDGES], axis=1)
    areas = np.stack(
        [
            0.5 * np.linalg.norm(np.cross(x[:, b] - x[:, a], x[:, c] - x[:, a]), axis=1)
            for a, b, c in FACE_VERTICES
        ],
        axis=1,
    )
    # Inscribed-sphere diameter, 6 vol / surface area.
    h = np.abs(vol6) / areas.sum(axis=1)
    degenerate = np.abs(vol6) <= 1e-12 * edges.max(axis=1) ** 3
    if np.any(degenerate):
        k = int(np.flatnonzero(degenerate)[0])
        raise MeshError(f"element {k} has zero volume", element=k)
    inverted = vol6 < 0.0
    if np.any(inverted):
        logger.debug("reorienting %d inverted elements", int(inverted.sum()))
        elements[inverted, 2], elements[inverted, 3] = (
            elements[inverted, 3].copy(),
            elements[inverted, 2].copy(),
        )

    num_k = elements.shape[0]
    faces = np.sort(elements[:, np.array(FACE_VERTICES)], axis=2).reshape(-1, 3)
    _, inverse, counts = np.unique(faces, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        bad = int(np.flatnonzero(counts[inverse] > 2)[0])
        raise MeshError(
            f"face {bad % 4} of element {bad // 4} is shared by more than two elements",
            element=bad // 4,
            face=bad % 4,
        )

    neighbors = np.full(num_k * 4, -1, dtype=np.intp)
    neighbor_faces = np.full(num_k * 4, -1, dtype=np.intp)
    order = np.argsort(inverse, kind="stable")
    sorted_ids = inverse[order]
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    pair_starts = starts[counts[sorted_ids[starts]] == 2]
    first, second = order[pair_starts], order[pair_starts + 1]
    neighbors[first], neighbors[second] = second // 4, first // 4
    neighbor_faces[first], neighbor_faces[second] = second % 4, first % 4

    face_tags = np.full(num_k * 4, int(BoundaryTag.INTERIOR), dtype=np.intp)
    for idx in np.flatnonzero(neighbors < 0):
        k, f = divmod(int(idx), 4)
        ids = faces[idx]
        coords = vertices[ids]
        tag = tag_of((int(ids[0]), int(ids[1]), int(ids[2])), coords)
        if tag is None:
            tag = _periodic_tag(coords, lo, hi, tol)
        if tag is None:
            raise MeshError(
                f"boundary face {f} of element {k} is untagged and not on a periodic plane",
                element=k,
                face=f,
            )
        face_tags[idx] = int(tag)

    mesh = Mesh(
        vertices=vertices,
        elements=elements,
        material=material,
        face_tags=face_tags.reshape(num_k, 4),
        neighbors=neighbors.reshape(num_k, 4),
        neighbor_faces=neighbor_faces.reshape(num_k, 4),
        h=h,
    )
    logger.info(
        "mesh: %d elements, %d vertices, h_min=%.4g m, %d boundary faces",
        mesh.num_elements,
        mesh.num_vertices,
        mesh.h_min,
        int(np.count_nonzero(neighbors < 0)),
    )
    return _freeze(mesh)


def _periodic_tag(coords: np.ndarray, lo: np.ndarray, hi: np.ndarray, tol: float) -> int | None:
    for axis, tag in ((0, BoundaryTag.PERIODIC_X), (1, BoundaryTag.PERIODIC_Y)):
        c = coords[:, axis]
        if np.all(np.abs(c - lo[axis]) <= tol) or np.all(np.abs(c - hi[axis]) <= tol):
            return int(tag)
    return None


# -- MSH input / output -------------------------------------------------------------


def _read_bytes(source: MeshSource) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    data = source.read()
    return data.encode() if isinstance(data, str) else bytes(data)


def load_mesh(source: MeshSource, fmt: str = "msh2.2") -> Mesh:
    """Parse a tetrahedral unit-cell mesh.

    Tetrahedra take their material id from the first physical tag; boundary
    triangles carry physical tag 1 (PEC), 2 (ABC top) or 3 (ABC bottom).
    Periodic faces are not listed.

    Args:
        source: Raw bytes, a path, or a binary file object.
        fmt: Format tag; only MSH 2.2 ASCII (``"msh2.2"``) is understood.

    Returns:
        The validated :class:`Mesh`.

    Raises:
        MeshError: On malformed input, zero-volume elements, unknown
            boundary tags, or untagged boundary faces off the periodic planes.
    """
    if fmt.lower() not in ("msh2.2", "msh", "gmsh", "gmsh22"):
        raise MeshError(f"unsupported mesh format {fmt!r}")
    data = _read_bytes(source)
    header = data.lstrip()[:64].split()
    if len(header) < 2 or header[0] != b"$MeshFormat" or not header[1].startswith(b"2.2"):
        raise MeshError("expected an MSH 2.2 stream starting with $MeshFormat 2.2")
    try:
        raw = meshio.read(io.BytesIO(data), file_format="gmsh")
    except (meshio.ReadError, ValueError, IndexError, KeyError) as exc:
        raise MeshError(f"malformed mesh stream: {exc}") from exc

    try:
        tets = raw.get_cells_type("tetra")
    except KeyError:
        tets = np.empty((0, 4), dtype=np.intp)
    if len(tets) == 0:
        raise MeshError("mesh stream contains no tetrahedra")
    try:
        material = raw.get_cell_data("gmsh:physical", "tetra")
    except KeyError as exc:
        raise MeshError("tetrahedra must carry a physical material tag") from exc

    tagged: dict[tuple[int, int, int], int] = {}
    triangles = raw.get_cells_type("triangle")
    if len(triangles):
        try:
            tri_tags = raw.get_cell_data("gmsh:physical", "triangle")
        except KeyError as exc:
            raise MeshError("boundary triangles must carry a physical tag") from exc
        for n, (tri, tag) in enumerate(zip(triangles, tri_tags)):
            if int(tag) not in _FILE_TAGS:
                raise MeshError(f"boundary triangle {n} has unknown tag {int(tag)}", face=n)
            tagged[tuple(sorted(int(v) for v in tri))] = int(tag)  # type: ignore[index]

    # Boundary lookup must use the renumbering applied in _assemble_mesh.
    used = np.unique(tets)
    new_id = {int(old): new for new, old in enumerate(used)}
    renumbered: dict[tuple[int, int, int], int] = {}
    for key, tag in tagged.items():
        if not all(v in new_id for v in key):
            raise MeshError("boundary triangle references a vertex outside the volume mesh")
        ids = sorted(new_id[v] for v in key)
        renumbered[(ids[0], ids[1], ids[2])] = tag

    seen: set[tuple[int, int, int]] = set()

    def tag_of(ids: tuple[int, int, int], coords: np.ndarray) -> int | None:
        tag = renumbered.get(ids)
        if tag is not None:
            seen.add(ids)
        return tag

    mesh = _assemble_mesh(raw.points[:, :3], tets, material, tag_of)
    stray = set(renumbered) - seen
    if stray:
        raise MeshError(f"{len(stray)} tagged triangles are not boundary faces of the mesh")
    return mesh


def write_mesh(mesh: Mesh, path: str | os.PathLike[str]) -> None:
    """Write ``mesh`` as MSH 2.2 ASCII with tagged PEC/ABC boundary triangles."""
    keep = np.isin(mesh.face_tags, list(_FILE_TAGS))
    kf = np.argwhere(keep)
    tris = np.array([mesh.face_vertex_ids(k, f) for k, f in kf], dtype=np.int64).reshape(-1, 3)
    tri_tags = mesh.face_tags[keep].astype(np.int64)
    cells: list[tuple[str, np.ndarray]] = [("tetra", mesh.elements.astype(np.int64))]
    physical = [mesh.material.astype(np.int64)]
    if len(tris):
        cells.append(("triangle", tris))
        physical.append(tri_tags)
    out = meshio.Mesh(
        points=np.asarray(mesh.vertices, dtype=float),
        cells=cells,
        cell_data={"gmsh:physical": physical, "gmsh:geometrical": [p.copy() for p in physical]},
    )
    meshio.write(path, out, file_format="gmsh22", binary=False)


# -- Structured box generator ----------------------------------------------------

# Tets of a unit hex, corners indexed by (i, j, k) offsets.
_KUHN = [
    ((0, 0, 0), tuple(int(a == p[0]) for a in range(3)),
     tuple(int(a in p[:2]) for a in range(3)), (1, 1, 1))
    for p in itertools.permutations(range(3))
]
_FIVE_EVEN = [
    ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)),
    ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((1, 1, 0), (1, 0, 0), (0, 1, 0), (1, 1, 1)),
    ((1, 0, 1), (1, 0, 0), (0, 0, 1), (1, 1, 1)),
    ((0, 1, 1), (0, 1, 0), (0, 0, 1), (1, 1, 1)),
]
_FIVE_ODD = [
    ((0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)),
    ((1, 0, 0), (0, 0, 0), (1, 1, 0), (1, 0, 1)),
    ((0, 1, 0), (0, 0, 0), (1, 1, 0), (0, 1, 1)),
    ((0, 0, 1), (0, 0, 0), (1, 0, 1), (0, 1, 1)),
    ((1, 1, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1)),
]


def generate_box_mesh(
    lattice: Lattice2,
    z_breaks: Sequence[float],
    nx: int,
    ny: int,
    nz: Sequence[int],
    layer_materials: Sequence[int],
    stagger: bool = False,
    blocks: Sequence[Block] = (),
    pec_materials: Sequence[int] = (),
    top_tag: BoundaryTag = BoundaryTag.ABC_TOP,
    bottom_tag: BoundaryTag = BoundaryTag.ABC_BOTTOM,
) -> Mesh:
    """Mesh a layered unit cell ``[0,|a1|] x [0,|a2|] x [z_0, z_n]``.

    Each hex of the structured grid is split into 6 tetrahedra along its
    main diagonal, which keeps opposite periodic planes conformal. With
    ``stagger=True`` hexes are split into 5 tetrahedra in a checkerboard
    pattern instead; an odd ``nx`` (or ``ny``) then leaves crossed
    diagonals on the opposite x (or y) planes, giving a non-conformal
    periodic interface.

    Args:
        lattice: Axis-aligned rectangular lattice.
        z_breaks: Strictly increasing layer interfaces (metres).
        nx, ny: Divisions along ``a1`` and ``a2``.
        nz: Divisions per layer.
        layer_materials: Material id per layer.
        stagger: Use the 5-tet checkerboard split.
        blocks: Material overrides for hexes whose centre lies inside.
        pec_materials: Material ids whose hexes are removed; their exposed
            faces are tagged PEC.
        top_tag, bottom_tag: Tags of the ``z_n`` and ``z_0`` planes.

    Raises:
        ConfigurationError: On inconsistent layer data or a rotated lattice.
    """
    z = np.asarray(z_breaks, dtype=float)
    layers = len(z) - 1
    if layers < 1 or np.any(np.diff(z) <= 0.0):
        raise ConfigurationError(
            "z_breaks must be strictly increasing with at least two entries",
            fields={"structure.z_breaks": "not strictly increasing"},
        )
    if len(nz) != layers or len(layer_materials) != layers:
        raise ConfigurationError(
            f"expected {layers} per-layer divisions and materials",
            fields={"mesh.nz": "length mismatch", "structure.layer_materials": "length mismatch"},
        )
    if nx < 1 or ny < 1 or min(nz) < 1:
        raise ConfigurationError("divisions must be >= 1", fields={"mesh.nx": "< 1"})
    a1, a2 = lattice.vectors
    if abs(a1[1]) > 0.0 or abs(a2[0]) > 0.0:
        raise ConfigurationError(
            "the box generator needs a1 along x and a2 along y",
            fields={"lattice.a1_m": "not axis aligned"},
        )
    lx, ly = lattice.lengths

    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    zs_parts = [np.linspace(z[i], z[i + 1], nz[i] + 1)[(1 if i else 0) :] for i in range(layers)]
    zs = np.concatenate(zs_parts)
    layer_of = np.concatenate([np.full(nz[i], i) for i in range(layers)])
    nxv, nyv = nx + 1, ny + 1

    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    vertices = np.stack([gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")], axis=1)

    def vid(i: int, j: int, k: int) -> int:
        return i + nxv * (j + nyv * k)

    pec = {int(m) for m in pec_materials}
    elements: list[tuple[int, int, int, int]] = []
    material: list[int] = []
    for k in range(len(zs) - 1):
        for j in range(ny):
            for i in range(nx):
                centre = 0.5 * np.array([xs[i] + xs[i + 1], ys[j] + ys[j + 1], zs[k] + zs[k + 1]])
                mat = int(layer_materials[layer_of[k]])
                for block in blocks:
                    if block.contains(centre):
                        mat = int(block.material_id)
                if mat in pec:
                    continue
                if stagger:
                    template = _FIVE_EVEN if (i + j + k) % 2 == 0 else _FIVE_ODD
                else:
                    template = _KUHN
                for tet in template:
                    a, b, c, d = (vid(i + o[0], j + o[1], k + o[2]) for o in tet)
                    elements.append((a, b, c, d))
                    material.append(mat)
    if not elements:
        raise ConfigurationError("every hex was removed as PEC", fields={"structure": "empty"})

    tol = GEOMETRIC_TOL_SCALE * float(max(lx, ly, z[-1] - z[0]))

    def tag_of(ids: tuple[int, int, int], coords: np.ndarray) -> int | None:
        cz = coords[:, 2]
        if np.all(np.abs(cz - z[0]) <= tol):
            return int(bottom_tag)
        if np.all(np.abs(cz - z[-1]) <= tol):
            return int(top_tag)
        for axis, length in ((0, lx), (1, ly)):
            c = coords[:, axis]
            if np.all(np.abs(c) <= tol) or np.all(np.abs(c - length) <= tol):
                return None
        return int(BoundaryTag.PEC)

    return _assemble_mesh(vertices, np.array(elements), np.array(material), tag_of)
