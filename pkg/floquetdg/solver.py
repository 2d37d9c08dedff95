"""
Semi-discrete transformed Maxwell operator and time stepping.

The unknown is the six-vector ``q = (P, S)`` stored as an array of shape
``(6, K, Np)``. The transformed fields obey

    Q dq/dt = (curl S, -curl P)

with the per-material matrix ``Q`` from :func:`floquetdg.operators.assemble_Q`.
Element coupling goes through the periodic upwind flux; physical
boundaries and the total-field/scattered-field plane enter as prescribed
jumps.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from ._constants import RK4A, RK4B, RK4C, SI, UnitSystem
from .exceptions import BlowUpError, MaterialError, ProbeError
from .mesh import Mesh
from .operators import (
    GeometricFactors,
    LocalOperators,
    MaterialTable,
    assemble_Q,
    geometric_factors,
    local_matrices,
)
from .periodic import PeriodicMap, pair_periodic_faces
from .reference_element import ReferenceElement, build_reference, face_orientation
from .types import BoundaryTag, IncidenceConfig, Lattice2, Polarization

logger = logging.getLogger(__name__)

BoundaryKind = Literal["PEC", "ABC", "TFSF"]
RhsFunction = Callable[[float, np.ndarray], np.ndarray]


# -- Flux and jumps -----------------------------------------------------------------


def numerical_flux(
    jump_p: Any,
    jump_s: Any,
    z_plus: Any,
    z_minus: Any,
    y_plus: Any,
    y_minus: Any,
    normal: Any,
) -> np.ndarray:
    """Periodic upwind flux ``n.(F - F*)``.

    Vector arguments carry their components on the last axis; impedances
    broadcast against the leading axes.

    Returns:
        Array of shape ``(..., 6)``: the ``P`` rows followed by the ``S`` rows.

    Raises:
        MaterialError: If either impedance sum is not positive.
    """
    jp = np.asarray(jump_p, dtype=float)
    js = np.asarray(jump_s, dtype=float)
    n = np.asarray(normal, dtype=float)
    zp, zm = np.asarray(z_plus, dtype=float), np.asarray(z_minus, dtype=float)
    yp, ym = np.asarray(y_plus, dtype=float), np.asarray(y_minus, dtype=float)
    z_bar, y_bar = zp + zm, yp + ym
    if np.any(zp <= 0.0) or np.any(zm <= 0.0) or np.any(yp <= 0.0) or np.any(ym <= 0.0):
        raise MaterialError("numerical flux needs positive impedances and admittances")

    n_x_jp = np.cross(n, jp)
    n_x_js = np.cross(n, js)
    upper = -np.cross(n, zp[..., None] * js - n_x_jp) / z_bar[..., None]
    lower = np.cross(n, yp[..., None] * jp + n_x_js) / y_bar[..., None]
    return np.concatenate([upper, lower], axis=-1)


def bc_jump(
    kind: BoundaryKind,
    polarization: Polarization,
    p_minus: Any,
    s_minus: Any,
    theta: float = 0.0,
    p_plus: Any = None,
    s_plus: Any = None,
    p_inc: Any = None,
    s_inc: Any = None,
    sign: Any = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Prescribed ``(jump P, jump S)`` on a boundary or TF/SF face.

    ``sign`` (TF/SF only) is +1 where the exterior trace lies in the
    scattered-field region and -1 where it lies in the total-field region.

    Raises:
        ValueError: For an unknown kind, or TF/SF without exterior or
            incident values.
    """
    pm = np.asarray(p_minus, dtype=float)
    sm = np.asarray(s_minus, dtype=float)
    if kind == "PEC":
        return -2.0 * pm, np.zeros_like(sm)
    if kind == "ABC":
        c = abs(math.cos(theta))
        if polarization == "TE":
            return -2.0 * c * pm, -2.0 * sm
        return -2.0 * pm, -2.0 * c * sm
    if kind == "TFSF":
        if p_plus is None or s_plus is None or p_inc is None or s_inc is None:
            raise ValueError("TF/SF jumps need exterior traces and incident values")
        sg = np.asarray(sign, dtype=float)
        if sg.ndim:
            sg = sg[..., None]
        return (
            np.asarray(p_plus) - pm + sg * np.asarray(p_inc),
            np.asarray(s_plus) - sm + sg * np.asarray(s_inc),
        )
    raise ValueError(f"unknown boundary kind {kind!r}")


def incident_fields(
    points: Any,
    t: float,
    inc: IncidenceConfig,
    impedance: Any,
    units: UnitSystem = SI,
) -> tuple[np.ndarray, np.ndarray]:
    """Transformed incident planewave ``(P_inc, S_inc)`` at ``points``.

    Only the z-coordinate of each point matters: the transverse phase of
    the planewave is absorbed by the field transformation.
    """
    pts = np.asarray(points, dtype=float)
    k_hat = inc.k_hat
    u = t - k_hat[2] * (pts[..., 2] - inc.z_ref) / units.c0 - inc.t0
    p = inc.amplitude * inc.waveform(u)[..., None] * inc.polarization_vector
    z = np.asarray(impedance, dtype=float)
    s = np.cross(k_hat, p) / (z[..., None] if z.ndim else z)
    return p, s


# -- Discretization ------------------------------------------------------------------


@dataclass(frozen=True)
class FragmentCoupling:
    """Quadrature-point data for every non-conformal periodic fragment side."""

    elem: np.ndarray
    other: np.ndarray
    interp_self: np.ndarray
    interp_other: np.ndarray
    test: np.ndarray
    normal: np.ndarray
    z_minus: np.ndarray
    z_plus: np.ndarray
    y_minus: np.ndarray
    y_plus: np.ndarray

    @property
    def size(self) -> int:
        return int(self.elem.shape[0])


@dataclass
class FieldState:
    """Nodal six-vector at time ``t``."""

    q: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, num_elements: int, np_: int) -> FieldState:
        return cls(np.zeros((6, num_elements, np_)))

    @property
    def P(self) -> np.ndarray:
        return self.q[:3]

    @property
    def S(self) -> np.ndarray:
        return self.q[3:]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)))


@dataclass(frozen=True, eq=False)
class Discretization:
    """All precomputed structures needed to evaluate the right-hand side.

    Face-node arrays have shape ``(K, 4 * Nfp)`` with the nodes of face ``f``
    in columns ``f * Nfp`` to ``(f + 1) * Nfp``.
    """

    mesh: Mesh
    ref: ReferenceElement
    geo: GeometricFactors
    ops: LocalOperators
    materials: MaterialTable
    incidence: IncidenceConfig
    units: UnitSystem
    pmap: PeriodicMap
    q_elem: np.ndarray
    qinv_elem: np.ndarray
    eps_elem: np.ndarray
    mu_elem: np.ndarray
    vmap_p: np.ndarray
    normals: np.ndarray
    face_points: np.ndarray
    z_minus: np.ndarray
    z_plus: np.ndarray
    y_minus: np.ndarray
    y_plus: np.ndarray
    pec_mask: np.ndarray
    abc_mask: np.ndarray
    fragment_mask: np.ndarray
    tfsf_sign: np.ndarray
    fragments: FragmentCoupling
    abc_polarization: Polarization
    z_tfsf: float | None = None
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def num_elements(self) -> int:
        return self.mesh.num_elements

    @property
    def np_(self) -> int:
        return self.ref.np_

    @property
    def has_fragments(self) -> bool:
        return self.fragments.size > 0

    def zeros(self) -> np.ndarray:
        return np.zeros((6, self.num_elements, self.np_))

    def nodes(self) -> np.ndarray:
        """``(K, Np, 3)`` physical node coordinates."""
        return self.geo.nodes

    def project(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Nodal samples of ``func(points) -> (..., 6)`` as a state array."""
        values = np.asarray(func(self.nodes()), dtype=float)
        return np.moveaxis(values, -1, 0).copy()

    def energy(self, q: np.ndarray) -> float:
        """Discrete energy ``1/2 sum_k q_k^T (M_k x Q_k) q_k``."""
        mq = q @ self.ref.mass
        inner = np.einsum("akn,bkn->kab", q, mq)
        return 0.5 * float(np.einsum("k,kab,kab->", self.geo.J, self.q_elem, inner))

    @classmethod
    def build(
        cls,
        mesh: Mesh,
        order: int,
        materials: MaterialTable,
        incidence: IncidenceConfig,
        lattice: Lattice2 | None = None,
        pmap: PeriodicMap | None = None,
        z_tfsf: float | None = None,
        abc_polarization: Polarization | None = None,
        quadrature_degree: int | None = None,
    ) -> Discretization:
        """Assemble the discretization of ``mesh`` at polynomial ``order``.

        Args:
            mesh: Validated unit-cell mesh.
            order: Polynomial degree ``P``.
            materials: Material table; every element id must be present.
            incidence: Incident planewave, which fixes ``Q``.
            lattice: Needed to pair periodic faces when ``pmap`` is omitted.
            pmap: Precomputed periodic map.
            z_tfsf: Height of the TF/SF plane, or ``None`` for no injection.
            abc_polarization: Polarization row used at ABC faces; defaults
                to the incident polarization.
            quadrature_degree: Fragment rule degree, default ``2 * order``.

        Raises:
            ProbeError: If ``z_tfsf`` is not a full layer of interior faces.
            SingularityError: If ``Q`` is singular for some material.
        """
        ref = build_reference(order)
        units = materials.units
        geo = geometric_factors(mesh, ref)
        ops = local_matrices(ref, geo)
        num_k, np_, nfp = mesh.num_elements, ref.np_, ref.nfp
        tol = mesh.geometric_tolerance()

        if pmap is None:
            has_periodic = np.any(
                np.isin(mesh.face_tags, [BoundaryTag.PERIODIC_X, BoundaryTag.PERIODIC_Y])
            )
            if has_periodic and lattice is None:
                raise ValueError("a lattice is required to pair periodic faces")
            pmap = (
                pair_periodic_faces(mesh, lattice)  # type: ignore[arg-type]
                if has_periodic
                else PeriodicMap(pairs=(), fragments=())
            )

        qmats = {
            int(m): assemble_Q(materials[int(m)], incidence, units)
            for m in np.unique(mesh.material)
        }
        q_elem = np.stack([qmats[int(m)].Q for m in mesh.material])
        qinv_elem = np.stack([qmats[int(m)].Qinv for m in mesh.material])
        z_elem = materials.per_element(mesh.material, "impedance")
        eps_elem = materials.per_element(mesh.material, "epsilon")
        mu_elem = materials.per_element(mesh.material, "mu")

        # Exterior node lookup, default to self.
        fm = ref.fmask
        vmap_m = (np.arange(num_k)[:, None] * np_ + ref.fmask_flat[None, :]).astype(np.intp)
        vmap_p = vmap_m.copy()
        z_plus = np.repeat(z_elem[:, None], 4 * nfp, axis=1)
        for k in range(num_k):
            for f in range(4):
                k2 = int(mesh.neighbors[k, f])
                if k2 < 0:
                    continue
                f2 = int(mesh.neighbor_faces[k, f])
                o = face_orientation(
                    mesh.face_coordinates(k, f), mesh.face_coordinates(k2, f2), tol
                )
                vmap_p[k, f * nfp : (f + 1) * nfp] = k2 * np_ + fm[f2][ref.face_perms[o]]
                z_plus[k, f * nfp : (f + 1) * nfp] = z_elem[k2]
        for pair in pmap.pairs:
            ka, fa, kb, fb = pair.elem_a, pair.face_a, pair.elem_b, pair.face_b
            perm_ab = ref.face_perms[pair.orientation]
            perm_ba = ref.face_perms[pair.orientation_ba]
            vmap_p[ka, fa * nfp : (fa + 1) * nfp] = kb * np_ + fm[fb][perm_ab]
            vmap_p[kb, fb * nfp : (fb + 1) * nfp] = ka * np_ + fm[fa][perm_ba]
            z_plus[ka, fa * nfp : (fa + 1) * nfp] = z_elem[kb]
            z_plus[kb, fb * nfp : (fb + 1) * nfp] = z_elem[ka]

        def node_mask(tags: tuple[int, ...]) -> np.ndarray:
            return np.repeat(np.isin(mesh.face_tags, tags), nfp, axis=1)

        pec_mask = node_mask((int(BoundaryTag.PEC),))
        abc_mask = node_mask((int(BoundaryTag.ABC_TOP), int(BoundaryTag.ABC_BOTTOM)))
        frag_faces = np.zeros((num_k, 4), dtype=bool)
        for k, f in pmap.nonconformal_faces():
            frag_faces[k, f] = True
        fragment_mask = np.repeat(frag_faces, nfp, axis=1)

        normals = np.repeat(geo.normals, nfp, axis=1)
        face_points = geo.nodes[:, ref.fmask_flat, :]
        z_minus = np.repeat(z_elem[:, None], 4 * nfp, axis=1)

        tfsf_sign = np.zeros((num_k, 4 * nfp))
        if z_tfsf is not None:
            tfsf_sign = _tfsf_signs(mesh, geo, z_tfsf, incidence, nfp, tol)

        fragments = _fragment_coupling(
            mesh, ref, geo, pmap, z_elem, quadrature_degree or 2 * ref.order
        )

        summary = {
            "order": ref.order,
            "Np": np_,
            "K": num_k,
            "dofs": 6 * num_k * np_,
            "conformal_pairs": pmap.num_conformal,
            "fragments": pmap.num_fragments,
            "fragment_quadrature_points": fragments.size,
        }
        logger.info(
            "discretization: P=%d, K=%d, Np=%d, %d periodic pairs, %d fragments",
            ref.order,
            num_k,
            np_,
            pmap.num_conformal,
            pmap.num_fragments,
        )
        return cls(
            mesh=mesh,
            ref=ref,
            geo=geo,
            ops=ops,
            materials=materials,
            incidence=incidence,
            units=units,
            pmap=pmap,
            q_elem=q_elem,
            qinv_elem=qinv_elem,
            eps_elem=eps_elem,
            mu_elem=mu_elem,
            vmap_p=vmap_p,
            normals=normals,
            face_points=face_points,
            z_minus=z_minus,
            z_plus=z_plus,
            y_minus=1.0 / z_minus,
            y_plus=1.0 / z_plus,
            pec_mask=pec_mask,
            abc_mask=abc_mask,
            fragment_mask=fragment_mask,
            tfsf_sign=tfsf_sign,
            fragments=fragments,
            abc_polarization=abc_polarization or incidence.polarization,
            z_tfsf=z_tfsf,
            summary=summary,
        )


def _tfsf_signs(
    mesh: Mesh,
    geo: GeometricFactors,
    z_tfsf: float,
    inc: IncidenceConfig,
    nfp: int,
    tol: float,
) -> np.ndarray:
    faces = mesh.faces_on_plane(2, z_tfsf, tol)
    faces = faces[mesh.neighbors[faces[:, 0], faces[:, 1]] >= 0]
    if len(faces) == 0:
        raise ProbeError(
            f"TF/SF plane z={z_tfsf:.6g} m does not coincide with a layer of interior faces",
            details={"z_tfsf_m": z_tfsf},
        )
    lo, hi = mesh.bounding_box
    cell_area = float((hi[0] - lo[0]) * (hi[1] - lo[1]))
    # Every face is listed once from each side.
    area = 0.5 * float(sum(mesh.face_area(int(k), int(f)) for k, f in faces))
    if abs(area - cell_area) > 1e-10 * cell_area:
        raise ProbeError(
            f"TF/SF plane z={z_tfsf:.6g} m covers {area:.6g} m² of a {cell_area:.6g} m² cell",
            details={"z_tfsf_m": z_tfsf, "area_m2": area},
        )
    centroid_z = mesh.element_centroids()[:, 2]
    signs = np.zeros((mesh.num_elements, 4 * nfp))
    for k, f in faces:
        k2 = mesh.neighbors[k, f]
        above = centroid_z[k2] > z_tfsf
        # Scattered region is on the side the wave comes from.
        scattered = above if inc.direction == "down" else not above
        signs[k, f * nfp : (f + 1) * nfp] = 1.0 if scattered else -1.0
    return signs


def _fragment_coupling(
    mesh: Mesh,
    ref: ReferenceElement,
    geo: GeometricFactors,
    pmap: PeriodicMap,
    z_elem: np.ndarray,
    degree: int,
) -> FragmentCoupling:
    v1 = mesh.vertices[mesh.elements[:, 0]]
    inv_mass = ref.V @ ref.V.T
    cols: dict[str, list[np.ndarray]] = {
        key: []
        for key in (
            "elem",
            "other",
            "interp_self",
            "interp_other",
            "test",
            "normal",
            "z_minus",
            "z_plus",
        )
    }

    def to_reference(k: int, pts: np.ndarray) -> np.ndarray:
        return (pts - v1[k]) @ geo.metric[k].T - 1.0

    for frag in pmap.fragments:
        pts_a, w = frag.quadrature(degree)
        if len(w) == 0:
            continue
        pts_b = pts_a + frag.shift
        ka, kb = frag.elem_a, frag.elem_b
        ia = ref.interpolation_matrix(to_reference(ka, pts_a))
        ib = ref.interpolation_matrix(to_reference(kb, pts_b))
        n_a = geo.normals[ka, frag.face_a]
        n = len(w)
        for k_self, k_other, i_self, i_other, normal in (
            (ka, kb, ia, ib, n_a),
            (kb, ka, ib, ia, -n_a),
        ):
            cols["elem"].append(np.full(n, k_self, dtype=np.intp))
            cols["other"].append(np.full(n, k_other, dtype=np.intp))
            cols["interp_self"].append(i_self)
            cols["interp_other"].append(i_other)
            cols["test"].append((i_self @ inv_mass) * (w / geo.J[k_self])[:, None])
            cols["normal"].append(np.tile(normal, (n, 1)))
            cols["z_minus"].append(np.full(n, z_elem[k_self]))
            cols["z_plus"].append(np.full(n, z_elem[k_other]))

    if not cols["elem"]:
        empty = np.empty((0, ref.np_))
        return FragmentCoupling(
            elem=np.empty(0, dtype=np.intp),
            other=np.empty(0, dtype=np.intp),
            interp_self=empty,
            interp_other=empty,
            test=empty,
            normal=np.empty((0, 3)),
            z_minus=np.empty(0),
            z_plus=np.empty(0),
            y_minus=np.empty(0),
            y_plus=np.empty(0),
        )
    z_minus = np.concatenate(cols["z_minus"])
    z_plus = np.concatenate(cols["z_plus"])
    return FragmentCoupling(
        elem=np.concatenate(cols["elem"]),
        other=np.concatenate(cols["other"]),
        interp_self=np.concatenate(cols["interp_self"]),
        interp_other=np.concatenate(cols["interp_other"]),
        test=np.concatenate(cols["test"]),
        normal=np.concatenate(cols["normal"]),
        z_minus=z_minus,
        z_plus=z_plus,
        y_minus=1.0 / z_minus,
        y_plus=1.0 / z_plus,
    )


# -- Right-hand sides ----------------------------------------------------------------


def _traces(q: np.ndarray, disc: Discretization) -> tuple[np.ndarray, np.ndarray]:
    q_m = q[:, :, disc.ref.fmask_flat]
    q_p = q.reshape(q.shape[0], -1)[:, disc.vmap_p]
    return q_m, q_p


def _apply_tfsf(jump: np.ndarray, disc: Discretization, t: float) -> None:
    rows, cols = np.nonzero(disc.tfsf_sign)
    if len(rows) == 0:
        return
    p_inc, s_inc = incident_fields(
        disc.face_points[rows, cols], t, disc.incidence, disc.z_minus[rows, cols], disc.units
    )
    sign = disc.tfsf_sign[rows, cols][:, None]
    jump[:3, rows, cols] += (sign * p_inc).T
    jump[3:, rows, cols] += (sign * s_inc).T


def compute_rhs(q: np.ndarray, t: float, disc: Discretization) -> np.ndarray:
    """Time derivative ``dq/dt`` of the transformed system.

    Raises:
        BlowUpError: If ``q`` contains a non-finite value.
    """
    if not np.all(np.isfinite(q)):
        raise BlowUpError(f"non-finite field values at t={t:.6e} s", time=t)
    q_m, q_p = _traces(q, disc)
    jump = q_p - q_m

    for mask, kind in ((disc.pec_mask, "PEC"), (disc.abc_mask, "ABC")):
        if not mask.any():
            continue
        jp, js = bc_jump(
            kind,  # type: ignore[arg-type]
            disc.abc_polarization,
            q_m[:3, mask].T,
            q_m[3:, mask].T,
            disc.incidence.theta,
        )
        jump[:3, mask] = jp.T
        jump[3:, mask] = js.T
    _apply_tfsf(jump, disc, t)

    flux = numerical_flux(
        np.moveaxis(jump[:3], 0, -1),
        np.moveaxis(jump[3:], 0, -1),
        disc.z_plus,
        disc.z_minus,
        disc.y_plus,
        disc.y_minus,
        disc.normals,
    )
    flux[disc.fragment_mask] = 0.0
    surface = disc.ops.lift(np.moveaxis(flux, -1, 0))

    frag = disc.fragments
    if frag.size:
        q_s = np.einsum("cqn,qn->cq", q[:, frag.elem], frag.interp_self)
        q_o = np.einsum("cqn,qn->cq", q[:, frag.other], frag.interp_other)
        fjump = q_o - q_s
        fflux = numerical_flux(
            fjump[:3].T,
            fjump[3:].T,
            frag.z_plus,
            frag.z_minus,
            frag.y_plus,
            frag.y_minus,
            frag.normal,
        )
        np.add.at(surface, (slice(None), frag.elem), fflux.T[:, :, None] * frag.test[None])

    curl_s = disc.ops.curl(q[3], q[4], q[5])
    curl_p = disc.ops.curl(q[0], q[1], q[2])
    residual = np.concatenate([curl_s, -curl_p]) - surface
    return np.einsum("kab,bkn->akn", disc.qinv_elem, residual)


def maxwell_rhs(q: np.ndarray, t: float, disc: Discretization) -> np.ndarray:
    """Untransformed ``(E, H)`` right-hand side with a diagonal material matrix.

    Only conformal meshes are supported; ABC faces use the normal-incidence
    rows and TF/SF injection uses the same incident field as
    :func:`compute_rhs`.
    """
    if disc.has_fragments:
        raise ValueError("the untransformed path supports conformal meshes only")
    e_m, e_p = _traces(q[:3], disc)
    h_m, h_p = _traces(q[3:], disc)
    d_e = e_p - e_m
    d_h = h_p - h_m
    d_e[:, disc.pec_mask] = -2.0 * e_m[:, disc.pec_mask]
    d_h[:, disc.pec_mask] = 0.0
    d_e[:, disc.abc_mask] = -2.0 * e_m[:, disc.abc_mask]
    d_h[:, disc.abc_mask] = -2.0 * h_m[:, disc.abc_mask]
    rows, cols = np.nonzero(disc.tfsf_sign)
    if len(rows):
        p_inc, s_inc = incident_fields(
            disc.face_points[rows, cols], t, disc.incidence, disc.z_minus[rows, cols], disc.units
        )
        sign = disc.tfsf_sign[rows, cols]
        d_e[:, rows, cols] += sign * p_inc.T
        d_h[:, rows, cols] += sign * s_inc.T

    nx, ny, nz = (np.moveaxis(disc.normals, -1, 0)[i] for i in range(3))
    ndot_e = nx * d_e[0] + ny * d_e[1] + nz * d_e[2]
    ndot_h = nx * d_h[0] + ny * d_h[1] + nz * d_h[2]
    zp, z_bar = disc.z_plus, disc.z_plus + disc.z_minus
    yp, y_bar = disc.y_plus, disc.y_plus + disc.y_minus
    flux_e = np.stack(
        [
            (zp * (ny * d_h[2] - nz * d_h[1]) + d_e[0] - ndot_e * nx) / z_bar,
            (zp * (nz * d_h[0] - nx * d_h[2]) + d_e[1] - ndot_e * ny) / z_bar,
            (zp * (nx * d_h[1] - ny * d_h[0]) + d_e[2] - ndot_e * nz) / z_bar,
        ]
    )
    flux_h = np.stack(
        [
            (-yp * (ny * d_e[2] - nz * d_e[1]) + d_h[0] - ndot_h * nx) / y_bar,
            (-yp * (nz * d_e[0] - nx * d_e[2]) + d_h[1] - ndot_h * ny) / y_bar,
            (-yp * (nx * d_e[1] - ny * d_e[0]) + d_h[2] - ndot_h * nz) / y_bar,
        ]
    )
    curl_h = disc.ops.curl(q[3], q[4], q[5])
    curl_e = disc.ops.curl(q[0], q[1], q[2])
    rhs_e = (curl_h + disc.ops.lift(flux_e)) / disc.eps_elem[None, :, None]
    rhs_h = (-curl_e + disc.ops.lift(flux_h)) / disc.mu_elem[None, :, None]
    return np.concatenate([rhs_e, rhs_h])


# -- Time stepping --------------------------------------------------------------------


def lsrk4_step(
    q: np.ndarray,
    t: float,
    dt: float,
    rhs: RhsFunction,
    resid: np.ndarray | None = None,
) -> np.ndarray:
    """Advance ``q`` in place by one five-stage low-storage RK4 step.

    Args:
        q: State array, overwritten with the state at ``t + dt``.
        t: Current time.
        dt: Step size.
        rhs: ``rhs(t, q) -> dq/dt``.
        resid: Optional scratch register shaped like ``q``.

    Returns:
        ``q``.
    """
    if not dt > 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    if resid is None:
        resid = np.zeros_like(q)
    else:
        resid.fill(0.0)
    for a, b, c in zip(RK4A, RK4B, RK4C):
        k = rhs(t + c * dt, q)
        resid *= a
        resid += dt * k
        q += b * resid
    return q


def compute_dt(h_min: float, order: int, v_cfl: float = 1.0, units: UnitSystem = SI) -> float:
    """Step size ``h / (c0 P^2 V)``."""
    if h_min <= 0.0 or order < 1 or v_cfl <= 0.0:
        raise ValueError(
            f"compute_dt needs positive inputs, got h={h_min}, P={order}, V={v_cfl}"
        )
    return h_min / (units.c0 * order**2 * v_cfl)
