"""
Element geometry, material matrices and the local DG operators.

Everything here is built once per run and treated as read-only. Fields are
stored as ``(..., K, Np)`` arrays; the operators act on the last axis with
one dense reference matrix product followed by a per-element scaling.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

import numpy as np

from ._constants import SI, UnitSystem
from .exceptions import MaterialError, MeshError, SingularityError
from .mesh import Mesh
from .reference_element import ReferenceElement
from .types import IncidenceConfig, Material

logger = logging.getLogger(__name__)


# -- Geometric factors -------------------------------------------------------------


@dataclass(frozen=True)
class GeometricFactors:
    """Affine-map data for every element.

    Attributes:
        x, y, z: ``(K, Np)`` physical node coordinates.
        J: ``(K,)`` volume Jacobian (reference volume 4/3 maps to ``J * 4/3``).
        metric: ``(K, 3, 3)`` rows ``grad r``, ``grad s``, ``grad t``.
        normals: ``(K, 4, 3)`` outward unit normals.
        sJ: ``(K, 4)`` surface Jacobians.
        Fscale: ``(K, 4)`` ratio ``sJ / J``.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    J: np.ndarray
    metric: np.ndarray
    normals: np.ndarray
    sJ: np.ndarray
    Fscale: np.ndarray

    @property
    def rx(self) -> np.ndarray:
        return self.metric[:, 0, 0]

    @property
    def ry(self) -> np.ndarray:
        return self.metric[:, 0, 1]

    @property
    def rz(self) -> np.ndarray:
        return self.metric[:, 0, 2]

    @property
    def nodes(self) -> np.ndarray:
        """``(K, Np, 3)`` physical node coordinates."""
        return np.stack([self.x, self.y, self.z], axis=-1)

    def face_areas(self) -> np.ndarray:
        """``(K, 4)`` physical face areas (reference faces have area 2)."""
        return 2.0 * self.sJ


def geometric_factors(mesh: Mesh, ref: ReferenceElement) -> GeometricFactors:
    """Compute node positions, metrics, normals and Jacobians.

    Raises:
        MeshError: If any element has a non-positive Jacobian.
    """
    v = mesh.vertices[mesh.elements]  # (K, 4, 3)
    v1, v2, v3, v4 = v[:, 0], v[:, 1], v[:, 2], v[:, 3]
    r, s, t = ref.r, ref.s, ref.t
    pts = 0.5 * (
        -(1.0 + r + s + t)[None, :, None] * v1[:, None, :]
        + (1.0 + r)[None, :, None] * v2[:, None, :]
        + (1.0 + s)[None, :, None] * v3[:, None, :]
        + (1.0 + t)[None, :, None] * v4[:, None, :]
    )

    # Columns are dx/dr, dx/ds, dx/dt.
    jac = 0.5 * np.stack([v2 - v1, v3 - v1, v4 - v1], axis=2)
    det = np.linalg.det(jac)
    if np.any(det <= 0.0):
        k = int(np.flatnonzero(det <= 0.0)[0])
        raise MeshError(f"element {k} has non-positive Jacobian {det[k]:.3e}", element=k)
    metric = np.linalg.inv(jac)

    grad_r, grad_s, grad_t = metric[:, 0], metric[:, 1], metric[:, 2]
    raw = np.stack([-grad_t, -grad_s, grad_r + grad_s + grad_t, -grad_r], axis=1)
    length = np.linalg.norm(raw, axis=2)
    normals = raw / length[:, :, None]
    sj = length * det[:, None]

    return GeometricFactors(
        x=pts[..., 0],
        y=pts[..., 1],
        z=pts[..., 2],
        J=det,
        metric=metric,
        normals=normals,
        sJ=sj,
        Fscale=sj / det[:, None],
    )


# -- Materials -----------------------------------------------------------------------


@dataclass(frozen=True)
class MaterialTable:
    """Materials by id, resolved against a unit system."""

    materials: Mapping[int, Material]
    units: UnitSystem = SI

    def __post_init__(self) -> None:
        if not self.materials:
            raise MaterialError("material table is empty")

    def __getitem__(self, material_id: int) -> Material:
        try:
            return self.materials[int(material_id)]
        except KeyError:
            raise MaterialError(f"material id {material_id} is not defined") from None

    def epsilon(self, material_id: int) -> float:
        return self.units.eps0 * self[material_id].eps_r

    def mu(self, material_id: int) -> float:
        return self.units.mu0 * self[material_id].mu_r

    def impedance(self, material_id: int) -> float:
        return self[material_id].impedance(self.units)

    def admittance(self, material_id: int) -> float:
        return self[material_id].admittance(self.units)

    def per_element(self, ids: np.ndarray, quantity: str) -> np.ndarray:
        """Gather ``quantity`` (``epsilon``, ``mu``, ``impedance``, ``admittance``) per id."""
        getter = getattr(self, quantity)
        table = {int(m): getter(int(m)) for m in np.unique(ids)}
        return np.array([table[int(m)] for m in np.ravel(ids)], dtype=float).reshape(
            np.shape(ids)
        )

    def pec_ids(self) -> list[int]:
        return sorted(m for m, mat in self.materials.items() if mat.pec)

    def to_dict(self) -> dict[str, Any]:
        return {str(m): mat.to_dict() for m, mat in sorted(self.materials.items())}


# -- Periodic/materials matrix ------------------------------------------------------------


def cross_matrix(v: Any) -> np.ndarray:
    """Matrix ``[v]x`` with ``[v]x @ w == cross(v, w)``."""
    a = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ]
    )


@dataclass(frozen=True)
class PeriodicQ:
    """Per-material 6x6 matrix coupling ``(P, S)`` time derivatives."""

    Q: np.ndarray
    Qinv: np.ndarray
    kappa_x: float
    kappa_y: float

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.Q)


def assemble_Q(material: Material, incidence: IncidenceConfig, units: UnitSystem = SI) -> PeriodicQ:
    """Build ``[[eps I, [k]x / c0], [-[k]x / c0, mu I]]`` and its inverse.

    ``k`` is the transverse part of the incident unit wavevector.

    Raises:
        MaterialError: For a PEC material.
        SingularityError: If ``eps_r * mu_r <= sin^2(theta)``.
    """
    if material.pec:
        raise MaterialError("PEC regions carry no field unknowns")
    sin2 = math.sin(incidence.theta) ** 2
    if material.eps_r * material.mu_r <= sin2 * (1.0 + 1e-12):
        raise SingularityError(
            "grazing-incidence breakdown: eps_r*mu_r="
            f"{material.eps_r * material.mu_r:.6g} <= sin^2(theta)={sin2:.6g}"
        )
    kx, ky = (float(c) for c in incidence.k_parallel)
    k = cross_matrix((kx, ky, 0.0)) / units.c0
    eye = np.eye(3)
    q = np.block(
        [
            [units.eps0 * material.eps_r * eye, k],
            [-k, units.mu0 * material.mu_r * eye],
        ]
    )
    qinv = np.linalg.inv(q)
    return PeriodicQ(Q=q, Qinv=qinv, kappa_x=kx, kappa_y=ky)


def expanded_Q(
    eps: float, mu: float, kappa_x: float, kappa_y: float, c0: float, np_: int
) -> np.ndarray:
    """Node-expanded ``6Np x 6Np`` form with identity blocks per entry."""
    eye = np.eye(np_)
    zero = np.zeros((np_, np_))
    a, b = kappa_x / c0 * eye, kappa_y / c0 * eye
    e, m = eps * eye, mu * eye
    return np.block(
        [
            [e, zero, zero, zero, zero, b],
            [zero, e, zero, zero, zero, -a],
            [zero, zero, e, -b, a, zero],
            [zero, zero, -b, m, zero, zero],
            [zero, zero, a, zero, m, zero],
            [b, -a, zero, zero, zero, m],
        ]
    )


# -- Local operators ---------------------------------------------------------------------


@dataclass(frozen=True)
class LocalOperators:
    """Physical-space differentiation and lift actions on nodal fields."""

    ref: ReferenceElement
    geo: GeometricFactors

    def gradient(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(d/dx, d/dy, d/dz)`` of ``u`` with shape ``(..., K, Np)``."""
        ur = u @ self.ref.Dr.T
        us = u @ self.ref.Ds.T
        ut = u @ self.ref.Dt.T
        m = self.geo.metric
        return tuple(  # type: ignore[return-value]
            m[:, 0, i, None] * ur + m[:, 1, i, None] * us + m[:, 2, i, None] * ut
            for i in range(3)
        )

    def curl(self, fx: np.ndarray, fy: np.ndarray, fz: np.ndarray) -> np.ndarray:
        """``(3, K, Np)`` discrete curl."""
        _, fxy, fxz = self.gradient(fx)
        fyx, _, fyz = self.gradient(fy)
        fzx, fzy, _ = self.gradient(fz)
        return np.stack([fzy - fyz, fxz - fzx, fyx - fxy])

    def lift(self, flux: np.ndarray) -> np.ndarray:
        """Lift face data ``(..., K, 4 * Nfp)`` to the volume, scaled by ``sJ / J``."""
        scale = np.repeat(self.geo.Fscale, self.ref.nfp, axis=1)
        return (scale * flux) @ self.ref.lift.T

    def differentiation_matrix(self, k: int, axis: int) -> np.ndarray:
        """Dense ``Np x Np`` physical derivative along ``axis`` on element ``k``."""
        m = self.geo.metric[k]
        return m[0, axis] * self.ref.Dr + m[1, axis] * self.ref.Ds + m[2, axis] * self.ref.Dt

    def mass_matrix(self, k: int) -> np.ndarray:
        return self.geo.J[k] * self.ref.mass


def local_matrices(ref: ReferenceElement, geo: GeometricFactors) -> LocalOperators:
    """Bundle the reference element with its element geometry."""
    if geo.x.shape[1] != ref.np_:
        raise ValueError(f"geometry has {geo.x.shape[1]} nodes per element, expected {ref.np_}")
    return LocalOperators(ref=ref, geo=geo)
