"""
Recording planes, spectra and power coefficients.

The fundamental Floquet coefficient ``A00(t)`` is the cell average of the
transformed field ``P`` over a horizontal face layer. Its discrete Fourier
transform divided by the analytic transform of the excitation gives the
reflected or transmitted power per frequency.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, replace
from typing import Any, Literal

import numpy as np

from ._constants import DECAY_WARN, INCIDENT_FLOOR, PASSIVITY_LIMIT, ZERO_PAD
from .exceptions import ProbeError, SpectrumError
from .mesh import Mesh
from .operators import GeometricFactors
from .reference_element import ReferenceElement, triangle_quadrature
from .types import IncidenceConfig

logger = logging.getLogger(__name__)

Normalization = Literal["discrete", "continuous"]


# -- Recording planes ------------------------------------------------------------


@dataclass(frozen=True)
class PlaneProbe:
    """Quadrature over the face layer at ``z``.

    Attributes:
        z: Plane height (m).
        faces: ``(n, 2)`` ``(element, face)`` pairs tiling the plane, one
            side per physical face.
        elem: ``(nq,)`` element owning each quadrature point.
        interp: ``(nq, Np)`` interpolation rows at the quadrature points.
        weights: ``(nq,)`` physical quadrature weights (m²).
        points: ``(nq, 3)`` quadrature points.
        cell_area: Unit-cell area ``|a1||a2|`` (m²).
    """

    z: float
    faces: np.ndarray
    elem: np.ndarray
    interp: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    cell_area: float

    @property
    def area(self) -> float:
        return float(self.weights.sum())


def build_probe(
    mesh: Mesh,
    ref: ReferenceElement,
    geo: GeometricFactors,
    z: float,
    cell_area: float,
    degree: int | None = None,
) -> PlaneProbe:
    """Set up :func:`record_A00` on the plane ``z``.

    Faces are read from the element below the plane where one exists.

    Raises:
        ProbeError: If the plane holds no faces or they do not tile the cell.
    """
    tol = mesh.geometric_tolerance()
    faces = mesh.faces_on_plane(2, z, tol)
    if len(faces) == 0:
        raise ProbeError(f"no mesh faces lie on the plane z={z:.6g} m", details={"z_m": z})
    centroid_z = mesh.element_centroids()[:, 2]
    below = centroid_z[faces[:, 0]] < z
    boundary = mesh.neighbors[faces[:, 0], faces[:, 1]] < 0
    faces = faces[below | boundary]

    rule = triangle_quadrature(degree or 2 * ref.order)
    v1 = mesh.vertices[mesh.elements[:, 0]]
    elem, interp, weights, points = [], [], [], []
    for k, f in faces:
        pts, w = rule.on_triangle(mesh.face_coordinates(int(k), int(f)))
        rst = (pts - v1[k]) @ geo.metric[k].T - 1.0
        elem.append(np.full(len(w), k, dtype=np.intp))
        interp.append(ref.interpolation_matrix(rst))
        weights.append(w)
        points.append(pts)
    probe = PlaneProbe(
        z=float(z),
        faces=faces,
        elem=np.concatenate(elem),
        interp=np.concatenate(interp),
        weights=np.concatenate(weights),
        points=np.concatenate(points),
        cell_area=float(cell_area),
    )
    if abs(probe.area - cell_area) > 1e-10 * cell_area:
        raise ProbeError(
            f"faces at z={z:.6g} m cover {probe.area:.9g} m² of a {cell_area:.9g} m² cell",
            details={"z_m": z, "area_m2": probe.area, "cell_area_m2": cell_area},
        )
    return probe


def record_A00(q: np.ndarray, probe: PlaneProbe) -> np.ndarray:
    """Cell average of ``P`` over the probe plane, shape ``(3,)``."""
    if q.shape[2] != probe.interp.shape[1]:
        raise ProbeError("probe and state disagree on the number of element nodes")
    values = np.einsum("cqn,qn->cq", q[:3, probe.elem], probe.interp)
    return (values @ probe.weights) / probe.cell_area


def floquet_coefficient(
    points: Any, field: Any, weights: Any, k_parallel: Any, cell_area: float
) -> np.ndarray:
    """(0,0) Floquet amplitude of a complex field sampled on a cell plane.

    The transverse phase is removed with ``exp(+j k_par . r)`` before
    averaging, where ``k_par`` is the transverse wavevector in rad/m.
    """
    pts = np.asarray(points, dtype=float)
    values = np.asarray(field, dtype=complex)
    k = np.asarray(k_parallel, dtype=float)
    phase = np.exp(1j * (pts[:, 0] * k[0] + pts[:, 1] * k[1]))
    return (np.asarray(weights)[:, None] * values * phase[:, None]).sum(axis=0) / cell_area


# -- Spectra ----------------------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    """One-sided spectrum on a uniform grid.

    ``normalization`` is ``"discrete"`` for DFT values divided by the
    sample count and ``"continuous"`` for approximations of the continuous
    Fourier transform. Only spectra with equal normalization compare.
    """

    freqs: np.ndarray
    values: np.ndarray
    normalization: Normalization = "discrete"
    dt: float = 0.0
    num_samples: int = 0

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0]) if len(self.freqs) > 1 else 0.0

    def magnitude(self) -> np.ndarray:
        """Amplitude per frequency, the vector norm across components."""
        v = self.values
        return np.abs(v) if v.ndim == 1 else np.linalg.norm(v, axis=1)

    def to_continuous(self) -> Spectrum:
        if self.normalization == "continuous":
            return self
        return replace(
            self, values=self.values * (self.num_samples * self.dt), normalization="continuous"
        )

    def band(self, f_min: float, f_max: float) -> np.ndarray:
        return (self.freqs >= f_min) & (self.freqs <= f_max)


def spectrum(series: Any, dt: float, zero_pad: int = ZERO_PAD) -> Spectrum:
    """Zero-padded DFT of a uniformly sampled (possibly vector) series.

    Raises:
        SpectrumError: For an empty series or a non-positive ``dt``.
    """
    x = np.asarray(series)
    if x.shape[0] == 0:
        raise SpectrumError("cannot transform an empty series")
    if not dt > 0.0:
        raise SpectrumError(f"sample spacing must be positive, got {dt}")
    n = x.shape[0]
    peak = float(np.max(np.abs(x)))
    tail = float(np.max(np.abs(x[-1])))
    if peak > 0.0 and tail > DECAY_WARN * peak:
        logger.warning(
            "series has not decayed: last sample %.3e of peak (limit %.0e)", tail / peak, DECAY_WARN
        )
    m = max(1, int(zero_pad)) * n
    values = np.fft.rfft(x, n=m, axis=0) / n
    return Spectrum(
        freqs=np.fft.rfftfreq(m, dt), values=values, normalization="discrete", dt=dt, num_samples=n
    )


def incident_reference_spectrum(inc: IncidenceConfig, freqs: Any) -> Spectrum:
    """Continuous Fourier transform of ``E0 g(t)`` on ``freqs``."""
    f = np.asarray(freqs, dtype=float)
    tau, fc = inc.tau, inc.f_c
    pre = inc.amplitude * tau * math.sqrt(math.pi) / 2j
    gauss = np.exp(-((math.pi * tau * (f - fc)) ** 2)) - np.exp(-((math.pi * tau * (f + fc)) ** 2))
    values = pre * gauss * np.exp(-2j * math.pi * f * inc.t0)
    return Spectrum(freqs=f, values=values, normalization="continuous")


def power_coefficient(
    e_rt: Spectrum, e_i: Spectrum, floor: float = INCIDENT_FLOOR
) -> np.ma.MaskedArray:
    """``|E_rt|^2 / |E_i|^2`` per frequency, masked where ``|E_i|`` is below the floor.

    Raises:
        SpectrumError: On a frequency grid or normalization mismatch.
    """
    if e_rt.normalization != e_i.normalization:
        raise SpectrumError(
            f"cannot compare {e_rt.normalization} and {e_i.normalization} spectra"
        )
    if e_rt.freqs.shape != e_i.freqs.shape or not np.allclose(
        e_rt.freqs, e_i.freqs, rtol=1e-12, atol=0.0
    ):
        raise SpectrumError("spectra are on different frequency grids")
    num = e_rt.magnitude() ** 2
    den = e_i.magnitude() ** 2
    peak = float(np.sqrt(den.max())) if den.size else 0.0
    masked = np.sqrt(den) < floor * peak
    ratio = np.divide(num, den, out=np.zeros_like(num), where=~masked)
    return np.ma.masked_array(ratio, mask=masked)


def passivity_violations(
    reflectance: Any, transmittance: Any, limit: float = PASSIVITY_LIMIT
) -> np.ndarray:
    """Indices where ``R + T`` leaves ``[0, limit]``."""
    total = np.ma.asarray(reflectance) + np.ma.asarray(transmittance)
    bad = (total > limit) | (total < 0.0)
    return np.flatnonzero(np.ma.filled(bad, False))


# -- CSV output ---------------------------------------------------------------------


def write_spectra_csv(
    path: str | os.PathLike[str], freqs: Any, reflectance: Any, transmittance: Any
) -> None:
    """Write ``f_hz,R,T`` rows, skipping masked frequencies."""
    r = np.ma.asarray(reflectance)
    t = np.ma.asarray(transmittance)
    keep = ~(np.ma.getmaskarray(r) | np.ma.getmaskarray(t))
    rows = np.column_stack([np.asarray(freqs)[keep], r.filled(0.0)[keep], t.filled(0.0)[keep]])
    np.savetxt(path, rows, delimiter=",", header="f_hz,R,T", comments="", fmt="%.10e")


def write_time_series_csv(
    path: str | os.PathLike[str], times: Any, a00: Any, energy: Any
) -> None:
    """Write ``t_s,A00x,A00y,A00z,energy`` rows; unsampled energy rows hold ``nan``."""
    rows = np.column_stack([np.asarray(times), np.asarray(a00), np.asarray(energy)])
    np.savetxt(
        path, rows, delimiter=",", header="t_s,A00x,A00y,A00z,energy", comments="", fmt="%.10e"
    )
