"""
Analytic reflectance and transmittance of planar multilayers.

Characteristic-matrix cascade for lossless isotropic layers at oblique
incidence. This module is the reference the time-domain solver is checked
against and shares no code with it.
"""

from __future__ import annotations

import math
import os
from typing import Any

import numpy as np

from ._constants import SI, UnitSystem
from .postproc import write_spectra_csv
from .types import Lattice2, LayerStack, Polarization


def _kz_ratio(eps_r: float, mu_r: float, sin2: float) -> complex:
    """``k_z / k0`` with the decaying branch for evanescent layers."""
    arg = eps_r * mu_r - sin2
    if arg >= 0.0:
        return complex(math.sqrt(arg))
    return -1j * math.sqrt(-arg)


def _admittance(eps_r: float, mu_r: float, kz: complex, pol: Polarization) -> complex:
    return kz / mu_r if pol == "TE" else eps_r / kz


def multilayer_RT(
    stack: LayerStack,
    theta: float,
    f: Any,
    pol: Polarization,
    units: UnitSystem = SI,
) -> tuple[Any, Any]:
    """Power reflectance and transmittance of ``stack``.

    Args:
        stack: Layers, incident medium first.
        theta: Angle of incidence (radians), defined through the transverse
            wavenumber ``k0 sin(theta)``.
        f: Frequency or array of frequencies (Hz).
        pol: ``"TE"`` or ``"TM"``.
        units: Unit system fixing ``c0``.

    Returns:
        ``(R, T)``, scalars or arrays matching ``f``.

    Raises:
        ValueError: For an out-of-range angle, non-positive frequency or an
            evanescent incident medium.
    """
    if not 0.0 <= theta < math.pi / 2:
        raise ValueError(f"theta must lie in [0, pi/2), got {theta}")
    if pol not in ("TE", "TM"):
        raise ValueError(f"unknown polarization {pol!r}")
    freqs = np.asarray(f, dtype=float)
    if np.any(freqs <= 0.0):
        raise ValueError("frequencies must be positive")
    sin2 = math.sin(theta) ** 2
    first, last = stack.layers[0], stack.layers[-1]
    if first.eps_r * first.mu_r <= sin2:
        raise ValueError("incident medium does not support a propagating wave at this angle")

    k0 = 2.0 * np.pi * freqs / units.c0
    eta0 = _admittance(first.eps_r, first.mu_r, _kz_ratio(first.eps_r, first.mu_r, sin2), pol)
    eta_s = _admittance(last.eps_r, last.mu_r, _kz_ratio(last.eps_r, last.mu_r, sin2), pol)

    m11 = np.ones_like(k0, dtype=complex)
    m12 = np.zeros_like(k0, dtype=complex)
    m21 = np.zeros_like(k0, dtype=complex)
    m22 = np.ones_like(k0, dtype=complex)
    for layer in stack.layers[1:-1]:
        kz = _kz_ratio(layer.eps_r, layer.mu_r, sin2)
        eta = _admittance(layer.eps_r, layer.mu_r, kz, pol)
        delta = k0 * kz * layer.thickness
        c, s = np.cos(delta), np.sin(delta)
        a11, a12, a21, a22 = c, 1j * s / eta, 1j * eta * s, c
        m11, m12, m21, m22 = (
            m11 * a11 + m12 * a21,
            m11 * a12 + m12 * a22,
            m21 * a11 + m22 * a21,
            m21 * a12 + m22 * a22,
        )

    b = m11 + m12 * eta_s
    cc = m21 + m22 * eta_s
    denom = eta0 * b + cc
    r = (eta0 * b - cc) / denom
    t = 2.0 * eta0 / denom
    reflectance = np.abs(r) ** 2
    transmittance = eta_s.real / eta0.real * np.abs(t) ** 2
    if freqs.ndim == 0:
        return float(reflectance), float(transmittance)
    return reflectance, transmittance


def halfwave_nulls(
    thickness: float,
    eps_r: float,
    theta: float,
    count: int = 3,
    mu_r: float = 1.0,
    units: UnitSystem = SI,
) -> np.ndarray:
    """Reflection nulls ``m c0 / (2 d sqrt(eps mu - sin^2))`` of a free-standing slab."""
    kz = math.sqrt(eps_r * mu_r - math.sin(theta) ** 2)
    return np.arange(1, count + 1) * units.c0 / (2.0 * thickness * kz)


def floquet_cutoff(
    lattice: Lattice2, theta: float, phi: float, units: UnitSystem = SI, orders: int = 2
) -> float:
    """Lowest frequency at which a Floquet mode other than (0,0) propagates."""
    s = math.sin(theta)
    u = np.array([math.cos(phi), math.sin(phi)])
    a1, a2 = lattice.vectors
    b1 = 2.0 * math.pi * a1[:2] / float(a1 @ a1)
    b2 = 2.0 * math.pi * a2[:2] / float(a2 @ a2)
    best = math.inf
    for m in range(-orders, orders + 1):
        for n in range(-orders, orders + 1):
            if m == 0 and n == 0:
                continue
            g = m * b1 + n * b2
            ug = float(u @ g)
            g2 = float(g @ g)
            k0 = (s * ug + math.sqrt((s * ug) ** 2 + (1.0 - s * s) * g2)) / (1.0 - s * s)
            best = min(best, k0)
    return units.c0 * best / (2.0 * math.pi)


def oracle_table(
    stack: LayerStack,
    theta: float,
    pol: Polarization,
    f_min: float,
    f_max: float,
    num: int,
    units: UnitSystem = SI,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(f, R, T)`` on ``num`` evenly spaced frequencies."""
    freqs = np.linspace(f_min, f_max, num)
    r, t = multilayer_RT(stack, theta, freqs, pol, units)
    return freqs, np.asarray(r), np.asarray(t)


def write_oracle_csv(
    path: str | os.PathLike[str],
    stack: LayerStack,
    theta: float,
    pol: Polarization,
    f_min: float,
    f_max: float,
    num: int,
    units: UnitSystem = SI,
) -> None:
    """Emit the oracle on the same ``f_hz,R,T`` schema as simulated spectra."""
    freqs, r, t = oracle_table(stack, theta, pol, f_min, f_max, num, units)
    write_spectra_csv(path, freqs, r, t)
