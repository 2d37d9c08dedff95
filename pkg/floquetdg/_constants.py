"""
Internal constants -- unit systems, default tolerances, integrator tables.

This module is an internal implementation detail and is not part of the
public API. It may change without notice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants as _sc


@dataclass(frozen=True)
class UnitSystem:
    """Vacuum constants used to build material and wave quantities."""

    name: str
    c0: float
    eps0: float
    mu0: float

    @property
    def z0(self) -> float:
        """Free-space wave impedance."""
        return math.sqrt(self.mu0 / self.eps0)


SI = UnitSystem(name="si", c0=_sc.c, eps0=_sc.epsilon_0, mu0=_sc.mu_0)
NATURAL = UnitSystem(name="natural", c0=1.0, eps0=1.0, mu0=1.0)

MIN_ORDER = 1
MAX_ORDER = 8
MAX_QUADRATURE_DEGREE = 40

# Warp-and-blend blending exponents for P = 1..8 (zero warp below P = 3).
ALPHA_OPT = (0.0, 0.0, 0.0, 0.1002, 1.1332, 1.5608, 1.3413, 1.2577)

NODE_TOL = 1e-7
GEOMETRIC_TOL_SCALE = 1e-8  # times max(|a1|, |a2|)
SLIVER_FRACTION = 1e-12  # of the parent face area

# 5-stage, 4th-order low-storage Runge-Kutta (Carpenter & Kennedy).
RK4A = (
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
)
RK4B = (
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
)
RK4C = (
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
)

BLOWUP_FACTOR = 1e6
STABILITY_GROWTH = 10.0
CFL_MIN = 1.0
CFL_MAX = 256.0
CFL_TOL = 0.05

ZERO_PAD = 4
INCIDENT_FLOOR = 1e-3
DECAY_WARN = 1e-6
PASSIVITY_LIMIT = 1.02

# Spectrum at the band edges relative to its peak.
BAND_EDGE_LEVEL = 0.1
# Turn-on delay in units of the Gaussian width.
DELAY_WIDTHS = 4.5
