"""
Concurrent CFL scale searches over a set of incidence angles.

Each angle is an independent :func:`~floquetdg.simulation.find_min_stable_scale`
run. They are dispatched to a thread pool from an event loop; numpy releases
the GIL inside its kernels, so the searches overlap.

Example::

    import asyncio
    from floquetdg.simulation import StabilityProbe
    from floquetdg.sweep import sweep_stability

    setup = StabilityProbe(f_min=30e6, f_max=140e6)
    rows = asyncio.run(sweep_stability([0.0, 30.0, 70.0], setup, threads=3))
"""

from __future__ import annotations

import asyncio
import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Any

import numpy as np

from ._constants import CFL_MAX, CFL_MIN, CFL_TOL
from .exceptions import FloquetDGError
from .simulation import StabilityProbe, find_min_stable_scale

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StabilityRow:
    """One angle of the sweep; ``error`` is set when the search failed."""

    theta_deg: float
    v_cfl: float | None
    error: FloquetDGError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict[str, Any]:
        record: dict[str, Any] = {"theta_deg": self.theta_deg, "v_cfl": self.v_cfl}
        if self.error is not None:
            record["error"] = self.error.to_record()
        return record


async def sweep_stability(
    thetas_deg: Sequence[float],
    setup: StabilityProbe,
    v_min: float = CFL_MIN,
    v_max: float = CFL_MAX,
    tol: float = CFL_TOL,
    threads: int | None = None,
) -> list[StabilityRow]:
    """Run one search per angle, at most ``threads`` at a time.

    Rows come back in the order of ``thetas_deg``. Solver failures are
    captured on their row; any other exception propagates.
    """
    if not thetas_deg:
        return []
    workers = threads or min(len(thetas_deg), os.cpu_count() or 1)
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="cfl") as pool:
        tasks = [
            loop.run_in_executor(
                pool,
                partial(find_min_stable_scale, math.radians(theta), setup, v_min, v_max, tol),
            )
            for theta in thetas_deg
        ]
        results = await asyncio.gather(*tasks, return_exceptions=True)

    rows = []
    for theta, result in zip(thetas_deg, results):
        if isinstance(result, FloquetDGError):
            logger.error("theta=%.4g deg: %s", theta, result)
            rows.append(StabilityRow(float(theta), None, result))
        elif isinstance(result, BaseException):
            raise result
        else:
            rows.append(StabilityRow(float(theta), float(result)))
    return rows


def stability_table(
    thetas_deg: Sequence[float],
    setup: StabilityProbe,
    v_min: float = CFL_MIN,
    v_max: float = CFL_MAX,
    tol: float = CFL_TOL,
    threads: int | None = None,
) -> list[StabilityRow]:
    """Blocking wrapper around :func:`sweep_stability`."""
    return asyncio.run(sweep_stability(thetas_deg, setup, v_min, v_max, tol, threads))


def write_stability_csv(path: str | os.PathLike[str], rows: Sequence[StabilityRow]) -> None:
    """Write ``theta_deg,v_cfl`` rows; failed searches hold ``nan``."""
    table = np.array(
        [[row.theta_deg, np.nan if row.v_cfl is None else row.v_cfl] for row in rows],
        dtype=float,
    ).reshape(-1, 2)
    np.savetxt(path, table, delimiter=",", header="theta_deg,v_cfl", comments="", fmt="%.6g")
