"""
Command-line entry point.

Usage::

    floquetdg simulate --config configs/slab_te.toml --out runs/slab_te
    floquetdg stability --config configs/stability.toml --threads 5
    floquetdg oracle --config configs/slab_te.toml
    floquetdg verify

Any :class:`~floquetdg.exceptions.FloquetDGError` ends the run with the
error's exit status, a JSON record on stderr and ``error.json`` in the
output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from . import __version__
from ._constants import NATURAL, SI
from .config import MODES, RunConfig, load_config, render_manifest, write_plot_script
from .exceptions import ConfigurationError, FloquetDGError
from .oracle import floquet_cutoff, halfwave_nulls, write_oracle_csv
from .postproc import passivity_violations, write_spectra_csv, write_time_series_csv
from .simulation import StabilityProbe, run_simulation
from .sweep import stability_table, write_stability_csv
from .verify import format_report, run_verification

logger = logging.getLogger("floquetdg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floquetdg",
        description="DG time-domain solver for doubly periodic structures at oblique incidence.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True, metavar="MODE")
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} mode")
        p.add_argument(
            "--config",
            type=Path,
            required=mode != "verify",
            help="TOML run configuration",
        )
        p.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
        p.add_argument("--threads", type=int, default=None, help="worker threads for sweeps")
        p.add_argument(
            "--natural-units",
            action="store_true",
            help="interpret the configuration with c0 = eps0 = mu0 = 1",
        )
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _write_error(exc: FloquetDGError, out_dir: Path | None) -> None:
    record = exc.to_record()
    payload = json.dumps(record, indent=2, default=str)
    print(payload, file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(payload + "\n", encoding="utf-8")
        except OSError as write_exc:
            logger.error("could not write error record: %s", write_exc)


# -- Modes ------------------------------------------------------------------------------


def _write_manifest(cfg: RunConfig, derived: dict[str, Any] | None = None) -> None:
    """Echo the validated configuration, with any derived values, to the output directory."""
    text = render_manifest(cfg.to_dict(), derived)
    cfg.output_path("manifest.toml").write_text(text, encoding="utf-8")


def _simulate(cfg: RunConfig) -> int:
    result = run_simulation(cfg)
    write_time_series_csv(
        cfg.output_path(cfg.time_series_csv),
        result.times,
        result.a00_reflect,
        result.energy,
    )
    freqs, r, t = result.power_spectra()
    write_spectra_csv(cfg.output_path(cfg.spectra_csv), freqs, r, t)
    bad = passivity_violations(r, t)
    if len(bad):
        logger.warning("R + T exceeds the passivity limit at %d frequencies", len(bad))
    r_avg, t_avg = result.band_average()
    derived: dict[str, Any] = dict(result.summary)
    derived.update(
        {
            "band_average_R": r_avg,
            "band_average_T": t_avg,
            "passivity_violations": int(len(bad)),
            "floquet_cutoff_hz": floquet_cutoff(cfg.lattice, cfg.theta, cfg.phi, cfg.units),
        }
    )
    _write_manifest(cfg, derived)
    if cfg.plot_script:
        write_plot_script(cfg)
    print(f"R band average {r_avg:.6f}, T band average {t_avg:.6f}")
    return 0


def _stability(cfg: RunConfig, threads: int | None) -> int:
    rows = stability_table(
        cfg.stability_thetas_deg,
        StabilityProbe.from_config(cfg),
        cfg.stability_v_min,
        cfg.stability_v_max,
        cfg.stability_tolerance,
        threads,
    )
    write_stability_csv(cfg.output_path(cfg.stability_csv), rows)
    for row in rows:
        print(f"{row.theta_deg:g}, {'failed' if row.v_cfl is None else f'{row.v_cfl:g}'}")
    failed = [row.error for row in rows if row.error is not None]
    if failed:
        raise failed[0]
    return 0


def _oracle(cfg: RunConfig) -> int:
    stack = cfg.layer_stack()
    write_oracle_csv(
        cfg.output_path(cfg.oracle_csv),
        stack,
        cfg.theta,
        cfg.polarization,  # type: ignore[arg-type]
        cfg.f_min,
        cfg.f_max,
        cfg.oracle_num_freqs,
        cfg.units,
    )
    if len(stack.layers) == 3:
        slab = stack.layers[1]
        nulls = halfwave_nulls(
            slab.thickness, slab.eps_r, cfg.theta, mu_r=slab.mu_r, units=cfg.units
        )
        in_band = nulls[(nulls >= cfg.f_min) & (nulls <= cfg.f_max)]
        print("reflection nulls (Hz): " + ", ".join(f"{f:.6g}" for f in in_band))
    cutoff = floquet_cutoff(cfg.lattice, cfg.theta, cfg.phi, cfg.units)
    if cutoff < cfg.f_max:
        logger.warning(
            "higher Floquet modes propagate above %.6g Hz; ABC results degrade there", cutoff
        )
    _write_manifest(cfg, {"floquet_cutoff_hz": cutoff})
    return 0


def _verify() -> int:
    results = run_verification()
    print(format_report(results))
    return 0 if all(r.passed for r in results) else 1


# -- Entry point ---------------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    """Run one mode and return the process exit status."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    out_dir: Path | None = args.out
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigurationError(
                "--threads must be at least 1", fields={"--threads": str(args.threads)}
            )
        if args.mode == "verify" and args.config is None:
            return _verify()
        cfg = load_config(args.config, NATURAL if args.natural_units else SI)
        cfg = dataclasses.replace(
            cfg, mode=args.mode, output_dir=str(out_dir or cfg.output_dir)
        )
        out_dir = Path(cfg.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        logger.info("mode %s, output in %s", cfg.mode, out_dir)
        _write_manifest(cfg)
        if cfg.mode == "simulate":
            return _simulate(cfg)
        if cfg.mode == "stability":
            return _stability(cfg, args.threads)
        if cfg.mode == "oracle":
            return _oracle(cfg)
        return _verify()
    except FloquetDGError as exc:
        logger.error("%s", exc)
        _write_error(exc, out_dir)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
