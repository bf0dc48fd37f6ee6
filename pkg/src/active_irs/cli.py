"""Command-line front end.

    active-irs <subcommand> [--config PATH] [--out PATH] [--seed N]

Subcommands: fig5, fig6, placement, snr, quantize-sweep. Without ``--config``
the bundled preset for the subcommand is used. Results go to a CSV file with
columns ``sweep_value,system,snr_db,rate_bps_hz``. The one-line summary is
printed to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import synthesize_los
from .config import EXPERIMENTS, RunConfig, dump_config, load_config_text, parse_config
from .errors import ConfigError, DomainError
from .experiments import (IRSSystem, SweepRow, SweepSpec, estimate_scaling_slope,
                          evaluate_system, find_crossovers, optimize_placement,
                          run_rate_vs_distance, run_snr_vs_elements)
from .reflection import (ActivePerElement, ActiveTotal, QuantizationSpec,
                         achievable_rate, effective_noise, optimize, quantize_reflection,
                         received_snr)

PRESETS = {
    "fig5": "fig5.cfg",
    "fig6": "fig6.cfg",
    "placement": "placement.cfg",
    "snr": "snr.cfg",
    "quantize-sweep": "quantize.cfg",
}

CSV_HEADER = ("sweep_value", "system", "snr_db", "rate_bps_hz")


def preset_text(name: str) -> str:
    return resources.files("active_irs").joinpath("presets", name).read_text()


def load_preset(subcommand: str) -> RunConfig:
    name = PRESETS[subcommand]
    return load_config_text(preset_text(name), name)


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _snr_db(snr: float) -> float:
    return 10.0 * math.log10(snr) if snr > 0 else -math.inf


def format_rows(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow((_fmt(r.value), r.system, _fmt(_snr_db(r.snr)), _fmt(r.rate)))
    return buf.getvalue()


def write_atomic(path: Path, text: str):
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _fig5(cfg: RunConfig):
    spec = SweepSpec(cfg.sweep, cfg.systems)
    result = run_rate_vs_distance(spec, cfg.scenario, irs_fraction=cfg.irs_fraction)
    return list(result.rows), ""


def _first_irs(cfg, cls):
    for s in cfg.systems:
        if isinstance(s, IRSSystem) and isinstance(s.power_model, cls):
            return s
    return None


def _fig6(cfg: RunConfig):
    spec = SweepSpec(cfg.sweep, cfg.systems)
    result = run_snr_vs_elements(spec, cfg.scenario)
    notes = []
    fpp, ftp = _first_irs(cfg, ActivePerElement), _first_irs(cfg, ActiveTotal)
    if fpp is not None and ftp is not None:
        values, low, _ = result.series(fpp.name)
        _, high, _ = result.series(ftp.name)
        cross = find_crossovers(values, low, high)
        notes.append("crossover M*=" + (",".join(f"{int(v)}" for v in cross) if cross else "none"))
    if len(cfg.sweep.values) >= 3:
        slopes = []
        for s in cfg.systems:
            values, snr, _ = result.series(s.name)
            try:
                slopes.append(f"{s.name} {estimate_scaling_slope(list(zip(values, snr)), cfg.tail_fraction):.3f}")
            except DomainError:
                pass
        if slopes:
            notes.append("slopes " + ", ".join(slopes))
    return list(result.rows), "; ".join(notes)


def _placement(cfg: RunConfig):
    seg = (cfg.placement.start, cfg.placement.end)
    start = cfg.placement.start.as_array()
    rows, notes = [], []
    for system in cfg.systems:
        pos, snr = optimize_placement(cfg.scenario, seg, cfg.placement.resolution, system)
        offset = float(np.linalg.norm(pos.as_array()[:2] - start[:2]))
        rate = evaluate_system(system, replace(cfg.scenario, irs_pos=pos))[1]
        rows.append(SweepRow(offset, system.name, snr, rate))
        notes.append(f"{system.name} at ({_fmt(pos.x)}, {_fmt(pos.y)}, {_fmt(pos.z)}) "
                     f"{_snr_db(snr):.2f} dB")
    return rows, "; ".join(notes)


def _snr(cfg: RunConfig):
    d = cfg.scenario.bs_pos.distance_to(cfg.scenario.user_pos)
    rows = []
    for system in cfg.systems:
        snr, rate = evaluate_system(system, cfg.scenario)
        rows.append(SweepRow(d, system.name, snr, rate))
    return rows, ""


def _quantize_sweep(cfg: RunConfig):
    sc = cfg.scenario
    ch = synthesize_los(sc)
    rows, notes = [], []
    for system in cfg.systems:
        if not isinstance(system, IRSSystem):
            continue
        noise = effective_noise(system.power_model, sc.noise)
        refl = optimize(ch, system.power_model, sc.transmit_power, noise)
        snr_cont = received_snr(ch, refl, sc.transmit_power, noise)
        alpha_max = cfg.quantize.alpha_max
        if alpha_max is None:
            alpha_max = float(np.max(refl.alpha)) if np.max(refl.alpha) > 0 else 1.0
        snr_q = snr_cont
        for bits in cfg.quantize.phase_bits:
            q = quantize_reflection(refl, QuantizationSpec(bits, cfg.quantize.amp_levels, alpha_max))
            snr_q = received_snr(ch, q, sc.transmit_power, noise)
            rows.append(SweepRow(bits, system.name, snr_q, achievable_rate(snr_q)))
        notes.append(f"{system.name} gap {_snr_db(snr_cont) - _snr_db(snr_q):.4f} dB "
                     f"at {cfg.quantize.phase_bits[-1]} bits")
    if not rows:
        raise DomainError("quantize-sweep needs at least one IRS system")
    return rows, "; ".join(notes)


RUNNERS = {
    "fig5": _fig5,
    "fig6": _fig6,
    "placement": _placement,
    "snr": _snr,
    "quantize-sweep": _quantize_sweep,
}


def run(config: RunConfig, out=None, stdout=None, stderr=None) -> int:
    """Execute the configured experiment and write its CSV; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    t0 = time.perf_counter()
    try:
        rows, notes = RUNNERS[config.experiment](config)
    except DomainError as exc:
        print(f"error: {config.experiment}: {exc}", file=stderr)
        return 1
    path = Path(out or config.output or f"{config.experiment}.csv")
    try:
        write_atomic(path, format_rows(rows))
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=stderr)
        return 1
    elapsed = time.perf_counter() - t0
    summary = f"{config.experiment}: wrote {len(rows)} rows to {path} in {elapsed:.2f} s"
    if notes:
        summary += f" ({notes})"
    print(summary, file=stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="active-irs",
                                     description="Active/passive IRS link simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file (default: bundled preset)")
        p.add_argument("--out", help="results CSV path (default: config 'output' or <subcommand>.csv)")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; all experiments are deterministic")
        p.add_argument("--echo", action="store_true",
                       help="print the validated config in linear units and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else load_preset(args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.experiment != args.command:
        print(f"error: config is for '{cfg.experiment}', not '{args.command}'", file=sys.stderr)
        return 2
    if args.echo:
        sys.stdout.write(dump_config(cfg))
        return 0
    return run(cfg, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
