"""Command-line front end: analyze, simulate, sweep, optimize, validate.

Every subcommand writes its table to ``<out>/<command>.csv`` and/or
``<out>/<command>.json``; output is a pure function of the config and seed.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, joules_to_uw, load_config
from .exceptions import ConfigError, DomainError, NumericalInstabilityError
from .limiting import DELTA_ONE_TOL, finite_approx, finite_exact, infinite_pdf
from .performance import (
    aer,
    channel_outage,
    optimal_delta,
    total_outage,
    transmission_probability,
)
from .simulation import SimConfig, simulate
from .validation import run_checks

SCHEMA_VERSION = 1

ANALYZE_COLUMNS = [
    "delta_tilde", "buffer_l", "m_eff_uW", "p_root", "d_root", "atom_exact", "atom_approx",
    "p_trans", "aer", "p_out_channel", "p_out_total", "status",
    "c_coef", "target_power_uW",
]
SIM_METRICS = [
    ("p_trans", "p_trans"),
    ("atom", "atom_exact"),
    ("aer", "aer"),
    ("p_out_channel", "p_out_channel"),
    ("p_out_total", "p_out_total"),
]
SIMULATE_COLUMNS = ANALYZE_COLUMNS + [
    c for name, _ in SIM_METRICS for c in (f"{name}_sim", f"{name}_ci", f"{name}_agree")
] + ["slots_counted", "non_stationary"]
SWEEP_COLUMNS = ["snr_bar_dB"] + ANALYZE_COLUMNS
OPTIMIZE_COLUMNS = ["buffer_l", "delta_star", "m_eff_uW", "target_power_uW", "p_out_total",
                    "grid_index", "regime"]
AGREE_RADII = 3.0


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g") if math.isfinite(v) else str(float(v))
    return str(v)


def _buffer_label(l) -> str:
    return "inf" if l == "infinite" else str(l)


def _analyze_point(cfg: ExperimentConfig, delta: float, l, link=None) -> dict:
    """One (delta_tilde, buffer) row; failures become a status string."""
    link = link or cfg.link
    eff = cfg.effective(delta)
    row = dict.fromkeys(ANALYZE_COLUMNS)
    row.update(delta_tilde=delta, buffer_l=_buffer_label(l), m_eff_uW=joules_to_uw(eff.m_eff),
               target_power_uW=joules_to_uw(cfg.target_power(eff.m_eff)))
    status = "ok"
    try:
        p_ch = channel_outage(link, delta)
        row["aer"] = aer(link, delta)
        row["p_out_channel"] = p_ch
        if l == "infinite":
            if delta > 1.0:
                row["p_root"] = infinite_pdf(eff).p
            else:
                status = "no_stationary_distribution"
            p_tr = transmission_probability(None, delta)
        else:
            buf = cfg.buffer_spec(l, eff)
            row["atom_exact"] = finite_exact(eff, buf).atom
            if l >= 3:
                n_c = min(cfg.n_c, l - 1)
                approx = finite_approx(eff, buf, n_c)
                row.update(d_root=approx.d, c_coef=approx.c, atom_approx=approx.atom)
                p_tr = transmission_probability(approx)
            else:
                p_tr = transmission_probability(finite_exact(eff, buf))
                status = "exact_p_trans"
        row["p_trans"] = p_tr
        row["p_out_total"] = total_outage(p_tr, p_ch)
    except (DomainError, NumericalInstabilityError, OverflowError) as exc:
        status = f"error: {exc}"
    row["status"] = status
    return row


def _simulate_point(cfg: ExperimentConfig, delta: float, l) -> dict:
    row = _analyze_point(cfg, delta, l)
    eff = cfg.effective(delta)
    res = simulate(eff, cfg.buffer_spec(l, eff), cfg.link, cfg.sim)
    ests = {"p_trans": res.p_trans_hat, "atom": res.atom_freq_hat, "aer": res.aer_hat,
            "p_out_channel": res.channel_outage_hat, "p_out_total": res.total_outage_hat}
    for name, ref in SIM_METRICS:
        est, target = ests[name], row[ref]
        if name == "atom" and target is None:
            target = 0.0 if l == "infinite" else None
        row[f"{name}_sim"] = est.value
        row[f"{name}_ci"] = est.ci
        row[f"{name}_agree"] = "" if target is None else (
            "within" if est.covers(target, AGREE_RADII) else "outside")
    row["slots_counted"] = res.slots_counted
    row["non_stationary"] = res.non_stationary
    return row


def _sweep_point(cfg: ExperimentConfig, snr_db: float, delta: float, l) -> dict:
    link = cfg.link.with_snr(10 ** (snr_db / 10))
    return {"snr_bar_dB": snr_db, **_analyze_point(cfg, delta, l, link)}


def _star(args):
    fn, rest = args[0], args[1:]
    return fn(*rest)


def _pool_map(tasks: list, jobs: int) -> list:
    """Evaluate ``(fn, *args)`` tasks in order, optionally in worker processes."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_star(t) for t in tasks]
    with ProcessPoolExecutor(jobs) as pool:
        return list(pool.map(_star, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def analyze(cfg: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """Closed-form rows, delta_tilde major and buffer minor."""
    return _pool_map([(_analyze_point, cfg, d, l) for d in cfg.deltas for l in cfg.buffers], jobs)


def simulate_rows(cfg: ExperimentConfig, jobs: int = 1) -> list[dict]:
    if cfg.sim is None:
        raise ConfigError("simulate needs a sim section (config has 'analytic-only')")
    return _pool_map([(_simulate_point, cfg, d, l) for d in cfg.deltas for l in cfg.buffers], jobs)


def sweep(cfg: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """Closed-form rows for every uplink SNR in ``snr_sweep_dB``."""
    tasks = [(_sweep_point, cfg, s, d, l) for s in cfg.snr_sweep_db
             for d in cfg.deltas for l in cfg.buffers]
    return _pool_map(tasks, jobs)


def optimize(cfg: ExperimentConfig) -> list[dict]:
    """Outage-minimizing delta_tilde per buffer with the matching target power."""
    rows = []
    for l in cfg.buffers:
        row = dict.fromkeys(OPTIMIZE_COLUMNS)
        row["buffer_l"] = _buffer_label(l)
        try:
            from .storage import BufferSpec

            buf = BufferSpec.infinite() if l == "infinite" else BufferSpec.finite(l, 1.0)
            n_c = cfg.n_c if l == "infinite" else min(cfg.n_c, l - 1)
            if l != "infinite" and l < 3:
                raise DomainError("optimize needs l >= 3")
            res = optimal_delta(buf, cfg.link, cfg.deltas, n_c)
        except DomainError as exc:
            row["regime"] = f"error: {exc}"
            rows.append(row)
            continue
        m_eff = res.delta * cfg.harvest_mean_eff
        row.update(delta_star=res.delta, m_eff_uW=joules_to_uw(m_eff),
                   target_power_uW=joules_to_uw(cfg.target_power(m_eff)),
                   p_out_total=res.outage, grid_index=res.grid_index,
                   regime="high-outage" if res.high_outage else "normal")
        rows.append(row)
    return rows


def _csv_text(command: str, columns: list[str], rows: list[dict]) -> str:
    lines = [f"# ehstorage {command} schema v{SCHEMA_VERSION}", ",".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            text = _fmt(row.get(c))
            if "," in text or '"' in text:
                text = '"' + text.replace('"', '""') + '"'
            cells.append(text)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _json_text(command: str, columns: list[str], rows: list[dict]) -> str:
    body = {"schema": f"{command}/v{SCHEMA_VERSION}", "columns": columns,
            "rows": [{c: _fmt(r.get(c)) for c in columns} for r in rows]}
    return json.dumps(body, indent=1) + "\n"


def write_table(out_dir: Path, command: str, columns: list[str], rows: list[dict],
                fmt: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        path = out_dir / f"{command}.csv"
        path.write_text(_csv_text(command, columns, rows), encoding="utf-8")
        written.append(path)
    if fmt in ("json", "both"):
        path = out_dir / f"{command}.json"
        path.write_text(_json_text(command, columns, rows), encoding="utf-8")
        written.append(path)
    return written


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.out is not None:
        changes["out_dir"] = Path(args.out)
    if args.format is not None:
        changes["out_format"] = args.format
    if args.seed is not None or args.slots is not None:
        sim = cfg.sim or SimConfig()
        try:
            if args.seed is not None:
                sim = replace(sim, seed=args.seed)
            if args.slots is not None:
                sim = replace(sim, n_slots=args.slots)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        changes["sim"] = sim
    return replace(cfg, **changes) if changes else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehstorage",
        description="Limiting buffer statistics and outage of an energy-harvesting uplink.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("analyze", "closed-form metrics over the delta/buffer grid"),
                       ("simulate", "closed forms plus Monte Carlo with agreement flags"),
                       ("sweep", "closed-form metrics over the uplink SNR list"),
                       ("optimize", "outage-minimizing delta per buffer"),
                       ("validate", "run the self-check suite")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON config file (defaults: reference profile)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=["csv", "json", "both"])
        p.add_argument("--seed", type=int)
        p.add_argument("--slots", type=int, help="slots per replication")
        p.add_argument("--fast", action="store_true", help="validate: skip Monte Carlo")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "validate":
            results = run_checks(fast=args.fast)
            ok = all(r.passed for r in results)
            report = {"passed": ok, "checks": [r.to_dict() for r in results]}
            print(json.dumps(report, indent=1))
            return 0 if ok else 1
        if args.command == "analyze":
            columns, rows = ANALYZE_COLUMNS, analyze(cfg, args.jobs)
        elif args.command == "simulate":
            columns, rows = SIMULATE_COLUMNS, simulate_rows(cfg, args.jobs)
        elif args.command == "sweep":
            columns, rows = SWEEP_COLUMNS, sweep(cfg, args.jobs)
        else:
            columns, rows = OPTIMIZE_COLUMNS, optimize(cfg)
        for path in write_table(cfg.out_dir, args.command, columns, rows, cfg.out_format):
            print(path)
    except ConfigError as exc:
        print(f"ehstorage: config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
