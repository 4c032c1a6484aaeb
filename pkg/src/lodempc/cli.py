"""Command-line entry point: ``lodempc run``, ``lodempc report``, ``lodempc reproduce``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .mpc import ControlLoopError, Model, Trajectory, run_control_loop
from .plotting import trajectory_svg
from .thmc import BACKEND

log = logging.getLogger("lodempc")

VARIANT_ORDER = ("GPSE", "GPM", "GPMO", "GPSES", "GPMS", "GPMOS")
SHIPPED_EXPERIMENTS = ("experiment1", "experiment2")


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    n_x, n_u = traj.states.shape[1], traj.inputs.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n_x)] + [f"u{i + 1}" for i in range(n_u)]
    rows = np.column_stack([traj.times, traj.states, traj.inputs])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])


def metrics_record(cfg: ExperimentConfig, traj: Trajectory) -> dict:
    return {
        "experiment": cfg.name,
        "model": cfg.model,
        "sampled": cfg.sampled,
        "variant": cfg.variant,
        "seed": cfg.seed,
        "constraint_error": traj.metrics["constraint_error"],
        "control_error": traj.metrics["control_error"],
        "runtime_seconds": traj.timings,
        "hyperparameters": traj.hyperparameters,
        "hmc": {
            "backend": BACKEND if cfg.sampled else None,
            "n_samples": cfg.n_samples if cfg.sampled else 0,
            "mean_bounces_per_sample": float(np.mean(traj.bounces)) if traj.bounces else 0.0,
        },
    }


def run_experiment(cfg: ExperimentConfig, out_dir: Path, plot: bool = False) -> dict:
    """Run one closed loop and write its artifacts into ``out_dir``."""
    problem = cfg.to_problem()
    traj = run_control_loop(problem)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out_dir / "trajectory.csv", traj)
    record = metrics_record(cfg, traj)
    (out_dir / "metrics.json").write_text(json.dumps(record, indent=2) + "\n")
    (out_dir / "config.yaml").write_text(cfg.dump())
    if plot:
        times = traj.times
        box = problem.bounds.on_grid(times)
        lo, hi = box.by_channel(problem.system.n_z)
        labels = [f"x{i + 1}" for i in range(problem.system.n_x)] + [f"u{i + 1}" for i in range(problem.system.n_u)]
        svg = trajectory_svg(times, traj.z.T, labels, lo, hi, title=f"{cfg.name} {cfg.variant}")
        (out_dir / "plot.svg").write_text(svg)
    return record


def _default_out(cfg: ExperimentConfig, base: str | None, many: bool) -> Path:
    if base is not None:
        return Path(base) / f"{cfg.name}_{cfg.variant.lower()}" if many else Path(base)
    if cfg.output is not None:
        return Path(cfg.output)
    return Path("out") / f"{cfg.name}_{cfg.variant.lower()}"


def _run_one(job):
    cfg, out, plot = job
    return str(out), run_experiment(cfg, out, plot)


def _execute(jobs, n_workers: int) -> list:
    if n_workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as ex:
        return list(ex.map(_run_one, jobs))


def format_report(records: list[dict]) -> str:
    """Plain-text tables, one section per experiment and one row per variant."""
    groups: dict[str, list[dict]] = {}
    for r in records:
        groups.setdefault(r.get("experiment", "?"), []).append(r)
    cols = ("Model", "Constraint error", "Control error")
    lines = []
    for name, recs in groups.items():
        recs = sorted(recs, key=lambda r: (VARIANT_ORDER.index(r["variant"]) if r.get("variant") in VARIANT_ORDER else 99, r.get("seed", 0)))
        rows = [
            (r.get("variant", "?") + (f" (seed {r['seed']})" if _seeds_vary(recs) else ""),
             f"{r['constraint_error']:.4f}", f"{r['control_error']:.4f}")
            for r in recs
        ]
        widths = [max(len(c), *(len(row[k]) for row in rows)) for k, c in enumerate(cols)]
        if lines:
            lines.append("")
        lines.append(f"Results for {name}")
        lines.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip())
        lines.append("  ".join("-" * w for w in widths))
        for row in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _seeds_vary(recs) -> bool:
    return len({r.get("seed") for r in recs}) > 1


def load_metrics(path: str) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "metrics.json"
    try:
        rec = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read metrics file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not a metrics file ({exc.msg})") from None
    if not isinstance(rec, dict) or not {"constraint_error", "control_error"} <= rec.keys():
        raise ConfigError(f"{path}: missing constraint_error/control_error")
    return rec


def cmd_run(args) -> int:
    cfgs = []
    for spec in args.configs:
        cfg = load_config(spec)
        over = {"model": args.model, "sampled": args.sampled, "seed": args.seed}
        cfgs.append(cfg.with_overrides(**over))
    many = len(cfgs) > 1
    jobs = [(cfg, _default_out(cfg, args.out, many), args.plot) for cfg in cfgs]
    for out, rec in _execute(jobs, args.jobs):
        print(
            f"{rec['experiment']} {rec['variant']}: constraint_error={rec['constraint_error']:.6g} "
            f"control_error={rec['control_error']:.6g} ({rec['runtime_seconds']['total']:.2f} s) -> {out}"
        )
    return 0


def cmd_report(args) -> int:
    records = [load_metrics(p) for p in args.metrics]
    sys.stdout.write(format_report(records))
    return 0


def cmd_reproduce(args) -> int:
    """All six variants of both shipped experiments, then the report."""
    base = Path(args.out)
    jobs = []
    for name in SHIPPED_EXPERIMENTS:
        cfg = load_config(name)
        for model in Model:
            for sampled in (False, True):
                c = cfg.with_overrides(model=model.value, sampled=sampled, seed=args.seed)
                jobs.append((c, base / f"{c.name}_{c.variant.lower()}", args.plot))
    results = _execute(jobs, args.jobs)
    sys.stdout.write(format_report([rec for _, rec in results]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lodempc", description="Constrained MPC by inference with LODE-GPs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one or more experiment configs")
    r.add_argument("configs", nargs="+", help="YAML config path or shipped config name")
    r.add_argument("--model", choices=[m.value for m in Model])
    r.add_argument("--sampled", action=argparse.BooleanOptionalAction, default=None)
    r.add_argument("--seed", type=int)
    r.add_argument("--plot", action="store_true", help="also write plot.svg")
    r.add_argument("--out", help="output directory (a parent directory when several configs are given)")
    r.add_argument("--jobs", type=int, default=1, help="run configs in parallel")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="tabulate metrics files")
    rep.add_argument("metrics", nargs="+", help="metrics.json files or run directories")
    rep.set_defaults(func=cmd_report)

    rp = sub.add_parser("reproduce", help="run every variant of the shipped experiments")
    rp.add_argument("--out", default="out")
    rp.add_argument("--seed", type=int)
    rp.add_argument("--plot", action="store_true")
    rp.add_argument("--jobs", type=int, default=1)
    rp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, ControlLoopError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"lodempc: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
