"""Command-line entry point: ``asidlab <subcommand> --config run.yaml``.

Every subcommand prints a JSON summary on stdout. Failures print a JSON
object ``{"error": ..., "message": ...}`` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .. import rng as rng_mod
from ..control import evaluate, train_dr_policy, train_task_policy
from ..envlab import Trajectory
from ..errors import ConfigurationError
from ..policy import Policy
from ..sysid import IdentificationResult, identify
from .config import ExperimentConfig, load_config
from .pipeline import RealEnvironment, _objective, run_pipeline
from .render import render_heatmap
from .sweep import TABLE_FILE, read_table, run_sweep, sweep_policy

EXIT_CONFIG = 2
EXIT_FAILURE = 1


def _write(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")
    return path


def _read_json(path: str) -> Any:
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"file not found: {p}")
    return json.loads(p.read_text())


def _out(args, cfg: ExperimentConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is None:
        raise ConfigurationError("--out is required")
    return Path(cfg.output_dir)


def _seed(args, cfg: ExperimentConfig) -> int:
    return cfg.seeds[0] if args.seed is None else args.seed


def cmd_explore(args) -> dict[str, Any]:
    """Train (or draw) an exploration policy and play it once on theta*."""
    cfg = load_config(args.config)
    seed, out = _seed(args, cfg), _out(args, cfg)
    env = cfg.env()
    kind = "random" if args.method == "random" else "fisher"
    policy = sweep_policy(cfg, kind, seed)
    objective = _objective(cfg, env, policy, seed)
    traj = RealEnvironment(env, cfg.theta_star_for(seed)).rollout(
        policy, rng_mod.derive_seed(seed, "real", args.method or "asid")
    )
    return {
        "policy": str(_write(out / "explore_policy.json", policy.to_dict())),
        "trajectory": str(_write(out / "real_trajectory.json", traj.to_dict())),
        "exploration_objective": objective,
    }


def cmd_sysid(args) -> dict[str, Any]:
    cfg = load_config(args.config)
    if not args.trajectory:
        raise ConfigurationError("sysid needs --trajectory (written by `explore`)")
    seed, out = _seed(args, cfg), _out(args, cfg)
    traj = Trajectory.from_dict(_read_json(args.trajectory))
    result = identify(
        traj, cfg.env(), cfg.prior, cfg.cem_sysid.with_seed(rng_mod.derive_seed(seed, "sysid")), cfg.n_noise_draws
    )
    path = _write(out / "identification.json", result.to_dict())
    return {"identification": str(path), "theta_hat": list(result.point_estimate.values),
            "discrepancy": result.discrepancy, "identifiable": result.identifiable}


def cmd_task(args) -> dict[str, Any]:
    """Train a task policy (DR, or on an identified theta) and evaluate it on theta*."""
    cfg = load_config(args.config)
    seed, out = _seed(args, cfg), _out(args, cfg)
    env = cfg.env()
    method = args.method or "asid"
    cem = cfg.cem_task.with_seed(rng_mod.derive_seed(seed, "task", method))
    if method == "dr":
        policy = train_dr_policy(env, cfg.prior, cfg.task_kind, cem, cfg.dr_samples)
    else:
        if not args.identification:
            raise ConfigurationError(f"--method {method} needs --identification (written by `sysid`)")
        result = IdentificationResult.from_dict(_read_json(args.identification))
        policy = train_task_policy(env, result.point_estimate, cfg.task_kind, cem)
    theta_star = cfg.theta_star_for(seed)
    oracle = train_task_policy(
        env, theta_star, cfg.task_kind, cfg.cem_task.with_seed(rng_mod.derive_seed(seed, "oracle"))
    )
    report = evaluate(policy, env, theta_star, cfg.eval_episodes, rng_mod.derive_seed(seed, "eval"), oracle=oracle)
    path = _write(out / f"task_{method}.json", report.to_dict())
    return {"report": str(path), "success_rate": report.success_rate, "metric": report.metric,
            "metric_name": report.metric_name, "suboptimality": report.suboptimality}


def cmd_pipeline(args) -> dict[str, Any]:
    cfg = load_config(args.config)
    seeds = None if args.seed is None else [args.seed]
    report = run_pipeline(cfg, _out(args, cfg), jobs=args.jobs, resume=not args.no_resume, seeds=seeds)
    return {"output_dir": str(report.output_dir), "n_records": len(report.records), "methods": report.aggregates}


def cmd_sweep(args) -> dict[str, Any]:
    cfg = load_config(args.config)
    out = _out(args, cfg)
    table = run_sweep(cfg, _seed(args, cfg), out)
    return {"table": str(out / TABLE_FILE), "cells": len(table.rows), "metrics": list(table.metrics)}


def cmd_render(args) -> dict[str, Any]:
    if not args.table:
        raise ConfigurationError("render needs --table (a sweep CSV)")
    table = read_table(args.table)
    out = Path(args.out) if args.out else Path(args.table).with_suffix(".svg")
    if out.suffix != ".svg":
        out = out / (Path(args.table).stem + ".svg")
        out.parent.mkdir(parents=True, exist_ok=True)
    render_heatmap(table, out, args.metric)
    return {"figure": str(out)}


COMMANDS = {
    "explore": cmd_explore,
    "sysid": cmd_sysid,
    "task": cmd_task,
    "pipeline": cmd_pipeline,
    "sweep": cmd_sweep,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asidlab", description="Active exploration for system identification, toy lab.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).strip().splitlines()[0])
        if name != "render":
            p.add_argument("--config", required=True, help="experiment YAML")
        p.add_argument("--seed", type=int, default=None, help="run seed (default: first configured seed)")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        p.add_argument("--method", choices=("asid", "dr", "random"), default=None)
        if name == "pipeline":
            p.add_argument("--jobs", type=int, default=1, help="seeds run in parallel")
            p.add_argument("--no-resume", action="store_true", help="start over instead of skipping finished seeds")
        if name == "sysid":
            p.add_argument("--trajectory", help="trajectory JSON written by `explore`")
        if name == "task":
            p.add_argument("--identification", help="identification JSON written by `sysid`")
        if name == "render":
            p.add_argument("--table", help="sweep CSV")
            p.add_argument("--metric", default=None, help="metric column (default: first)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        result = COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps(result, sort_keys=True, indent=1, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
