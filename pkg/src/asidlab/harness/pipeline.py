"""End-to-end protocol: explore in real once, identify, train in sim, evaluate."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml

from .. import rng as rng_mod
from ..control import evaluate, train_dr_policy, train_task_policy
from ..envlab import EnvSpec, ParamVector, Trajectory, rollout
from ..errors import ConfigurationError, EpisodeBudgetExceeded
from ..explore import random_policy, train_exploration_policy
from ..fisher import a_optimal_objective
from ..policy import Policy
from ..sysid import identify
from .config import ExperimentConfig

log = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"
SUMMARY_FILE = "summary.json"
CONFIG_ECHO = "config.yaml"


class RealEnvironment:
    """The held-out system at theta*. It grants exactly one episode."""

    def __init__(self, env: EnvSpec, theta_star: ParamVector):
        self._env = env
        self._theta_star = theta_star
        self._used = False

    @property
    def env_id(self) -> str:
        return self._env.env_id

    def rollout(self, policy: Policy, seed: int) -> Trajectory:
        if self._used:
            raise EpisodeBudgetExceeded("the real environment allows a single episode")
        self._used = True
        return rollout(self._env, policy, self._theta_star, seed)


def dumps(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=False)


def _clean(x: Any) -> Any:
    """Replace non-finite floats with None so records stay strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def methods(cfg: ExperimentConfig) -> list[str]:
    return ["asid", *cfg.baselines]


def _exploration_policy(cfg: ExperimentConfig, env: EnvSpec, mode: str, seed: int) -> Policy:
    if mode == "fisher":
        return train_exploration_policy(
            env,
            cfg.prior,
            cfg.explore_kind,
            cfg.cem_explore.with_seed(rng_mod.derive_seed(seed, "explore")),
            cfg.fd,
            ridge=cfg.ridge,
            n_rollouts=cfg.n_rollouts,
            info_scale=cfg.info_scale,
        )
    return random_policy(env, cfg.explore_kind, rng_mod.derive_seed(seed, "random-explore"))


def _objective(cfg: ExperimentConfig, env: EnvSpec, policy: Policy, seed: int) -> float | None:
    if env.sigma_w == 0 and cfg.info_scale is None:
        return None
    return a_optimal_objective(
        policy,
        env,
        cfg.prior,
        cfg.objective_rollouts,
        cfg.ridge,
        rng_mod.derive_seed(seed, "objective"),
        cfg.fd,
        cfg.info_scale,
    )


def run_method(
    cfg: ExperimentConfig,
    method: str,
    seed: int,
    env: EnvSpec,
    theta_star: ParamVector,
    oracle: Policy,
    artifacts: Path | None = None,
) -> dict[str, Any]:
    record: dict[str, Any] = {
        "seed": seed,
        "method": method,
        "env_id": cfg.env_id,
        "theta_star": list(theta_star.values),
        "theta_hat": None,
        "abs_error": None,
        "exploration": None,
        "exploration_objective": None,
        "discrepancy": None,
        "identifiable": None,
    }
    eval_seed = rng_mod.derive_seed(seed, "eval")
    task_cem = cfg.cem_task.with_seed(rng_mod.derive_seed(seed, "task", method))

    if method == "dr":
        policy = train_dr_policy(env, cfg.prior, cfg.task_kind, task_cem, cfg.dr_samples)
    else:
        mode = cfg.exploration if method == "asid" else "random"
        record["exploration"] = mode
        if mode == "none":
            theta_hat = env.params(np.clip(cfg.prior.mean, cfg.prior.lower, cfg.prior.upper))
        else:
            explorer = _exploration_policy(cfg, env, mode, seed)
            record["exploration_objective"] = _objective(cfg, env, explorer, seed)
            real = RealEnvironment(env, theta_star)
            traj = real.rollout(explorer, rng_mod.derive_seed(seed, "real", method))
            result = identify(
                traj,
                env,
                cfg.prior,
                cfg.cem_sysid.with_seed(rng_mod.derive_seed(seed, "sysid", method)),
                cfg.n_noise_draws,
            )
            theta_hat = result.point_estimate
            record["discrepancy"] = result.discrepancy
            record["identifiable"] = result.identifiable
            if artifacts is not None:
                _write_json(artifacts / "policies" / f"seed{seed}_{method}_explore.json", explorer.to_dict())
                _write_json(artifacts / "trajectories" / f"seed{seed}_{method}_real.json", traj.to_dict())
        record["theta_hat"] = list(theta_hat.values)
        record["abs_error"] = [abs(a - b) for a, b in zip(theta_hat.values, theta_star.values)]
        policy = train_task_policy(env, theta_hat, cfg.task_kind, task_cem)

    report = evaluate(policy, env, theta_star, cfg.eval_episodes, eval_seed, oracle=oracle)
    record["report"] = report.to_dict()
    record["status"] = "ok"
    return _clean(record)


def run_seed(cfg: ExperimentConfig, seed: int, artifacts: Path | None = None) -> list[dict[str, Any]]:
    """All method records for one seed; failures are recorded, not raised."""
    env = cfg.env()
    theta_star = cfg.theta_star_for(seed)
    records = []
    try:
        oracle = train_task_policy(
            env, theta_star, cfg.task_kind, cfg.cem_task.with_seed(rng_mod.derive_seed(seed, "oracle"))
        )
    except Exception as exc:  # recorded per seed; other seeds continue
        oracle, oracle_error = None, exc
    for method in methods(cfg):
        try:
            if oracle is None:
                raise oracle_error
            records.append(run_method(cfg, method, seed, env, theta_star, oracle, artifacts))
        except Exception as exc:
            log.warning("seed %d method %s failed: %s", seed, method, exc)
            records.append(
                {
                    "seed": seed,
                    "method": method,
                    "env_id": cfg.env_id,
                    "status": "error",
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
    return records


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")


def _mean_se(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def aggregate(records: Iterable[dict[str, Any]]) -> dict[str, Any]:
    """Per-method means and standard errors across seeds."""
    by_method: dict[str, list[dict[str, Any]]] = {}
    for rec in records:
        by_method.setdefault(rec["method"], []).append(rec)
    out: dict[str, Any] = {}
    for method, recs in by_method.items():
        ok = [r for r in recs if r.get("status") == "ok"]
        stats: dict[str, Any] = {"n_ok": len(ok), "n_error": len(recs) - len(ok)}
        for key, getter in (
            ("value_real", lambda r: r["report"]["value_real"]),
            ("suboptimality", lambda r: r["report"]["suboptimality"]),
            ("success_rate", lambda r: r["report"]["success_rate"]),
            ("metric", lambda r: r["report"]["metric"]),
            ("abs_error", lambda r: float(np.mean(r["abs_error"])) if r["abs_error"] else None),
            ("exploration_objective", lambda r: r["exploration_objective"]),
        ):
            vals = [v for v in (getter(r) for r in ok) if v is not None]
            mean, se = _mean_se(vals)
            stats[key] = {"mean": mean, "se": se, "n": len(vals)}
        if ok:
            stats["metric_name"] = ok[0]["report"]["metric_name"]
        out[method] = stats
    return out


@dataclass
class PipelineReport:
    records: list[dict[str, Any]]
    aggregates: dict[str, Any]
    output_dir: Path | None = None

    def by_method(self, method: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r["method"] == method]


def _read_complete(path: Path, expected: list[str]) -> list[dict[str, Any]]:
    """Records of seeds whose every method line was written intact."""
    if not path.exists():
        return []
    lines = path.read_text().split("\n")
    parsed = []
    for line in lines:
        if not line:
            continue
        try:
            parsed.append(json.loads(line))
        except json.JSONDecodeError:
            break  # torn final line from an interrupted write
    done, seen = [], {}
    for rec in parsed:
        seen.setdefault(rec["seed"], []).append(rec)
    for seed, recs in seen.items():
        if [r["method"] for r in recs] == expected:
            done.extend(recs)
    return done


def run_pipeline(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    resume: bool = True,
    seeds: Iterable[int] | None = None,
) -> PipelineReport:
    """Run every configured seed, appending records as each seed completes.

    With ``out_dir`` the run writes ``config.yaml``, ``records.jsonl`` (one
    line per seed and method), ``summary.json`` and per-seed policy and
    trajectory files. Seeds already complete in an existing records file are
    skipped, so an interrupted run can be resumed.
    """
    seeds = list(cfg.seeds if seeds is None else seeds)
    expected = methods(cfg)
    out = Path(out_dir) if out_dir is not None else None
    records: list[dict[str, Any]] = []
    sink = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        echo = out / CONFIG_ECHO
        text = yaml.safe_dump(cfg.to_dict(), sort_keys=True)
        if resume and echo.exists() and echo.read_text() != text:
            raise ConfigurationError(f"{out} holds a run with a different config; refusing to resume")
        echo.write_text(text)
        path = out / RECORDS_FILE
        if resume:
            records = [r for r in _read_complete(path, expected) if r["seed"] in seeds]
        path.write_text("".join(dumps(r) + "\n" for r in records))
        sink = open(path, "a")

    done = {r["seed"] for r in records}
    todo = [s for s in seeds if s not in done]
    artifacts = out
    try:
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(run_seed, [cfg] * len(todo), todo, [artifacts] * len(todo))
                for recs in results:
                    _emit(recs, records, sink)
        else:
            for seed in todo:
                _emit(run_seed(cfg, seed, artifacts), records, sink)
    finally:
        if sink is not None:
            sink.close()

    order = {s: i for i, s in enumerate(seeds)}
    records.sort(key=lambda r: (order[r["seed"]], expected.index(r["method"])))
    aggregates = aggregate(records)
    if out is not None:
        summary = {
            "env_id": cfg.env_id,
            "n_seeds": len(seeds),
            "seeds": seeds,
            "sigma_w": cfg.env().sigma_w,
            "preregistered": dict(cfg.preregistered),
            "methods": aggregates,
        }
        _write_json(out / SUMMARY_FILE, _clean(summary))
    return PipelineReport(records, aggregates, out)


def _emit(recs, records, sink) -> None:
    records.extend(recs)
    if sink is not None:
        sink.write("".join(dumps(r) + "\n" for r in recs))
        sink.flush()
