"""Grid sweeps of a fixed exploration policy, written as heatmap data.

A sweep table is a list of grid cells with two coordinates and one or more
scalar metrics. It round-trips through CSV exactly: every number is written
with ``repr(float)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .. import rng as rng_mod
from ..envlab import EnvSpec, noise_batch, simulate, theta_array
from ..envlab.dynamics import (
    ball_displacement,
    ball_moved,
    ball_patch,
    ball_patches_visited,
    ball_success,
)
from ..errors import ConfigurationError
from ..explore import random_policy, train_exploration_policy
from ..policy import Policy
from ..sysid import identify
from .config import ExperimentConfig, SweepSpec
from .pipeline import RealEnvironment

TABLE_FILE = "sweep.csv"
SWEEP_SUMMARY_FILE = "sweep_summary.json"


def fmt(value: float) -> str:
    """Canonical text for a table number; ``float(fmt(v)) == v`` exactly."""
    return repr(float(value))


@dataclass(frozen=True)
class SweepTable:
    """Heatmap data: ``rows`` hold (x, y, *metrics) per grid cell."""

    x_name: str
    y_name: str
    metrics: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]
    summary: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != 2 + len(self.metrics):
                raise ValueError("every row needs x, y and one value per metric")

    @property
    def columns(self) -> tuple[str, ...]:
        return (self.x_name, self.y_name, *self.metrics)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[self.columns.index(name)] for row in self.rows])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([fmt(v) for v in row])


def read_table(path: str | Path) -> SweepTable:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path} is empty") from None
        rows = tuple(tuple(float(v) for v in line) for line in reader if line)
    if len(header) < 3:
        raise ConfigurationError(f"{path} needs x, y and at least one metric column")
    return SweepTable(header[0], header[1], tuple(header[2:]), rows)


def _episode_noise(env: EnvSpec, n_episodes: int, seed: int) -> np.ndarray:
    return noise_batch(env, [rng_mod.derive_seed(seed, "episode", k) for k in range(n_episodes)])


def _ball_rollouts(env, policy, theta, n_episodes, seed, s0=None):
    th = theta_array(env, theta)
    params = np.tile(policy.params, (n_episodes, 1))
    start = None if s0 is None else np.tile(np.asarray(s0, float), (n_episodes, 1))
    return simulate(env, policy.kind, params, np.tile(th, (n_episodes, 1)), _episode_noise(env, n_episodes, seed), start)


STAT_NAMES = ("contact_rate", "displacement", "success_rate", "coverage", "multi_patch_rate")


def exploration_stats(
    env: EnvSpec, policy: Policy, theta, n_episodes: int, seed: int, s0=None
) -> dict[str, float]:
    """Contact, displacement, success and patch coverage of a ball-env policy.

    ``coverage`` is the mean number of non-start friction patches the ball
    entered; ``multi_patch_rate`` the fraction of episodes entering at least
    two of them.
    """
    policy.check_env(env)
    states, actions = _ball_rollouts(env, policy, theta, n_episodes, seed, s0)
    visited = ball_patches_visited(env, states, actions)
    start = ball_patch(env, states[:, 0, 2])
    visited[np.arange(n_episodes), start] = False
    n_new = visited.sum(axis=1)
    return {
        "contact_rate": float(ball_moved(env, states, actions).mean()),
        "displacement": float(ball_displacement(env, states, actions).mean()),
        "success_rate": float(ball_success(env, states, actions).mean()),
        "coverage": float(n_new.mean()),
        "multi_patch_rate": float((n_new >= 2).mean()),
    }


def initial_state_sweep(
    env: EnvSpec, policy: Policy, theta, spec: SweepSpec, seed: int
) -> SweepTable:
    """Move the ball's starting position over the grid; striker start is unchanged."""
    rows = []
    for y in spec.y.values:
        for x in spec.x.values:
            s0 = np.array(env.init_state, dtype=float)
            s0[2:4] = (x, y)
            stats = exploration_stats(env, policy, theta, spec.episodes, seed, s0)
            rows.append((x, y, *(stats[k] for k in STAT_NAMES)))
    return SweepTable("ball_x", "ball_y", STAT_NAMES, tuple(rows))


def theta_star_sweep(
    cfg: ExperimentConfig, policy: Policy, spec: SweepSpec, seed: int
) -> SweepTable:
    """Identification error of one exploration policy as theta* varies.

    Each cell plays the policy once on its own theta* and identifies from
    that single trajectory. Parameters off the grid axes sit at the prior
    mean.
    """
    env = cfg.env()
    base = np.clip(np.asarray(cfg.prior.mean, float), env.param_lower, env.param_upper)
    ys = spec.y.values if spec.y is not None else (0.0,)
    y_name = env.param_names[1] if spec.y is not None else "_"
    rows = []
    for j, y in enumerate(ys):
        for i, x in enumerate(spec.x.values):
            theta = base.copy()
            theta[0] = x
            if spec.y is not None:
                theta[1] = y
            theta_star = env.params(theta)
            real = RealEnvironment(env, theta_star)
            traj = real.rollout(policy, rng_mod.derive_seed(seed, "sweep-real", i, j))
            result = identify(
                traj, env, cfg.prior, cfg.cem_sysid.with_seed(rng_mod.derive_seed(seed, "sweep-sysid", i, j)),
                cfg.n_noise_draws,
            )
            err = np.abs(np.array(result.point_estimate.values) - theta)
            rows.append((x, y, float(err.mean()), float(err.max()), float(result.discrepancy)))
    return SweepTable(env.param_names[0], y_name, ("abs_error", "max_abs_error", "discrepancy"), tuple(rows))


def visitation_sweep(
    env: EnvSpec, policies: Mapping[str, Policy], theta, spec: SweepSpec, seed: int
) -> SweepTable:
    """Fraction of episodes in which the ball passed through each (x, y) bin.

    The summary holds, per policy, the number of bins ever visited and the
    patch statistics of :func:`exploration_stats` on the same episodes.
    """
    x_edges, y_edges = spec.x.edges, spec.y.edges
    grids, summary = {}, {}
    for name, policy in policies.items():
        states, _ = _ball_rollouts(env, policy, theta, spec.episodes, seed)
        frac = np.zeros((spec.y.n, spec.x.n))
        for k in range(spec.episodes):
            hist, _, _ = np.histogram2d(states[k, :, 3], states[k, :, 2], bins=(y_edges, x_edges))
            frac += hist > 0
        frac /= spec.episodes
        grids[name] = frac
        summary[name] = {
            "cells_visited": int((frac > 0).sum()),
            **exploration_stats(env, policy, theta, spec.episodes, seed),
        }
    rows = []
    for j, y in enumerate(spec.y.centres):
        for i, x in enumerate(spec.x.centres):
            rows.append((x, y, *(float(grids[n][j, i]) for n in policies)))
    return SweepTable("ball_x", "ball_y", tuple(f"visits_{n}" for n in policies), tuple(rows), summary)


def sweep_policy(cfg: ExperimentConfig, kind: str, seed: int) -> Policy:
    env = cfg.env()
    if kind == "fisher":
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


def run_sweep(
    cfg: ExperimentConfig,
    seed: int,
    out_dir: str | Path | None = None,
    policies: Mapping[str, Policy] | None = None,
) -> SweepTable:
    """Run the sweep described by ``cfg.sweep`` and optionally write it out.

    Policies are trained once from ``seed`` unless given. Writes
    ``sweep.csv``, ``sweep_summary.json`` and the policies used.
    """
    spec = cfg.sweep
    if spec is None:
        raise ConfigurationError("config has no `sweep` block")
    env = cfg.env()
    theta = cfg.theta_star_for(seed)
    names: Sequence[str] = ("fisher", "random") if spec.kind == "visitation" else (spec.policy,)
    policies = dict(policies or {})
    for name in names:
        if name not in policies:
            policies[name] = sweep_policy(cfg, name, seed)
    if spec.kind == "initial_state":
        table = initial_state_sweep(env, policies[spec.policy], theta, spec, seed)
    elif spec.kind == "theta_star":
        table = theta_star_sweep(cfg, policies[spec.policy], spec, seed)
    else:
        table = visitation_sweep(env, {n: policies[n] for n in names}, theta, spec, seed)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / TABLE_FILE)
        summary = {"kind": spec.kind, "seed": seed, "theta_star": list(theta.values), "policies": dict(table.summary)}
        (out / SWEEP_SUMMARY_FILE).write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
        for name in names:
            path = out / "policies" / f"sweep_{name}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(policies[name].to_dict(), sort_keys=True, indent=1) + "\n")
    return table
