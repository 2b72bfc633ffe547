"""Experiment configuration: YAML in, validated dataclass out.

Unknown keys are rejected so a typo cannot silently fall back to a default.
All validation problems are collected and reported together.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .. import rng as rng_mod
from ..cem import CemConfig
from ..envlab import EnvSpec, ParamDistribution, ParamVector, make_env
from ..errors import ConfigurationError
from ..fisher import FdConfig
from ..policy import POLICY_KINDS

EXPLORATION_MODES = ("fisher", "random", "none")
BASELINES = ("dr", "random")
THETA_STAR_MODES = ("fixed", "uniform")
SWEEP_KINDS = ("initial_state", "theta_star", "visitation")
SWEEP_POLICIES = ("fisher", "random")

TOP_LEVEL_KEYS = {
    "env_id",
    "env_overrides",
    "theta_star",
    "theta_star_mode",
    "theta_star_range",
    "prior",
    "exploration",
    "policy_kinds",
    "cem",
    "fd",
    "ridge",
    "info_scale",
    "n_rollouts",
    "n_noise_draws",
    "dr_samples",
    "eval_episodes",
    "objective_rollouts",
    "baselines",
    "seeds",
    "success",
    "preregistered",
    "output_dir",
    "sweep",
}
CEM_KEYS = {"population", "elite_frac", "iterations", "init_std", "min_std", "include_mean", "smoothing"}


class ConfigErrors(ConfigurationError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid experiment config:\n  - " + "\n  - ".join(problems))


@dataclass(frozen=True)
class Axis:
    """One grid axis: ``n`` points spaced evenly on [lower, upper].

    For visitation sweeps the same numbers define ``n`` equal-width bins and
    ``values`` are the bin centres.
    """

    lower: float
    upper: float
    n: int

    @property
    def values(self) -> tuple[float, ...]:
        if self.n == 1:
            return (0.5 * (self.lower + self.upper),)
        return tuple(float(v) for v in np.linspace(self.lower, self.upper, self.n))

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.n + 1)

    @property
    def centres(self) -> tuple[float, ...]:
        e = self.edges
        return tuple(float(v) for v in 0.5 * (e[:-1] + e[1:]))


@dataclass(frozen=True)
class SweepSpec:
    """Grid sweep settings.

    ``initial_state`` moves the ball's start over an (x, y) grid;
    ``theta_star`` moves the true parameters (x over the first parameter, y
    over the second when given); ``visitation`` bins ball positions visited
    by the fisher and random policies.
    """

    kind: str
    x: Axis
    y: Axis | None = None
    policy: str = "fisher"
    episodes: int = 20


@dataclass(frozen=True)
class ExperimentConfig:
    env_id: str
    theta_star: tuple[float, ...]
    prior: ParamDistribution
    env_overrides: Mapping[str, Any] = field(default_factory=dict)
    theta_star_mode: str = "fixed"
    theta_star_range: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    exploration: str = "fisher"
    explore_kind: str = "open_loop"
    task_kind: str = "open_loop"
    cem_explore: CemConfig = field(default_factory=CemConfig)
    cem_sysid: CemConfig = field(default_factory=CemConfig)
    cem_task: CemConfig = field(default_factory=CemConfig)
    fd: FdConfig = field(default_factory=FdConfig)
    ridge: float = 1e-3
    info_scale: float | None = None
    n_rollouts: int = 8
    n_noise_draws: int = 1
    dr_samples: int = 16
    eval_episodes: int = 20
    objective_rollouts: int = 32
    baselines: tuple[str, ...] = BASELINES
    seeds: tuple[int, ...] = (0,)
    success: Mapping[str, float] = field(default_factory=dict)
    preregistered: Mapping[str, Any] = field(default_factory=dict)
    output_dir: str = "runs/default"
    sweep: SweepSpec | None = None
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def env(self) -> EnvSpec:
        env = make_env(self.env_id, **dict(self.env_overrides))
        if self.success:
            if env.task_env_id and env.task_env_id != env.env_id:
                task_extras = {**env.extras.get("task_extras", {}), **self.success}
                env = env.replace(extras={"task_extras": task_extras})
            else:
                env = env.replace(extras=dict(self.success))
        return env

    def theta_star_for(self, seed: int) -> ParamVector:
        env = self.env()
        if self.theta_star_mode == "fixed":
            return env.params(self.theta_star)
        lo, hi = (np.array(b) for b in self.theta_star_range)
        gen = rng_mod.generator(seed, "theta-star")
        return env.params(gen.uniform(lo, hi))

    def to_dict(self) -> dict[str, Any]:
        return dict(self.raw)


def _cem(block: Any, where: str, problems: list[str]) -> CemConfig:
    if block is None:
        return CemConfig()
    if not isinstance(block, Mapping):
        problems.append(f"{where} must be a mapping")
        return CemConfig()
    unknown = set(block) - CEM_KEYS
    if unknown:
        problems.append(f"{where}: unknown keys {sorted(unknown)} (seeds come from `seeds`)")
    try:
        kwargs = {k: block[k] for k in CEM_KEYS & set(block)}
        if "init_std" in kwargs and isinstance(kwargs["init_std"], list):
            kwargs["init_std"] = tuple(kwargs["init_std"])
        return CemConfig(**kwargs)
    except (ConfigurationError, TypeError) as exc:
        problems.append(f"{where}: {exc}")
        return CemConfig()


def _param_list(value: Any, names: tuple[str, ...], where: str, problems: list[str]) -> tuple[float, ...] | None:
    if isinstance(value, Mapping):
        missing = [n for n in names if n not in value]
        extra = sorted(set(value) - set(names))
        if missing or extra:
            problems.append(f"{where}: expected keys {list(names)}, missing {missing}, unknown {extra}")
            return None
        value = [value[n] for n in names]
    if not isinstance(value, (list, tuple)) or len(value) != len(names):
        problems.append(f"{where}: expected {len(names)} values for {list(names)}")
        return None
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        problems.append(f"{where}: values must be numbers")
        return None


def _axis(value: Any, where: str, problems: list[str]) -> Axis | None:
    if not isinstance(value, Mapping) or set(value) != {"lower", "upper", "n"}:
        problems.append(f"{where} must be a mapping with keys lower, upper, n")
        return None
    try:
        axis = Axis(float(value["lower"]), float(value["upper"]), int(value["n"]))
    except (TypeError, ValueError):
        problems.append(f"{where}: lower and upper must be numbers and n an integer")
        return None
    if axis.n < 1:
        problems.append(f"{where}.n must be >= 1 (the grid must be non-empty)")
    elif axis.upper < axis.lower:
        problems.append(f"{where}: lower exceeds upper")
    return axis


def _sweep(value: Any, env: EnvSpec | None, problems: list[str]) -> SweepSpec | None:
    if not value:
        return None
    if not isinstance(value, Mapping):
        problems.append("sweep must be a mapping")
        return None
    unknown = set(value) - {"kind", "x", "y", "policy", "episodes"}
    if unknown:
        problems.append(f"sweep: unknown keys {sorted(unknown)}")
    kind = value.get("kind")
    if kind not in SWEEP_KINDS:
        problems.append(f"sweep.kind must be one of {SWEEP_KINDS}")
    x = _axis(value.get("x"), "sweep.x", problems)
    y = None
    if "y" in value:
        y = _axis(value["y"], "sweep.y", problems)
    elif kind in ("initial_state", "visitation"):
        problems.append(f"sweep.y is required for a {kind} sweep")
    policy = value.get("policy", "fisher")
    if policy not in SWEEP_POLICIES:
        problems.append(f"sweep.policy must be one of {SWEEP_POLICIES}")
    episodes = value.get("episodes", 20)
    if not isinstance(episodes, int) or episodes < 1:
        problems.append("sweep.episodes must be an integer >= 1")
    if env is not None:
        if kind in ("initial_state", "visitation") and env.family != "ball":
            problems.append(f"a {kind} sweep needs a ball environment, not {env.env_id}")
        if kind == "theta_star" and y is not None and env.d < 2:
            problems.append("sweep.y needs a second physics parameter")
    if x is None or (kind != "theta_star" and y is None):
        return None
    return SweepSpec(kind, x, y, policy, episodes if isinstance(episodes, int) else 20)


def _seeds(value: Any, problems: list[str]) -> tuple[int, ...]:
    if isinstance(value, Mapping):
        if set(value) - {"count", "start"}:
            problems.append("seeds: mapping form takes only `count` and `start`")
            return ()
        start, count = int(value.get("start", 0)), int(value.get("count", 0))
        seeds = tuple(range(start, start + count))
    elif isinstance(value, (list, tuple)):
        seeds = tuple(int(s) for s in value)
    else:
        seeds = (int(value),) if value is not None else ()
    if not seeds:
        problems.append("seeds: at least one seed is required")
    if any(s < 0 or s >= 2**64 for s in seeds):
        problems.append("seeds must be 64-bit non-negative integers")
    if len(set(seeds)) != len(seeds):
        problems.append("seeds must be unique")
    return seeds


def parse_config(data: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a config mapping; raises :class:`ConfigErrors` listing every problem."""
    problems: list[str] = []
    if not isinstance(data, Mapping):
        raise ConfigErrors(["config must be a mapping"])
    unknown = set(data) - TOP_LEVEL_KEYS
    if unknown:
        problems.append(f"unknown top-level keys {sorted(unknown)}")

    env_id = data.get("env_id")
    overrides = data.get("env_overrides") or {}
    env = None
    try:
        env = make_env(env_id, **overrides)
    except ConfigurationError as exc:
        problems.append(f"env: {exc}")
    except TypeError as exc:
        problems.append(f"env_overrides: {exc}")
    if env is None:
        raise ConfigErrors(problems)
    names = env.param_names

    prior_block = data.get("prior") or {}
    prior = None
    if set(prior_block) - {"mean", "std", "lower", "upper"}:
        problems.append("prior: allowed keys are mean, std, lower, upper")
    mean = _param_list(prior_block.get("mean"), names, "prior.mean", problems)
    std = _param_list(prior_block.get("std"), names, "prior.std", problems)
    lower = _param_list(prior_block.get("lower", list(env.param_lower)), names, "prior.lower", problems)
    upper = _param_list(prior_block.get("upper", list(env.param_upper)), names, "prior.upper", problems)
    if None not in (mean, std, lower, upper):
        try:
            prior = ParamDistribution(mean, std, lower, upper)
        except ConfigurationError as exc:
            problems.append(f"prior: {exc}")
        if prior is not None and (
            np.any(np.array(lower) < env.param_lower) or np.any(np.array(upper) > env.param_upper)
        ):
            problems.append("prior bounds must lie inside the environment's parameter bounds")

    mode = data.get("theta_star_mode", "fixed")
    if mode not in THETA_STAR_MODES:
        problems.append(f"theta_star_mode must be one of {THETA_STAR_MODES}")
    theta_star: tuple[float, ...] = ()
    theta_range = None
    if mode == "fixed":
        ts = _param_list(data.get("theta_star"), names, "theta_star", problems)
        if ts is not None:
            theta_star = ts
            if prior is not None and (
                np.any(np.array(ts) < prior.lower) or np.any(np.array(ts) > prior.upper)
            ):
                problems.append("theta_star must lie within the prior bounds")
    else:
        rng_block = data.get("theta_star_range") or {}
        lo = _param_list(rng_block.get("lower"), names, "theta_star_range.lower", problems)
        hi = _param_list(rng_block.get("upper"), names, "theta_star_range.upper", problems)
        if lo is not None and hi is not None:
            theta_range = (lo, hi)
            if prior is not None and (
                np.any(np.array(lo) < prior.lower) or np.any(np.array(hi) > prior.upper)
            ):
                problems.append("theta_star_range must lie within the prior bounds")
            if np.any(np.array(lo) > np.array(hi)):
                problems.append("theta_star_range lower exceeds upper")

    exploration = data.get("exploration", "fisher")
    if exploration not in EXPLORATION_MODES:
        problems.append(f"exploration must be one of {EXPLORATION_MODES}")
    kinds = data.get("policy_kinds") or {}
    if set(kinds) - {"explore", "task"}:
        problems.append("policy_kinds: allowed keys are explore, task")
    explore_kind = kinds.get("explore", "open_loop")
    task_kind = kinds.get("task", "open_loop")
    for k in (explore_kind, task_kind):
        if k not in POLICY_KINDS:
            problems.append(f"policy kind {k!r} not in {POLICY_KINDS}")

    cem_block = data.get("cem") or {}
    if set(cem_block) - {"explore", "sysid", "task"}:
        problems.append("cem: allowed blocks are explore, sysid, task")
    cem_explore = _cem(cem_block.get("explore"), "cem.explore", problems)
    cem_sysid = _cem(cem_block.get("sysid"), "cem.sysid", problems)
    cem_task = _cem(cem_block.get("task"), "cem.task", problems)

    fd_block = data.get("fd") or {}
    if set(fd_block) - {"step", "relative"}:
        problems.append("fd: allowed keys are step, relative")
    try:
        fd = FdConfig(**fd_block)
    except (ConfigurationError, TypeError) as exc:
        problems.append(f"fd: {exc}")
        fd = FdConfig()

    ridge = float(data.get("ridge", 1e-3))
    if not ridge > 0:
        problems.append("ridge must be positive")
    info_scale = data.get("info_scale")
    if info_scale is not None and not float(info_scale) > 0:
        problems.append("info_scale must be positive")
    if env.sigma_w == 0 and info_scale is None and exploration == "fisher":
        problems.append("sigma_w is 0: fisher exploration needs an explicit info_scale")

    ints = {}
    for key, default, minimum in (
        ("n_rollouts", 8, 1),
        ("n_noise_draws", 1, 0),
        ("dr_samples", 16, 1),
        ("eval_episodes", 20, 1),
        ("objective_rollouts", 32, 1),
    ):
        ints[key] = int(data.get(key, default))
        if ints[key] < minimum:
            problems.append(f"{key} must be >= {minimum}")

    baselines = tuple(data.get("baselines", BASELINES))
    if set(baselines) - set(BASELINES):
        problems.append(f"baselines must be drawn from {BASELINES}")

    seeds = _seeds(data.get("seeds", [0]), problems)

    success = dict(data.get("success") or {})
    task_extras = dict(env.extras)
    if env.task_env_id and env.task_env_id != env.env_id:
        task_extras = dict(make_env(env.task_env_id).extras)
    for key, value in success.items():
        if key not in task_extras:
            problems.append(f"success: {key!r} is not a threshold of this task")
        elif not isinstance(value, (int, float)):
            problems.append(f"success.{key} must be a number")

    sweep = _sweep(data.get("sweep"), env, problems)

    if problems:
        raise ConfigErrors(problems)
    return ExperimentConfig(
        env_id=env_id,
        env_overrides=dict(overrides),
        theta_star=theta_star,
        theta_star_mode=mode,
        theta_star_range=theta_range,
        prior=prior,
        exploration=exploration,
        explore_kind=explore_kind,
        task_kind=task_kind,
        cem_explore=cem_explore,
        cem_sysid=cem_sysid,
        cem_task=cem_task,
        fd=fd,
        ridge=ridge,
        info_scale=None if info_scale is None else float(info_scale),
        baselines=baselines,
        seeds=seeds,
        success=success,
        preregistered=dict(data.get("preregistered") or {}),
        output_dir=str(data.get("output_dir", "runs/default")),
        sweep=sweep,
        raw=dict(data),
        **ints,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    with open(path) as f:
        data = yaml.safe_load(f)
    return parse_config(data or {})
