"""Named environments addressable by env_id."""

from __future__ import annotations

from typing import Any, Callable

import numpy as np

from ..errors import ConfigurationError
from .types import EnvSpec


def _linear1d() -> EnvSpec:
    return EnvSpec(
        env_id="linear1d",
        family="linear",
        n_s=1,
        n_a=1,
        horizon=3,
        sigma_w=0.1,
        action_low=(-1.0,),
        action_high=(1.0,),
        init_state=(0.0,),
        param_names=("theta",),
        param_lower=(0.1,),
        param_upper=(3.0,),
        extras={"dt": 1.0, "goal": 3.0, "success_tolerance": 0.05},
    )


_BALL_COMMON = {
    "dt": 0.05,
    "gravity": 9.81,
    "restitution": 0.8,
    "contact_radius": 0.08,
    "task_rollouts": 8,
    # process noise enters positions only; velocities stay exactly zero at rest
    "noise_dims": (0, 1, 2, 3),
}


def _pointmass_friction() -> EnvSpec:
    ball = np.array([0.40, 0.17])
    heading = ball / np.linalg.norm(ball)
    goal = ball + 0.30 * heading
    return EnvSpec(
        env_id="pointmass-friction",
        family="ball",
        n_s=6,
        n_a=2,
        horizon=40,
        sigma_w=0.001,
        action_low=(-1.0, -1.0),
        action_high=(1.0, 1.0),
        init_state=(0.0, 0.0, *ball, 0.0, 0.0),
        param_names=("mu",),
        param_lower=(0.2,),
        param_upper=(0.6,),
        extras={**_BALL_COMMON, "goal": tuple(goal), "goal_radius": 0.04, "striker_reach": 0.5},
    )


def _multi_region() -> EnvSpec:
    return EnvSpec(
        env_id="multi-region",
        family="ball",
        n_s=6,
        n_a=2,
        horizon=60,
        sigma_w=0.001,
        action_low=(-1.0, -1.0),
        action_high=(1.0, 1.0),
        init_state=(0.0, 0.0, 0.30, 0.10, 0.0, 0.0),
        param_names=("mu1", "mu2", "mu3"),
        param_lower=(0.1, 0.1, 0.1),
        param_upper=(0.4, 0.4, 0.4),
        extras={
            **_BALL_COMMON,
            "patch_edges": (0.55, 0.85),
            "striker_reach": 0.45,
            "goal": (1.05, 0.25),
            "goal_radius": 0.05,
        },
    )


def _rod_pivot() -> EnvSpec:
    return EnvSpec(
        env_id="rod-pivot",
        family="rod_push",
        n_s=2,
        n_a=2,
        horizon=2,
        sigma_w=0.05,
        action_low=(-1.0, -1.0),
        action_high=(1.0, 1.0),
        init_state=(0.0, 0.0),
        param_names=("com_offset",),
        param_lower=(-0.5,),
        param_upper=(0.5,),
        task_env_id="rod-place",
        extras={"dt": 0.1, "mass": 1.0, "length": 1.0, "normalize_discrepancy": True},
    )


def _rod_place() -> EnvSpec:
    return EnvSpec(
        env_id="rod-place",
        family="rod_place",
        n_s=1,
        n_a=1,
        horizon=1,
        sigma_w=0.0,
        action_low=(-0.5,),
        action_high=(0.5,),
        init_state=(0.0,),
        param_names=("com_offset",),
        param_lower=(-0.5,),
        param_upper=(0.5,),
        extras={"dt": 1.0, "tilt_gain": 60.0, "success_tilt_deg": 2.0},
    )


CATALOG: dict[str, Callable[[], EnvSpec]] = {
    "linear1d": _linear1d,
    "pointmass-friction": _pointmass_friction,
    "multi-region": _multi_region,
    "rod-pivot": _rod_pivot,
    "rod-place": _rod_place,
}


def make_env(env_id: str, **overrides: Any) -> EnvSpec:
    """Build a catalog environment, optionally overriding fields.

    ``extras`` overrides are merged into the defaults rather than replacing
    them.
    """
    try:
        factory = CATALOG[env_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown env_id {env_id!r}; known: {sorted(CATALOG)}"
        ) from None
    env = factory()
    if overrides:
        unknown = set(overrides) - set(env.to_dict())
        if unknown:
            raise ConfigurationError(f"unknown EnvSpec fields {sorted(unknown)}")
        env = env.replace(**overrides)
    return env


def task_env(env: EnvSpec) -> EnvSpec:
    """The environment the downstream task is solved in.

    For most systems this is ``env`` itself; the rod is pushed to explore but
    placed on a ledge for the task. Parameter bounds follow ``env`` and
    ``env.extras["task_extras"]`` overrides the task env's extras.
    """
    if env.task_env_id is None or env.task_env_id == env.env_id:
        return env
    return make_env(env.task_env_id).replace(
        param_names=env.param_names,
        param_lower=env.param_lower,
        param_upper=env.param_upper,
        extras=dict(env.extras.get("task_extras", {})),
    )
