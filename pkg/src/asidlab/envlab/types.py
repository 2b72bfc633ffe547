"""Domain records: parameters, trajectories, environment specs, priors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import ConfigurationError


def _floats(xs: Sequence[float] | np.ndarray) -> tuple[float, ...]:
    return tuple(float(x) for x in np.asarray(xs, dtype=float).ravel())


@dataclass(frozen=True)
class ParamVector:
    """Physics parameters with names and box bounds."""

    values: tuple[float, ...]
    names: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _floats(self.values))
        object.__setattr__(self, "lower", _floats(self.lower))
        object.__setattr__(self, "upper", _floats(self.upper))
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        d = len(self.values)
        if d < 1:
            raise ConfigurationError("ParamVector needs at least one parameter")
        if not (len(self.names) == len(self.lower) == len(self.upper) == d):
            raise ConfigurationError("ParamVector fields have inconsistent lengths")
        if len(set(self.names)) != d:
            raise ConfigurationError(f"duplicate parameter names in {self.names}")
        for name, v, lo, hi in zip(self.names, self.values, self.lower, self.upper):
            if not lo <= v <= hi:
                raise ConfigurationError(f"parameter {name}={v} outside [{lo}, {hi}]")

    @property
    def d(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.values)

    def with_values(self, values: Sequence[float] | np.ndarray, clip: bool = False) -> ParamVector:
        values = np.asarray(values, dtype=float).ravel()
        if clip:
            values = np.clip(values, self.lower, self.upper)
        return replace(self, values=_floats(values))

    def to_dict(self) -> dict[str, Any]:
        return {
            "names": list(self.names),
            "values": list(self.values),
            "lower": list(self.lower),
            "upper": list(self.upper),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ParamVector:
        return cls(
            values=data["values"], names=data["names"], lower=data["lower"], upper=data["upper"]
        )


@dataclass(frozen=True)
class ParamDistribution:
    """Diagonal Gaussian over parameters, truncated to [lower, upper]."""

    mean: tuple[float, ...]
    std: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        for name in ("mean", "std", "lower", "upper"):
            object.__setattr__(self, name, _floats(getattr(self, name)))
        d = len(self.mean)
        if d < 1 or not (len(self.std) == len(self.lower) == len(self.upper) == d):
            raise ConfigurationError("ParamDistribution fields have inconsistent lengths")
        for i in range(d):
            if not self.std[i] > 0:
                raise ConfigurationError(f"std[{i}] must be positive, got {self.std[i]}")
            if not self.lower[i] < self.upper[i]:
                raise ConfigurationError(f"empty truncation interval at index {i}")

    @property
    def d(self) -> int:
        return len(self.mean)

    @classmethod
    def degenerate(cls, theta: ParamVector, std: float = 1e-12) -> ParamDistribution:
        """A distribution concentrated on ``theta`` (std floored to stay valid)."""
        return cls(mean=theta.values, std=(std,) * theta.d, lower=theta.lower, upper=theta.upper)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean": list(self.mean),
            "std": list(self.std),
            "lower": list(self.lower),
            "upper": list(self.upper),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ParamDistribution:
        return cls(mean=data["mean"], std=data["std"], lower=data["lower"], upper=data["upper"])


@dataclass(frozen=True)
class EnvSpec:
    """Immutable description of one parametric dynamical system.

    ``family`` selects the dynamics implementation; ``env_id`` is the catalog
    name. Environment-specific constants (time step, restitution, goal,
    success thresholds) live in ``extras``.
    """

    env_id: str
    family: str
    n_s: int
    n_a: int
    horizon: int
    sigma_w: float
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]
    init_state: tuple[float, ...]
    param_names: tuple[str, ...]
    param_lower: tuple[float, ...]
    param_upper: tuple[float, ...]
    task_env_id: str | None = None
    init_state_sampler_id: str = "fixed"
    extras: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("action_low", "action_high", "init_state", "param_lower", "param_upper"):
            object.__setattr__(self, name, _floats(getattr(self, name)))
        object.__setattr__(self, "param_names", tuple(self.param_names))
        extras = {k: _frozen(v) for k, v in dict(self.extras).items()}
        object.__setattr__(self, "extras", MappingProxyType(extras))
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {self.horizon}")
        if not (self.sigma_w >= 0 and math.isfinite(self.sigma_w)):
            raise ConfigurationError(f"sigma_w must be finite and >= 0, got {self.sigma_w}")
        if len(self.action_low) != self.n_a or len(self.action_high) != self.n_a:
            raise ConfigurationError("action bounds do not match n_a")
        if any(lo >= hi for lo, hi in zip(self.action_low, self.action_high)):
            raise ConfigurationError("action_low must be < action_high component-wise")
        if len(self.init_state) != self.n_s:
            raise ConfigurationError("init_state does not match n_s")
        if not (len(self.param_names) == len(self.param_lower) == len(self.param_upper)):
            raise ConfigurationError("parameter metadata lengths differ")

    @property
    def d(self) -> int:
        return len(self.param_names)

    @property
    def dt(self) -> float:
        return float(self.extras.get("dt", 1.0))

    def params(self, values: Sequence[float] | np.ndarray) -> ParamVector:
        return ParamVector(values, self.param_names, self.param_lower, self.param_upper)

    def replace(self, **changes: Any) -> EnvSpec:
        extras = changes.pop("extras", None)
        if extras is not None:
            changes["extras"] = {**self.extras, **extras}
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "env_id": self.env_id,
            "family": self.family,
            "n_s": self.n_s,
            "n_a": self.n_a,
            "horizon": self.horizon,
            "sigma_w": self.sigma_w,
            "action_low": list(self.action_low),
            "action_high": list(self.action_high),
            "init_state": list(self.init_state),
            "param_names": list(self.param_names),
            "param_lower": list(self.param_lower),
            "param_upper": list(self.param_upper),
            "task_env_id": self.task_env_id,
            "init_state_sampler_id": self.init_state_sampler_id,
            "extras": {k: _plain(v) for k, v in sorted(self.extras.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EnvSpec:
        return cls(**data)


def _frozen(value: Any) -> Any:
    """Hashable-style normal form for extras: sequences become tuples."""
    if isinstance(value, (tuple, list, np.ndarray)):
        return tuple(_frozen(v) for v in value)
    if isinstance(value, Mapping):
        return {k: _frozen(v) for k, v in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def _plain(value: Any) -> Any:
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, Mapping):
        return {k: _plain(v) for k, v in sorted(value.items())}
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States s_1..s_{H+1} and actions a_1..a_H of one episode."""

    states: np.ndarray
    actions: np.ndarray
    env_id: str
    seed: int

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        actions = np.array(self.actions, dtype=float)
        if states.ndim != 2 or actions.ndim != 2:
            raise ConfigurationError("states and actions must be 2-D arrays")
        if states.shape[0] != actions.shape[0] + 1:
            raise ConfigurationError(
                f"expected H+1 states for H actions, got {states.shape[0]} and {actions.shape[0]}"
            )
        if not np.all(np.isfinite(states)):
            raise ConfigurationError("trajectory contains non-finite states")
        states.flags.writeable = False
        actions.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.env_id == other.env_id
            and self.seed == other.seed
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.actions, other.actions)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": 1,
            "env_id": self.env_id,
            "seed": int(self.seed),
            "horizon": self.horizon,
            "states": self.states.tolist(),
            "actions": self.actions.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Trajectory:
        if data.get("version") != 1:
            raise ConfigurationError(f"unsupported trajectory record version {data.get('version')}")
        traj = cls(
            states=np.array(data["states"], dtype=float),
            actions=np.array(data["actions"], dtype=float),
            env_id=data["env_id"],
            seed=int(data["seed"]),
        )
        if traj.horizon != data["horizon"]:
            raise ConfigurationError("trajectory record horizon does not match its actions")
        return traj
