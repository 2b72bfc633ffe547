"""Open-loop and linear state-feedback policies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Mapping

import numpy as np

from .errors import ConfigurationError

if TYPE_CHECKING:
    from .envlab.types import EnvSpec

POLICY_KINDS = ("open_loop", "linear_feedback")
POLICY_RECORD_VERSION = 1


def n_params(kind: str, n_s: int, n_a: int, horizon: int) -> int:
    if kind == "open_loop":
        return horizon * n_a
    if kind == "linear_feedback":
        return n_a * n_s + n_a
    raise ConfigurationError(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")


def batch_actions(kind, params, h, S, low, high):
    """Actions for a batch of policies at step ``h``.

    ``params`` is (B, p) and ``S`` is (B, n_s); the result is clipped to the
    action box.
    """
    n_a = low.shape[0]
    if kind == "open_loop":
        A = params[:, h * n_a : (h + 1) * n_a]
    else:
        n_s = S.shape[1]
        K = params[:, : n_a * n_s].reshape(-1, n_a, n_s)
        A = np.einsum("bij,bj->bi", K, S) + params[:, n_a * n_s :]
    return np.clip(A, low, high)


@dataclass(frozen=True, eq=False)
class Policy:
    """A controller for one environment.

    ``open_loop`` stores H*n_a action entries, step-major. ``linear_feedback``
    stores the n_a x n_s gain matrix row-major followed by the n_a bias, and
    acts as ``clip(K s + b)``.
    """

    kind: str
    n_s: int
    n_a: int
    horizon: int
    params: np.ndarray
    env_id: str

    def __post_init__(self):
        params = np.array(self.params, dtype=float).ravel()
        expected = n_params(self.kind, self.n_s, self.n_a, self.horizon)
        if params.shape[0] != expected:
            raise ConfigurationError(
                f"{self.kind} policy for n_s={self.n_s}, n_a={self.n_a}, H={self.horizon} "
                f"needs {expected} parameters, got {params.shape[0]}"
            )
        params.flags.writeable = False
        object.__setattr__(self, "params", params)

    @classmethod
    def for_env(cls, env: EnvSpec, kind: str, params) -> Policy:
        return cls(kind, env.n_s, env.n_a, env.horizon, params, env.env_id)

    @classmethod
    def zeros(cls, env: EnvSpec, kind: str) -> Policy:
        return cls.for_env(env, kind, np.zeros(n_params(kind, env.n_s, env.n_a, env.horizon)))

    @property
    def n_params(self) -> int:
        return self.params.shape[0]

    def check_env(self, env: EnvSpec) -> None:
        if (self.n_s, self.n_a) != (env.n_s, env.n_a) or (
            self.kind == "open_loop" and self.horizon < env.horizon
        ):
            raise ConfigurationError(
                f"policy (n_s={self.n_s}, n_a={self.n_a}, H={self.horizon}) does not fit "
                f"env {env.env_id} (n_s={env.n_s}, n_a={env.n_a}, H={env.horizon})"
            )

    def act(self, h: int, s, env: EnvSpec) -> np.ndarray:
        S = np.asarray(s, dtype=float).reshape(1, -1)
        low, high = np.array(env.action_low), np.array(env.action_high)
        return batch_actions(self.kind, self.params[None, :], h, S, low, high)[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Policy):
            return NotImplemented
        return (
            (self.kind, self.n_s, self.n_a, self.horizon, self.env_id)
            == (other.kind, other.n_s, other.n_a, other.horizon, other.env_id)
            and np.array_equal(self.params, other.params)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": POLICY_RECORD_VERSION,
            "kind": self.kind,
            "env_id": self.env_id,
            "n_s": self.n_s,
            "n_a": self.n_a,
            "horizon": self.horizon,
            "params": self.params.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Policy:
        if data.get("version") != POLICY_RECORD_VERSION:
            raise ConfigurationError(f"unsupported policy record version {data.get('version')}")
        return cls(
            kind=data["kind"],
            n_s=int(data["n_s"]),
            n_a=int(data["n_a"]),
            horizon=int(data["horizon"]),
            params=np.array(data["params"], dtype=float),
            env_id=data["env_id"],
        )
