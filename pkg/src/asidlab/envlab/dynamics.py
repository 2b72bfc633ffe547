"""Nominal dynamics f_theta(s, a) for each environment family.

Every function here is batched: ``S`` is (B, n_s), ``A`` is (B, n_a) and
already clipped, ``Theta`` is (B, d). They return the next nominal state
(B, n_s) without process noise. Task rewards and diagnostics take whole
trajectories, ``states`` (B, H+1, n_s) and ``actions`` (B, H, n_a).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .types import EnvSpec

StepFn = Callable[[EnvSpec, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
TrajFn = Callable[[EnvSpec, np.ndarray, np.ndarray], np.ndarray]


# linear1d: s' = s + theta * a


def linear_step(env, S, A, Theta):
    return S + Theta[:, :1] * A


def linear_terminal_error(env, states, actions):
    return np.abs(states[:, -1, 0] - env.extras["goal"])


def linear_reward(env, states, actions):
    return -linear_terminal_error(env, states, actions) ** 2


def linear_success(env, states, actions):
    return linear_terminal_error(env, states, actions) <= env.extras["success_tolerance"]


# rod-pivot exploration: an impulse J at position x on a free rod whose
# centre of mass sits at offset c. State is (angle, angular velocity).


def rod_inertia(c, mass, length):
    return mass * length**2 / 12.0 + mass * c**2


def rod_push_step(env, S, A, Theta):
    mass, length, dt = env.extras["mass"], env.extras["length"], env.dt
    c = Theta[:, 0]
    impulse, x = A[:, 0], A[:, 1]
    hit = np.abs(x) <= 0.5 * length
    domega = np.where(hit, impulse * (x - c) / rod_inertia(c, mass, length), 0.0)
    omega = S[:, 1] + domega
    phi = S[:, 0] + dt * omega
    return np.stack([phi, omega], axis=1)


def rod_push_reward(env, states, actions):
    return np.zeros(states.shape[0])


# rod-place task: put the rod down on a ledge at position p; it tilts by
# k * (c - p) degrees.


def rod_place_step(env, S, A, Theta):
    return env.extras["tilt_gain"] * (Theta[:, :1] - A[:, :1])


def rod_tilt(env, states, actions):
    return np.abs(states[:, -1, 0])


def rod_place_reward(env, states, actions):
    return -rod_tilt(env, states, actions) ** 2


def rod_place_success(env, states, actions):
    return rod_tilt(env, states, actions) <= env.extras["success_tilt_deg"]


# Ball on a plane struck by a kinematic striker. State is
# (striker x, striker y, ball x, ball y, ball vx, ball vy); the action is the
# striker velocity. The striker is interlocked: it only moves while the ball
# is at rest, so every strike hits a stationary ball, and it cannot leave
# its reach disc, so it cannot chase a ball it has sent away. Rolling friction
# decelerates the ball by mu * g; in the multi-region variant mu depends on
# which patch (split along x at ``patch_edges``) the ball is on.


def ball_patch(env, bx):
    edges = env.extras.get("patch_edges", ())
    if not edges:
        return np.zeros(np.shape(bx), dtype=int)
    return np.searchsorted(np.asarray(edges), bx, side="right")


def ball_step(env, S, A, Theta):
    dt = env.dt
    gravity = env.extras["gravity"]
    restitution = env.extras["restitution"]
    radius = env.extras["contact_radius"]

    striker = S[:, 0:2]
    ball = S[:, 2:4]
    vel = S[:, 4:6]

    at_rest = np.all(vel == 0.0, axis=1)
    u = np.where(at_rest[:, None], A, 0.0)
    striker = striker + dt * u
    # the striker cannot leave a disc of radius ``striker_reach`` around its base
    reach = env.extras.get("striker_reach")
    if reach is not None:
        base = np.asarray(env.extras.get("striker_base", (0.0, 0.0)))
        rel = striker - base
        r = np.linalg.norm(rel, axis=1)
        shrink = np.where(r > reach, reach / np.where(r > 0, r, 1.0), 1.0)
        striker = base + rel * shrink[:, None]

    offset = ball - striker
    dist = np.linalg.norm(offset, axis=1)
    safe = np.where(dist > 0, dist, 1.0)
    normal = offset / safe[:, None]
    approach = np.einsum("bi,bi->b", u - vel, normal)
    contact = (dist < radius) & (dist > 0) & (approach > 0)
    vel = vel + np.where(contact, (1.0 + restitution) * approach, 0.0)[:, None] * normal

    mu = Theta[np.arange(S.shape[0]), ball_patch(env, ball[:, 0])]
    speed = np.linalg.norm(vel, axis=1)
    new_speed = np.maximum(0.0, speed - mu * gravity * dt)
    scale = np.where(speed > 0, new_speed / np.where(speed > 0, speed, 1.0), 0.0)
    vel = vel * scale[:, None]
    ball = ball + dt * vel
    return np.concatenate([striker, ball, vel], axis=1)


def ball_goal_distance(env, states, actions):
    goal = np.asarray(env.extras["goal"])
    return np.linalg.norm(states[:, -1, 2:4] - goal, axis=1)


def ball_reward(env, states, actions):
    return -ball_goal_distance(env, states, actions) ** 2


def ball_success(env, states, actions):
    return ball_goal_distance(env, states, actions) <= env.extras["goal_radius"]


def ball_moved(env, states, actions):
    """True for episodes in which the striker set the ball in motion."""
    return np.any(np.any(states[:, :, 4:6] != 0.0, axis=2), axis=1)


def ball_displacement(env, states, actions):
    return np.linalg.norm(states[:, -1, 2:4] - states[:, 0, 2:4], axis=1)


def ball_patches_visited(env, states, actions):
    """(B, n_patches) boolean: the ball was in patch k at some step."""
    n_patches = len(env.extras.get("patch_edges", ())) + 1
    patch = ball_patch(env, states[:, :, 2])
    return np.stack([np.any(patch == k, axis=1) for k in range(n_patches)], axis=1)


@dataclass(frozen=True)
class Family:
    step: StepFn
    reward: TrajFn
    success: TrajFn | None = None
    metric: TrajFn | None = None
    metric_name: str = "reward"


FAMILIES: dict[str, Family] = {
    "linear": Family(linear_step, linear_reward, linear_success, linear_terminal_error, "terminal_error"),
    "rod_push": Family(rod_push_step, rod_push_reward),
    "rod_place": Family(rod_place_step, rod_place_reward, rod_place_success, rod_tilt, "tilt_deg"),
    "ball": Family(ball_step, ball_reward, ball_success, ball_goal_distance, "goal_distance"),
}
