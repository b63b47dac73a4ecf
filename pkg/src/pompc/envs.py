"""Analytic continuous-control environments with exact documented dynamics.

Both environments are pure functions of (state, action), use action box
[-1, 1]^dim, emit bounded observations suited to fixed affine
normalization, and truncate at the episode length (done is a time
limit, never a failure state).

Pendulum swing-up (angle measured from upright):
    torque        u = 2 * clip(a, -1, 1)
    acceleration  th_dd = (3 g / (2 l)) sin(th) + (3 / (m l^2)) u
    integration   semi-implicit Euler, dt = 0.05:
                  th_d' = clip(th_d + th_dd dt, -8, 8); th' = th + th_d' dt
    reward        -(wrap(th)^2 + 0.1 th_d^2 + 0.001 u^2)  at the pre-step
                  state, wrap into [-pi, pi)
    observation   (cos th, sin th, th_d / 8)
    reset         th ~ U[-pi, pi), th_d ~ U[-1, 1)
    constants     g = 10, m = l = 1

Point-mass (2-D double integrator, goal at the origin):
    velocity      v' = clip(v + a dt, -2, 2), dt = 0.05
    position      p' = clip(p + v' dt, -2, 2)
    reward        -(||p - goal||^2 + 0.01 ||a||^2)  at the pre-step state
    observation   (p / 2, v / 2, goal / 2)
    reset         p ~ U[-1, 1]^2, v = 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    action_dim: int
    episode_len: int
    dt: float
    reward_range: tuple


PENDULUM = EnvSpec("pendulum", 3, 1, 200, 0.05,
                   (-(np.pi ** 2 + 0.1 * 64.0 + 0.001 * 4.0), 0.0))
POINTMASS = EnvSpec("pointmass", 6, 2, 200, 0.05, (-(8.0 + 0.01 * 2.0), 0.0))

ENVS = {spec.name: spec for spec in (PENDULUM, POINTMASS)}

_G, _M, _L = 10.0, 1.0, 1.0
_MAX_SPEED = 8.0
_TORQUE_SCALE = 2.0
_PM_VEL = 2.0
_PM_POS = 2.0


@dataclass
class EnvState:
    phys: np.ndarray
    t: int = 0


def get_spec(name):
    try:
        return ENVS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; "
                         f"choose from {sorted(ENVS)}") from None


def wrap_angle(theta):
    """Map angles into [-pi, pi)."""
    return (theta + np.pi) % (2.0 * np.pi) - np.pi


def reset(spec, rng):
    """Deterministic-in-rng initial state."""
    if spec.name == "pendulum":
        theta = rng.uniform(-np.pi, np.pi)
        theta_dot = rng.uniform(-1.0, 1.0)
        return EnvState(np.array([theta, theta_dot]), 0)
    if spec.name == "pointmass":
        pos = rng.uniform(-1.0, 1.0, size=2)
        return EnvState(np.concatenate([pos, np.zeros(2)]), 0)
    raise ValueError(spec.name)


def step(spec, state, action):
    """Pure transition: (next_state, reward, done)."""
    if not np.isfinite(state.phys).all():
        raise FloatingPointError("non-finite environment state")
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    if spec.name == "pendulum":
        theta, theta_dot = state.phys
        u = _TORQUE_SCALE * a[0]
        reward = -(wrap_angle(theta) ** 2 + 0.1 * theta_dot ** 2
                   + 0.001 * u ** 2)
        theta_acc = (3.0 * _G / (2.0 * _L)) * np.sin(theta) \
            + (3.0 / (_M * _L ** 2)) * u
        new_dot = np.clip(theta_dot + theta_acc * spec.dt,
                          -_MAX_SPEED, _MAX_SPEED)
        new_theta = theta + new_dot * spec.dt
        phys = np.array([new_theta, new_dot])
    elif spec.name == "pointmass":
        pos, vel = state.phys[:2], state.phys[2:]
        reward = -(float(np.sum(pos ** 2)) + 0.01 * float(np.sum(a ** 2)))
        new_vel = np.clip(vel + a * spec.dt, -_PM_VEL, _PM_VEL)
        new_pos = np.clip(pos + new_vel * spec.dt, -_PM_POS, _PM_POS)
        phys = np.concatenate([new_pos, new_vel])
    else:
        raise ValueError(spec.name)
    t = state.t + 1
    return EnvState(phys, t), float(reward), t >= spec.episode_len


def observe(spec, state):
    """Bounded observation vector for the encoder."""
    if spec.name == "pendulum":
        theta, theta_dot = state.phys
        return np.array([np.cos(theta), np.sin(theta),
                         theta_dot / _MAX_SPEED])
    if spec.name == "pointmass":
        pos, vel = state.phys[:2], state.phys[2:]
        goal = np.zeros(2)
        return np.concatenate([pos / _PM_POS, vel / _PM_VEL,
                               goal / _PM_POS])
    raise ValueError(spec.name)
