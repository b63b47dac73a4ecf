"""MPPI trajectory optimizer over a learned latent model.

Each iteration mixes Gaussian search samples around the current plan
mean with rollouts of the learned sampling policy, scores every
candidate by its H-step estimated return (discounted predicted rewards
plus a bootstrap ensemble value at the horizon), selects the top-K
elites, and refits the plan mean and per-step std from exponentially
reweighted elite deviations.

The planner only evaluates models; it never differentiates them. It is
deterministic given (inputs, rng): all randomness comes from ``rng`` in
a fixed draw order per iteration —

    1. search noise, shape (population - policy_samples, H, action_dim)
    2. policy rollout noise, one (policy_samples, action_dim) draw per
       step t = 0..H-1
    3. bootstrap-continuation noise, shape (policy_samples, action_dim)

followed by one final (action_dim,) draw for the executed action when
not in deterministic mode. Oracle reimplementations that follow this
order on the same seed reproduce plan() exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dists


@dataclass
class PlanConfig:
    """Planner hyperparameters; see validate() for the invariants."""

    horizon: int = 3
    iterations: int = 8
    population: int = 512
    policy_samples: int = 24
    elites: int = 64
    temperature: float = 1.0
    sigma_min: float = 0.05
    sigma_max: float = 2.0
    discount: float = 0.99

    def validate(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 <= self.policy_samples < self.population:
            raise ValueError("policy_samples must be in [0, population)")
        if not 1 <= self.elites <= self.population:
            raise ValueError("elites must be in [1, population]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if not 0.0 < self.sigma_min <= self.sigma_max:
            raise ValueError("need 0 < sigma_min <= sigma_max")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        return self


@dataclass
class PlanResult:
    """Executed action plus the full refit plan (the planning policy)."""

    action: np.ndarray        # (action_dim,)
    mean: np.ndarray          # (H, action_dim)
    std: np.ndarray           # (H, action_dim)
    fallback: bool = False
    elite_score_mean: float = field(default=np.nan)
    elite_score_max: float = field(default=np.nan)


def shift_warm_start(mean):
    """1-step-shifted previous plan mean; the vacated last step is zeroed."""
    out = np.zeros_like(mean)
    out[:-1] = mean[1:]
    return out


def select_elites(scores, k):
    """Indices of the top-k scores; ties break stably by trajectory index."""
    return np.argsort(-np.asarray(scores), kind="stable")[:k]


def mppi_weights(scores, beta):
    """Normalized exp((score - max score) / beta); invariant to score shifts."""
    scores = np.asarray(scores, dtype=np.float64)
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    w = np.exp((scores - scores.max()) / beta)
    return w / w.sum()


def mppi_refit(deviations, weights, prev_mean, sigma_min, sigma_max):
    """Weighted-moment update of the plan distribution.

    Args:
        deviations: (K, H, action_dim) elite actions minus the pre-update
            mean.
        weights: (K,) normalized elite weights.
        prev_mean: (H, action_dim) pre-update mean.
        sigma_min / sigma_max: clamp range for the refit std.

    Returns:
        (mean, std): mean = prev_mean + sum_i w_i dev_i; std is the
        weighted RMS of the deviations, clamped.
    """
    w = weights[:, None, None]
    mean = prev_mean + np.sum(w * deviations, axis=0)
    std = np.sqrt(np.sum(w * deviations ** 2, axis=0))
    return mean, np.clip(std, sigma_min, sigma_max)


def _rollout(z0, actions, gamma, model):
    """Discounted predicted-reward sums and final latents for a batch."""
    n, horizon, _ = actions.shape
    z = np.broadcast_to(z0, (n, z0.shape[-1])).copy()
    total = np.zeros(n)
    for t in range(horizon):
        total += gamma ** t * model.reward(z, actions[:, t])
        z = model.dynamics(z, actions[:, t])
    return total, z


def hstep_return(z0, action_seq, gamma, model, q_fn):
    """Score one plan: H rewards discounted, plus the bootstrap value.

    action_seq has H+1 rows; the last is the bootstrap action evaluated
    by the ensemble at the terminal latent. Non-finite model outputs
    disqualify the plan (score -inf).
    """
    action_seq = np.asarray(action_seq, dtype=np.float64)
    horizon = action_seq.shape[0] - 1
    total, z = _rollout(np.asarray(z0, dtype=np.float64)[None, :],
                        action_seq[None, :-1], gamma, model)
    total += gamma ** horizon * q_fn(z, action_seq[None, -1])
    return float(np.where(np.isfinite(total), total, -np.inf)[0])


def plan(z0, warm_mean, cfg, policy_dist, model, q_fn, rng,
         deterministic=False):
    """Run MPPI from latent z0 and return the refit planning policy.

    Args:
        z0: (latent_dim,) start latent.
        warm_mean: (H, action_dim) initial mean (typically the 1-step
            shifted previous plan) or None for zeros.
        cfg: PlanConfig.
        policy_dist: callable latents -> DiagGaussian (the learned
            sampling policy; read-only).
        model: object with batched ``dynamics(z, a)``, ``reward(z, a)``,
            and an ``action_dim`` attribute.
        q_fn: callable (z, a) -> bootstrap ensemble values (mean-reduced).
        rng: numpy Generator; draw order documented in the module header.
        deterministic: execute the refit mean instead of sampling.

    Returns:
        PlanResult. The executed action is sampled from the final
        N(mean[0], std[0]^2) and clipped to the action box, or mean[0]
        under ``deterministic``. If every candidate in an iteration is
        disqualified, the sampling policy's mean action is returned with
        ``fallback=True``.
    """
    cfg.validate()
    z0 = np.asarray(z0, dtype=np.float64)
    horizon, n_pi, pop = cfg.horizon, cfg.policy_samples, cfg.population
    adim = model.action_dim
    mean = np.zeros((horizon, adim)) if warm_mean is None \
        else np.array(warm_mean, dtype=np.float64)
    std = np.full((horizon, adim), cfg.sigma_max)

    elite_scores = None
    for _ in range(cfg.iterations):
        eps = rng.standard_normal((pop - n_pi, horizon, adim))
        actions = np.empty((pop, horizon, adim))
        actions[:pop - n_pi] = np.clip(mean + std * eps, -1.0, 1.0)
        if n_pi > 0:
            z = np.broadcast_to(z0, (n_pi, z0.shape[-1])).copy()
            for t in range(horizon):
                d = policy_dist(z)
                a_t = dists.sample(d, rng.standard_normal((n_pi, adim)))
                actions[pop - n_pi:, t] = np.clip(a_t, -1.0, 1.0)
                z = model.dynamics(z, actions[pop - n_pi:, t])

        # Bootstrap actions: policy mean for search samples, a sampled
        # continuation for policy samples (scored at the common z_H).
        total, z = _rollout(z0, actions, cfg.discount, model)
        d_h = policy_dist(z)
        boot = np.clip(d_h.mean.copy(), -1.0, 1.0)
        if n_pi > 0:
            tail = dists.DiagGaussian(d_h.mean[pop - n_pi:],
                                      d_h.std[pop - n_pi:])
            boot[pop - n_pi:] = np.clip(
                dists.sample(tail, rng.standard_normal((n_pi, adim))),
                -1.0, 1.0)
        total += cfg.discount ** horizon * q_fn(z, boot)
        scores = np.where(np.isfinite(total), total, -np.inf)

        if not np.isfinite(scores).any():
            d0 = policy_dist(z0[None, :])
            action = np.clip(d0.mean[0].copy(), -1.0, 1.0)
            return PlanResult(action, mean, std, fallback=True)

        elite_idx = select_elites(scores, cfg.elites)
        elite_scores = scores[elite_idx]
        weights = mppi_weights(elite_scores, cfg.temperature)
        deviations = actions[elite_idx] - mean[None]
        mean, std = mppi_refit(deviations, weights, mean,
                               cfg.sigma_min, cfg.sigma_max)

    if deterministic:
        action = mean[0].copy()
    else:
        action = mean[0] + std[0] * rng.standard_normal(adim)
    action = np.clip(action, -1.0, 1.0)
    finite = elite_scores[np.isfinite(elite_scores)]
    return PlanResult(
        action, mean, std, fallback=False,
        elite_score_mean=float(finite.mean()) if finite.size else np.nan,
        elite_score_max=float(finite.max()) if finite.size else np.nan)
