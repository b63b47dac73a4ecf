"""Adaptive prior policy distilled from stored planner statistics.

The prior approximates the planning policy from replayed (mean, std)
records and anchors the KL-regularized policy update, shielding it from
stale replay mixtures. It trains by reverse KL (mode seeking: the fit
collapses onto planner modes) or forward KL (support covering: the fit
widens to include every stored planning distribution). A third mode,
replay-direct, bypasses the learned prior and uses the stored planner
Gaussians as the anchor directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dists, nnet, policy

REVERSE_KL = "reverse_kl"
FORWARD_KL = "forward_kl"
REPLAY_DIRECT = "replay_direct"
PRIOR_MODES = (REVERSE_KL, FORWARD_KL, REPLAY_DIRECT)


@dataclass
class PriorPolicyParams(policy.GaussianHeadParams):
    """Gaussian head for the adaptive prior (no extra hyperparameters)."""


def init_prior(rng, latent_dim, action_dim, hidden_dim,
               log_std_min=-10.0, log_std_max=2.0, activation="mish"):
    return policy.init_head(rng, latent_dim, action_dim, hidden_dim,
                            cls=PriorPolicyParams, log_std_min=log_std_min,
                            log_std_max=log_std_max, activation=activation)


def prior_forward(p, z):
    """The prior distribution at latent(s) z."""
    return policy.head_forward(p, z)


def prior_loss(p, latents, stored_mean, stored_std, mode, s_p, rho):
    """Distillation loss toward the stored planning policies.

    Per step t' (weight rho**t' / H, averaged over valid records):

        reverse_kl: KL(prior(z) || N(stored)) / max(1, S_p)
        forward_kl: KL(N(stored) || prior(z)) / max(1, S_p)

    Records with degenerate stored std (non-positive or non-finite) are
    skipped and counted.

    Args:
        p: PriorPolicyParams.
        latents: (n, H, latent_dim) constants.
        stored_mean / stored_std: (n, H, action_dim) planner statistics
            from replay; constants.
        mode: REVERSE_KL or FORWARD_KL.
        s_p: scale divisor (max(1, S_p) applied here).
        rho: per-step decay.

    Returns:
        (loss, GradBundle, metrics) with metrics carrying the raw KL
        observations for the S_p tracker and the skipped-record count.
    """
    if mode not in (REVERSE_KL, FORWARD_KL):
        raise ValueError(f"prior_loss undefined for mode {mode!r}")
    n, horizon = latents.shape[:2]
    div = max(1.0, s_p)
    grads = nnet.zero_grads(p.trunk)
    loss = 0.0
    skipped = 0
    kl_obs = []
    for t in range(horizon):
        w_t = rho ** t / horizon
        d, cache = policy.head_forward_train(p, latents[:, t])
        g_mean = stored_mean[:, t]
        g_std = stored_std[:, t]
        valid = (np.isfinite(g_std).all(axis=-1) & (g_std > 0).all(axis=-1)
                 & np.isfinite(g_mean).all(axis=-1))
        n_valid = int(valid.sum())
        skipped += n - n_valid
        if n_valid == 0:
            continue
        g_std_safe = np.where(valid[:, None], g_std, 1.0)
        if mode == REVERSE_KL:
            kl_all = dists.kl(d, dists.DiagGaussian(g_mean, g_std_safe))
            d_mean = (d.mean - g_mean) / g_std_safe ** 2
            d_std = d.std / g_std_safe ** 2 - 1.0 / d.std
        else:
            kl_all = dists.kl(dists.DiagGaussian(g_mean, g_std_safe), d)
            d_mean = (d.mean - g_mean) / d.std ** 2
            d_std = 1.0 / d.std - (g_std_safe ** 2 + (g_mean - d.mean) ** 2) / d.std ** 3
        kl_vals = kl_all[valid]
        kl_obs.append(kl_vals)
        loss += w_t * float(np.mean(kl_vals)) / div
        c = w_t / (div * n_valid)
        mask = valid[:, None]
        g, _ = policy.head_backward(p, cache,
                                    np.where(mask, c * d_mean, 0.0),
                                    np.where(mask, c * d_std, 0.0))
        grads.add_(g)
    if not np.isfinite(loss):
        raise nnet.NumericError("non-finite prior loss")
    metrics = {"prior_loss": float(loss), "prior_skipped": skipped,
               "kl_observations": (np.concatenate(kl_obs)
                                   if kl_obs else np.zeros(0))}
    return float(loss), grads, metrics
