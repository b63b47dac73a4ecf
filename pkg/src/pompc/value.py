"""Action-value ensembles and their discrete-regression TD losses.

Two ensembles share this machinery: the bootstrap Q used by the planner
to score trajectory tails, and the KL-regularized Q whose Bellman target
subtracts the scaled policy-to-prior divergence. Each is a set of MLP
heads over (latent, action) emitting logits on the shared two-hot grid,
with EMA target copies.

TD targets reduce with the min over 2 uniformly subsampled target heads
(one pair drawn per call, applied to the whole batch); planner scoring
averages all online heads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dists, nnet, worldmodel


@dataclass
class QEnsemble:
    """num_value_nets MLP heads plus EMA target copies and the bin grid."""

    heads: list
    target_heads: list
    grid: worldmodel.TwoHotGrid

    def validate(self):
        if len(self.heads) < 2:
            raise ValueError("need at least two value heads")
        if len(self.heads) != len(self.target_heads):
            raise nnet.ShapeError("online/target head counts differ")
        return self

    @property
    def n_heads(self):
        return len(self.heads)


def init_q_ensemble(rng, latent_dim, action_dim, hidden_dim, grid,
                    num_heads, dropout=0.0, activation="mish"):
    heads = [nnet.init_mlp(
        rng, [latent_dim + action_dim, hidden_dim, hidden_dim, grid.num_bins],
        hidden_activation=activation, dropout=dropout)
        for _ in range(num_heads)]
    return QEnsemble(heads, [h.copy() for h in heads], grid).validate()


def q_value(e, z, a, use_target=False, reduce="mean", rng=None):
    """Decoded ensemble value at (z, a).

    reduce="mean": average of all heads (planner scoring).
    reduce="min2": elementwise min over 2 heads subsampled without
    replacement (TD-target estimates; requires rng).
    """
    za = np.concatenate([z, a], axis=-1)
    heads = e.target_heads if use_target else e.heads
    if reduce == "min2":
        if rng is None:
            raise ValueError("min2 reduction requires an rng")
        idx = rng.choice(len(heads), size=2, replace=False)
        vals = [e.grid.decode(nnet.forward_eval(heads[i], za)) for i in idx]
        return np.minimum(vals[0], vals[1])
    if reduce == "mean":
        vals = [e.grid.decode(nnet.forward_eval(h, za)) for h in heads]
        return np.mean(vals, axis=0)
    raise ValueError(f"unknown reduction {reduce!r}")


def td_target_bootstrap(r, z_next, policy_dist, e_target, gamma, rng):
    """r + gamma * Q_target(z', a~) with a~ sampled from the policy.

    Args:
        r: rewards, shape (...,).
        z_next: next latents, shape (..., latent_dim).
        policy_dist: callable latents -> DiagGaussian.
        e_target: QEnsemble whose target heads are evaluated.
        gamma: discount.
        rng: drives the action sample and the head subsample.

    No gradient flows out of this function; the result is a constant
    target array.
    """
    d = policy_dist(z_next)
    a = np.clip(dists.sample(d, rng.standard_normal(d.mean.shape)), -1.0, 1.0)
    q = q_value(e_target, z_next, a, use_target=True, reduce="min2", rng=rng)
    return r + gamma * q


def td_target_klreg(r, z_next, policy_dist, prior_next, e_target, lam,
                    s_kl, gamma, rng):
    """KL-regularized target: r + gamma * (Q_target(z', a~) - lam*KL/max(1,S)).

    prior_next is the prior distribution at z' (a DiagGaussian batch),
    resolved by the caller either from the learned prior network or from
    stored planner statistics. lam must be finite and >= 0.
    """
    if not (np.isfinite(lam) and lam >= 0.0):
        raise ValueError("lam must be finite and >= 0 for regularized targets")
    d = policy_dist(z_next)
    a = np.clip(dists.sample(d, rng.standard_normal(d.mean.shape)), -1.0, 1.0)
    q = q_value(e_target, z_next, a, use_target=True, reduce="min2", rng=rng)
    penalty = lam * dists.kl(d, prior_next) / max(1.0, s_kl)
    return r + gamma * (q - penalty)


def q_loss(e, latents, actions, targets, rho, rng, coef=1.0):
    """Discounted cross-entropy regression of every head onto TD targets.

    Args:
        e: QEnsemble (online heads are trained).
        latents: (n, H, latent_dim), treated as constants.
        actions: (n, H, action_dim).
        targets: (n, H) scalar TD targets (constants).
        rho: per-step decay; step t' is weighted rho**t' / H.
        rng: train-mode dropout.
        coef: overall loss multiplier.

    Returns:
        (loss, per-head GradBundle list, metrics).
    """
    n, horizon = targets.shape
    n_heads = e.n_heads
    loss = 0.0
    grads = [nnet.zero_grads(h) for h in e.heads]
    for t in range(horizon):
        w_t = coef * rho ** t / horizon
        za = np.concatenate([latents[:, t], actions[:, t]], axis=-1)
        w_target = e.grid.encode(targets[:, t])
        for h, head in enumerate(e.heads):
            logits, tape = nnet.forward(head, za, train=True, rng=rng)
            loss += w_t * float(np.mean(worldmodel.cross_entropy(logits, w_target))) / n_heads
            d_logits = (w_t / (n * n_heads)) * (worldmodel.softmax(logits) - w_target)
            g, _ = nnet.backward(tape, d_logits)
            grads[h].add_(g)
    if not np.isfinite(loss):
        raise nnet.NumericError("non-finite value loss")
    return float(loss), grads, {"q_loss": float(loss)}


def klreg_q_loss(e, latents, actions, targets, rho, rng, coef=1.0):
    """q_loss on the KL-regularized ensemble; targets from td_target_klreg."""
    loss, grads, _ = q_loss(e, latents, actions, targets, rho, rng, coef)
    return loss, grads, {"klreg_q_loss": loss}


def polyak_update(e, tau):
    """target <- tau * online + (1 - tau) * target, elementwise, in place."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must be in (0, 1]")
    for online, target in zip(e.heads, e.target_heads):
        for tw, ow in zip(target.weights, online.weights):
            tw *= 1.0 - tau
            tw += tau * ow
        for tb, ob in zip(target.biases, online.biases):
            tb *= 1.0 - tau
            tb += tau * ob
    return e


@dataclass
class ScaleTracker:
    """EMA of the P95-P5 spread of a loss term's magnitudes.

    Losses divide by ``scale()`` = max(1, S), so scaling can shrink
    large terms but never amplify small ones.
    """

    s: float = 1.0
    ema_rate: float = 0.01

    def scale(self):
        return max(1.0, self.s)

    def update(self, observations):
        obs = np.asarray(observations, dtype=np.float64).reshape(-1)
        if obs.size < 2:
            raise ValueError("need at least two observations")
        p5, p95 = np.percentile(obs, [5.0, 95.0])
        stat = float(p95 - p5)
        self.s = (1.0 - self.ema_rate) * self.s + self.ema_rate * stat
        if not np.isfinite(self.s) or self.s < 0.0:
            raise nnet.NumericError("scale tracker left its valid range")
        return self


def scale_update(tracker, observations):
    """Functional alias for ScaleTracker.update."""
    return tracker.update(observations)
