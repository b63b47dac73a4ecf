"""Learned sampling policy and its KL-regularized update.

The policy head maps a latent to a diagonal Gaussian: the trunk MLP
emits (pre-tanh mean, pre-squash log-std) per action dimension; the
mean is tanh-bounded and the log-std is squashed into
[log_std_min, log_std_max] via lo + (hi - lo) * (tanh(u) + 1) / 2, so a
zero-weight head yields mean 0 and std exp((lo + hi) / 2) (the clamp
midpoint). The adaptive-prior policy reuses this head machinery.

The policy loss trades off, per horizon step: the KL to the prior
(weight lambda), the KL-regularized ensemble value of a reparameterized
action sample, and an entropy bonus. lambda = inf is a distinct code
path (kl_only_loss) that never touches the value function, and
lambda = 0 skips the KL term entirely so pure value maximization is
recovered bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dists, nnet

INF = np.inf


@dataclass
class GaussianHeadParams:
    """Trunk MLP emitting (mean, log-std) head outputs, plus clamp bounds."""

    trunk: nnet.MlpParams       # latent -> 2 * action_dim
    action_dim: int
    log_std_min: float = -10.0
    log_std_max: float = 2.0

    def validate(self):
        if self.trunk.out_dim != 2 * self.action_dim:
            raise nnet.ShapeError("trunk output width != 2 * action_dim")
        if self.log_std_min >= self.log_std_max:
            raise ValueError("log_std_min must be < log_std_max")
        return self


@dataclass
class SamplingPolicyParams(GaussianHeadParams):
    """Gaussian head plus the update hyperparameters alpha and lambda.

    lam may be math.inf; that selects the KL-only update path.
    """

    alpha: float = 1e-4
    lam: float = 1.0

    def validate(self):
        super().validate()
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not (self.lam >= 0):
            raise ValueError("lambda must be >= 0 (or inf)")
        return self


def init_head(rng, latent_dim, action_dim, hidden_dim, cls=GaussianHeadParams,
              log_std_min=-10.0, log_std_max=2.0, activation="mish", **extra):
    trunk = nnet.init_mlp(
        rng, [latent_dim, hidden_dim, hidden_dim, 2 * action_dim],
        hidden_activation=activation)
    return cls(trunk=trunk, action_dim=action_dim, log_std_min=log_std_min,
               log_std_max=log_std_max, **extra).validate()


def _transform(p, out):
    a = p.action_dim
    mean = np.tanh(out[..., :a])
    t_std = np.tanh(out[..., a:])
    log_std = p.log_std_min + (p.log_std_max - p.log_std_min) * 0.5 * (t_std + 1.0)
    return mean, t_std, np.exp(log_std)


def head_forward(p, z):
    """Eval-mode Gaussian head: latent(s) -> DiagGaussian."""
    out = nnet.forward_eval(p.trunk, z)
    mean, _, std = _transform(p, out)
    return dists.DiagGaussian(mean, std)


@dataclass
class HeadCache:
    tape: nnet.Tape
    mean: np.ndarray
    t_std: np.ndarray
    std: np.ndarray


def head_forward_train(p, z):
    """Taped head forward for loss backward passes."""
    out, tape = nnet.forward(p.trunk, z)
    mean, t_std, std = _transform(p, out)
    return dists.DiagGaussian(mean, std), HeadCache(tape, mean, t_std, std)


def head_backward(p, cache, d_mean, d_std):
    """Map (dL/dmean, dL/dstd) back to trunk gradients.

    Returns (GradBundle, dL/dz).
    """
    du_mean = d_mean * (1.0 - cache.mean ** 2)
    dlog_std = d_std * cache.std
    du_std = dlog_std * 0.5 * (p.log_std_max - p.log_std_min) \
        * (1.0 - cache.t_std ** 2)
    return nnet.backward(cache.tape, np.concatenate([du_mean, du_std], axis=-1))


def policy_forward(p, z):
    """The sampling policy distribution at latent(s) z."""
    return head_forward(p, z)


def act(p, z, deterministic, rng):
    """Action for environment interaction: mean, or a clipped sample."""
    d = policy_forward(p, z)
    if deterministic:
        return d.mean.copy()
    return np.clip(dists.sample(d, rng.standard_normal(d.mean.shape)),
                   -1.0, 1.0)


def policy_loss(p, latents, prior_dist, q_grad_fn, s_kl, s_q, rho, rng):
    """KL-regularized policy objective with analytic gradients.

    Per step t' (weight rho**t' / H, averaged over the batch):

        lam * KL(pi_s(z) || prior(z)) / max(1, S_KL)
        - Q(z, a~) / max(1, S_Q)          a~ = mean + std * noise
        - alpha * entropy(pi_s(z))

    Args:
        p: SamplingPolicyParams with finite lam (inf uses kl_only_loss).
        latents: (n, H, latent_dim) constants.
        prior_dist: DiagGaussian with shape (n, H, action_dim) — the
            frozen prior at each step (learned prior output or stored
            planner statistics).
        q_grad_fn: callable (z, a) -> (values, d values / d a); the
            frozen KL-regularized ensemble.
        s_kl, s_q: current scale values (already max(1, .)-floored
            by the caller or raw tracker scales).
        rho: per-step decay.
        rng: drives the reparameterized action sample.

    Returns:
        (loss, GradBundle, metrics); metrics carries the raw unscaled
        KL and Q observations for the scale trackers.
    """
    if not np.isfinite(p.lam):
        raise ValueError("policy_loss requires finite lambda")
    n, horizon = latents.shape[:2]
    lam = p.lam
    grads = nnet.zero_grads(p.trunk)
    loss = 0.0
    kl_obs, q_obs = [], []
    kl_term_total, q_term_total, ent_term_total = 0.0, 0.0, 0.0
    for t in range(horizon):
        w_t = rho ** t / horizon
        z = latents[:, t]
        d, cache = head_forward_train(p, z)
        d_mean = np.zeros_like(d.mean)
        d_std = np.zeros_like(d.std)

        if lam > 0.0:
            prior_t = prior_dist[:, t]
            kl_vals = dists.kl(d, prior_t)
            kl_obs.append(kl_vals)
            kl_term = lam * float(np.mean(kl_vals)) / s_kl
            loss += w_t * kl_term
            kl_term_total += w_t * kl_term
            c = lam * w_t / (s_kl * n)
            d_mean += c * (d.mean - prior_t.mean) / prior_t.std ** 2
            d_std += c * (d.std / prior_t.std ** 2 - 1.0 / d.std)

        noise = rng.standard_normal(d.mean.shape)
        a = d.mean + d.std * noise
        q_vals, dq_da = q_grad_fn(z, a)
        q_obs.append(q_vals)
        q_term = -float(np.mean(q_vals)) / s_q
        loss += w_t * q_term
        q_term_total += w_t * q_term
        cq = -w_t / (s_q * n)
        d_mean += cq * dq_da
        d_std += cq * dq_da * noise

        ent = dists.entropy(d)
        ent_term = -p.alpha * float(np.mean(ent))
        loss += w_t * ent_term
        ent_term_total += w_t * ent_term
        d_std += (-p.alpha * w_t / n) / d.std

        g, _ = head_backward(p, cache, d_mean, d_std)
        grads.add_(g)
    if not np.isfinite(loss):
        raise nnet.NumericError("non-finite policy loss")
    metrics = {
        "policy_loss": float(loss),
        "policy_kl_term": kl_term_total,
        "policy_q_term": q_term_total,
        "policy_entropy_term": ent_term_total,
        "kl_observations": (np.concatenate(kl_obs)
                            if kl_obs else np.zeros(0)),
        "q_observations": np.concatenate(q_obs),
    }
    return float(loss), grads, metrics


def kl_only_loss(p, latents, prior_dist, s_kl, rho):
    """lambda = inf update: only the scaled KL to the prior is minimized.

    By construction this never evaluates the value ensemble, so its
    gradients are exactly invariant to value-function parameters.
    """
    n, horizon = latents.shape[:2]
    grads = nnet.zero_grads(p.trunk)
    loss = 0.0
    kl_obs = []
    for t in range(horizon):
        w_t = rho ** t / horizon
        d, cache = head_forward_train(p, latents[:, t])
        prior_t = prior_dist[:, t]
        kl_vals = dists.kl(d, prior_t)
        kl_obs.append(kl_vals)
        loss += w_t * float(np.mean(kl_vals)) / s_kl
        c = w_t / (s_kl * n)
        d_mean = c * (d.mean - prior_t.mean) / prior_t.std ** 2
        d_std = c * (d.std / prior_t.std ** 2 - 1.0 / d.std)
        g, _ = head_backward(p, cache, d_mean, d_std)
        grads.add_(g)
    if not np.isfinite(loss):
        raise nnet.NumericError("non-finite policy loss")
    metrics = {"policy_loss": float(loss),
               "policy_kl_term": float(loss),
               "policy_q_term": 0.0,
               "policy_entropy_term": 0.0,
               "kl_observations": np.concatenate(kl_obs),
               "q_observations": np.zeros(0)}
    return float(loss), grads, metrics
