"""Latent MDP model: grouped-simplex encoder, dynamics, discrete reward head.

Latents are SimNorm vectors: contiguous groups of ``simnorm_dim`` entries,
each group softmax-normalized onto the simplex. Scalars (rewards, value
targets) are regressed as two-hot weight vectors over a fixed grid in
symlog space.

The joint training loss rolls predicted latents through the dynamics for
H steps and combines, per step: latent consistency against the EMA
target encoder, reward cross-entropy, and the bootstrap value head
cross-entropy (the value heads are trained through this same backward
pass; their TD targets are computed by the caller).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core, nnet


def symlog(x):
    """sign(x) * ln(1 + |x|)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.log1p(np.abs(x))


def symexp(y):
    """Exact inverse of symlog: sign(y) * (exp(|y|) - 1)."""
    y = np.asarray(y, dtype=np.float64)
    return np.sign(y) * np.expm1(np.abs(y))


@dataclass
class TwoHotGrid:
    """Equally spaced regression bins on [vmin, vmax] in symlog space."""

    num_bins: int
    vmin: float
    vmax: float

    def __post_init__(self):
        if self.num_bins < 2:
            raise ValueError("need at least two bins")
        self.centers = np.linspace(self.vmin, self.vmax, self.num_bins)
        self.width = (self.vmax - self.vmin) / (self.num_bins - 1)

    def encode(self, values):
        """Two-hot weights for symlog(values), clamped to the grid.

        Mass splits linearly between the two bracketing bins; exactly one
        bin gets all mass when symlog(value) lands on a grid point.
        """
        v = np.clip(symlog(values), self.vmin, self.vmax)
        idx = (v - self.vmin) / self.width
        lo = np.minimum(np.floor(idx), self.num_bins - 2).astype(np.int64)
        frac = idx - lo
        out = np.zeros(v.shape + (self.num_bins,))
        flat = out.reshape(-1, self.num_bins)
        lo_f = lo.reshape(-1)
        frac_f = frac.reshape(-1)
        rows = np.arange(flat.shape[0])
        flat[rows, lo_f] = 1.0 - frac_f
        flat[rows, lo_f + 1] += frac_f
        return out

    def decode(self, logits):
        """softmax(logits) . centers, mapped back through symexp."""
        logits = np.asarray(logits, dtype=np.float64)
        return symexp(softmax(logits) @ self.centers)


def softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, target_weights):
    """-sum_b w_b log softmax(logits)_b per row."""
    m = logits.max(axis=-1, keepdims=True)
    logz = m + np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))
    return np.sum(target_weights * (logz - logits), axis=-1)


def simnorm(x, group):
    """Grouped softmax; accepts 1-D or 2-D input."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return _core.simnorm(x[None, :], group)[0]
    return _core.simnorm(x, group)


def simnorm_vjp(z, dz, group):
    """Backwards through simnorm: given z = simnorm(u) and dL/dz, return dL/du."""
    shape = z.shape
    zg = z.reshape(-1, shape[-1] // group, group)
    dg = dz.reshape(zg.shape)
    dot = np.sum(dg * zg, axis=-1, keepdims=True)
    return (zg * (dg - dot)).reshape(shape)


@dataclass
class WorldModelParams:
    """Encoder, latent dynamics, reward head, and the EMA target encoder."""

    encoder: nnet.MlpParams        # obs -> latent logits (pre-simnorm)
    dynamics: nnet.MlpParams       # latent+action -> latent logits
    reward: nnet.MlpParams         # latent+action -> num_bins logits
    target_encoder: nnet.MlpParams
    latent_dim: int
    simnorm_dim: int
    action_dim: int
    obs_dim: int
    grid: TwoHotGrid

    def validate(self):
        if self.latent_dim % self.simnorm_dim != 0:
            raise ValueError("latent_dim must be a multiple of simnorm_dim")
        if self.dynamics.in_dim != self.latent_dim + self.action_dim:
            raise nnet.ShapeError("dynamics input width != latent+action")
        if self.dynamics.out_dim != self.latent_dim:
            raise nnet.ShapeError("dynamics output width != latent")
        return self


def init_worldmodel(rng, obs_dim, action_dim, latent_dim, simnorm_dim,
                    encoder_dim, num_encoder_layers, hidden_dim,
                    num_bins, symlog_min, symlog_max, activation="mish"):
    enc_dims = [obs_dim] + [encoder_dim] * num_encoder_layers + [latent_dim]
    encoder = nnet.init_mlp(rng, enc_dims, hidden_activation=activation)
    dynamics = nnet.init_mlp(
        rng, [latent_dim + action_dim, hidden_dim, hidden_dim, latent_dim],
        hidden_activation=activation)
    reward = nnet.init_mlp(
        rng, [latent_dim + action_dim, hidden_dim, hidden_dim, num_bins],
        hidden_activation=activation)
    wm = WorldModelParams(
        encoder=encoder, dynamics=dynamics, reward=reward,
        target_encoder=encoder.copy(), latent_dim=latent_dim,
        simnorm_dim=simnorm_dim, action_dim=action_dim, obs_dim=obs_dim,
        grid=TwoHotGrid(num_bins, symlog_min, symlog_max))
    return wm.validate()


def encode(wm, obs, use_target=False):
    """Observation batch (or vector) -> SimNorm latent, eval mode."""
    params = wm.target_encoder if use_target else wm.encoder
    return simnorm(nnet.forward_eval(params, obs), wm.simnorm_dim)


def dynamics_step(wm, z, a):
    """Next SimNorm latent from (latent, action), eval mode."""
    za = np.concatenate([z, a], axis=-1)
    return simnorm(nnet.forward_eval(wm.dynamics, za), wm.simnorm_dim)


def reward_predict(wm, z, a):
    """Reward logits and decoded scalar estimate, eval mode."""
    za = np.concatenate([z, a], axis=-1)
    logits = nnet.forward_eval(wm.reward, za)
    return logits, wm.grid.decode(logits)


def polyak_encoder(wm, tau):
    """target_encoder <- tau * encoder + (1 - tau) * target_encoder."""
    for tgt, src in zip(wm.target_encoder.weights, wm.encoder.weights):
        tgt *= 1.0 - tau
        tgt += tau * src
    for tgt, src in zip(wm.target_encoder.biases, wm.encoder.biases):
        tgt *= 1.0 - tau
        tgt += tau * src


@dataclass
class WorldModelLossCoefs:
    consistency: float = 20.0
    reward: float = 0.1
    value: float = 0.1
    rho: float = 0.5


def world_model_loss(wm, q_heads, obs, actions, rewards, next_obs,
                     td_targets, coefs, rng, target_latents=None):
    """Joint H-step model + bootstrap-value loss with analytic gradients.

    Args:
        wm: WorldModelParams (trained: encoder, dynamics, reward).
        q_heads: list of MlpParams value heads trained through this loss.
        obs: (n, H, obs_dim) observations s_t'.
        actions: (n, H, action_dim) stored actions.
        rewards: (n, H) stored rewards.
        next_obs: (n, H, obs_dim) observations s_{t'+1}.
        td_targets: (n, H) scalar TD targets for the value heads
            (computed by the caller from the target networks; no
            gradient flows into them).
        coefs: WorldModelLossCoefs.
        rng: generator for train-mode dropout.
        target_latents: optional precomputed (n, H, latent_dim)
            target-encoder latents of next_obs (consistency anchors);
            encoded here when omitted.

    Returns:
        (loss, grads, metrics) where grads maps
        {"encoder", "dynamics", "reward"} to GradBundles and "q_heads"
        to a list of per-head GradBundles. Gradients flow through the
        full latent rollout (consistency, reward CE, and value CE all
        backpropagate into dynamics and encoder).
    """
    n, horizon = rewards.shape
    lat = wm.latent_dim
    group = wm.simnorm_dim

    out0, enc_tape = nnet.forward(wm.encoder, obs[:, 0], train=True, rng=rng)
    zs = [simnorm(out0, group)]
    dyn_tapes = []
    for t in range(horizon):
        za = np.concatenate([zs[t], actions[:, t]], axis=-1)
        u, tape = nnet.forward(wm.dynamics, za, train=True, rng=rng)
        dyn_tapes.append(tape)
        zs.append(simnorm(u, group))

    if target_latents is None:
        z_tgt = [encode(wm, next_obs[:, t], use_target=True)
                 for t in range(horizon)]
    else:
        z_tgt = [target_latents[:, t] for t in range(horizon)]

    r_tapes, r_sm, r_w = [], [], []
    q_tapes, q_sm, q_w = [], [], []
    loss = 0.0
    metrics = {"consistency": 0.0, "reward_ce": 0.0, "value_ce": 0.0}
    n_heads = len(q_heads)
    for t in range(horizon):
        w_t = coefs.rho ** t / horizon
        diff = zs[t + 1] - z_tgt[t]
        c_term = coefs.consistency * float(np.mean(np.sum(diff * diff, axis=-1))) / lat
        za = np.concatenate([zs[t], actions[:, t]], axis=-1)
        logits_r, tape_r = nnet.forward(wm.reward, za, train=True, rng=rng)
        w_target_r = wm.grid.encode(rewards[:, t])
        r_term = coefs.reward * float(np.mean(cross_entropy(logits_r, w_target_r)))
        r_tapes.append(tape_r)
        r_sm.append(softmax(logits_r))
        r_w.append(w_target_r)

        q_term = 0.0
        tapes_t, sm_t = [], []
        w_target_q = wm.grid.encode(td_targets[:, t])
        for head in q_heads:
            logits_q, tape_q = nnet.forward(head, za, train=True, rng=rng)
            q_term += float(np.mean(cross_entropy(logits_q, w_target_q)))
            tapes_t.append(tape_q)
            sm_t.append(softmax(logits_q))
        q_term = coefs.value * q_term / n_heads
        q_tapes.append(tapes_t)
        q_sm.append(sm_t)
        q_w.append(w_target_q)

        loss += w_t * (c_term + r_term + q_term)
        metrics["consistency"] += w_t * c_term
        metrics["reward_ce"] += w_t * r_term
        metrics["value_ce"] += w_t * q_term

    if not np.isfinite(loss):
        raise nnet.NumericError("non-finite world-model loss")

    enc_grads = nnet.zero_grads(wm.encoder)
    dyn_grads = nnet.zero_grads(wm.dynamics)
    rew_grads = nnet.zero_grads(wm.reward)
    qh_grads = [nnet.zero_grads(h) for h in q_heads]

    dz = [np.zeros((n, lat)) for _ in range(horizon + 1)]
    for t in range(horizon - 1, -1, -1):
        w_t = coefs.rho ** t / horizon
        dz[t + 1] += (2.0 * coefs.consistency * w_t / (lat * n)) * (zs[t + 1] - z_tgt[t])

        d_logits_r = (coefs.reward * w_t / n) * (r_sm[t] - r_w[t])
        g_r, dza = nnet.backward(r_tapes[t], d_logits_r)
        rew_grads.add_(g_r)
        dz[t] += dza[:, :lat]

        for h in range(n_heads):
            d_logits_q = (coefs.value * w_t / (n * n_heads)) * (q_sm[t][h] - q_w[t])
            g_q, dza_q = nnet.backward(q_tapes[t][h], d_logits_q)
            qh_grads[h].add_(g_q)
            dz[t] += dza_q[:, :lat]

        du = simnorm_vjp(zs[t + 1], dz[t + 1], group)
        g_d, dza_d = nnet.backward(dyn_tapes[t], du)
        dyn_grads.add_(g_d)
        dz[t] += dza_d[:, :lat]

    du0 = simnorm_vjp(zs[0], dz[0], group)
    g_e, _ = nnet.backward(enc_tape, du0)
    enc_grads.add_(g_e)

    grads = {"encoder": enc_grads, "dynamics": dyn_grads,
             "reward": rew_grads, "q_heads": qh_grads}
    metrics["wm_loss"] = float(loss)
    return float(loss), grads, metrics
