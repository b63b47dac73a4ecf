"""Agent bundle: every learned component plus optimizer state.

Groups the world model, both Q ensembles, the sampling policy, and the
adaptive prior with one Adam state per update group, and exposes the
read-only adapters the planner consumes (batched dynamics/reward,
policy distribution, bootstrap value). Parameter-version counters
record the update order applied by the trainer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nnet, policy, prior, value, worldmodel


@dataclass
class Agent:
    wm: worldmodel.WorldModelParams
    q_boot: value.QEnsemble
    q_reg: value.QEnsemble
    pol: policy.SamplingPolicyParams
    pri: prior.PriorPolicyParams
    adam_encoder: nnet.AdamState
    adam_dynamics: nnet.AdamState
    adam_reward: nnet.AdamState
    adam_q_boot: list
    adam_q_reg: list
    adam_policy: nnet.AdamState
    adam_prior: nnet.AdamState
    s_kl: value.ScaleTracker
    s_q: value.ScaleTracker
    s_p: value.ScaleTracker
    versions: dict = field(default_factory=dict)
    update_order: list = field(default_factory=list)

    def bump(self, name):
        self.versions[name] = self.versions.get(name, 0) + 1
        self.update_order.append(name)

    # ---- planner-facing read-only adapters ----

    @property
    def action_dim(self):
        return self.wm.action_dim

    def model_adapter(self):
        return _LatentModel(self.wm)

    def policy_dist(self, z):
        return policy.policy_forward(self.pol, z)

    def prior_dist(self, z):
        return prior.prior_forward(self.pri, z)

    def q_boot_fn(self):
        ens = self.q_boot
        return lambda z, a: value.q_value(ens, z, a, reduce="mean")

    def q_reg_grad_fn(self):
        ens = self.q_reg
        return lambda z, a: q_action_value_grad(ens, z, a)

    def encode(self, obs):
        return worldmodel.encode(self.wm, obs)

    # ---- checkpoint support ----

    def named_mlps(self):
        yield "wm.encoder", self.wm.encoder
        yield "wm.dynamics", self.wm.dynamics
        yield "wm.reward", self.wm.reward
        yield "wm.target_encoder", self.wm.target_encoder
        for i, h in enumerate(self.q_boot.heads):
            yield f"q_boot.head{i}", h
        for i, h in enumerate(self.q_boot.target_heads):
            yield f"q_boot.target{i}", h
        for i, h in enumerate(self.q_reg.heads):
            yield f"q_reg.head{i}", h
        for i, h in enumerate(self.q_reg.target_heads):
            yield f"q_reg.target{i}", h
        yield "policy.trunk", self.pol.trunk
        yield "prior.trunk", self.pri.trunk

    def named_adams(self):
        yield "adam.encoder", self.adam_encoder
        yield "adam.dynamics", self.adam_dynamics
        yield "adam.reward", self.adam_reward
        for i, s in enumerate(self.adam_q_boot):
            yield f"adam.q_boot{i}", s
        for i, s in enumerate(self.adam_q_reg):
            yield f"adam.q_reg{i}", s
        yield "adam.policy", self.adam_policy
        yield "adam.prior", self.adam_prior


class _LatentModel:
    """Batched latent dynamics/reward view of the world model."""

    def __init__(self, wm):
        self._wm = wm
        self.action_dim = wm.action_dim
        self.latent_dim = wm.latent_dim

    def dynamics(self, z, a):
        return worldmodel.dynamics_step(self._wm, z, a)

    def reward(self, z, a):
        return worldmodel.reward_predict(self._wm, z, a)[1]


def q_action_value_grad(ensemble, z, a):
    """Mean ensemble value and its gradient w.r.t. the action input.

    Eval-mode (no dropout) so the policy update is deterministic given
    its own sampling noise. Returns (values (n,), d_values/d_a (n, A)).
    """
    za = np.concatenate([z, a], axis=-1)
    latent_dim = z.shape[-1]
    grid = ensemble.grid
    n_heads = ensemble.n_heads
    total_v = 0.0
    total_da = 0.0
    for head in ensemble.heads:
        logits, tape = nnet.forward(head, za, train=False)
        s = worldmodel.softmax(logits)
        m = s @ grid.centers
        v = worldmodel.symexp(m)
        dv_dm = np.exp(np.abs(m))
        d_logits = dv_dm[:, None] * s * (grid.centers[None, :] - m[:, None])
        _, dza = nnet.backward(tape, d_logits)
        total_v = total_v + v
        total_da = total_da + dza[:, latent_dim:]
    return total_v / n_heads, total_da / n_heads


def init_agent(cfg, obs_dim, action_dim, rng):
    """Build all networks and optimizer state from one generator.

    Construction order (world model, bootstrap Q, regularized Q, policy,
    prior) is fixed so a given seed always produces the same parameters.
    """
    wm = worldmodel.init_worldmodel(
        rng, obs_dim, action_dim, cfg.latent_dim, cfg.simnorm_dim,
        cfg.encoder_dim, cfg.num_encoder_layers, cfg.hidden_dim,
        cfg.num_bins, cfg.symlog_min, cfg.symlog_max,
        activation=cfg.activation)
    q_boot = value.init_q_ensemble(
        rng, cfg.latent_dim, action_dim, cfg.hidden_dim, wm.grid,
        cfg.num_value_nets, dropout=cfg.dropout, activation=cfg.activation)
    q_reg = value.init_q_ensemble(
        rng, cfg.latent_dim, action_dim, cfg.hidden_dim, wm.grid,
        cfg.num_value_nets, dropout=cfg.dropout, activation=cfg.activation)
    pol = policy.init_head(
        rng, cfg.latent_dim, action_dim, cfg.policy_hidden_dim,
        cls=policy.SamplingPolicyParams, log_std_min=cfg.log_std_min,
        log_std_max=cfg.log_std_max, activation=cfg.activation,
        alpha=cfg.entropy_coef, lam=cfg.lam)
    pri = prior.init_prior(
        rng, cfg.latent_dim, action_dim, cfg.policy_hidden_dim,
        log_std_min=cfg.log_std_min, log_std_max=cfg.log_std_max,
        activation=cfg.activation)
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    return Agent(
        wm=wm, q_boot=q_boot, q_reg=q_reg, pol=pol, pri=pri,
        adam_encoder=nnet.init_adam(wm.encoder, b1, b2),
        adam_dynamics=nnet.init_adam(wm.dynamics, b1, b2),
        adam_reward=nnet.init_adam(wm.reward, b1, b2),
        adam_q_boot=[nnet.init_adam(h, b1, b2) for h in q_boot.heads],
        adam_q_reg=[nnet.init_adam(h, b1, b2) for h in q_reg.heads],
        adam_policy=nnet.init_adam(pol.trunk, b1, b2),
        adam_prior=nnet.init_adam(pri.trunk, b1, b2),
        s_kl=value.ScaleTracker(), s_q=value.ScaleTracker(),
        s_p=value.ScaleTracker())
