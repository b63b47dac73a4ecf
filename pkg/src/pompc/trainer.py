"""Training loop: Plan -> Infer -> Regularize.

Each environment step plans with MPPI (warm-started from the previous
plan), executes the sampled first action, and stores the transition with
the planner's first-step Gaussian. Every ``update_every`` steps one
gradient update runs, in fixed order:

    1. sample an H-step batch, lazily reanalyze a subset
    2. joint world-model + bootstrap-Q loss (one backward, two
       optimizer applications: model first, then the value heads)
    3. adaptive-prior distillation (skipped in replay-direct mode)
    4. KL-regularized Q update (skipped when lambda = inf, whose
       Bellman target would be undefined)
    5. sampling-policy update (KL-only path when lambda = inf)
    6. Polyak updates: bootstrap targets, regularized targets, target
       encoder

Scale trackers are refreshed once per update from that update's raw
term magnitudes, after the losses consume the previous scale values.

Before the main loop a seeding phase collects ``seeding_steps``
transitions with the raw sampling policy (stored planner stats: zero
mean, sigma_max std), then pre-trains the world model and bootstrap Q
for ``seeding_steps`` updates.

Determinism: three named RNG streams (env resets, action/planning
noise, update-time noise) are spawned from the run seed; every random
draw is ordered by the code path, so (config, seed) fixes the run
bit-exactly, and checkpoints capture the streams for exact resumption.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import (agent as agent_mod, blockio, config as config_mod, dists,
               envs, nnet, planner, policy, prior, replay, value, worldmodel)

CKPT_MAGIC = b"POMPC\x00CK"
CKPT_VERSION = 1

METRICS_COLUMNS = [
    "row", "row_type", "step", "episode", "ep_return", "ep_length",
    "n_updates", "wm_loss", "consistency", "reward_ce", "value_ce",
    "klreg_q_loss", "prior_loss", "prior_skipped", "policy_loss",
    "policy_kl_term", "policy_q_term", "policy_entropy_term",
    "s_kl", "s_q", "s_p", "plan_sigma_mean", "elite_score_mean",
    "elite_score_max", "reanalyze_refreshed", "reanalyze_failures",
    "planner_fallbacks",
]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class MetricsWriter:
    """Append-only CSV with a strictly increasing row counter.

    Rows are buffered and flushed at episode boundaries. ``row`` is the
    strictly increasing sequence number; ``step`` is non-decreasing
    (an update row and the episode row it closes share a step).
    """

    def __init__(self, path):
        self.path = path
        self.rows = []
        self.row_counter = 0
        if path:
            with open(path, "w", encoding="utf-8") as f:
                f.write(",".join(METRICS_COLUMNS) + "\n")

    def emit(self, row_type, **values):
        self.row_counter += 1
        values["row"] = self.row_counter
        values["row_type"] = row_type
        self.rows.append(",".join(_fmt(values.get(c)) for c in METRICS_COLUMNS))

    def flush(self):
        if self.path and self.rows:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write("\n".join(self.rows) + "\n")
        self.rows.clear()


@dataclass
class TrainerState:
    cfg: config_mod.TrainConfig
    spec: envs.EnvSpec
    agent: agent_mod.Agent
    buffer: replay.ReplayBuffer
    rng_env: np.random.Generator
    rng_act: np.random.Generator
    rng_update: np.random.Generator
    env_state: envs.EnvState
    obs: np.ndarray
    warm_mean: np.ndarray = None
    env_step: int = 0
    n_updates: int = 0
    episode_idx: int = 0
    episode_return: float = 0.0
    episode_len: int = 0
    planner_fallbacks: int = 0
    reanalyze_events: int = 0
    metrics: MetricsWriter = field(default=None)
    last_update_row: dict = field(default=None)


def init_trainer(cfg, metrics_path=None):
    cfg.validate()
    spec = envs.get_spec(cfg.env_name)
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    rng_init = np.random.default_rng(seeds[0])
    rng_env = np.random.default_rng(seeds[1])
    rng_act = np.random.default_rng(seeds[2])
    rng_update = np.random.default_rng(seeds[3])
    ag = agent_mod.init_agent(cfg, spec.obs_dim, spec.action_dim, rng_init)
    buf = replay.ReplayBuffer(cfg.replay_capacity, spec.obs_dim,
                              spec.action_dim, cfg.plan_sigma_min,
                              cfg.plan_sigma_max)
    env_state = envs.reset(spec, rng_env)
    path = cfg.metrics_path if metrics_path is None else metrics_path
    return TrainerState(
        cfg=cfg, spec=spec, agent=ag, buffer=buf, rng_env=rng_env,
        rng_act=rng_act, rng_update=rng_update, env_state=env_state,
        obs=envs.observe(spec, env_state), metrics=MetricsWriter(path))


def _dist_over(head_params, forward_fn, latents_3d):
    """Gaussian head over (n, H, L) latents -> DiagGaussian (n, H, A)."""
    n, horizon, lat = latents_3d.shape
    d = forward_fn(head_params, latents_3d.reshape(n * horizon, lat))
    return dists.DiagGaussian(d.mean.reshape(n, horizon, -1),
                              d.std.reshape(n, horizon, -1))


def _encode_batch(ag, obs_3d, use_target=False):
    n, horizon, od = obs_3d.shape
    z = worldmodel.encode(ag.wm, obs_3d.reshape(n * horizon, od),
                          use_target=use_target)
    return z.reshape(n, horizon, -1)


def _model_value_update(state, batch):
    """Joint world-model + bootstrap-Q backward, clipped, two Adam groups."""
    cfg, ag = state.cfg, state.agent
    n, horizon = batch.reward.shape
    z_next_tgt = _encode_batch(ag, batch.next_obs, use_target=True)
    flat = z_next_tgt.reshape(n * horizon, -1)
    td = value.td_target_bootstrap(
        batch.reward.reshape(-1), flat,
        lambda z: policy.policy_forward(ag.pol, z),
        ag.q_boot, cfg.discount, state.rng_update).reshape(n, horizon)
    loss, grads, metrics = worldmodel.world_model_loss(
        ag.wm, ag.q_boot.heads, batch.obs, batch.action, batch.reward,
        batch.next_obs, td, cfg.wm_coefs(), state.rng_update,
        target_latents=z_next_tgt)
    bundles = [grads["encoder"], grads["dynamics"], grads["reward"]]
    bundles += grads["q_heads"]
    clipped = nnet.clip_global_norm_joint(bundles, cfg.max_grad_norm)
    nnet.adam_step(ag.wm.encoder, ag.adam_encoder, clipped[0], cfg.lr)
    nnet.adam_step(ag.wm.dynamics, ag.adam_dynamics, clipped[1], cfg.lr)
    nnet.adam_step(ag.wm.reward, ag.adam_reward, clipped[2], cfg.lr)
    ag.bump("worldmodel")
    for head, adam, g in zip(ag.q_boot.heads, ag.adam_q_boot, clipped[3:]):
        nnet.adam_step(head, adam, g, cfg.lr)
    ag.bump("q_boot")
    metrics["wm_grad_norm"] = float(
        np.sqrt(sum(g.global_norm ** 2 for g in clipped)))
    return metrics, z_next_tgt


def _reanalyze_plan_fn(state):
    cfg, ag = state.cfg, state.agent
    model = ag.model_adapter()
    q_fn = ag.q_boot_fn()
    plan_cfg = cfg.plan_config()

    def plan_from(obs_vec):
        z = ag.encode(obs_vec)
        return planner.plan(z, None, plan_cfg, ag.policy_dist, model, q_fn,
                            state.rng_update)

    return plan_from


def update(state):
    """One full gradient update in the fixed order (see module header)."""
    cfg, ag = state.cfg, state.agent
    state.n_updates += 1
    ag.update_order.clear()
    batch = state.buffer.sample_slices(cfg.batch_size, cfg.plan_horizon,
                                       state.rng_update)
    batch, report = replay.lazy_reanalyze(
        state.buffer, batch, cfg.reanalyze_batch, cfg.reanalyze_interval,
        state.n_updates, _reanalyze_plan_fn(state))
    if report.triggered:
        state.reanalyze_events += 1

    n, horizon = batch.reward.shape
    latents = _encode_batch(ag, batch.obs)  # pre-update encoder, constants

    wm_metrics, z_next_tgt = _model_value_update(state, batch)

    row = dict(wm_metrics)
    row.update(reanalyze_refreshed=len(report.refreshed_rows)
               if report.triggered else 0,
               reanalyze_failures=report.failures if report.triggered else 0)

    # Adaptive prior distillation.
    replay_direct = cfg.prior_mode == prior.REPLAY_DIRECT
    prior_obs = None
    if not replay_direct:
        p_loss, p_grads, p_metrics = prior.prior_loss(
            ag.pri, latents, batch.plan_mean, batch.plan_std,
            cfg.prior_mode, ag.s_p.scale(), cfg.rho)
        p_clipped = nnet.clip_global_norm(p_grads, cfg.max_grad_norm)
        nnet.adam_step(ag.pri.trunk, ag.adam_prior, p_clipped, cfg.lr)
        ag.bump("prior")
        prior_obs = p_metrics["kl_observations"]
        row.update(prior_loss=p_loss, prior_skipped=p_metrics["prior_skipped"])

    # KL-regularized Q update (undefined at lambda = inf).
    if np.isfinite(cfg.lam):
        flat_next = z_next_tgt.reshape(n * horizon, -1)
        if replay_direct:
            prior_next = dists.DiagGaussian(
                batch.next_plan_mean.reshape(n * horizon, -1),
                batch.next_plan_std.reshape(n * horizon, -1))
        else:
            prior_next = prior.prior_forward(ag.pri, flat_next)
        td_reg = value.td_target_klreg(
            batch.reward.reshape(-1), flat_next,
            lambda z: policy.policy_forward(ag.pol, z), prior_next,
            ag.q_reg, cfg.lam, ag.s_kl.scale(), cfg.discount,
            state.rng_update).reshape(n, horizon)
        qr_loss, qr_grads, _ = value.klreg_q_loss(
            ag.q_reg, latents, batch.action, td_reg, cfg.rho,
            state.rng_update, coef=cfg.klq_coef)
        qr_clipped = nnet.clip_global_norm_joint(qr_grads, cfg.max_grad_norm)
        for head, adam, g in zip(ag.q_reg.heads, ag.adam_q_reg, qr_clipped):
            nnet.adam_step(head, adam, g, cfg.lr)
        ag.bump("q_reg")
        row.update(klreg_q_loss=qr_loss)

    # Sampling-policy update.
    if replay_direct:
        prior_here = dists.DiagGaussian(batch.plan_mean, batch.plan_std)
    else:
        prior_here = _dist_over(ag.pri, prior.prior_forward, latents)
    if np.isinf(cfg.lam):
        pol_loss, pol_grads, pol_metrics = policy.kl_only_loss(
            ag.pol, latents, prior_here, ag.s_kl.scale(), cfg.rho)
    else:
        pol_loss, pol_grads, pol_metrics = policy.policy_loss(
            ag.pol, latents, prior_here, ag.q_reg_grad_fn(),
            ag.s_kl.scale(), ag.s_q.scale(), cfg.rho, state.rng_update)
    pol_clipped = nnet.clip_global_norm(pol_grads, cfg.max_grad_norm)
    nnet.adam_step(ag.pol.trunk, ag.adam_policy, pol_clipped, cfg.lr)
    ag.bump("policy")

    # Scale trackers: refreshed once per update from this update's raw
    # magnitudes (consumed next update).
    if pol_metrics["kl_observations"].size >= 2:
        ag.s_kl.update(pol_metrics["kl_observations"])
    if pol_metrics["q_observations"].size >= 2:
        ag.s_q.update(pol_metrics["q_observations"])
    if prior_obs is not None and prior_obs.size >= 2:
        ag.s_p.update(prior_obs)

    value.polyak_update(ag.q_boot, cfg.tau)
    ag.bump("q_boot_target")
    value.polyak_update(ag.q_reg, cfg.tau)
    ag.bump("q_reg_target")
    worldmodel.polyak_encoder(ag.wm, cfg.tau)
    ag.bump("target_encoder")

    row.update(policy_loss=pol_loss,
               policy_kl_term=pol_metrics["policy_kl_term"],
               policy_q_term=pol_metrics["policy_q_term"],
               policy_entropy_term=pol_metrics["policy_entropy_term"],
               s_kl=ag.s_kl.s, s_q=ag.s_q.s, s_p=ag.s_p.s,
               policy_grad_norm=pol_clipped.global_norm)
    state.last_update_row = row
    return row


def seed_phase(state):
    """Collect seeding transitions with the raw policy, then pre-train."""
    cfg, ag, spec = state.cfg, state.agent, state.spec
    sigma_max = cfg.plan_sigma_max
    adim = spec.action_dim
    for _ in range(cfg.seeding_steps):
        z = ag.encode(state.obs)
        a = policy.act(ag.pol, z, deterministic=False, rng=state.rng_act)
        _env_transition(state, a, np.zeros(adim), np.full(adim, sigma_max))
    for _ in range(cfg.seeding_steps):
        batch = state.buffer.sample_slices(cfg.batch_size, cfg.plan_horizon,
                                           state.rng_update)
        _model_value_update(state, batch)
        value.polyak_update(ag.q_boot, cfg.tau)
        worldmodel.polyak_encoder(ag.wm, cfg.tau)


def _env_transition(state, action, plan_mean0, plan_std0):
    """Execute one action, push the record, handle episode bookkeeping."""
    spec = state.spec
    next_state, reward, done = envs.step(spec, state.env_state, action)
    next_obs = envs.observe(spec, next_state)
    state.buffer.push(replay.TransitionRecord(
        obs=state.obs, action=action, reward=reward, next_obs=next_obs,
        plan_mean=plan_mean0, plan_std=plan_std0,
        episode=state.episode_idx, step=state.episode_len, done=done))
    state.env_step += 1
    state.episode_return += reward
    state.episode_len += 1
    state.env_state = next_state
    state.obs = next_obs
    if done:
        if state.metrics:
            state.metrics.emit("episode", step=state.env_step,
                               episode=state.episode_idx,
                               ep_return=state.episode_return,
                               ep_length=state.episode_len)
            state.metrics.flush()
        state.episode_idx += 1
        state.episode_return = 0.0
        state.episode_len = 0
        state.warm_mean = None
        state.env_state = envs.reset(spec, state.rng_env)
        state.obs = envs.observe(spec, state.env_state)
    return done


def train_step(state):
    """One planned environment step, plus an update every update_every."""
    cfg, ag = state.cfg, state.agent
    z = ag.encode(state.obs)
    result = planner.plan(z, state.warm_mean, cfg.plan_config(),
                          ag.policy_dist, ag.model_adapter(), ag.q_boot_fn(),
                          state.rng_act)
    if result.fallback:
        state.planner_fallbacks += 1
    state.warm_mean = planner.shift_warm_start(result.mean)
    _env_transition(state, result.action, result.mean[0], result.std[0])
    if state.env_step % cfg.update_every == 0:
        row = update(state)
        if state.metrics:
            state.metrics.emit(
                "update", step=state.env_step, n_updates=state.n_updates,
                plan_sigma_mean=float(result.std.mean()),
                elite_score_mean=result.elite_score_mean,
                elite_score_max=result.elite_score_max,
                planner_fallbacks=state.planner_fallbacks, **{
                    k: row.get(k) for k in (
                        "wm_loss", "consistency", "reward_ce", "value_ce",
                        "klreg_q_loss", "prior_loss", "prior_skipped",
                        "policy_loss", "policy_kl_term", "policy_q_term",
                        "policy_entropy_term", "s_kl", "s_q", "s_p",
                        "reanalyze_refreshed", "reanalyze_failures")})


def _abort_dump(state, exc):
    """Diagnostic dump for a numeric failure: step, losses, grad norms."""
    import sys
    lines = [f"numeric failure at env_step={state.env_step} "
             f"n_updates={state.n_updates} episode={state.episode_idx}: "
             f"{exc}"]
    if state.last_update_row:
        detail = ", ".join(f"{k}={v}" for k, v in
                           sorted(state.last_update_row.items())
                           if isinstance(v, (int, float)))
        lines.append(f"last update: {detail}")
    print("\n".join(lines), file=sys.stderr)


def run_training(cfg, metrics_path=None, checkpoint_path=None):
    """Full run: seed phase then planned steps until total_steps.

    BLAS pools are pinned to one thread for the duration: the workload
    is many small GEMMs, where thread fan-out costs far more than it
    recovers. A numeric failure aborts with a diagnostic dump on stderr
    (flushing metrics first) and re-raises.
    """
    state = init_trainer(cfg, metrics_path=metrics_path)
    try:
        with threadpool_limits(limits=1, user_api="blas"):
            seed_phase(state)
            while state.env_step < cfg.total_steps:
                train_step(state)
    except nnet.NumericError as exc:
        state.metrics.flush()
        _abort_dump(state, exc)
        raise
    state.metrics.flush()
    path = checkpoint_path or cfg.checkpoint_path
    if path:
        save_checkpoint(state, path)
    return state


def continue_training(state, total_steps=None):
    """Resume a (possibly restored) state up to total_steps."""
    target = state.cfg.total_steps if total_steps is None else total_steps
    try:
        with threadpool_limits(limits=1, user_api="blas"):
            while state.env_step < target:
                train_step(state)
    except nnet.NumericError as exc:
        state.metrics.flush()
        _abort_dump(state, exc)
        raise
    state.metrics.flush()
    return state


def evaluate(state, episodes, rng=None, deterministic=None):
    """Mean return over full planned episodes, with a normal-CI half width.

    Uses the executed-action mode from the config unless overridden.
    Returns (mean, half_width_or_None, returns).
    """
    cfg, ag, spec = state.cfg, state.agent, state.spec
    rng = rng or np.random.default_rng(cfg.seed + 1)
    det = cfg.eval_deterministic if deterministic is None else deterministic
    plan_cfg = cfg.plan_config()
    model = ag.model_adapter()
    q_fn = ag.q_boot_fn()
    returns = []
    with threadpool_limits(limits=1, user_api="blas"):
        for _ in range(episodes):
            env_state = envs.reset(spec, rng)
            obs = envs.observe(spec, env_state)
            warm = None
            total = 0.0
            done = False
            while not done:
                z = ag.encode(obs)
                result = planner.plan(z, warm, plan_cfg, ag.policy_dist,
                                      model, q_fn, rng, deterministic=det)
                warm = planner.shift_warm_start(result.mean)
                env_state, reward, done = envs.step(spec, env_state,
                                                    result.action)
                obs = envs.observe(spec, env_state)
                total += reward
            returns.append(total)
    mean = float(np.mean(returns))
    if len(returns) < 2:
        return mean, None, returns
    half = 1.96 * float(np.std(returns, ddof=1)) / np.sqrt(len(returns))
    return mean, half, returns


def random_policy_returns(cfg, episodes, rng):
    """Uniform-random-action baseline returns (the evaluation oracle)."""
    spec = envs.get_spec(cfg.env_name)
    returns = []
    for _ in range(episodes):
        env_state = envs.reset(spec, rng)
        total = 0.0
        done = False
        while not done:
            a = rng.uniform(-1.0, 1.0, size=spec.action_dim)
            env_state, reward, done = envs.step(spec, env_state, a)
            total += reward
        returns.append(total)
    return returns


# ---------------------------------------------------------------------------
# Checkpointing: one binary file capturing the complete mutable state
# (parameters, Adam moments, targets, scale trackers, replay buffer, RNG
# streams, env state, and loop counters), so save/load/continue matches
# an uninterrupted run bit-exactly.
# ---------------------------------------------------------------------------

def _rng_state_bytes(rng):
    return json.dumps(rng.bit_generator.state).encode("utf-8")


def _rng_from_bytes(data):
    rng = np.random.default_rng()
    rng.bit_generator.state = json.loads(data.decode("utf-8"))
    return rng


def save_checkpoint(state, path):
    ag = state.agent
    blocks = [("config", config_mod.dump(state.cfg))]
    for net_name, mlp in ag.named_mlps():
        for arr_name, arr in mlp.arrays():
            blocks.append((f"{net_name}.{arr_name}", arr))
    for adam_name, adam in ag.named_adams():
        for i in range(len(adam.m_weights)):
            blocks.append((f"{adam_name}.layer{i}.m_weight", adam.m_weights[i]))
            blocks.append((f"{adam_name}.layer{i}.m_bias", adam.m_biases[i]))
            blocks.append((f"{adam_name}.layer{i}.v_weight", adam.v_weights[i]))
            blocks.append((f"{adam_name}.layer{i}.v_bias", adam.v_biases[i]))
        blocks.append((f"{adam_name}.step", np.int64(adam.step)))
    blocks.append(("scales", np.array([ag.s_kl.s, ag.s_q.s, ag.s_p.s])))
    buf = state.buffer
    blocks.append(("buffer.meta", np.array(
        [buf.capacity, buf.obs_dim, buf.action_dim, buf.count],
        dtype=np.int64)))
    for name in ("obs", "action", "reward", "next_obs", "plan_mean",
                 "plan_std", "episode", "step", "done"):
        blocks.append((f"buffer.{name}", getattr(buf, name)))
    blocks.append(("rng.env", _rng_state_bytes(state.rng_env)))
    blocks.append(("rng.act", _rng_state_bytes(state.rng_act)))
    blocks.append(("rng.update", _rng_state_bytes(state.rng_update)))
    blocks.append(("env.phys", state.env_state.phys))
    blocks.append(("env.t", np.int64(state.env_state.t)))
    blocks.append(("obs", state.obs))
    has_warm = state.warm_mean is not None
    blocks.append(("warm.present", np.int64(int(has_warm))))
    blocks.append(("warm.mean", state.warm_mean if has_warm
                   else np.zeros((state.cfg.plan_horizon,
                                  state.spec.action_dim))))
    blocks.append(("counters", np.array(
        [state.env_step, state.n_updates, state.episode_idx,
         state.episode_len, state.planner_fallbacks,
         state.reanalyze_events, state.metrics.row_counter
         if state.metrics else 0], dtype=np.int64)))
    blocks.append(("episode_return", np.float64(state.episode_return)))
    blockio.write_blocks(path, CKPT_MAGIC, CKPT_VERSION, blocks)


def load_checkpoint(path, metrics_path=""):
    """Restore a TrainerState; continuing it reproduces the original run."""
    blocks = blockio.read_blocks(path, CKPT_MAGIC, CKPT_VERSION)
    cfg = config_mod.from_text(blocks["config"].decode("utf-8"))
    spec = envs.get_spec(cfg.env_name)
    ag = agent_mod.init_agent(cfg, spec.obs_dim, spec.action_dim,
                              np.random.default_rng(0))
    for net_name, mlp in ag.named_mlps():
        for arr_name, arr in mlp.arrays():
            arr[:] = blocks[f"{net_name}.{arr_name}"]
    for adam_name, adam in ag.named_adams():
        for i in range(len(adam.m_weights)):
            adam.m_weights[i][:] = blocks[f"{adam_name}.layer{i}.m_weight"]
            adam.m_biases[i][:] = blocks[f"{adam_name}.layer{i}.m_bias"]
            adam.v_weights[i][:] = blocks[f"{adam_name}.layer{i}.v_weight"]
            adam.v_biases[i][:] = blocks[f"{adam_name}.layer{i}.v_bias"]
        adam.step = int(blocks[f"{adam_name}.step"])
    ag.s_kl.s, ag.s_q.s, ag.s_p.s = (float(v) for v in blocks["scales"])
    cap, obs_dim, action_dim, count = (int(v) for v in blocks["buffer.meta"])
    buf = replay.ReplayBuffer(cap, obs_dim, action_dim, cfg.plan_sigma_min,
                              cfg.plan_sigma_max)
    buf.count = count
    for name in ("obs", "action", "reward", "next_obs", "plan_mean",
                 "plan_std", "episode", "step", "done"):
        getattr(buf, name)[:] = blocks[f"buffer.{name}"]
    counters = blocks["counters"]
    state = TrainerState(
        cfg=cfg, spec=spec, agent=ag, buffer=buf,
        rng_env=_rng_from_bytes(blocks["rng.env"]),
        rng_act=_rng_from_bytes(blocks["rng.act"]),
        rng_update=_rng_from_bytes(blocks["rng.update"]),
        env_state=envs.EnvState(blocks["env.phys"].copy(),
                                int(blocks["env.t"])),
        obs=blocks["obs"].copy(),
        warm_mean=(blocks["warm.mean"].copy()
                   if int(blocks["warm.present"]) else None),
        env_step=int(counters[0]), n_updates=int(counters[1]),
        episode_idx=int(counters[2]), episode_len=int(counters[3]),
        planner_fallbacks=int(counters[4]), reanalyze_events=int(counters[5]),
        episode_return=float(blocks["episode_return"]),
        metrics=MetricsWriter(metrics_path))
    state.metrics.row_counter = int(counters[6])
    return state
