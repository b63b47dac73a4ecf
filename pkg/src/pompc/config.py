"""Run configuration: flat dotted-key text files and two built-in profiles.

``table1`` carries the published full-scale hyperparameters; ``desk``
shrinks network widths, planner population, and buffer sizes to
laptop-CPU scale while keeping every coefficient and ratio. Config files
are plain text, one ``dotted.key = value`` per line, ``#`` comments;
``--set key=value`` overrides win over the file. The KL strength accepts
``inf`` to select the KL-only policy update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from . import planner, prior, worldmodel


def _parse_lam(text):
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class TrainConfig:
    """Every run hyperparameter, flat; see KEYS for the dotted names."""

    # general
    seed: int = 0
    total_steps: int = 30_000
    seeding_steps: int = 1_000
    update_every: int = 1
    lr: float = 3e-4
    max_grad_norm: float = 20.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    # environment
    env_name: str = "pendulum"
    # replay
    replay_capacity: int = 100_000
    # world model
    encoder_dim: int = 64
    num_encoder_layers: int = 2
    latent_dim: int = 64
    hidden_dim: int = 64
    activation: str = "mish"
    dropout: float = 0.01
    num_value_nets: int = 5
    num_bins: int = 101
    symlog_min: float = -10.0
    symlog_max: float = 10.0
    simnorm_dim: int = 8
    # planner
    plan_horizon: int = 3
    plan_iterations: int = 4
    plan_population: int = 48
    plan_policy_samples: int = 4
    plan_elites: int = 6
    plan_sigma_min: float = 0.05
    plan_sigma_max: float = 2.0
    plan_temperature: float = 1.0
    eval_deterministic: bool = True
    # training
    batch_size: int = 64
    discount: float = 0.99
    rho: float = 0.5
    consistency_coef: float = 20.0
    reward_coef: float = 0.1
    value_coef: float = 0.1
    entropy_coef: float = 1e-4
    tau: float = 0.01
    # po-mpc
    lam: float = 1.0
    klq_coef: float = 0.1
    prior_mode: str = prior.REVERSE_KL
    reanalyze_batch: int = 20
    reanalyze_interval: int = 10
    # policy heads
    policy_hidden_dim: int = 64
    log_std_min: float = -10.0
    log_std_max: float = 2.0
    # io
    eval_episodes: int = 10
    metrics_path: str = ""
    checkpoint_path: str = ""

    def validate(self):
        if self.latent_dim % self.simnorm_dim != 0:
            raise ValueError("latent_dim must be a multiple of simnorm_dim")
        if self.prior_mode not in prior.PRIOR_MODES:
            raise ValueError(f"prior_mode must be one of {prior.PRIOR_MODES}")
        if self.activation not in ("mish", "tanh"):
            raise ValueError("model.activation must be mish or tanh")
        if self.env_name not in ("pendulum", "pointmass"):
            raise ValueError(f"unknown env {self.env_name!r}")
        if not (self.lam >= 0):
            raise ValueError("lam must be >= 0 (or inf)")
        if self.update_every < 1 or self.batch_size < 2:
            raise ValueError("update_every >= 1 and batch_size >= 2 required")
        if self.seeding_steps < 0:
            raise ValueError("seeding_steps must be >= 0")
        self.plan_config().validate()
        return self

    def plan_config(self):
        return planner.PlanConfig(
            horizon=self.plan_horizon, iterations=self.plan_iterations,
            population=self.plan_population,
            policy_samples=self.plan_policy_samples, elites=self.plan_elites,
            temperature=self.plan_temperature, sigma_min=self.plan_sigma_min,
            sigma_max=self.plan_sigma_max, discount=self.discount)

    def wm_coefs(self):
        return worldmodel.WorldModelLossCoefs(
            consistency=self.consistency_coef, reward=self.reward_coef,
            value=self.value_coef, rho=self.rho)


# dotted key -> (attribute, parser)
KEYS = {
    "seed": ("seed", int),
    "total_steps": ("total_steps", int),
    "seeding_steps": ("seeding_steps", int),
    "update_every": ("update_every", int),
    "lr": ("lr", float),
    "max_grad_norm": ("max_grad_norm", float),
    "adam.beta1": ("adam_beta1", float),
    "adam.beta2": ("adam_beta2", float),
    "env.name": ("env_name", str),
    "replay.capacity": ("replay_capacity", int),
    "model.encoder_dim": ("encoder_dim", int),
    "model.num_encoder_layers": ("num_encoder_layers", int),
    "model.latent_dim": ("latent_dim", int),
    "model.hidden_dim": ("hidden_dim", int),
    "model.activation": ("activation", str),
    "model.dropout": ("dropout", float),
    "model.num_value_nets": ("num_value_nets", int),
    "model.num_bins": ("num_bins", int),
    "model.symlog_min": ("symlog_min", float),
    "model.symlog_max": ("symlog_max", float),
    "model.simnorm_dim": ("simnorm_dim", int),
    "plan.horizon": ("plan_horizon", int),
    "plan.iterations": ("plan_iterations", int),
    "plan.population": ("plan_population", int),
    "plan.policy_samples": ("plan_policy_samples", int),
    "plan.elites": ("plan_elites", int),
    "plan.sigma_min": ("plan_sigma_min", float),
    "plan.sigma_max": ("plan_sigma_max", float),
    "plan.temperature": ("plan_temperature", float),
    "plan.eval_deterministic": ("eval_deterministic", _parse_bool),
    "train.batch_size": ("batch_size", int),
    "train.discount": ("discount", float),
    "train.rho": ("rho", float),
    "train.consistency_coef": ("consistency_coef", float),
    "train.reward_coef": ("reward_coef", float),
    "train.value_coef": ("value_coef", float),
    "train.entropy_coef": ("entropy_coef", float),
    "train.tau": ("tau", float),
    "lambda": ("lam", _parse_lam),
    "pompc.klq_coef": ("klq_coef", float),
    "prior.mode": ("prior_mode", str),
    "reanalyze.batch": ("reanalyze_batch", int),
    "reanalyze.interval": ("reanalyze_interval", int),
    "policy.hidden_dim": ("policy_hidden_dim", int),
    "policy.log_std_min": ("log_std_min", float),
    "policy.log_std_max": ("log_std_max", float),
    "eval.episodes": ("eval_episodes", int),
    "io.metrics_path": ("metrics_path", str),
    "io.checkpoint_path": ("checkpoint_path", str),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in KEYS.items()}

# Full-scale published configuration; only these keys differ from desk.
TABLE1_OVERRIDES = {
    "total_steps": 1_000_000,
    "replay_capacity": 1_000_000,
    "encoder_dim": 256,
    "latent_dim": 512,
    "hidden_dim": 256,
    "plan_iterations": 8,
    "plan_population": 512,
    "plan_policy_samples": 24,
    "plan_elites": 64,
    "batch_size": 256,
    "policy_hidden_dim": 256,
}

PROFILES = ("desk", "table1")


def make_config(profile="desk"):
    cfg = TrainConfig()
    if profile == "table1":
        for attr, val in TABLE1_OVERRIDES.items():
            setattr(cfg, attr, val)
    elif profile != "desk":
        raise ValueError(f"unknown profile {profile!r}; choose from {PROFILES}")
    return cfg


def set_key(cfg, key, raw_value):
    """Apply one dotted-key assignment, with type coercion."""
    if key not in KEYS:
        raise KeyError(f"unknown config key {key!r}")
    attr, parser = KEYS[key]
    setattr(cfg, attr, parser(raw_value) if isinstance(raw_value, str)
            else raw_value)


def parse_text(text):
    """Parse config text into (profile, {key: raw value}) pairs."""
    profile = "desk"
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key == "profile":
            profile = value
        else:
            if key not in KEYS:
                raise KeyError(f"line {lineno}: unknown config key {key!r}")
            pairs[key] = value
    return profile, pairs


def from_text(text, overrides=()):
    """Build a config from file text plus ``key=value`` override strings."""
    profile, pairs = parse_text(text)
    cfg = make_config(profile)
    for key, value in pairs.items():
        set_key(cfg, key, value)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r}: expected key=value")
        key, _, value = item.partition("=")
        set_key(cfg, key.strip(), value.strip())
    return cfg.validate()


def from_file(path, overrides=()):
    with open(path, "r", encoding="utf-8") as f:
        return from_text(f.read(), overrides)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return repr(value) if isinstance(value, float) else str(value)


def dump(cfg):
    """Effective configuration as parseable text, field-registry order."""
    lines = []
    for f in fields(cfg):
        key = _ATTR_TO_KEY[f.name]
        lines.append(f"{key} = {_format(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
