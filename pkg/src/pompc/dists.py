"""Diagonal Gaussian algebra: sampling, log-density, entropy, KL.

Means and stds may carry arbitrary leading batch dimensions; reductions
(log_prob, entropy, kl) sum over the trailing action dimension only.
Policies emit tanh-bounded means with clamped stds and sampled actions
are clipped to the action box by callers; no squashing correction is
applied, so every KL here stays closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class DiagGaussian:
    """mean and per-dimension std over the action space; std > 0."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape:
            raise ValueError(
                f"mean shape {self.mean.shape} != std shape {self.std.shape}")

    def validate(self):
        if not np.isfinite(self.mean).all():
            raise ValueError("non-finite mean")
        if not (np.isfinite(self.std).all() and (self.std > 0).all()):
            raise ValueError("std must be finite and strictly positive")
        return self

    @property
    def dim(self):
        return self.mean.shape[-1]

    def __getitem__(self, idx):
        return DiagGaussian(self.mean[idx], self.std[idx])


def sample(d, noise):
    """Reparameterized draw: mean + std * noise (no clipping here)."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape[-1] != d.dim:
        raise ValueError(f"noise dim {noise.shape[-1]} != {d.dim}")
    return d.mean + d.std * noise


def log_prob(d, x):
    """Sum over dimensions of the univariate Gaussian log-density."""
    x = np.asarray(x, dtype=np.float64)
    z = (x - d.mean) / d.std
    return np.sum(-0.5 * z * z - np.log(d.std) - 0.5 * LOG_2PI, axis=-1)


def entropy(d):
    """Differential entropy: sum_i [0.5 ln(2 pi e) + ln std_i]."""
    return np.sum(0.5 * (LOG_2PI + 1.0) + np.log(d.std), axis=-1)


def kl(p, q):
    """KL(p || q) for diagonal Gaussians, summed over dimensions.

    Closed form per dimension:
        ln(sq/sp) + (sp^2 + (mp - mq)^2) / (2 sq^2) - 1/2
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    var_ratio = (p.std / q.std) ** 2
    delta = (p.mean - q.mean) / q.std
    return np.sum(np.log(q.std) - np.log(p.std)
                  + 0.5 * (var_ratio + delta * delta) - 0.5, axis=-1)
