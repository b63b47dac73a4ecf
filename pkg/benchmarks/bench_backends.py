#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-numpy fallback.

Times the fused eval-mode MLP forward and the grouped softmax on
planner-shaped workloads (population-sized batches through dynamics,
reward, and value-head chains), then a full plan() call on each backend.

Run from the repository root:

    python benchmarks/bench_backends.py
"""

import timeit

import numpy as np
from threadpoolctl import threadpool_limits

from pompc import dists, planner
from pompc._core import kernels_np

try:
    from pompc._core import kernels_cy
except ImportError:
    kernels_cy = None


def _chain(rng, widths):
    weights = [rng.standard_normal((o, i)) / np.sqrt(i)
               for i, o in zip(widths, widths[1:])]
    biases = [rng.standard_normal(o) * 0.01 for o in widths[1:]]
    return weights, biases


KERNEL_CASES = [
    # (label, batch, widths, act ids)
    ("dynamics chain, desk planner batch", 48, (65, 64, 64, 64), (1, 1, 0)),
    ("reward head, desk planner batch", 48, (65, 64, 64, 101), (1, 1, 0)),
    ("value head, desk update batch", 64, (65, 64, 64, 101), (1, 1, 0)),
    ("dynamics chain, full planner batch", 512, (513, 512, 512, 512),
     (1, 1, 0)),
]


def bench_kernels():
    rng = np.random.default_rng(0)
    print(f"{'case':<38} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for label, batch, widths, acts in KERNEL_CASES:
        weights, biases = _chain(rng, widths)
        x = rng.standard_normal((batch, widths[0]))
        n_calls = max(20, int(2e7 / (batch * widths[1] * widths[0])))
        t_np = timeit.timeit(
            lambda: kernels_np.mlp_forward(x, weights, biases, list(acts)),
            number=n_calls) / n_calls * 1e6
        if kernels_cy is None:
            print(f"{label:<38} {t_np:>8.1f}us {'-':>10} {'-':>8}")
            continue
        got_np = kernels_np.mlp_forward(x, weights, biases, list(acts))
        got_cy = kernels_cy.mlp_forward(x, weights, biases, list(acts))
        rel = np.max(np.abs(got_np - got_cy)) / max(np.max(np.abs(got_np)),
                                                    1e-300)
        assert rel < 1e-12, f"backend disagreement {rel:.2e}"
        t_cy = timeit.timeit(
            lambda: kernels_cy.mlp_forward(x, weights, biases, list(acts)),
            number=n_calls) / n_calls * 1e6
        print(f"{label:<38} {t_np:>8.1f}us {t_cy:>8.1f}us "
              f"{t_np / t_cy:>7.2f}x")


class _MlpModel:
    """Planner-facing model over raw kernel chains."""

    def __init__(self, kernels, rng, latent, adim):
        self.kernels = kernels
        self.action_dim = adim
        self.latent = latent
        self.dyn_w, self.dyn_b = _chain(rng, (latent + adim, 64, 64, latent))
        self.rew_w, self.rew_b = _chain(rng, (latent + adim, 64, 64, 1))

    def dynamics(self, z, a):
        za = np.concatenate([z, a], axis=-1)
        out = self.kernels.mlp_forward(za, self.dyn_w, self.dyn_b, [1, 1, 0])
        return self.kernels.simnorm(out, 8)

    def reward(self, z, a):
        za = np.concatenate([z, a], axis=-1)
        return self.kernels.mlp_forward(za, self.rew_w, self.rew_b,
                                        [1, 1, 0])[:, 0]


def bench_plan():
    cfg = planner.PlanConfig(horizon=3, iterations=4, population=48,
                             policy_samples=4, elites=6, temperature=1.0,
                             sigma_min=0.05, sigma_max=2.0, discount=0.99)

    def policy_dist(z):
        shape = z.shape[:-1] + (1,)
        return dists.DiagGaussian(np.zeros(shape), np.full(shape, 0.3))

    def q_fn(z, a):
        return np.zeros(z.shape[0])

    print(f"\n{'full plan() call':<38} {'numpy':>10} {'cython':>10} "
          f"{'speedup':>8}")
    results = {}
    for name, kernels in (("numpy", kernels_np), ("cython", kernels_cy)):
        if kernels is None:
            continue
        rng = np.random.default_rng(0)
        model = _MlpModel(kernels, rng, latent=64, adim=1)
        z0 = kernels.simnorm(rng.standard_normal((1, 64)), 8)[0]
        n = 40
        results[name] = timeit.timeit(
            lambda: planner.plan(z0, None, cfg, policy_dist, model, q_fn,
                                 np.random.default_rng(7)),
            number=n) / n * 1e3
    line = f"{'desk config, 64-dim latent':<38}"
    line += f" {results['numpy']:>8.1f}ms"
    if "cython" in results:
        line += (f" {results['cython']:>8.1f}ms"
                 f" {results['numpy'] / results['cython']:>7.2f}x")
    print(line)


if __name__ == "__main__":
    if kernels_cy is None:
        print("compiled core not built; timing the numpy fallback only\n")
    with threadpool_limits(limits=1, user_api="blas"):
        bench_kernels()
        bench_plan()
