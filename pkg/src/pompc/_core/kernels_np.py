"""Pure-numpy evaluation kernels.

Reference implementation of the hot planner kernels: fused eval-mode MLP
forward chains and grouped-simplex normalization. The compiled core in
``kernels_cy`` implements the same API; either one is exposed through
``pompc._core`` depending on availability and the POMPC_BACKEND variable.
"""

import numpy as np

NAME = "numpy"

ACT_IDENTITY = 0
ACT_MISH = 1
ACT_TANH = 2


def activate(u, act_id):
    """Apply an elementwise activation by id."""
    if act_id == ACT_IDENTITY:
        return u
    if act_id == ACT_TANH:
        return np.tanh(u)
    if act_id == ACT_MISH:
        # softplus via max(u,0) + log1p(exp(-|u|)): exact, overflow-free
        sp = np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))
        return u * np.tanh(sp)
    raise ValueError(f"unknown activation id {act_id}")


def mlp_forward(x, weights, biases, act_ids):
    """Eval-mode MLP chain: repeated (x @ W.T + b) then activation.

    Args:
        x: (n, in_dim) float64 input batch.
        weights: list of (out, in) float64 matrices.
        biases: list of (out,) float64 vectors.
        act_ids: list of per-layer activation ids.

    Returns:
        (n, out_dim) float64 output batch.
    """
    h = x
    for w, b, act in zip(weights, biases, act_ids):
        h = h @ w.T + b
        if act != ACT_IDENTITY:
            h = activate(h, act)
    return h


def simnorm(x, group):
    """Grouped softmax over contiguous groups of size ``group``.

    Each row of ``x`` is split into d/group groups; a softmax is applied
    within every group so each group sums to one.
    """
    n, d = x.shape
    g = x.reshape(n, d // group, group)
    m = g.max(axis=-1, keepdims=True)
    e = np.exp(g - m)
    out = e / e.sum(axis=-1, keepdims=True)
    return out.reshape(n, d)
