"""Minimal MLP substrate: analytic backprop, Adam, gradient-norm clipping.

Every learned function in the package (encoder, dynamics, reward and
value heads, the two policies) is a stack of dense layers built from
``MlpParams``. There is no autodiff graph: ``forward`` records a tape and
``backward`` replays it, so each loss composes its own exact backward
pass from these primitives. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _core


class ShapeError(ValueError):
    """Array dimensions inconsistent with the declared layer sizes."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


ACT_IDS = {"identity": _core.ACT_IDENTITY,
           "mish": _core.ACT_MISH,
           "tanh": _core.ACT_TANH}


def _act(u, name):
    """Activation value plus the cache its derivative needs."""
    if name == "identity":
        return u, None
    if name == "tanh":
        y = np.tanh(u)
        return y, y
    if name == "mish":
        w = np.exp(-np.abs(u))
        t = np.tanh(np.maximum(u, 0.0) + np.log1p(w))
        return u * t, (t, w)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(u, cache, name):
    """d act(u)/du from the pre-activation and the forward cache."""
    if name == "identity":
        return 1.0
    if name == "tanh":
        return 1.0 - cache * cache
    if name == "mish":
        t, w = cache
        # sigmoid(u) from w = exp(-|u|): 1/(1+w) for u>=0, w/(1+w) below
        sig = np.where(u >= 0.0, 1.0, w) / (1.0 + w)
        return t + u * sig * (1.0 - t * t)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class MlpParams:
    """Dense-layer stack: weights[i] is (out, in), biases[i] is (out,).

    activations and dropout hold one entry per layer; dropout rates are
    inverted-dropout keep-noise applied after the layer's activation,
    active only in train-mode forwards.
    """

    weights: list
    biases: list
    activations: list
    dropout: list

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def in_dim(self):
        return self.weights[0].shape[1]

    @property
    def out_dim(self):
        return self.weights[-1].shape[0]

    def validate(self):
        if not (len(self.weights) == len(self.biases)
                == len(self.activations) == len(self.dropout)):
            raise ShapeError("per-layer field lengths disagree")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(f"layer {i}: input width {w.shape[1]} != "
                                 f"previous output {self.weights[i - 1].shape[0]}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NumericError(f"layer {i}: non-finite parameters")
            if not 0.0 <= self.dropout[i] < 1.0:
                raise ValueError(f"layer {i}: dropout rate {self.dropout[i]}")
        return self

    def copy(self):
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases],
                         list(self.activations), list(self.dropout))

    def arrays(self):
        """Yield (name, array) pairs, checkpoint order."""
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"layer{i}.weight", w
            yield f"layer{i}.bias", b


def init_mlp(rng, dims, hidden_activation="mish", output_activation="identity",
             dropout=0.0):
    """Build an MLP with uniform fan-in init (+-sqrt(1/fan_in)), zero biases.

    Args:
        rng: numpy Generator.
        dims: layer widths, e.g. (in, hidden, hidden, out).
        hidden_activation: nonlinearity for all but the last layer.
        output_activation: nonlinearity for the last layer.
        dropout: rate applied after hidden activations (never on the output).
    """
    weights, biases, acts, drops = [], [], [], []
    n_layers = len(dims) - 1
    for i in range(n_layers):
        fan_in = dims[i]
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(dims[i + 1], fan_in)))
        biases.append(np.zeros(dims[i + 1]))
        last = i == n_layers - 1
        acts.append(output_activation if last else hidden_activation)
        drops.append(0.0 if last else float(dropout))
    return MlpParams(weights, biases, acts, drops).validate()


@dataclass
class Tape:
    """Activation cache from one forward pass; consumed by backward()."""

    params: MlpParams
    inputs: list          # per layer: (n, in) input batch
    preacts: list         # per layer: (n, out) pre-activation
    act_caches: list      # per layer: nonlinearity cache for the derivative
    masks: list           # per layer: dropout keep-mask / (1-rate), or None
    single: bool          # True if the caller passed a 1-D input


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ShapeError(f"expected 1-D or 2-D input, got ndim={x.ndim}")


def forward(params, x, train=False, rng=None):
    """Train-capable forward pass.

    Returns (output, tape). With ``train`` unset the result is
    deterministic in (params, x); with it set, dropout masks are drawn
    from ``rng`` and recorded on the tape so backward() differentiates
    the exact sampled network.
    """
    h, single = _as_batch(x)
    if h.shape[1] != params.in_dim:
        raise ShapeError(f"input width {h.shape[1]} != {params.in_dim}")
    if not np.isfinite(h).all():
        raise NumericError("non-finite forward input")
    inputs, preacts, act_caches, masks = [], [], [], []
    for w, b, act, rate in zip(params.weights, params.biases,
                               params.activations, params.dropout):
        inputs.append(h)
        u = h @ w.T + b
        preacts.append(u)
        h, cache = _act(u, act)
        act_caches.append(cache)
        if train and rate > 0.0:
            if rng is None:
                raise ValueError("train-mode dropout requires an rng")
            keep = (rng.random(h.shape) >= rate) / (1.0 - rate)
            masks.append(keep)
            h = h * keep
        else:
            masks.append(None)
    tape = Tape(params, inputs, preacts, act_caches, masks, single)
    return (h[0] if single else h), tape


def forward_eval(params, x):
    """Eval-mode forward through the selected kernel backend (no tape).

    Does not reject non-finite values: the planner handles them by
    disqualifying trajectories downstream.
    """
    h, single = _as_batch(x)
    if h.shape[1] != params.in_dim:
        raise ShapeError(f"input width {h.shape[1]} != {params.in_dim}")
    act_ids = [ACT_IDS[a] for a in params.activations]
    out = _core.mlp_forward(h, params.weights, params.biases, act_ids)
    return out[0] if single else out


@dataclass
class GradBundle:
    """Per-layer gradients shaped like MlpParams, with cached global norm."""

    d_weights: list
    d_biases: list
    global_norm: float = field(default=None)

    def __post_init__(self):
        if self.global_norm is None:
            self.global_norm = global_norm(self)

    def scaled(self, factor):
        return GradBundle([dw * factor for dw in self.d_weights],
                          [db * factor for db in self.d_biases],
                          self.global_norm * factor)

    def add_(self, other):
        """In-place accumulate; invalidates and recomputes the cached norm."""
        for dw, ow in zip(self.d_weights, other.d_weights):
            dw += ow
        for db, ob in zip(self.d_biases, other.d_biases):
            db += ob
        self.global_norm = global_norm(self)
        return self


def global_norm(grads):
    total = 0.0
    for dw in grads.d_weights:
        total += float(np.sum(dw * dw))
    for db in grads.d_biases:
        total += float(np.sum(db * db))
    return float(np.sqrt(total))


def zero_grads(params):
    return GradBundle([np.zeros_like(w) for w in params.weights],
                      [np.zeros_like(b) for b in params.biases], 0.0)


def backward(tape, output_grad):
    """Exact reverse pass for one taped forward.

    Args:
        tape: cache from forward().
        output_grad: gradient of the loss w.r.t. the forward output,
            same shape as that output (1-D if the input was 1-D).

    Returns:
        (GradBundle, input_grad).
    """
    dh = np.asarray(output_grad, dtype=np.float64)
    if tape.single:
        dh = dh[None, :]
    if dh.shape != (tape.inputs[-1].shape[0], tape.params.out_dim):
        raise ShapeError(f"output_grad shape {dh.shape} does not match tape")
    n_layers = tape.params.n_layers
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        if tape.masks[i] is not None:
            dh = dh * tape.masks[i]
        du = dh * _act_grad(tape.preacts[i], tape.act_caches[i],
                            tape.params.activations[i])
        d_weights[i] = du.T @ tape.inputs[i]
        d_biases[i] = du.sum(axis=0)
        dh = du @ tape.params.weights[i]
    return GradBundle(d_weights, d_biases), (dh[0] if tape.single else dh)


@dataclass
class AdamState:
    """Bias-corrected Adam accumulators shaped like the parameters."""

    m_weights: list
    m_biases: list
    v_weights: list
    v_biases: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params, beta1=0.9, beta2=0.999, eps=1e-8):
    return AdamState([np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(b) for b in params.biases],
                     [np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(b) for b in params.biases],
                     0, beta1, beta2, eps)


def adam_step(params, state, grads, lr):
    """One bias-corrected Adam update, applied in place.

    Refuses the update (NumericError) if any gradient entry is non-finite.
    Returns (params, state) for call-site chaining.
    """
    if lr <= 0.0:
        raise ValueError("lr must be positive")
    for dw in grads.d_weights:
        if not np.isfinite(dw).all():
            raise NumericError("non-finite weight gradient")
    for db in grads.d_biases:
        if not np.isfinite(db).all():
            raise NumericError("non-finite bias gradient")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for w, m, v, g in zip(params.weights, state.m_weights, state.v_weights,
                          grads.d_weights):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        w -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    for b, m, v, g in zip(params.biases, state.m_biases, state.v_biases,
                          grads.d_biases):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        b -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def clip_global_norm(grads, max_norm):
    """Scale gradients so the global L2 norm is at most max_norm."""
    if max_norm <= 0.0:
        raise ValueError("max_norm must be positive")
    if grads.global_norm <= max_norm:
        return grads
    return grads.scaled(max_norm / grads.global_norm)


def clip_global_norm_joint(bundle_list, max_norm):
    """Clip several bundles by their joint global norm (one shared factor).

    Used when one backward pass produces gradients for multiple
    parameter groups that are clipped together before separate
    optimizer updates.
    """
    if max_norm <= 0.0:
        raise ValueError("max_norm must be positive")
    total = np.sqrt(sum(g.global_norm ** 2 for g in bundle_list))
    if total <= max_norm:
        return list(bundle_list)
    factor = max_norm / total
    return [g.scaled(factor) for g in bundle_list]
