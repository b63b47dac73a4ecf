import subprocess
import sys

import numpy as np
import pytest

from pompc import _core
from pompc._core import kernels_np

try:
    from pompc._core import kernels_cy
except ImportError:
    kernels_cy = None

needs_ext = pytest.mark.skipif(kernels_cy is None,
                               reason="compiled kernels not built")


def _chain(rng, widths):
    weights = [rng.standard_normal((o, i)) for i, o in zip(widths, widths[1:])]
    biases = [rng.standard_normal(o) for o in widths[1:]]
    return weights, biases


def test_numpy_kernels_match_plain_numpy():
    rng = np.random.default_rng(0)
    weights, biases = _chain(rng, (5, 8, 3))
    x = rng.standard_normal((7, 5))
    got = kernels_np.mlp_forward(x, weights, biases,
                                 [kernels_np.ACT_MISH,
                                  kernels_np.ACT_IDENTITY])
    sp = np.maximum(0.0, x @ weights[0].T + biases[0]) + np.log1p(
        np.exp(-np.abs(x @ weights[0].T + biases[0])))
    h = (x @ weights[0].T + biases[0]) * np.tanh(sp)
    expected = h @ weights[1].T + biases[1]
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-14)


@needs_ext
@pytest.mark.parametrize("acts", [[0, 0], [1, 0], [2, 1], [1, 2]])
def test_backends_agree_on_mlp(acts):
    rng = np.random.default_rng(1)
    weights, biases = _chain(rng, (6, 16, 4))
    x = rng.standard_normal((64, 6)) * 3.0
    a = kernels_np.mlp_forward(x, weights, biases, acts)
    b = kernels_cy.mlp_forward(x, weights, biases, acts)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@needs_ext
def test_backends_agree_on_simnorm():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((32, 24)) * 5.0
    np.testing.assert_allclose(kernels_np.simnorm(x, 8),
                               kernels_cy.simnorm(x, 8),
                               rtol=1e-13, atol=1e-15)


@needs_ext
def test_backends_agree_extreme_inputs():
    x = np.array([[-700.0, -30.0, -1e-8, 0.0, 1e-8, 30.0, 700.0]])
    w = [np.eye(7)]
    b = [np.zeros(7)]
    a = kernels_np.mlp_forward(x, w, b, [kernels_np.ACT_MISH])
    c = kernels_cy.mlp_forward(x, w, b, [kernels_np.ACT_MISH])
    assert np.isfinite(a).all() and np.isfinite(c).all()
    np.testing.assert_allclose(a, c, rtol=1e-12, atol=1e-15)


def test_selected_backend_exposed():
    assert _core.BACKEND in ("numpy", "cython")
    out = _core.mlp_forward(np.zeros((2, 3)),
                            [np.zeros((4, 3))], [np.ones(4)], [0])
    np.testing.assert_array_equal(out, np.ones((2, 4)))


def test_backend_env_var_forces_numpy():
    code = ("import pompc; print(pompc.BACKEND)")
    out = subprocess.run([sys.executable, "-c", code],
                         env={"POMPC_BACKEND": "numpy", "PATH": "/usr/bin"},
                         capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"


def test_backend_env_var_rejects_unknown():
    code = "import pompc"
    out = subprocess.run([sys.executable, "-c", code],
                         env={"POMPC_BACKEND": "fortran", "PATH": "/usr/bin"},
                         capture_output=True, text=True)
    assert out.returncode != 0
