"""Finite-difference gradient checks and behavior tests for every layer."""

import numpy as np
import pytest

from errdecode.errors import ConfigError, DataError
from errdecode.nn.layers import (
    ELU,
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    LogSoftmax,
    MaxPool,
    MeanPool,
    SafeLog,
    Square,
)
from errdecode.rng import derive_rng


def max_rel_err(analytic, numeric):
    """Worst elementwise relative error, floored to ignore double-noise."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def fd_scalar(fn, arr, indices=None, eps=1e-5):
    """Central differences of scalar fn with respect to arr, in place."""
    flat = arr.reshape(-1)
    if indices is None:
        indices = range(flat.size)
    grad = {}
    for i in indices:
        orig = flat[i]
        flat[i] = orig + eps
        fp = fn()
        flat[i] = orig - eps
        fm = fn()
        flat[i] = orig
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad


def check_module(mod, x, mode="train", drop_seed=None, atol=1e-3):
    """FD-check input and parameter gradients of one module.

    The module output is projected to a scalar with a fixed random
    direction; its analytic pullback must match central differences on
    every input element and every parameter element.
    """
    x = np.asarray(x, dtype=np.float64)
    mod.astype(np.float64)

    def run():
        rng = derive_rng(drop_seed) if drop_seed is not None else None
        return mod.forward(x, mode=mode, rng=rng)

    r = np.random.default_rng(7).standard_normal(run().shape)

    def loss():
        return float((run() * r).sum())

    mod.zero_grad()
    run()
    dx = mod.backward(r)

    num = fd_scalar(loss, x)
    ana = dx.reshape(-1)
    err = max(max_rel_err(ana[i], g) for i, g in num.items())
    assert err < atol, f"input gradient off by {err:.2e}"

    for name, p in mod.params.items():
        mod.zero_grad()
        run()
        mod.backward(r)
        ana_p = mod.grads[name].reshape(-1)
        num_p = fd_scalar(loss, p)
        err = max(max_rel_err(ana_p[i], g) for i, g in num_p.items())
        assert err < atol, f"gradient of {name} off by {err:.2e}"


def _smooth_input(shape, seed=0, offset=0.0):
    """Standard normal input nudged away from kink points."""
    x = np.random.default_rng(seed).standard_normal(shape)
    x = np.where(np.abs(x) < 0.05, 0.3, x)
    return x + offset


class TestConvGradients:
    def test_temporal_conv(self):
        rng = derive_rng(11)
        mod = Conv2d(2, 3, (1, 4), use_bias=True)
        mod.init_params(rng)
        check_module(mod, _smooth_input((2, 2, 3, 9), seed=1))

    def test_temporal_conv_no_bias(self):
        mod = Conv2d(1, 4, (1, 3), use_bias=False)
        mod.init_params(derive_rng(12))
        check_module(mod, _smooth_input((3, 1, 2, 8), seed=2))

    def test_spatial_conv_full_height(self):
        mod = Conv2d(3, 2, (4, 1), use_bias=True)
        mod.init_params(derive_rng(13))
        check_module(mod, _smooth_input((2, 3, 4, 5), seed=3))

    def test_strided_conv(self):
        mod = Conv2d(2, 2, (1, 3), stride=(1, 2), use_bias=True)
        mod.init_params(derive_rng(14))
        check_module(mod, _smooth_input((2, 2, 1, 11), seed=4))

    def test_output_shape(self):
        mod = Conv2d(1, 5, (1, 10))
        mod.init_params(derive_rng(0))
        out = mod.forward(np.zeros((4, 1, 3, 40)))
        assert out.shape == (4, 5, 3, 31)

    def test_input_smaller_than_kernel(self):
        mod = Conv2d(1, 2, (1, 8))
        with pytest.raises(DataError):
            mod.forward(np.zeros((1, 1, 1, 5)))

    def test_bad_kernel(self):
        with pytest.raises(ConfigError):
            Conv2d(1, 2, (0, 3))


class TestBatchNormGradients:
    def test_train_mode(self):
        mod = BatchNorm(3)
        rng = np.random.default_rng(5)
        mod.params["gamma"] = rng.uniform(0.5, 1.5, 3)
        mod.params["beta"] = rng.standard_normal(3)
        check_module(mod, _smooth_input((4, 3, 2, 5), seed=5))

    def test_eval_mode(self):
        mod = BatchNorm(2)
        mod.buffers["running_mean"] = np.array([0.3, -0.2])
        mod.buffers["running_var"] = np.array([1.5, 0.7])
        check_module(mod, _smooth_input((3, 2, 1, 6), seed=6), mode="eval")

    def test_train_output_standardized(self):
        mod = BatchNorm(2)
        x = np.random.default_rng(0).standard_normal((8, 2, 3, 50))
        y = mod.forward(x, mode="train")
        assert np.allclose(y.mean(axis=(0, 2, 3)), 0.0, atol=1e-7)
        assert np.allclose(y.var(axis=(0, 2, 3)), 1.0, atol=1e-4)

    def test_running_stats_move_toward_batch(self):
        mod = BatchNorm(1)
        x = np.full((4, 1, 1, 10), 3.0) + np.random.default_rng(1).standard_normal(
            (4, 1, 1, 10)
        )
        mod.forward(x, mode="train")
        assert 0 < mod.buffers["running_mean"][0] < x.mean()
        for _ in range(200):
            mod.forward(x, mode="train")
        assert np.isclose(mod.buffers["running_mean"][0], x.mean(), atol=1e-3)


class TestActivationGradients:
    def test_elu(self):
        check_module(ELU(), _smooth_input((3, 2, 1, 7), seed=7))

    def test_elu_values(self):
        y = ELU().forward(np.array([[-1.0, 0.0, 2.0]]))
        assert np.allclose(y, [[np.expm1(-1.0), 0.0, 2.0]])

    def test_square(self):
        check_module(Square(), _smooth_input((2, 2, 2, 5), seed=8))

    def test_safe_log(self):
        x = np.abs(_smooth_input((2, 2, 1, 6), seed=9)) + 0.5
        check_module(SafeLog(), x)

    def test_safe_log_clamps(self):
        y = SafeLog().forward(np.array([0.0, 1e-12, 1.0]))
        assert np.all(np.isfinite(y))
        assert y[0] == y[1] == np.log(1e-6)

    def test_log_softmax(self):
        check_module(LogSoftmax(), _smooth_input((5, 4), seed=10))

    def test_log_softmax_normalizes(self):
        y = LogSoftmax().forward(np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 1000.0]]))
        assert np.allclose(np.exp(y).sum(axis=1), 1.0)
        assert np.all(np.isfinite(y))


class TestPoolGradients:
    def test_max_pool(self):
        check_module(MaxPool(3, 3), _smooth_input((2, 2, 2, 9), seed=11))

    def test_max_pool_overlapping(self):
        check_module(MaxPool(3, 2), _smooth_input((2, 1, 1, 11), seed=12))

    def test_mean_pool(self):
        check_module(MeanPool(4, 2), _smooth_input((2, 2, 1, 10), seed=13))

    def test_max_pool_values(self):
        x = np.arange(6.0)[None, None, None, :]
        y = MaxPool(2, 2).forward(x)
        assert np.allclose(y, [[[[1.0, 3.0, 5.0]]]])

    def test_mean_pool_values(self):
        x = np.arange(6.0)[None, None, None, :]
        y = MeanPool(3, 3).forward(x)
        assert np.allclose(y, [[[[1.0, 4.0]]]])

    def test_pool_too_long(self):
        with pytest.raises(DataError):
            MaxPool(8, 1).forward(np.zeros((1, 1, 1, 5)))


class TestDropout:
    def test_gradient_with_fixed_mask(self):
        check_module(
            Dropout(0.4), _smooth_input((3, 2, 2, 6), seed=14), drop_seed=21
        )

    def test_eval_mode_is_identity(self):
        x = np.random.default_rng(0).standard_normal((2, 3))
        assert np.array_equal(Dropout(0.5).forward(x, mode="eval"), x)

    def test_inverted_scaling_preserves_mean(self):
        x = np.ones((200, 500))
        y = Dropout(0.5).forward(x, mode="train", rng=derive_rng(3))
        assert abs(y.mean() - 1.0) < 0.02
        kept = y != 0
        assert np.allclose(y[kept], 2.0)

    def test_train_mode_needs_rng(self):
        with pytest.raises(ConfigError):
            Dropout(0.5).forward(np.zeros((2, 2)), mode="train")

    def test_bad_probability(self):
        with pytest.raises(ConfigError):
            Dropout(1.0)


class TestDense:
    def test_gradient(self):
        mod = Dense(12, 3)
        mod.init_params(derive_rng(15))
        check_module(mod, _smooth_input((4, 2, 2, 3), seed=15))

    def test_flattens_input(self):
        mod = Dense(6, 2)
        out = mod.forward(np.ones((5, 2, 1, 3)))
        assert out.shape == (5, 2)

    def test_feature_mismatch(self):
        with pytest.raises(DataError):
            Dense(8, 2).forward(np.zeros((1, 3, 1, 3)))


class TestComposedGradient:
    def test_conv_bn_elu_pool_chain(self):
        """Chained pullback through four layers against finite differences."""
        rng = derive_rng(33)
        conv = Conv2d(1, 3, (1, 3), use_bias=False)
        conv.init_params(rng)
        bn = BatchNorm(3)
        elu = ELU()
        pool = MaxPool(2, 2)
        for m in (conv, bn, elu, pool):
            m.astype(np.float64)
        chain = [conv, bn, elu, pool]
        x = _smooth_input((3, 1, 1, 12), seed=16)

        def run():
            h = x
            for m in chain:
                h = m.forward(h, mode="train")
            return h

        r = np.random.default_rng(8).standard_normal(run().shape)

        def loss():
            return float((run() * r).sum())

        run()
        g = r
        for m in reversed(chain):
            g = m.backward(g)

        num = fd_scalar(loss, x)
        ana = g.reshape(-1)
        err = max(max_rel_err(ana[i], v) for i, v in num.items())
        assert err < 1e-3
