"""Network layers with hand-written forward and backward passes.

Activations flow as 4-D arrays (batch, filters, channels, samples); the final
dense layer flattens to (batch, features) and log_softmax emits per-class
log-probabilities. Every backward pass is the exact gradient of its forward
pass (verified against central finite differences), including the batch-mean
and batch-variance dependencies inside train-mode batch normalization.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DataError

LOG_EPS = 1e-6


class Module:
    """Base layer: named parameter/buffer arrays plus cached activations.

    ``params`` are updated by the optimizer; ``buffers`` (running statistics)
    are updated by the layer itself and serialized alongside the parameters.
    """

    def __init__(self):
        self.params = {}
        self.buffers = {}
        self.grads = {}
        self._cache = None

    def forward(self, x, mode: str = "eval", rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def arrays(self) -> dict:
        """All serialized arrays, parameters first, in insertion order."""
        out = dict(self.params)
        out.update(self.buffers)
        return out

    def zero_grad(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def astype(self, dtype):
        for d in (self.params, self.buffers):
            for k in d:
                d[k] = d[k].astype(dtype)
        return self


class Conv2d(Module):
    """Valid cross-correlation over the (channels, samples) plane.

    Temporal convolutions use kernel (1, filter_length); the spatial
    convolution collapses all channels with kernel (n_channels, 1).
    """

    def __init__(self, in_filters, n_filters, kernel, stride=(1, 1), use_bias=True):
        super().__init__()
        kh, kw = kernel
        if kh < 1 or kw < 1:
            raise ConfigError(f"kernel must be >= 1 in both axes, got {kernel}")
        if stride[0] < 1 or stride[1] < 1:
            raise ConfigError(f"stride must be >= 1 in both axes, got {stride}")
        self.in_filters = in_filters
        self.n_filters = n_filters
        self.kernel = (kh, kw)
        self.stride = tuple(stride)
        self.use_bias = use_bias
        self.params["weight"] = np.zeros((n_filters, in_filters, kh, kw), dtype=np.float32)
        if use_bias:
            self.params["bias"] = np.zeros(n_filters, dtype=np.float32)

    def init_params(self, rng):
        fan_in = self.in_filters * self.kernel[0] * self.kernel[1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, self.params["weight"].shape)
        self.params["weight"] = w.astype(self.params["weight"].dtype)

    def forward(self, x, mode="eval", rng=None):
        kh, kw = self.kernel
        sh, sw = self.stride
        if x.shape[2] < kh or x.shape[3] < kw:
            raise DataError(
                f"input plane {x.shape[2:]} smaller than kernel {self.kernel}"
            )
        win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
        out = np.tensordot(win, self.params["weight"], axes=([1, 4, 5], [1, 2, 3]))
        out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
        if self.use_bias:
            out += self.params["bias"][None, :, None, None]
        self._cache = x
        return out

    def backward(self, grad):
        x = self._cache
        kh, kw = self.kernel
        sh, sw = self.stride
        win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
        self.grads["weight"] = np.tensordot(grad, win, axes=([0, 2, 3], [0, 2, 3]))
        if self.use_bias:
            self.grads["bias"] = grad.sum(axis=(0, 2, 3))
        contrib = np.tensordot(grad, self.params["weight"], axes=(1, 0))
        # contrib: (batch, out_h, out_w, in_filters, kh, kw)
        dx = np.zeros_like(x)
        n_h, n_w = grad.shape[2], grad.shape[3]
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i : i + sh * n_h : sh, j : j + sw * n_w : sw] += contrib[
                    :, :, :, :, i, j
                ].transpose(0, 3, 1, 2)
        return dx


class BatchNorm(Module):
    """Per-filter normalization over (batch, channels, samples).

    Train mode normalizes with batch statistics (biased variance) and updates
    the running estimates; eval mode applies the frozen affine transform.
    """

    def __init__(self, n_filters, eps=1e-5, momentum=0.1):
        super().__init__()
        self.n_filters = n_filters
        self.eps = eps
        self.momentum = momentum
        self.params["gamma"] = np.ones(n_filters, dtype=np.float32)
        self.params["beta"] = np.zeros(n_filters, dtype=np.float32)
        self.buffers["running_mean"] = np.zeros(n_filters, dtype=np.float32)
        self.buffers["running_var"] = np.ones(n_filters, dtype=np.float32)

    def forward(self, x, mode="eval", rng=None):
        shape = (1, -1, 1, 1)
        if mode == "train":
            mu = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mu.reshape(shape)) * inv_std.reshape(shape)
            m = self.momentum
            rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
            self.buffers["running_mean"] = ((1 - m) * rm + m * mu).astype(rm.dtype)
            self.buffers["running_var"] = ((1 - m) * rv + m * var).astype(rv.dtype)
        else:
            inv_std = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
            xhat = (x - self.buffers["running_mean"].reshape(shape)) * inv_std.reshape(shape)
        self._cache = (xhat, inv_std, mode)
        return self.params["gamma"].reshape(shape) * xhat + self.params["beta"].reshape(shape)

    def backward(self, grad):
        xhat, inv_std, mode = self._cache
        shape = (1, -1, 1, 1)
        self.grads["gamma"] = (grad * xhat).sum(axis=(0, 2, 3))
        self.grads["beta"] = grad.sum(axis=(0, 2, 3))
        scale = (self.params["gamma"] * inv_std).reshape(shape)
        if mode != "train":
            return grad * scale
        n = grad.shape[0] * grad.shape[2] * grad.shape[3]
        g_mean = self.grads["beta"].reshape(shape) / n
        gx_mean = self.grads["gamma"].reshape(shape) / n
        return scale * (grad - g_mean - xhat * gx_mean)


class ELU(Module):
    def __init__(self, alpha=1.0):
        super().__init__()
        self.alpha = alpha

    def forward(self, x, mode="eval", rng=None):
        y = np.where(x > 0, x, self.alpha * np.expm1(x))
        self._cache = (x, y)
        return y

    def backward(self, grad):
        x, y = self._cache
        return grad * np.where(x > 0, 1.0, y + self.alpha)


class Square(Module):
    def forward(self, x, mode="eval", rng=None):
        self._cache = x
        return x * x

    def backward(self, grad):
        return 2.0 * self._cache * grad


class SafeLog(Module):
    """log(max(x, eps)): finite on zero activations; zero gradient below eps."""

    def __init__(self, eps=LOG_EPS):
        super().__init__()
        self.eps = eps

    def forward(self, x, mode="eval", rng=None):
        self._cache = x
        return np.log(np.maximum(x, self.eps))

    def backward(self, grad):
        x = self._cache
        return grad * (x > self.eps) / np.maximum(x, self.eps)


class _Pool(Module):
    def __init__(self, pool_length, stride):
        super().__init__()
        if pool_length < 1 or stride < 1:
            raise ConfigError(
                f"pool_length and stride must be >= 1, got {pool_length}, {stride}"
            )
        self.pool_length = pool_length
        self.stride = stride

    def _windows(self, x):
        if x.shape[3] < self.pool_length:
            raise DataError(
                f"{x.shape[3]} samples shorter than pool length {self.pool_length}"
            )
        return sliding_window_view(x, self.pool_length, axis=3)[:, :, :, :: self.stride]


class MaxPool(_Pool):
    def forward(self, x, mode="eval", rng=None):
        win = self._windows(x)
        # windows are a view; argmax is deferred to backward so eval-only
        # passes pay for a single max scan
        self._cache = (x.shape, win, x.dtype)
        return win.max(axis=-1)

    def backward(self, grad):
        shape, win, dtype = self._cache
        amax = win.argmax(axis=-1)
        dx = np.zeros(shape, dtype=dtype)
        t_out = grad.shape[3]
        starts = self.stride * np.arange(t_out)
        bi, fi, ci, ti = np.indices(grad.shape, sparse=True)
        np.add.at(dx, (bi, fi, ci, starts[ti] + amax), grad)
        return dx


class MeanPool(_Pool):
    def forward(self, x, mode="eval", rng=None):
        win = self._windows(x)
        self._cache = (x.shape, x.dtype)
        return win.mean(axis=-1)

    def backward(self, grad):
        shape, dtype = self._cache
        dx = np.zeros(shape, dtype=dtype)
        t_out = grad.shape[3]
        share = grad / self.pool_length
        for j in range(self.pool_length):
            dx[:, :, :, j : j + self.stride * t_out : self.stride] += share
        return dx


class Dropout(Module):
    """Inverted dropout: train-mode activations are scaled by 1/(1-p)."""

    def __init__(self, drop_prob=0.5):
        super().__init__()
        if not 0 <= drop_prob < 1:
            raise ConfigError(f"drop_prob must lie in [0, 1), got {drop_prob}")
        self.drop_prob = drop_prob

    def forward(self, x, mode="eval", rng=None):
        if mode != "train" or self.drop_prob == 0:
            self._cache = None
            return x
        if rng is None:
            raise ConfigError("train-mode dropout needs a random generator")
        keep = rng.random(x.shape) >= self.drop_prob
        scale = 1.0 / (1.0 - self.drop_prob)
        self._cache = keep
        return x * keep * np.asarray(scale, dtype=x.dtype)

    def backward(self, grad):
        if self._cache is None:
            return grad
        scale = 1.0 / (1.0 - self.drop_prob)
        return grad * self._cache * np.asarray(scale, dtype=grad.dtype)


class Dense(Module):
    """Flatten to (batch, features) and apply an affine map."""

    def __init__(self, in_features, n_units):
        super().__init__()
        self.in_features = in_features
        self.n_units = n_units
        self.params["weight"] = np.zeros((in_features, n_units), dtype=np.float32)
        self.params["bias"] = np.zeros(n_units, dtype=np.float32)

    def init_params(self, rng):
        bound = 1.0 / np.sqrt(self.in_features)
        w = rng.uniform(-bound, bound, self.params["weight"].shape)
        self.params["weight"] = w.astype(self.params["weight"].dtype)

    def forward(self, x, mode="eval", rng=None):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.in_features:
            raise DataError(
                f"flattened feature count {flat.shape[1]} != expected {self.in_features}"
            )
        self._cache = (flat, x.shape)
        return flat @ self.params["weight"] + self.params["bias"]

    def backward(self, grad):
        flat, shape = self._cache
        self.grads["weight"] = flat.T @ grad
        self.grads["bias"] = grad.sum(axis=0)
        return (grad @ self.params["weight"].T).reshape(shape)


class LogSoftmax(Module):
    def forward(self, x, mode="eval", rng=None):
        shifted = x - x.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        self._cache = logp
        return logp

    def backward(self, grad):
        logp = self._cache
        return grad - np.exp(logp) * grad.sum(axis=1, keepdims=True)
