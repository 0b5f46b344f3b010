"""Spectral graph-convolution building blocks with hand-derived gradients.

The convolution filters a vertex signal with a K-term Chebyshev expansion
of the normalized Laplacian, evaluated by the three-term recurrence
applied directly to the signal (the polynomial of the Laplacian is never
materialized). Layer arithmetic follows the convention that the last
three axes of a tensor are (time, vertex, channel); leading axes are
batch-like and broadcast through every op.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError

__all__ = [
    "ChebyLayerParams",
    "chebyshev_basis",
    "graph_conv_forward",
    "graph_conv_backward",
    "temporal_conv2d",
    "temporal_conv2d_backward",
    "RunningStats",
    "batch_norm_forward",
    "batch_norm_backward",
    "dropout_forward",
    "pool_and_classify",
    "softmax",
    "cross_entropy_loss",
    "cross_entropy_batch",
]

CHEB_MODES = ("literal", "rescaled")
PROB_CLAMP = 1e-12
BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def shifted_operator(norm_l: np.ndarray, mode: str) -> np.ndarray:
    """Filter argument: the normalized Laplacian itself ('literal') or the
    spectrum-centered version L - I ('rescaled', eigenvalues in [-1, 1])."""
    if mode not in CHEB_MODES:
        raise ConfigError(f"mode must be one of {CHEB_MODES}, got {mode!r}")
    if mode == "literal":
        return norm_l
    return norm_l - np.eye(norm_l.shape[0])


def chebyshev_basis(norm_l: np.ndarray, x: np.ndarray, order: int,
                    mode: str = "rescaled") -> list[np.ndarray]:
    """[T_0(S) x, ..., T_{order-1}(S) x] by the three-term recurrence.

    ``x`` has the vertex axis first and may carry arbitrary trailing axes.
    """
    if order < 1:
        raise ConfigError("Chebyshev order must be >= 1")
    s = shifted_operator(np.asarray(norm_l, dtype=np.float64), mode)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != s.shape[0]:
        raise ConfigError(f"signal has {x.shape[0]} vertices, operator has {s.shape[0]}")
    terms = [x]
    if order >= 2:
        terms.append(np.tensordot(s, x, axes=(1, 0)))
    for k in range(2, order):
        terms.append(2.0 * np.tensordot(s, terms[k - 1], axes=(1, 0)) - terms[k - 2])
    for k, term in enumerate(terms):
        if not np.all(np.isfinite(term)):
            raise NumericalError(f"Chebyshev term {k} has non-finite values")
    return terms


@dataclass
class ChebyLayerParams:
    """Trainable state of one graph-convolution layer.

    ``weights`` has shape (K, F1, F2) in the default feature-mixing form,
    or (K, n, n) when ``vertex_mixing`` is set (the channel count is then
    preserved). ``bias`` has one entry per output channel, broadcast over
    vertices.
    """

    weights: np.ndarray
    bias: np.ndarray
    mode: str = "rescaled"
    vertex_mixing: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 3:
            raise ConfigError("weights must be stacked (K, ., .) matrices")
        if self.mode not in CHEB_MODES:
            raise ConfigError(f"mode must be one of {CHEB_MODES}")
        if self.vertex_mixing and self.weights.shape[1] != self.weights.shape[2]:
            raise ConfigError("vertex-mixing weights must be square")

    @property
    def order(self) -> int:
        return self.weights.shape[0]


def _mix(basis: list[np.ndarray], weights: np.ndarray, vertex_mixing: bool) -> np.ndarray:
    """sum_k basis_k W_k, on the channel axis or on the vertex axis."""
    if vertex_mixing:
        out = np.tensordot(weights[0], basis[0], axes=(1, 0))
        for k in range(1, weights.shape[0]):
            out += np.tensordot(weights[k], basis[k], axes=(1, 0))
        return out
    flat = basis[0].reshape(-1, basis[0].shape[-1])
    out = flat @ weights[0]
    for k in range(1, weights.shape[0]):
        out += basis[k].reshape(-1, basis[k].shape[-1]) @ weights[k]
    return out.reshape(basis[0].shape[:-1] + (weights.shape[2],))


def graph_conv_forward(params: ChebyLayerParams, norm_l: np.ndarray,
                       x: np.ndarray) -> np.ndarray:
    """y = ReLU(sum_k T_k(S) x W_k + b) for a (vertices x F1) signal."""
    x = np.asarray(x, dtype=np.float64)
    if params.vertex_mixing:
        if params.weights.shape[1] != x.shape[0]:
            raise ConfigError(
                f"vertex-mixing weights are {params.weights.shape[1]}-vertex, "
                f"signal has {x.shape[0]}"
            )
    elif x.shape[-1] != params.weights.shape[1]:
        raise ConfigError(
            f"signal has {x.shape[-1]} channels, weights expect {params.weights.shape[1]}"
        )
    basis = chebyshev_basis(norm_l, x, params.order, params.mode)
    pre = _mix(basis, params.weights, params.vertex_mixing) + params.bias
    return np.maximum(pre, 0.0)


def graph_conv_backward(params: ChebyLayerParams, norm_l: np.ndarray, x: np.ndarray,
                        upstream_grad: np.ndarray):
    """Reverse-mode gradients of graph_conv_forward.

    Returns (grad_x, grad_weights, grad_bias). The gradient through each
    T_k(S) x reuses the forward recurrence because S is symmetric.
    """
    x = np.asarray(x, dtype=np.float64)
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
    basis = chebyshev_basis(norm_l, x, params.order, params.mode)
    pre = _mix(basis, params.weights, params.vertex_mixing) + params.bias
    if upstream_grad.shape != pre.shape:
        raise ConfigError(f"upstream gradient shape {upstream_grad.shape} != output {pre.shape}")
    g = upstream_grad * (pre > 0)

    order = params.order
    grad_w = np.empty_like(params.weights)
    if params.vertex_mixing:
        # grad_W_k = G B_k^T summed over trailing axes; grad_x needs
        # sum_k T_k(S) (W_k^T G): run one recurrence over the stacked
        # W_k^T G and keep the matching diagonal term.
        for k in range(order):
            grad_w[k] = np.tensordot(g, basis[k], axes=(list(range(1, g.ndim)),) * 2)
        stacked = np.stack([np.tensordot(params.weights[k].T, g, axes=(1, 0))
                            for k in range(order)], axis=-1)
        gbasis = chebyshev_basis(norm_l, stacked, order, params.mode)
        grad_x = gbasis[0][..., 0]
        for k in range(1, order):
            grad_x = grad_x + gbasis[k][..., k]
    else:
        g2 = g.reshape(-1, g.shape[-1])
        for k in range(order):
            grad_w[k] = basis[k].reshape(-1, basis[k].shape[-1]).T @ g2
        gbasis = chebyshev_basis(norm_l, g, order, params.mode)
        grad_x = np.zeros_like(x)
        for k in range(order):
            grad_x += (gbasis[k].reshape(-1, g.shape[-1]) @ params.weights[k].T).reshape(x.shape)
    grad_b = g.reshape(-1, g.shape[-1]).sum(axis=0)
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# Temporal convolution: per-joint channel-mixing filter over the time axis
# (axis -3), same-padded with replicated borders.
# ---------------------------------------------------------------------------

def _time_windows(x: np.ndarray, kernel_time: int):
    """Stack of kernel_time time-shifted copies, replicate-padded."""
    t = x.shape[-3]
    if kernel_time % 2 == 0:
        raise ConfigError("kernel_time must be odd")
    if kernel_time > 2 * t - 1:
        raise ConfigError(f"kernel_time {kernel_time} exceeds 2T-1 = {2 * t - 1}")
    half = kernel_time // 2
    xt = np.moveaxis(x, -3, 0)
    pad = [(half, half)] + [(0, 0)] * (xt.ndim - 1)
    xp = np.pad(xt, pad, mode="edge")
    return np.stack([xp[tau:tau + t] for tau in range(kernel_time)]), half


def temporal_conv2d(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Convolve the time axis with channel mixing; time length preserved.

    ``x`` has shape (..., T, N, F1); ``weights`` (kernel_time, F1, F2).
    """
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if x.shape[-1] != weights.shape[1]:
        raise ConfigError(f"input has {x.shape[-1]} channels, weights expect {weights.shape[1]}")
    windows, _ = _time_windows(x, weights.shape[0])
    out = windows[0] @ weights[0]
    for tau in range(1, weights.shape[0]):
        out += windows[tau] @ weights[tau]
    return np.moveaxis(out, 0, -3) + bias


def temporal_conv2d_backward(x: np.ndarray, weights: np.ndarray,
                             upstream_grad: np.ndarray):
    """Gradients of temporal_conv2d: (grad_x, grad_weights, grad_bias)."""
    x = np.asarray(x, dtype=np.float64)
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
    kernel_time = weights.shape[0]
    windows, half = _time_windows(x, kernel_time)
    t = x.shape[-3]
    gt = np.moveaxis(upstream_grad, -3, 0)
    g2 = gt.reshape(-1, gt.shape[-1])

    grad_w = np.empty_like(weights)
    for tau in range(kernel_time):
        grad_w[tau] = windows[tau].reshape(-1, weights.shape[1]).T @ g2
    grad_b = g2.sum(axis=0)

    padded = np.zeros((t + 2 * half,) + gt.shape[1:])
    for tau in range(kernel_time):
        padded[tau:tau + t] += gt @ weights[tau].T
    grad_xt = padded[half:half + t].copy()
    # adjoint of the replicated border: fold the pad back onto the edges
    grad_xt[0] += padded[:half].sum(axis=0)
    grad_xt[t - 1] += padded[half + t:].sum(axis=0)
    return np.moveaxis(grad_xt, 0, -3), grad_w, grad_b


# ---------------------------------------------------------------------------
# Batch normalization over the channel (last) axis.
# ---------------------------------------------------------------------------

@dataclass
class RunningStats:
    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def create(cls, channels: int) -> "RunningStats":
        return cls(mean=np.zeros(channels), var=np.ones(channels))


def batch_norm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                       running: RunningStats, train: bool,
                       momentum: float = BN_MOMENTUM):
    """Per-channel standardization with learned scale and shift.

    Train mode normalizes with batch statistics and updates the running
    estimates in place; eval mode uses the running estimates. Returns
    (y, cache) where cache feeds batch_norm_backward.
    """
    x = np.asarray(x, dtype=np.float64)
    axes = tuple(range(x.ndim - 1))
    count = int(np.prod(x.shape[:-1]))
    if train:
        if count < 2:
            raise ConfigError("batch normalization needs at least 2 samples in train mode")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running.mean = momentum * running.mean + (1.0 - momentum) * mean
        running.var = momentum * running.var + (1.0 - momentum) * var
    else:
        mean = running.mean
        var = running.var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    x_hat = (x - mean) * inv_std
    y = gamma * x_hat + beta
    cache = (x_hat, inv_std, gamma, count, train)
    return y, cache


def batch_norm_backward(cache, upstream_grad: np.ndarray):
    """Gradients of batch_norm_forward: (grad_x, grad_gamma, grad_beta)."""
    x_hat, inv_std, gamma, count, train = cache
    g = np.asarray(upstream_grad, dtype=np.float64)
    axes = tuple(range(g.ndim - 1))
    grad_gamma = np.sum(g * x_hat, axis=axes)
    grad_beta = np.sum(g, axis=axes)
    if not train:
        return g * gamma * inv_std, grad_gamma, grad_beta
    g_hat = g * gamma
    grad_x = (inv_std / count) * (
        count * g_hat - np.sum(g_hat, axis=axes) - x_hat * np.sum(g_hat * x_hat, axis=axes)
    )
    return grad_x, grad_gamma, grad_beta


def dropout_forward(x: np.ndarray, rate: float, rng: np.random.Generator,
                    train: bool):
    """Inverted dropout; identity when rate == 0 or in eval mode."""
    if not (0.0 <= rate < 1.0):
        raise ConfigError("dropout rate must be in [0, 1)")
    if not train or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


# ---------------------------------------------------------------------------
# Head: average pooling over actors, time, and vertices, then a linear map
# to class logits with a softmax.
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def pool_and_classify(features: np.ndarray, fc_weights: np.ndarray,
                      fc_bias: np.ndarray):
    """Mean over the (P, T, N) axes, linear map, softmax.

    ``features`` has shape (..., P, T, N, F); returns (logits, probabilities).
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim < 4:
        raise ConfigError(f"features must have at least 4 axes (P, T, N, F), got {features.ndim}")
    if features.shape[-1] != fc_weights.shape[0]:
        raise ConfigError(
            f"feature dim {features.shape[-1]} does not match classifier input {fc_weights.shape[0]}"
        )
    pooled = features.mean(axis=(-4, -3, -2))
    logits = pooled @ fc_weights + fc_bias
    return logits, softmax(logits)


def cross_entropy_loss(probabilities: np.ndarray, label: int) -> float:
    """Negative log-likelihood of one label under a probability vector."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    c = probabilities.shape[-1]
    if not (0 <= label < c):
        raise ConfigError(f"label {label} out of range for {c} classes")
    if np.any(probabilities < -1e-9) or abs(float(probabilities.sum()) - 1.0) > 1e-6:
        raise ConfigError("probabilities must lie on the simplex")
    return float(-np.log(max(float(probabilities[label]), PROB_CLAMP)))


def cross_entropy_batch(probabilities: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over a batch plus the logits gradient.

    Returns (loss, grad_logits) with grad_logits = (p - onehot) / batch,
    the gradient of the softmax + cross-entropy composition.
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    batch = probabilities.shape[0]
    picked = probabilities[np.arange(batch), labels]
    loss = float(np.mean(-np.log(np.maximum(picked, PROB_CLAMP))))
    grad = probabilities.copy()
    grad[np.arange(batch), labels] -= 1.0
    return loss, grad / batch
