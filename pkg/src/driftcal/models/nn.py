"""Numeric building blocks for the hand-rolled forecasters.

Every primitive comes as a forward/backward pair so analytic gradients can
be checked against central finite differences. All math is float64.
"""

from __future__ import annotations

import math

import numpy as np

LAYER_NORM_EPS = 1e-8
_GELU_C0 = math.sqrt(2.0 / math.pi)
_GELU_C1 = 0.044715


class NonFiniteError(FloatingPointError):
    """A forward pass produced NaN or Inf; the message names the layer."""


def check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {name}")


def xavier_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Xavier/Glorot uniform init; fans taken from the 2-d weight shape."""
    fan_in, fan_out = shape[0], shape[-1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# -- positional encoding -----------------------------------------------------

def sinusoidal_pe(pos: int, dim_index: int, d_model: int) -> float:
    """Standard sinusoidal positional code for one (position, dimension)."""
    if not 0 <= dim_index < d_model:
        raise ValueError(f"dim_index must be in 0..{d_model - 1}, got {dim_index}")
    k = dim_index // 2
    angle = pos / (10000.0 ** (2.0 * k / d_model))
    return math.sin(angle) if dim_index % 2 == 0 else math.cos(angle)


def positional_encoding(length: int, d_model: int) -> np.ndarray:
    """(length, d_model) table of sinusoidal codes for positions 0..length-1."""
    pe = np.empty((length, d_model), dtype=np.float64)
    positions = np.arange(length, dtype=np.float64)[:, None]
    k = np.arange(d_model, dtype=np.float64) // 2
    angles = positions / (10000.0 ** (2.0 * k / d_model))
    pe[:, 0::2] = np.sin(angles[:, 0::2])
    pe[:, 1::2] = np.cos(angles[:, 1::2])
    return pe


# -- softmax -----------------------------------------------------------------

def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(dp: np.ndarray, p: np.ndarray, axis: int = -1) -> np.ndarray:
    return p * (dp - np.sum(dp * p, axis=axis, keepdims=True))


# -- layer normalization -----------------------------------------------------

def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LAYER_NORM_EPS):
    """Normalize over the last axis, then apply the affine gain/bias.

    Returns (y, cache); the cache keeps the pre-affine normalized values.
    """
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = np.mean(centered**2, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    return gain * xhat + bias, (xhat, inv, gain)


def layer_norm_backward(dy: np.ndarray, cache):
    xhat, inv, gain = cache
    dxhat = dy * gain
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = np.mean(dxhat * xhat, axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    reduce_axes = tuple(range(dy.ndim - 1))
    dgain = np.sum(dy * xhat, axis=reduce_axes)
    dbias = np.sum(dy, axis=reduce_axes)
    return dx, dgain, dbias


# -- activations -------------------------------------------------------------

def gelu_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tanh-approximation GELU; also returns tanh(u) for a cheap backward."""
    t = np.tanh(_GELU_C0 * (x + _GELU_C1 * (x * x * x)))
    return 0.5 * x * (1.0 + t), t


def gelu(x: np.ndarray) -> np.ndarray:
    return gelu_forward(x)[0]


def gelu_grad(x: np.ndarray, tanh_u: np.ndarray | None = None) -> np.ndarray:
    if tanh_u is None:
        tanh_u = np.tanh(_GELU_C0 * (x + _GELU_C1 * (x * x * x)))
    du = _GELU_C0 * (1.0 + 3.0 * _GELU_C1 * (x * x))
    return 0.5 * (1.0 + tanh_u) + 0.5 * x * (1.0 - tanh_u * tanh_u) * du


def tanh_grad(t: np.ndarray) -> np.ndarray:
    """Derivative of tanh given its output t."""
    return 1.0 - t**2


# -- losses ------------------------------------------------------------------

def smooth_l1(e, beta: float = 1.0):
    """Huber-style loss: quadratic inside |e| < beta, linear outside."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    e = np.asarray(e, dtype=np.float64)
    out = np.where(np.abs(e) < beta, 0.5 * e**2 / beta, np.abs(e) - 0.5 * beta)
    return float(out) if out.ndim == 0 else out


def smooth_l1_grad(e, beta: float = 1.0):
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    e = np.asarray(e, dtype=np.float64)
    out = np.where(np.abs(e) < beta, e / beta, np.sign(e))
    return float(out) if out.ndim == 0 else out


def pinball_loss(y, yhat, q: float):
    """Quantile regression loss at level q: asymmetric absolute error."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {q}")
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    diff = y - yhat
    out = np.where(diff >= 0, q * diff, (q - 1.0) * diff)
    return float(out) if out.ndim == 0 else out


def pinball_grad(y, yhat, q: float):
    """d(pinball)/d(yhat); the subgradient -q is used at y == yhat."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {q}")
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    out = np.where(y - yhat >= 0, -q, 1.0 - q)
    return float(out) if out.ndim == 0 else out
