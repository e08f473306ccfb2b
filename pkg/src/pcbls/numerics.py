"""Dense-array math shared by the rest of the package.

Arrays are float64 throughout; image bytes are converted to [0,1] reals at
ingestion so the exactness gates in the tests are meaningful.
"""

from __future__ import annotations

import numpy as np

from . import _kernels


def gaussian_kernel2d(k: int, sigma: float) -> np.ndarray:
    """Normalized k-by-k Gaussian kernel (sum 1; the 1/(2*pi*sigma^2)
    prefactor cancels under normalization).

    k must be odd; offsets are measured from the center cell.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    c = k // 2
    d = np.arange(k, dtype=np.float64) - c
    sq = d[:, None] ** 2 + d[None, :] ** 2
    weights = np.exp(-sq / (2.0 * sigma * sigma))
    return weights / weights.sum()


def conv2d_same(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """2-D cross-correlation with replicate (clamp-to-border) padding.

    Replicate padding keeps per-pixel probability mass intact at borders:
    a sum-1 kernel applied channel-wise to maps that sum to 1 per pixel
    yields maps that still sum to 1 per pixel.
    """
    arr = np.asarray(arr, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {arr.shape}")
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got shape {kernel.shape}")
    return _kernels.conv2d_replicate(arr, kernel)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-stabilized softmax along ``axis``."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
