"""Shared reference oracles kept independent of the library code paths."""

import numpy as np
import pytest


def ref_conv2d_replicate(src, kernel):
    """Triple-loop replicate-padded cross-correlation."""
    h, w = src.shape
    k = kernel.shape[0]
    c = k // 2
    out = np.zeros_like(src, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(k):
                for j in range(k):
                    yy = min(max(y + i - c, 0), h - 1)
                    xx = min(max(x + j - c, 0), w - 1)
                    acc += kernel[i, j] * src[yy, xx]
            out[y, x] = acc
    return out


def ref_gaussian_kernel(k, sigma):
    c = k // 2
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            out[i, j] = np.exp(-((i - c) ** 2 + (j - c) ** 2) / (2.0 * sigma**2))
    return out / out.sum()


def fd_gradient(f, params, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    g = np.zeros_like(params)
    for i in range(params.size):
        up = params.copy()
        up[i] += h
        dn = params.copy()
        dn[i] -= h
        g[i] = (f(up) - f(dn)) / (2.0 * h)
    return g


def grad_rel_error(analytic, numeric):
    return np.linalg.norm(analytic - numeric) / (
        np.linalg.norm(analytic) + np.linalg.norm(numeric) + 1e-300
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
