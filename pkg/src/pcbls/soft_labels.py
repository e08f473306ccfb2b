"""Soft targets from hard labels.

Three generators:
  * uniform smoothing of a class index (classification),
  * Gaussian-blurred one-hot channel maps (segmentation boundaries),
  * the fused form: uniform smoothing per pixel, then the blur.
The fused order matters: smoothing happens before the convolution.
"""

from __future__ import annotations

import numpy as np

from .numerics import conv2d_same, gaussian_kernel2d

DEFAULT_KERNEL_SIZE = 3


def _check_epsilon(epsilon: float) -> None:
    if not (0.0 <= epsilon < 1.0):
        raise ValueError(f"smoothing factor must lie in [0, 1), got {epsilon}")


def uls(class_index: int, num_classes: int, epsilon: float) -> np.ndarray:
    """Uniformly smoothed target: true class (1-eps)+eps/K, others eps/K."""
    _check_epsilon(epsilon)
    if not (0 <= class_index < num_classes):
        raise ValueError(f"class index {class_index} out of range [0, {num_classes})")
    probs = np.full(num_classes, epsilon / num_classes)
    probs[class_index] += 1.0 - epsilon
    return probs


def uls_matrix(labels: np.ndarray, num_classes: int, epsilon: float) -> np.ndarray:
    """Row-per-sample version of uls; labels: (N,) ints -> (N, K)."""
    _check_epsilon(epsilon)
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError("label out of range")
    out = np.full((labels.shape[0], num_classes), epsilon / num_classes)
    out[np.arange(labels.shape[0]), labels] += 1.0 - epsilon
    return out


def smooth_binary(targets: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-label smoothing for multi-label targets: t -> t(1-eps) + eps/2.

    Each label is treated as its own 2-class problem, so the rule is the
    uniform smoothing formula with K=2 applied independently per label.
    """
    _check_epsilon(epsilon)
    targets = np.asarray(targets, dtype=np.float64)
    return targets * (1.0 - epsilon) + epsilon / 2.0


def one_hot_maps(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Label map (H,W) of ints -> channel stack (H,W,K) of {0.0, 1.0}."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"label map must be 2-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError("label map entry out of range")
    out = np.zeros(labels.shape + (num_classes,))
    h, w = labels.shape
    out[np.arange(h)[:, None], np.arange(w)[None, :], labels] = 1.0
    return out


def svls(
    labels: np.ndarray,
    num_classes: int,
    sigma: float,
    k: int = DEFAULT_KERNEL_SIZE,
) -> np.ndarray:
    """Blur the one-hot channel maps of a label map with a Gaussian kernel.

    Only pixels within (k-1)/2 of a class boundary move away from one-hot;
    replicate padding keeps every pixel a distribution.
    """
    kernel = gaussian_kernel2d(k, sigma)
    maps = one_hot_maps(labels, num_classes)
    out = np.empty_like(maps)
    for c in range(num_classes):
        out[:, :, c] = conv2d_same(maps[:, :, c], kernel)
    return out


def uls_svls(
    labels: np.ndarray,
    num_classes: int,
    epsilon: float,
    sigma: float,
    k: int = DEFAULT_KERNEL_SIZE,
) -> np.ndarray:
    """Fused form: uniform-smooth each pixel first, then blur channel-wise."""
    _check_epsilon(epsilon)
    kernel = gaussian_kernel2d(k, sigma)
    maps = one_hot_maps(labels, num_classes)
    maps = maps * (1.0 - epsilon) + epsilon / num_classes
    out = np.empty_like(maps)
    for c in range(num_classes):
        out[:, :, c] = conv2d_same(maps[:, :, c], kernel)
    return out


def segmentation_targets(
    labels: np.ndarray,
    num_classes: int,
    epsilon: float = 0.0,
    sigma: float | None = None,
    k: int = DEFAULT_KERNEL_SIZE,
) -> np.ndarray:
    """Per-pixel soft targets for a label map under any smoothing combination.

    sigma None means no spatial blur; epsilon 0 means no uniform smoothing.
    """
    if sigma is not None and sigma > 0.0:
        if epsilon > 0.0:
            return uls_svls(labels, num_classes, epsilon, sigma, k)
        return svls(labels, num_classes, sigma, k)
    maps = one_hot_maps(labels, num_classes)
    if epsilon > 0.0:
        maps = maps * (1.0 - epsilon) + epsilon / num_classes
    return maps
