"""Small differentiable predictors with hand-derived gradients.

Three architectures over a flat float64 parameter vector:

  linear_softmax  dims (D, K)            logits = x W^T + b
  mlp             dims (D, H, K)         one tanh hidden layer
  tiny_fcn        dims (Cin, c1, c2, K)  three 3x3 convs (replicate padding,
                                         tanh between, linear last), no
                                         pooling, so spatial dims survive

backward() propagates a dL/dlogits array (produced by a loss in
``losses``) to the flat parameter gradient; combined with the losses'
1/count scaling this yields the gradient of the mean loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, losses
from .seeding import rng_for

ARCHITECTURES = ("linear_softmax", "mlp", "tiny_fcn")
FCN_KERNEL = 3


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        want = {"linear_softmax": 2, "mlp": 3, "tiny_fcn": 4}[self.architecture]
        if len(self.dims) != want:
            raise ValueError(f"{self.architecture} needs {want} dims, got {self.dims}")
        if any(d < 1 for d in self.dims):
            raise ValueError("dims must be positive")

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-tensor shapes in flat-vector order (weight, bias alternating)."""
        if self.architecture == "linear_softmax":
            d, k = self.dims
            return [(k, d), (k,)]
        if self.architecture == "mlp":
            d, h, k = self.dims
            return [(h, d), (h,), (k, h), (k,)]
        cin, c1, c2, k = self.dims
        f = FCN_KERNEL
        return [(c1, cin, f, f), (c1,), (c2, c1, f, f), (c2,), (k, c2, f, f), (k,)]

    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes())


def unpack(spec: ModelSpec, params: np.ndarray) -> list[np.ndarray]:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.param_count(),):
        raise ValueError(f"expected {spec.param_count()} parameters, got {params.shape}")
    out = []
    pos = 0
    for shape in spec.shapes():
        size = int(np.prod(shape))
        out.append(params[pos : pos + size].reshape(shape))
        pos += size
    return out


def pack(tensors: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([t.ravel() for t in tensors])


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Uniform [-s, s] per tensor with s = 1/sqrt(fan_in), seeded."""
    rng = rng_for(seed, "init", spec.architecture)
    tensors = []
    for shape in spec.shapes():
        if len(shape) == 1:
            fan_in = tensors[-1].shape[1] if tensors[-1].ndim == 2 else int(
                np.prod(tensors[-1].shape[1:])
            )
        elif len(shape) == 2:
            fan_in = shape[1]
        else:
            fan_in = int(np.prod(shape[1:]))
        s = 1.0 / np.sqrt(fan_in)
        tensors.append(rng.uniform(-s, s, size=shape))
    return pack(tensors)


def _check_inputs(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if spec.architecture == "tiny_fcn":
        if x.ndim != 4 or x.shape[3] != spec.dims[0]:
            raise ValueError(
                f"tiny_fcn expects (N,H,W,{spec.dims[0]}) inputs, got {x.shape}"
            )
    else:
        if x.ndim != 2 or x.shape[1] != spec.dims[0]:
            raise ValueError(
                f"{spec.architecture} expects (N,{spec.dims[0]}) inputs, got {x.shape}"
            )
    return x


def forward(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Batch logits: (N,K) for the vector models, (N,H,W,K) for tiny_fcn."""
    return _forward_cached(spec, params, x)[0]


def _forward_cached(spec, params, x):
    x = _check_inputs(spec, x)
    t = unpack(spec, params)
    if spec.architecture == "linear_softmax":
        w, b = t
        return x @ w.T + b, (x,)
    if spec.architecture == "mlp":
        w1, b1, w2, b2 = t
        h = np.tanh(x @ w1.T + b1)
        return h @ w2.T + b2, (x, h)
    w1, b1, w2, b2, w3, b3 = t
    a1 = np.empty(x.shape[:3] + (spec.dims[1],))
    for i in range(x.shape[0]):
        a1[i] = _kernels.fcn_conv_forward(x[i], w1, b1)
    h1 = np.tanh(a1)
    a2 = np.empty(x.shape[:3] + (spec.dims[2],))
    for i in range(x.shape[0]):
        a2[i] = _kernels.fcn_conv_forward(h1[i], w2, b2)
    h2 = np.tanh(a2)
    out = np.empty(x.shape[:3] + (spec.dims[3],))
    for i in range(x.shape[0]):
        out[i] = _kernels.fcn_conv_forward(h2[i], w3, b3)
    return out, (x, h1, h2)


def backward(
    spec: ModelSpec, params: np.ndarray, x: np.ndarray, dlogits: np.ndarray
) -> np.ndarray:
    """Flat parameter gradient for a given dL/dlogits."""
    logits, cache = _forward_cached(spec, params, x)
    if dlogits.shape != logits.shape:
        raise ValueError(f"dlogits shape {dlogits.shape} != logits {logits.shape}")
    t = unpack(spec, params)
    if spec.architecture == "linear_softmax":
        (xc,) = cache
        dw = dlogits.T @ xc
        db = dlogits.sum(axis=0)
        return pack([dw, db])
    if spec.architecture == "mlp":
        w1, b1, w2, b2 = t
        xc, h = cache
        dw2 = dlogits.T @ h
        db2 = dlogits.sum(axis=0)
        dh = dlogits @ w2
        da = dh * (1.0 - h * h)
        dw1 = da.T @ xc
        db1 = da.sum(axis=0)
        return pack([dw1, db1, dw2, db2])
    w1, b1, w2, b2, w3, b3 = t
    xc, h1, h2 = cache
    dw1 = np.zeros_like(w1)
    db1 = np.zeros_like(b1)
    dw2 = np.zeros_like(w2)
    db2 = np.zeros_like(b2)
    dw3 = np.zeros_like(w3)
    db3 = np.zeros_like(b3)
    for i in range(xc.shape[0]):
        dh2, dwi, dbi = _kernels.fcn_conv_backward(h2[i], w3, dlogits[i])
        dw3 += dwi
        db3 += dbi
        da2 = dh2 * (1.0 - h2[i] * h2[i])
        dh1, dwi, dbi = _kernels.fcn_conv_backward(h1[i], w2, da2)
        dw2 += dwi
        db2 += dbi
        da1 = dh1 * (1.0 - h1[i] * h1[i])
        _, dwi, dbi = _kernels.fcn_conv_backward(xc[i], w1, da1)
        dw1 += dwi
        db1 += dbi
    return pack([dw1, db1, dw2, db2, dw3, db3])


def loss_and_grad(
    spec: ModelSpec,
    params: np.ndarray,
    x: np.ndarray,
    targets: np.ndarray,
    loss_kind: str,
    mask: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Mean loss over the batch plus its exact parameter gradient.

    loss_kind: 'soft_ce' | 'soft_bce' | 'masked_pixel_ce'; the last one
    requires tiny_fcn-shaped logits and a (N,H,W) mask (all-ones if None).
    """
    logits = forward(spec, params, x)
    if loss_kind == "soft_ce":
        loss, dlogits = losses.soft_ce(logits, targets)
    elif loss_kind == "soft_bce":
        loss, dlogits = losses.soft_bce(logits, targets)
    elif loss_kind == "masked_pixel_ce":
        if logits.ndim != 4:
            raise ValueError("masked_pixel_ce needs per-pixel logits (use tiny_fcn)")
        if mask is None:
            mask = np.ones(logits.shape[:-1])
        loss, dlogits = losses.masked_pixel_ce(logits, targets, mask)
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    return loss, backward(spec, params, x, dlogits)
