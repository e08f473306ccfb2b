"""Confidence-paced sample/pixel introduction.

A frozen baseline model scores every training sample (or pixel); the bank
sorts them easy-to-hard by that confidence, and the pace plan decides how
many of them are active at each epoch: the initial fraction lambda grows by
mu = (1-lambda)/(e_all*epochs) per epoch until the epoch fraction e_all is
reached, after which everything is active. Samples are only ever added.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# absorbs float representation error before the floor; activation counts are
# intended to be exact when (lambda + mu*e)*n is mathematically integral
_COUNT_EPS = 1e-9

BANK_SOURCES = ("plain", "temperature_scaled", "label_smoothed")


def pace_parameter(lam: float, e_all: float, epochs: int) -> float:
    """Fraction of additional harder samples introduced per epoch."""
    if not (0.0 < lam <= 1.0):
        raise ValueError(f"initial ratio must lie in (0, 1], got {lam}")
    if not (0.0 < e_all <= 1.0):
        raise ValueError(f"epoch ratio must lie in (0, 1], got {e_all}")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    return (1.0 - lam) / (e_all * epochs)


@dataclass(frozen=True)
class PacePlan:
    lam: float
    e_all: float
    epochs: int
    n: int
    mu: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", pace_parameter(self.lam, self.e_all, self.epochs))
        if self.n < 1:
            raise ValueError("population size must be >= 1")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "e_all": self.e_all, "epochs": self.epochs, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict, epochs: int | None = None, n: int | None = None) -> "PacePlan":
        return cls(
            lam=float(d["lambda"]),
            e_all=float(d.get("e_all", 0.4)),
            epochs=int(d["epochs"] if epochs is None else epochs),
            n=int(d["n"] if n is None else n),
        )


def active_count(plan: PacePlan, epoch: int) -> int:
    """Number of easiest entries trained on at ``epoch``.

    floor((lam + mu*e) * n), clamped to [1, n]; once epoch reaches
    e_all*epochs everything is active.
    """
    if not (0 <= epoch < plan.epochs):
        raise ValueError(f"epoch {epoch} outside [0, {plan.epochs})")
    if epoch >= plan.e_all * plan.epochs:
        return plan.n
    raw = (plan.lam + plan.mu * epoch) * plan.n
    return int(min(plan.n, max(1, int(np.floor(raw + _COUNT_EPS)))))


@dataclass(frozen=True)
class SampleBank:
    """(sample_id, confidence) pairs sorted easy-to-hard.

    Ties keep ascending id order (stable sort), so bank construction is
    independent of input ordering up to tie groups.
    """

    sample_ids: np.ndarray  # int64, unique
    scores: np.ndarray  # float64, non-increasing
    source: str = "plain"

    def __post_init__(self) -> None:
        if self.source not in BANK_SOURCES:
            raise ValueError(f"unknown bank source {self.source!r}")
        if self.sample_ids.shape != self.scores.shape or self.sample_ids.ndim != 1:
            raise ValueError("ids and scores must be aligned 1-D arrays")
        if len(np.unique(self.sample_ids)) != len(self.sample_ids):
            raise ValueError("sample ids must be unique")
        if np.any(np.diff(self.scores) > 0):
            raise ValueError("scores must be non-increasing")

    def __len__(self) -> int:
        return len(self.sample_ids)


def _sorted_bank(ids: np.ndarray, scores: np.ndarray, source: str) -> SampleBank:
    order = np.argsort(-scores, kind="stable")
    return SampleBank(
        sample_ids=np.asarray(ids, dtype=np.int64)[order],
        scores=np.asarray(scores, dtype=np.float64)[order],
        source=source,
    )


def build_bank_multiclass(
    probs: np.ndarray, labels: np.ndarray, source: str = "plain"
) -> SampleBank:
    """Score each sample by the predicted probability of its true class."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape[0] != labels.shape[0]:
        raise ValueError("probs and labels length mismatch")
    scores = probs[np.arange(len(labels)), labels]
    return _sorted_bank(np.arange(len(labels)), scores, source)


def build_bank_multilabel(
    probs: np.ndarray, labels: np.ndarray, source: str = "plain"
) -> SampleBank:
    """Score by the mean predicted probability over the positive labels.

    A sample with no positive label falls back to the mean over all labels
    (a low value for a confident model, so empty frames rank hard).
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if probs.shape != labels.shape:
        raise ValueError("probs and labels shape mismatch")
    n_pos = labels.sum(axis=1)
    scores = np.where(
        n_pos > 0,
        (probs * labels).sum(axis=1) / np.maximum(n_pos, 1),
        probs.mean(axis=1),
    )
    return _sorted_bank(np.arange(len(scores)), scores, source)


def build_bank_segmentation(
    probmaps: list[np.ndarray],
    labelmaps: list[np.ndarray],
    background: int = 0,
    source: str = "plain",
) -> SampleBank:
    """Score frames by mean true-class probability over foreground pixels.

    Frames without any foreground pixel carry no learning value for the
    foreground classes and score exactly 0.
    """
    if len(probmaps) != len(labelmaps):
        raise ValueError("probmaps and labelmaps length mismatch")
    scores = np.zeros(len(probmaps))
    for i, (pm, lm) in enumerate(zip(probmaps, labelmaps)):
        pm = np.asarray(pm, dtype=np.float64)
        lm = np.asarray(lm)
        if pm.shape[:2] != lm.shape:
            raise ValueError(f"frame {i}: prob map {pm.shape} vs label map {lm.shape}")
        fg = lm != background
        if not fg.any():
            continue
        true_prob = np.take_along_axis(pm, lm[:, :, None], axis=2)[:, :, 0]
        scores[i] = true_prob[fg].mean()
    return _sorted_bank(np.arange(len(scores)), scores, source)


def build_pixel_bank(
    probmaps: list[np.ndarray], labelmaps: list[np.ndarray]
) -> list[np.ndarray]:
    """Per-pixel true-class probabilities, one (H,W) float32 map per sample."""
    if len(probmaps) != len(labelmaps):
        raise ValueError("probmaps and labelmaps length mismatch")
    out = []
    for i, (pm, lm) in enumerate(zip(probmaps, labelmaps)):
        pm = np.asarray(pm, dtype=np.float64)
        lm = np.asarray(lm)
        if pm.shape[:2] != lm.shape:
            raise ValueError(f"frame {i}: prob map {pm.shape} vs label map {lm.shape}")
        out.append(np.take_along_axis(pm, lm[:, :, None], axis=2)[:, :, 0].astype(np.float32))
    return out


def active_set(bank: SampleBank, plan: PacePlan, epoch: int) -> np.ndarray:
    """Ids of the easiest active_count(plan, epoch) samples."""
    if len(bank) != plan.n:
        raise ValueError(f"bank size {len(bank)} != plan population {plan.n}")
    return bank.sample_ids[: active_count(plan, epoch)].copy()


def pixel_mask_at(
    pixel_bank: list[np.ndarray], plan: PacePlan, epoch: int
) -> list[np.ndarray]:
    """Binary masks keeping the globally most-confident pixels.

    One shared threshold across the whole training set: the top
    active_count(plan, epoch) pixels by score are kept, ties broken by
    (sample, pixel) position so the selection is deterministic.
    """
    total = sum(m.size for m in pixel_bank)
    if total != plan.n:
        raise ValueError(f"pixel bank holds {total} pixels, plan expects {plan.n}")
    count = active_count(plan, epoch)
    flat = np.concatenate([m.ravel().astype(np.float64) for m in pixel_bank])
    keep = np.zeros(total, dtype=bool)
    keep[np.argsort(-flat, kind="stable")[:count]] = True
    masks = []
    pos = 0
    for m in pixel_bank:
        masks.append(keep[pos : pos + m.size].reshape(m.shape))
        pos += m.size
    return masks
