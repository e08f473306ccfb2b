"""Task metrics: accuracy, mean average precision, IoU/Dice.

IoU/Dice accumulate intersection/union over the whole evaluation set before
dividing (dataset-level per-class totals, not per-frame averages).
"""

from __future__ import annotations

import numpy as np


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape:
        raise ValueError("length mismatch")
    if predicted.size == 0:
        raise ValueError("empty evaluation set")
    return float((predicted == labels).mean())


def average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """All-points AP: mean over positive ranks of precision at that rank.

    Ranking is by descending score with ties broken by ascending sample
    index (stable sort).
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape:
        raise ValueError("length mismatch")
    if not positives.any():
        raise ValueError("average precision undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = positives[order]
    ranks = np.arange(1, len(hits) + 1)
    cum_pos = np.cumsum(hits)
    return float((cum_pos[hits] / ranks[hits]).mean())


def mean_average_precision(
    scores: np.ndarray, labels: np.ndarray
) -> tuple[float, list[int]]:
    """Mean of per-label APs; labels with zero positives are skipped.

    scores/labels: (N, L). Returns (map, skipped label indices).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ValueError("scores and labels must be aligned (N, L) arrays")
    aps = []
    skipped = []
    for j in range(labels.shape[1]):
        if labels[:, j].any():
            aps.append(average_precision(scores[:, j], labels[:, j]))
        else:
            skipped.append(j)
    if not aps:
        raise ValueError("no label has a positive example")
    return float(np.mean(aps)), skipped


def iou_dice(
    predicted_maps: list[np.ndarray] | np.ndarray,
    gt_maps: list[np.ndarray] | np.ndarray,
    num_classes: int,
    background: int = 0,
) -> tuple[dict[int, float], float, float]:
    """Dataset-level per-foreground-class IoU, mean IoU and mean Dice.

    A class absent from both prediction and ground truth everywhere is
    excluded from the means. Returns (per-class IoU, mean IoU, mean Dice).
    """
    if len(predicted_maps) != len(gt_maps):
        raise ValueError("prediction and ground-truth counts differ")
    inter = np.zeros(num_classes, dtype=np.int64)
    pred_tot = np.zeros(num_classes, dtype=np.int64)
    gt_tot = np.zeros(num_classes, dtype=np.int64)
    for pm, gm in zip(predicted_maps, gt_maps):
        pm = np.asarray(pm)
        gm = np.asarray(gm)
        if pm.shape != gm.shape:
            raise ValueError(f"shape mismatch: {pm.shape} vs {gm.shape}")
        for c in range(num_classes):
            p = pm == c
            g = gm == c
            inter[c] += int((p & g).sum())
            pred_tot[c] += int(p.sum())
            gt_tot[c] += int(g.sum())
    per_class: dict[int, float] = {}
    dices = []
    for c in range(num_classes):
        if c == background:
            continue
        union = pred_tot[c] + gt_tot[c] - inter[c]
        if pred_tot[c] + gt_tot[c] == 0:
            continue
        per_class[c] = float(inter[c] / union)
        dices.append(2.0 * inter[c] / (pred_tot[c] + gt_tot[c]))
    if not per_class:
        raise ValueError("no foreground class present in predictions or ground truth")
    mean_iou = float(np.mean(list(per_class.values())))
    mean_dice = float(np.mean(dices))
    return per_class, mean_iou, mean_dice


def brier(probs: np.ndarray, labels: np.ndarray) -> float:
    """Multi-class Brier score: mean over samples of ||p - onehot||^2."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ValueError("probs and labels misaligned")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("probs rows must sum to 1")
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(labels)), labels] = 1.0
    return float(((probs - onehot) ** 2).sum(axis=1).mean())
