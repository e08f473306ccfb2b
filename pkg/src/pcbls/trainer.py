"""The paced-curriculum training loop.

Each epoch: look up the smoothing factor(s) for this epoch, pick the active
sample set (or pixel masks) from the confidence bank, build soft targets
batch by batch, and step the optimizer over a seeded shuffle of the active
ids. Identical (config, data, seed) replays bit-for-bit: shuffles are keyed
by (seed, epoch), batches run in shuffle order, and validation never sees
smoothing or pacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import losses, models, pacing, soft_labels
from .calibration import apply_temperature
from .fileio import format_float
from .metrics import accuracy, iou_dice, mean_average_precision
from .models import ModelSpec
from .numerics import sigmoid, softmax
from .pacing import PacePlan, SampleBank
from .schedules import SmoothingSchedule, constant, exponential, linear, random_schedule
from .seeding import rng_for

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainConfig:
    task: str  # multiclass | multilabel | segmentation
    model: ModelSpec
    epochs: int
    batch_size: int = 32
    optimizer: str = "sgd"
    lr: float = 5e-3
    momentum: float = 0.9
    weight_decay: float = 5e-3
    lr_decay_factor: float = 0.1
    lr_decay_at: int | None = None  # default: floor(0.75 * epochs)
    seed: int = 0
    uls_schedule: SmoothingSchedule | None = None
    svls_schedule: SmoothingSchedule | None = None
    svls_kernel: int = soft_labels.DEFAULT_KERNEL_SIZE
    pace: PacePlan | None = None
    granularity: str = "sample"  # sample | pixel

    def __post_init__(self) -> None:
        if self.task not in ("multiclass", "multilabel", "segmentation"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.granularity not in ("sample", "pixel"):
            raise ValueError(f"unknown pacing granularity {self.granularity!r}")
        if self.granularity == "pixel" and self.task != "segmentation":
            raise ValueError("pixel-wise pacing requires the segmentation task")
        if self.svls_schedule is not None and self.task != "segmentation":
            raise ValueError("a spatial smoothing schedule requires the segmentation task")

    def decay_epoch(self) -> int:
        return int(0.75 * self.epochs) if self.lr_decay_at is None else self.lr_decay_at


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    active_count: int
    eps: float
    sigma: float | None
    train_loss: float
    val_metrics: dict[str, float]


@dataclass
class TrainResult:
    params: np.ndarray
    records: list[EpochRecord]
    # per-sample accumulated gradient-contribution norms, only for the
    # epochs that were instrumented
    grad_contributions: dict[int, np.ndarray] = field(default_factory=dict)


class _Optimizer:
    def __init__(self, cfg: TrainConfig, n_params: int):
        self.cfg = cfg
        if cfg.optimizer == "sgd":
            self.velocity = np.zeros(n_params)
        else:
            self.m = np.zeros(n_params)
            self.v = np.zeros(n_params)
            self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        if self.cfg.optimizer == "sgd":
            update = grad + self.cfg.weight_decay * params
            self.velocity = self.cfg.momentum * self.velocity + update
            return params - lr * self.velocity
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        self.m = b1 * self.m + (1 - b1) * grad
        self.v = b2 * self.v + (1 - b2) * grad * grad
        mh = self.m / (1 - b1**self.t)
        vh = self.v / (1 - b2**self.t)
        return params - lr * mh / (np.sqrt(vh) + eps)


def _loss_kind(task: str) -> str:
    return {"multiclass": "soft_ce", "multilabel": "soft_bce", "segmentation": "masked_pixel_ce"}[task]


def _batch_targets(cfg: TrainConfig, targets: np.ndarray, k: int, eps: float, sigma: float | None):
    if cfg.task == "multiclass":
        return soft_labels.uls_matrix(targets, k, eps)
    if cfg.task == "multilabel":
        return soft_labels.smooth_binary(targets, eps)
    return np.stack(
        [
            soft_labels.segmentation_targets(t, k, epsilon=eps, sigma=sigma, k=cfg.svls_kernel)
            for t in targets
        ]
    )


def evaluate(cfg: TrainConfig, params: np.ndarray, inputs, targets, num_classes: int) -> dict[str, float]:
    """Validation metrics on raw (unsmoothed, unpaced) data."""
    logits = models.forward(cfg.model, params, np.asarray(inputs, dtype=np.float64))
    if cfg.task == "multiclass":
        return {"val_accuracy": accuracy(np.argmax(logits, axis=1), targets)}
    if cfg.task == "multilabel":
        value, _ = mean_average_precision(sigmoid(logits), targets)
        return {"val_map": value}
    preds = np.argmax(logits, axis=-1)
    _, miou, mdice = iou_dice(list(preds), list(np.asarray(targets)), num_classes)
    return {"val_miou": miou, "val_mdice": mdice}


def train(
    cfg: TrainConfig,
    train_inputs: np.ndarray,
    train_targets: np.ndarray,
    val_inputs: np.ndarray,
    val_targets: np.ndarray,
    num_classes: int,
    bank: SampleBank | None = None,
    pixel_bank: list[np.ndarray] | None = None,
    instrument_epochs: frozenset[int] = frozenset(),
) -> TrainResult:
    """Run the full curriculum loop and return final parameters + records.

    With no schedules and no pace plan this is a plain cross-entropy
    trainer; a constant-0 schedule reproduces it exactly because the
    smoothing formula at factor 0 returns the one-hot target bit-for-bit.
    """
    n = len(train_inputs)
    if n == 0 or len(val_inputs) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if cfg.pace is not None:
        if cfg.granularity == "sample":
            if bank is None:
                raise ValueError("sample-wise pacing requires a sample bank")
            if len(bank) != n or cfg.pace.n != n:
                raise ValueError("bank/plan size must match the training set")
        else:
            if pixel_bank is None:
                raise ValueError("pixel-wise pacing requires a pixel bank")
            total = sum(m.size for m in pixel_bank)
            if cfg.pace.n != total:
                raise ValueError("plan population must equal the total pixel count")

    train_inputs = np.asarray(train_inputs, dtype=np.float64)
    train_targets = np.asarray(train_targets)
    params = models.init_params(cfg.model, cfg.seed)
    opt = _Optimizer(cfg, params.size)
    loss_kind = _loss_kind(cfg.task)

    records: list[EpochRecord] = []
    contributions: dict[int, np.ndarray] = {}
    for epoch in range(cfg.epochs):
        eps = cfg.uls_schedule.value_at(epoch) if cfg.uls_schedule else 0.0
        sigma = cfg.svls_schedule.value_at(epoch) if cfg.svls_schedule else None
        lr = cfg.lr * (cfg.lr_decay_factor if epoch >= cfg.decay_epoch() else 1.0)

        if cfg.pace is not None and cfg.granularity == "sample":
            ids = np.sort(pacing.active_set(bank, cfg.pace, epoch))
            count = len(ids)
        else:
            ids = np.arange(n)
            count = n
        masks = None
        if cfg.pace is not None and cfg.granularity == "pixel":
            masks = np.stack(pacing.pixel_mask_at(pixel_bank, cfg.pace, epoch)).astype(np.float64)
            count = pacing.active_count(cfg.pace, epoch)

        order = rng_for(cfg.seed, "shuffle", epoch).permutation(len(ids))
        shuffled = ids[order]
        probe = epoch in instrument_epochs
        if probe:
            contributions[epoch] = np.zeros(n)

        total_loss = 0.0
        seen = 0
        for start in range(0, len(shuffled), cfg.batch_size):
            batch = shuffled[start : start + cfg.batch_size]
            x = train_inputs[batch]
            soft = _batch_targets(cfg, train_targets[batch], num_classes, eps, sigma)
            mask = masks[batch] if masks is not None else None
            loss, grad = models.loss_and_grad(cfg.model, params, x, soft, loss_kind, mask=mask)
            if probe:
                for j, sid in enumerate(batch):
                    m = mask[j : j + 1] if mask is not None else None
                    _, g = models.loss_and_grad(
                        cfg.model, params, x[j : j + 1], soft[j : j + 1], loss_kind, mask=m
                    )
                    contributions[epoch][sid] += float(np.linalg.norm(g))
            params = opt.step(params, grad, lr)
            total_loss += loss * len(batch)
            seen += len(batch)

        record = EpochRecord(
            epoch=epoch,
            active_count=count,
            eps=eps,
            sigma=sigma,
            train_loss=total_loss / seen,
            val_metrics=evaluate(cfg, params, val_inputs, val_targets, num_classes),
        )
        records.append(record)

    return TrainResult(params=params, records=records, grad_contributions=contributions)


def train_baseline(cfg: TrainConfig, *args, **kwargs) -> TrainResult:
    """Plain cross-entropy training: no smoothing schedules, no pacing."""
    plain = replace(cfg, uls_schedule=None, svls_schedule=None, pace=None, granularity="sample")
    return train(plain, *args, **kwargs)


def score_training_set(
    cfg: TrainConfig,
    params: np.ndarray,
    inputs: np.ndarray,
    targets: np.ndarray,
    num_classes: int,
    variant: str = "plain",
    temperature: float = 1.0,
) -> SampleBank:
    """Freeze a trained model and build its confidence bank."""
    logits = models.forward(cfg.model, params, np.asarray(inputs, dtype=np.float64))
    source = {
        "plain": "plain",
        "ts": "temperature_scaled",
        "ls": "label_smoothed",
    }[variant]
    if cfg.task == "multiclass":
        probs = apply_temperature(logits, temperature)
        return pacing.build_bank_multiclass(probs, targets, source=source)
    if cfg.task == "multilabel":
        probs = sigmoid(logits / temperature)
        return pacing.build_bank_multilabel(probs, np.asarray(targets, dtype=bool), source=source)
    probs = apply_temperature(logits, temperature)
    return pacing.build_bank_segmentation(list(probs), list(np.asarray(targets)), source=source)


def score_pixel_bank(
    cfg: TrainConfig,
    params: np.ndarray,
    inputs: np.ndarray,
    targets: np.ndarray,
) -> list[np.ndarray]:
    logits = models.forward(cfg.model, params, np.asarray(inputs, dtype=np.float64))
    probs = softmax(logits, axis=-1)
    return pacing.build_pixel_bank(list(probs), list(np.asarray(targets)))


METRIC_COLUMNS = {
    "multiclass": ["val_accuracy"],
    "multilabel": ["val_map"],
    "segmentation": ["val_miou", "val_mdice"],
}


def records_to_csv(task: str, records: list[EpochRecord]) -> tuple[list[str], list[list[str]]]:
    """Metrics-log rows; float cells use shortest round-trip formatting so a
    replayed run produces a byte-identical file."""
    header = ["epoch", "active_count", "eps", "sigma", "train_loss"] + METRIC_COLUMNS[task]
    rows = []
    for r in records:
        row = [
            str(r.epoch),
            str(r.active_count),
            format_float(r.eps),
            "" if r.sigma is None else format_float(r.sigma),
            format_float(r.train_loss),
        ]
        row += [format_float(r.val_metrics[m]) for m in METRIC_COLUMNS[task]]
        rows.append(row)
    return header, rows


# ---------------------------------------------------------------------------
# presets: named hyper-parameter bundles


def preset(name: str) -> dict:
    """Hyper-parameter fragments for the common experiment setups."""
    if name == "workflow_cls":
        return {
            "task": "multiclass",
            "optimizer": "sgd",
            "lr": 5e-3,
            "momentum": 0.9,
            "weight_decay": 5e-3,
            "lr_decay_factor": 0.1,
            "uls_schedule": exponential(0.5, 0.9),
            "pace_lambda": 0.6,
            "pace_e_all": 0.4,
        }
    if name == "tool_cls":
        return {
            "task": "multilabel",
            "optimizer": "adam",
            "lr": 1e-4,
            "uls_schedule": exponential(0.5, 0.9),
            "pace_lambda": 0.6,
            "pace_e_all": 0.4,
        }
    if name == "segmentation":
        return {
            "task": "segmentation",
            "optimizer": "adam",
            "lr": 1e-4,
            "uls_schedule": exponential(0.6, 0.9),
            "svls_schedule": exponential(0.9, 0.5),
            "svls_kernel": 3,
            "pace_lambda": 0.8,
            "pace_e_all": 0.4,
            "granularity": "pixel",
        }
    if name == "anti":
        return {"uls_schedule": SmoothingSchedule(kind="anti", init=0.005, rate=1.1, cap=0.5)}
    if name == "random":
        return {"uls_schedule": random_schedule(0.0, 0.5, seed=0)}
    if name == "linear":
        return {"uls_schedule": linear(0.5, 0.015)}
    if name == "ls":
        return {"uls_schedule": constant(0.1)}
    raise ValueError(f"unknown preset {name!r}")
