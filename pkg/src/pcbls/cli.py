"""Command-line front end.

Subcommands: train, bank, corrupt, eval, calibrate, report. Every run hangs
off one --seed; presets supply defaults, a JSON config file can override
them, and explicit flags win over both. The fully resolved configuration is
persisted next to each run's outputs so any run can be replayed exactly.

Exit codes: 0 success, 1 runtime failure, 2 configuration/validation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import corruption, datasets, fileio, models, trainer
from .calibration import apply_temperature, ece, fit_temperature, nll
from .fileio import FormatError, format_float
from .metrics import accuracy, brier, iou_dice, mean_average_precision
from .numerics import sigmoid
from .pacing import PacePlan
from .schedules import SmoothingSchedule
from .seeding import derive_seed
from .trainer import METRIC_COLUMNS, TrainConfig


class ConfigError(Exception):
    """User-facing configuration/validation problem (exit code 2)."""


# ---------------------------------------------------------------------------
# config resolution


_DATA_DEFAULTS = {
    "blobs": {"classes": 8, "per_class": 125, "per_class_val": 40, "dim": 16, "spread": 0.06, "label_noise": 0.2},
    "multilabel": {"labels": 8, "n": 600, "n_val": 250, "dim": 16},
    "shapes": {"height": 24, "width": 24, "foreground": 3, "n": 60, "n_val": 20},
}

_DEFAULT_ARCH = {"multiclass": "mlp", "multilabel": "mlp", "segmentation": "tiny_fcn"}


def resolve_config(args) -> dict:
    """preset defaults < config file < CLI flags, flattened to one dict."""
    cfg: dict = {
        "task": "multiclass",
        "arch": None,
        "hidden": 32,
        "channels": [8, 8],
        "epochs": 20,
        "batch_size": 32,
        "optimizer": "sgd",
        "lr": 5e-3,
        "momentum": 0.9,
        "weight_decay": 5e-3,
        "lr_decay_factor": 0.1,
        "schedule": None,
        "svls_schedule": None,
        "svls_kernel": 3,
        "pace": None,
        "bank": None,
        "granularity": "sample",
        "data": {"name": "blobs"},
        "seed": 0,
    }
    if getattr(args, "preset", None):
        try:
            fragment = trainer.preset(args.preset)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        for key, value in fragment.items():
            if key == "uls_schedule":
                cfg["schedule"] = value.to_dict()
            elif key == "svls_schedule":
                cfg["svls_schedule"] = value.to_dict()
            elif key == "pace_lambda":
                cfg.setdefault("preset_pace", {})["lambda"] = value
            elif key == "pace_e_all":
                cfg.setdefault("preset_pace", {})["e_all"] = value
            else:
                cfg[key] = value
    if getattr(args, "config", None):
        try:
            file_cfg = fileio.load_json(args.config)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        for key, value in file_cfg.items():
            if key == "data" and isinstance(value, dict):
                cfg["data"].update(value)
            else:
                cfg[key] = value
    for flag in ("epochs", "batch_size", "seed", "bank", "granularity", "arch"):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[flag] = value
    if getattr(args, "data", None):
        cfg["data"] = _parse_data_spec(args.data)
    if getattr(args, "pace_lambda", None) is not None:
        cfg["pace"] = {"lambda": args.pace_lambda, "e_all": getattr(args, "pace_e_all", None) or 0.4}
    elif getattr(args, "pace", False) and cfg.get("pace") is None:
        if not cfg.get("preset_pace"):
            raise ConfigError("--pace needs a preset that defines a pace plan, or --pace-lambda")
        cfg["pace"] = cfg["preset_pace"]
    cfg.pop("preset_pace", None)
    return cfg


def _parse_data_spec(spec: str) -> dict:
    if ":" in spec:
        name, arg = spec.split(":", 1)
        if name == "cifar10":
            return {"name": "cifar10", "path": arg}
        if name == "dir":
            return {"name": "dir", "path": arg}
        raise ConfigError(f"unknown data spec {spec!r}")
    if spec not in _DATA_DEFAULTS:
        raise ConfigError(f"unknown data spec {spec!r} (try blobs, multilabel, shapes, cifar10:<path>, dir:<path>)")
    return {"name": spec}


def resolve_dataset(cfg: dict):
    data = dict(_DATA_DEFAULTS.get(cfg["data"]["name"], {}))
    data.update(cfg["data"])
    name = data["name"]
    data_seed = derive_seed(int(cfg["seed"]), "data")
    if name == "blobs":
        train_ds = datasets.gen_blobs(
            data["classes"], data["per_class"], data["dim"], data["spread"],
            data["label_noise"], seed=data_seed, split="train",
        )
        val_ds = datasets.gen_blobs(
            data["classes"], data["per_class_val"], data["dim"], data["spread"],
            0.0, seed=data_seed, split="val",
        )
        return train_ds, val_ds
    if name == "multilabel":
        train_ds = datasets.gen_multilabel(data["labels"], data["n"], data["dim"], seed=data_seed, split="train")
        val_ds = datasets.gen_multilabel(data["labels"], data["n_val"], data["dim"], seed=data_seed, split="val")
        return train_ds, val_ds
    if name == "shapes":
        train_ds = datasets.gen_shapes_seg(
            data["height"], data["width"], data["foreground"], data["n"], seed=data_seed, split="train"
        )
        val_ds = datasets.gen_shapes_seg(
            data["height"], data["width"], data["foreground"], data["n_val"], seed=data_seed, split="val"
        )
        return train_ds, val_ds
    if name == "cifar10":
        try:
            ds = datasets.load_cifar10(data["path"])
        except (OSError, FormatError) as e:
            raise ConfigError(f"cannot load CIFAR-10 from {data['path']}: {e}") from e
        return datasets.split_dataset(ds, data.get("val_fraction", 0.1), derive_seed(int(cfg["seed"]), "split"))
    if name == "dir":
        try:
            ds = datasets.load_image_dataset(data["path"])
        except (OSError, FormatError) as e:
            raise ConfigError(f"cannot load dataset dir {data['path']}: {e}") from e
        return datasets.split_dataset(ds, data.get("val_fraction", 0.2), derive_seed(int(cfg["seed"]), "split"))
    raise ConfigError(f"unknown data source {name!r}")


def _features(arch: str, inputs: np.ndarray) -> np.ndarray:
    if arch == "tiny_fcn":
        return inputs
    if inputs.ndim > 2:
        return inputs.reshape(len(inputs), -1)
    return inputs


def build_train_config(cfg: dict, train_ds) -> TrainConfig:
    task = cfg["task"]
    arch = cfg["arch"] or _DEFAULT_ARCH[task]
    inputs = _features(arch, train_ds.inputs)
    if arch == "tiny_fcn":
        c1, c2 = cfg["channels"]
        spec = models.ModelSpec("tiny_fcn", (train_ds.inputs.shape[3], int(c1), int(c2), train_ds.num_classes))
    elif arch == "mlp":
        spec = models.ModelSpec("mlp", (inputs.shape[1], int(cfg["hidden"]), train_ds.num_classes))
    elif arch == "linear_softmax":
        spec = models.ModelSpec("linear_softmax", (inputs.shape[1], train_ds.num_classes))
    else:
        raise ConfigError(f"unknown architecture {arch!r}")
    pace = None
    if cfg.get("pace"):
        n = sum(m.size for m in _label_maps(train_ds)) if cfg["granularity"] == "pixel" else len(train_ds)
        pace = PacePlan(
            lam=float(cfg["pace"]["lambda"]),
            e_all=float(cfg["pace"].get("e_all", 0.4)),
            epochs=int(cfg["epochs"]),
            n=n,
        )
    try:
        return TrainConfig(
            task=task,
            model=spec,
            epochs=int(cfg["epochs"]),
            batch_size=int(cfg["batch_size"]),
            optimizer=cfg["optimizer"],
            lr=float(cfg["lr"]),
            momentum=float(cfg["momentum"]),
            weight_decay=float(cfg["weight_decay"]),
            lr_decay_factor=float(cfg["lr_decay_factor"]),
            seed=int(cfg["seed"]),
            uls_schedule=SmoothingSchedule.from_dict(cfg["schedule"]) if cfg.get("schedule") else None,
            svls_schedule=SmoothingSchedule.from_dict(cfg["svls_schedule"]) if cfg.get("svls_schedule") else None,
            svls_kernel=int(cfg.get("svls_kernel", 3)),
            pace=pace,
            granularity=cfg["granularity"],
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _label_maps(ds) -> list[np.ndarray]:
    return list(np.asarray(ds.targets))


def _resolved_dict(cfg: dict, tc: TrainConfig) -> dict:
    out = dict(cfg)
    out["arch"] = tc.model.architecture
    out["model_dims"] = list(tc.model.dims)
    out["pace"] = tc.pace.to_dict() if tc.pace else None
    out["schedule"] = tc.uls_schedule.to_dict() if tc.uls_schedule else None
    out["svls_schedule"] = tc.svls_schedule.to_dict() if tc.svls_schedule else None
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    train_ds, val_ds = resolve_dataset(cfg)
    cfg["task"] = train_ds.task
    tc = build_train_config(cfg, train_ds)
    bank = pixel_bank = None
    if tc.pace is not None:
        if cfg.get("bank") is None:
            raise ConfigError("pacing is enabled but no --bank was given")
        bank_path = Path(cfg["bank"])
        if not bank_path.exists():
            raise ConfigError(f"bank file not found: {bank_path}")
        if tc.granularity == "pixel":
            pixel_bank = fileio.load_pixel_bank(bank_path)
        else:
            bank = fileio.load_bank(bank_path)
    out_dir = Path(args.out or "run")
    out_dir.mkdir(parents=True, exist_ok=True)

    x_train = _features(tc.model.architecture, train_ds.inputs)
    x_val = _features(tc.model.architecture, val_ds.inputs)
    result = trainer.train(
        tc, x_train, train_ds.targets, x_val, val_ds.targets, train_ds.num_classes,
        bank=bank, pixel_bank=pixel_bank,
    )
    header, rows = trainer.records_to_csv(tc.task, result.records)
    fileio.save_csv(out_dir / "metrics.csv", header, rows)
    fileio.save_checkpoint(out_dir / "checkpoint.pckpt", tc.model, result.params, tc.epochs)
    fileio.save_json(out_dir / "resolved_config.json", _resolved_dict(cfg, tc))
    final = result.records[-1]
    metrics = " ".join(f"{k}={v:.4f}" for k, v in final.val_metrics.items())
    print(f"trained {tc.epochs} epochs; final {metrics}; outputs in {out_dir}")
    return 0


def _load_checkpoint_or_die(path: str):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"checkpoint not found: {p}")
    try:
        return fileio.load_checkpoint(p)
    except FormatError as e:
        raise ConfigError(str(e)) from e


def cmd_bank(args) -> int:
    cfg = resolve_config(args)
    train_ds, val_ds = resolve_dataset(cfg)
    cfg["task"] = train_ds.task
    spec, params, _ = _load_checkpoint_or_die(args.checkpoint)
    x_train = _features(spec.architecture, train_ds.inputs)
    x_val = _features(spec.architecture, val_ds.inputs)
    _check_model_matches(spec, train_ds.task, x_train, train_ds.num_classes)
    tc_like = _eval_config(train_ds.task, spec, cfg)
    temperature = 1.0
    if args.variant == "ts":
        if train_ds.task != "multiclass":
            raise ConfigError("temperature-scaled banks require the multiclass task")
        logits = models.forward(spec, params, x_val)
        temperature = fit_temperature(logits, val_ds.targets).temperature
    if args.granularity == "pixel":
        if train_ds.task != "segmentation":
            raise ConfigError("pixel banks require the segmentation task")
        maps = trainer.score_pixel_bank(tc_like, params, x_train, train_ds.targets)
        fileio.save_pixel_bank(args.out, maps)
        print(f"wrote pixel bank for {len(maps)} samples to {args.out}")
        return 0
    bank = trainer.score_training_set(
        tc_like, params, x_train, train_ds.targets, train_ds.num_classes,
        variant=args.variant, temperature=temperature,
    )
    fileio.save_bank(args.out, bank)
    extra = f" (T={temperature:.4f})" if args.variant == "ts" else ""
    print(f"wrote {len(bank)}-sample bank ({bank.source}){extra} to {args.out}")
    return 0


def _eval_config(task: str, spec, cfg: dict) -> TrainConfig:
    return TrainConfig(task=task, model=spec, epochs=1, seed=int(cfg.get("seed", 0)))


def _check_model_matches(spec, task: str, inputs: np.ndarray, num_classes: int) -> None:
    try:
        head = inputs[:1]
        out = models.forward(spec, np.zeros(spec.param_count()), head)
    except ValueError as e:
        raise ConfigError(f"checkpoint does not fit this dataset: {e}") from e
    if out.shape[-1] != num_classes:
        raise ConfigError(
            f"checkpoint predicts {out.shape[-1]} classes but dataset has {num_classes}"
        )


def cmd_corrupt(args) -> int:
    cfg = resolve_config(args)
    _, val_ds = resolve_dataset(cfg)
    kinds = list(corruption.KINDS) if args.kinds == "all" else [k for k in args.kinds.split(",") if k]
    for k in kinds:
        if k not in corruption.KINDS:
            raise ConfigError(f"unknown corruption kind {k!r}")
    severities = [int(s) for s in args.severities.split(",")]
    for s in severities:
        if not (1 <= s <= 5):
            raise ConfigError(f"severity {s} outside 1..5")
    out_dir = Path(args.out or "corrupted")
    # vector datasets corrupt as one-row grayscale images
    images = [v if v.ndim >= 2 else v[None, :] for v in (val_ds.inputs[i] for i in range(len(val_ds)))]
    rows = corruption.corrupt_dataset(images, kinds, severities, derive_seed(int(cfg["seed"]), "corruption"), out_dir)
    fileio.save_csv(
        out_dir / "labels.csv", ["id", "label"],
        [[i, int(val_ds.targets[i])] for i in range(len(val_ds))] if val_ds.task == "multiclass" else [],
    )
    print(f"wrote {len(rows)} corrupted images + manifest to {out_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    train_ds, val_ds = resolve_dataset(cfg)
    spec, params, _ = _load_checkpoint_or_die(args.checkpoint)
    x_val = _features(spec.architecture, val_ds.inputs)
    _check_model_matches(spec, val_ds.task, x_val, val_ds.num_classes)
    out = Path(args.out or "eval.csv")
    if args.manifest:
        if val_ds.task != "multiclass":
            raise ConfigError("robustness evaluation requires a multiclass dataset")
        manifest_path = Path(args.manifest)
        if not manifest_path.exists():
            raise ConfigError(f"manifest not found: {manifest_path}")
        header, raw = fileio.load_csv(manifest_path)
        if header != ["orig_id", "kind", "severity", "path"]:
            raise FormatError(f"{manifest_path}: bad manifest header {header}")
        rows = [(int(r[0]), r[1], int(r[2]), r[3]) for r in raw]
        base = manifest_path.parent

        def evaluate_images(images):
            arr = np.stack([np.asarray(im, dtype=np.float64) for im in images])
            feats = _features(spec.architecture, arr)
            return np.argmax(models.forward(spec, params, feats), axis=1)

        clean_preds = np.argmax(models.forward(spec, params, x_val), axis=1)
        clean_acc = accuracy(clean_preds, val_ds.targets)
        labels_by_id = {i: int(val_ds.targets[i]) for i in range(len(val_ds))}
        header, table = corruption.robustness_report(
            evaluate_images, rows, lambda p: fileio.load_image(base / p), labels_by_id, clean_acc
        )
        fileio.save_csv(out, header, table)
        print(f"robustness table ({len(table) - 1} kinds) written to {out}")
        return 0
    logits = models.forward(spec, params, x_val)
    if val_ds.task == "multiclass":
        rows = [["val_accuracy", format_float(accuracy(np.argmax(logits, axis=1), val_ds.targets))]]
    elif val_ds.task == "multilabel":
        value, skipped = mean_average_precision(sigmoid(logits), val_ds.targets)
        rows = [["val_map", format_float(value)], ["skipped_labels", ";".join(map(str, skipped))]]
    else:
        preds = np.argmax(logits, axis=-1)
        _, miou, mdice = iou_dice(list(preds), list(np.asarray(val_ds.targets)), val_ds.num_classes)
        rows = [["val_miou", format_float(miou)], ["val_mdice", format_float(mdice)]]
    fileio.save_csv(out, ["metric", "value"], rows)
    print(f"metrics written to {out}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = resolve_config(args)
    _, val_ds = resolve_dataset(cfg)
    if val_ds.task != "multiclass":
        raise ConfigError("calibration requires a multiclass dataset")
    spec, params, _ = _load_checkpoint_or_die(args.checkpoint)
    x_val = _features(spec.architecture, val_ds.inputs)
    _check_model_matches(spec, val_ds.task, x_val, val_ds.num_classes)
    logits = models.forward(spec, params, x_val)
    tm = fit_temperature(logits, val_ds.targets)
    probs = apply_temperature(logits, 1.0)
    confidences = probs.max(axis=1)
    correct = np.argmax(logits, axis=1) == np.asarray(val_ds.targets)
    report = ece(
        confidences, correct, bins=args.bins,
        brier_score=brier(probs, val_ds.targets),
        nll_score=nll(logits, val_ds.targets, 1.0),
    )
    out_dir = Path(args.out or "calibration")
    out_dir.mkdir(parents=True, exist_ok=True)
    fileio.save_json(
        out_dir / "temperature.json",
        {
            "temperature": tm.temperature,
            "nll_at_1": nll(logits, val_ds.targets, 1.0),
            "nll_fitted": nll(logits, val_ds.targets, tm.temperature),
        },
    )
    rows = [["summary", format_float(report.ece), format_float(report.brier), format_float(report.nll), ""]]
    for b in range(report.bins):
        rows.append(
            [
                f"bin{b}",
                format_float(report.bin_confidence[b]),
                format_float(report.bin_accuracy[b]),
                "",
                str(int(report.bin_count[b])),
            ]
        )
    fileio.save_csv(out_dir / "calibration.csv", ["row", "ece_or_conf", "brier_or_acc", "nll", "count"], rows)
    print(f"fitted T={tm.temperature:.4f}; ECE={report.ece:.6f}; outputs in {out_dir}")
    return 0


_REPORT_METRICS = ["val_accuracy", "val_map", "val_miou", "val_mdice", "train_loss"]


def cmd_report(args) -> int:
    header = ["run", "task", "epochs"] + _REPORT_METRICS
    out_rows = []
    for run_dir in args.runs:
        run = Path(run_dir)
        metrics_path = run / "metrics.csv"
        if not metrics_path.exists():
            raise ConfigError(f"no metrics.csv in {run}")
        mh, mrows = fileio.load_csv(metrics_path)
        if not mrows:
            raise ConfigError(f"{metrics_path}: no epochs recorded")
        final = dict(zip(mh, mrows[-1]))
        task = "?"
        cfg_path = run / "resolved_config.json"
        if cfg_path.exists():
            task = fileio.load_json(cfg_path).get("task", "?")
        row = [str(run), task, final.get("epoch", "NA")]
        for metric in _REPORT_METRICS:
            row.append(final.get(metric, "NA") or "NA")
        out_rows.append(row)
    out = Path(args.out or "report.csv")
    fileio.save_csv(out, header, out_rows)
    print(f"comparison table for {len(out_rows)} runs written to {out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="base seed for all derived randomness")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--preset", help="named hyper-parameter preset")
    p.add_argument("--data", help="dataset spec: blobs | multilabel | shapes | cifar10:<path> | dir:<path>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcbls", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model (baseline, curriculum, or paced)")
    _add_common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--arch", choices=list(models.ARCHITECTURES))
    p.add_argument("--bank", help="sample-bank CSV (or pixel-bank directory)")
    p.add_argument("--pace", action="store_true", help="enable the preset's pace plan")
    p.add_argument("--pace-lambda", dest="pace_lambda", type=float)
    p.add_argument("--pace-e-all", dest="pace_e_all", type=float)
    p.add_argument("--granularity", choices=["sample", "pixel"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bank", help="score a training set with a frozen checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--variant", choices=["plain", "ts", "ls"], default="plain")
    p.add_argument("--granularity", choices=["sample", "pixel"], default="sample")
    p.set_defaults(func=cmd_bank)

    p = sub.add_parser("corrupt", help="corrupt a dataset's validation images")
    _add_common(p)
    p.add_argument("--kinds", default="all", help="comma list of kinds, or 'all'")
    p.add_argument("--severities", default="1,2,3,4,5")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("eval", help="evaluate a checkpoint on clean or corrupted data")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", help="corruption manifest for a robustness table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="fit a temperature + calibration report")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", help="comparison table across run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
