"""On-disk formats: PPM/PGM images, checkpoints, banks, manifests, CSVs.

All writers go through a temp-file-then-rename step so readers never see a
partially written file. Formats:

  checkpoint   magic PCKPT1, u8 architecture tag, per-arch u32 dims,
               float64 LE parameters, u64 LE epoch counter
  sample bank  CSV `sample_id,score,source`, descending score, 9-digit scores
  pixel bank   one sidecar per sample: magic PCBL, u32 H, u32 W,
               H*W float32 LE scores
  images       binary PPM (P6) for RGB, PGM (P5) for grayscale, maxval 255
"""

from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .models import ARCHITECTURES, ModelSpec
from .pacing import SampleBank

CHECKPOINT_MAGIC = b"PCKPT1"
PIXELBANK_MAGIC = b"PCBL"
_ARCH_TAG = {name: i + 1 for i, name in enumerate(ARCHITECTURES)}
_TAG_ARCH = {v: k for k, v in _ARCH_TAG.items()}
_ARCH_NDIMS = {"linear_softmax": 2, "mlp": 3, "tiny_fcn": 4}


class FormatError(ValueError):
    """Raised when a file does not parse as the expected format/version."""


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | Path, spec: ModelSpec, params: np.ndarray, epoch: int) -> None:
    buf = bytearray()
    buf += CHECKPOINT_MAGIC
    buf += struct.pack("<B", _ARCH_TAG[spec.architecture])
    buf += struct.pack(f"<{len(spec.dims)}I", *spec.dims)
    buf += np.asarray(params, dtype="<f8").tobytes()
    buf += struct.pack("<Q", epoch)
    atomic_write_bytes(path, bytes(buf))


def load_checkpoint(path: str | Path) -> tuple[ModelSpec, np.ndarray, int]:
    data = Path(path).read_bytes()
    if len(data) < len(CHECKPOINT_MAGIC) + 1 or not data.startswith(CHECKPOINT_MAGIC):
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    pos = len(CHECKPOINT_MAGIC)
    (tag,) = struct.unpack_from("<B", data, pos)
    pos += 1
    if tag not in _TAG_ARCH:
        raise FormatError(f"{path}: unknown architecture tag {tag}")
    arch = _TAG_ARCH[tag]
    nd = _ARCH_NDIMS[arch]
    dims = struct.unpack_from(f"<{nd}I", data, pos)
    pos += 4 * nd
    spec = ModelSpec(architecture=arch, dims=dims)
    count = spec.param_count()
    want = pos + 8 * count + 8
    if len(data) != want:
        raise FormatError(f"{path}: expected {want} bytes, found {len(data)}")
    params = np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(np.float64)
    pos += 8 * count
    (epoch,) = struct.unpack_from("<Q", data, pos)
    return spec, params, epoch


# ---------------------------------------------------------------------------
# sample banks


def save_bank(path: str | Path, bank: SampleBank) -> None:
    lines = ["sample_id,score,source"]
    for sid, score in zip(bank.sample_ids, bank.scores):
        lines.append(f"{int(sid)},{score:.9f},{bank.source}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_bank(path: str | Path) -> SampleBank:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "score", "source"]:
            raise FormatError(f"{path}: bad bank header {header}")
        ids, scores, sources = [], [], set()
        for row in reader:
            if len(row) != 3:
                raise FormatError(f"{path}: malformed bank row {row}")
            ids.append(int(row[0]))
            scores.append(float(row[1]))
            sources.add(row[2])
    if len(sources) > 1:
        raise FormatError(f"{path}: mixed bank sources {sorted(sources)}")
    source = sources.pop() if sources else "plain"
    return SampleBank(
        sample_ids=np.asarray(ids, dtype=np.int64),
        scores=np.asarray(scores, dtype=np.float64),
        source=source,
    )


# ---------------------------------------------------------------------------
# pixel banks (one sidecar file per sample)


def save_pixel_bank(directory: str | Path, maps: list[np.ndarray]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(maps):
        h, w = m.shape
        payload = PIXELBANK_MAGIC + struct.pack("<II", h, w)
        payload += np.asarray(m, dtype="<f4").tobytes()
        atomic_write_bytes(directory / f"{i:06d}.pcbl", payload)


def load_pixel_bank(directory: str | Path) -> list[np.ndarray]:
    directory = Path(directory)
    files = sorted(directory.glob("*.pcbl"))
    if not files:
        raise FormatError(f"{directory}: no pixel-bank sidecars found")
    maps = []
    for f in files:
        data = f.read_bytes()
        if not data.startswith(PIXELBANK_MAGIC):
            raise FormatError(f"{f}: bad pixel-bank magic")
        h, w = struct.unpack_from("<II", data, len(PIXELBANK_MAGIC))
        offset = len(PIXELBANK_MAGIC) + 8
        if len(data) != offset + 4 * h * w:
            raise FormatError(f"{f}: truncated pixel bank")
        maps.append(
            np.frombuffer(data, dtype="<f4", count=h * w, offset=offset).reshape(h, w).copy()
        )
    return maps


# ---------------------------------------------------------------------------
# images (binary portable pixmaps; floats in [0,1] <-> bytes)


def save_image(path: str | Path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.float64)
    data = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    if image.ndim == 2:
        header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode()
    elif image.ndim == 3 and image.shape[2] == 3:
        header = f"P6\n{image.shape[1]} {image.shape[0]}\n255\n".encode()
    else:
        raise ValueError(f"expected (H,W) or (H,W,3) image, got {image.shape}")
    atomic_write_bytes(path, header + data.tobytes())


def load_image(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    channels = 3 if data[:2] == b"P6" else 1
    expect = w * h * channels
    raw = np.frombuffer(data, dtype=np.uint8, count=-1, offset=pos)
    if raw.size != expect:
        raise FormatError(f"{path}: expected {expect} pixel bytes, found {raw.size}")
    img = raw.astype(np.float64) / 255.0
    return img.reshape(h, w) if channels == 1 else img.reshape(h, w, 3)


# ---------------------------------------------------------------------------
# CSV helpers


def save_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty CSV")
        return header, [row for row in reader]


def save_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path: str | Path):
    with open(path) as fh:
        return json.load(fh)


def format_float(x: float) -> str:
    """Shortest round-trip decimal form; stable across reruns."""
    return repr(float(x))
