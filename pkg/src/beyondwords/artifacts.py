"""On-disk conventions: JSON sidecar + flat little-endian float32 binary."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

F32_LE = np.dtype("<f4")


def dump_json(obj, path) -> None:
    """Write JSON deterministically (sorted keys, fixed separators, trailing newline)."""
    Path(path).write_text(canonical_json(obj) + "\n", encoding="utf-8")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_f32(array: np.ndarray, path) -> None:
    arr = np.ascontiguousarray(array, dtype=F32_LE)
    Path(path).write_bytes(arr.tobytes(order="C"))


def read_f32(path, shape) -> np.ndarray:
    data = np.frombuffer(Path(path).read_bytes(), dtype=F32_LE)
    expected = int(np.prod(shape)) if len(shape) else 1
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} float32 values, found {data.size}")
    return data.reshape(shape).astype(np.float32)


def save_matrix(array: np.ndarray, stem, **meta) -> tuple[Path, Path]:
    """Persist a 2-D matrix as ``<stem>.json`` + ``<stem>.bin``."""
    stem = Path(stem)
    array = np.asarray(array)
    if array.ndim != 2:
        raise ValueError("save_matrix expects a 2-D array")
    n, d = array.shape
    header = {"n": int(n), "d": int(d), "dtype": "f32", "layout": "row-major", "endianness": "little"}
    header.update(meta)
    json_path, bin_path = stem.with_suffix(".json"), stem.with_suffix(".bin")
    dump_json(header, json_path)
    write_f32(array, bin_path)
    return json_path, bin_path


def load_matrix(stem) -> tuple[np.ndarray, dict]:
    stem = Path(stem)
    header = load_json(stem.with_suffix(".json"))
    if header.get("dtype") != "f32" or header.get("endianness") != "little":
        raise ValueError(f"{stem}: unsupported matrix encoding")
    return read_f32(stem.with_suffix(".bin"), (header["n"], header["d"])), header


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_json(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
