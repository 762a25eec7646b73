"""Self-describing binary container for tensors, decompositions and patterns.

A file is one UTF-8 JSON header line (terminated by ``\\n``) followed by a
raw payload.  Dense tensors and core chains store little-endian float64 in
first-index-fastest order; patterns store one byte (0/1) per fiber flag.
Round trips are bitwise lossless, NaN payload bytes included.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import FormatError
from .patterns import FiberPattern
from .tensor import TensorTrain

MAGIC = "dtns"
VERSION = 1


def _header(kind, shape, ranks=None):
    header = {
        "magic": MAGIC,
        "version": VERSION,
        "kind": kind,
        "shape": [int(s) for s in shape],
        "dtype": "f64",
        "order": "first-index-fastest",
    }
    if ranks is not None:
        header["ranks"] = [int(r) for r in ranks]
    return header


def write_dtns(path, obj):
    """Write a dense tensor (ndarray), TensorTrain, or FiberPattern."""
    if isinstance(obj, TensorTrain):
        header = _header("tt", obj.shape, obj.ranks)
        payload = b"".join(
            np.asarray(core, dtype="<f8").ravel(order="F").tobytes()
            for core in obj.cores
        )
    elif isinstance(obj, FiberPattern):
        header = _header("pattern", obj.base_shape)
        payload = obj.observed.astype(np.uint8).tobytes()
    elif isinstance(obj, np.ndarray):
        header = _header("dense", obj.shape)
        payload = np.asarray(obj, dtype="<f8").ravel(order="F").tobytes()
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def _read_header(fh, path):
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise FormatError(f"{path}: missing header line")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FormatError(f"{path}: header is not a JSON object: {err}") from err
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise FormatError(f"{path}: bad magic, expected {MAGIC!r}")
    if header.get("version") != VERSION:
        raise FormatError(f"{path}: unsupported version {header.get('version')!r}")
    return header


def _read_payload(fh, path, n_bytes):
    payload = fh.read()
    if len(payload) != n_bytes:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, expected {n_bytes}"
        )
    return payload


def read_dtns(path, expect=None):
    """Read one container; returns ndarray, TensorTrain, or FiberPattern.

    ``expect`` optionally enforces the kind ("dense", "tt" or "pattern").
    """
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        kind = header.get("kind")
        if expect is not None and kind != expect:
            raise FormatError(f"{path}: holds a {kind!r} file, expected {expect!r}")
        shape = header.get("shape")
        if (
            not isinstance(shape, list)
            or not shape
            or any(not isinstance(s, int) or s < 1 for s in shape)
        ):
            raise FormatError(f"{path}: bad shape {shape!r}")
        total = math.prod(shape)

        if kind == "dense":
            if header.get("dtype") != "f64":
                raise FormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
            payload = _read_payload(fh, path, 8 * total)
            flat = np.frombuffer(payload, dtype="<f8")
            return flat.reshape(tuple(shape), order="F").copy()

        if kind == "pattern":
            payload = _read_payload(fh, path, total)
            flags = np.frombuffer(payload, dtype=np.uint8)
            if np.any(flags > 1):
                raise FormatError(f"{path}: pattern bytes must be 0 or 1")
            return FiberPattern(tuple(shape), flags.astype(bool))

        if kind == "tt":
            ranks = header.get("ranks")
            if (
                not isinstance(ranks, list)
                or len(ranks) != len(shape) + 1
                or any(not isinstance(r, int) or r < 1 for r in ranks)
            ):
                raise FormatError(f"{path}: bad ranks {ranks!r}")
            sizes = [ranks[n] * shape[n] * ranks[n + 1] for n in range(len(shape))]
            payload = _read_payload(fh, path, 8 * sum(sizes))
            flat = np.frombuffer(payload, dtype="<f8")
            cores, offset = [], 0
            for n, size in enumerate(sizes):
                block = flat[offset:offset + size]
                cores.append(
                    block.reshape(ranks[n], shape[n], ranks[n + 1], order="F").copy()
                )
                offset += size
            try:
                return TensorTrain(tuple(cores))
            except ValueError as err:
                raise FormatError(f"{path}: inconsistent cores: {err}") from err

        raise FormatError(f"{path}: unknown kind {kind!r}")


CSV_HEADER = "snr_db,missing_rate,trial,method,combine,relative_error,wall_time_s,valid_pattern"


def write_trials_csv(path, results, method, combine):
    """Sweep results as CSV; deterministic per seed except the wall-time column."""
    lines = [CSV_HEADER]
    for r in results:
        lines.append(
            f"{r.snr_db!r},{r.missing_rate!r},{r.trial},{method},{combine},"
            f"{r.relative_error!r},{r.wall_time_s!r},{str(r.valid_pattern).lower()}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
