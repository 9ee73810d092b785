"""Binary tensor container, checkpoint file, and the key=value run config.

Tensor file layout (all integers little-endian):
    bytes 0-3   magic "DCT1"
    byte  4     dtype code (0 = f32, 1 = f64)
    byte  5     ndim
    next  8*ndim  shape extents, u64
    rest        row-major payload

A checkpoint is a "DCK1" header, a config-hash line, the stage count, then a
sequence of (name, tensor) entries each embedding the DCT1 framing.
"""

from __future__ import annotations

import hashlib
import io
import struct

import numpy as np

from .errors import ConfigError, FormatError

MAGIC = b"DCT1"
CKPT_MAGIC = b"DCK1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def write_tensor(stream, arr: np.ndarray):
    arr = np.asarray(arr)
    if arr.dtype not in _CODES:
        raise FormatError(f"unsupported dtype {arr.dtype}; use f32 or f64")
    stream.write(MAGIC)
    stream.write(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
    stream.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    stream.write(np.ascontiguousarray(arr).tobytes())


def read_tensor(stream) -> np.ndarray:
    head = stream.read(4)
    if head != MAGIC:
        raise FormatError(f"bad magic at offset 0: {head!r}")
    meta = stream.read(2)
    if len(meta) != 2:
        raise FormatError("truncated header at offset 4")
    code, ndim = struct.unpack("<BB", meta)
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code} at offset 4")
    raw = stream.read(8 * ndim)
    if len(raw) != 8 * ndim:
        raise FormatError("truncated shape block at offset 6")
    shape = struct.unpack(f"<{ndim}Q", raw)
    dtype = _DTYPES[code]
    count = int(np.prod(shape)) if ndim else 1
    payload = stream.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise FormatError(f"truncated payload at offset {6 + 8 * ndim}: "
                          f"expected {count * dtype.itemsize} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def save_tensor(path, arr: np.ndarray):
    with open(path, "wb") as fh:
        write_tensor(fh, arr)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor(fh)


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path, params: dict[str, np.ndarray], stages: int,
                    config_hash: str, extra: dict[str, str] | None = None):
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        meta = {"config_hash": config_hash, "stages": str(stages), **(extra or {})}
        meta_blob = "\n".join(f"{k}={v}" for k, v in sorted(meta.items())).encode()
        fh.write(struct.pack("<I", len(meta_blob)))
        fh.write(meta_blob)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            blob = name.encode()
            fh.write(struct.pack("<H", len(blob)))
            fh.write(blob)
            write_tensor(fh, params[name])


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with open(path, "rb") as fh:
        if fh.read(4) != CKPT_MAGIC:
            raise FormatError(f"{path}: not a checkpoint file (bad magic)")
        (mlen,) = struct.unpack("<I", fh.read(4))
        meta = {}
        for line in fh.read(mlen).decode().splitlines():
            k, v = line.split("=", 1)
            meta[k] = v
        (count,) = struct.unpack("<I", fh.read(4))
        params = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode()
            params[name] = read_tensor(fh)
    return params, meta


def tensor_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    write_tensor(buf, arr)
    return buf.getvalue()


# -- run configuration -----------------------------------------------------------

def parse_config(text: str) -> dict[str, dict[str, str]]:
    """Flat [section] key=value format; later duplicates win."""
    sections: dict[str, dict[str, str]] = {}
    current = "global"
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        sections.setdefault(current, {})[key.strip()] = val.strip()
    return sections


def read_config(path) -> dict[str, dict[str, str]]:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def config_hash(sections: dict[str, dict[str, str]],
                include: tuple[str, ...] = ("sensing", "solver", "arch")) -> str:
    """Stable digest of the sections that determine the model and operator."""
    lines = []
    for sec in sorted(include):
        for k, v in sorted(sections.get(sec, {}).items()):
            lines.append(f"{sec}.{k}={v}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def diff_sections(a: dict[str, dict[str, str]], b: dict[str, dict[str, str]],
                  include=("sensing", "solver", "arch")) -> list[str]:
    out = []
    for sec in include:
        keys = set(a.get(sec, {})) | set(b.get(sec, {}))
        for k in sorted(keys):
            va, vb = a.get(sec, {}).get(k), b.get(sec, {}).get(k)
            if va != vb:
                out.append(f"{sec}.{k}: {va!r} != {vb!r}")
    return out
