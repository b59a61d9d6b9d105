"""Versioned binary parameter checkpoints.

Layout: 8-byte magic ``MCGCKPT1``, parameter count (u32 LE), then per
parameter: name length (u16 LE), UTF-8 name, rows (u32 LE), cols (u32 LE),
row-major f64 LE values. Round-trips are bit-exact.
"""

import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"MCGCKPT1"


def save_params(path, params):
    blob = bytearray(MAGIC)
    blob += struct.pack("<I", len(params))
    for p in params:
        name = p.name.encode()
        rows, cols = p.value.shape
        blob += struct.pack("<H", len(name))
        blob += name
        blob += struct.pack("<II", rows, cols)
        blob += np.ascontiguousarray(p.value, dtype="<f8").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(blob))


def load_params(path):
    """Read a checkpoint into a dict name -> 2-D float64 array (file order)."""
    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise CheckpointError(f"{path}: truncated at byte {off}")
        piece = blob[off:off + n]
        off += n
        return piece

    if take(8) != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint")
    (count,) = struct.unpack("<I", take(4))
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        try:
            name = take(name_len).decode()
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"{path}: undecodable parameter name") from exc
        rows, cols = struct.unpack("<II", take(8))
        data = np.frombuffer(take(rows * cols * 8), dtype="<f8")
        out[name] = data.reshape(rows, cols).copy()
    if off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - off} trailing bytes")
    return out


def load_into(path, params):
    """Overwrite parameter values in place from a checkpoint; names must match exactly."""
    loaded = load_params(path)
    names = {p.name for p in params}
    if names != set(loaded):
        missing = sorted(names - set(loaded))
        extra = sorted(set(loaded) - names)
        raise CheckpointError(f"{path}: parameter set mismatch, missing {missing}, unexpected {extra}")
    for p in params:
        value = loaded[p.name]
        if value.shape != p.value.shape:
            raise CheckpointError(f"{path}: {p.name} has shape {value.shape}, expected {p.value.shape}")
        p.value[:] = value
