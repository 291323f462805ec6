"""Binary checkpoint container.

Layout (little-endian)::

    b"TEXF"  u32 version  u32 record_count
    per record: u32 name_len, name (utf-8), u32 rank, u32 dims[rank], f32 data[prod(dims)]

Optimizer state uses the same layout in a sibling ``<checkpoint>.adam`` file.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from texfield.autodiff.optim import AdamState
from texfield.errors import ParseError

MAGIC = b"TEXF"
VERSION = 1

_HYPER = ("lr", "beta1", "beta2", "eps")


def save_tensors(path, tensors) -> None:
    """Write a name -> array mapping (arrays or Tensors) to ``path``."""
    items = list(tensors.items())
    chunks = [MAGIC, struct.pack("<II", VERSION, len(items))]
    for name, arr in items:
        arr = np.asarray(getattr(arr, "data", arr), dtype="<f4")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_tensors(path) -> "OrderedDict[str, np.ndarray]":
    """Read a checkpoint written by :func:`save_tensors`."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read checkpoint: {exc.strerror}", path=path) from exc
    if buf[:4] != MAGIC:
        raise ParseError("missing TEXF magic", path=path)
    try:
        version, count = struct.unpack_from("<II", buf, 4)
        if version != VERSION:
            raise ParseError(f"unsupported checkpoint version {version}", path=path)
        off = 12
        out: OrderedDict[str, np.ndarray] = OrderedDict()
        for _ in range(count):
            (n,) = struct.unpack_from("<I", buf, off)
            off += 4
            if off + n > len(buf):
                raise ParseError("truncated checkpoint (record name)", path=path)
            name = buf[off:off + n].decode("utf-8")
            off += n
            (rank,) = struct.unpack_from("<I", buf, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", buf, off)
            off += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            if off + 4 * size > len(buf):
                raise ParseError(f"truncated checkpoint (record {name!r})", path=path)
            arr = np.frombuffer(buf, dtype="<f4", count=size, offset=off).reshape(dims)
            off += 4 * size
            out[name] = arr.astype(np.float32)
    except struct.error as exc:
        raise ParseError(f"truncated checkpoint ({exc})", path=path) from exc
    if off != len(buf):
        raise ParseError(f"{len(buf) - off} trailing bytes", path=path)
    return out


def optimizer_path(checkpoint_path) -> Path:
    p = Path(checkpoint_path)
    return p.with_name(p.name + ".adam")


def save_adam_state(path, state: AdamState, names: list[str]) -> None:
    recs: OrderedDict[str, np.ndarray] = OrderedDict()
    recs["step"] = np.array(state.step, dtype=np.float32)
    for key in _HYPER:
        recs[key] = np.array(getattr(state, key), dtype=np.float32)
    for name, m, v in zip(names, state.m, state.v):
        recs["m." + name] = m
        recs["v." + name] = v
    save_tensors(path, recs)


def load_adam_state(path, names: list[str]) -> AdamState:
    recs = load_tensors(path)
    state = AdamState(**{k: float(recs[k]) for k in _HYPER})
    state.step = int(recs["step"])
    state.m = [recs["m." + n].copy() for n in names]
    state.v = [recs["v." + n].copy() for n in names]
    return state
