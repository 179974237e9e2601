"""Binary model files.

Layout (all little-endian)::

    b"NCLF"                     magic
    u32                         format version
    u8                          model kind (0 bias, 1 cp, 2 primitive-nclf, 3 nclf)
    u64 x 3                     dims I, J, K
    u64 x n_blocks              rank of each block, in block order
    f64 tables                  per block: U (I,R,d), then V, then W
    f64 coefficients            per block with trainable coefficients (R, nout)
    f64 biases                  b0, b1 (I), b2 (J), b3 (K)

Block order is S, A, J31-, J31+, J23-, J23+ for NCLF; mu, A for primitive
NCLF; the single cp block for CP; none for bias-only.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .models import KINDS, BiasTables, LatentModel, _BLOCK_SPECS, build_layout

MAGIC = b"NCLF"
VERSION = 1
_F8 = np.dtype("<f8")


class FormatError(ValueError):
    """Model stream is corrupt, truncated or of an unsupported version."""


class KindMismatchError(FormatError):
    pass


def serialize_params(model: LatentModel) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IB", VERSION, KINDS.index(model.kind)))
    buf.write(struct.pack("<3Q", *model.dims))
    for b in model.layout:
        buf.write(struct.pack("<Q", b.rank))
    for b in model.layout:
        blk = model.block(b.name)
        for t in (blk.U, blk.V, blk.W):
            buf.write(np.ascontiguousarray(t, dtype=_F8).tobytes())
    for b in model.layout:
        blk = model.block(b.name)
        if blk.coef is not None:
            buf.write(np.ascontiguousarray(blk.coef, dtype=_F8).tobytes())
    bias = model.biases
    buf.write(struct.pack("<d", bias.b0))
    for t in (bias.b1, bias.b2, bias.b3):
        buf.write(np.ascontiguousarray(t, dtype=_F8).tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated model stream at byte {self.pos} (need {n} more)")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        return np.frombuffer(self.take(8 * n), dtype=_F8).reshape(shape).astype(float)


def deserialize_params(data: bytes, kind: str | None = None) -> LatentModel:
    """Inverse of :func:`serialize_params`; ``kind`` asserts the model type."""
    r = _Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise FormatError("bad magic bytes; not a model file")
    version, kind_code = r.unpack("<IB")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    if kind_code >= len(KINDS):
        raise FormatError(f"unknown model kind code {kind_code}")
    file_kind = KINDS[kind_code]
    if kind is not None and kind != file_kind:
        raise KindMismatchError(f"file holds a {file_kind} model, expected {kind}")
    dims = r.unpack("<3Q")
    names = [spec[0] for spec in _BLOCK_SPECS[file_kind]]
    ranks = {name: r.unpack("<Q")[0] for name in names}
    if any(v == 0 for v in ranks.values()) or any(d == 0 for d in dims):
        raise FormatError("zero rank or dimension in header")
    layout = build_layout(file_kind, ranks)
    D = sum(b.rank * b.dim for b in layout)
    P = [np.empty((n, D)) for n in dims]
    for b in layout:
        sl = slice(b.col, b.col + b.rank * b.dim)
        for t, n in zip(P, dims):
            t[:, sl] = r.floats((n, b.rank, b.dim)).reshape(n, -1)
    coef = np.concatenate(
        [r.floats((b.rank * b.nout,)) for b in layout if b.coef >= 0] or [np.zeros(0)]
    )
    (b0,) = r.unpack("<d")
    b1, b2, b3 = (r.floats((n,)) for n in dims)
    if r.pos != len(r.data):
        raise FormatError(f"{len(r.data) - r.pos} trailing bytes after model")
    return LatentModel(file_kind, dims, ranks, *P, coef, BiasTables(b0, b1, b2, b3))


def save_model(model: LatentModel, path: str | Path | BinaryIO) -> None:
    data = serialize_params(model)
    if hasattr(path, "write"):
        path.write(data)
    else:
        Path(path).write_bytes(data)


def load_model(path: str | Path | BinaryIO, kind: str | None = None) -> LatentModel:
    data = path.read() if hasattr(path, "read") else Path(path).read_bytes()
    return deserialize_params(data, kind=kind)
