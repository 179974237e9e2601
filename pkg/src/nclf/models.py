"""Log-odds predictors: bias-only, CP, primitive NCLF and full NCLF.

Every model is a sum of trilinear building blocks plus frozen biases.  The
latent rows of all blocks are packed side by side into one entity table per
factor (``P1``, ``P2``, ``P3``), so the row length of ``P1`` is the number
of latent parameters per entity (13 for NCLF at unit ranks).  Block views
into those tables are exposed through :meth:`LatentModel.block`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _kernels
from .algebra import kernel_structure

KINDS = ("bias", "cp", "primitive-nclf", "nclf")

# kind -> ordered (block name, latent dim, coefficient width, trainable coefficients)
_BLOCK_SPECS = {
    "bias": (),
    "cp": (("cp", 1, 1, False),),
    "primitive-nclf": (("mu", 2, 2, True), ("A", 3, 1, True)),
    "nclf": (
        ("S", 2, 2, True),
        ("A", 3, 1, True),
        ("J31-", 2, 2, True),
        ("J31+", 2, 2, True),
        ("J23-", 2, 2, True),
        ("J23+", 2, 2, True),
    ),
}

DEFAULT_RANKS = {
    "bias": {},
    "cp": {"cp": 5},
    "primitive-nclf": {"mu": 5, "A": 1},
    "nclf": {"S": 1, "A": 1, "J31-": 1, "J31+": 1, "J23-": 1, "J23+": 1},
}


class UsageError(ValueError):
    """Bad arguments to a model constructor."""


@dataclass
class BiasTables:
    b0: float
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray

    @classmethod
    def zeros(cls, dims) -> "BiasTables":
        I, J, K = dims
        return cls(0.0, np.zeros(I), np.zeros(J), np.zeros(K))

    def copy(self) -> "BiasTables":
        return BiasTables(float(self.b0), self.b1.copy(), self.b2.copy(), self.b3.copy())

    def __eq__(self, other):
        if not isinstance(other, BiasTables):
            return NotImplemented
        return (
            self.b0 == other.b0
            and np.array_equal(self.b1, other.b1)
            and np.array_equal(self.b2, other.b2)
            and np.array_equal(self.b3, other.b3)
        )


@dataclass(frozen=True)
class BlockLayout:
    name: str
    rank: int
    dim: int
    nout: int
    train_coef: bool
    col: int  # first column in the entity tables
    coef: int  # first entry in the coefficient vector, -1 if fixed


@dataclass
class Block:
    """Views of one building block; writes go through to the model."""

    name: str
    U: np.ndarray  # (I, R, d)
    V: np.ndarray
    W: np.ndarray
    coef: np.ndarray | None  # (R, nout), None for CP


def _normalize_ranks(kind: str, ranks: Mapping[str, int] | int | None) -> dict[str, int]:
    if kind not in _BLOCK_SPECS:
        raise UsageError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    out = dict(DEFAULT_RANKS[kind])
    if ranks is None:
        return out
    if isinstance(ranks, (int, np.integer)):
        if kind != "cp":
            raise UsageError(f"a single integer rank only applies to cp, not {kind}")
        ranks = {"cp": int(ranks)}
    for name, r in ranks.items():
        name = name.replace("−", "-")
        if name not in out:
            raise UsageError(f"model {kind} has no component {name!r}")
        if int(r) < 1:
            raise UsageError(f"rank of {name} must be positive, got {r}")
        out[name] = int(r)
    return out


@dataclass(eq=False)
class LatentModel:
    kind: str
    dims: tuple[int, int, int]
    ranks: dict[str, int]
    P1: np.ndarray
    P2: np.ndarray
    P3: np.ndarray
    coef: np.ndarray
    biases: BiasTables
    layout: tuple[BlockLayout, ...] = field(init=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.layout = build_layout(self.kind, self.ranks)
        D = self.entity_dim
        for name, P, n in zip(("P1", "P2", "P3"), (self.P1, self.P2, self.P3), self.dims):
            if P.shape != (n, D):
                raise UsageError(f"{name} has shape {P.shape}, expected {(n, D)}")
        if self.coef.shape != (self.n_coef,):
            raise UsageError(f"coef has shape {self.coef.shape}, expected {(self.n_coef,)}")
        self._compile()

    def _compile(self):
        lay = self.layout
        structs = [kernel_structure(b.name) for b in lay for _ in range(b.rank)]
        offs = np.cumsum([0] + [s.size for s in structs])
        self._struct = np.concatenate([s.ravel() for s in structs]) if structs else np.zeros(0)
        cols, dims, nouts, coefs = [], [], [], []
        for b in lay:
            for r in range(b.rank):
                cols.append(b.col + r * b.dim)
                dims.append(b.dim)
                nouts.append(b.nout)
                coefs.append(b.coef + r * b.nout if b.coef >= 0 else -1)
        as_int = lambda x: np.asarray(x, dtype=np.int64)
        self._terms = (
            as_int(cols), as_int(dims), as_int(nouts), as_int(coefs), as_int(offs[:-1]),
            self._struct,
        )
        mask = np.zeros(self.n_coef, dtype=np.bool_)
        for b in lay:
            if b.coef >= 0:
                mask[b.coef : b.coef + b.rank * b.nout] = True
        self.coef_trainable = mask

    @property
    def entity_dim(self) -> int:
        return sum(b.rank * b.dim for b in self.layout)

    @property
    def n_coef(self) -> int:
        return sum(b.rank * b.nout for b in self.layout if b.coef >= 0)

    @property
    def tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.P1, self.P2, self.P3

    def block(self, name: str) -> Block:
        for b in self.layout:
            if b.name == name:
                sl = slice(b.col, b.col + b.rank * b.dim)
                views = [P[:, sl].reshape(P.shape[0], b.rank, b.dim) for P in self.tables]
                coef = None
                if b.coef >= 0:
                    coef = self.coef[b.coef : b.coef + b.rank * b.nout].reshape(b.rank, b.nout)
                return Block(b.name, *views, coef)
        raise KeyError(f"model {self.kind} has no block {name!r}")

    def copy(self) -> "LatentModel":
        return LatentModel(
            self.kind, self.dims, dict(self.ranks), self.P1.copy(), self.P2.copy(),
            self.P3.copy(), self.coef.copy(), self.biases.copy(),
        )

    def __eq__(self, other):
        if not isinstance(other, LatentModel):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.dims == other.dims
            and self.ranks == other.ranks
            and all(np.array_equal(a, b) for a, b in zip(self.tables, other.tables))
            and np.array_equal(self.coef, other.coef)
            and self.biases == other.biases
        )

    def penalty(self, include_coef: bool = True) -> float:
        """Sum of squares of all latent tables (and trainable coefficients)."""
        total = sum(float(np.sum(P * P)) for P in self.tables)
        if include_coef:
            c = self.coef[self.coef_trainable]
            total += float(c @ c)
        return total


def build_layout(kind: str, ranks: Mapping[str, int]) -> tuple[BlockLayout, ...]:
    ranks = _normalize_ranks(kind, ranks)
    out, col, coef = [], 0, 0
    for name, dim, nout, train in _BLOCK_SPECS[kind]:
        r = ranks[name]
        out.append(BlockLayout(name, r, dim, nout, train, col, coef if train else -1))
        col += r * dim
        if train:
            coef += r * nout
    return tuple(out)


def init_params(kind: str, dims, ranks=None, seed: int = 0, scale: float = 0.1) -> LatentModel:
    """Gaussian(0, scale^2) latent tables, unit coefficients, zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise UsageError(f"dims must be three positive integers, got {dims}")
    if scale < 0:
        raise UsageError(f"scale must be nonnegative, got {scale}")
    ranks = _normalize_ranks(kind, ranks)
    layout = build_layout(kind, ranks)
    D = sum(b.rank * b.dim for b in layout)
    n_coef = sum(b.rank * b.nout for b in layout if b.coef >= 0)
    rng = np.random.default_rng(seed)
    P = [scale * rng.standard_normal((n, D)) for n in dims]
    return LatentModel(kind, dims, ranks, *P, np.ones(n_coef), BiasTables.zeros(dims))


def _as_index(x, n: int, name: str, cold_start: bool) -> np.ndarray:
    a = np.asarray(x)
    if not np.issubdtype(a.dtype, np.integer):
        raise IndexError(f"{name} indices must be integers")
    a = a.astype(np.int64, copy=False)
    if np.any(a < 0) or (not cold_start and np.any(a >= n)):
        raise IndexError(f"{name} index out of range [0, {n})")
    return a


def predict_logodds(model: LatentModel, i, j, k, cold_start: bool = False):
    """Log-odds ``T_ijk``; scalar in, scalar out, arrays broadcast.

    With ``cold_start`` an entity index past the end of its table is treated
    as unseen: its bias and latent row are taken as zero.
    """
    I, J, K = model.dims
    ii = _as_index(i, I, "i", cold_start)
    jj = _as_index(j, J, "j", cold_start)
    kk = _as_index(k, K, "k", cold_start)
    shape = np.broadcast_shapes(ii.shape, jj.shape, kk.shape)
    flat = [np.ascontiguousarray(np.broadcast_to(a, shape)).ravel() for a in (ii, jj, kk)]
    b = model.biases
    out = _kernels.predict_batch(
        *flat, model.P1, model.P2, model.P3, model.coef, float(b.b0), b.b1, b.b2, b.b3,
        *model._terms,
    ).reshape(shape)
    return float(out) if out.ndim == 0 else out


def logistic(x):
    """Numerically stable ``1 / (1 + exp(-x))``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    z = np.exp(x[~pos])
    out[~pos] = z / (1.0 + z)
    return float(out) if out.ndim == 0 else out


def predict_probability(model: LatentModel, i, j, k, cold_start: bool = False):
    return logistic(predict_logodds(model, i, j, k, cold_start=cold_start))


@dataclass
class SparseGrad:
    """Derivatives of ``T_ijk`` with respect to the parameters it touches."""

    i: int
    j: int
    k: int
    row1: np.ndarray  # d T / d P1[i]
    row2: np.ndarray
    row3: np.ndarray
    coef: np.ndarray  # d T / d coef; zero where coefficients are fixed


def grad_logodds(model: LatentModel, i: int, j: int, k: int) -> SparseGrad:
    I, J, K = model.dims
    for x, n, name in ((i, I, "i"), (j, J, "j"), (k, K, "k")):
        if not 0 <= int(x) < n:
            raise IndexError(f"{name} index {x} out of range [0, {n})")
    gu, gv, gw, gc = _kernels.grad_one(
        int(i), int(j), int(k), model.P1, model.P2, model.P3, model.coef, *model._terms
    )
    gc[~model.coef_trainable] = 0.0
    return SparseGrad(int(i), int(j), int(k), gu, gv, gw, gc)
