"""Ternary algebra on the traceless symmetric 2x2 matrices.

Elements of ``C_perp = span{sigma1, sigma3}`` are stored as coefficient
pairs ``(c1, c3)``; the matrix form ``[[c3, c1], [c1, -c3]]`` is only
materialized by :meth:`CPerpElement.as_matrix` for checking.

All functions accept either :class:`CPerpElement` values or float arrays
whose trailing axis holds ``(c1, c3)``; batched inputs broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Callable, NamedTuple

import numpy as np

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])

J_TAGS = ("31-", "31+", "23-", "23+")
COMPONENTS = ("S", "A") + tuple("J" + tag for tag in J_TAGS)

# Index orderings of the orbit vector (T_ijk, T_jki, T_kij, T_ikj, T_jik, T_kji).
ORBIT = ("ijk", "jki", "kij", "ikj", "jik", "kji")

# Rows map the orbit vector to (S, A, J31-, J31+, J23-, J23+).  The two J23
# rows are chosen so that J23- is odd and J23+ even under the j<->k exchange,
# and so that applying them to mu reproduces the J23 closed forms below.
SYMMETRIZER = np.array(
    [
        [1, 1, 1, 1, 1, 1],
        [1, 1, 1, -1, -1, -1],
        [1, 0, -1, 1, 0, -1],
        [1, 0, -1, -1, 0, 1],
        [0, -1, 1, 0, -1, 1],
        [0, -1, 1, 0, 1, -1],
    ],
    dtype=float,
)
SYMMETRIZER_INV = np.linalg.inv(SYMMETRIZER)


class DimensionError(ValueError):
    """Tensor shapes are outside what an operation supports."""


class CPerpElement(NamedTuple):
    c1: float
    c3: float

    def as_matrix(self) -> np.ndarray:
        return self.c1 * SIGMA1 + self.c3 * SIGMA3

    @classmethod
    def from_matrix(cls, m) -> "CPerpElement":
        """Project a 2x2 matrix onto the sigma1/sigma3 coefficients."""
        m = np.asarray(m, dtype=float)
        return cls(0.5 * (m[0, 1] + m[1, 0]), 0.5 * (m[0, 0] - m[1, 1]))


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


def _pair(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape[-1:] != (2,):
        raise DimensionError(f"expected trailing axis of length 2, got shape {a.shape}")
    return a


def _out(c1, c3, *args):
    if all(isinstance(a, CPerpElement) for a in args):
        return CPerpElement(float(c1), float(c3))
    return np.stack([c1, c3], axis=-1)


def mu(u, v, w):
    """Triple matrix product ``uvw``; closed on C_perp and trilinear."""
    u1, u3 = np.moveaxis(_pair(u), -1, 0)
    v1, v3 = np.moveaxis(_pair(v), -1, 0)
    w1, w3 = np.moveaxis(_pair(w), -1, 0)
    c1 = u1 * v1 * w1 + u3 * v3 * w1 - u3 * v1 * w3 + u1 * v3 * w3
    c3 = u3 * v3 * w3 + u1 * v1 * w3 - u1 * v3 * w1 + u3 * v1 * w1
    return _out(c1, c3, u, v, w)


def mu_matrix(u, v, w) -> CPerpElement:
    """Reference product through explicit 2x2 matrices (slow path)."""
    m = CPerpElement(*u).as_matrix() @ CPerpElement(*v).as_matrix() @ CPerpElement(*w).as_matrix()
    return CPerpElement.from_matrix(m)


def triple_product(u, v, w):
    """``det[u v w] = u . (v x w)``, batched over leading axes."""
    u, v, w = (np.asarray(a, dtype=float) for a in (u, v, w))
    val = np.einsum("...i,...i->...", u, np.cross(v, w))
    return float(val) if np.ndim(val) == 0 else val


def component_S(u, v, w):
    """Sum of ``mu`` over the six orderings of ``(u, v, w)``."""
    u1, u3 = np.moveaxis(_pair(u), -1, 0)
    v1, v3 = np.moveaxis(_pair(v), -1, 0)
    w1, w3 = np.moveaxis(_pair(w), -1, 0)
    c1 = 2 * (3 * u1 * v1 * w1 + u1 * v3 * w3 + u3 * v1 * w3 + u3 * v3 * w1)
    c3 = 2 * (3 * u3 * v3 * w3 + u3 * v1 * w1 + u1 * v3 * w1 + u1 * v1 * w3)
    return _out(c1, c3, u, v, w)


def _normalize_tag(tag: str) -> str:
    t = str(tag).replace("−", "-").removeprefix("J")
    if t not in J_TAGS:
        raise ValueError(f"unknown Jacobi component {tag!r}; expected one of {J_TAGS}")
    return t


def component_J(tag: str, u, v, w):
    """Closed-form Jacobi component ``tag`` in ``{'31-', '31+', '23-', '23+'}``."""
    tag = _normalize_tag(tag)
    u1, u3 = np.moveaxis(_pair(u), -1, 0)
    v1, v3 = np.moveaxis(_pair(v), -1, 0)
    w1, w3 = np.moveaxis(_pair(w), -1, 0)
    if tag == "31-":
        c1 = 2 * (u1 * v3 * w3 - u3 * v3 * w1)
        c3 = 2 * (u3 * v1 * w1 - u1 * v1 * w3)
    elif tag == "31+":
        c1 = 2 * (u1 * v3 * w3 - 2 * u3 * v1 * w3 + u3 * v3 * w1)
        c3 = 2 * (u3 * v1 * w1 - 2 * u1 * v3 * w1 + u1 * v1 * w3)
    elif tag == "23-":
        c1 = 2 * (u3 * v3 * w1 - u3 * v1 * w3)
        c3 = 2 * (u1 * v1 * w3 - u1 * v3 * w1)
    else:
        c1 = 2 * (-2 * u1 * v3 * w3 + u3 * v1 * w3 + u3 * v3 * w1)
        c3 = 2 * (-2 * u3 * v1 * w1 + u1 * v3 * w1 + u1 * v1 * w3)
    return _out(c1, c3, u, v, w)


def _mu_orbit(u, v, w) -> list:
    args = {"i": u, "j": v, "k": w}
    return [mu(*(args[c] for c in order)) for order in ORBIT]


def symmetrized_mu(component: str, u, v, w):
    """Apply one row of :data:`SYMMETRIZER` to the six orderings of ``mu``.

    This is the slow reference for :func:`component_S` and
    :func:`component_J`.
    """
    row = SYMMETRIZER[COMPONENTS.index(component)]
    orbit = [_pair(x) for x in _mu_orbit(u, v, w)]
    total = sum(c * x for c, x in zip(row, orbit))
    return _out(total[..., 0], total[..., 1], u, v, w)


def antisym_combination(u, v, w):
    """``uvw + vwu + wuv - wvu - uwv - vuw``; identically zero on C_perp."""
    uvw, vwu, wuv = mu(u, v, w), mu(v, w, u), mu(w, u, v)
    wvu, uwv, vuw = mu(w, v, u), mu(u, w, v), mu(v, u, w)
    total = _pair(uvw) + _pair(vwu) + _pair(wuv) - _pair(wvu) - _pair(uwv) - _pair(vuw)
    return _out(total[..., 0], total[..., 1], u, v, w)


# --- cubical tensors -------------------------------------------------------


@dataclass(frozen=True)
class SymmetryComponents:
    s: np.ndarray
    a: np.ndarray
    j31m: np.ndarray
    j31p: np.ndarray
    j23m: np.ndarray
    j23p: np.ndarray

    def as_tuple(self) -> tuple[np.ndarray, ...]:
        return (self.s, self.a, self.j31m, self.j31p, self.j23m, self.j23p)

    def __iter__(self):
        return iter(self.as_tuple())


def _check_cube(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 3 or len(set(t.shape)) != 1:
        raise DimensionError(f"expected a cubical 3-way array, got shape {t.shape}")
    if t.shape[0] < 3:
        raise DimensionError(f"side length must be at least 3, got {t.shape[0]}")
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor has non-finite entries")
    return t


def permute_indices(t: np.ndarray, order: str) -> np.ndarray:
    """Return ``X`` with ``X[i, j, k] = t[<order>]``, e.g. order ``'jki'``."""
    return np.einsum(f"{order}->ijk", t)


def orbit(t: np.ndarray) -> np.ndarray:
    return np.stack([permute_indices(t, o) for o in ORBIT])


def decompose(t) -> SymmetryComponents:
    t = _check_cube(t)
    parts = np.einsum("cp,pijk->cijk", SYMMETRIZER, orbit(t))
    return SymmetryComponents(*parts)


def recompose(c: SymmetryComponents) -> np.ndarray:
    parts = [np.asarray(x, dtype=float) for x in c]
    shapes = {p.shape for p in parts}
    if len(shapes) != 1:
        raise DimensionError(f"component shapes differ: {sorted(shapes)}")
    # Row 0 of the inverse recovers the identity ordering T_ijk.
    return np.einsum("c,cijk->ijk", SYMMETRIZER_INV[0], np.stack(parts))


def project_orthogonal(t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``t`` into totally symmetric, totally antisymmetric and Jacobi parts."""
    t = _check_cube(t)
    c = decompose(t)
    sym = c.s / 6.0
    antisym = c.a / 6.0
    return sym, antisym, t - sym - antisym


def cyclic_sum(t: np.ndarray) -> np.ndarray:
    """``T_ijk + T_jki + T_kij``; zero for Jacobi tensors."""
    return sum(permute_indices(t, o) for o in ORBIT[:3])


def symmetrizer_condition() -> float:
    return float(np.linalg.cond(SYMMETRIZER))


# --- structure tensors ------------------------------------------------------


def structure_tensor(fn: Callable, dim: int) -> np.ndarray:
    """Coefficients ``C[o, a, b, c]`` of a trilinear map on ``R^dim``.

    ``fn(u, v, w)`` must be trilinear; evaluating it on basis vectors
    recovers it exactly.  Scalar-valued maps get ``n_out = 1``.
    """
    eye = np.eye(dim)
    cols = []
    for a, b, c in np.ndindex(dim, dim, dim):
        cols.append(np.atleast_1d(np.asarray(fn(eye[a], eye[b], eye[c]), dtype=float)))
    vals = np.array(cols)
    return vals.T.reshape(vals.shape[1], dim, dim, dim).copy()


def kernel_structure(name: str) -> np.ndarray:
    """Structure tensor for the named building block of a latent model."""
    if name == "cp":
        return np.ones((1, 1, 1, 1))
    if name == "A":
        return structure_tensor(triple_product, 3)
    if name == "mu":
        return structure_tensor(mu, 2)
    if name == "S":
        return structure_tensor(component_S, 2)
    if name.startswith("J"):
        tag = _normalize_tag(name)
        return structure_tensor(lambda u, v, w: component_J(tag, u, v, w), 2)
    raise ValueError(f"unknown kernel {name!r}")


def all_orderings(u, v, w) -> list:
    """``mu`` evaluated on all six argument orderings (brute force)."""
    return [mu(*p) for p in permutations((u, v, w))]
