"""Compiled inner loops over the flat term layout of a latent model.

A model is a list of terms.  Term ``t`` owns ``dim[t]`` consecutive columns
of each entity table starting at ``col[t]``, ``nout[t]`` coefficients at
``coef[t]`` (``-1`` means a fixed unit coefficient) and a structure tensor
of ``nout * dim**3`` entries at ``struct_off[t]`` in ``struct``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LAW_INVERSE = 0
LAW_CONSTANT = 1


@njit(cache=True)
def _eta(law, eta0, tau, t):
    if law == LAW_INVERSE:
        return eta0 / (1.0 + t / tau)
    return eta0


@njit(cache=True)
def _logistic(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@njit(cache=True)
def _softplus(x):
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True)
def _eval_terms(u, v, w, coef, col, dim, nout, coef_off, struct_off, struct,
                gu, gv, gw, gc, want_grad):
    """Interaction part of the log-odds for one entity triple.

    With ``want_grad`` the partial derivatives are written (not added) into
    ``gu, gv, gw`` (entity rows) and ``gc`` (coefficients).
    """
    total = 0.0
    if want_grad:
        gu[:] = 0.0
        gv[:] = 0.0
        gw[:] = 0.0
        gc[:] = 0.0
    for t in range(col.size):
        d = dim[t]
        c0 = col[t]
        no = nout[t]
        base = struct_off[t]
        cube = d * d * d
        for a in range(d):
            ua = u[c0 + a]
            for b in range(d):
                vb = v[c0 + b]
                for c in range(d):
                    wc = w[c0 + c]
                    idx = (a * d + b) * d + c
                    g = 0.0
                    for o in range(no):
                        s = struct[base + o * cube + idx]
                        if s == 0.0:
                            continue
                        z = 1.0 if coef_off[t] < 0 else coef[coef_off[t] + o]
                        g += z * s
                        if want_grad and coef_off[t] >= 0:
                            gc[coef_off[t] + o] += s * ua * vb * wc
                    if g == 0.0:
                        continue
                    total += g * ua * vb * wc
                    if want_grad:
                        gu[c0 + a] += g * vb * wc
                        gv[c0 + b] += g * ua * wc
                        gw[c0 + c] += g * ua * vb
    return total


@njit(cache=True)
def predict_batch(ei, ej, ek, P1, P2, P3, coef, b0, b1, b2, b3,
                  col, dim, nout, coef_off, struct_off, struct):
    """Log-odds for each event; indices past a table end act as unseen entities."""
    n = ei.size
    out = np.empty(n)
    D = P1.shape[1]
    zero = np.zeros(D)
    dummy = np.zeros(1)
    for e in range(n):
        i, j, k = ei[e], ej[e], ek[e]
        x = b0
        known_i = i < P1.shape[0]
        known_j = j < P2.shape[0]
        known_k = k < P3.shape[0]
        if known_i:
            x += b1[i]
        if known_j:
            x += b2[j]
        if known_k:
            x += b3[k]
        if known_i and known_j and known_k and D > 0:
            x += _eval_terms(P1[i], P2[j], P3[k], coef, col, dim, nout, coef_off,
                             struct_off, struct, zero, zero, zero, dummy, False)
        out[e] = x
    return out


@njit(cache=True)
def grad_one(i, j, k, P1, P2, P3, coef, col, dim, nout, coef_off, struct_off, struct):
    D = P1.shape[1]
    gu = np.zeros(D)
    gv = np.zeros(D)
    gw = np.zeros(D)
    gc = np.zeros(coef.size)
    _eval_terms(P1[i], P2[j], P3[k], coef, col, dim, nout, coef_off, struct_off,
                struct, gu, gv, gw, gc, True)
    return gu, gv, gw, gc


@njit(cache=True)
def loss_and_grad(ei, ej, ek, ey, P1, P2, P3, coef, b0, b1, b2, b3,
                  col, dim, nout, coef_off, struct_off, struct):
    """Summed log-loss over events and its full-batch gradient (no penalty)."""
    D = P1.shape[1]
    G1 = np.zeros_like(P1)
    G2 = np.zeros_like(P2)
    G3 = np.zeros_like(P3)
    Gc = np.zeros(coef.size)
    gu = np.zeros(D)
    gv = np.zeros(D)
    gw = np.zeros(D)
    gc = np.zeros(coef.size)
    total = 0.0
    for e in range(ei.size):
        i, j, k = ei[e], ej[e], ek[e]
        x = b0 + b1[i] + b2[j] + b3[k]
        if D > 0:
            x += _eval_terms(P1[i], P2[j], P3[k], coef, col, dim, nout, coef_off,
                             struct_off, struct, gu, gv, gw, gc, True)
        total += _softplus(x) - ey[e] * x
        r = _logistic(x) - ey[e]
        for d in range(D):
            G1[i, d] += r * gu[d]
            G2[j, d] += r * gv[d]
            G3[k, d] += r * gw[d]
        for c in range(coef.size):
            Gc[c] += r * gc[c]
    return total, G1, G2, G3, Gc


@njit(cache=True)
def sgd_epoch(order, ei, ej, ek, ey, P1, P2, P3, coef, coef_train,
              M1, M2, M3, Mc, stamp1, stamp2, stamp3,
              b0, b1, b2, b3, col, dim, nout, coef_off, struct_off, struct,
              t0, law, eta0, tau, momentum, decay_rate, decay_coef):
    """One pass of momentum SGD in the given event order.

    Weight decay by ``(1 - eta_t * decay_rate)`` is applied to every entity
    row on every step; rows not touched by a step get it lazily through the
    running log-product ``cum`` compared against their ``stamp``.  The caller
    must flush pending decay with :func:`flush_decay` after the pass.
    Returns the final running log-product.
    """
    D = P1.shape[1]
    gu = np.zeros(D)
    gv = np.zeros(D)
    gw = np.zeros(D)
    gc = np.zeros(coef.size)
    cum = 0.0
    for s in range(order.size):
        e = order[s]
        i, j, k = ei[e], ej[e], ek[e]
        eta = _eta(law, eta0, tau, t0 + s)
        f = 1.0 - eta * decay_rate
        if f < 1e-300:
            f = 1e-300
        # pending decay for the three rows
        if decay_rate > 0.0:
            fi = math.exp(cum - stamp1[i])
            fj = math.exp(cum - stamp2[j])
            fk = math.exp(cum - stamp3[k])
            for d in range(D):
                P1[i, d] *= fi
                P2[j, d] *= fj
                P3[k, d] *= fk
        x = b0 + b1[i] + b2[j] + b3[k]
        x += _eval_terms(P1[i], P2[j], P3[k], coef, col, dim, nout, coef_off,
                         struct_off, struct, gu, gv, gw, gc, True)
        r = _logistic(x) - ey[e]
        for d in range(D):
            M1[i, d] = momentum * M1[i, d] - eta * r * gu[d]
            M2[j, d] = momentum * M2[j, d] - eta * r * gv[d]
            M3[k, d] = momentum * M3[k, d] - eta * r * gw[d]
            P1[i, d] = (P1[i, d] + M1[i, d]) * f
            P2[j, d] = (P2[j, d] + M2[j, d]) * f
            P3[k, d] = (P3[k, d] + M3[k, d]) * f
        for c in range(coef.size):
            if coef_train[c]:
                Mc[c] = momentum * Mc[c] - eta * r * gc[c]
                coef[c] += Mc[c]
                if decay_coef:
                    coef[c] *= f
        if decay_rate > 0.0:
            cum += math.log(f)
            stamp1[i] = cum
            stamp2[j] = cum
            stamp3[k] = cum
    return cum


@njit(cache=True)
def flush_decay(P, stamp, cum):
    for r in range(P.shape[0]):
        f = math.exp(cum - stamp[r])
        for d in range(P.shape[1]):
            P[r, d] *= f
        stamp[r] = 0.0
