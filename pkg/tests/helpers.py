"""Shared oracles for the test suite."""

import numpy as np

from nclf.models import LatentModel, grad_logodds, predict_logodds

FD_STEP = 1e-5
FD_FLOOR = 1e-3


def fd_logodds_errors(model: LatentModel, i: int, j: int, k: int, h: float = FD_STEP) -> np.ndarray:
    """Relative errors of grad_logodds against central differences.

    Each coordinate's error is ``|g - fd| / max(|fd|, FD_FLOOR)``.
    """
    g = grad_logodds(model, i, j, k)
    errs = []
    for table, row, analytic in ((model.P1, i, g.row1), (model.P2, j, g.row2), (model.P3, k, g.row3)):
        for c in range(table.shape[1]):
            orig = table[row, c]
            table[row, c] = orig + h
            hi = predict_logodds(model, i, j, k)
            table[row, c] = orig - h
            lo = predict_logodds(model, i, j, k)
            table[row, c] = orig
            fd = (hi - lo) / (2 * h)
            errs.append(abs(analytic[c] - fd) / max(abs(fd), FD_FLOOR))
    for c in np.flatnonzero(model.coef_trainable):
        orig = model.coef[c]
        model.coef[c] = orig + h
        hi = predict_logodds(model, i, j, k)
        model.coef[c] = orig - h
        lo = predict_logodds(model, i, j, k)
        model.coef[c] = orig
        fd = (hi - lo) / (2 * h)
        errs.append(abs(g.coef[c] - fd) / max(abs(fd), FD_FLOOR))
    return np.array(errs)


def fd_loss_errors(model: LatentModel, data, lam: float, coords: int = 40, seed: int = 0,
                   h: float = FD_STEP) -> np.ndarray:
    """Relative errors of the full-batch loss gradient on random coordinates."""
    from nclf.training import loss, loss_gradient

    _, grad = loss_gradient(model, data, lam)
    rng = np.random.default_rng(seed)
    pairs = [(model.P1, grad.P1), (model.P2, grad.P2), (model.P3, grad.P3)]
    if model.coef_trainable.any():
        pairs.append((model.coef, grad.coef))
    errs = []
    for _ in range(coords):
        param, g = pairs[rng.integers(len(pairs))]
        flat, gflat = param.reshape(-1), g.reshape(-1)
        if param is model.coef:
            idx = int(rng.choice(np.flatnonzero(model.coef_trainable)))
        else:
            idx = int(rng.integers(flat.size))
        orig = flat[idx]
        flat[idx] = orig + h
        hi = loss(model, data, lam)
        flat[idx] = orig - h
        lo = loss(model, data, lam)
        flat[idx] = orig
        fd = (hi - lo) / (2 * h)
        errs.append(abs(gflat[idx] - fd) / max(abs(fd), FD_FLOOR))
    return np.array(errs)


def random_model(kind, dims=(6, 7, 8), seed=0, scale=0.7):
    from nclf.models import init_params

    model = init_params(kind, dims, seed=seed, scale=scale)
    rng = np.random.default_rng([seed, 99])
    model.coef[:] = rng.normal(1.0, 0.5, model.coef.shape)
    b = model.biases
    b.b0 = 0.2
    for t in (b.b1, b.b2, b.b3):
        t[:] = 0.3 * rng.standard_normal(t.shape)
    return model


def matrix_of(x):
    return np.array([[x[1], x[0]], [x[0], -x[1]]])


def coeffs_of(m):
    return np.array([m[0, 1], m[0, 0]])


def mu_oracle(u, v, w):
    """Independent of the closed form: multiply the 2x2 matrices."""
    return coeffs_of(matrix_of(u) @ matrix_of(v) @ matrix_of(w))


# Rows written out against the ordering (uvw, vwu, wuv, uwv, vuw, wvu).
ORACLE_ROWS = {
    "S": (1, 1, 1, 1, 1, 1),
    "J31-": (1, 0, -1, 1, 0, -1),
    "J31+": (1, 0, -1, -1, 0, 1),
    "J23-": (0, -1, 1, 0, -1, 1),
    "J23+": (0, -1, 1, 0, 1, -1),
}


def row_oracle(name, u, v, w):
    orbit = [mu_oracle(*args) for args in ((u, v, w), (v, w, u), (w, u, v), (u, w, v), (v, u, w), (w, v, u))]
    return sum(c * x for c, x in zip(ORACLE_ROWS[name], orbit))
