"""Labelled events drawn from a known model, for recovery experiments."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .models import LatentModel, init_params, predict_logodds, predict_probability
from .training import TrainConfig, event_logloss, fit


def generator_model(kind: str, dims, ranks=None, seed: int = 0, scale: float = 1.0,
                    bias_scale: float = 0.3) -> LatentModel:
    """Random model with unit-scale latent factors and small random biases."""
    model = init_params(kind, dims, ranks, seed=seed, scale=scale)
    rng = np.random.default_rng([seed, 1])
    I, J, K = model.dims
    model.biases.b1[:] = bias_scale * rng.standard_normal(I)
    model.biases.b2[:] = bias_scale * rng.standard_normal(J)
    model.biases.b3[:] = bias_scale * rng.standard_normal(K)
    return model


def sample_events(model: LatentModel, n_events: int, observed_fraction: float = 0.3,
                  seed: int = 0, noiseless: bool = False,
                  cell_seed: int | None = None) -> tuple[Dataset, np.ndarray]:
    """Draw events uniformly over a random subset of cells.

    The subset is fixed by ``cell_seed`` (default ``seed``) so that separate
    draws can share observed cells.  Returns the dataset and the generator's
    true probability per event.  With ``noiseless`` the label is the
    generator's most likely outcome.
    """
    I, J, K = model.dims
    n_cells = I * J * K
    n_obs = max(1, int(round(observed_fraction * n_cells)))
    cells = np.random.default_rng(seed if cell_seed is None else cell_seed).choice(
        n_cells, size=n_obs, replace=False
    )
    rng = np.random.default_rng([seed, 2])
    picks = cells[rng.integers(0, n_obs, size=n_events)]
    i, rest = np.divmod(picks, J * K)
    j, k = np.divmod(rest, K)
    p = predict_probability(model, i, j, k)
    draws = rng.random(n_events)
    y = (p > 0.5 if noiseless else draws < p).astype(float)
    return Dataset(i, j, k, y, model.dims), p


@dataclass
class RecoveryResult:
    bayes_logloss: float
    model_logloss: float
    bayes_auc: float
    model_auc: float
    seconds: float

    @property
    def logloss_gap(self) -> float:
        return self.model_logloss - self.bayes_logloss

    @property
    def auc_gap(self) -> float:
        return self.bayes_auc - self.model_auc


def recovery_experiment(kind: str = "nclf", dims=(30, 30, 30), n_events: int = 50_000,
                        observed_fraction: float = 0.3, seed: int = 7,
                        config: TrainConfig | None = None, generator_scale: float = 0.5,
                        n_holdout: int = 20_000) -> RecoveryResult:
    """Fit ``kind`` to events from a unit-rank generator of the same kind.

    Held-out events are fresh draws over the same observed cells.  The
    generator's own predictions give the Bayes log-loss and AUC.
    """
    from .evaluation import auc

    gen = generator_model(kind, dims, seed=seed, scale=generator_scale)
    train, _ = sample_events(gen, n_events, observed_fraction, seed=seed + 1)
    test, _ = sample_events(gen, n_holdout, observed_fraction, seed=seed + 2, cell_seed=seed + 1)
    start = time.perf_counter()
    report = fit(kind, train, config or TrainConfig())
    seconds = time.perf_counter() - start
    x_gen = predict_logodds(gen, test.i, test.j, test.k)
    x_fit = predict_logodds(report.model, test.i, test.j, test.k)
    return RecoveryResult(
        float(np.mean(event_logloss(x_gen, test.y))), float(np.mean(event_logloss(x_fit, test.y))),
        auc(x_gen, test.y), auc(x_fit, test.y), seconds,
    )
