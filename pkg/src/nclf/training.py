"""Bias estimation, regularized logistic loss and momentum SGD."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Dataset
from .models import BiasTables, LatentModel, UsageError, init_params, predict_logodds

_logger = logging.getLogger(__name__)

LAWS = {"inverse": _kernels.LAW_INVERSE, "constant": _kernels.LAW_CONSTANT}


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, eta: float, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (step size {eta:.3g}, loss {loss})")
        self.epoch = epoch
        self.eta = eta
        self.loss = loss


@dataclass(frozen=True)
class Schedule:
    """Step-size law.  ``inverse``: ``eta0 / (1 + t / tau)``; ``constant``: ``eta0``."""

    eta0: float = 0.03
    law: str = "inverse"
    tau: float | None = None  # None: number of training events

    def __post_init__(self):
        if self.eta0 <= 0:
            raise UsageError(f"eta0 must be positive, got {self.eta0}")
        if self.law not in LAWS:
            raise UsageError(f"law {self.law!r} is unknown; expected one of {sorted(LAWS)}")
        if self.tau is not None and self.tau <= 0:
            raise UsageError(f"tau must be positive, got {self.tau}")


def step_size(schedule: Schedule, t: int, n_events: int | None = None) -> float:
    if t < 0:
        raise UsageError(f"step counter must be nonnegative, got {t}")
    tau = schedule.tau if schedule.tau is not None else float(n_events or 1)
    return float(_kernels._eta(LAWS[schedule.law], schedule.eta0, tau, float(t)))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    eta0: float = 0.03
    law: str = "inverse"
    tau: float | None = None
    momentum: float = 0.9
    lam: float = 10.0
    seed: int = 0
    shuffle: bool = True
    regularize_coefficients: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise UsageError(f"epochs must be nonnegative, got {self.epochs}")
        if not 0 <= self.momentum < 1:
            raise UsageError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.lam < 0:
            raise UsageError(f"lam must be nonnegative, got {self.lam}")
        self.schedule  # validates eta0/law/tau

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.eta0, self.law, self.tau)


@dataclass
class EpochRecord:
    epoch: int
    eta: float
    train_loss: float
    holdout_loss: float | None = None


@dataclass
class TrainReport:
    epochs: list[EpochRecord]
    model: LatentModel
    wall_time: float = field(default=0.0, compare=False)


def estimate_biases(data: Dataset) -> BiasTables:
    """Empirical log-odds with add-one smoothing; unseen entities get ``-b0``."""
    if len(data) == 0:
        raise UsageError("cannot estimate biases from an empty dataset")
    P = data.n_positive
    N = len(data) - P
    b0 = math.log((P + 1) / (N + 1))
    tables = []
    for idx, n in zip((data.i, data.j, data.k), data.dims):
        pos = np.bincount(idx, weights=data.y, minlength=n)
        tot = np.bincount(idx, minlength=n).astype(float)
        tables.append(np.log((pos + 1) / (tot - pos + 1)) - b0)
    return BiasTables(b0, *tables)


def event_logloss(x, y) -> np.ndarray:
    """Per-event ``-y log p - (1-y) log(1-p)`` for log-odds ``x``."""
    return np.logaddexp(0.0, x) - y * x


def loss(model: LatentModel, data: Dataset, lam: float, regularize_coefficients: bool = True) -> float:
    """Summed log-loss over events plus ``lam`` times the squared parameter norm."""
    total = 0.0
    if len(data):
        x = predict_logodds(model, data.i, data.j, data.k)
        total = float(np.sum(event_logloss(x, data.y)))
    if lam:
        total += lam * model.penalty(include_coef=regularize_coefficients)
    return total


def mean_logloss(model: LatentModel, data: Dataset) -> float:
    x = predict_logodds(model, data.i, data.j, data.k)
    with np.errstate(invalid="ignore", over="ignore"):  # diverged runs report NaN
        return float(np.mean(event_logloss(x, data.y)))


@dataclass
class LossGradient:
    P1: np.ndarray
    P2: np.ndarray
    P3: np.ndarray
    coef: np.ndarray


def loss_gradient(model: LatentModel, data: Dataset, lam: float,
                  regularize_coefficients: bool = True) -> tuple[float, LossGradient]:
    """Full-batch value and gradient of :func:`loss` (debug path)."""
    b = model.biases
    val, G1, G2, G3, Gc = _kernels.loss_and_grad(
        data.i, data.j, data.k, data.y, model.P1, model.P2, model.P3, model.coef,
        float(b.b0), b.b1, b.b2, b.b3, *model._terms,
    )
    Gc[~model.coef_trainable] = 0.0
    if lam:
        val += lam * model.penalty(include_coef=regularize_coefficients)
        G1 += 2 * lam * model.P1
        G2 += 2 * lam * model.P2
        G3 += 2 * lam * model.P3
        if regularize_coefficients:
            Gc += 2 * lam * np.where(model.coef_trainable, model.coef, 0.0)
    return val, LossGradient(G1, G2, G3, Gc)


def sgd_train(model: LatentModel, data: Dataset, config: TrainConfig,
              holdout: Dataset | None = None, log=None) -> TrainReport:
    """Train ``model`` in place with per-event momentum SGD.

    Biases are not touched.  Each step ``t`` updates the velocity of the
    three touched entity rows and of the coefficients with the data gradient
    at step size ``eta_t``, moves the parameters by their velocity, and then
    scales all latent rows (lazily for untouched ones) by
    ``1 - 2 * lam * eta_t / n`` so one epoch applies the full-batch penalty
    once.  ``log`` receives each :class:`EpochRecord` as it is produced.
    """
    start = time.perf_counter()
    n = len(data)
    if n == 0:
        raise UsageError("cannot train on an empty dataset")
    sched = config.schedule
    law = LAWS[sched.law]
    tau = float(sched.tau if sched.tau is not None else n)
    M = [np.zeros_like(P) for P in model.tables]
    Mc = np.zeros_like(model.coef)
    stamps = [np.zeros(P.shape[0]) for P in model.tables]
    decay_rate = 2.0 * config.lam / n
    b = model.biases
    records = []
    t = 0
    trains = model.entity_dim > 0
    for epoch in range(config.epochs):
        if config.shuffle:
            order = np.random.default_rng([config.seed, epoch]).permutation(n)
        else:
            order = np.arange(n)
        eta = step_size(sched, t, n)
        if trains:
            cum = _kernels.sgd_epoch(
                order, data.i, data.j, data.k, data.y, model.P1, model.P2, model.P3,
                model.coef, model.coef_trainable, M[0], M[1], M[2], Mc, *stamps,
                float(b.b0), b.b1, b.b2, b.b3, *model._terms,
                t, law, sched.eta0, tau, config.momentum, decay_rate,
                config.regularize_coefficients,
            )
            for P, s in zip(model.tables, stamps):
                _kernels.flush_decay(P, s, cum)
        t += n
        rec = EpochRecord(epoch, eta, mean_logloss(model, data))
        if holdout is not None and len(holdout):
            rec.holdout_loss = mean_logloss(model, holdout)
        if not math.isfinite(rec.train_loss) or not all(
            np.all(np.isfinite(P)) for P in (*model.tables, model.coef)
        ):
            raise TrainingDiverged(epoch, eta, rec.train_loss)
        records.append(rec)
        _logger.debug("epoch %d eta %.4g train %.5f holdout %s", epoch, eta, rec.train_loss, rec.holdout_loss)
        if log is not None:
            log(rec)
    return TrainReport(records, model, time.perf_counter() - start)


def fit(kind: str, data: Dataset, config: TrainConfig, ranks=None, init_scale: float = 0.1,
        holdout: Dataset | None = None, dims=None, log=None) -> TrainReport:
    """Initialize a model, set its biases from ``data`` and train it."""
    model = init_params(kind, dims or data.dims, ranks, seed=config.seed, scale=init_scale)
    model.biases = estimate_biases(data)
    return sgd_train(model, data, config, holdout=holdout, log=log)
