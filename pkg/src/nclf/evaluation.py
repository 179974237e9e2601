"""Metrics and the cross-validation protocol."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .data import Dataset
from .models import LatentModel, UsageError, init_params, predict_logodds, logistic
from .training import TrainConfig, estimate_biases, sgd_train

_logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (0.1, 1.0, 10.0, 100.0)


class UndefinedMetricError(ValueError):
    pass


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with ties counted one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _check_probs(probs, labels):
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.size == 0:
        raise UsageError("metric of an empty sample")
    if p.shape != y.shape:
        raise UsageError(f"probs and labels differ in shape: {p.shape} vs {y.shape}")
    if np.any((p < 0) | (p > 1)):
        raise UsageError("probabilities must lie in [0, 1]")
    return p, y


def l1_error(probs, labels) -> float:
    p, y = _check_probs(probs, labels)
    return float(np.mean(np.abs(p - y)))


def l2_error(probs, labels) -> float:
    """Root mean squared error of the probabilities."""
    p, y = _check_probs(probs, labels)
    return float(np.sqrt(np.mean((p - y) ** 2)))


def std_error(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise UsageError("standard error needs at least two values")
    return float(np.std(v, ddof=1) / math.sqrt(v.size))


@dataclass
class FoldMetrics:
    auc: float
    l1: float
    l2: float


def score(model: LatentModel, data: Dataset) -> FoldMetrics:
    x = predict_logodds(model, data.i, data.j, data.k)
    p = logistic(x)
    return FoldMetrics(auc(x, data.y), l1_error(p, data.y), l2_error(p, data.y))


@dataclass
class MetricSummary:
    auc: float
    l1: float
    l2: float
    d_auc: float
    d_l1: float
    d_l2: float
    folds: list[FoldMetrics] = field(default_factory=list, repr=False)

    @classmethod
    def from_folds(cls, folds: Sequence[FoldMetrics]) -> "MetricSummary":
        cols = {m: np.array([getattr(f, m) for f in folds]) for m in ("auc", "l1", "l2")}
        se = {m: std_error(v) if v.size > 1 else 0.0 for m, v in cols.items()}
        return cls(
            float(cols["auc"].mean()), float(cols["l1"].mean()), float(cols["l2"].mean()),
            se["auc"], se["l1"], se["l2"], list(folds),
        )

    def row(self, method: str) -> dict:
        """Table layout: means plus standard errors times 1e4."""
        return {
            "method": method,
            "AUC": round(self.auc, 4), "dAUC": round(self.d_auc * 1e4, 1),
            "L1": round(self.l1, 4), "dL1": round(self.d_l1 * 1e4, 1),
            "L2": round(self.l2, 4), "dL2": round(self.d_l2 * 1e4, 1),
        }

    def to_dict(self) -> dict:
        return asdict(self)


def difference_summary(a: MetricSummary, b: MetricSummary) -> MetricSummary:
    """Fold-paired ``a - b``; both must come from the same fold plan."""
    if len(a.folds) != len(b.folds):
        raise UsageError("paired difference needs the same number of folds")
    diffs = [
        FoldMetrics(x.auc - y.auc, y.l1 - x.l1, y.l2 - x.l2) for x, y in zip(a.folds, b.folds)
    ]
    return MetricSummary.from_folds(diffs)


@dataclass
class FoldPlan:
    n_folds: int
    assignment: np.ndarray
    seed: int

    @classmethod
    def make(cls, n_events: int, n_folds: int, seed: int = 0) -> "FoldPlan":
        if n_folds < 2:
            raise UsageError(f"need at least two folds, got {n_folds}")
        if n_folds > n_events:
            raise UsageError(f"{n_folds} folds for only {n_events} events")
        perm = np.random.default_rng(seed).permutation(n_events)
        assignment = np.empty(n_events, dtype=np.int64)
        assignment[perm] = np.arange(n_events) % n_folds
        return cls(n_folds, assignment, seed)

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.assignment == fold
        return np.flatnonzero(~test), np.flatnonzero(test)


@dataclass(frozen=True)
class GridPoint:
    lam: float
    ranks: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, lam: float, ranks=None) -> "GridPoint":
        if isinstance(ranks, int):
            ranks = {"cp": ranks}
        return cls(float(lam), tuple(sorted((ranks or {}).items())))

    def ranks_dict(self) -> dict[str, int] | None:
        return dict(self.ranks) or None


def train_and_score(kind: str, data: Dataset, train_idx, test_idx, point: GridPoint,
                    config: TrainConfig, init_scale: float = 0.1) -> FoldMetrics:
    """Fit on ``train_idx`` (biases re-estimated there) and score ``test_idx``."""
    train, test = data.subset(train_idx), data.subset(test_idx)
    model = init_params(kind, data.dims, point.ranks_dict(), seed=config.seed, scale=init_scale)
    model.biases = estimate_biases(train)
    if kind != "bias":
        cfg = TrainConfig(**{**asdict(config), "lam": point.lam})
        sgd_train(model, train, cfg)
    return score(model, test)


def _run_task(args):
    return train_and_score(*args)


def _map(tasks: list, jobs: int) -> list:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


def kfold_evaluate(kind: str, data: Dataset, point: GridPoint, config: TrainConfig,
                   plan: FoldPlan, init_scale: float = 0.1, folds: Iterable[int] | None = None,
                   jobs: int = 1) -> MetricSummary:
    fold_ids = list(range(plan.n_folds)) if folds is None else list(folds)
    tasks = [(kind, data, *plan.split(f), point, config, init_scale) for f in fold_ids]
    return MetricSummary.from_folds(_map(tasks, jobs))


@dataclass
class CVResult:
    summary: MetricSummary
    chosen: GridPoint
    selection: dict[GridPoint, float]  # mean inner-fold AUC per grid point


def cross_validate(kind: str, data: Dataset, grid: Iterable, config: TrainConfig,
                   inner_folds: int = 9, outer_folds: int = 25, seed: int = 0,
                   inner_folds_used: int | None = None, init_scale: float = 0.1,
                   jobs: int = 1) -> CVResult:
    """Pick a grid point by inner k-fold AUC, then measure it by outer k-fold.

    ``grid`` holds :class:`GridPoint` values or ``(lam, ranks)`` pairs.
    Duplicates are dropped keeping the first; ties go to the earliest point.
    A single-point grid skips selection.  ``inner_folds_used`` limits how
    many of the inner folds are trained (all by default).
    """
    points: list[GridPoint] = []
    for g in grid:
        p = g if isinstance(g, GridPoint) else GridPoint.of(*g)
        if p not in points:
            points.append(p)
    if not points:
        raise UsageError("empty hyperparameter grid")
    outer = FoldPlan.make(len(data), outer_folds, seed)
    selection: dict[GridPoint, float] = {}
    if len(points) == 1 or kind == "bias":
        chosen = points[0]
    else:
        inner = FoldPlan.make(len(data), inner_folds, seed + 1)
        used = range(inner_folds if inner_folds_used is None else min(inner_folds_used, inner_folds))
        best = -math.inf
        chosen = points[0]
        for p in points:
            m = kfold_evaluate(kind, data, p, config, inner, init_scale, used, jobs).auc
            selection[p] = m
            _logger.info("%s grid point %s: inner AUC %.4f", kind, p, m)
            if m > best:
                best, chosen = m, p
    summary = kfold_evaluate(kind, data, chosen, config, outer, init_scale, jobs=jobs)
    return CVResult(summary, chosen, selection)
