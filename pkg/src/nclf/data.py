"""Sparse triplet-event datasets and their loaders."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterator, NamedTuple

import numpy as np

_logger = logging.getLogger(__name__)

HOURS_PER_WEEK = 168


class DataError(ValueError):
    """Malformed input file; the message names the offending line."""


class TripletEvent(NamedTuple):
    i: int
    j: int
    k: int
    y: int


@dataclass
class Dataset:
    """Observed events as parallel index arrays plus entity dictionaries.

    ``ids[f][n]`` is the external id of entity ``n`` of factor ``f``.
    """

    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    y: np.ndarray
    dims: tuple[int, int, int]
    ids: tuple[list, list, list] = field(default_factory=lambda: ([], [], []))

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.int64)
        self.j = np.asarray(self.j, dtype=np.int64)
        self.k = np.asarray(self.k, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.dims = tuple(int(d) for d in self.dims)
        n = self.i.size
        if not (self.j.size == self.k.size == self.y.size == n):
            raise DataError("event arrays differ in length")
        for a, d, name in zip((self.i, self.j, self.k), self.dims, "ijk"):
            if n and (a.min() < 0 or a.max() >= d):
                raise DataError(f"{name} index outside [0, {d})")
        if n and not np.all((self.y == 0) | (self.y == 1)):
            raise DataError("labels must be 0 or 1")

    def __len__(self) -> int:
        return int(self.i.size)

    def events(self) -> Iterator[TripletEvent]:
        for e in zip(self.i.tolist(), self.j.tolist(), self.k.tolist(), self.y.tolist()):
            yield TripletEvent(e[0], e[1], e[2], int(e[3]))

    def subset(self, idx) -> "Dataset":
        """Events at ``idx``; dims and dictionaries are shared with the parent."""
        idx = np.asarray(idx)
        return Dataset(self.i[idx], self.j[idx], self.k[idx], self.y[idx], self.dims, self.ids)

    @property
    def n_positive(self) -> int:
        return int(self.y.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dims == other.dims
            and all(np.array_equal(a, b) for a, b in zip(self._arrays(), other._arrays()))
            and [list(x) for x in self.ids] == [list(x) for x in other.ids]
        )

    def _arrays(self):
        return (self.i, self.j, self.k, self.y)


class _Dictionary:
    """External id -> index, assigned in order of first appearance."""

    def __init__(self):
        self.index: dict = {}
        self.ids: list = []

    def __call__(self, key) -> int:
        n = self.index.get(key)
        if n is None:
            n = self.index[key] = len(self.ids)
            self.ids.append(key)
        return n


_LABELS = {"0": 0, "1": 1}


def load_generic(path, schema=None, delimiter: str = ",") -> Dataset:
    """Read a delimited text file with a header row.

    ``schema`` maps ``i``, ``j``, ``k``, ``y`` to column names; the default is
    the identity mapping.  Labels must be ``0`` or ``1``.
    """
    schema = {"i": "i", "j": "j", "k": "k", "y": "y", **(schema or {})}
    dicts = [_Dictionary() for _ in range(3)]
    cols: list[list[int]] = [[], [], [], []]
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        pos = {}
        for key in "ijky":
            if schema[key] not in header:
                raise DataError(f"{path}: line 1: missing column {schema[key]!r}")
            pos[key] = header.index(schema[key])
        width = len(header)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"{path}: line {line}: expected {width} fields, got {len(row)}")
            label = _LABELS.get(row[pos["y"]].strip())
            if label is None:
                raise DataError(f"{path}: line {line}: unknown label {row[pos['y']]!r}")
            for f, key in enumerate("ijk"):
                cols[f].append(dicts[f](row[pos[key]]))
            cols[3].append(label)
    data = Dataset(*cols, dims=tuple(len(d.ids) for d in dicts), ids=tuple(d.ids for d in dicts))
    _logger.info("loaded %d rows from %s, dims %s", len(data), path, data.dims)
    return data


def write_generic(data: Dataset, path, names=("i", "j", "k", "y"), delimiter: str = ",") -> None:
    """Write events with their external ids (indices if no dictionary)."""
    ids = [d if len(d) == n else range(n) for d, n in zip(data.ids, data.dims)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(names)
        for e in data.events():
            w.writerow([ids[0][e.i], ids[1][e.j], ids[2][e.k], e.y])


def hour_of_week(timestamp: int) -> int:
    """Bin ``weekday * 24 + hour`` in UTC with Monday = 0."""
    dt = datetime.fromtimestamp(int(timestamp), tz=timezone.utc)
    return dt.weekday() * 24 + dt.hour


def load_movielens(path) -> Dataset:
    """MovieLens 1M ``UserID::MovieID::Rating::Timestamp`` ratings.

    Ratings of 4 and 5 are positive events.  Factors are user, movie and
    hour-of-week (always 168 bins).
    """
    users, movies = _Dictionary(), _Dictionary()
    cols: list[list[int]] = [[], [], [], []]
    with open(path, encoding="latin-1") as fh:
        for line, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split("::")
            if len(parts) != 4:
                raise DataError(f"{path}: line {line}: expected 4 '::'-separated fields")
            try:
                rating = int(parts[2])
                ts = int(parts[3])
            except ValueError:
                raise DataError(f"{path}: line {line}: non-integer rating or timestamp") from None
            if not 1 <= rating <= 5:
                raise DataError(f"{path}: line {line}: rating {rating} outside 1..5")
            cols[0].append(users(parts[0]))
            cols[1].append(movies(parts[1]))
            cols[2].append(hour_of_week(ts))
            cols[3].append(1 if rating >= 4 else 0)
    data = Dataset(
        *cols,
        dims=(len(users.ids), len(movies.ids), HOURS_PER_WEEK),
        ids=(users.ids, movies.ids, list(range(HOURS_PER_WEEK))),
    )
    _logger.info(
        "movielens: %d events (%d positive, %d negative), dims %s",
        len(data), data.n_positive, data.n_negative, data.dims,
    )
    return data


def downsample(data: Dataset, cls: int, rate: float, seed: int = 0) -> Dataset:
    """Keep each event of class ``cls`` with probability ``rate``."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    rng = np.random.default_rng(seed)
    keep = rng.random(len(data)) < rate
    keep |= data.y != cls
    return data.subset(np.flatnonzero(keep))


def subsample(data: Dataset, rate: float, seed: int = 0) -> Dataset:
    """Keep each event with probability ``rate`` regardless of class."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    rng = np.random.default_rng(seed)
    return data.subset(np.flatnonzero(rng.random(len(data)) < rate))
