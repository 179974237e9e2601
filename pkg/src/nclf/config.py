"""Run configuration: one TOML document with every default materialized."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .evaluation import DEFAULT_LAMBDAS
from .models import DEFAULT_RANKS, KINDS
from .training import LAWS, TrainConfig

DATA_ROOT_ENV = "NCLF_DATA_ROOT"
FORMATS = ("generic", "movielens")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted key at fault."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class DatasetSpec:
    path: str = ""
    format: str = "generic"
    delimiter: str = ","
    columns: dict[str, str] = field(default_factory=lambda: {"i": "i", "j": "j", "k": "k", "y": "y"})
    subsample_rate: float = 1.0
    downsample_class: int = 0
    downsample_rate: float = 1.0

    def resolved_path(self) -> Path:
        """``path`` as given, or under ``$NCLF_DATA_ROOT`` when relative."""
        p = Path(self.path).expanduser()
        root = os.environ.get(DATA_ROOT_ENV)
        if not p.is_absolute() and root:
            p = Path(root) / p
        return p


@dataclass
class ModelSpec:
    kind: str = "nclf"
    ranks: dict[str, int] = field(default_factory=dict)
    init_scale: float = 0.1


@dataclass
class ProtocolSpec:
    inner_folds: int = 9
    outer_folds: int = 25
    inner_folds_used: int = 0  # 0: all inner folds
    lambdas: list[float] = field(default_factory=lambda: list(DEFAULT_LAMBDAS))
    jobs: int = 1


@dataclass
class OutputSpec:
    dir: str = "run"
    model: str = "model.nclf"
    log: str = "epochs.jsonl"
    metrics: str = "metrics.json"

    def path(self, name: str) -> Path:
        return Path(self.dir) / getattr(self, name)


@dataclass
class RunConfig:
    seed: int = 0
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def train_config(self) -> TrainConfig:
        return replace(self.train, seed=self.seed)

    @property
    def ranks(self) -> dict[str, int]:
        return {**DEFAULT_RANKS[self.model.kind], **self.model.ranks}


_SECTIONS = {
    "dataset": DatasetSpec,
    "model": ModelSpec,
    "train": TrainConfig,
    "protocol": ProtocolSpec,
    "output": OutputSpec,
}
# Fields that are not part of the file surface.
_HIDDEN = {"train": {"seed"}}


def _coerce(section: str, name: str, default: Any, value: Any) -> Any:
    key = f"{section}.{name}"
    if section == "train" and name == "tau":
        if value == "auto":
            return None
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(key, f"expected a positive number or \"auto\", got {value!r}")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(key, f"expected a table, got {value!r}")
        return dict(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(key, f"expected an array, got {value!r}")
        return list(value)
    return value


def _build_section(section: str, raw: Any):
    cls = _SECTIONS[section]
    if not isinstance(raw, dict):
        raise ConfigError(section, "expected a table")
    proto = cls()
    names = {f.name for f in fields(cls)} - _HIDDEN.get(section, set())
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{section}.{unknown[0]}", "unknown key")
    kwargs = {n: _coerce(section, n, getattr(proto, n), v) for n, v in raw.items()}
    try:
        return cls(**kwargs)
    except ValueError as e:  # TrainConfig range checks lead with the field name
        name = str(e).split()[0]
        raise ConfigError(f"{section}.{name}" if name in names else section, str(e)) from None


def from_dict(raw: dict) -> RunConfig:
    unknown = sorted(set(raw) - set(_SECTIONS) - {"seed"})
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"expected a nonnegative integer, got {seed!r}")
    parts = {s: _build_section(s, raw.get(s, {})) for s in _SECTIONS}
    model = parts["model"]
    if model.kind in KINDS:
        model.ranks = {**DEFAULT_RANKS[model.kind], **model.ranks}
    return RunConfig(seed=seed, **parts)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomli.TOMLDecodeError as e:
        raise ConfigError("config", f"not valid TOML: {e}") from None
    return from_dict(raw)


def to_dict(cfg: RunConfig) -> dict:
    out: dict[str, Any] = {"seed": cfg.seed}
    for section in _SECTIONS:
        d = asdict(getattr(cfg, section))
        for hidden in _HIDDEN.get(section, ()):
            d.pop(hidden)
        out[section] = d
    if out["train"]["tau"] is None:
        out["train"]["tau"] = "auto"
    return out


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def validate(cfg: RunConfig, need_data: bool = True) -> None:
    """Range and existence checks; raises :class:`ConfigError`."""
    d, m, p = cfg.dataset, cfg.model, cfg.protocol
    if need_data:
        if not d.path:
            raise ConfigError("dataset.path", "missing")
        if not d.resolved_path().is_file():
            raise ConfigError("dataset.path", f"file not found: {d.resolved_path()}")
    if d.format not in FORMATS:
        raise ConfigError("dataset.format", f"expected one of {FORMATS}, got {d.format!r}")
    if len(d.delimiter) != 1:
        raise ConfigError("dataset.delimiter", "must be a single character")
    if set(d.columns) - set("ijky"):
        raise ConfigError("dataset.columns", "keys must be among i, j, k, y")
    for name in ("subsample_rate", "downsample_rate"):
        if not 0 < getattr(d, name) <= 1:
            raise ConfigError(f"dataset.{name}", "must lie in (0, 1]")
    if d.downsample_class not in (0, 1):
        raise ConfigError("dataset.downsample_class", "must be 0 or 1")
    if m.kind not in KINDS:
        raise ConfigError("model.kind", f"expected one of {KINDS}, got {m.kind!r}")
    for name, r in m.ranks.items():
        if name not in DEFAULT_RANKS[m.kind]:
            raise ConfigError(f"model.ranks.{name}", f"model {m.kind} has no such component")
        if isinstance(r, bool) or not isinstance(r, int) or r < 1:
            raise ConfigError(f"model.ranks.{name}", "must be a positive integer")
    if m.init_scale < 0:
        raise ConfigError("model.init_scale", "must be nonnegative")
    if cfg.train.law not in LAWS:
        raise ConfigError("train.law", f"expected one of {sorted(LAWS)}")
    if p.inner_folds < 2:
        raise ConfigError("protocol.inner_folds", "must be at least 2")
    if p.outer_folds < 2:
        raise ConfigError("protocol.outer_folds", "must be at least 2")
    if not 0 <= p.inner_folds_used <= p.inner_folds:
        raise ConfigError("protocol.inner_folds_used", "must lie in [0, inner_folds]")
    if not p.lambdas or any(not isinstance(x, (int, float)) or x < 0 for x in p.lambdas):
        raise ConfigError("protocol.lambdas", "must be a nonempty array of nonnegative numbers")
    if p.jobs < 1:
        raise ConfigError("protocol.jobs", "must be at least 1")
