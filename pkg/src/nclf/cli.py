"""Command-line entry point: ``nclf {train,evaluate,cv,reproduce,decompose}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .algebra import COMPONENTS, DimensionError, decompose
from .config import ConfigError, RunConfig
from .data import DataError, Dataset, downsample, load_generic, load_movielens, subsample
from .evaluation import (
    GridPoint,
    MetricSummary,
    cross_validate,
    difference_summary,
    score,
)
from .model_io import FormatError, load_model, save_model
from .training import TrainingDiverged, fit

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIMENSION = 3

# (label, kind, ranks) for the five-row comparison table
BENCHMARKS = (
    ("Bias only", "bias", {}),
    ("CP, R=13", "cp", {"cp": 13}),
    ("best CP, R=5", "cp", {"cp": 5}),
    ("primitive NCLF", "primitive-nclf", {"mu": 5, "A": 1}),
    ("NCLF", "nclf", {}),
)
SMOKE_RATE = 0.01

_logger = logging.getLogger("nclf")


class DimensionMismatch(Exception):
    pass


def load_dataset(cfg: RunConfig) -> Dataset:
    d = cfg.dataset
    path = d.resolved_path()
    if d.format == "movielens":
        data = load_movielens(path)
    else:
        data = load_generic(path, schema=d.columns, delimiter=d.delimiter)
    if d.downsample_rate < 1:
        data = downsample(data, d.downsample_class, d.downsample_rate, seed=cfg.seed)
    if d.subsample_rate < 1:
        data = subsample(data, d.subsample_rate, seed=cfg.seed)
    return data


def _prepare(args, need_data: bool = True) -> RunConfig:
    cfg = cfgmod.load_config(args.config)
    if getattr(args, "jobs", None):
        cfg.protocol.jobs = args.jobs
    if getattr(args, "output", None):
        cfg.output.dir = args.output
    cfgmod.validate(cfg, need_data=need_data)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    text = cfgmod.dumps(cfg)
    (out / "effective.toml").write_text(text)
    if not args.quiet:
        sys.stderr.write("# effective config\n" + text)
    return cfg


def _emit(record: dict, stream=sys.stdout) -> None:
    stream.write(json.dumps(record) + "\n")
    stream.flush()


def format_table(rows: list[dict]) -> str:
    head = ["method", "AUC", "dAUC", "L1", "dL1", "L2", "dL2"]
    width = max(len("Method"), *(len(r["method"]) for r in rows))
    lines = ["  ".join([f"{'Method':<{width}}", "   AUC", " dAUC", "    L1", "  dL1", "    L2", "  dL2"])]
    for r in rows:
        lines.append("  ".join(
            [f"{r['method']:<{width}}"]
            + [f"{r[h]:6.4f}" if h in ("AUC", "L1", "L2") else f"{r[h]:5.0f}" for h in head[1:]]
        ))
    return "\n".join(lines)


def cmd_train(args) -> int:
    cfg = _prepare(args)
    data = load_dataset(cfg)
    log_path = cfg.output.path("log")
    with open(log_path, "w") as log:
        def record(rec):
            line = asdict(rec)
            _emit(line, log)
            if not args.quiet:
                _emit(line)

        report = fit(cfg.model.kind, data, cfg.train_config, ranks=cfg.ranks,
                     init_scale=cfg.model.init_scale, log=record)
    save_model(report.model, cfg.output.path("model"))
    _logger.info("trained %s on %d events in %.1fs", cfg.model.kind, len(data), report.wall_time)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _prepare(args)
    data = load_dataset(cfg)
    model = load_model(args.model)
    if model.dims != data.dims:
        raise DimensionMismatch(f"model dims {model.dims} do not match dataset dims {data.dims}")
    summary = MetricSummary.from_folds([score(model, data)])
    row = summary.row(model.kind)
    print(format_table([row]))
    cfg.output.path("metrics").write_text(json.dumps(row, indent=2) + "\n")
    return EXIT_OK


def _grid(cfg: RunConfig, ranks: dict) -> list[GridPoint]:
    return [GridPoint.of(lam, ranks) for lam in cfg.protocol.lambdas]


def _cv(cfg: RunConfig, data: Dataset, kind: str, ranks: dict, outer: int | None = None):
    p = cfg.protocol
    return cross_validate(
        kind, data, _grid(cfg, ranks) if kind != "bias" else [GridPoint.of(0.0)],
        cfg.train_config, inner_folds=p.inner_folds, outer_folds=outer or p.outer_folds,
        seed=cfg.seed, inner_folds_used=p.inner_folds_used or None,
        init_scale=cfg.model.init_scale, jobs=p.jobs,
    )


def cmd_cv(args) -> int:
    cfg = _prepare(args)
    data = load_dataset(cfg)
    res = _cv(cfg, data, cfg.model.kind, cfg.model.ranks)
    row = res.summary.row(cfg.model.kind)
    print(format_table([row]))
    record = {
        "row": row,
        "chosen": {"lambda": res.chosen.lam, "ranks": res.chosen.ranks_dict() or {}},
        "selection": [{"lambda": g.lam, "inner_auc": a} for g, a in res.selection.items()],
    }
    cfg.output.path("metrics").write_text(json.dumps(record, indent=2) + "\n")
    return EXIT_OK


def reproduce_table(cfg: RunConfig, data: Dataset, outer_folds: int, log=None) -> dict:
    """Run the five benchmarks on one shared outer fold plan."""
    results = {}
    for label, kind, ranks in BENCHMARKS:
        res = _cv(cfg, data, kind, ranks, outer=outer_folds)
        results[label] = res
        if log is not None:
            log({"method": label, "chosen_lambda": res.chosen.lam, **res.summary.row(label)})
    rows = [results[label].summary.row(label) for label, _, _ in BENCHMARKS]
    delta = difference_summary(results["NCLF"].summary, results["best CP, R=5"].summary)
    rows.append(delta.row("NCLF-best CP"))
    return {"rows": rows, "results": results}


def cmd_reproduce(args) -> int:
    cfg = _prepare(args)
    if cfg.dataset.format != "movielens":
        raise ConfigError("dataset.format", "reproduce needs the movielens format")
    if args.smoke:
        cfg.dataset.subsample_rate = min(cfg.dataset.subsample_rate, SMOKE_RATE)
    outer = 25 if args.full_protocol else args.folds
    data = load_dataset(cfg)
    _logger.info("reproduce: %d events, %d outer folds", len(data), outer)
    table = reproduce_table(cfg, data, outer, log=None if args.quiet else _emit)
    print(format_table(table["rows"]))
    cfg.output.path("metrics").write_text(json.dumps(table["rows"], indent=2) + "\n")
    return EXIT_OK


def read_tensor(path) -> np.ndarray:
    """Whitespace text of n*n rows by n columns: slice ``T[0]`` first."""
    flat = np.loadtxt(path, ndmin=2)
    n = flat.shape[1]
    if flat.shape[0] != n * n:
        raise DimensionError(f"expected {n * n} rows of {n} values, got {flat.shape[0]} rows")
    return flat.reshape(n, n, n)


def cmd_decompose(args) -> int:
    t = read_tensor(args.tensor)
    parts = decompose(t)
    for name, part in zip(COMPONENTS, parts):
        print(f"# {name}")
        np.savetxt(sys.stdout, part.reshape(-1, part.shape[0]), fmt="%.12g")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nclf", description="Latent factor models for triplet events.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("config", help="TOML run configuration")
        p.add_argument("-o", "--output", help="override output.dir")
        p.add_argument("-q", "--quiet", action="store_true", help="do not echo config or records")
        p.set_defaults(func=fn)
        return p

    with_config("train", cmd_train, "fit one model and write it with its epoch log")
    ev = with_config("evaluate", cmd_evaluate, "score a saved model on the configured dataset")
    ev.add_argument("model", help="model file written by train")
    cv = with_config("cv", cmd_cv, "select lambda by inner k-fold, measure by outer k-fold")
    cv.add_argument("--jobs", type=int, help="worker processes")
    rep = with_config("reproduce", cmd_reproduce, "five-benchmark comparison table")
    rep.add_argument("--full-protocol", action="store_true", help="25 outer folds instead of --folds")
    rep.add_argument("--folds", type=int, default=5, help="outer folds (default 5)")
    rep.add_argument("--smoke", action="store_true", help="run on a 1%% subsample")
    rep.add_argument("--jobs", type=int, help="worker processes")
    dec = sub.add_parser("decompose", help="split a dense cubical tensor into six parts")
    dec.add_argument("tensor", help="text file of n*n rows by n columns")
    dec.set_defaults(func=cmd_decompose)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DimensionMismatch, DimensionError) as e:
        print(f"dimension error: {e}", file=sys.stderr)
        return EXIT_DIMENSION
    except TrainingDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, DataError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
