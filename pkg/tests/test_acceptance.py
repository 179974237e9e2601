"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
under output capture) or directly with ``python tests/test_acceptance.py``.
"""

import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import fd_logodds_errors, fd_loss_errors, mu_oracle, random_model, row_oracle
from nclf.algebra import (
    antisym_combination,
    component_J,
    component_S,
    cyclic_sum,
    decompose,
    mu,
    project_orthogonal,
    recompose,
)
from nclf.config import DATA_ROOT_ENV, RunConfig
from nclf.data import load_generic, load_movielens, write_generic
from nclf.models import KINDS, init_params
from nclf.synthetic import generator_model, recovery_experiment, sample_events

RECOVERY_SEED = 7
MOVIELENS_RATINGS = Path("ml-1m") / "ratings.dat"


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail=""):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        with capsys.disabled():
            print(f"\nACCEPTANCE {status} | {name} | {detail}")
        return ok

    return emit


def rel_err(got, want, scale):
    return float(np.max(np.linalg.norm(np.asarray(got) - np.asarray(want), axis=-1) / scale))


def test_mu_matches_matrix_product(report):
    rng = np.random.default_rng(0)
    u, v, w = rng.normal(size=(3, 10_000, 2))
    start = time.perf_counter()
    got = mu(u, v, w)
    elapsed = time.perf_counter() - start
    want = np.array([mu_oracle(a, b, c) for a, b, c in zip(u, v, w)])
    err = rel_err(got, want, np.linalg.norm(want, axis=-1))
    ok = err <= 1e-12 and elapsed < 1.0
    assert report("mu closed form == 2x2 matrix product (1e4 triplets)", ok,
                  f"max rel err {err:.2e} (<= 1e-12), closed form {elapsed * 1e3:.1f} ms (< 1 s)")


@pytest.mark.parametrize("name", ["S", "J31-", "J31+", "J23-", "J23+"])
def test_component_closed_forms_match_row_oracle(report, name):
    rng = np.random.default_rng(1)
    u, v, w = rng.normal(size=(3, 1000, 2))
    got = component_S(u, v, w) if name == "S" else component_J(name[1:], u, v, w)
    want = np.array([row_oracle(name, a, b, c) for a, b, c in zip(u, v, w)])
    # scale: |mu(u, v, w)| = |u||v||w| for elements of the plane
    scale = np.prod(np.linalg.norm(np.stack([u, v, w]), axis=-1), axis=0)
    err = rel_err(got, want, scale)
    assert report(f"{name} closed form == orbit-row oracle (1e3 triplets)", err <= 1e-12,
                  f"max err / (|u||v||w|) {err:.2e} (<= 1e-12)")


def test_antisymmetric_combination_vanishes(report):
    rng = np.random.default_rng(2)
    u, v, w = rng.normal(size=(3, 1000, 2))
    worst = float(np.max(np.linalg.norm(antisym_combination(u, v, w), axis=-1)))
    assert report("antisymmetric combination of mu vanishes (1e3 triplets)", worst <= 1e-12,
                  f"max norm {worst:.2e} (<= 1e-12)")


def test_decomposition_suite(report):
    swap23 = lambda x: x.transpose(0, 2, 1)
    swap31 = lambda x: x.transpose(2, 1, 0)
    swap12 = lambda x: x.transpose(1, 0, 2)
    cyc = lambda x: np.einsum("jki->ijk", x)
    eig, rt, orth, total, resum = 0.0, 0.0, 0.0, 0.0, 0.0
    for n in (3, 4, 5):
        t = np.random.default_rng(n).normal(size=(n, n, n))
        c = decompose(t)
        checks = [op(c.s) - c.s for op in (swap12, swap23, swap31, cyc)]
        checks += [cyc(c.a) - c.a] + [op(c.a) + c.a for op in (swap12, swap23, swap31)]
        checks += [swap31(c.j31m) + c.j31m, swap31(c.j31p) - c.j31p,
                   swap23(c.j23m) + c.j23m, swap23(c.j23p) - c.j23p]
        checks += [cyclic_sum(j) for j in (c.j31m, c.j31p, c.j23m, c.j23p)]
        eig = max(eig, max(float(np.abs(x).max()) for x in checks))
        rt = max(rt, float(np.abs(recompose(c) - t).max()))
        parts = project_orthogonal(t)
        norm2 = float(np.sum(t * t))
        for a in range(3):
            for b in range(a + 1, 3):
                orth = max(orth, abs(float(np.sum(parts[a] * parts[b]))) / norm2)
        # the third part is the remainder, so this identity is bitwise
        total = max(total, float(np.abs(t - parts[0] - parts[1] - parts[2]).max()))
        resum = max(resum, float(np.abs(sum(parts) - t).max()))
    ok = eig <= 1e-12 and rt <= 1e-12 and orth <= 1e-10 and total == 0.0
    assert report("decomposition suite (n = 3, 4, 5)", ok,
                  f"eigen {eig:.1e}, round trip {rt:.1e} (<= 1e-12); "
                  f"orthogonality {orth:.1e} (<= 1e-10 |T|^2); T - S - A - J {total:.1e} (== 0), "
                  f"float re-summation {resum:.1e}")


def test_gradient_correctness(report):
    dims = (9, 10, 11)
    rng = np.random.default_rng(3)
    worst = {}
    for kind in KINDS:
        m = random_model(kind, dims, seed=4)
        errs = [fd_logodds_errors(m, *(int(rng.integers(n)) for n in dims)) for _ in range(100)]
        worst[kind] = max(float(e.max(initial=0.0)) for e in errs)
    m = random_model("nclf", dims, seed=5, scale=0.5)
    idx = [rng.integers(0, n, 300) for n in dims]
    from nclf.data import Dataset

    data = Dataset(*idx, rng.integers(0, 2, 300).astype(float), dims)
    batch = float(fd_loss_errors(m, data, lam=0.7, coords=80).max())
    ok = max(worst.values()) <= 1e-6 and batch <= 1e-5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert report("gradients vs central differences (h = 1e-5)", ok,
                  f"per-triplet {detail} (<= 1e-6); full batch at lambda 0.7 {batch:.1e} (<= 1e-5); "
                  "rel err = |g - fd| / max(|fd|, 1e-3)")


def test_synthetic_recovery(report):
    r = recovery_experiment("nclf", (30, 30, 30), 50_000, 0.3, seed=RECOVERY_SEED)
    ll_ok = r.logloss_gap <= 0.05
    auc_ok = r.auc_gap <= 0.02
    time_ok = r.seconds < 300
    assert report(
        "synthetic recovery (NCLF, 30^3, unit ranks, 30% observed, 50k events, defaults)",
        ll_ok and auc_ok and time_ok,
        f"log-loss gap {r.logloss_gap:.4f} (<= 0.05: {'ok' if ll_ok else 'no'}); "
        f"AUC gap {r.auc_gap:.4f} (<= 0.02: {'ok' if auc_ok else 'no'}); "
        f"train {r.seconds:.1f} s (< 300 s)",
    )


def _movielens_path():
    root = os.environ.get(DATA_ROOT_ENV)
    if not root or not (Path(root) / MOVIELENS_RATINGS).is_file():
        return None
    return Path(root) / MOVIELENS_RATINGS


def test_movielens_reproduction(report):
    path = _movielens_path()
    if path is None:
        report("MovieLens 1M reproduction (5-fold)", None,
               f"${DATA_ROOT_ENV}/{MOVIELENS_RATINGS} not present; not verified")
        pytest.skip(f"MovieLens 1M ratings not found under ${DATA_ROOT_ENV}")
    from nclf.cli import reproduce_table

    data = load_movielens(path)
    cfg = RunConfig()
    cfg.protocol.inner_folds_used = 3
    cfg.protocol.jobs = os.cpu_count() or 1
    table = reproduce_table(cfg, data, outer_folds=5)
    auc = {label: res.summary.auc for label, res in table["results"].items()}
    checks = {
        "counts": data.n_positive == 575281 and data.n_negative == 424928,
        "bias": abs(auc["Bias only"] - 0.6494) <= 0.010,
        "nclf>cp13": auc["NCLF"] > auc["CP, R=13"],
        "nclf>cp5": auc["NCLF"] > auc["best CP, R=5"],
        "nclf": abs(auc["NCLF"] - 0.7920) <= 0.02,
    }
    detail = "; ".join(f"{k} {'ok' if v else 'no'}" for k, v in checks.items())
    detail += "; AUC " + ", ".join(f"{k} {v:.4f}" for k, v in auc.items())
    assert report("MovieLens 1M reproduction (5-fold)", all(checks.values()), detail)


def test_fannie_mae_not_reproduced(report, tmp_path):
    # The Fannie Mae table is out of scope; its preprocessed data would enter
    # through the generic loader, which is exercised here end to end.
    gen = generator_model("nclf", (12, 12, 12), seed=9, scale=0.6)
    data, _ = sample_events(gen, 4000, 0.5, seed=10)
    path = tmp_path / "events.csv"
    write_generic(data, path)
    loaded = load_generic(path)
    from nclf.training import TrainConfig, fit

    rep = fit("nclf", loaded, TrainConfig(epochs=3))
    ok = len(loaded) == len(data) and rep.epochs[-1].train_loss < rep.epochs[0].train_loss + 1
    assert report("Fannie Mae table not reproduced (out of scope)", ok,
                  "generic-format ingestion + training path exercised instead")


def test_nclf_entity_dimension(report):
    d = init_params("nclf", (4, 4, 4)).entity_dim
    assert report("NCLF per-entity parameter count at unit ranks", d == 13, f"{d} (== 13)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
