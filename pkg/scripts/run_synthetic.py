"""Recovery of a known model from sampled events, over several generator seeds.

    python scripts/run_synthetic.py --seeds 7 21 33 --kind nclf
"""

import argparse
import json

from nclf.synthetic import recovery_experiment
from nclf.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", default="nclf")
    ap.add_argument("--size", type=int, default=30)
    ap.add_argument("--events", type=int, default=50_000)
    ap.add_argument("--observed", type=float, default=0.3)
    ap.add_argument("--seeds", type=int, nargs="+", default=[7])
    ap.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    ap.add_argument("--eta0", type=float, default=TrainConfig.eta0)
    ap.add_argument("--lam", type=float, default=TrainConfig.lam)
    args = ap.parse_args()
    cfg = TrainConfig(epochs=args.epochs, eta0=args.eta0, lam=args.lam)
    for seed in args.seeds:
        r = recovery_experiment(args.kind, (args.size,) * 3, args.events, args.observed,
                                seed=seed, config=cfg)
        print(json.dumps({
            "seed": seed,
            "logloss_gap": round(r.logloss_gap, 5),
            "auc_gap": round(r.auc_gap, 5),
            "bayes_auc": round(r.bayes_auc, 5),
            "model_auc": round(r.model_auc, 5),
            "seconds": round(r.seconds, 2),
        }))


if __name__ == "__main__":
    main()
