"""Write events sampled from a random model as a generic CSV file.

    python scripts/make_synthetic_csv.py events.csv --size 30 --events 50000
"""

import argparse
from pathlib import Path

from nclf.data import write_generic
from nclf.synthetic import generator_model, sample_events


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--kind", default="nclf")
    ap.add_argument("--size", type=int, default=30)
    ap.add_argument("--events", type=int, default=50_000)
    ap.add_argument("--observed", type=float, default=0.3)
    ap.add_argument("--scale", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    gen = generator_model(args.kind, (args.size,) * 3, seed=args.seed, scale=args.scale)
    data, _ = sample_events(gen, args.events, args.observed, seed=args.seed + 1)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_generic(data, args.out)
    print(f"wrote {len(data)} events ({data.n_positive} positive) to {args.out}")


if __name__ == "__main__":
    main()
