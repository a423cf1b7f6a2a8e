#!/usr/bin/env python3
"""Sweep the unseen fraction and emit overhead/error rows (plot-ready).

Aggregates the per-seed mean errors with a median so single unlucky splits do
not dominate the curve.

    python3 scripts/overhead_tradeoff.py --seeds 3 -o tradeoff.csv
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from fpsynth.config import build_experiment_config, load_config_file
from fpsynth.pipeline import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-c", "--config", default=None)
    ap.add_argument("--fractions", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("-o", "--output", default="tradeoff.csv")
    args = ap.parse_args()

    flat = load_config_file(args.config) if args.config else {}
    base = build_experiment_config(flat)
    fractions = [float(f) for f in args.fractions.split(",") if f.strip()]

    lines = ["unseen_fraction,n_seen,collection_overhead_min,mean_error_m_median,mean_error_m_per_seed"]
    for f in fractions:
        errors, overhead, n_seen = [], None, None
        for seed in range(args.seeds):
            r = run_experiment(replace(base, unseen_fraction=f, seed=seed))
            errors.append(r.report.mean_error_m)
            overhead, n_seen = r.collection_overhead_min, r.n_seen
        med = float(np.median(errors))
        per_seed = ";".join(f"{e:.4f}" for e in errors)
        lines.append(f"{f!r},{n_seen},{overhead!r},{med!r},{per_seed}")
        print(f"fraction {f:.2f}: overhead {overhead:7.1f} min, median mean-error {med:.3f} m")
    Path(args.output).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
