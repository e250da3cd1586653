"""Capture probability q(i) for the uniform and log-normal channels as CSV.

Usage: python3 scripts/q_curve.py [--i-max 10] [--n-points 201] [--outdir results]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from mfwsn.capture import ChannelModel, LogNormal, Uniform, capture_probability


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--i-max", type=float, default=10.0)
    ap.add_argument("--n-points", type=int, default=201)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    i = np.linspace(0, args.i_max, args.n_points)
    uni = capture_probability(i, ChannelModel(4, 10, Uniform()))
    logn = capture_probability(i, ChannelModel(4, 10, LogNormal(2)))
    path = out / "q_curve.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "q_uniform", "q_lognormal"])
        w.writerows(zip(i.tolist(), uni.tolist(), logn.tolist()))
    print(f"wrote {path}; q(i_max): uniform {uni[-1]:.4f}, log-normal {logn[-1]:.4f}")


if __name__ == "__main__":
    main()
