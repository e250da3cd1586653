"""ALOHA trajectories: log-normal channel from x_O = 1 and x_T = 1, uniform from x_T = 1.

Usage: python3 scripts/aloha_trajectories.py [--N 90] [--T 3000] [--outdir results]
"""

import argparse
import csv
from dataclasses import replace
from pathlib import Path

from mfwsn.capture import ChannelModel, Uniform
from mfwsn.model import load_model
from mfwsn.odes import integrate
from mfwsn.pctmc import build_pctmc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=90)
    ap.add_argument("--T", type=float, default=3000.0)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    aloha = load_model("aloha3.json")
    runs = [("lognormal_O", aloha, [1, 0, 0]), ("lognormal_T", aloha, [0, 1, 0]),
            ("uniform_T", replace(aloha, channel=ChannelModel(4, 10, Uniform())), [0, 1, 0])]
    for name, bundle, x0 in runs:
        traj = integrate(build_pctmc(bundle, N=args.N), x0, args.T, n_out=601)
        path = out / f"aloha_{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_O", "x_T", "x_R"])
            w.writerows([t, *x] for t, x in zip(traj.times.tolist(), traj.points.tolist()))
        print(f"{name:12s} final {traj.final.round(5)} -> {path}")


if __name__ == "__main__":
    main()
