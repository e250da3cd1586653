"""Basins of attraction: ALOHA on the (O, R) plane, discovery on the (0, 3) plane.

The discovery plane fills the four absent states with random splits and
reports the share of completions reaching each fixpoint.

Usage: python3 scripts/basin_maps.py [--resolution 50] [--k 16] [--threads 1] [--outdir results]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from mfwsn.model import load_model
from mfwsn.odes import (RandomClosure, RemainderClosure, basin_grid, distinct_fixpoints,
                        find_fixpoint)
from mfwsn.pctmc import build_pctmc


def vertex_fixpoints(pc):
    return distinct_fixpoints([find_fixpoint(pc, v) for v in np.eye(pc.n)], radius=1e-6)


def write(grid, path):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis_i", "axis_j", "fixpoint_index"]
                   + [f"share_{k}" for k in range(len(grid.fixpoints))] + ["share_unresolved"])
        for a, b, k, fr in grid.rows():
            w.writerow([a, b, k, *fr.tolist()])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=50)
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--N", type=int, default=90, help="ALOHA system size")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    aloha = build_pctmc(load_model("aloha3.json"), N=args.N)
    fps = vertex_fixpoints(aloha)
    grid = basin_grid(aloha, 0, 2, args.resolution, RemainderClosure(1), fps,
                      threads=args.threads)
    write(grid, out / "basin_aloha.csv")
    print("aloha fixpoints", [f.location.round(4).tolist() for f in fps],
          "coverage", grid.coverage())

    disc = build_pctmc(load_model("discovery6.json"))
    fps = vertex_fixpoints(disc)
    grid = basin_grid(disc, 0, 3, args.resolution, RandomClosure(args.k, seed=0), fps,
                      threads=args.threads)
    write(grid, out / "basin_discovery.csv")
    print("discovery fixpoints", [f.location.round(4).tolist() for f in fps],
          "coverage", grid.coverage())


if __name__ == "__main__":
    main()
