"""Sweep the ALOHA system size N for bistability under both spatial channels.

At equilibrium the ALOHA ODEs collapse to one equation in k = N x_T:

    N = q(k) / r_o + k + (k - q(k)) / r_r

so the number of equilibria at a given N is the number of roots in k.
The script prints the log-normal bistable window, the uniform window, the
sizes where only the log-normal channel is bistable, and then confirms the
chosen N by integrating from x_O = 1 and x_T = 1.

Usage: python3 scripts/sweep_bistable_n.py [--N 90]
"""

import argparse
from dataclasses import replace

import numpy as np

from mfwsn.capture import ChannelModel, LogNormal, Uniform, capture_probability
from mfwsn.model import load_model
from mfwsn.odes import find_fixpoint
from mfwsn.pctmc import build_pctmc

R_O, R_R = 0.0055, 0.08


def n_of_k(k, channel):
    q = capture_probability(k, channel)
    return q / R_O + k + (k - q) / R_R


def bistable_window(channel, k_max=60.0, n=6000):
    """(lower, upper) N range with three equilibria: the fold values of N(k)."""
    k = np.union1d(np.linspace(0.5, k_max, n), [1.0])  # the max sits on the kink at k = 1
    Nk = n_of_k(k, channel)
    d = np.diff(Nk)
    turns = np.nonzero(np.sign(d[1:]) != np.sign(d[:-1]))[0] + 1
    if len(turns) < 2:
        return None
    return float(Nk[turns[1]]), float(Nk[turns[0]])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=90)
    args = ap.parse_args()
    logn, uni = ChannelModel(4, 10, LogNormal(2)), ChannelModel(4, 10, Uniform())
    w_log, w_uni = bistable_window(logn), bistable_window(uni)
    print(f"log-normal bistable for N in ({w_log[0]:.3f}, {w_log[1]:.3f})")
    print(f"uniform    bistable for N in ({w_uni[0]:.3f}, {w_uni[1]:.3f})" if w_uni
          else "uniform    never bistable")
    lo = w_log[0]
    hi = min(w_log[1], w_uni[0]) if w_uni else w_log[1]
    print(f"log-normal bistable, uniform monostable: N in ({lo:.3f}, {hi:.3f})")

    aloha = load_model("aloha3.json")
    for name, ch in (("log-normal", logn), ("uniform", uni)):
        pc = build_pctmc(replace(aloha, channel=ch), N=args.N)
        a, b = (find_fixpoint(pc, np.eye(3)[s]).location for s in (0, 1))
        print(f"N={args.N} {name:10s} from O=1 -> {np.round(a, 5)}, from T=1 -> "
              f"{np.round(b, 5)}, separation {np.max(np.abs(a - b)):.3g}")


if __name__ == "__main__":
    main()
