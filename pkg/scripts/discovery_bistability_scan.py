"""Count equilibria of the neighbourhood-discovery model across channel settings.

With the interference-total rule the equilibria reduce to the roots of a
scalar equation in the total capture probability Q = a + b, where a and b
are the msg and ack reception probabilities per slot:

    (Q - a)(Q - a + rho) = a^2 (kappa (Q - a) + 1),   b = Q - a
    y = 1 / (kappa b + b + 1 + rho + a (kappa b + 1))
    C(Q) = y (b + rho + a (kappa b + 1))               (total sender occupancy)
    Q = q(d C(Q))

with kappa = r_send / r_process and rho = r_timeout / r_send.  Bistability
needs at least three roots.  The sender-count rule is checked by integrating
the ODEs from many random starts instead.

Usage: python3 scripts/discovery_bistability_scan.py [--starts 12]
"""

import argparse
from dataclasses import replace

import numpy as np
from scipy import optimize

from mfwsn.capture import ChannelModel, LogNormal, Uniform, capture_model
from mfwsn.model import load_model
from mfwsn.odes import distinct_fixpoints, find_fixpoint
from mfwsn.pctmc import CONVENTIONS, build_pctmc


def reduced_roots(channel, d=25.0, r_send=100.0, r_process=1.0, r_timeout=30.0, n_grid=4000):
    kappa, rho = r_send / r_process, r_timeout / r_send
    q = capture_model(channel)

    def split(Q):
        h = lambda a: (Q - a) * (Q - a + rho) - a * a * (kappa * (Q - a) + 1)
        a = optimize.brentq(h, 0.0, Q, xtol=1e-15)
        return a, Q - a

    def occupancy(Q):
        a, b = split(Q)
        y = 1.0 / (kappa * b + b + 1 + rho + a * (kappa * b + 1))
        return y * (b + rho + a * (kappa * b + 1)), kappa * b * y

    G = lambda Q: q(d * occupancy(Q)[0]) - Q
    Qs = np.linspace(1e-6, 1.0, n_grid)
    g = np.array([G(Q) for Q in Qs])
    roots = [optimize.brentq(G, a, b, xtol=1e-14)
             for a, b, ga, gb in zip(Qs, Qs[1:], g, g[1:]) if ga * gb < 0]
    return [(Q, occupancy(Q)[1]) for Q in roots]


def ode_fixpoints(bundle, convention, starts, seed=0):
    pc = build_pctmc(bundle, convention=convention)
    rng = np.random.default_rng(seed)
    seeds = list(np.eye(pc.n)) + list(rng.dirichlet(np.ones(pc.n), size=starts))
    return distinct_fixpoints([find_fixpoint(pc, s) for s in seeds], radius=1e-5)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--starts", type=int, default=12, help="random ODE starts per check")
    args = ap.parse_args()

    print("interference-total rule, reduced equation: roots (Q, x0)")
    cases = [("log-normal z=10 sd=2 (model file)", ChannelModel(4, 10, LogNormal(2)), 30.0),
             ("log-normal, r_timeout=1/30", ChannelModel(4, 10, LogNormal(2)), 1 / 30),
             ("uniform z=10", ChannelModel(4, 10, Uniform()), 30.0),
             ("uniform, r_timeout=1/30", ChannelModel(4, 10, Uniform()), 1 / 30)]
    for z in (10, 20, 50):
        for sd in (2, 4, 6):
            if (z, sd) != (10, 2):
                cases.append((f"log-normal z={z} sd={sd}", ChannelModel(4, z, LogNormal(sd)), 30.0))
    for label, ch, r_to in cases:
        roots = reduced_roots(ch, r_timeout=r_to)
        shown = ", ".join(f"({Q:.4f}, {x0:.4f})" for Q, x0 in roots)
        print(f"  {label:36s} {len(roots)} root(s): {shown}")

    bundle = load_model("discovery6.json")
    print("\nODE multi-start check at the model file's parameters")
    for convention in CONVENTIONS:
        for label, ch in (("log-normal", bundle.channel),
                          ("uniform", ChannelModel(4, 10, Uniform()))):
            fps = ode_fixpoints(replace(bundle, channel=ch), convention, args.starts)
            locs = "; ".join(np.array2string(f.location, precision=4) for f in fps)
            print(f"  {convention:18s} {label:10s} {len(fps)} fixpoint(s): {locs}")


if __name__ == "__main__":
    main()
