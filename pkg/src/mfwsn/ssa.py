"""Exact stochastic simulation of a population CTMC and fluid-limit checks.

The jump process works on integer node counts.  A transition is enabled
while its source state is occupied.  Rates are evaluated at ``counts / N``
exactly as in the mean-field drift, so the two share one rate definition.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from mfwsn.errors import ParameterError
from mfwsn.odes import integrate

_BATCH = 4096


@dataclass(frozen=True, eq=False)
class StochasticTrajectory:
    """Jump times and node counts after each jump (row 0 is the start)."""

    times: np.ndarray
    counts: np.ndarray
    N: int
    seed: object = None
    labels: np.ndarray = field(default=None, repr=False)

    @property
    def points(self):
        return self.counts / self.N

    def at(self, grid):
        """Right-continuous step interpolation of the occupancy at ``grid`` times."""
        idx = np.searchsorted(self.times, grid, side="right") - 1
        return self.points[np.clip(idx, 0, None)]


def lattice_counts(x0, N, tol=1e-9):
    """Integer counts for an occupancy vector that lies on the ``1/N`` lattice."""
    x0 = np.asarray(x0, dtype=float)
    counts = np.rint(x0 * N).astype(np.int64)
    if np.any(np.abs(counts - x0 * N) > tol * N) or counts.sum() != N or np.any(counts < 0):
        raise ParameterError(f"initial occupancy {x0.tolist()} is not on the 1/{N} lattice")
    return counts


def round_to_lattice(x0, N):
    """Nearest lattice point by largest-remainder rounding (sums to exactly ``N``)."""
    x0 = np.asarray(x0, dtype=float)
    raw = x0 * N
    counts = np.floor(raw).astype(np.int64)
    short = N - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts / N


def _rng(seed):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def simulate(pctmc, x0, T, seed=0, max_events=50_000_000):
    """Exact jump-by-jump simulation up to time ``T`` or absorption.

    ``seed`` is an int or a :class:`numpy.random.SeedSequence`.
    """
    N = pctmc.N
    counts = [int(c) for c in lattice_counts(x0, N)]
    if not T > 0:
        raise ParameterError(f"horizon must be positive, got {T!r}")
    rng = _rng(seed)
    fns = [t.rate_fn for t in pctmc.transitions]
    src = [t.source for t in pctmc.transitions]
    dst = [t.target for t in pctmc.transitions]
    m = len(fns)
    inv_n = 1.0 / N
    times, states, fired = [0.0], [tuple(counts)], []
    t = 0.0
    buf, pos = rng.random(_BATCH), 0
    for _ in range(max_events):
        x = [c * inv_n for c in counts]
        rates = [fns[k](x) if counts[src[k]] > 0 else 0.0 for k in range(m)]
        total = math.fsum(rates)
        if total <= 0.0:
            break
        if pos + 2 > _BATCH:
            buf, pos = rng.random(_BATCH), 0
        u1, u2 = buf[pos], buf[pos + 1]
        pos += 2
        t -= math.log1p(-u1) / total
        if t > T:
            break
        target, acc, j = u2 * total, 0.0, m - 1
        for k in range(m):
            acc += rates[k]
            if target < acc:
                j = k
                break
        while rates[j] <= 0.0:
            j -= 1
        counts[src[j]] -= 1
        counts[dst[j]] += 1
        times.append(t)
        states.append(tuple(counts))
        fired.append(j)
    return StochasticTrajectory(np.array(times), np.array(states, dtype=np.int64), N, seed,
                                np.array(fired, dtype=np.int64))


@dataclass
class ConvergenceReport:
    """Sup-norm distance between jump paths and the ODE, per system size."""

    Ns: list
    errors: np.ndarray
    T: float
    seed: int
    grid_points: int

    @property
    def replications(self):
        return self.errors.shape[1]

    @property
    def mean(self):
        return self.errors.mean(axis=1)

    @property
    def std(self):
        ddof = 1 if self.replications > 1 else 0
        return self.errors.std(axis=1, ddof=ddof)

    @property
    def stderr(self):
        return self.std / math.sqrt(self.replications)

    def rows(self):
        return list(zip(self.Ns, self.mean.tolist(), self.std.tolist()))

    def metadata(self):
        return {"Ns": list(self.Ns), "replications": self.replications, "T": self.T,
                "seed": self.seed, "grid_points": self.grid_points,
                "seed_scheme": "SeedSequence(seed, spawn_key=(size_index, replication))"}


def sup_error(traj, reference):
    """``max_t max_s |M(t) - x(t)|`` over the reference time grid."""
    return float(np.max(np.abs(traj.at(reference.times) - reference.points)))


def _replicate(args):
    pctmc, x0, T, seed_seq, reference = args
    return sup_error(simulate(pctmc, x0, T, seed_seq), reference)


def convergence_study(build, Ns, x0, T, replications, seed=0, grid_points=1000, threads=1):
    """Mean and spread of the SSA-vs-ODE sup-norm error for each size in ``Ns``.

    ``x0`` is an occupancy vector (rounded to each lattice) or a callable
    ``N -> occupancy``.  Replication ``r`` at size index ``k`` always uses
    the stream ``SeedSequence(seed, spawn_key=(k, r))``, so results do not
    depend on ``threads``.
    """
    Ns = list(Ns)
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ParameterError("system sizes must be strictly increasing")
    if replications < 1:
        raise ParameterError("need at least one replication")
    errors = np.zeros((len(Ns), replications))
    for k, N in enumerate(Ns):
        pctmc = build(N)
        start = x0(N) if callable(x0) else round_to_lattice(x0, N)
        reference = integrate(pctmc, start, T, n_out=grid_points)
        jobs = [(pctmc, start, T, np.random.SeedSequence(seed, spawn_key=(k, r)), reference)
                for r in range(replications)]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                errors[k] = list(pool.map(_replicate, jobs))
        else:
            errors[k] = [_replicate(j) for j in jobs]
    return ConvergenceReport(Ns, errors, T, seed, grid_points)
