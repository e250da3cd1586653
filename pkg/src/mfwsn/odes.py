"""Mean-field ODEs: integration, equilibria and basins of attraction.

The drift of a population model is ``dx/dt = sum_f nu_f * r_f(x)``.  It
conserves total occupancy, so trajectories stay on the simplex; explicit
Runge-Kutta steps preserve that linear invariant up to rounding.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from mfwsn.errors import ParameterError, StiffnessError, UnresolvedFixpoint

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-8
DEFAULT_HORIZON = 5000.0
MATCH_RADIUS = 0.05
UNRESOLVED = -1
INFEASIBLE = -2


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.points[-1]


@dataclass(frozen=True, eq=False)
class Fixpoint:
    location: np.ndarray
    residual: float
    tag: str = ""

    def to_json(self):
        return {"location": self.location.tolist(), "residual": self.residual, "tag": self.tag}


def check_simplex(x, tol=1e-9, what="occupancy vector"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or np.any(x < -tol) or abs(x.sum() - 1.0) > tol:
        raise ParameterError(f"{what} must lie on the simplex, got {x.tolist()}")
    return x


def vector_field(pctmc, x):
    """Mean-field drift at occupancy ``x``."""
    return pctmc.vector_field(np.asarray(x, dtype=float))


def jacobian(pctmc, x, h=1e-7):
    """Central finite-difference Jacobian ``J[i, j] = dF_i/dx_j``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (pctmc.vector_field(x + e) - pctmc.vector_field(x - e)) / (2 * h)
    return J


def _solve(pctmc, x0, T, rtol, atol, method, t_eval=None):
    def rhs(t, y):
        if not np.all(np.isfinite(y)):
            raise StiffnessError(f"integration diverged at t={t:.6g}", time=float(t))
        with np.errstate(all="ignore"):
            F = pctmc.vector_field(y)
        if not np.all(np.isfinite(F)):
            raise StiffnessError(f"non-finite drift at t={t:.6g}", time=float(t))
        return F

    sol = solve_ivp(rhs, (0.0, T), x0, method=method, t_eval=t_eval, rtol=rtol, atol=atol)
    if sol.status < 0:
        t_fail = float(sol.t[-1]) if sol.t.size else 0.0
        raise StiffnessError(f"integration failed at t={t_fail:.6g}: {sol.message}", time=t_fail)
    return sol


def _project(points):
    """Clip roundoff negatives and renormalize; returns (points, defect)."""
    pts = np.atleast_2d(points)
    defect = float(max(np.max(np.abs(pts.sum(axis=1) - 1.0)), max(0.0, -pts.min())))
    pts = np.clip(pts, 0.0, None)
    pts = pts / pts.sum(axis=1, keepdims=True)
    return pts, defect


def integrate(pctmc, x0, T, rtol=1e-8, atol=1e-10, n_out=1001, method="RK45"):
    """Integrate the drift from ``x0`` over ``[0, T]`` timeslots.

    Output is sampled at ``n_out`` evenly spaced times.  Negative entries
    caused by rounding are clipped at output only; the largest defect is
    logged and kept in the metadata.
    """
    x0 = check_simplex(x0)
    if not T > 0:
        raise ParameterError(f"horizon must be positive, got {T!r}")
    if n_out < 2:
        raise ParameterError("need at least two output points")
    t_eval = np.linspace(0.0, T, n_out)
    sol = _solve(pctmc, x0, T, rtol, atol, method, t_eval)
    points, defect = _project(sol.y.T)
    if defect > 0:
        log.debug("clipped simplex defect %.3g", defect)
    meta = dict(pctmc.metadata)
    meta.update(solver=method, rtol=rtol, atol=atol, T=T, n_out=n_out,
                rhs_evaluations=int(sol.nfev), simplex_defect=defect, N=pctmc.N)
    return Trajectory(sol.t, points, meta)


def _tangent_basis(n):
    # orthonormal basis of {v : sum(v) = 0}
    A = np.eye(n)[:, :-1] - np.eye(n)[:, [-1]]
    Q, _ = np.linalg.qr(A)
    return Q


def newton_refine(pctmc, x, tol=1e-10, max_iter=60, h=1e-7):
    """Damped Newton on the drift restricted to the simplex tangent space."""
    B = _tangent_basis(x.size)
    F = pctmc.vector_field(x)
    res = np.max(np.abs(F))
    for _ in range(max_iter):
        if res < tol:
            break
        m = B.shape[1]
        J = np.empty((m, m))
        for k in range(m):
            dx = h * B[:, k]
            J[:, k] = B.T @ (pctmc.vector_field(x + dx) - pctmc.vector_field(x - dx)) / (2 * h)
        step = B @ np.linalg.lstsq(J, -(B.T @ F), rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            cand = x + lam * step
            if cand.min() >= -1e-9:
                Fc = pctmc.vector_field(cand)
                rc = np.max(np.abs(Fc))
                if rc < res:
                    x, F, res = cand, Fc, rc
                    break
            lam *= 0.5
        else:
            break
    x = _project(x)[0][0]
    return x, float(np.max(np.abs(pctmc.vector_field(x))))


def classify_stability(pctmc, x):
    B = _tangent_basis(x.size)
    ev = np.linalg.eigvals(B.T @ jacobian(pctmc, x) @ B)
    return "stable" if np.all(ev.real < 0) else "unstable"


def find_fixpoint(pctmc, x0, tol=1e-10, T=DEFAULT_HORIZON, rtol=1e-8, atol=1e-10,
                  settle_tol=1e-7):
    """Integrate toward equilibrium and polish the endpoint with Newton's method.

    Integration runs in growing chunks and stops early once the drift falls
    below ``settle_tol``, or at the horizon ``T``.
    """
    x = check_simplex(x0)
    t, chunk, tail = 0.0, 10.0, [x]
    while t < T:
        dt = min(chunk, T - t)
        x = _project(_solve(pctmc, x, dt, rtol, atol, "RK45").y[:, -1])[0][0]
        t += dt
        chunk *= 2
        tail.append(x)
        if np.max(np.abs(pctmc.vector_field(x))) < settle_tol:
            break
    x, res = newton_refine(pctmc, x.copy(), tol=tol)
    if not res < tol:
        raise UnresolvedFixpoint(f"fixpoint not resolved: residual {res:.3g} >= {tol:.3g}",
                                 tail=np.array(tail[-20:]))
    return Fixpoint(x, res, classify_stability(pctmc, x))


def distinct_fixpoints(fixpoints, radius=1e-6):
    """Drop fixpoints that coincide (L-infinity) with an earlier one."""
    out = []
    for f in fixpoints:
        if all(np.max(np.abs(f.location - g.location)) > radius for g in out):
            out.append(f)
    return out


@dataclass(frozen=True)
class RemainderClosure:
    """Put all occupancy not on the two axes into ``state``."""

    state: int

    def complete(self, pctmc, i, j, a, b, cell):
        x = np.zeros(pctmc.n)
        x[i], x[j] = a, b
        x[self.state] += 1.0 - a - b
        return [np.clip(x, 0.0, None)]


@dataclass(frozen=True)
class RandomClosure:
    """Spread the remainder over the other states with ``k`` uniform random splits."""

    k: int = 16
    seed: int = 0

    def complete(self, pctmc, i, j, a, b, cell):
        rest = [s for s in range(pctmc.n) if s not in (i, j)]
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(cell,)))
        out = []
        for w in rng.dirichlet(np.ones(len(rest)), size=self.k):
            x = np.zeros(pctmc.n)
            x[i], x[j] = a, b
            x[rest] = max(1.0 - a - b, 0.0) * w
            out.append(x)
        return out


@dataclass(eq=False)
class BasinGrid:
    """Initial conditions on a 2-D slice of the simplex, labelled by fixpoint.

    ``labels[a, b]`` is the fixpoint index reached from the cell, or
    :data:`UNRESOLVED`; infeasible cells (outside the triangle) hold
    :data:`INFEASIBLE`.  ``fractions[a, b, k]`` is the share of closure
    completions that reached fixpoint ``k``.  The last slot counts
    unresolved completions.
    """

    axes: tuple[int, int]
    values: np.ndarray
    labels: np.ndarray
    fractions: np.ndarray
    fixpoints: list
    closure: object

    @property
    def feasible(self):
        return self.labels != INFEASIBLE

    def coverage(self):
        """Share of feasible cells per label (fixpoint indices and ``UNRESOLVED``)."""
        lab = self.labels[self.feasible]
        keys = list(range(len(self.fixpoints))) + [UNRESOLVED]
        return {k: float(np.mean(lab == k)) for k in keys}

    def rows(self):
        for a, va in enumerate(self.values):
            for b, vb in enumerate(self.values):
                if self.labels[a, b] != INFEASIBLE:
                    yield va, vb, int(self.labels[a, b]), self.fractions[a, b]


def nearest_fixpoint(x, fixpoints, radius=MATCH_RADIUS):
    d = [np.max(np.abs(x - f.location)) for f in fixpoints]
    k = int(np.argmin(d))
    return k if d[k] < radius else UNRESOLVED


def settle(pctmc, x0, fixpoints, T=DEFAULT_HORIZON, match_radius=MATCH_RADIUS,
           chunk=100.0, rtol=1e-7, atol=1e-10):
    """Index of the fixpoint the trajectory from ``x0`` converges to.

    Integration proceeds in chunks and stops early once the state is within
    a fifth of the match radius of a fixpoint with a small drift.
    """
    x = np.asarray(x0, dtype=float)
    t = 0.0
    while t < T:
        dt = min(chunk, T - t)
        x = _solve(pctmc, x, dt, rtol, atol, "RK45").y[:, -1]
        t += dt
        k = nearest_fixpoint(x, fixpoints, match_radius / 5)
        if k != UNRESOLVED and np.max(np.abs(pctmc.vector_field(x))) < 1e-4:
            return k
    return nearest_fixpoint(_project(x)[0][0], fixpoints, match_radius)


def _grid_cells(n_states, axis_i, axis_j, resolution):
    if resolution < 2:
        raise ParameterError("resolution must be >= 2")
    if axis_i == axis_j or not (0 <= axis_i < n_states and 0 <= axis_j < n_states):
        raise ParameterError("axes must be two distinct state indices")
    values = np.linspace(0.0, 1.0, resolution)
    cells = [(a, b) for a in range(resolution) for b in range(resolution)
             if values[a] + values[b] <= 1.0 + 1e-12]
    return values, cells


def _settle_cell(args):
    pctmc, starts, fixpoints, kw = args
    return [settle(pctmc, x, fixpoints, **kw) for x in starts]


def basin_grid(pctmc, axis_i, axis_j, resolution, closure, fixpoints, T=DEFAULT_HORIZON,
               match_radius=MATCH_RADIUS, threads=1, **solver):
    """Label every feasible grid cell by the fixpoint its trajectory reaches."""
    if not fixpoints:
        raise ParameterError("basin classification needs at least one fixpoint")
    values, cells = _grid_cells(pctmc.n, axis_i, axis_j, resolution)
    kw = dict(T=T, match_radius=match_radius, **solver)
    jobs = []
    for c, (a, b) in enumerate(cells):
        starts = closure.complete(pctmc, axis_i, axis_j, values[a], values[b], c)
        jobs.append((pctmc, starts, fixpoints, kw))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_settle_cell, jobs, chunksize=8))
    else:
        results = [_settle_cell(j) for j in jobs]
    n_fix = len(fixpoints)
    labels = np.full((resolution, resolution), INFEASIBLE, dtype=int)
    fractions = np.zeros((resolution, resolution, n_fix + 1))
    for (a, b), res in zip(cells, results):
        counts = np.zeros(n_fix + 1)
        for k in res:
            counts[k if k != UNRESOLVED else n_fix] += 1
        fractions[a, b] = counts / len(res)
        labels[a, b] = int(np.argmax(counts)) if np.argmax(counts) < n_fix else UNRESOLVED
    return BasinGrid((axis_i, axis_j), values, labels, fractions, list(fixpoints), closure)


def export_vector_field_grid(pctmc, axis_i, axis_j, resolution, closure):
    """Drift at every feasible grid point: ``(cell_a, cell_b, points, derivatives)``."""
    values, cells = _grid_cells(pctmc.n, axis_i, axis_j, resolution)
    ca, cb, pts, ders = [], [], [], []
    for c, (a, b) in enumerate(cells):
        for x in closure.complete(pctmc, axis_i, axis_j, values[a], values[b], c):
            ca.append(a)
            cb.append(b)
            pts.append(x)
            ders.append(pctmc.vector_field(x))
    return np.array(ca), np.array(cb), np.array(pts), np.array(ders)
