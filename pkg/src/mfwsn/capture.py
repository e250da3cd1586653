"""Interference-aware capture probability q(i).

``q(i)`` is the probability that one of ``i`` simultaneous transmitters
captures the receiver when a signal must exceed the summed power of the
other ``i - 1`` by the threshold ``z``.  Node distances follow a spatial
density ``f(r)`` and received power falls off as ``r**-beta``::

    q(i) = i * integral_0^inf S(r_t)**(i - 1) f(r_t) dr_t
    S(r_t) = integral_0^inf f(r) / (1 + z * r_t**beta * r**-beta) dr

``S`` is the probability of surviving a single interferer.  For ``i < 1``
the curve is extended by ``q(i) = i``.

Evaluation for real ``i`` goes through :class:`CaptureModel`, which samples
``S`` once at fixed outer quadrature nodes.  After that every ``q(i)`` is a
dot product, cheap enough for ODE right-hand sides and exact in ``i``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from mfwsn.errors import NumericError, ParameterError

#: Total log-normal probability mass discarded by truncating the support.
TAIL_MASS = 1e-10
#: Absolute tolerance of every adaptive integral.
QUAD_TOL = 1e-9

_GL_ORDER = 12


@dataclass(frozen=True)
class Uniform:
    """Nodes uniformly spread over the unit disk: ``f(r) = 2r`` on ``[0, 1]``."""

    def to_json(self):
        return "uniform"


@dataclass(frozen=True)
class LogNormal:
    """Log-normal distance distribution with logarithmic spread ``sigma_d``."""

    sigma_d: float

    def to_json(self):
        return {"lognormal": {"sigma_d": self.sigma_d}}


@dataclass(frozen=True)
class ChannelModel:
    """Pathloss exponent, capture threshold and spatial distribution."""

    beta: float = 4.0
    z: float = 10.0
    spatial: Uniform | LogNormal = field(default_factory=Uniform)

    def __post_init__(self):
        for name in ("beta", "z"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
        if isinstance(self.spatial, LogNormal):
            s = self.spatial.sigma_d
            if not (isinstance(s, (int, float)) and math.isfinite(s) and s > 0):
                raise ParameterError(f"sigma_d must be a positive finite number, got {s!r}")
        elif not isinstance(self.spatial, Uniform):
            raise ParameterError(f"unknown spatial distribution {self.spatial!r}")

    @property
    def log_sigma(self):
        """Standard deviation of ``ln r`` under the log-normal density."""
        return self.spatial.sigma_d / self.beta

    def support(self):
        """Integration range ``(r_min, r_max)`` for the spatial density.

        The log-normal range is cut where the discarded mass drops below
        :data:`TAIL_MASS`.
        """
        if isinstance(self.spatial, Uniform):
            return 0.0, 1.0
        u = self.log_support()
        return math.exp(u[0]), math.exp(u[1])

    def log_support(self):
        k = -special.ndtri(TAIL_MASS / 2)
        return -k * self.log_sigma, k * self.log_sigma

    def to_json(self):
        return {"beta": self.beta, "z": self.z, "spatial": self.spatial.to_json()}


def spatial_pdf(r, channel):
    """Spatial density ``f(r)``; accepts scalars or arrays."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or not np.all(np.isfinite(r_arr)):
        raise ParameterError("distance must be finite and non-negative")
    if isinstance(channel.spatial, Uniform):
        out = np.where(r_arr <= 1.0, 2.0 * r_arr, 0.0)
    else:
        s = channel.log_sigma
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.log(r_arr)
            out = np.exp(-0.5 * (u / s) ** 2) / (math.sqrt(2 * math.pi) * s * r_arr)
        out = np.where(r_arr > 0, out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _log_pdf_u(u, channel):
    # density of u = ln r, i.e. f(r) * r
    s = channel.log_sigma
    return np.exp(-0.5 * (u / s) ** 2) / (math.sqrt(2 * math.pi) * s)


def _closed_form_uniform4(r_t, z):
    a = np.sqrt(z) * np.asarray(r_t, dtype=float) ** 2
    # arctan2(1, a) == arctan(1/a) for a > 0 and stays finite at a == 0
    return 1.0 - a * np.arctan2(1.0, a)


def _quad(fn, lo, hi, points=None):
    value, err = integrate.quad(fn, lo, hi, epsabs=QUAD_TOL * 1e-2, epsrel=1e-12,
                                limit=200, points=points)
    if err > QUAD_TOL:
        raise NumericError(f"quadrature did not converge (error estimate {err:.3g})",
                           error_estimate=err)
    return value


def pdf_mass(channel):
    """Integral of the spatial density over its (truncated) support."""
    if isinstance(channel.spatial, Uniform):
        return _quad(lambda r: 2.0 * r, 0.0, 1.0)
    lo, hi = channel.log_support()
    return _quad(lambda u: _log_pdf_u(u, channel), lo, hi, points=[0.0])


def inner_survival(r_t, channel):
    """Probability that a transmitter at distance ``r_t`` survives one interferer."""
    if not (math.isfinite(r_t) and r_t >= 0):
        raise ParameterError(f"r_t must be finite and non-negative, got {r_t!r}")
    if r_t == 0:
        return 1.0
    beta, z = channel.beta, channel.z
    if isinstance(channel.spatial, Uniform):
        if beta == 4:
            return float(_closed_form_uniform4(r_t, z))
        return inner_survival_quad(r_t, channel)
    return inner_survival_quad(r_t, channel)


def inner_survival_quad(r_t, channel):
    """Adaptive quadrature of the survival integrand, with no closed-form shortcut."""
    beta, z = channel.beta, channel.z
    if r_t == 0:
        return 1.0
    if isinstance(channel.spatial, Uniform):
        log_rt = math.log(r_t)

        def integrand(r):
            if r == 0:
                return 0.0
            # 1 / (1 + z (r_t/r)^beta), written to avoid overflow as r -> 0
            return 2.0 * r * special.expit(-(math.log(z) + beta * (log_rt - math.log(r))))

        knee = r_t * z ** (1.0 / beta)
        points = [knee] if 0 < knee < 1 else None
        value = _quad(integrand, 0.0, 1.0, points=points)
    else:
        u_t = math.log(r_t)
        lo, hi = channel.log_support()

        def integrand(u):
            return _log_pdf_u(u, channel) * special.expit(-(math.log(z) + beta * (u_t - u)))

        knee = u_t + math.log(z) / beta
        points = [p for p in (0.0, knee) if lo < p < hi]
        value = _quad(integrand, lo, hi, points=points or None)
    return min(max(value, 0.0), 1.0)


def _gauss_panels(breaks, order=_GL_ORDER):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = np.asarray(breaks[:-1]), np.asarray(breaks[1:])
    half = 0.5 * (b - a)
    nodes = (a[:, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


class CaptureModel:
    """Fast evaluator of ``q(i)`` for one channel.

    The outer integral uses composite Gauss-Legendre panels.  On the unit
    disk the panels are graded geometrically toward ``r_t = 0`` because
    ``S**(i-1)`` concentrates there as ``i`` grows.  In the log-normal case
    they are uniform in ``ln r_t`` over the truncated support.
    """

    def __init__(self, channel, n_panels=64):
        self.channel = channel
        mass = pdf_mass(channel)
        if abs(mass - 1.0) > 1e-8:
            raise NumericError(f"spatial density integrates to {mass!r}, expected 1",
                               error_estimate=abs(mass - 1.0))
        if isinstance(channel.spatial, Uniform):
            breaks = np.concatenate([[0.0], np.geomspace(1e-7, 1.0, n_panels)])
            r_t, w = _gauss_panels(breaks)
            density = 2.0 * r_t
        else:
            lo, hi = channel.log_support()
            u, w = _gauss_panels(np.linspace(lo, hi, n_panels + 1))
            r_t = np.exp(u)
            density = _log_pdf_u(u, channel)
        if isinstance(channel.spatial, Uniform) and channel.beta == 4:
            survival = _closed_form_uniform4(r_t, channel.z)
        else:
            survival = np.array([inner_survival(float(r), channel) for r in r_t])
        self.r_nodes = r_t
        self.survival = survival
        self._log_s = np.log(np.clip(survival, 1e-300, 1.0))
        self._w = w * density
        self.r_support = channel.support()
        # lattice arguments repeat constantly during stochastic simulation
        self._cached = functools.lru_cache(maxsize=8192)(self._scalar)

    def __call__(self, i):
        if isinstance(i, float):
            return self._cached(i)
        if np.ndim(i) == 0:
            return self._cached(float(i))
        i = np.asarray(i, dtype=float)
        _check_argument(i)
        out = np.array(i, copy=True)
        big = i > 1.0
        if np.any(big):
            ib = i[big]
            vals = ib * (np.exp(np.outer(ib - 1.0, self._log_s)) @ self._w)
            out[big] = np.clip(vals, 0.0, 1.0)
        return out

    def scalar(self, i):
        return self._cached(i)

    def _scalar(self, i):
        if not (i >= 0.0 and math.isfinite(i)):
            raise ParameterError(f"q(i) needs a finite, non-negative argument, got {i!r}")
        if i <= 1.0:
            return i
        val = i * float(np.exp((i - 1.0) * self._log_s) @ self._w)
        return min(max(val, 0.0), 1.0)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_cached"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._cached = functools.lru_cache(maxsize=8192)(self._scalar)

    def metadata(self):
        return {
            "channel": self.channel.to_json(),
            "r_support": list(self.r_support),
            "outer_nodes": int(self.r_nodes.size),
            "tail_mass": TAIL_MASS if isinstance(self.channel.spatial, LogNormal) else 0.0,
        }


def _check_argument(i):
    arr = np.asarray(i)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ParameterError("q(i) needs a finite, non-negative argument")


@functools.lru_cache(maxsize=32)
def capture_model(channel):
    """Shared, cached :class:`CaptureModel` for ``channel``."""
    return CaptureModel(channel)


def capture_probability(i, channel):
    """``q(i)`` for a real ``i >= 0``; ``q(i) = i`` below one transmitter."""
    _check_argument(i)
    return capture_model(channel)(i)


@dataclass(frozen=True, eq=False)
class QTable:
    """Tabulated ``q`` with shape-preserving cubic (PCHIP) interpolation.

    PCHIP never overshoots the neighbouring samples, so interpolated values
    stay inside ``[0, 1]``.  On ``[0, 1]`` the table is exact (``q(i) = i``).
    """

    channel: ChannelModel
    grid: np.ndarray
    values: np.ndarray
    rule: str = "pchip"

    def __post_init__(self):
        upper = self.grid >= 1.0
        object.__setattr__(self, "_interp",
                           PchipInterpolator(self.grid[upper], self.values[upper]))

    @property
    def i_max(self):
        return float(self.grid[-1])

    def __call__(self, i):
        arr = np.asarray(i, dtype=float)
        _check_argument(arr)
        if np.any(arr > self.i_max * (1 + 1e-12)):
            raise ParameterError(f"q table covers i <= {self.i_max}, got {arr.max()}")
        out = np.where(arr <= 1.0, arr, self._interp(np.clip(arr, 1.0, self.i_max)))
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def metadata(self):
        return {"rule": self.rule, "i_max": self.i_max, "n_points": int(self.grid.size),
                "channel": self.channel.to_json()}


def tabulate_q(channel, i_max, n_points):
    """Sample ``q`` on ``[0, i_max]``; the grid always contains 0 and 1."""
    if not (math.isfinite(i_max) and i_max >= 1):
        raise ParameterError(f"i_max must be >= 1, got {i_max!r}")
    if n_points < 16:
        raise ParameterError(f"n_points must be >= 16, got {n_points!r}")
    grid = np.concatenate([[0.0], np.linspace(1.0, i_max, n_points - 1)])
    values = np.asarray(capture_probability(grid, channel), dtype=float)
    return QTable(channel, grid, values)


def lipschitz_probe(channel, domain, n_samples=200):
    """Largest difference quotient of ``q`` over ``n_samples`` points of ``domain``."""
    lo, hi = domain
    if not (1 <= lo < hi and math.isfinite(hi)):
        raise ParameterError(f"need 1 <= lo < hi, got [{lo}, {hi}]")
    if n_samples < 2:
        raise ParameterError("need at least two samples")
    x = np.linspace(lo, hi, n_samples)
    q = np.asarray(capture_probability(x, channel))
    dx = np.abs(x[:, None] - x[None, :])
    dq = np.abs(q[:, None] - q[None, :])
    np.fill_diagonal(dx, 1.0)
    return float(np.max(dq / dx))
