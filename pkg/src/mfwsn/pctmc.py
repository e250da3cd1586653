"""Compile components into normalized population CTMCs.

Two compilation rules are provided:

* :func:`transform_single_receiver` handles nodes contending for one
  receiver.  A transmitting state's capture/failure pair is split by the
  capture probability of all current transmitters.
* :func:`transform_broadcast` handles local broadcast, where every node
  within a neighbourhood of mean size ``d = N * p`` may receive.

Every transition moves one node, so its state change is ``(e_target -
e_source) / N``.  Rates are evaluated at the normalized occupancy vector
and already carry the factor ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mfwsn.capture import capture_model
from mfwsn.errors import ModelError, NumericError
from mfwsn.model import BROADCAST, SINGLE_RECEIVER, validate_broadcast_restriction

SENDER_COUNT = "sender-count"
INTERFERENCE_TOTAL = "interference-total"
CONVENTIONS = (SENDER_COUNT, INTERFERENCE_TOTAL)


def _fmt(v):
    return f"{v:g}"


@dataclass(frozen=True)
class LinearRate:
    """``coef * N * x[index]``: internal, send and resend transitions."""

    coef: float
    index: int
    N: int

    def __call__(self, x):
        return self.coef * self.N * x[self.index]

    def describe(self, names):
        return f"N*{_fmt(self.coef)}*x_{names[self.index]}"


@dataclass(frozen=True)
class CaptureRate:
    """``r * q(N * x[index])``: one of the transmitters gets through."""

    rate: float
    index: int
    N: int
    q: object = field(repr=False, compare=False)

    def __call__(self, x):
        return self.rate * self.q(max(self.N * x[self.index], 0.0))

    def describe(self, names):
        return f"{_fmt(self.rate)}*q(N*x_{names[self.index]})"


@dataclass(frozen=True)
class FailureRate:
    """``r * (N * x[index] - q(N * x[index]))``: every other transmitter fails."""

    rate: float
    index: int
    N: int
    q: object = field(repr=False, compare=False)

    def __call__(self, x):
        k = max(self.N * x[self.index], 0.0)
        return self.rate * (k - self.q(k))

    def describe(self, names):
        s = names[self.index]
        return f"{_fmt(self.rate)}*(N*x_{s} - q(N*x_{s}))"


@dataclass(frozen=True)
class ReceiveRate:
    """Reception of message ``m`` by a node in state ``receiver``.

    ``N * r * C(send m)/C(I_m) * q(d * C_arg) * x[receiver]`` where ``C``
    sums occupancies over the listed state indices and ``C_arg`` is either
    the sender or the interferer total.  The sender fraction is taken as 0
    when no interferer is present.
    """

    rate: float
    receiver: int
    senders: tuple[int, ...]
    interferers: tuple[int, ...]
    q_states: tuple[int, ...]
    d: float
    N: int
    q: object = field(repr=False, compare=False)

    def __call__(self, x):
        c_send = sum(x[i] for i in self.senders)
        c_int = sum(x[i] for i in self.interferers)
        if c_int <= 0 or c_send <= 0:
            return 0.0
        c_q = sum(x[i] for i in self.q_states)
        return (self.N * self.rate * (c_send / c_int) * self.q(max(self.d * c_q, 0.0))
                * x[self.receiver])

    def describe(self, names):
        def total(idx):
            return "(" + "+".join(f"x_{names[i]}" for i in idx) + ")"
        return (f"N*{_fmt(self.rate)}*{total(self.senders)}/{total(self.interferers)}"
                f"*q({_fmt(self.d)}*{total(self.q_states)})*x_{names[self.receiver]}")


@dataclass(frozen=True)
class PctmcTransition:
    label: str
    source: int
    target: int
    rate_fn: object
    n: int
    N: int

    @property
    def subtract(self):
        v = np.zeros(self.n)
        v[self.source] = 1.0 / self.N
        return v

    @property
    def add(self):
        v = np.zeros(self.n)
        v[self.target] = 1.0 / self.N
        return v

    @property
    def change(self):
        """Scaled state-change vector ``N * nu`` (integer valued)."""
        v = np.zeros(self.n, dtype=int)
        v[self.source] -= 1
        v[self.target] += 1
        return v


@dataclass(frozen=True, eq=False)
class Pctmc:
    """Normalized population CTMC: states, size ``N``, transitions, initial occupancy."""

    states: tuple[str, ...]
    N: int
    transitions: tuple[PctmcTransition, ...]
    x0: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.states)
        m = len(self.transitions)
        stoich = np.zeros((m, n))
        for j, t in enumerate(self.transitions):
            stoich[j] = t.change
        object.__setattr__(self, "stoich", stoich)
        object.__setattr__(self, "sources",
                           np.array([t.source for t in self.transitions], dtype=int))
        object.__setattr__(self, "_fns", tuple(t.rate_fn for t in self.transitions))

    @property
    def n(self):
        return len(self.states)

    def rates(self, x):
        return np.array([f(x) for f in self._fns])

    def vector_field(self, x):
        return (self.rates(x) @ self.stoich) / self.N

    def listing(self):
        """Machine-readable description of every transition."""
        return [{"label": t.label, "from": self.states[t.source], "to": self.states[t.target],
                 "change": t.change.tolist(), "rate": t.rate_fn.describe(self.states)}
                for t in self.transitions]

    def ode_text(self):
        """The mean-field ODE system as readable text, one equation per state."""
        lines = []
        for s in range(self.n):
            terms = []
            for t in self.transitions:
                c = t.change[s]
                if c:
                    terms.append(("+ " if c > 0 else "- ") + f"({t.rate_fn.describe(self.states)})/N")
            body = " ".join(terms) if terms else "0"
            if body.startswith("+ "):
                body = body[2:]
            lines.append(f"d x_{self.states[s]}/dt = {body}")
        return "\n".join(lines) + f"\n  with N = {self.N}\n"


def _probe_finite(pctmc):
    for j in range(pctmc.n):
        x = np.zeros(pctmc.n)
        x[j] = 1.0
        r = pctmc.rates(x)
        if not np.all(np.isfinite(r)):
            raise NumericError(f"non-finite rate at simplex vertex {pctmc.states[j]}")
    return pctmc


def transform_single_receiver(component, N, q=None, channel=None, x0=None):
    """Population model for nodes contending for a single receiver.

    ``q`` is any callable ``i -> q(i)``; by default the cached evaluator of
    ``channel``.  Every state with a capture transition needs a failure
    transition with the same rate constant.
    """
    if component.family == BROADCAST:
        raise ModelError("single-receiver transformation needs capture/failure actions, "
                         "not send/receive")
    if q is None:
        if channel is None:
            raise ModelError("need either a q evaluator or a channel")
        q = capture_model(channel)
    names = component.states
    by_state = {}
    for t in component.transitions:
        if t.action.kind in ("capture", "failure"):
            by_state.setdefault(t.source, {}).setdefault(t.action.kind, []).append(t)
    for s, kinds in by_state.items():
        caps, fails = kinds.get("capture", []), kinds.get("failure", [])
        if len(caps) != 1 or len(fails) != 1:
            raise ModelError(f"state {s!r} needs exactly one capture and one failure transition")
        if caps[0].rate != fails[0].rate:
            raise ModelError(f"capture and failure from {s!r} must share one send rate")
    out = []
    for t in component.transitions:
        i, j = component.index(t.source), component.index(t.target)
        if i == j:
            continue
        if t.action.kind == "capture":
            fn = CaptureRate(t.rate, i, N, q)
        elif t.action.kind == "failure":
            fn = FailureRate(t.rate, i, N, q)
        else:
            fn = LinearRate(t.rate, i, N)
        out.append(PctmcTransition(t.action.label, i, j, fn, len(names), N))
    x0 = np.zeros(len(names)) if x0 is None else np.asarray(x0, dtype=float)
    meta = {"transformation": SINGLE_RECEIVER}
    return _probe_finite(Pctmc(names, N, tuple(out), x0, meta))


def transform_broadcast(component, config, q=None, channel=None,
                        convention=INTERFERENCE_TOTAL, x0=None):
    """Population model for local-broadcast protocols.

    ``convention`` selects the argument of ``q`` in reception rates:
    ``"sender-count"`` uses the occupancy of states sending ``m`` and
    ``"interference-total"`` uses all states sending any type in ``I_m``.
    Self-loops are dropped because they change no population count.
    """
    if convention not in CONVENTIONS:
        raise ModelError(f"unknown convention {convention!r}; choose from {CONVENTIONS}")
    if component.family == SINGLE_RECEIVER:
        raise ModelError("broadcast transformation needs send/receive actions")
    clashes = validate_broadcast_restriction(component)
    if clashes:
        raise ModelError("states both send and receive the same message: "
                         + ", ".join(f"{s}:{m}" for s, m in clashes))
    if q is None:
        if channel is None:
            raise ModelError("need either a q evaluator or a channel")
        q = capture_model(channel)
    names = component.states
    senders, send_rate = {}, {}
    for t in component.transitions:
        if t.action.kind == "send":
            m = t.action.message
            senders.setdefault(m, set()).add(component.index(t.source))
            if send_rate.setdefault(m, t.rate) != t.rate:
                raise ModelError(f"all send({m}) transitions must share one rate")
    N, d = config.N, config.d
    out = []
    for t in component.transitions:
        i, j = component.index(t.source), component.index(t.target)
        kind = t.action.kind
        if kind == "receive":
            m = t.action.message
            if m not in senders:
                raise ModelError(f"receive({m}) has no matching send({m})")
            s_idx = tuple(sorted(senders[m]))
            i_idx = tuple(sorted(set().union(*(senders.get(o, set())
                                               for o in config.interferers(m)))))
            q_idx = s_idx if convention == SENDER_COUNT else i_idx
            fn = ReceiveRate(send_rate[m], i, s_idx, i_idx, q_idx, d, N, q)
        else:
            fn = LinearRate(t.rate, i, N)
        if i == j:
            continue
        out.append(PctmcTransition(t.action.label, i, j, fn, len(names), N))
    x0 = np.zeros(len(names)) if x0 is None else np.asarray(x0, dtype=float)
    meta = {"transformation": BROADCAST, "convention": convention, "d": d, "p": config.p}
    return _probe_finite(Pctmc(names, N, tuple(out), x0, meta))


def build_pctmc(bundle, N=None, q=None, convention=INTERFERENCE_TOTAL):
    """Compile a parsed model bundle, optionally at a different size ``N``.

    For broadcast models a size override keeps the neighbourhood size ``d``
    fixed.
    """
    N = bundle.N if N is None else N
    comp = bundle.component
    if comp.family == BROADCAST:
        config = bundle.broadcast if N == bundle.broadcast.N else bundle.broadcast.with_size(N)
        return transform_broadcast(comp, config, q=q, channel=bundle.channel,
                                   convention=convention, x0=bundle.x0)
    return transform_single_receiver(comp, N, q=q, channel=bundle.channel, x0=bundle.x0)


@dataclass
class DensityReport:
    Ns: list
    labels: list
    change_ok: list
    scaling_ok: list
    max_rel_dev: list

    @property
    def passed(self):
        return all(self.change_ok) and all(self.scaling_ok)

    def failing(self):
        return [lab for lab, a, b in zip(self.labels, self.change_ok, self.scaling_ok)
                if not (a and b)]


def check_density_dependence(build, Ns, probes, rtol=1e-9):
    """Empirical density-dependence check over system sizes ``Ns``.

    Checks that ``N * nu`` is the same for every size and that ``r(x)/N``
    agrees across sizes at every probe, per transition.
    """
    if len(Ns) < 2:
        raise ModelError("need at least two system sizes")
    models = [build(N) for N in Ns]
    ref = models[0]
    labels = [(t.label, t.source, t.target) for t in ref.transitions]
    for m in models[1:]:
        if [(t.label, t.source, t.target) for t in m.transitions] != labels:
            raise ModelError("transition sets differ between system sizes")
    probes = [np.asarray(p, dtype=float) for p in probes]
    for p in probes:
        if np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-9:
            raise ModelError("probe points must lie on the simplex")
    n_t = len(labels)
    change_ok = [all(np.allclose(m.N * (m.transitions[k].add - m.transitions[k].subtract),
                                 ref.N * (ref.transitions[k].add - ref.transitions[k].subtract),
                                 rtol=0, atol=1e-12) for m in models) for k in range(n_t)]
    scaled = np.array([[m.rates(p) / m.N for p in probes] for m in models])
    base = scaled[0]
    scale = np.maximum(np.abs(scaled), np.abs(base)[None]).max(axis=0)
    dev = np.abs(scaled - base[None]).max(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, dev / scale, 0.0)
    max_rel = rel.max(axis=0) if len(probes) else np.zeros(n_t)
    return DensityReport(list(Ns), [lab[0] for lab in labels], change_ok,
                         [bool(r <= rtol) for r in max_rel], [float(r) for r in max_rel])
