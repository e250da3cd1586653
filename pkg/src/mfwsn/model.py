"""Per-node component transition systems and the JSON model file format.

A model file bundles one component (states, transitions, initial
occupancy), the radio channel, the system size ``N`` and, for broadcast
protocols, the neighbourhood fraction and interference sets.  The state
declaration order fixes the index of each state in occupancy vectors.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from mfwsn.capture import ChannelModel, LogNormal, Uniform
from mfwsn.errors import MfwsnError, ModelError, ParameterError

ACTION_KINDS = ("capture", "failure", "send", "receive", "internal")
SINGLE_RECEIVER = "single-receiver"
BROADCAST = "broadcast"

#: Tolerance on the sum of initial fractions.
SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class ActionKind:
    kind: str
    message: str | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ModelError(f"unknown action kind {self.kind!r}")
        if self.kind in ("send", "receive"):
            if not self.message:
                raise ModelError(f"{self.kind} action needs a message type")
        elif self.message is not None:
            raise ModelError(f"{self.kind} action cannot carry a message type")
        if self.kind == "internal" and not self.name:
            raise ModelError("internal action needs a name")

    @property
    def label(self):
        if self.kind in ("send", "receive"):
            return f"{self.kind}({self.message})"
        if self.kind == "internal":
            return self.name
        return self.kind

    def to_json(self):
        out = {"kind": self.kind}
        if self.message is not None:
            out["message"] = self.message
        if self.name is not None:
            out["name"] = self.name
        return out


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    action: ActionKind
    rate: float | None

    def __post_init__(self):
        if self.action.kind == "receive":
            if self.rate is not None:
                raise ModelError(
                    f"receive transition {self.source}->{self.target} must have rate null (bottom)")
        elif not (self.rate is not None and math.isfinite(self.rate) and self.rate > 0):
            raise ModelError(
                f"transition {self.source}->{self.target} ({self.action.label}) "
                f"needs a positive finite rate, got {self.rate!r}")

    def to_json(self):
        return {"from": self.source, "to": self.target, "action": self.action.to_json(),
                "rate": self.rate}


@dataclass(frozen=True)
class Component:
    """Labelled transition system of a single node."""

    states: tuple[str, ...]
    transitions: tuple[Transition, ...]
    initial_state: str

    def __post_init__(self):
        if not self.states:
            raise ModelError("a component needs at least one state")
        if len(set(self.states)) != len(self.states):
            raise ModelError("state names must be unique")
        known = set(self.states)
        for t in self.transitions:
            for end in (t.source, t.target):
                if end not in known:
                    raise ModelError(f"transition endpoint {end!r} is not a declared state")
        if self.initial_state not in known:
            raise ModelError(f"initial state {self.initial_state!r} is not declared")
        kinds = {t.action.kind for t in self.transitions}
        if kinds & {"capture", "failure"} and kinds & {"send", "receive"}:
            raise ModelError("a model cannot mix capture/failure with send/receive actions")

    @property
    def n(self):
        return len(self.states)

    def index(self, state):
        try:
            return self.states.index(state)
        except ValueError:
            raise ModelError(f"unknown state {state!r}") from None

    @property
    def family(self):
        kinds = {t.action.kind for t in self.transitions}
        if kinds & {"send", "receive"}:
            return BROADCAST
        if kinds & {"capture", "failure"}:
            return SINGLE_RECEIVER
        return "internal-only"

    def message_types(self):
        return sorted({t.action.message for t in self.transitions if t.action.message})


@dataclass(frozen=True)
class BroadcastConfig:
    """Neighbourhood fraction ``p`` and interference sets for local broadcast.

    ``interference[m]`` lists the message types whose transmissions collide
    with ``m``; it always contains ``m`` itself.  ``d = N * p`` is the mean
    neighbourhood size.
    """

    p: float
    interference: dict = field(default_factory=dict)
    N: int = 1

    def __post_init__(self):
        if not (isinstance(self.p, (int, float)) and 0 < self.p <= 1):
            raise ParameterError(f"p must lie in (0, 1], got {self.p!r}")
        if not (isinstance(self.N, int) and self.N >= 1):
            raise ParameterError(f"N must be a positive integer, got {self.N!r}")
        frozen = {}
        for m, others in self.interference.items():
            others = frozenset(others)
            if m not in others:
                raise ModelError(f"interference set of {m!r} must contain {m!r} itself")
            frozen[m] = others
        object.__setattr__(self, "interference", frozen)

    @property
    def d(self):
        return self.N * self.p

    def interferers(self, m):
        return self.interference.get(m, frozenset([m]))

    def with_size(self, N):
        """Same neighbourhood size ``d`` at system size ``N``."""
        return BroadcastConfig(p=self.d / N, interference=dict(self.interference), N=N)

    def to_json(self):
        return {"p": self.p,
                "interference": {m: sorted(v) for m, v in sorted(self.interference.items())}}


@dataclass(frozen=True)
class ModelBundle:
    component: Component
    channel: ChannelModel
    N: int
    initial: dict
    broadcast: BroadcastConfig | None = None

    @property
    def x0(self):
        return initial_occupancy(self.component, self.initial)

    def to_json(self):
        out = {
            "states": list(self.component.states),
            "initial": dict(self.initial),
            "transitions": [t.to_json() for t in self.component.transitions],
            "channel": self.channel.to_json(),
            "N": self.N,
        }
        if self.broadcast is not None:
            out["broadcast"] = self.broadcast.to_json()
        return out

    def dumps(self):
        return json.dumps(self.to_json(), indent=2)

    def digest(self):
        """SHA-256 of the canonical JSON form."""
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def initial_occupancy(component, assignments):
    """Occupancy vector from ``{state: fraction}``; missing states get 0."""
    x = np.zeros(component.n)
    for state, frac in assignments.items():
        if not (isinstance(frac, (int, float)) and math.isfinite(frac) and frac >= 0):
            raise ParameterError(f"initial fraction of {state!r} must be >= 0, got {frac!r}")
        x[component.index(state)] = frac
    total = math.fsum(x)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ParameterError(f"invalid initial condition: fractions sum to {total!r}, not 1")
    return x


def validate_broadcast_restriction(component):
    """States that can both send and receive the same message type.

    Returns a list of ``(state, message)`` pairs; empty means the component
    is admissible for the broadcast transformation.
    """
    if component.family == SINGLE_RECEIVER:
        raise ModelError("broadcast restriction is inapplicable to a single-receiver model")
    sends, receives = set(), set()
    for t in component.transitions:
        if t.action.kind == "send":
            sends.add((t.source, t.action.message))
        elif t.action.kind == "receive":
            receives.add((t.source, t.action.message))
    clash = sends & receives
    return sorted(clash, key=lambda sm: (component.index(sm[0]), sm[1]))


_TOP_KEYS = {"states", "initial", "transitions", "channel", "N", "broadcast"}
_REQUIRED = {"states", "initial", "transitions", "channel", "N"}


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ModelError(f"{where} must be a JSON object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ModelError(f"unknown field(s) in {where}: {', '.join(sorted(extra))}")
    missing = set(required) - set(obj)
    if missing:
        raise ModelError(f"missing field(s) in {where}: {', '.join(sorted(missing))}")


def _parse_channel(obj):
    _check_keys(obj, {"beta", "z", "spatial"}, "channel", {"beta", "z", "spatial"})
    spatial = obj["spatial"]
    if spatial == "uniform":
        dist = Uniform()
    elif isinstance(spatial, dict) and set(spatial) == {"lognormal"}:
        inner = spatial["lognormal"]
        _check_keys(inner, {"sigma_d"}, "channel.spatial.lognormal", {"sigma_d"})
        dist = LogNormal(inner["sigma_d"])
    else:
        raise ModelError(f"channel.spatial must be 'uniform' or {{'lognormal': ...}}, got {spatial!r}")
    return ChannelModel(beta=obj["beta"], z=obj["z"], spatial=dist)


def _parse_transition(obj, k):
    where = f"transitions[{k}]"
    _check_keys(obj, {"from", "to", "action", "rate"}, where, {"from", "to", "action", "rate"})
    action = obj["action"]
    _check_keys(action, {"kind", "message", "name"}, where + ".action", {"kind"})
    rate = obj["rate"]
    if rate is not None and (isinstance(rate, bool) or not isinstance(rate, (int, float))):
        raise ModelError(f"{where}.rate must be a number or null")
    return Transition(obj["from"], obj["to"],
                      ActionKind(action["kind"], action.get("message"), action.get("name")),
                      None if rate is None else float(rate))


def model_from_dict(data):
    _check_keys(data, _TOP_KEYS, "model", _REQUIRED)
    states = data["states"]
    if not (isinstance(states, list) and all(isinstance(s, str) for s in states)):
        raise ModelError("states must be an array of strings")
    N = data["N"]
    if isinstance(N, bool) or not isinstance(N, int) or N < 1:
        raise ModelError(f"N must be a positive integer, got {N!r}")
    initial = data["initial"]
    if not isinstance(initial, dict) or not initial:
        raise ModelError("initial must be a non-empty object state -> fraction")
    transitions = data["transitions"]
    if not isinstance(transitions, list):
        raise ModelError("transitions must be an array")
    parsed = tuple(_parse_transition(t, k) for k, t in enumerate(transitions))
    start = next((s for s in states if initial.get(s, 0) > 0), states[0] if states else "")
    component = Component(tuple(states), parsed, start)
    try:
        initial_occupancy(component, initial)
    except ParameterError as exc:
        raise ModelError(str(exc)) from None
    broadcast = None
    if "broadcast" in data:
        b = data["broadcast"]
        _check_keys(b, {"p", "interference"}, "broadcast", {"p"})
        interference = b.get("interference", {})
        if not isinstance(interference, dict):
            raise ModelError("broadcast.interference must be an object m -> [m, ...]")
        known = set(component.message_types())
        for m, others in interference.items():
            if not isinstance(others, list):
                raise ModelError(f"interference set of {m!r} must be an array")
            for o in [m, *others]:
                if o not in known:
                    raise ModelError(f"interference set mentions unknown message type {o!r}")
        broadcast = BroadcastConfig(p=b["p"], interference=interference, N=N)
    if component.family == BROADCAST and broadcast is None:
        raise ModelError("send/receive models need a 'broadcast' section")
    if component.family == SINGLE_RECEIVER and broadcast is not None:
        raise ModelError("'broadcast' section is only valid for send/receive models")
    return ModelBundle(component, _parse_channel(data["channel"]), N, dict(initial), broadcast)


def parse_model(text):
    """Parse and validate the JSON model file format."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(exc.msg, line=exc.lineno, column=exc.colno) from None
    try:
        return model_from_dict(data)
    except ModelError:
        raise
    except (MfwsnError, TypeError, KeyError) as exc:
        raise ModelError(str(exc)) from None


def bundled_models():
    return sorted(p.name for p in resources.files("mfwsn.models").iterdir()
                  if p.name.endswith(".json"))


def load_model(path):
    """Load a model from ``path`` or from a bundled model name like ``aloha3.json``."""
    p = Path(path)
    if p.is_file():
        return parse_model(p.read_text())
    res = resources.files("mfwsn.models").joinpath(p.name)
    if res.is_file():
        return parse_model(res.read_text())
    raise ModelError(f"no such model file: {path}")
