from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfwsn.capture import capture_model
from mfwsn.errors import ModelError, NumericError
from mfwsn.model import ActionKind, BroadcastConfig, Component, Transition, load_model
from mfwsn.pctmc import (SENDER_COUNT, LinearRate, ReceiveRate, build_pctmc,
                         check_density_dependence, transform_broadcast,
                         transform_single_receiver)

from conftest import simplex_points

R_O, R_R, R_SEND = 0.0055, 0.08, 1.0


def table1_rhs(x, N, q):
    """ALOHA mean-field system, transcribed by hand."""
    xO, xT, xR = x
    qq = q(N * xT)
    return np.array([
        -R_O * xO + R_SEND * qq / N,
        -R_SEND * (xT - qq / N) - R_SEND * qq / N + R_O * xO + R_R * xR,
        -R_R * xR + R_SEND * (xT - qq / N),
    ])


def table2_rhs(x, d, q, r_send=100.0, r_proc=1.0, r_to=30.0):
    """Neighbourhood-discovery mean-field system, transcribed by hand."""
    x0, x1, x2, x3, x4, x5 = x
    tot = x1 + x3 + x4 + x5
    qq = q(d * tot)
    msg = (x1 + x3) / tot * qq if tot > 0 else 0.0
    ack = (x4 + x5) / tot * qq if tot > 0 else 0.0
    return np.array([
        -r_proc * x0 + r_send * x4 - r_send * msg * x0 + r_send * ack * x2,
        -r_send * x1 + r_proc * x0,
        -r_to * x2 + r_send * x1 + r_send * x3 + r_send * x5 - r_send * msg * x2
        - r_send * ack * x2,
        r_to * x2 - r_send * x3,
        -r_send * x4 + r_send * msg * x0,
        -r_send * x5 + r_send * msg * x2,
    ])


@pytest.mark.parametrize("N", [10, 500])
def test_table1_equivalence(aloha, N):
    pc = build_pctmc(aloha, N=N)
    q = capture_model(aloha.channel)
    for x in simplex_points(3, 100, seed=N):
        assert np.max(np.abs(pc.vector_field(x) - table1_rhs(x, N, q))) < 1e-12


def test_table2_equivalence(discovery):
    pc = build_pctmc(discovery)
    q = capture_model(discovery.channel)
    for x in simplex_points(6, 100, seed=3):
        assert np.max(np.abs(pc.vector_field(x) - table2_rhs(x, 25.0, q))) < 1e-12


def test_sender_count_convention(discovery):
    pc = build_pctmc(discovery, convention=SENDER_COUNT)
    q = capture_model(discovery.channel)
    x = simplex_points(6, 1, seed=9)[0]
    by_label = {(t.label, t.source): r for t, r in zip(pc.transitions, pc.rates(x))}
    tot = x[1] + x[3] + x[4] + x[5]
    expect = 500 * 100 * (x[1] + x[3]) / tot * q(25 * (x[1] + x[3])) * x[0]
    assert by_label[("receive(msg)", 0)] == pytest.approx(expect, rel=1e-13)


def test_self_loop_dropped(discovery):
    pc = build_pctmc(discovery)
    assert len(pc.transitions) == 9
    assert all(t.source != t.target for t in pc.transitions)


@pytest.mark.parametrize("name", ["aloha3.json", "discovery6.json"])
def test_change_vectors(name):
    pc = build_pctmc(load_model(name))
    for t in pc.transitions:
        assert abs(t.subtract.sum() - 1 / pc.N) < 1e-15
        nu = t.add - t.subtract
        assert abs(nu.sum()) < 1e-15
        assert sorted(t.change.tolist()) == [-1] + [0] * (pc.n - 2) + [1]


@pytest.mark.parametrize("name", ["aloha3.json", "discovery6.json"])
def test_rates_nonnegative(name):
    pc = build_pctmc(load_model(name))
    rates = np.array([pc.rates(x) for x in simplex_points(pc.n, 1000, seed=1)])
    assert np.all(rates >= 0) and np.all(np.isfinite(rates))


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.sampled_from([10, 90, 500]))
def test_capture_failure_split_exhaustive(xT, N):
    aloha = load_model("aloha3.json")
    pc = build_pctmc(aloha, N=N)
    x = np.array([1 - xT, xT, 0.0])
    r = dict(zip((t.label for t in pc.transitions), pc.rates(x)))
    assert r["capture"] + r["failure"] == pytest.approx(R_SEND * N * xT, rel=1e-12, abs=1e-12)


def test_no_interferers_zero_receive(discovery):
    pc = build_pctmc(discovery)
    x = np.array([0.5, 0, 0.5, 0, 0, 0])
    for t, r in zip(pc.transitions, pc.rates(x)):
        if t.label.startswith("receive"):
            assert r == 0.0


def test_unpaired_capture_rejected(aloha):
    comp = aloha.component
    kept = tuple(t for t in comp.transitions if t.action.kind != "failure")
    with pytest.raises(ModelError):
        transform_single_receiver(replace(comp, transitions=kept), 10, channel=aloha.channel)


def test_mismatched_capture_rate_rejected(aloha):
    comp = aloha.component
    ts = tuple(replace(t, rate=2.0) if t.action.kind == "failure" else t
               for t in comp.transitions)
    with pytest.raises(ModelError):
        transform_single_receiver(replace(comp, transitions=ts), 10, channel=aloha.channel)


def test_receive_without_sender_rejected(aloha):
    comp = Component(("A", "B"), (
        Transition("A", "B", ActionKind("receive", "msg"), None),
        Transition("B", "A", ActionKind("send", "ack"), 1.0),
    ), "A")
    with pytest.raises(ModelError, match="no matching"):
        transform_broadcast(comp, BroadcastConfig(0.5, {}, 10), channel=aloha.channel)


def test_non_finite_rate_rejected(aloha):
    with pytest.raises(NumericError):
        transform_single_receiver(aloha.component, 10, q=lambda i: float("inf"))


def test_wrong_family_rejected(aloha, discovery):
    with pytest.raises(ModelError):
        transform_single_receiver(discovery.component, 10, channel=aloha.channel)
    with pytest.raises(ModelError):
        transform_broadcast(aloha.component, BroadcastConfig(0.5, {}, 10), channel=aloha.channel)
    with pytest.raises(ModelError):
        build_pctmc(discovery, convention="nearest")


def test_listing_and_text(aloha, discovery):
    pc = build_pctmc(aloha)
    listing = pc.listing()
    assert [e["label"] for e in listing] == ["generate", "capture", "failure", "resend"]
    assert listing[1]["change"] == [1, -1, 0]
    assert pc.ode_text().count("d x_") == 3
    assert build_pctmc(discovery).ode_text().count("d x_") == 6


def discovery_at(N, d=5.0):
    b = load_model("discovery6.json")
    cfg = BroadcastConfig(d / N, dict(b.broadcast.interference), N)
    return transform_broadcast(b.component, cfg, channel=b.channel)


def test_density_dependence_passes():
    report = check_density_dependence(discovery_at, [10, 100, 1000],
                                      simplex_points(6, 50, seed=5))
    assert report.passed, report.failing()


def test_density_dependence_catches_corruption():
    def corrupted(N):
        pc = discovery_at(N)
        t0 = pc.transitions[0]
        bad = replace(t0, rate_fn=LinearRate(1.0 * N, t0.source, N))
        return replace(pc, transitions=(bad,) + pc.transitions[1:])

    report = check_density_dependence(corrupted, [10, 100, 1000],
                                      simplex_points(6, 50, seed=5))
    assert not report.passed
    assert report.failing() == [discovery_at(10).transitions[0].label]


def test_density_dependence_structural_mismatch():
    def build(N):
        pc = discovery_at(N)
        return pc if N == 10 else replace(pc, transitions=pc.transitions[1:])

    with pytest.raises(ModelError):
        check_density_dependence(build, [10, 100], simplex_points(6, 3))
