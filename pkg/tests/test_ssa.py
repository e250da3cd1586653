import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfwsn.errors import ParameterError
from mfwsn.model import load_model
from mfwsn.odes import Trajectory, integrate
from mfwsn.pctmc import build_pctmc
from mfwsn.ssa import (StochasticTrajectory, convergence_study, lattice_counts,
                       round_to_lattice, simulate, sup_error)


@pytest.fixture(scope="module")
def aloha_pc(aloha):
    return build_pctmc(aloha, N=200)


def test_same_seed_same_path(aloha_pc):
    a = simulate(aloha_pc, [0, 1, 0], 30, seed=11)
    b = simulate(aloha_pc, [0, 1, 0], 30, seed=11)
    c = simulate(aloha_pc, [0, 1, 0], 30, seed=12)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.times[:50], c.times[:50])


@pytest.mark.parametrize("name", ["aloha3.json", "discovery6.json"])
def test_jumps_follow_enabled_transitions(name):
    pc = build_pctmc(load_model(name), N=100)
    x0 = np.zeros(pc.n)
    x0[0], x0[-1] = 0.5, 0.5
    traj = simulate(pc, x0, 5.0, seed=4)
    assert traj.times.size > 10
    assert np.all(np.diff(traj.times) > 0)
    assert np.all(traj.counts.sum(axis=1) == pc.N)
    assert traj.counts.min() >= 0
    steps = np.diff(traj.counts, axis=0)
    for step, j, before in zip(steps, traj.labels, traj.counts[:-1]):
        assert np.array_equal(step, pc.transitions[j].change)
        assert before[pc.transitions[j].source] > 0


def test_first_jump_is_generation(aloha_pc):
    traj = simulate(aloha_pc, [1, 0, 0], 10, seed=0)
    assert aloha_pc.transitions[traj.labels[0]].label == "generate"
    assert traj.counts[1].tolist() == [199, 1, 0]


def test_off_lattice_rejected(aloha_pc):
    with pytest.raises(ParameterError):
        simulate(aloha_pc, [1 / 3, 1 / 3, 1 / 3], 1)
    with pytest.raises(ParameterError):
        lattice_counts([0.5, 0.6, -0.1], 10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=6).filter(lambda w: sum(w) > 0.01),
       st.integers(1, 5000))
def test_round_to_lattice(w, N):
    x = np.array(w) / sum(w)
    y = round_to_lattice(x, N)
    counts = lattice_counts(y, N)
    assert counts.sum() == N
    assert np.max(np.abs(y - x)) <= 1 / N + 1e-12


def test_step_interpolation_right_continuous():
    traj = StochasticTrajectory(np.array([0.0, 1.0, 2.5]),
                                np.array([[2, 0], [1, 1], [0, 2]]), 2)
    got = traj.at(np.array([0.0, 0.999, 1.0, 2.0, 2.5, 9.0]))
    assert got[:, 1].tolist() == [0.0, 0.0, 0.5, 0.5, 1.0, 1.0]


def test_sup_error_by_hand():
    traj = StochasticTrajectory(np.array([0.0, 1.0]), np.array([[4, 0], [3, 1]]), 4)
    ref = Trajectory(np.array([0.0, 0.5, 1.0, 1.5]),
                     np.array([[1, 0], [0.9, 0.1], [0.8, 0.2], [0.6, 0.4]]))
    # deviations per grid point: 0, 0.1, 0.05, 0.15
    assert sup_error(traj, ref) == pytest.approx(0.15)


def test_mean_matches_ode(aloha):
    N, reps, t = 1000, 500, 50.0
    pc = build_pctmc(aloha, N=N)
    x0 = np.array([1.0, 0, 0])
    samples = np.array([simulate(pc, x0, t, seed=np.random.SeedSequence(5, spawn_key=(r,)))
                        .at(np.array([t]))[0, 1] for r in range(reps)])
    ode = integrate(pc, x0, t).final[1]
    se = samples.std(ddof=1) / np.sqrt(reps)
    assert abs(samples.mean() - ode) < 3 * se


def test_convergence_study_thread_independent(aloha):
    build = lambda N: build_pctmc(aloha, N=N)
    kw = dict(Ns=[30, 60], x0=[0, 1, 0], T=20.0, replications=3, seed=9, grid_points=101)
    serial = convergence_study(build, threads=1, **kw)
    parallel = convergence_study(build, threads=2, **kw)
    assert np.array_equal(serial.errors, parallel.errors)
    assert np.all(serial.errors >= 0)
    assert serial.metadata()["seed"] == 9
    assert [r[0] for r in serial.rows()] == [30, 60]


def test_convergence_study_validates(aloha):
    build = lambda N: build_pctmc(aloha, N=N)
    with pytest.raises(ParameterError):
        convergence_study(build, [50, 50], [1, 0, 0], 1.0, 2)
    with pytest.raises(ParameterError):
        convergence_study(build, [50], [1, 0, 0], 1.0, 0)
