import numpy as np
import pytest
from hypothesis import given, strategies as st

from densityridge import InputError, IvpProblem, NumericalError, SolverOptions, Termination, integrate, integrate_batch


def test_constant_field_keeps_state():
    c = np.array([1.5, -2.0])
    calls = {"n": 0}

    def stop(y, f):
        calls["n"] += 1
        return calls["n"] > 5

    tr = integrate(IvpProblem(lambda y: np.zeros_like(y), c, stop))
    assert tr.terminated == Termination.CONVERGED
    assert len(tr) > 1
    np.testing.assert_array_equal(tr.states, np.tile(c, (len(tr), 1)))


def test_exponential_growth_to_t_one():
    # local error control: the global error after several steps exceeds a
    # single step's tolerance, so the 1e-6 target needs tighter settings
    opts = SolverOptions(abs_tol=1e-7, rel_tol=1e-7)
    tr = integrate(IvpProblem(lambda y: y, [1.0], t_end=1.0, options=opts))
    assert tr.terminated == Termination.CONVERGED
    assert tr.times[-1] == 1.0
    assert tr.final[0] == pytest.approx(np.e, abs=1e-6)
    default = integrate(IvpProblem(lambda y: y, [1.0], t_end=1.0))
    assert default.final[0] == pytest.approx(np.e, abs=5e-6)


@pytest.mark.parametrize("field,y0,exact", [
    (lambda y: y, [1.0], [np.e]),
    (lambda y: -y, [1.0, 2.0], [np.exp(-1), 2 * np.exp(-1)]),
])
def test_halving_tolerances_never_hurts(field, y0, exact):
    errs = []
    for tol in (1e-4, 5e-5, 2.5e-5, 1.25e-5, 1e-6, 5e-7):
        tr = integrate(IvpProblem(field, y0, t_end=1.0, options=SolverOptions(abs_tol=tol, rel_tol=tol)))
        errs.append(np.linalg.norm(tr.final - exact))
    pairs = [(errs[0], errs[1]), (errs[1], errs[2]), (errs[2], errs[3]), (errs[4], errs[5])]
    assert all(b <= a for a, b in pairs)


def test_exponential_decay_two_components():
    tr = integrate(IvpProblem(lambda y: -y, [1.0, 2.0], t_end=1.0))
    np.testing.assert_allclose(tr.final, [np.exp(-1), 2 * np.exp(-1)], atol=1e-6)


def test_harmonic_oscillator_period():
    def f(y):
        return np.array([y[1], -y[0]])

    tr = integrate(IvpProblem(f, [1.0, 0.0], t_end=2 * np.pi, options=SolverOptions(h_max=0.5)))
    np.testing.assert_allclose(tr.final, [1.0, 0.0], atol=1e-5)


def test_times_increase_and_states_recorded():
    tr = integrate(IvpProblem(lambda y: -y, [1.0], t_end=3.0))
    assert tr.times[0] == 0.0
    assert np.all(np.diff(tr.times) > 0)
    assert len(tr.states) == len(tr.times)


def test_stop_at_initial_state():
    tr = integrate(IvpProblem(lambda y: y, [1.0], lambda y, f: True))
    assert len(tr) == 1
    assert tr.terminated == Termination.CONVERGED


def test_max_steps_reported():
    tr = integrate(IvpProblem(lambda y: y, [1.0], lambda y, f: False, options=SolverOptions(max_steps=5)))
    assert tr.terminated == Termination.MAX_STEPS


def test_non_finite_field_raises_with_state():
    with pytest.raises(NumericalError):
        integrate(IvpProblem(lambda y: np.full_like(y, np.nan), [1.0], t_end=1.0))


def test_non_finite_field_flag_mode():
    def f(s):
        out = -s.copy()
        out[s[:, 0] > 0.5] = np.nan
        return out

    trs = integrate_batch(f, [[0.1], [1.0]], options=SolverOptions(), t_end=1.0, on_error="flag")
    assert trs[0].terminated == Termination.CONVERGED
    assert trs[1].terminated == Termination.NUMERICAL_ERROR


def test_option_validation():
    with pytest.raises(InputError):
        SolverOptions(abs_tol=0.0)
    with pytest.raises(InputError):
        SolverOptions(h_min=1.0, h_init=0.1)
    with pytest.raises(InputError):
        SolverOptions(max_steps=0)
    with pytest.raises(InputError):
        integrate_batch(lambda s: s, [1.0, 2.0])


def test_record_false_keeps_ends():
    full = integrate_batch(lambda s: -s, [[1.0]], t_end=2.0)[0]
    short = integrate_batch(lambda s: -s, [[1.0]], t_end=2.0, record=False)[0]
    assert len(short.states) == 2
    np.testing.assert_array_equal(short.states[-1], full.states[-1])


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(0.2, 2.0))
def test_batch_rows_match_single_runs(values, rate):
    starts = np.array(values)[:, None]
    batch = integrate_batch(lambda s: -rate * s, starts, t_end=1.0)
    for v, tr in zip(values, batch):
        single = integrate(IvpProblem(lambda y: -rate * y, [v], t_end=1.0))
        np.testing.assert_array_equal(tr.states, single.states)
        np.testing.assert_array_equal(tr.times, single.times)


@given(st.floats(-2, 2), st.floats(0.1, 3.0))
def test_linear_decay_accuracy(y0, rate):
    tr = integrate(IvpProblem(lambda y: -rate * y, [y0], t_end=1.0))
    assert tr.final[0] == pytest.approx(y0 * np.exp(-rate), abs=1e-5)
