import numpy as np
import pytest

from strat_lab.errors import StepSizeUnderflow
from strat_lab.integrator import dopri5


def test_exponential_decay_hits_samples():
    lam = -1.3 + 2.0j
    ts = np.linspace(0, 5, 11)
    sol = dopri5(lambda t, y: lam * y, np.array([1.0 + 0j]), ts, rtol=1e-11, atol=1e-14)
    assert np.array_equal(sol.t, ts)
    assert np.max(np.abs(sol.y[:, 0] - np.exp(lam * ts))) < 1e-10


def test_batched_members_meet_tolerance():
    rates = np.array([-0.1, -1.0, -10.0])
    ts = np.linspace(0, 2, 5)
    sol = dopri5(lambda t, y: rates * y, np.ones(3, complex), ts, rtol=1e-10, atol=1e-14)
    ref = np.exp(np.outer(ts, rates))
    # global error stays within a small multiple of the mixed tolerance per member
    assert np.max(np.abs(sol.y - ref) / (1e-14 + 1e-10 * np.abs(ref))) < 10


def test_time_dependent_oracle():
    # y' = 2 t y, y = exp(t^2)
    ts = np.linspace(0, 2, 9)
    sol = dopri5(lambda t, y: 2 * t * y, np.array([1.0 + 0j]), ts, rtol=1e-12, atol=1e-14)
    assert np.max(np.abs(sol.y[:, 0] / np.exp(ts**2) - 1)) < 1e-10


def test_tolerance_controls_error():
    lam = -3.0
    ts = np.array([0.0, 4.0])
    errs = []
    for tol in (1e-6, 1e-9):
        sol = dopri5(lambda t, y: lam * y + np.cos(t), np.array([0j]), ts, rtol=tol, atol=tol)
        exact = (np.sin(4) * 1 - lam * np.cos(4)) / (1 + lam**2) + lam / (1 + lam**2) * np.exp(lam * 4)
        errs.append(abs(sol.y[-1, 0] - exact))
    assert errs[1] < errs[0] and errs[1] < 1e-8


def test_zero_state_stays_zero():
    sol = dopri5(lambda t, y: -y, np.zeros(2, complex), np.linspace(0, 1, 3))
    assert np.all(sol.y == 0)


def test_step_underflow():
    # blows up at t = 1, forcing ever smaller steps
    with pytest.raises(StepSizeUnderflow):
        dopri5(lambda t, y: y**2, np.array([1.0 + 0j]), [0.0, 2.0], rtol=1e-10, atol=1e-12)


def test_rejects_bad_sample_times():
    with pytest.raises(ValueError):
        dopri5(lambda t, y: y, np.ones(1), [0.0, 0.0])


def test_matches_scipy_dop853_on_mode_system():
    from scipy.integrate import solve_ivp
    from strat_lab.nonzero import _full_rhs
    from strat_lab.symbols import ModeIndex, PhysParams

    fun = _full_rhs(ModeIndex(1, 1, 2.0), PhysParams(0.05, 0.03, 1.5))
    y0 = np.array([-5.0, 0.3 - 0.2j, -2.0 - 0.4j, 0.4j])
    ts = np.linspace(0, 8, 17)
    ours = dopri5(fun, y0, ts, rtol=1e-12, atol=1e-14)
    ref = solve_ivp(fun, (0, 8), y0, method="DOP853", t_eval=ts, rtol=1e-13, atol=1e-15)
    assert np.max(np.abs(ours.y - ref.y.T)) <= 1e-9 * np.max(np.abs(y0))
