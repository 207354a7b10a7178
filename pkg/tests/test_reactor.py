"""Exothermic reactor observer: coordinates, gain algebra, error system."""

import numpy as np
import pytest

from invobs.groupcore import DomainError, observer_rhs
from invobs.reactor import (ReactorInput, ReactorObserverGains, ReactorParams,
                            arrhenius, reactor_dynamics, reactor_equilibrium,
                            reactor_error_dynamics, reactor_from_base_fiber,
                            reactor_gain_function, reactor_log_dynamics,
                            reactor_lyapunov, reactor_observer_log_rhs,
                            reactor_observer_rhs_global, reactor_state_error,
                            reactor_system, reactor_to_base_fiber,
                            reactor_validate_state)

PARAMS = ReactorParams()
INPUT = ReactorInput()
GAINS = ReactorObserverGains()


def _rand_state(rng):
    return np.array([rng.uniform(0.2, 4.0), rng.uniform(0.05, 3.0),
                     rng.uniform(290.0, 360.0)])


def test_equilibrium_zeroes_dynamics():
    eq = reactor_equilibrium(PARAMS, INPUT)
    assert eq[0] == pytest.approx(1.0)
    rhs = reactor_dynamics(eq, INPUT, PARAMS)
    assert np.max(np.abs(rhs)) < 1e-6
    assert eq[1] == pytest.approx(0.34481464, rel=1e-6)
    assert eq[2] == pytest.approx(328.19959336, rel=1e-8)


def test_equilibrium_rejects_bad_arguments():
    with pytest.raises(ValueError):
        reactor_equilibrium(PARAMS, INPUT, x_in=0.0)
    with pytest.raises(ValueError):
        reactor_equilibrium(PARAMS, ReactorInput(D=0.0))


def test_base_fiber_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(30):
        s = _rand_state(rng)
        back = reactor_from_base_fiber(reactor_to_base_fiber(s))
        assert np.allclose(back, s, rtol=1e-13)
    with pytest.raises(DomainError):
        reactor_to_base_fiber(np.array([1.0, -0.1, 300.0]))


def test_log_dynamics_is_chain_rule_of_plant():
    rng = np.random.default_rng(1)
    for _ in range(30):
        s = _rand_state(rng)
        nat = reactor_dynamics(s, INPUT, PARAMS)
        logd = reactor_log_dynamics(reactor_to_base_fiber(s), INPUT, PARAMS)
        assert logd[0] == pytest.approx(nat[1] / s[1], rel=1e-12, abs=1e-14)
        assert logd[1] == pytest.approx(nat[1] / s[1] - nat[0] / s[0],
                                        rel=1e-12, abs=1e-14)
        assert logd[2] == pytest.approx(nat[2], rel=1e-12, abs=1e-12)


def test_observer_log_rhs_is_chain_rule_of_observer():
    rng = np.random.default_rng(2)
    for _ in range(30):
        sh = _rand_state(rng)
        y = sh[2] + rng.uniform(-30.0, 30.0)
        nat = reactor_observer_rhs_global(sh, INPUT, y, GAINS, PARAMS)
        logd = reactor_observer_log_rhs(reactor_to_base_fiber(sh), INPUT, y,
                                        GAINS, PARAMS)
        assert logd[0] == pytest.approx(nat[1] / sh[1], rel=1e-10, abs=1e-12)
        assert logd[1] == pytest.approx(nat[1] / sh[1] - nat[0] / sh[0],
                                        rel=1e-10, abs=1e-12)
        assert logd[2] == pytest.approx(nat[2], rel=1e-10, abs=1e-10)


def test_gain_function_reproduces_global_observer():
    sys = reactor_system()
    gain = reactor_gain_function(GAINS, PARAMS)
    inp4 = np.array([PARAMS.c, INPUT.D, INPUT.T_in, INPUT.v])
    rng = np.random.default_rng(3)
    for _ in range(50):
        sh = _rand_state(rng)
        y = np.array([sh[2] + rng.uniform(-30.0, 30.0)])
        lhs = observer_rhs(sys, gain, sh, inp4, y)
        ref = reactor_observer_rhs_global(sh, INPUT, y[0], GAINS, PARAMS)
        scale = max(1.0, np.max(np.abs(ref)))
        assert np.max(np.abs(lhs - ref)) / scale < 1e-9


def test_state_error_scale_invariant_and_zero_at_truth():
    rng = np.random.default_rng(4)
    for _ in range(30):
        st, sh = _rand_state(rng), _rand_state(rng)
        e = reactor_state_error(st, sh)
        for g in (1e-3, 0.7, 1e3):
            scaled = reactor_state_error(st * np.array([g, g, 1.0]),
                                         sh * np.array([g, g, 1.0]))
            assert np.allclose(scaled, e, rtol=1e-9, atol=1e-12)
        assert np.allclose(reactor_state_error(st, st), 0.0, atol=1e-15)
        logs = reactor_to_base_fiber(sh) - reactor_to_base_fiber(st)
        assert np.allclose(e, logs, atol=1e-12)


def test_error_dynamics_equals_observer_minus_truth():
    # both sides in log coordinates, driven by the true temperature
    rng = np.random.default_rng(5)
    for _ in range(50):
        st = _rand_state(rng)
        eta = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2),
                        rng.uniform(-40, 40)])
        lt = reactor_to_base_fiber(st)
        lh = lt + eta
        diff = (reactor_observer_log_rhs(lh, INPUT, st[2], GAINS, PARAMS)
                - reactor_log_dynamics(lt, INPUT, PARAMS))
        ref = reactor_error_dynamics(eta, lt[0], lt[1], st[2], INPUT.D,
                                     GAINS, PARAMS)
        scale = max(1.0, np.max(np.abs(ref)))
        assert np.max(np.abs(diff - ref)) / scale < 1e-10


def test_lyapunov_floor_and_zero():
    assert reactor_lyapunov(0.0, 0.0, GAINS.beta) == pytest.approx(1.0)
    rng = np.random.default_rng(6)
    zt = rng.normal(0, 2, 100)
    tt = rng.normal(0, 20, 100)
    assert np.all(reactor_lyapunov(zt, tt, GAINS.beta) >= 1.0)


def test_validate_state_raises():
    reactor_validate_state(np.array([1.0, 0.3, 330.0]))
    with pytest.raises(DomainError):
        reactor_validate_state(np.array([0.0, 0.3, 330.0]))
    with pytest.raises(DomainError):
        reactor_validate_state(np.array([1.0, -0.1, 330.0]))
    with pytest.raises(DomainError):
        reactor_validate_state(np.array([1.0, 0.3, -5.0]))
    with pytest.raises(DomainError):
        reactor_validate_state(np.array([np.nan, 0.3, 330.0]))


def test_parameter_validation():
    with pytest.raises(ValueError):
        ReactorParams(k=-1.0)
    with pytest.raises(ValueError):
        ReactorInput(D=-0.1)
    with pytest.raises(ValueError):
        ReactorObserverGains(beta=0.0)


def test_arrhenius_monotone():
    temps = np.array([300.0, 320.0, 340.0, 360.0])
    r = arrhenius(temps, PARAMS)
    assert np.all(np.diff(r) > 0)
    assert np.all(r > 0)
