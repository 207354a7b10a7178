"""Planar vehicle observer: error geometry, autonomy, convergence."""

import numpy as np
import pytest

from invobs.car import (CarGains, car_error_dynamics, car_gain_function,
                        car_output_error, car_state_error, car_system,
                        default_car_input, wrap_angle)
from invobs.sim import simulate_ode, simulate_pair


def _embed_error(truth, eta):
    """Estimate whose invariant error relative to truth equals eta."""
    x, y, theta = truth
    th = wrap_angle(theta + eta[2])
    c, s = np.cos(th), np.sin(th)
    return np.array([x + c * eta[0] - s * eta[1],
                     y + s * eta[0] + c * eta[1], th])


def test_wrap_angle():
    assert wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(0.3) == pytest.approx(0.3)
    assert wrap_angle(2 * np.pi + 0.3) == pytest.approx(0.3)


def test_state_error_embed_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(50):
        truth = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5),
                          rng.uniform(-np.pi, np.pi)])
        eta = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3),
                        rng.uniform(-3, 3)])
        est = _embed_error(truth, eta)
        back = car_state_error(truth, est)
        assert np.allclose(back[:2], eta[:2], atol=1e-12)
        assert back[2] == pytest.approx(wrap_angle(eta[2]), abs=1e-12)


def test_state_error_invariant_under_rigid_motion():
    sys = car_system()
    rng = np.random.default_rng(3)
    for _ in range(50):
        x, xh = sys.random_state(rng), sys.random_state(rng)
        g = sys.random_group(rng)
        e0 = car_state_error(x, xh)
        e1 = car_state_error(sys.act_state(g, x), sys.act_state(g, xh))
        assert np.allclose(e0, e1, atol=1e-10)


def test_output_error_matches_state_error_head():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5),
                      rng.uniform(-np.pi, np.pi)])
        xh = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5),
                       rng.uniform(-np.pi, np.pi)])
        u = np.array([1.0, 0.2])
        e = car_output_error(xh, u, x[:2])
        assert np.allclose(e, car_state_error(x, xh)[:2], atol=1e-13)


def test_error_dynamics_ignores_steering_rate():
    gains = CarGains()
    eta = np.array([0.4, -1.2, 0.9])
    f1 = car_error_dynamics(eta, np.array([1.3, 0.7]), gains)
    f2 = car_error_dynamics(eta, np.array([1.3, -2.0]), gains)
    assert np.allclose(f1, f2, atol=0.0)


def test_error_dynamics_batch_matches_loop():
    gains = CarGains(a=1.2, b=0.8, c=1.5)
    rng = np.random.default_rng(5)
    etas = rng.normal(0, 1.5, (3, 7))
    inp = np.array([0.9, 0.1])
    batch = car_error_dynamics(etas, inp, gains)
    for k in range(7):
        assert np.allclose(batch[:, k],
                           car_error_dynamics(etas[:, k], inp, gains),
                           atol=1e-14)


def test_antipodal_error_is_equilibrium():
    gains = CarGains(a=1.0, b=1.0, c=1.0)
    eta = np.array([2.0 / gains.a, 0.0, np.pi])
    for t in (0.0, 3.7, 11.0):
        rhs = car_error_dynamics(eta, default_car_input(t), gains)
        assert np.max(np.abs(rhs)) < 1e-12


def test_error_autonomy_different_truths():
    # same inputs and same initial error, truths far apart: identical errors
    sys = car_system()
    gains = CarGains()
    gainfn = car_gain_function(gains)
    eta0 = np.array([1.0, -0.5, 1.2])
    truths = [np.array([0.0, 0.0, 0.0]), np.array([40.0, -15.0, 2.5])]
    errs = []
    for x0 in truths:
        res = simulate_pair(sys, gainfn, x0, _embed_error(x0, eta0),
                            default_car_input, t_end=8.0, dt=0.005)
        seq = np.array([car_state_error(xt, xh)
                        for xt, xh in zip(res.truth, res.estimate)])
        errs.append(seq)
    assert np.max(np.abs(errs[0] - errs[1])) < 1e-7


def test_coupled_run_follows_error_ode():
    sys = car_system()
    gains = CarGains()
    x0 = np.array([1.0, 2.0, 0.3])
    eta0 = np.array([0.8, -0.6, 0.5])
    res = simulate_pair(sys, car_gain_function(gains), x0,
                        _embed_error(x0, eta0), default_car_input,
                        t_end=5.0, dt=0.005)
    direct = simulate_ode(
        lambda t, e: car_error_dynamics(e, default_car_input(t), gains),
        eta0, t_end=5.0, dt=0.005)
    coupled = np.array([car_state_error(xt, xh)
                        for xt, xh in zip(res.truth, res.estimate)])
    assert np.max(np.abs(coupled - direct[1])) < 1e-6


def test_error_converges_under_default_input():
    gains = CarGains()
    eta0 = np.array([1.5, -1.0, 2.0])
    t, etas = simulate_ode(
        lambda t, e: car_error_dynamics(e, default_car_input(t), gains),
        eta0, t_end=25.0, dt=0.01)
    final = etas[-1].copy()
    final[2] = wrap_angle(final[2])
    assert np.linalg.norm(final) < 1e-2
    assert np.linalg.norm(final) < 1e-3 * np.linalg.norm(eta0) + 1e-3


def test_gain_rejects_nonpositive():
    with pytest.raises(ValueError):
        CarGains(a=0.0)
    with pytest.raises(ValueError):
        CarGains(b=-1.0)
