"""Integration engines: accuracy, noise model, guards, determinism."""

import numpy as np
import pytest

from invobs.car import CarGains, car_gain_function, car_system, default_car_input
from invobs.groupcore import DomainError
from invobs.ins import (InsEnvironment, InsGains, ins_gain_function, ins_pack,
                        ins_state_error, ins_system)
from invobs.quaternions import qmul, qnormalize, rotate_vec
from invobs.reactor import (ReactorInput, ReactorObserverGains, ReactorParams,
                            reactor_equilibrium, reactor_state_error)
from invobs.sim import (SensorNoiseSpec, SimResult, n_grid_steps, rk4_step,
                        simulate_ins_scenario, simulate_ode, simulate_pair,
                        simulate_reactor_scenario)
from invobs.vtol import VtolTrajectorySpec, vtol_input_signal, vtol_reference

ENV = InsEnvironment()


def test_n_grid_steps():
    assert n_grid_steps(10.0, 0.1) == 100
    assert n_grid_steps(6.15, 1e-3) == 6150
    with pytest.raises(ValueError):
        n_grid_steps(1.0, 0.3)
    with pytest.raises(ValueError):
        n_grid_steps(0.0, 0.1)
    with pytest.raises(ValueError):
        n_grid_steps(1.0, -0.1)


def test_rk4_single_step_accuracy():
    # local truncation error of a classical step is dt^5 / 5! to leading order
    s = rk4_step(lambda t, s: s, 0.0, np.array([1.0]), 0.1)
    assert s[0] == pytest.approx(np.exp(0.1), abs=2e-7)
    assert s[0] != pytest.approx(np.exp(0.1), abs=1e-9)


def test_rk4_fourth_order_convergence():
    def err(dt):
        _, states = simulate_ode(lambda t, s: s, np.array([1.0]), 1.0, dt)
        return abs(states[-1, 0] - np.e)

    ratio = err(0.1) / err(0.05)
    assert 14.0 < ratio < 18.0


def test_simulate_ode_projection_hook():
    calls = []

    def project(s):
        calls.append(1)
        return s / np.linalg.norm(s)

    _, states = simulate_ode(lambda t, s: np.array([-s[1], s[0]]),
                             np.array([1.0, 0.0]), 1.0, 0.01, project=project)
    assert len(calls) == 100
    assert np.linalg.norm(states[-1]) == pytest.approx(1.0, abs=1e-12)


def test_simulate_ode_rejects_divergence():
    with np.errstate(all="ignore"), pytest.raises(DomainError):
        simulate_ode(lambda t, s: s ** 3, np.array([5.0]), 10.0, 0.1)


def test_estimate_started_at_truth_stays():
    sys = car_system()
    x0 = np.array([0.5, -1.0, 0.2])
    res = simulate_pair(sys, car_gain_function(CarGains()), x0, x0.copy(),
                        default_car_input, t_end=5.0, dt=0.01)
    assert np.max(np.abs(res.truth - res.estimate)) < 1e-9


def test_truncated_partial_trace_on_divergence():
    # destabilized gain: corrections push the estimate away until it blows up
    sys = car_system()
    bad = lambda inv, err: -car_gain_function(CarGains(a=40.0, b=40.0, c=40.0))(inv, err)
    with np.errstate(all="ignore"):
        with pytest.raises(DomainError) as info:
            simulate_pair(sys, bad, np.array([0.0, 0.0, 0.0]),
                          np.array([50.0, -30.0, 2.0]), default_car_input,
                          t_end=20.0, dt=0.05)
    partial = info.value.partial
    assert isinstance(partial, SimResult)
    assert 1 <= len(partial.t) < 401
    assert np.all(np.isfinite(partial.estimate))
    assert len(partial.truth) == len(partial.t)


def test_noise_off_is_exact():
    spec = SensorNoiseSpec.off()
    rng = np.random.default_rng(0)
    u = np.arange(6.0)
    y = np.arange(6.0, 12.0)
    u_m, y_m = spec.corrupt(u, y, rng)
    assert np.array_equal(u_m, u) and np.array_equal(y_m, y)


def test_noise_draw_order_and_layout():
    spec = SensorNoiseSpec.flight_test()
    u = np.zeros(6)
    y = np.zeros(6)
    u_m, y_m = spec.corrupt(u, y, np.random.default_rng(42))
    ref = np.random.default_rng(42)
    accel = spec.accel_bias + spec.accel_sigma * ref.standard_normal(3)
    gyro = spec.gyro_bias + spec.gyro_sigma * ref.standard_normal(3)
    vel = spec.vel_bias + spec.vel_sigma * ref.standard_normal(3)
    mag = spec.mag_bias + spec.mag_sigma * ref.standard_normal(3)
    assert np.array_equal(u_m, np.concatenate([gyro, accel]))
    assert np.array_equal(y_m, np.concatenate([vel, mag]))


def test_noise_statistics():
    spec = SensorNoiseSpec.flight_test()
    rng = np.random.default_rng(1)
    n = 100_000
    us = np.empty((n, 6))
    ys = np.empty((n, 6))
    for i in range(n):
        us[i], ys[i] = spec.corrupt(np.zeros(6), np.zeros(6), rng)
    assert np.allclose(us[:, 3:6].mean(axis=0), spec.accel_bias, atol=0.02)
    assert np.allclose(us[:, 0:3].mean(axis=0), spec.gyro_bias, atol=0.02)
    assert np.allclose(ys[:, 0:3].std(axis=0), spec.vel_sigma, rtol=0.05)
    assert np.allclose(ys[:, 3:6].std(axis=0), spec.mag_sigma, rtol=0.05)


class _CountingRng:
    """Duck-typed generator that counts standard_normal draws."""

    def __init__(self, seed):
        self.inner = np.random.default_rng(seed)
        self.calls = 0

    def standard_normal(self, *args, **kwargs):
        self.calls += 1
        return self.inner.standard_normal(*args, **kwargs)


def test_noisy_run_draw_count():
    # one measurement per grid step plus one for the final recorded error row
    spec = VtolTrajectorySpec()
    u = vtol_input_signal(spec, ENV)
    sig = vtol_reference(spec, ENV, 0.0)
    rng = _CountingRng(3)
    simulate_ins_scenario(ENV, InsGains(), sig.state, sig.state, u,
                          t_end=0.05, dt=1e-3, noise=SensorNoiseSpec.flight_test(),
                          rng=rng)
    assert rng.calls == 4 * (50 + 1)


def test_noisy_run_requires_rng():
    spec = VtolTrajectorySpec()
    u = vtol_input_signal(spec, ENV)
    sig = vtol_reference(spec, ENV, 0.0)
    with pytest.raises(ValueError, match="rng"):
        simulate_ins_scenario(ENV, InsGains(), sig.state, sig.state, u,
                              t_end=0.05, dt=1e-3,
                              noise=SensorNoiseSpec.flight_test())


def test_fused_matches_generic_assembly():
    spec = VtolTrajectorySpec()
    u = vtol_input_signal(spec, ENV)
    sig = vtol_reference(spec, ENV, 0.0)
    x0 = sig.state
    xh0 = ins_pack(qnormalize(np.array([0.9, 0.2, -0.1, 0.3])),
                   np.array([2.0, -1.0, 0.5]))
    fused = simulate_ins_scenario(ENV, InsGains(), x0, xh0, u,
                                  t_end=0.5, dt=1e-3)
    generic = simulate_pair(ins_system(ENV), ins_gain_function(InsGains(), ENV),
                            x0, xh0, u, t_end=0.5, dt=1e-3)
    assert np.max(np.abs(fused.truth - generic.truth)) < 1e-9
    assert np.max(np.abs(fused.estimate - generic.estimate)) < 1e-9


def test_ins_error_autonomy_short():
    # same inputs, same initial error, very different truths
    gains = InsGains()
    u = vtol_input_signal(VtolTrajectorySpec(), ENV)
    eta_q = qnormalize(np.array([0.9, 0.3, -0.2, 0.1]))
    eta_v = np.array([3.0, -2.0, 1.0])
    runs = []
    for q0, v0 in [
        (np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3)),
        (qnormalize(np.array([0.3, -0.5, 0.8, 0.1])), np.array([5.0, 1.0, -4.0])),
    ]:
        x0 = ins_pack(q0, v0)
        xh0 = ins_pack(qmul(eta_q, q0), v0 + rotate_vec(q0, eta_v))
        res = simulate_ins_scenario(ENV, gains, x0, xh0, u, t_end=2.0, dt=1e-3)
        runs.append(np.array([ins_state_error(xt, xh)
                              for xt, xh in zip(res.truth, res.estimate)]))
    assert np.max(np.abs(runs[0] - runs[1])) < 1e-8


def test_reactor_scenario_handles_large_initial_error():
    params, inp, gains = ReactorParams(), ReactorInput(), ReactorObserverGains()
    eq = reactor_equilibrium(params, inp)
    xh0 = np.array([eq[0] * 100.0, eq[1] * 0.01, eq[2] + 50.0])
    res = simulate_reactor_scenario(params, inp, gains, eq, xh0,
                                    t_end=150.0, dt=0.1)
    assert np.all(res.estimate[:, 0:2] > 0.0)
    e0 = np.linalg.norm(reactor_state_error(eq, xh0))
    e1 = np.linalg.norm(reactor_state_error(res.final_truth, res.final_estimate))
    assert e1 < 1e-3 * e0


def test_reactor_batch_matches_single():
    params, inp, gains = ReactorParams(), ReactorInput(), ReactorObserverGains()
    eq = reactor_equilibrium(params, inp)
    singles = [np.array([2.0, 0.2, 340.0]), np.array([0.5, 1.0, 310.0])]
    batch0 = np.stack(singles, axis=1)
    batch = simulate_reactor_scenario(params, inp, gains, eq, batch0,
                                      t_end=5.0, dt=0.1)
    assert batch.estimate.shape == (51, 3, 2)
    assert np.allclose(batch.t, 0.1 * np.arange(51))
    for k, xh0 in enumerate(singles):
        one = simulate_reactor_scenario(params, inp, gains, eq, xh0,
                                        t_end=5.0, dt=0.1)
        # collective step halving can shift the transient slightly
        assert np.max(np.abs(batch.estimate[:, :, k] - one.estimate)) < 1e-2
        assert np.max(np.abs(batch.truth - one.truth)) < 1e-12


def test_noisy_runs_deterministic_per_seed():
    spec = VtolTrajectorySpec()
    u = vtol_input_signal(spec, ENV)
    sig = vtol_reference(spec, ENV, 0.0)

    def run(seed):
        return simulate_ins_scenario(
            ENV, InsGains(), sig.state, sig.state, u, t_end=0.2, dt=1e-3,
            noise=SensorNoiseSpec.flight_test(),
            rng=np.random.default_rng(seed))

    a, b, c = run(7), run(7), run(11)
    assert np.array_equal(a.estimate, b.estimate)
    assert np.array_equal(a.aux["E"], b.aux["E"])
    assert not np.array_equal(a.estimate, c.estimate)
