"""Fixed-step simulation engine for coupled truth/observer runs.

All scenario integrators share the same contract: classical fourth-order
Runge-Kutta on an exact uniform time grid t_k = k*dt, truth and estimate
advanced together so the observer sees measurements consistent with the
truth stage states (or, in noisy runs, a corrupted measurement drawn once
per step and held across the step).  Runs are deterministic: equal seeds
give bit-equal trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .groupcore import DomainError, GainFunction, SystemWithSymmetry, observer_rhs
from .ins import InsEnvironment, InsGains, gain_matrices, ins_unpack
from .reactor import (ReactorInput, ReactorObserverGains, ReactorParams,
                      reactor_from_base_fiber, reactor_log_dynamics,
                      reactor_observer_log_rhs, reactor_to_base_fiber)


def n_grid_steps(t_end: float, dt: float) -> int:
    """Number of steps for an exact uniform grid; rejects mismatched spans."""
    if dt <= 0 or t_end <= 0:
        raise ValueError("t_end and dt must be positive")
    n = round(t_end / dt)
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError(f"t_end={t_end} is not a whole number of dt={dt} steps")
    return n


def rk4_step(f, t: float, s: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, s)
    k2 = f(t + 0.5 * dt, s + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, s + 0.5 * dt * k2)
    k4 = f(t + dt, s + dt * k3)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate_ode(f, s0, t_end: float, dt: float, project=None):
    """Integrate ds/dt = f(t, s); returns (times, states) with states[k] at t_k."""
    n = n_grid_steps(t_end, dt)
    s = np.array(s0, dtype=float)
    out = np.empty((n + 1,) + s.shape)
    out[0] = s
    for k in range(n):
        s = rk4_step(f, k * dt, s, dt)
        if project is not None:
            s = project(s)
        if not np.all(np.isfinite(s)):
            raise DomainError(f"state became non-finite at t={(k + 1) * dt:g}")
        out[k + 1] = s
    return dt * np.arange(n + 1), out


@dataclass
class SimResult:
    """Uniform-grid trajectories of a coupled truth/observer run."""
    t: np.ndarray                    # (N+1,)
    truth: np.ndarray                # (N+1, d)
    estimate: np.ndarray             # (N+1, d) or (N+1, d, K) for batch runs
    aux: dict = field(default_factory=dict)

    @property
    def final_truth(self) -> np.ndarray:
        return self.truth[-1]

    @property
    def final_estimate(self) -> np.ndarray:
        return self.estimate[-1]


def _raise_truncated(msg: str, t, truth, est, upto: int, aux=None):
    """DomainError carrying the completed part of the run for diagnostics."""
    exc = DomainError(msg)
    exc.partial = SimResult(t[: upto + 1], truth[: upto + 1], est[: upto + 1],
                            aux=aux or {})
    raise exc


def simulate_pair(sys: SystemWithSymmetry, gain: GainFunction, x0, xhat0,
                  u_of_t, t_end: float, dt: float) -> SimResult:
    """Generic coupled run: observer fed stage-exact outputs of the truth.

    By construction the measurement equals the truth output at every stage,
    so an estimate started at the truth stays on it to machine precision.
    """
    n = n_grid_steps(t_end, dt)
    d = sys.flat_dim
    x = np.array(x0, dtype=float)
    xh = np.array(xhat0, dtype=float)
    truth = np.empty((n + 1, d))
    est = np.empty((n + 1, d))
    truth[0], est[0] = x, xh

    def stage(t, xs, xhs):
        u = np.asarray(u_of_t(t), dtype=float)
        y = sys.output(xs, u)
        return sys.dynamics(xs, u), observer_rhs(sys, gain, xhs, u, y)

    sixth = dt / 6.0
    for k in range(n):
        t = k * dt
        a1, b1 = stage(t, x, xh)
        a2, b2 = stage(t + 0.5 * dt, x + 0.5 * dt * a1, xh + 0.5 * dt * b1)
        a3, b3 = stage(t + 0.5 * dt, x + 0.5 * dt * a2, xh + 0.5 * dt * b2)
        a4, b4 = stage(t + dt, x + dt * a3, xh + dt * b3)
        x = x + sixth * (a1 + 2 * a2 + 2 * a3 + a4)
        xh = xh + sixth * (b1 + 2 * b2 + 2 * b3 + b4)
        if sys.project_state is not None:
            x, xh = sys.project_state(x), sys.project_state(xh)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xh))):
            _raise_truncated(f"simulation diverged at t={t + dt:g}",
                             dt * np.arange(n + 1), truth, est, k)
        truth[k + 1], est[k + 1] = x, xh
    return SimResult(dt * np.arange(n + 1), truth, est)


# --- sensor corruption ---------------------------------------------------------


@dataclass(frozen=True)
class SensorNoiseSpec:
    """Additive bias plus white noise for the four navigation sensors.

    Per step one sample of each sigma is drawn, in the fixed order
    accelerometer, gyroscope, velocity, magnetometer, and held for the whole
    step.  Biases are constant vectors.
    """
    accel_bias: np.ndarray
    gyro_bias: np.ndarray
    vel_bias: np.ndarray
    mag_bias: np.ndarray
    accel_sigma: float
    gyro_sigma: float
    vel_sigma: float
    mag_sigma: float

    @staticmethod
    def flight_test() -> "SensorNoiseSpec":
        """Bias and noise levels of the reference flight scenario."""
        pattern = np.array([1.0, -1.0, 1.0])
        return SensorNoiseSpec(
            accel_bias=0.5 * pattern, gyro_bias=(4.0 * np.pi / 360.0) * pattern,
            vel_bias=0.5 * pattern, mag_bias=0.05 * pattern,
            accel_sigma=1.0, gyro_sigma=0.25, vel_sigma=1.0, mag_sigma=0.1)

    @staticmethod
    def off() -> "SensorNoiseSpec":
        z = np.zeros(3)
        return SensorNoiseSpec(z, z, z, z, 0.0, 0.0, 0.0, 0.0)

    def corrupt(self, u, y, rng: np.random.Generator):
        """Measured (u, y) from true (u, y); draws four normal 3-vectors."""
        u = np.asarray(u, dtype=float)
        y = np.asarray(y, dtype=float)
        a_m = u[3:6] + self.accel_bias + self.accel_sigma * rng.standard_normal(3)
        w_m = u[0:3] + self.gyro_bias + self.gyro_sigma * rng.standard_normal(3)
        v_m = y[0:3] + self.vel_bias + self.vel_sigma * rng.standard_normal(3)
        b_m = y[3:6] + self.mag_bias + self.mag_sigma * rng.standard_normal(3)
        return np.concatenate([w_m, a_m]), np.concatenate([v_m, b_m])


# --- fast fused navigation run ------------------------------------------------

# The quaternion algebra is open-coded here: these loops take millions of
# scalar operations per scenario and the helper-function version is several
# times slower.  Consistency with the readable implementation is pinned by
# tests.


def _quat_mul(p, q):
    p0, p1, p2, p3 = p
    q0, q1, q2, q3 = q
    return np.array([
        p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
        p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
        p0 * q2 + p2 * q0 + p3 * q1 - p1 * q3,
        p0 * q3 + p3 * q0 + p1 * q2 - p2 * q1,
    ])


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _conj_rot(q, p):
    """q * p * q^-1 for unit q, p a 3-vector (earth frame from body frame)."""
    qv = q[1:4]
    t = 2.0 * _cross(qv, p)
    return p + q[0] * t + _cross(qv, t)


def _conj_rot_inv(q, p):
    """q^-1 * p * q for unit q (body frame from earth frame)."""
    qv = q[1:4]
    t = 2.0 * _cross(qv, p)
    return p - q[0] * t + _cross(qv, t)


def _ins_pair_rhs(s, u_true, u_obs, y_obs, a_grav_vec, b_vec, mats):
    """Stacked truth+observer field; y_obs=None means measure the truth state."""
    l_qv, l_vv, l_qb, l_vb = mats
    q, v = s[0:4], s[4:7]
    qh, vh = s[7:11], s[11:14]
    w, a = u_true[0:3], u_true[3:6]

    dq = 0.5 * _quat_mul(q, np.array([0.0, w[0], w[1], w[2]]))
    dv = _cross(v, w) + _conj_rot_inv(q, a_grav_vec) + a

    if y_obs is None:
        yv, yb = v, _conj_rot_inv(q, b_vec)
    else:
        yv, yb = y_obs[0:3], y_obs[3:6]
    wo, ao = u_obs[0:3], u_obs[3:6]
    e_v = _conj_rot(qh, vh - yv)
    e_b = b_vec - _conj_rot(qh, yb)
    corr_q = l_qv @ e_v + l_qb @ e_b
    corr_v = l_vv @ e_v + l_vb @ e_b
    dqh = (0.5 * _quat_mul(qh, np.array([0.0, wo[0], wo[1], wo[2]]))
           + _quat_mul(np.array([0.0, corr_q[0], corr_q[1], corr_q[2]]), qh))
    dvh = _cross(vh, wo) + _conj_rot_inv(qh, a_grav_vec) + ao + _conj_rot_inv(qh, corr_v)

    out = np.empty(14)
    out[0:4], out[4:7], out[7:11], out[11:14] = dq, dv, dqh, dvh
    return out


def simulate_ins_scenario(env: InsEnvironment, gains: InsGains, x0, xhat0,
                          u_of_t, t_end: float, dt: float,
                          noise: SensorNoiseSpec | None = None,
                          rng: np.random.Generator | None = None) -> SimResult:
    """Coupled navigation run, optionally with corrupted sensors.

    noise=None: the observer sees stage-exact inputs and outputs (pure
    coupled ODE).  With a noise spec, one corrupted measurement of (u, y) is
    drawn at each grid time and held across the step; the truth always
    integrates with the exact inputs.  ``aux['E']`` records the stacked
    invariant output errors the observer reacted to at each grid time (for
    the final time, from one further measurement draw).

    Quaternions of truth and estimate are renormalized after every step.
    """
    n = n_grid_steps(t_end, dt)
    if noise is not None and rng is None:
        raise ValueError("noisy runs need an explicit rng for determinism")
    mats = gain_matrices(gains, env)
    a_vec, b_vec = env.A_grav, env.B
    s = np.concatenate([np.asarray(x0, float), np.asarray(xhat0, float)])
    truth = np.empty((n + 1, 7))
    est = np.empty((n + 1, 7))
    e_log = np.empty((n + 1, 6))
    truth[0], est[0] = s[0:7], s[7:14]
    # evaluate the input signal once per half-grid point; RK4 stages reuse these
    u_table = np.array([u_of_t(0.5 * j * dt) for j in range(2 * n + 1)], dtype=float)
    if u_table.shape != (2 * n + 1, 6):
        raise ValueError("input signal must produce 6-vectors (omega, a)")

    def record_e(s_now, u_m, y_m):
        qh, vh = s_now[7:11], s_now[11:14]
        if y_m is None:
            yv, yb = s_now[4:7], _conj_rot_inv(s_now[0:4], b_vec)
        else:
            yv, yb = y_m[0:3], y_m[3:6]
        e_v = _conj_rot(qh, vh - yv)
        e_b = b_vec - _conj_rot(qh, yb)
        return np.concatenate([e_v, e_b])

    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n):
        u0, uh, u1 = u_table[2 * k], u_table[2 * k + 1], u_table[2 * k + 2]
        if noise is None:
            u_m = y_m = None
        else:
            y_true = np.concatenate([s[4:7], _conj_rot_inv(s[0:4], b_vec)])
            u_m, y_m = noise.corrupt(u0, y_true, rng)
        e_log[k] = record_e(s, u_m, y_m)

        def f(u, ss):
            return _ins_pair_rhs(ss, u, u if u_m is None else u_m, y_m,
                                 a_vec, b_vec, mats)

        k1 = f(u0, s)
        k2 = f(uh, s + half * k1)
        k3 = f(uh, s + half * k2)
        k4 = f(u1, s + dt * k3)
        s = s + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s[0:4] /= np.linalg.norm(s[0:4])
        s[7:11] /= np.linalg.norm(s[7:11])
        if not np.all(np.isfinite(s)):
            _raise_truncated(f"navigation run diverged at t={(k + 1) * dt:g}",
                             dt * np.arange(n + 1), truth, est, k,
                             aux={"E": e_log[: k + 1]})
        truth[k + 1], est[k + 1] = s[0:7], s[7:14]

    if noise is None:
        u_m = y_m = None
    else:
        y_true = np.concatenate([s[4:7], _conj_rot_inv(s[0:4], b_vec)])
        u_m, y_m = noise.corrupt(u_table[2 * n], y_true, rng)
    e_log[n] = record_e(s, u_m, y_m)
    return SimResult(dt * np.arange(n + 1), truth, est, aux={"E": e_log})


# --- guarded reactor run ---------------------------------------------------------

# Sub-step guards; all thresholds are invariant under rescaling the
# concentration unit (log increments and absolute kelvins).
_MAX_LOG_STEP = 1.5
_MAX_TEMP_STEP = 25.0
_MAX_HALVINGS = 20
# Step-doubling acceptance bound: one full sub-step and two half sub-steps
# must agree within this much, counting 25 K of temperature as one unit.
_SUB_TOL = 1e-6


def simulate_reactor_scenario(params: ReactorParams, inp: ReactorInput,
                              gains: ReactorObserverGains, x0, xhat0,
                              t_end: float, dt: float) -> SimResult:
    """Reactor truth plus observer, integrated in logarithmic coordinates.

    Working in (log X, log(X/X_in), T) makes positivity of all concentration
    estimates unconditional.  Large transients (the estimate can start a
    hundredfold off) are handled by halving the internal step whenever a
    proposed update moves a log coordinate by more than 1.5, moves a
    temperature by more than 25 K, produces a nonpositive absolute
    temperature, or stops being finite.  Each trial also integrates the same
    interval as two half steps; the step is rejected when the two results
    disagree beyond a small bound, which keeps the integrator out of the
    unstable regime when a large concentration overestimate makes the
    thermal feedback stiff.  Accepted states come from the half-step pass,
    and the step is re-doubled after two clean sub-steps.  Recorded samples
    stay on the exact t_k = k*dt grid.

    xhat0 may be a single state (3,) or a batch (3, K) sharing one truth.
    """
    n = n_grid_steps(t_end, dt)
    x0 = np.asarray(x0, dtype=float)
    xhat0 = np.asarray(xhat0, dtype=float)
    z = reactor_to_base_fiber(x0)                       # (3,)
    zh = reactor_to_base_fiber(xhat0)                   # (3,) or (3, K)
    truth = np.empty((n + 1, 3))
    est = np.empty((n + 1,) + zh.shape)
    truth[0] = reactor_from_base_fiber(z)
    est[0] = reactor_from_base_fiber(zh)

    def rhs(zc, zhc):
        dz = reactor_log_dynamics(zc, inp, params)
        dzh = reactor_observer_log_rhs(zhc, inp, zc[2], gains, params)
        return dz, dzh

    def violates(zc, zhc, z_new, zh_new):
        if not (np.all(np.isfinite(z_new)) and np.all(np.isfinite(zh_new))):
            return True
        if z_new[2] <= 0.0 or np.any(zh_new[2] <= 0.0):
            return True
        if np.any(np.abs(zh_new[0:2] - zhc[0:2]) > _MAX_LOG_STEP):
            return True
        if abs(z_new[2] - zc[2]) > _MAX_TEMP_STEP:
            return True
        if np.any(np.abs(zh_new[2] - zhc[2]) > _MAX_TEMP_STEP):
            return True
        return False

    def rk4_sub(zc, zhc, h):
        a1, b1 = rhs(zc, zhc)
        a2, b2 = rhs(zc + 0.5 * h * a1, zhc + 0.5 * h * b1)
        a3, b3 = rhs(zc + 0.5 * h * a2, zhc + 0.5 * h * b2)
        a4, b4 = rhs(zc + h * a3, zhc + h * b3)
        return (zc + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4),
                zhc + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4))

    def doubling_error(z1, zh1, z2, zh2):
        # logs count as-is, temperatures in units of the 25 K guard
        parts = (np.abs(z1[0:2] - z2[0:2]).max(),
                 abs(z1[2] - z2[2]) / _MAX_TEMP_STEP,
                 np.abs(zh1[0:2] - zh2[0:2]).max(),
                 np.abs(zh1[2] - zh2[2]).max() / _MAX_TEMP_STEP)
        d = max(float(p) for p in parts)
        return d if np.isfinite(d) else np.inf

    denom = 2 ** _MAX_HALVINGS          # sub-step bookkeeping in units of dt/denom
    level = 0                            # current halving depth
    for k in range(n):
        remaining = denom
        streak = 0
        while remaining > 0:
            ticks = denom >> level
            if ticks > remaining:
                ticks = remaining
            h = dt * (ticks / denom)
            # a rejected trial may overflow before the guard halves the step
            with np.errstate(over="ignore", invalid="ignore"):
                z_one, zh_one = rk4_sub(z, zh, h)
                z_mid, zh_mid = rk4_sub(z, zh, 0.5 * h)
                z_new, zh_new = rk4_sub(z_mid, zh_mid, 0.5 * h)
            if (violates(z, zh, z_mid, zh_mid)
                    or violates(z_mid, zh_mid, z_new, zh_new)
                    or doubling_error(z_one, zh_one, z_new, zh_new) > _SUB_TOL):
                if ticks == 1 or level >= _MAX_HALVINGS:
                    _raise_truncated(
                        f"reactor run stalled near t={k * dt:g}: step underflow",
                        dt * np.arange(n + 1), truth, est, k)
                level += 1
                streak = 0
                continue
            z, zh = z_new, zh_new
            remaining -= ticks
            streak += 1
            if level > 0 and streak >= 2:
                level -= 1
                streak = 0
        truth[k + 1] = reactor_from_base_fiber(z)
        est[k + 1] = reactor_from_base_fiber(zh)
    return SimResult(dt * np.arange(n + 1), truth, est)
