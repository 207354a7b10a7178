"""Analytic hover-to-hover circular flight used to drive the navigation system.

A point mass flies a horizontal circle, accelerating smoothly from rest,
cruising at constant angular rate, then braking back to rest.  The body
z axis is kept aligned with (gravity minus inertial acceleration), the way a
thrust-vectoring aircraft banks into the turn, and the yaw-free orientation
is the shortest-arc rotation taking earth z to that axis.  Everything is
closed form, including the angular rate, so the generated sensor signals
(angular rate, specific acceleration, body velocity, body magnetic field)
carry no numerical-differentiation noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ins import InsEnvironment, ins_pack
from .quaternions import qinv, qmul, rotate_vec, vec


@dataclass(frozen=True)
class VtolTrajectorySpec:
    """Circle radius and phase switch times of the reference flight.

    The angular acceleration on the spin-up phase is a raised-cosine pulse
    sized so the accumulated angle is close to a quarter circle at t1; the
    brake phase mirrors it.  The flight is at rest for t >= t3.
    """
    radius: float = 5.0
    t1: float = 2.0
    t2: float = 4.15
    t3: float = 6.15

    def __post_init__(self):
        if not (0 < self.t1 <= self.t2 <= self.t3):
            raise ValueError("need 0 < t1 <= t2 <= t3")
        if abs((self.t3 - self.t2) - self.t1) > 1e-12:
            raise ValueError("brake phase must last exactly t1")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def pulse(self) -> float:
        """Peak-defining constant of the angular-acceleration pulse."""
        return (1.0 / self.t1 ** 2) * (2.0 * np.pi ** 3) / (2.0 * np.pi ** 2 + 1.0)


def theta_profile(spec: VtolTrajectorySpec, t: float):
    """Path angle and its first three derivatives at time t >= 0."""
    if t < 0:
        raise ValueError("trajectory undefined for negative time")
    c, t1, t2, t3 = spec.pulse, spec.t1, spec.t2, spec.t3
    w = 2.0 * np.pi / t1
    theta1 = 0.5 * c * t1 ** 2          # angle accumulated over the spin-up
    rate = c * t1                        # cruise angular rate
    if t <= t1:
        th = c * (0.5 * t ** 2 + (np.cos(w * t) - 1.0) / w ** 2)
        dth = c * (t - np.sin(w * t) / w)
        ddth = c * (1.0 - np.cos(w * t))
        dddth = c * w * np.sin(w * t)
    elif t <= t2:
        th = theta1 + rate * (t - t1)
        dth = rate
        ddth = 0.0
        dddth = 0.0
    elif t <= t3:
        s = t - t2
        th = (theta1 + rate * (t2 - t1)
              + rate * s - c * (0.5 * s ** 2 + (np.cos(w * s) - 1.0) / w ** 2))
        dth = rate - c * (s - np.sin(w * s) / w)
        ddth = -c * (1.0 - np.cos(w * s))
        dddth = -c * w * np.sin(w * s)
    else:
        th = theta1 + rate * (t2 - t1) + rate * t1 - 0.5 * c * t1 ** 2
        dth = 0.0
        ddth = 0.0
        dddth = 0.0
    return th, dth, ddth, dddth


def _position_derivatives(spec: VtolTrajectorySpec, t: float):
    """P, dP, ddP, dddP of the circle point at path angle theta(t)."""
    th, dth, ddth, dddth = theta_profile(spec, t)
    r = spec.radius
    cs, sn = np.cos(th), np.sin(th)
    radial = np.array([cs, -sn, 0.0])    # d(tangential)/dtheta
    tangential = np.array([sn, cs, 0.0])
    pos = r * np.array([1.0 - cs, sn, 0.0])
    vel = r * dth * tangential
    acc = r * (ddth * tangential + dth ** 2 * radial)
    jerk = r * (dddth * tangential + 3.0 * dth * ddth * radial
                - dth ** 3 * tangential)
    return pos, vel, acc, jerk


@dataclass(frozen=True)
class VtolSignals:
    """Reference state and sensor signals at one instant."""
    q: np.ndarray       # body orientation, unit quaternion
    v: np.ndarray       # velocity, body frame
    omega: np.ndarray   # angular rate, body frame
    acc: np.ndarray     # specific acceleration, body frame
    pos: np.ndarray     # position, earth frame

    @property
    def state(self) -> np.ndarray:
        return ins_pack(self.q, self.v)

    @property
    def inp(self) -> np.ndarray:
        return np.concatenate([self.omega, self.acc])


def vtol_reference(spec: VtolTrajectorySpec, env: InsEnvironment,
                   t: float) -> VtolSignals:
    """Closed-form reference at time t.

    The body z axis tracks the unit vector along A_grav - ddP, so the
    specific acceleration is exactly (0, 0, -|A_grav - ddP|): thrust purely
    along the body axis.  The orientation quaternion and its exact time
    derivative come from the shortest-arc construction, giving omega without
    finite differences.
    """
    pos, vel, acc_e, jerk = _position_derivatives(spec, t)
    g_vec = env.A_grav - acc_e
    g_norm = np.linalg.norm(g_vec)
    if g_norm < 1e-9:
        raise ValueError("free-fall point: body axis direction undefined")
    u = g_vec / g_norm
    du = -(jerk - u * (u @ jerk)) / g_norm

    # q = conj(w) / |w| with w = (1 + u3, -(e3 x u)); shortest arc e3 -> u
    w_s = 1.0 + u[2]
    if w_s < 1e-12:
        raise ValueError("thrust direction antipodal to earth z; yaw-free "
                         "orientation undefined")
    w_v = np.array([-u[1], u[0], 0.0])   # e3 x u
    w = np.concatenate([[w_s], w_v])
    dw = np.array([du[2], -du[1], du[0], 0.0])
    nw = np.linalg.norm(w)
    q = w / nw
    dq = dw / nw - w * (w @ dw) / nw ** 3
    omega = 2.0 * vec(qmul(qinv(q), dq))

    v_body = rotate_vec(q, vel)
    acc_body = np.array([0.0, 0.0, -g_norm])
    return VtolSignals(q=q, v=v_body, omega=omega, acc=acc_body, pos=pos)


def vtol_input_signal(spec: VtolTrajectorySpec, env: InsEnvironment):
    """Time -> flat input [omega, acc] for the simulation engine."""
    def u_of_t(t: float) -> np.ndarray:
        return vtol_reference(spec, env, t).inp
    return u_of_t
