"""Nonholonomic car with position measurements, symmetric under SE(2).

State [x, y, theta] (planar position and heading), input [u, v] (rear-wheel
speed and steering rate factor), measured output the position (x, y).  Planar
rotations and translations move trajectories to trajectories, so the observer
is built from SE(2)-invariant quantities: the position error resolved in the
estimated body frame and the Frenet frame along the estimated heading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .groupcore import SystemWithSymmetry

TWO_PI = 2.0 * np.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return np.pi - (np.pi - theta) % TWO_PI


@dataclass(frozen=True)
class SE2Element:
    """Rigid planar motion: rotate by theta, then translate by (x, y)."""
    x: float
    y: float
    theta: float


SE2_IDENTITY = SE2Element(0.0, 0.0, 0.0)


def se2_compose(g2: SE2Element, g1: SE2Element) -> SE2Element:
    """Group product g2 * g1, acting as: first g1, then g2."""
    c, s = np.cos(g2.theta), np.sin(g2.theta)
    return SE2Element(
        x=c * g1.x - s * g1.y + g2.x,
        y=s * g1.x + c * g1.y + g2.y,
        theta=wrap_angle(g1.theta + g2.theta),
    )


def se2_inverse(g: SE2Element) -> SE2Element:
    c, s = np.cos(g.theta), np.sin(g.theta)
    return SE2Element(
        x=-(c * g.x + s * g.y),
        y=-(-s * g.x + c * g.y),
        theta=wrap_angle(-g.theta),
    )


def se2_distance(g1: SE2Element, g2: SE2Element) -> float:
    """Max-abs distance with the heading compared on the circle."""
    return max(abs(g1.x - g2.x), abs(g1.y - g2.y),
               abs(wrap_angle(g1.theta - g2.theta)))


@dataclass(frozen=True)
class CarGains:
    """Positive scalar gains of the invariant car observer."""
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise ValueError("car gains a, b, c must be positive")


def car_dynamics(state, inp) -> np.ndarray:
    x, y, theta = state
    u, v = inp
    return np.array([u * np.cos(theta), u * np.sin(theta), u * v])


def car_output(state, inp=None) -> np.ndarray:
    return np.asarray(state, dtype=float)[:2].copy()


def car_act_state(g: SE2Element, state) -> np.ndarray:
    x, y, theta = state
    c, s = np.cos(g.theta), np.sin(g.theta)
    return np.array([c * x - s * y + g.x, s * x + c * y + g.y,
                     wrap_angle(theta + g.theta)])


def car_act_input(g: SE2Element, inp) -> np.ndarray:
    # (u, v) are already invariant under rigid planar motions.
    return np.asarray(inp, dtype=float).copy()


def car_act_output(g: SE2Element, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    c, s = np.cos(g.theta), np.sin(g.theta)
    return np.array([c * y[0] - s * y[1] + g.x, s * y[0] + c * y[1] + g.y])


def car_act_state_diff(g: SE2Element, tangent) -> np.ndarray:
    dx, dy, dtheta = tangent
    c, s = np.cos(g.theta), np.sin(g.theta)
    return np.array([c * dx - s * dy, s * dx + c * dy, dtheta])


def car_moving_frame(state) -> SE2Element:
    """Group element sending the state to the origin with zero heading."""
    x, y, theta = state
    c, s = np.cos(theta), np.sin(theta)
    return SE2Element(x=-(x * c + y * s), y=x * s - y * c, theta=wrap_angle(-theta))


def car_invariant_frame(state) -> np.ndarray:
    """Frenet frame along the heading: tangent, normal, and the heading axis."""
    theta = state[2]
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def car_scalar_invariants(state, inp) -> np.ndarray:
    # Complete set for n + m - r = 3 + 2 - 3 = 2: the inputs themselves.
    return np.asarray(inp, dtype=float).copy()


def car_output_error(state_hat, inp, y) -> np.ndarray:
    """Position error resolved in the estimated body frame."""
    xh, yh, th = state_hat
    y = np.asarray(y, dtype=float)
    c, s = np.cos(th), np.sin(th)
    dx, dy = xh - y[0], yh - y[1]
    return np.array([c * dx + s * dy, -s * dx + c * dy])


def car_state_error(state_true, state_hat) -> np.ndarray:
    """Invariant state error, normalized at the estimate.

    Components: the true-position offset resolved in the estimated body frame
    and the heading mismatch wrapped to (-pi, pi].  Its first two components
    coincide with the output error along any coupled trajectory.
    """
    x, y, theta = state_true
    xh, yh, th = state_hat
    c, s = np.cos(th), np.sin(th)
    dx, dy = xh - x, yh - y
    return np.array([c * dx + s * dy, -s * dx + c * dy, wrap_angle(th - theta)])


def car_gain_matrix(gains: CarGains, inp, err) -> np.ndarray:
    """Invariant gain 3x2 matrix; function of the invariants (u, v) and E only."""
    u, v = inp
    e_y = err[1]
    au = abs(u)
    skew = u * gains.b * e_y - u * v
    return np.array([
        [-au * gains.a, skew],
        [-skew, -au * gains.c],
        [0.0, -u * gains.b],
    ])


def car_error_dynamics(eta, inp, gains: CarGains) -> np.ndarray:
    """Closed-form autonomous dynamics of the invariant state error.

    Depends on the trajectory only through the invariant inputs (u, v); v in
    fact cancels.  Works on a single error (3,) or a batch (3, K).
    """
    eta = np.asarray(eta, dtype=float)
    u, _ = inp
    au = abs(u)
    ex, ey, eth = eta[0], eta[1], eta[2]
    return np.stack([
        u * (1.0 - np.cos(eth)) - au * gains.a * ex,
        u * np.sin(eth) - au * gains.c * ey,
        -u * gains.b * ey,
    ])


def car_observer_rhs(state_hat, inp, y, gains: CarGains) -> np.ndarray:
    """Invariant observer: copied dynamics plus frame-aligned gain corrections."""
    err = car_output_error(state_hat, inp, y)
    corr = car_invariant_frame(state_hat) @ (car_gain_matrix(gains, inp, err) @ err)
    return car_dynamics(state_hat, inp) + corr


def default_car_input(t: float) -> np.ndarray:
    """Persistently exciting speed and steering profile used by the presets."""
    return np.array([1.0 + 0.5 * np.sin(0.3 * t), 0.3 * np.cos(0.5 * t)])


def _random_state(rng: np.random.Generator) -> np.ndarray:
    return np.array([rng.uniform(-5, 5), rng.uniform(-5, 5),
                     rng.uniform(-np.pi, np.pi)])


def _random_input(rng: np.random.Generator) -> np.ndarray:
    return np.array([rng.uniform(-2, 2), rng.uniform(-1, 1)])


def _random_group(rng: np.random.Generator) -> SE2Element:
    return SE2Element(rng.uniform(-5, 5), rng.uniform(-5, 5),
                      rng.uniform(-np.pi, np.pi))


def _project(state) -> np.ndarray:
    out = np.asarray(state, dtype=float).copy()
    out[2] = wrap_angle(out[2])
    return out


def car_system() -> SystemWithSymmetry:
    """SE(2) car bundled for the generic observer machinery."""
    return SystemWithSymmetry(
        name="car",
        state_dim=3, input_dim=2, output_dim=2, group_dim=3,
        dynamics=car_dynamics,
        output=car_output,
        act_state=car_act_state,
        act_input=car_act_input,
        act_output=car_act_output,
        act_state_diff=car_act_state_diff,
        compose=se2_compose,
        inverse=se2_inverse,
        identity=SE2_IDENTITY,
        moving_frame=car_moving_frame,
        invariant_frame=car_invariant_frame,
        scalar_invariants=car_scalar_invariants,
        output_error=car_output_error,
        state_error=car_state_error,
        error_identity=np.zeros(3),
        project_state=_project,
        group_distance=se2_distance,
        random_state=_random_state,
        random_input=_random_input,
        random_group=_random_group,
    )


def car_gain_function(gains: CarGains):
    """Gain map (I, E) -> 3x2 matrix for use with the generic observer."""
    return lambda inv, err: car_gain_matrix(gains, inv, err)
