"""Velocity-aided inertial navigation with a symmetry-preserving observer.

State: body orientation quaternion q plus body-frame velocity v.  Sensors
deliver angular rate and specific acceleration (inputs) and velocity plus a
body-frame magnetic field vector (outputs).  The symmetry group is rigid
motions acting simultaneously on state, inputs and outputs; the observer
built here preserves it, so its error dynamics are autonomous: they depend
on the estimation error only, not on the flown trajectory or on the inputs.

Flat layouts used throughout:
    state  s = [q0 q1 q2 q3 v1 v2 v3]
    input  u = [w1 w2 w3 a1 a2 a3]          (angular rate, specific accel)
    output y = [v1 v2 v3 b1 b2 b3]          (velocity, body magnetic field)
    error  eta = [eq0 eq1 eq2 eq3 ev1 ev2 ev3]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .groupcore import SystemWithSymmetry
from .quaternions import (QUAT_IDENTITY, pure, qconj, qinv, qmul, qnormalize,
                          quat, rotate_vec, vec)


@dataclass(frozen=True)
class InsEnvironment:
    """Constant earth-frame gravity and normalized magnetic field.

    The magnetic field must have a nonzero horizontal component, otherwise
    the heading error is unobservable and its decay rate degenerates to zero.
    """
    A_grav: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 10.0]))
    B: np.ndarray = field(default_factory=lambda: np.array(
        [1.0 / np.sqrt(2.0), 0.0, 1.0 / np.sqrt(2.0)]))

    def __post_init__(self):
        a = np.asarray(self.A_grav, dtype=float)
        b = np.asarray(self.B, dtype=float)
        if a.shape != (3,) or b.shape != (3,):
            raise ValueError("A_grav and B must be 3-vectors")
        nb = np.linalg.norm(b)
        if nb == 0 or not np.all(np.isfinite(b)) or not np.all(np.isfinite(a)):
            raise ValueError("A_grav and B must be finite, B nonzero")
        b = b / nb
        if b[0] ** 2 + b[1] ** 2 <= 1e-12:
            raise ValueError("magnetic field needs a horizontal component "
                             "for heading observability")
        object.__setattr__(self, "A_grav", a)
        object.__setattr__(self, "B", b)

    @property
    def a_grav(self) -> float:
        """Scalar gravity; meaningful when A_grav points along earth z."""
        return float(self.A_grav[2])


@dataclass(frozen=True)
class InsGains:
    """Constant observer gains.

    M12/M21 couple the velocity output error into attitude, N11/N22/N33 damp
    the velocity estimate, and lam sets the heading decay: the linearized
    heading error decays at rate lam * ((B1)^2 + (B2)^2).
    """
    M12: float = 0.4
    M21: float = 0.4
    N11: float = 4.0
    N22: float = 4.0
    N33: float = 2.0
    lam: float = 4.0

    def __post_init__(self):
        vals = (self.M12, self.M21, self.N11, self.N22, self.N33, self.lam)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("gains must be finite")


def ins_pack(q, v) -> np.ndarray:
    return np.concatenate([np.asarray(q, dtype=float), np.asarray(v, dtype=float)])


def ins_unpack(state):
    state = np.asarray(state, dtype=float)
    return state[0:4], state[4:7]


def gain_matrices(gains: InsGains, env: InsEnvironment):
    """The four 3x3 gain blocks (attitude/velocity from each output error).

    The attitude-from-magnetometer block is scaled so that lam is exactly the
    linearized heading decay rate per unit of horizontal field energy.
    """
    b1, b2 = env.B[0], env.B[1]
    l_qv = np.array([[0.0, -gains.M12, 0.0],
                     [gains.M21, 0.0, 0.0],
                     [0.0, 0.0, 0.0]])
    l_vv = -np.diag([gains.N11, gains.N22, gains.N33])
    l_qb = 0.5 * gains.lam * np.array([[0.0, 0.0, 0.0],
                                       [0.0, 0.0, 0.0],
                                       [-b2, b1, 0.0]])
    l_vb = np.zeros((3, 3))
    return l_qv, l_vv, l_qb, l_vb


# --- plant ------------------------------------------------------------------


def ins_dynamics(state, inp, env: InsEnvironment) -> np.ndarray:
    """Kinematics of q and Newton's law for the body-frame velocity."""
    q, v = ins_unpack(state)
    u = np.asarray(inp, dtype=float)
    w, a = u[0:3], u[3:6]
    dq = 0.5 * qmul(q, pure(w))
    dv = np.cross(v, w) + rotate_vec(q, env.A_grav) + a
    return np.concatenate([dq, dv])


def ins_output(state, env: InsEnvironment) -> np.ndarray:
    q, v = ins_unpack(state)
    return np.concatenate([v, rotate_vec(q, env.B)])


def ins_project(state) -> np.ndarray:
    """Renormalize the quaternion part; the velocity part is untouched."""
    q, v = ins_unpack(state)
    return np.concatenate([qnormalize(q), v])


# --- rigid-motion group -------------------------------------------------


@dataclass(frozen=True)
class InsGroupElement:
    """Rotation (unit quaternion) and velocity offset."""
    q: np.ndarray
    v: np.ndarray


INS_GROUP_IDENTITY = InsGroupElement(QUAT_IDENTITY.copy(), np.zeros(3))


def ins_group_compose(g2: InsGroupElement, g1: InsGroupElement) -> InsGroupElement:
    """Element acting like g1 first, then g2."""
    return InsGroupElement(qmul(g1.q, g2.q), rotate_vec(g2.q, g1.v) + g2.v)


def ins_group_inverse(g: InsGroupElement) -> InsGroupElement:
    qi = qinv(g.q)
    return InsGroupElement(qi, -rotate_vec(qi, g.v))


def ins_act_state(g: InsGroupElement, state) -> np.ndarray:
    q, v = ins_unpack(state)
    return np.concatenate([qmul(q, g.q), rotate_vec(g.q, v) + g.v])


def ins_act_input(g: InsGroupElement, inp) -> np.ndarray:
    u = np.asarray(inp, dtype=float)
    w, a = u[0:3], u[3:6]
    w_new = rotate_vec(g.q, w)
    return np.concatenate([w_new, rotate_vec(g.q, a) - np.cross(g.v, w_new)])


def ins_act_output(g: InsGroupElement, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.concatenate([rotate_vec(g.q, y[0:3]) + g.v, rotate_vec(g.q, y[3:6])])


def ins_act_state_diff(g: InsGroupElement, tangent) -> np.ndarray:
    t = np.asarray(tangent, dtype=float)
    return np.concatenate([qmul(t[0:4], g.q), rotate_vec(g.q, t[4:7])])


def ins_moving_frame(state) -> InsGroupElement:
    """Group element carrying the state to (identity quaternion, zero velocity)."""
    q, v = ins_unpack(state)
    return InsGroupElement(qinv(q), -rotate_vec(qinv(q), v))


def ins_invariant_frame(state) -> np.ndarray:
    """Seven-by-six frame: three attitude fields, three velocity fields.

    Attitude columns are e_i * q (left translates of the unit-sphere tangent
    basis); velocity columns are e_i conjugated into the body frame.
    """
    q, _ = ins_unpack(state)
    cols = np.zeros((7, 6))
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        cols[0:4, i] = qmul(pure(e), q)
        cols[4:7, 3 + i] = rotate_vec(q, e)
    return cols


def ins_scalar_invariants(state_hat, inp) -> np.ndarray:
    """Inputs re-expressed in the frame normalized at the estimate."""
    q, v = ins_unpack(state_hat)
    u = np.asarray(inp, dtype=float)
    w, a = u[0:3], u[3:6]
    qi = qinv(q)
    return np.concatenate([rotate_vec(qi, w), rotate_vec(qi, a + np.cross(v, w))])


def ins_output_errors(state_hat, y, env: InsEnvironment):
    """Invariant output errors (E_v, E_b); zero iff the estimate explains y."""
    qh, vh = ins_unpack(state_hat)
    y = np.asarray(y, dtype=float)
    qi = qinv(qh)
    e_v = rotate_vec(qi, vh - y[0:3])
    e_b = env.B - rotate_vec(qi, y[3:6])
    return e_v, e_b


def ins_state_error(state_true, state_hat) -> np.ndarray:
    """Invariant error (eta_q, eta_v); identity is (unit quaternion, 0)."""
    q, v = ins_unpack(state_true)
    qh, vh = ins_unpack(state_hat)
    eta_q = qmul(qh, qinv(q))
    eta_v = rotate_vec(qinv(q), vh - v)
    return np.concatenate([eta_q, eta_v])


def ins_error_from_pair(q, v, qh, vh) -> np.ndarray:
    return ins_state_error(ins_pack(q, v), ins_pack(qh, vh))


def attitude_error_angle(eta) -> float:
    """Rotation angle of the attitude error in [0, pi]; blind to the sign
    ambiguity of quaternions (q and -q encode the same rotation)."""
    eta = np.asarray(eta, dtype=float)
    q = eta[0:4]
    c = abs(q[0]) / np.linalg.norm(q)
    return 2.0 * np.arccos(np.clip(c, -1.0, 1.0))


def velocity_error_norm(eta) -> float:
    return float(np.linalg.norm(np.asarray(eta, dtype=float)[4:7]))


# --- observer ----------------------------------------------------------------


def ins_observer_rhs(state_hat, inp, y, gains: InsGains, env: InsEnvironment) -> np.ndarray:
    """Copy of the dynamics plus invariant corrections from (E_v, E_b).

    The attitude correction enters as a pure quaternion multiplying q-hat
    from the left, so the norm of q-hat is structurally preserved.
    """
    qh, vh = ins_unpack(state_hat)
    u = np.asarray(inp, dtype=float)
    w, a = u[0:3], u[3:6]
    l_qv, l_vv, l_qb, l_vb = gain_matrices(gains, env)
    e_v, e_b = ins_output_errors(state_hat, y, env)
    corr_q = l_qv @ e_v + l_qb @ e_b
    corr_v = l_vv @ e_v + l_vb @ e_b
    dq = 0.5 * qmul(qh, pure(w)) + qmul(pure(corr_q), qh)
    dv = (np.cross(vh, w) + rotate_vec(qh, env.A_grav) + a
          + rotate_vec(qh, corr_v))
    return np.concatenate([dq, dv])


def ins_gain_function(gains: InsGains, env: InsEnvironment):
    """Constant 6x6 gain for the generic observer assembly."""
    l_qv, l_vv, l_qb, l_vb = gain_matrices(gains, env)
    lbar = np.block([[l_qv, l_qb], [l_vv, l_vb]])

    def gain(inv, err):
        return lbar

    return gain


# --- autonomous error dynamics and its linearization -------------------------


def ins_error_dynamics(eta, gains: InsGains, env: InsEnvironment) -> np.ndarray:
    """Flow of the invariant error; autonomous in the strongest sense.

    No trajectory data appears: the right-hand side is a function of eta
    alone (given gains and environment).  Both (identity, 0) and its
    antipode (-identity, 0) are equilibria.
    """
    eta = np.asarray(eta, dtype=float)
    eta_q, eta_v = eta[0:4], eta[4:7]
    l_qv, l_vv, l_qb, l_vb = gain_matrices(gains, env)
    qi = qinv(eta_q)
    e_v = rotate_vec(qi, eta_v)           # eta_q * eta_v * eta_q^-1
    e_b = env.B - rotate_vec(qi, env.B)
    d_eta_q = qmul(pure(l_qv @ e_v + l_qb @ e_b), eta_q)
    inner = env.A_grav + l_vv @ e_v + l_vb @ e_b
    d_eta_v = rotate_vec(eta_q, inner) - env.A_grav
    return np.concatenate([d_eta_q, d_eta_v])


@dataclass(frozen=True)
class InsLinearization:
    """Error linearization at zero error, split into the four classic blocks.

    ``full`` is the 6x6 matrix on (d_eta_q, d_eta_v); the named blocks cover
    it completely, with the heading row triangular over the other attitude
    components, so the spectrum of ``full`` is the union of block spectra.
    """
    longitudinal: np.ndarray   # (eta_q2, eta_v1)
    lateral: np.ndarray        # (eta_q1, eta_v2)
    vertical: float            # eta_v3
    heading_decay: float       # eta_q3 self-coupling
    heading_coupling: np.ndarray  # influence of (eta_q1, eta_q2) on eta_q3
    full: np.ndarray
    eigenvalues: np.ndarray


def _skew(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


def ins_linearized_blocks(gains: InsGains, env: InsEnvironment) -> InsLinearization:
    """Assemble the linearized error system and verify-friendly pieces.

    Ordering of the full matrix: [d_eta_q1..3, d_eta_v1..3].  The named
    longitudinal/lateral/vertical blocks require gravity along earth z.
    """
    l_qv, l_vv, l_qb, l_vb = gain_matrices(gains, env)
    full = np.block([
        [2.0 * l_qb @ _skew(env.B), l_qv],
        [2.0 * _skew(env.A_grav) + 2.0 * l_vb @ _skew(env.B), l_vv],
    ])
    if abs(env.A_grav[0]) > 0 or abs(env.A_grav[1]) > 0:
        raise ValueError("block decomposition assumes gravity along earth z")
    a_g = env.a_grav
    b1, b2, b3 = env.B
    longitudinal = np.array([[0.0, gains.M21], [-2.0 * a_g, -gains.N11]])
    lateral = np.array([[0.0, -gains.M12], [2.0 * a_g, -gains.N22]])
    vertical = -gains.N33
    heading_decay = -gains.lam * (b1 ** 2 + b2 ** 2)
    heading_coupling = gains.lam * b3 * np.array([b1, b2])
    eig = np.linalg.eigvals(full)
    order = np.lexsort((eig.imag, eig.real))
    return InsLinearization(longitudinal, lateral, vertical, heading_decay,
                            heading_coupling, full, eig[order])


def ins_block_spectrum(lin: InsLinearization) -> np.ndarray:
    """Union of the four block spectra, sorted like ``lin.eigenvalues``."""
    eig = np.concatenate([
        np.linalg.eigvals(lin.longitudinal),
        np.linalg.eigvals(lin.lateral),
        [complex(lin.vertical)],
        [complex(lin.heading_decay)],
    ])
    order = np.lexsort((eig.imag, eig.real))
    return eig[order]


# --- system bundle ------------------------------------------------------------


def _random_unit_quat(rng: np.random.Generator) -> np.ndarray:
    return qnormalize(rng.normal(size=4))


def ins_system(env: InsEnvironment | None = None) -> SystemWithSymmetry:
    env = env or InsEnvironment()

    def random_state(rng):
        return np.concatenate([_random_unit_quat(rng), rng.normal(0.0, 5.0, 3)])

    def random_input(rng):
        return np.concatenate([rng.normal(0.0, 1.0, 3), rng.normal(0.0, 5.0, 3)])

    def random_group(rng):
        return InsGroupElement(_random_unit_quat(rng), rng.normal(0.0, 5.0, 3))

    def validate(state):
        # loose bound: integrator stage states drift off the unit sphere a
        # little before the per-step renormalization catches them
        q, _ = ins_unpack(state)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-3:
            raise ValueError(f"quaternion norm {n} drifted from 1")

    def group_distance(g1: InsGroupElement, g2: InsGroupElement) -> float:
        dq = min(np.linalg.norm(g1.q - g2.q), np.linalg.norm(g1.q + g2.q))
        return dq + float(np.linalg.norm(g1.v - g2.v))

    return SystemWithSymmetry(
        name="ins",
        state_dim=6, input_dim=6, output_dim=6, group_dim=6, embed_dim=7,
        dynamics=lambda s, u: ins_dynamics(s, u, env),
        output=lambda s, u=None: ins_output(s, env),
        act_state=ins_act_state,
        act_input=ins_act_input,
        act_output=ins_act_output,
        act_state_diff=ins_act_state_diff,
        compose=ins_group_compose,
        inverse=ins_group_inverse,
        identity=INS_GROUP_IDENTITY,
        moving_frame=ins_moving_frame,
        invariant_frame=ins_invariant_frame,
        scalar_invariants=ins_scalar_invariants,
        output_error=lambda sh, u, y: np.concatenate(ins_output_errors(sh, y, env)),
        state_error=ins_state_error,
        error_identity=np.array([1.0, 0, 0, 0, 0, 0, 0]),
        validate_state=validate,
        project_state=ins_project,
        group_distance=group_distance,
        random_state=random_state,
        random_input=random_input,
        random_group=random_group,
    )
