"""Hamilton quaternion algebra on plain numpy arrays.

A quaternion is a shape-(4,) float array [q0, q1, q2, q3] with scalar part
first, so q = q0 + q1*e1 + q2*e2 + q3*e3 and e1*e2 = e3 (right-handed,
Hamilton convention).  Pure quaternions encode 3-vectors via ``pure(v)``;
``rotate(q, p)`` evaluates the conjugation q^-1 * p * q, which is how unit
quaternions act on vectors throughout this package.
"""

from __future__ import annotations

import numpy as np

# conjugation via conj(q)/|q|^2 is exact for any nonzero q, so this only
# guards against corrupted data; integrator stage states may drift ~1e-5
UNIT_TOL = 1e-3

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat(q0: float, q1: float, q2: float, q3: float) -> np.ndarray:
    return np.array([q0, q1, q2, q3], dtype=float)


def pure(v) -> np.ndarray:
    """Embed a 3-vector as a pure quaternion [0, v]."""
    v = np.asarray(v, dtype=float)
    return np.concatenate(([0.0], v))


def vec(q) -> np.ndarray:
    """Vector part of a quaternion."""
    return np.asarray(q, dtype=float)[1:4]


def qmul(p, q) -> np.ndarray:
    """Hamilton product p * q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    ps, pv = p[0], p[1:4]
    qs, qv = q[0], q[1:4]
    out = np.empty(4)
    out[0] = ps * qs - pv @ qv
    out[1:4] = ps * qv + qs * pv + np.cross(pv, qv)
    return out


def qconj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def qnorm(q) -> float:
    return float(np.linalg.norm(np.asarray(q, dtype=float)))


def qinv(q) -> np.ndarray:
    """Multiplicative inverse conj(q) / |q|^2; raises on the zero quaternion."""
    q = np.asarray(q, dtype=float)
    n2 = float(q @ q)
    if n2 == 0.0 or not np.isfinite(n2):
        raise ValueError("quaternion inverse undefined for zero or non-finite input")
    return qconj(q) / n2


def qnormalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize zero or non-finite quaternion")
    return q / n


def rotate(q, p) -> np.ndarray:
    """Conjugation q^-1 * p * q of a pure quaternion p by a unit quaternion q.

    Satisfies rotate(-q, p) == rotate(q, p).  Exact for any nonzero q since
    the inverse divides by the squared norm; q is still required to be unit
    to within UNIT_TOL to catch corrupted states early.
    """
    q = np.asarray(q, dtype=float)
    if abs(qnorm(q) - 1.0) > UNIT_TOL:
        raise ValueError("rotate expects a quaternion of norm close to 1")
    return qmul(qmul(qinv(q), p), q)


def rotate_vec(q, v) -> np.ndarray:
    """Same conjugation acting on a bare 3-vector, returning a 3-vector."""
    return vec(rotate(q, pure(v)))


def axis_angle(axis, angle: float) -> np.ndarray:
    """Unit quaternion [cos(a/2), sin(a/2)*axis] for a unit rotation axis."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("axis-angle quaternion needs a nonzero axis")
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def between_vectors(v_from, v_to) -> np.ndarray:
    """Unit quaternion r with rotate(r, v_from/|v_from|) == v_to/|v_to|.

    The rotation axis is collinear to v_from x v_to.  Raises for zero or
    antiparallel inputs, where the axis is undefined.
    """
    f = np.asarray(v_from, dtype=float)
    t = np.asarray(v_to, dtype=float)
    nf, nt = np.linalg.norm(f), np.linalg.norm(t)
    if nf == 0.0 or nt == 0.0:
        raise ValueError("between_vectors needs nonzero vectors")
    f = f / nf
    t = t / nt
    w = np.concatenate(([1.0 + f @ t], -np.cross(f, t)))
    nw = np.linalg.norm(w)
    if nw < 1e-8:
        raise ValueError("between_vectors undefined for antiparallel inputs")
    return w / nw


def rotation_angle(q) -> float:
    """Geodesic rotation angle 2*arccos(|q0|) of a unit quaternion, in [0, pi]."""
    q = np.asarray(q, dtype=float)
    c = abs(q[0]) / np.linalg.norm(q)
    return 2.0 * float(np.arccos(min(c, 1.0)))


def wedge(v, w) -> np.ndarray:
    """Cross product evaluated through the quaternion commutator (v*w - w*v)/2."""
    return vec(0.5 * (qmul(pure(v), pure(w)) - qmul(pure(w), pure(v))))
