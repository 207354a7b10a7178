"""Generic machinery for observers built from a symmetry group action.

A system bundle collects the dynamics f(x, u), the output h(x, u), a group
action (on states, inputs and outputs), the moving frame gamma(x) solving the
normalization equations, the invariant frame W(x), a complete set of scalar
invariants I(x, u), and the invariant output error E(xhat, u, y).  States and
tangents are flat float arrays; group elements are whatever the per-system
compose/inverse callables accept.

The observer right-hand side is assembled uniformly as

    F(xhat, u, y) = f(xhat, u) + W(xhat) @ Lbar(I, E) @ E

where Lbar is any gain map with finite entries.  W has shape
(embed_dim, state_dim): for most systems embed_dim == state_dim, but a state
containing a unit quaternion is stored with 4 numbers for a 3-dimensional
factor, so the frame matrix is rectangular there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

Array = np.ndarray

# Gain map (invariants, output error) -> (state_dim, output_dim) matrix.
GainFunction = Callable[[Array, Array], Array]


class DomainError(ValueError):
    """A state left the domain the system is defined on (e.g. X <= 0)."""


@dataclass(frozen=True)
class SystemWithSymmetry:
    """System + group action + moving-frame data, as flat callables.

    ``state_error`` may override the default transversal error
    phi_gamma(x)(xhat) - phi_gamma(x)(x) with a group-multiplicative variant;
    ``error_identity`` is the value the error takes at xhat == x (zeros for
    additive errors, a group identity for multiplicative ones).
    """

    name: str
    state_dim: int
    input_dim: int
    output_dim: int
    group_dim: int
    dynamics: Callable[[Array, Array], Array]
    output: Callable[[Array, Array], Array]
    act_state: Callable[[Any, Array], Array]
    act_input: Callable[[Any, Array], Array]
    act_output: Callable[[Any, Array], Array]
    act_state_diff: Callable[[Any, Array], Array]
    compose: Callable[[Any, Any], Any]
    inverse: Callable[[Any], Any]
    identity: Any
    moving_frame: Callable[[Array], Any]
    invariant_frame: Callable[[Array], Array]
    scalar_invariants: Callable[[Array, Array], Array]
    output_error: Callable[[Array, Array, Array], Array]
    embed_dim: int = 0  # 0 means equal to state_dim
    state_error: Callable[[Array, Array], Array] | None = None
    error_identity: Array | None = None
    validate_state: Callable[[Array], None] | None = None
    project_state: Callable[[Array], Array] | None = None
    group_distance: Callable[[Any, Any], float] | None = None
    random_state: Callable[[np.random.Generator], Array] | None = None
    random_input: Callable[[np.random.Generator], Array] | None = None
    random_group: Callable[[np.random.Generator], Any] | None = None

    @property
    def flat_dim(self) -> int:
        return self.embed_dim if self.embed_dim else self.state_dim

    @property
    def n_invariants(self) -> int:
        return self.state_dim + self.input_dim - self.group_dim


def observer_rhs(sys: SystemWithSymmetry, gain: GainFunction,
                 xhat: Array, u: Array, y: Array) -> Array:
    """f(xhat, u) + W(xhat) @ Lbar(I, E) @ E with E the invariant output error."""
    if sys.validate_state is not None:
        sys.validate_state(xhat)
    err = sys.output_error(xhat, u, y)
    inv = sys.scalar_invariants(xhat, u)
    lbar = np.asarray(gain(inv, err), dtype=float)
    if lbar.shape != (sys.state_dim, sys.output_dim):
        raise ValueError(
            f"gain matrix has shape {lbar.shape}, "
            f"expected {(sys.state_dim, sys.output_dim)}")
    if not np.all(np.isfinite(lbar)):
        raise ValueError("gain matrix has non-finite entries")
    return sys.dynamics(xhat, u) + sys.invariant_frame(xhat) @ (lbar @ err)


def invariant_state_error(sys: SystemWithSymmetry, x: Array, xhat: Array) -> Array:
    """Invariant state error between a true state and an estimate.

    Equals zero (or the system's error identity, for multiplicative variants)
    iff xhat == x, and is unchanged when both arguments are moved by the same
    group element.
    """
    if sys.state_error is not None:
        return sys.state_error(x, xhat)
    g = sys.moving_frame(x)
    return sys.act_state(g, xhat) - sys.act_state(g, x)


def fd_jacobian(fn: Callable[[Array], Array], x: Array, step: float = 1e-6) -> Array:
    """Central-difference Jacobian of fn at x; raises on non-finite values."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fn(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = step
        jac[:, j] = (np.asarray(fn(x + dx)) - np.asarray(fn(x - dx))) / (2.0 * step)
    if not np.all(np.isfinite(jac)):
        raise ValueError("finite-difference Jacobian has non-finite entries")
    return jac


_COND_LIMIT = 1e12


def invariantize_linear_gain(sys: SystemWithSymmetry, xbar: Array, ubar: Array,
                             L: Array, *, equilibrium_tol: float = 1e-8,
                             fd_step: float = 1e-6) -> Array:
    """Lift a linear observer gain L at an equilibrium to a constant invariant gain.

    Returns Lbar = -W(xbar)^-1 L V^-1 with V the output-error sensitivity
    dE/dy at (xbar, ubar, h(xbar, ubar)).  The assembled observer then has
    local derivatives A + L C in the state, B + L D in the input and -L in
    the measurement, matching the classical Luenberger design.
    """
    xbar = np.asarray(xbar, dtype=float)
    ubar = np.asarray(ubar, dtype=float)
    L = np.asarray(L, dtype=float)
    resid = float(np.linalg.norm(sys.dynamics(xbar, ubar)))
    if resid > equilibrium_tol:
        raise ValueError(
            f"(xbar, ubar) is not an equilibrium: |f| = {resid:.3e} "
            f"exceeds {equilibrium_tol:.1e}")
    ybar = sys.output(xbar, ubar)
    V = fd_jacobian(lambda y: sys.output_error(xbar, ubar, y), ybar, fd_step)
    W = sys.invariant_frame(xbar)
    cond_v = np.linalg.cond(V)
    if not np.isfinite(cond_v) or cond_v > _COND_LIMIT:
        raise ValueError(f"output-error sensitivity V is singular (cond {cond_v:.3e})")
    if W.shape[0] == W.shape[1]:
        cond_w = np.linalg.cond(W)
        if not np.isfinite(cond_w) or cond_w > _COND_LIMIT:
            raise ValueError(f"invariant frame W is singular (cond {cond_w:.3e})")
        w_inv_l = np.linalg.solve(W, L)
    else:
        w_inv_l = np.linalg.pinv(W) @ L
    return -w_inv_l @ np.linalg.inv(V)


def spectrum_gap(eigs_a, eigs_b) -> float:
    """Largest pairwise distance under the best matching of two spectra.

    Eigenvalue arrays come back from the linear-algebra routines in an
    arbitrary order, and ties in the real part make naive sorting unstable;
    optimal assignment gives an order-free comparison.
    """
    from scipy.optimize import linear_sum_assignment

    a = np.atleast_1d(np.asarray(eigs_a, dtype=complex))
    b = np.atleast_1d(np.asarray(eigs_b, dtype=complex))
    if a.shape != b.shape:
        raise ValueError("spectra must have equal length")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())
