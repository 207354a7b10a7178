"""Exothermic continuous stirred-tank reactor with unknown inlet concentration.

State [X_in, X, T]: inlet concentration (unknown constant), reactor
concentration, and temperature; only T is measured.  Concentrations carry an
arbitrary unit, so the model is symmetric under the scaling group g > 0 acting
as (X_in, X) -> (g X_in, g X) with the exothermicity constant c transforming
as c / g.  The observer below preserves that symmetry and converges globally
for any positive gains (beta, kappa), with positivity of the concentration
estimates built into its structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .groupcore import DomainError, SystemWithSymmetry

GAS_CONSTANT = 8.314  # J/(mol K)


@dataclass(frozen=True)
class ReactorParams:
    """Kinetics and heat-release constants.

    Only the ratio E_A / R enters the model.  The default exothermicity is
    sized so that the nominal operating point sits near 330 K and temperature
    actually responds to concentration on a simulable time scale.
    """
    E_A: float = 8750.0 * GAS_CONSTANT   # J/mol
    R: float = GAS_CONSTANT              # J/(mol K)
    k: float = 7.2e10                    # 1/s
    c: float = 2.0e12                    # K L/(mol s)

    def __post_init__(self):
        if not (self.E_A > 0 and self.R > 0 and self.k > 0 and self.c > 0):
            raise ValueError("reactor parameters must be positive")

    @property
    def ea_over_r(self) -> float:
        return self.E_A / self.R


@dataclass(frozen=True)
class ReactorInput:
    """Dilution rate, inlet temperature and external heat input."""
    D: float = 0.1       # 1/s
    T_in: float = 310.0  # K
    v: float = 0.0       # K/s

    def __post_init__(self):
        if self.D < 0:
            raise ValueError("dilution rate D must be nonnegative")


@dataclass(frozen=True)
class ReactorObserverGains:
    """Positive tuning constants of the globally convergent observer.

    kappa damps the temperature estimate; beta / kappa bounds the logarithmic
    excursion of the concentration estimates, so keep the ratio small when
    initial temperature errors of tens of kelvins are expected.
    """
    beta: float = 0.06
    kappa: float = 2.0

    def __post_init__(self):
        if not (self.beta > 0 and self.kappa > 0):
            raise ValueError("observer gains beta, kappa must be positive")


def arrhenius(T, params: ReactorParams):
    """Reaction-rate factor exp(-E_A / (R T))."""
    return np.exp(-params.ea_over_r / np.asarray(T, dtype=float))


def reactor_dynamics(state, inp: ReactorInput, params: ReactorParams) -> np.ndarray:
    """Plant equations; broadcasts over trailing batch axes of ``state``."""
    state = np.asarray(state, dtype=float)
    x_in, x, temp = state[0], state[1], state[2]
    r = arrhenius(temp, params)
    return np.stack([
        np.zeros_like(x_in),
        inp.D * (x_in - x) - params.k * r * x,
        inp.D * (inp.T_in - temp) + params.c * r * x + inp.v,
    ])


def reactor_output(state, inp=None):
    return np.asarray([np.asarray(state, dtype=float)[2]])


def reactor_validate_state(state) -> None:
    state = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(state)):
        raise DomainError("reactor state has non-finite entries")
    if np.any(state[0] <= 0) or np.any(state[1] <= 0):
        raise DomainError("reactor concentrations must stay positive")
    if np.any(state[2] <= 0):
        raise DomainError("reactor temperature must stay positive")


def reactor_observer_rhs_global(state_hat, inp: ReactorInput, y_T, gains:
                                ReactorObserverGains, params: ReactorParams) -> np.ndarray:
    """Globally convergent observer driven by the measured temperature.

    The measured T(t) replaces the estimated temperature inside every
    Arrhenius factor and in the dilution heat term, which is what makes the
    error dynamics triangular and globally contracting.  Broadcasts over
    trailing batch axes of ``state_hat``.
    """
    state_hat = np.asarray(state_hat, dtype=float)
    x_in, x, t_hat = state_hat[0], state_hat[1], state_hat[2]
    r = arrhenius(y_T, params)
    e = t_hat - y_T
    return np.stack([
        -gains.beta * r * e * params.c * x * x_in,
        inp.D * (x_in - x) - r * (params.k + gains.beta * e * params.c * x) * x,
        r * (1.0 - gains.kappa * e) * params.c * x + inp.D * (inp.T_in - y_T) + inp.v,
    ])


# --- scaling-group action ------------------------------------------------

SCALE_IDENTITY = 1.0


def scale_compose(g2: float, g1: float) -> float:
    return g2 * g1


def scale_inverse(g: float) -> float:
    if g <= 0:
        raise ValueError("scale factors must be positive")
    return 1.0 / g


def _act_state(g: float, state) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    return np.array([g * state[0], g * state[1], state[2]])


def _act_input(g: float, inp4) -> np.ndarray:
    inp4 = np.asarray(inp4, dtype=float)
    return np.array([inp4[0] / g, inp4[1], inp4[2], inp4[3]])


def _act_output(g: float, y) -> np.ndarray:
    return np.asarray(y, dtype=float).copy()


def _act_state_diff(g: float, tangent) -> np.ndarray:
    tangent = np.asarray(tangent, dtype=float)
    return np.array([g * tangent[0], g * tangent[1], tangent[2]])


def reactor_moving_frame(state) -> float:
    """Scale factor normalizing the reactor concentration to one."""
    x = np.asarray(state, dtype=float)[1]
    if x <= 0:
        raise DomainError("moving frame undefined for nonpositive concentration")
    return 1.0 / x


def reactor_invariant_frame(state) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    return np.diag([state[0], state[1], 1.0])


def reactor_invariants(state_hat, inp4) -> np.ndarray:
    """Complete invariants (X_in/X, T, cX, D, T_in, v); n + m - r = 6."""
    s = np.asarray(state_hat, dtype=float)
    u = np.asarray(inp4, dtype=float)
    return np.array([s[0] / s[1], s[2], u[0] * s[1], u[1], u[2], u[3]])


def reactor_output_error(state_hat, inp, y) -> np.ndarray:
    return np.asarray([np.asarray(state_hat, dtype=float)[2]
                       - np.asarray(y, dtype=float)[0]])


def reactor_state_error(state_true, state_hat) -> np.ndarray:
    """Invariant error (Ztilde, xitilde, Ttilde) in base/fiber coordinates."""
    st = np.asarray(state_true, dtype=float)
    sh = np.asarray(state_hat, dtype=float)
    z_t = np.log(sh[1] / st[1])
    xi_t = np.log(sh[1] / sh[0]) - np.log(st[1] / st[0])
    return np.stack([z_t, xi_t, sh[2] - st[2]])


# --- base/fiber coordinates and the error system ---------------------------


def reactor_to_base_fiber(state) -> np.ndarray:
    """(X_in, X, T) -> (Z, xi, T) with Z = log X and xi = log(X / X_in)."""
    state = np.asarray(state, dtype=float)
    if np.any(state[0] <= 0) or np.any(state[1] <= 0):
        raise DomainError("log coordinates need positive concentrations")
    return np.stack([np.log(state[1]), np.log(state[1] / state[0]), state[2]])


def reactor_from_base_fiber(zxit) -> np.ndarray:
    zxit = np.asarray(zxit, dtype=float)
    x = np.exp(zxit[0])
    return np.stack([x * np.exp(-zxit[1]), x, zxit[2]])


def reactor_log_dynamics(zxit, inp: ReactorInput, params: ReactorParams) -> np.ndarray:
    """Plant equations in (Z, xi, T); keeps concentrations positive under RK4.

    The inflow concentration is constant, so Z = log X and xi = log(X / X_in)
    move at the same rate.
    """
    zxit = np.asarray(zxit, dtype=float)
    z, xi, temp = zxit[0], zxit[1], zxit[2]
    r = arrhenius(temp, params)
    growth = inp.D * np.expm1(-xi) - params.k * r  # Xdot / X
    return np.stack([
        growth,
        growth * np.ones_like(z),
        inp.D * (inp.T_in - temp) + params.c * np.exp(z) * r + inp.v,
    ])


def reactor_observer_log_rhs(log_hat, inp: ReactorInput, y_T, gains:
                             ReactorObserverGains, params: ReactorParams) -> np.ndarray:
    """The observer of ``reactor_observer_rhs_global`` in (z, xi, T) coordinates.

    z = log X_hat and xi = log(X_hat / X_in_hat); integrating here keeps both
    concentration estimates positive for any step size.  Broadcasts over
    trailing batch axes.
    """
    log_hat = np.asarray(log_hat, dtype=float)
    z, xi, t_hat = log_hat[0], log_hat[1], log_hat[2]
    r = arrhenius(y_T, params)
    e = t_hat - y_T
    relative_feed = inp.D * np.expm1(-xi)
    heat = params.c * np.exp(z) * r
    return np.stack([
        relative_feed - r * params.k - gains.beta * e * heat,
        (relative_feed - r * params.k) * np.ones_like(z),
        (1.0 - gains.kappa * e) * heat + inp.D * (inp.T_in - y_T) + inp.v,
    ])


def reactor_error_dynamics(eta_tilde, z, xi, temp, dilution,
                           gains: ReactorObserverGains,
                           params: ReactorParams) -> np.ndarray:
    """Autonomous dynamics of (Ztilde, xitilde, Ttilde) along a true trajectory.

    The trajectory enters only through invariant quantities: exp(-xi) is
    X_in/X, and c exp(Z - E_A/(R T)) is the temperature-production rate.
    Broadcasts over trailing batch axes of ``eta_tilde``.
    """
    eta_tilde = np.asarray(eta_tilde, dtype=float)
    z_t, xi_t, t_t = eta_tilde[0], eta_tilde[1], eta_tilde[2]
    w = params.c * np.exp(z) * arrhenius(temp, params)
    feed_mismatch = dilution * np.exp(-xi) * np.expm1(-xi_t)
    ez = np.exp(z_t)
    return np.stack([
        feed_mismatch - gains.beta * w * ez * t_t,
        feed_mismatch * np.ones_like(z_t),
        w * np.expm1(z_t) - gains.kappa * w * ez * t_t,
    ])


def reactor_lyapunov(z_tilde, t_tilde, beta: float):
    """V = Ztilde + exp(-Ztilde) + beta Ttilde^2 / 2; >= 1, equality at zero error."""
    z_tilde = np.asarray(z_tilde, dtype=float)
    t_tilde = np.asarray(t_tilde, dtype=float)
    return z_tilde + np.exp(-z_tilde) + 0.5 * beta * t_tilde ** 2


# --- equilibrium ----------------------------------------------------------


def reactor_equilibrium(params: ReactorParams, inp: ReactorInput,
                        x_in: float = 1.0) -> np.ndarray:
    """Steady state at constant inputs, found by a 1-D root search on T.

    At steady state X = D X_in / (D + k exp(-E_A/(R T))), which reduces the
    temperature balance to a scalar equation.  The search brackets the first
    sign change above the adiabatic floor T_in + v/D.
    """
    if x_in <= 0:
        raise ValueError("inlet concentration must be positive")
    if inp.D <= 0:
        raise ValueError("equilibrium solver needs a positive dilution rate")

    def conc(temp):
        return inp.D * x_in / (inp.D + params.k * arrhenius(temp, params))

    def balance(temp):
        return (inp.D * (inp.T_in - temp) + inp.v
                + params.c * arrhenius(temp, params) * conc(temp))

    t_lo = max(inp.T_in + inp.v / inp.D, 1.0)
    if abs(balance(t_lo)) < 1e-14:
        t_star = t_lo
    else:
        t_hi = t_lo
        f_lo = balance(t_lo)
        for _ in range(200):
            t_hi += 10.0
            if balance(t_hi) * f_lo < 0:
                break
        else:
            raise ValueError("no temperature bracket found for the steady state")
        t_star = brentq(balance, t_lo, t_hi, xtol=1e-12, rtol=1e-15)
    return np.array([x_in, conc(t_star), t_star])


# --- invariant gain for the generic assembly -------------------------------


def _phi_expm1(z):
    """expm1(z) / z extended continuously by 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0.0
    out = np.where(nz, np.divide(np.expm1(z), np.where(nz, z, 1.0)), 1.0)
    return out


def reactor_gain_function(gains: ReactorObserverGains, params: ReactorParams):
    """Invariant gain (I, E) -> 3x1 matrix reproducing the global observer.

    The quotient (k exp(-E_A/(R That)) - k exp(-E_A/(R T))) / E is evaluated
    through expm1 so it stays accurate down to E = 0, where it becomes the
    temperature derivative of the reaction rate.
    """
    ea_r = params.ea_over_r

    def gain(inv, err):
        t_hat, c_x, dil = float(inv[1]), float(inv[2]), float(inv[3])
        e = float(err[0])
        t_meas = t_hat - e
        if t_meas <= 0 or t_hat <= 0:
            raise DomainError("gain evaluation needs positive temperatures")
        r_meas = np.exp(-ea_r / t_meas)
        r_hat = np.exp(-ea_r / t_hat)
        # (r_hat - r_meas) / E, stable for all E including 0
        delta = -ea_r * e / (t_hat * t_meas)
        quot = r_hat * _phi_expm1(delta) * ea_r / (t_hat * t_meas)
        drive = gains.beta * c_x * r_meas
        return np.array([
            [-drive],
            [-drive + params.k * quot],
            [-gains.kappa * c_x * r_meas - c_x * quot + dil],
        ])

    return gain


# --- system bundle ----------------------------------------------------------


def _random_state(rng: np.random.Generator) -> np.ndarray:
    return np.array([
        np.exp(rng.uniform(np.log(0.2), np.log(5.0))),
        np.exp(rng.uniform(np.log(0.2), np.log(5.0))),
        rng.uniform(280.0, 380.0),
    ])


def _random_input(rng: np.random.Generator) -> np.ndarray:
    base = ReactorParams()
    return np.array([
        base.c * 10.0 ** rng.uniform(-0.3, 0.3),
        rng.uniform(0.02, 0.3),
        rng.uniform(290.0, 330.0),
        rng.uniform(-1.0, 1.0),
    ])


def _random_group(rng: np.random.Generator) -> float:
    return float(10.0 ** rng.uniform(-1.0, 1.0))


def reactor_system(params: ReactorParams | None = None,
                   gains: ReactorObserverGains | None = None) -> SystemWithSymmetry:
    """Reactor bundled for the generic machinery.

    The bundle's input vector is [c, D, T_in, v]: the exothermicity rides
    along with the inputs because the scaling group acts on it.
    """
    params = params or ReactorParams()

    def dynamics(state, inp4):
        p = ReactorParams(E_A=params.E_A, R=params.R, k=params.k, c=float(inp4[0]))
        return reactor_dynamics(state, ReactorInput(*np.asarray(inp4, float)[1:4]), p)

    def output(state, inp4=None):
        return reactor_output(state)

    def output_error(state_hat, inp4, y):
        return reactor_output_error(state_hat, inp4, y)

    return SystemWithSymmetry(
        name="reactor",
        state_dim=3, input_dim=4, output_dim=1, group_dim=1,
        dynamics=dynamics,
        output=output,
        act_state=_act_state,
        act_input=_act_input,
        act_output=_act_output,
        act_state_diff=_act_state_diff,
        compose=scale_compose,
        inverse=scale_inverse,
        identity=SCALE_IDENTITY,
        moving_frame=reactor_moving_frame,
        invariant_frame=reactor_invariant_frame,
        scalar_invariants=reactor_invariants,
        output_error=output_error,
        state_error=reactor_state_error,
        error_identity=np.zeros(3),
        validate_state=reactor_validate_state,
        group_distance=lambda g1, g2: abs(g1 - g2) / max(abs(g2), 1e-300),
        random_state=_random_state,
        random_input=_random_input,
        random_group=_random_group,
    )
