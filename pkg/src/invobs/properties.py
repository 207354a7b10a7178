"""Structural property suite: the release gate behind ``verify``.

Each property draws random states, inputs and group elements, evaluates one
identity that the design promises (group axioms, equivariance of the moving
frame, invariance of dynamics, outputs, errors, frames and the assembled
observer, the pre-observer identity), and reports the worst residual over
the sample set.  A few behavioral checks (error decay, Lyapunov descent)
run short simulations.

Thresholds distinguish purely algebraic identities (1e-10) from identities
whose terms mix dynamics magnitudes (1e-8); the pre-observer identity is
held to 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .car import (CarGains, car_error_dynamics, car_gain_function, car_system,
                  default_car_input)
from .groupcore import (DomainError, GainFunction, SystemWithSymmetry,
                        invariant_state_error, observer_rhs)
from .ins import (InsEnvironment, InsGains, attitude_error_angle,
                  ins_gain_function, ins_pack, ins_state_error, ins_system)
from .quaternions import qinv, qmul, qnorm, qnormalize, rotate_vec
from .reactor import (ReactorInput, ReactorObserverGains, ReactorParams,
                      reactor_equilibrium, reactor_gain_function,
                      reactor_lyapunov, reactor_state_error, reactor_system)
from .sim import simulate_ins_scenario, simulate_pair, simulate_reactor_scenario
from .vtol import VtolTrajectorySpec, vtol_input_signal, vtol_reference

ALGEBRAIC_TOL = 1e-10
DYNAMIC_TOL = 1e-8
PRE_OBSERVER_TOL = 1e-12


@dataclass(frozen=True)
class PropertyResult:
    name: str
    system: str
    samples: int
    max_residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_residual < self.threshold

    def row(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (f"{self.name:<28} {self.system:<10} {self.samples:>7} "
                f"{self.max_residual:>12.3e} {self.threshold:>9.1e} {verdict}")

    def as_dict(self) -> dict:
        return {"name": self.name, "system": self.system,
                "samples": self.samples, "max_residual": self.max_residual,
                "threshold": self.threshold,
                "verdict": "pass" if self.passed else "fail"}


def _default_gain(system: str) -> GainFunction:
    if system == "car":
        return car_gain_function(CarGains())
    if system == "reactor":
        return reactor_gain_function(ReactorObserverGains(), ReactorParams())
    return ins_gain_function(InsGains(), InsEnvironment())


def _system_bundle(system: str) -> SystemWithSymmetry:
    if system == "car":
        return car_system()
    if system == "reactor":
        return reactor_system()
    return ins_system(InsEnvironment())


def _vecdiff(a, b) -> float:
    """Max-abs difference, scaled down when the reference is large.

    The reactor's exothermicity sits at 1e12, where pure float roundoff is
    already 1e-4 in absolute terms; dividing by max(1, |b|) keeps one
    threshold meaningful across systems without loosening O(1) checks.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


# every residual function gets the bundle, an rng, and the observer gain map
def _res_group_identity(sys, rng, gain):
    g = sys.random_group(rng)
    e = sys.identity
    return max(sys.group_distance(sys.compose(g, e), g),
               sys.group_distance(sys.compose(e, g), g),
               sys.group_distance(sys.compose(g, sys.inverse(g)), e),
               sys.group_distance(sys.compose(sys.inverse(g), g), e))


def _res_group_associativity(sys, rng, gain):
    g1, g2, g3 = (sys.random_group(rng) for _ in range(3))
    left = sys.compose(g3, sys.compose(g2, g1))
    right = sys.compose(sys.compose(g3, g2), g1)
    return sys.group_distance(left, right)


def _res_action_composition(sys, rng, gain):
    x = sys.random_state(rng)
    u = sys.random_input(rng)
    y = sys.output(x, u)
    g1, g2 = sys.random_group(rng), sys.random_group(rng)
    g21 = sys.compose(g2, g1)
    rx = _vecdiff(sys.act_state(g2, sys.act_state(g1, x)), sys.act_state(g21, x))
    ru = _vecdiff(sys.act_input(g2, sys.act_input(g1, u)), sys.act_input(g21, u))
    ry = _vecdiff(sys.act_output(g2, sys.act_output(g1, y)), sys.act_output(g21, y))
    re = _vecdiff(sys.act_state(sys.identity, x), x)
    return max(rx, ru, ry, re)


def _res_moving_frame_equivariance(sys, rng, gain):
    x = sys.random_state(rng)
    g = sys.random_group(rng)
    return sys.group_distance(
        sys.compose(sys.moving_frame(sys.act_state(g, x)), g),
        sys.moving_frame(x))


def _res_dynamics_invariance(sys, rng, gain):
    x = sys.random_state(rng)
    u = sys.random_input(rng)
    g = sys.random_group(rng)
    return _vecdiff(sys.dynamics(sys.act_state(g, x), sys.act_input(g, u)),
                    sys.act_state_diff(g, sys.dynamics(x, u)))


def _res_output_equivariance(sys, rng, gain):
    x = sys.random_state(rng)
    u = sys.random_input(rng)
    g = sys.random_group(rng)
    return _vecdiff(sys.output(sys.act_state(g, x), sys.act_input(g, u)),
                    sys.act_output(g, sys.output(x, u)))


def _res_output_error_invariance(sys, rng, gain):
    x, xh = sys.random_state(rng), sys.random_state(rng)
    u = sys.random_input(rng)
    g = sys.random_group(rng)
    y = sys.output(x, u)
    return _vecdiff(
        sys.output_error(sys.act_state(g, xh), sys.act_input(g, u),
                         sys.act_output(g, y)),
        sys.output_error(xh, u, y))


def _res_scalar_invariants(sys, rng, gain):
    x = sys.random_state(rng)
    u = sys.random_input(rng)
    g = sys.random_group(rng)
    return _vecdiff(sys.scalar_invariants(sys.act_state(g, x), sys.act_input(g, u)),
                    sys.scalar_invariants(x, u))


def _res_state_error_invariance(sys, rng, gain):
    x, xh = sys.random_state(rng), sys.random_state(rng)
    g = sys.random_group(rng)
    return _vecdiff(invariant_state_error(sys, sys.act_state(g, x),
                                          sys.act_state(g, xh)),
                    invariant_state_error(sys, x, xh))


def _res_frame_invariance(sys, rng, gain):
    x = sys.random_state(rng)
    g = sys.random_group(rng)
    w = sys.invariant_frame(x)
    w_moved = sys.invariant_frame(sys.act_state(g, x))
    pushed = np.column_stack([sys.act_state_diff(g, w[:, i])
                              for i in range(w.shape[1])])
    return _vecdiff(w_moved, pushed)


def _res_observer_invariance(sys, rng, gain):
    x, xh = sys.random_state(rng), sys.random_state(rng)
    u = sys.random_input(rng)
    g = sys.random_group(rng)
    y = sys.output(x, u)
    lhs = observer_rhs(sys, gain, sys.act_state(g, xh), sys.act_input(g, u),
                       sys.act_output(g, y))
    rhs = sys.act_state_diff(g, observer_rhs(sys, gain, xh, u, y))
    return _vecdiff(lhs, rhs)


def _res_pre_observer(sys, rng, gain):
    x = sys.random_state(rng)
    u = sys.random_input(rng)
    y = sys.output(x, u)
    return _vecdiff(observer_rhs(sys, gain, x, u, y), sys.dynamics(x, u))


_SHARED = [
    ("group-identity-inverse", _res_group_identity, ALGEBRAIC_TOL),
    ("group-associativity", _res_group_associativity, ALGEBRAIC_TOL),
    ("action-composition", _res_action_composition, ALGEBRAIC_TOL),
    ("moving-frame-equivariance", _res_moving_frame_equivariance, ALGEBRAIC_TOL),
    ("dynamics-invariance", _res_dynamics_invariance, DYNAMIC_TOL),
    ("output-equivariance", _res_output_equivariance, ALGEBRAIC_TOL),
    ("output-error-invariance", _res_output_error_invariance, ALGEBRAIC_TOL),
    ("scalar-invariant-invariance", _res_scalar_invariants, ALGEBRAIC_TOL),
    ("state-error-invariance", _res_state_error_invariance, ALGEBRAIC_TOL),
    ("frame-invariance", _res_frame_invariance, DYNAMIC_TOL),
    ("observer-invariance", _res_observer_invariance, DYNAMIC_TOL),
    ("pre-observer-identity", _res_pre_observer, PRE_OBSERVER_TOL),
]


def run_shared_properties(system: str, n_samples: int = 200, seed: int = 0,
                          gain: GainFunction | None = None,
                          names: tuple[str, ...] | None = None) -> list[PropertyResult]:
    """Sampled identities for one system; ``names`` restricts the selection."""
    sys = _system_bundle(system)
    gain = gain or _default_gain(system)
    results = []
    for name, fn, tol in _SHARED:
        if names is not None and name not in names:
            continue
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_samples):
            worst = max(worst, float(fn(sys, rng, gain)))
        results.append(PropertyResult(name, system, n_samples, worst, tol))
    return results


# --- quaternion algebra -------------------------------------------------------


def _random_quat(rng):
    q = rng.normal(0.0, 1.0, 4)
    while qnorm(q) < 1e-3:
        q = rng.normal(0.0, 1.0, 4)
    return q


def run_quaternion_properties(n_samples: int = 200, seed: int = 0) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    r_norm = r_hom = r_inv = 0.0
    for _ in range(n_samples):
        p, q = _random_quat(rng), _random_quat(rng)
        v = rng.normal(0.0, 2.0, 3)
        r_norm = max(r_norm, abs(qnorm(qmul(p, q)) - qnorm(p) * qnorm(q)))
        pu, qu = qnormalize(p), qnormalize(q)
        r_hom = max(r_hom, _vecdiff(rotate_vec(qmul(pu, qu), v),
                                    rotate_vec(qu, rotate_vec(pu, v))))
        r_inv = max(r_inv, _vecdiff(qmul(p, qinv(p)), [1.0, 0.0, 0.0, 0.0]))
    return [
        PropertyResult("norm-multiplicative", "quaternion", n_samples,
                       r_norm, ALGEBRAIC_TOL),
        PropertyResult("rotation-homomorphism", "quaternion", n_samples,
                       r_hom, ALGEBRAIC_TOL),
        PropertyResult("inverse-roundtrip", "quaternion", n_samples,
                       r_inv, ALGEBRAIC_TOL),
    ]


# --- behavioral checks --------------------------------------------------------


def run_car_convergence(gain: GainFunction | None = None,
                        seed: int = 0) -> PropertyResult:
    """Coupled 25 s run from a large offset must shrink the error 100-fold.

    The residual is the final-to-initial error ratio, so a destabilizing
    gain (the fault-injection fixture) pushes it far above threshold.
    """
    sys = car_system()
    gain = gain or _default_gain("car")
    rng = np.random.default_rng(seed)
    x0 = sys.random_state(rng)
    xh0 = sys.random_state(rng)
    e0 = float(np.linalg.norm(invariant_state_error(sys, x0, xh0)))
    try:
        # a destabilizing gain overflows before simulate_pair raises
        with np.errstate(over="ignore", invalid="ignore"):
            res = simulate_pair(sys, gain, x0, xh0, default_car_input, 25.0, 0.01)
        e1 = float(np.linalg.norm(invariant_state_error(
            sys, res.truth[-1], res.estimate[-1])))
        ratio = e1 / e0
    except (DomainError, ValueError, FloatingPointError):
        ratio = float("inf")
    return PropertyResult("car-error-decay", "car", 1, ratio, 1e-2)


def run_reactor_lyapunov(seed: int = 0) -> PropertyResult:
    """V(Ztilde, Ttilde) must never increase once the feed mismatch is gone."""
    params, inp, gains = ReactorParams(), ReactorInput(), ReactorObserverGains()
    xeq = reactor_equilibrium(params, inp)
    xh0 = np.array([2.5 * xeq[0], 0.15 * xeq[1], xeq[2] + 25.0])
    res = simulate_reactor_scenario(params, inp, gains, xeq, xh0, 120.0, 0.1)
    err = reactor_state_error(res.truth.T, res.estimate.T)
    v = reactor_lyapunov(err[0], err[2], gains.beta)
    idx = np.where(np.abs(err[1]) < 1e-6)[0]
    worst = float(np.diff(v[idx]).max()) if idx.size > 1 else float("inf")
    return PropertyResult("reactor-lyapunov-descent", "reactor", 1,
                          max(worst, 0.0), 1e-12)


def run_ins_error_decay(seed: int = 0) -> PropertyResult:
    """One second of the flight scenario must cut a large attitude error ~e^-2."""
    env, gains, spec = InsEnvironment(), InsGains(), VtolTrajectorySpec()
    x0 = vtol_reference(spec, env, 0.0).state
    s = np.sin(np.pi / 3.0) / np.sqrt(3.0)
    xh0 = ins_pack(np.array([np.cos(np.pi / 3.0), s, -s, s]),
                   np.array([10.0, -10.0, 5.0]))
    res = simulate_ins_scenario(env, gains, x0, xh0,
                                vtol_input_signal(spec, env), 1.0, 1e-3)
    a0 = attitude_error_angle(ins_state_error(res.truth[0], res.estimate[0]))
    a1 = attitude_error_angle(ins_state_error(res.truth[-1], res.estimate[-1]))
    return PropertyResult("ins-attitude-decay", "ins", 1, a1 / a0, 0.5)


def run_properties(system: str | None = None, n_samples: int = 200,
                   seed: int = 0,
                   gain_overrides: dict[str, GainFunction] | None = None
                   ) -> list[PropertyResult]:
    """Full registry; ``system`` limits to one system (or "quaternion").

    ``gain_overrides`` maps a system name to a replacement observer gain map,
    used by the sampled observer properties and the behavioral checks; it
    exists so tests can inject faults.
    """
    overrides = gain_overrides or {}
    results: list[PropertyResult] = []
    if system in (None, "quaternion"):
        results += run_quaternion_properties(n_samples, seed)
    for name in ("car", "reactor", "ins"):
        if system not in (None, name):
            continue
        gain = overrides.get(name)
        results += run_shared_properties(name, n_samples, seed, gain)
        if name == "car":
            results.append(run_car_convergence(gain, seed))
        elif name == "reactor":
            results.append(run_reactor_lyapunov(seed))
        else:
            results.append(run_ins_error_decay(seed))
    if not results:
        raise ValueError(f"unknown system {system!r}")
    return results


def report_lines(results: list[PropertyResult]) -> list[str]:
    header = (f"{'property':<28} {'system':<10} {'samples':>7} "
              f"{'max residual':>12} {'threshold':>9} verdict")
    return [header, "-" * len(header)] + [r.row() for r in results]
