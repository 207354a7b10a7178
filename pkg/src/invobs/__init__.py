"""Symmetry-preserving nonlinear observers.

Build observers whose correction terms respect a system's transformation
group, so the estimation error obeys autonomous (or input-indexed) dynamics
with convergence basins that do not depend on the unknown trajectory.
Three worked systems ship with the library: a planar vehicle under SE(2),
an exothermic reactor under concentration rescaling, and a quaternion
inertial navigation system under its flat-output symmetry.
"""

from .groupcore import (DomainError, SystemWithSymmetry, fd_jacobian,
                        invariant_state_error, invariantize_linear_gain,
                        observer_rhs, spectrum_gap)
from .car import CarGains, car_system, car_gain_function, default_car_input
from .reactor import (ReactorInput, ReactorObserverGains, ReactorParams,
                      reactor_equilibrium, reactor_gain_function, reactor_system)
from .ins import (InsEnvironment, InsGains, ins_gain_function,
                  ins_linearized_blocks, ins_system)
from .vtol import VtolTrajectorySpec, vtol_input_signal, vtol_reference
from .sim import (SensorNoiseSpec, SimResult, rk4_step, simulate_ins_scenario,
                  simulate_ode, simulate_pair, simulate_reactor_scenario)
from .config import ScenarioConfig, load_config, preset
from .properties import run_properties

__version__ = "0.1.0"

__all__ = [
    "CarGains", "DomainError", "InsEnvironment", "InsGains", "ReactorInput",
    "ReactorObserverGains", "ReactorParams", "ScenarioConfig",
    "SensorNoiseSpec", "SimResult", "SystemWithSymmetry",
    "VtolTrajectorySpec", "car_gain_function", "car_system",
    "default_car_input", "fd_jacobian", "ins_gain_function",
    "ins_linearized_blocks", "ins_system", "invariant_state_error",
    "invariantize_linear_gain", "load_config", "observer_rhs", "preset",
    "reactor_equilibrium", "reactor_gain_function", "reactor_system",
    "rk4_step", "run_properties", "simulate_ins_scenario", "simulate_ode",
    "simulate_pair", "simulate_reactor_scenario", "spectrum_gap",
    "vtol_input_signal", "vtol_reference",
]
