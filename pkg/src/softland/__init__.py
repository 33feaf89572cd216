"""Soft-landing toolkit: impact simulation and control optimization for a
two-mass robot landing on plastically yielding ground."""

from .model import (BangBang, ConstantForce, Controller, Impedance, Params,
                    Phase, PhysicalParams, Rigid, Scales, State,
                    body_arrest_force, control_force, dynamics,
                    from_dimensionless, grf, impact_state, phase_transition,
                    required_support, rigid_depth, rigid_dynamics,
                    terminal_residual, to_dimensionless)
from .sim import (SimEvent, SimOptions, SimOutcome, SimulationError,
                  Trajectory, count_steps, simulate, simulate_outcome)

__version__ = "0.1.0"
