"""Two-mass robot on plastically yielding ground: types, force laws, dynamics.

The robot is a body (mass ``m_b``) stacked above a flat foot (mass ``m_f``)
with a force actuator between them.  The ground acts as a unidirectional
spring: it pushes back proportionally to intrusion depth while the foot
descends, holds any load up to that threshold while the foot is at rest, and
exerts nothing once the foot retracts (the crater does not spring back).

Everything here is expressed in the dimensionless unit system defined by
:class:`Scales`: lengths in units of ``m_t*g/k_g`` (the depth at which the
ground supports the robot's total weight), time in units of
``sqrt(m_t/k_g)``, and force in units of the total weight ``m_t*g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Union

import numpy as np

G_DEFAULT = 9.81  # m/s^2

# Guard tolerances for the hybrid system.  Both are far below any physically
# meaningful scale of the dimensionless model.
VEL_TOL = 1e-9     # |v_f| below this counts as "foot at rest"
EPS_YIELD = 1e-9   # hysteresis band on the static support cone


class Phase(IntEnum):
    """Discrete mode of the foot-ground contact."""

    FLIGHT = 0
    YIELDING = 1
    STATIC = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Params:
    """Dimensionless model parameters.

    r_m     body mass over foot mass, > 0
    s       actuator stroke limit (gap x_b - x_f must stay in [0, s])
    u_max   actuator force bound (math.inf for unbounded)
    l0      rest length of the virtual leg spring; defaults to s/2
    """

    r_m: float
    s: float
    u_max: float = math.inf
    l0: float | None = None

    def __post_init__(self) -> None:
        if not self.r_m > 0:
            raise ValueError(f"mass ratio r_m must be positive, got {self.r_m}")
        if not self.s > 0:
            raise ValueError(f"stroke limit s must be positive, got {self.s}")
        if not self.u_max > 0:
            raise ValueError(f"force limit u_max must be positive, got {self.u_max}")
        if self.l0 is None:
            object.__setattr__(self, "l0", 0.5 * self.s)

    @property
    def foot_weight(self) -> float:
        """Weight of the foot alone, in units of total weight."""
        return 1.0 / (1.0 + self.r_m)

    @property
    def hover_force(self) -> float:
        """Actuator force that exactly supports the body weight."""
        return self.r_m / (1.0 + self.r_m)


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional robot and ground parameters (SI units)."""

    m_b: float          # body mass, kg
    m_f: float          # foot mass, kg
    k_g: float          # ground stiffness, N/m
    S: float            # actuator stroke, m
    U_max: float = math.inf  # actuator force bound, N
    V0: float = 0.0     # impact velocity, m/s (<= 0, downward)
    g: float = G_DEFAULT

    def __post_init__(self) -> None:
        for name in ("m_b", "m_f", "k_g", "S", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.U_max > 0:
            raise ValueError(f"U_max must be positive, got {self.U_max}")
        if self.V0 > 0:
            raise ValueError(f"impact velocity V0 must be <= 0, got {self.V0}")

    @property
    def m_t(self) -> float:
        return self.m_b + self.m_f


@dataclass(frozen=True)
class Scales:
    """Unit distance, time, and force of the dimensionless system.

    Built from total mass, ground stiffness, and gravity so that
    x_s == u_s / k_g and g * tau_s**2 == x_s.
    """

    x_s: float    # m
    tau_s: float  # s
    u_s: float    # N

    @classmethod
    def from_physical(cls, p: PhysicalParams) -> "Scales":
        m_t = p.m_t
        return cls(x_s=m_t * p.g / p.k_g, tau_s=math.sqrt(m_t / p.k_g), u_s=m_t * p.g)


@dataclass(frozen=True)
class State:
    """Dimensionless robot state plus work accumulators.

    w_act is the running integral of u*(v_b - v_f); w_gnd accumulates the
    work extracted by the ground force, integral of gamma*(-v_f), and is
    nonnegative at all times.
    """

    x_b: float
    v_b: float
    x_f: float
    v_f: float
    w_act: float = 0.0
    w_gnd: float = 0.0
    tau: float = 0.0

    @property
    def gap(self) -> float:
        return self.x_b - self.x_f

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.x_b, self.v_b, self.x_f, self.v_f, self.w_act, self.w_gnd]
        )

    @classmethod
    def from_array(cls, y: np.ndarray, tau: float = 0.0) -> "State":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]),
                   float(y[4]), float(y[5]), tau)


def impact_state(params: Params, v0: float) -> State:
    """State at touchdown: body one rest length up, both masses moving at v0."""
    return State(x_b=params.l0, v_b=v0, x_f=0.0, v_f=v0)


# ---------------------------------------------------------------------------
# Controllers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Impedance:
    """Virtual spring-damper leg: u = -k_p*(gap - l0) - k_d*(v_b - v_f).

    With ``saturate`` set, u is clamped to the params force bound.
    """

    k_p: float
    k_d: float
    saturate: bool = False

    def __post_init__(self) -> None:
        if self.k_p < 0 or self.k_d < 0:
            raise ValueError(f"impedance gains must be >= 0, got {self.k_p}, {self.k_d}")


@dataclass(frozen=True)
class BangBang:
    """Piecewise-constant force at +/- u_max, starting positive.

    The sign flips at each entry of ``switch_times`` (strictly ascending,
    all >= 0).
    """

    u_max: float
    switch_times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.u_max > 0:
            raise ValueError(f"u_max must be positive, got {self.u_max}")
        times = tuple(float(t) for t in self.switch_times)
        object.__setattr__(self, "switch_times", times)
        if any(t < 0 for t in times):
            raise ValueError(f"switch times must be >= 0, got {times}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"switch times must be strictly ascending, got {times}")


@dataclass(frozen=True)
class ConstantForce:
    u: float


@dataclass(frozen=True)
class Rigid:
    """Body and foot locked at their initial separation; no actuator force."""


Controller = Union[Impedance, BangBang, ConstantForce, Rigid]


def control_force(controller: Controller, state: State, params: Params) -> float:
    """Actuator force commanded at the given state.

    Rigid is a sentinel: the locked robot has an internal constraint force,
    not a commanded one, and this returns 0.0 for it.
    """
    if isinstance(controller, Impedance):
        u = (-controller.k_p * (state.gap - params.l0)
             - controller.k_d * (state.v_b - state.v_f))
        if controller.saturate:
            u = min(max(u, -params.u_max), params.u_max)
        return u
    if isinstance(controller, BangBang):
        flips = sum(1 for t in controller.switch_times if t <= state.tau)
        return controller.u_max if flips % 2 == 0 else -controller.u_max
    if isinstance(controller, ConstantForce):
        return controller.u
    if isinstance(controller, Rigid):
        return 0.0
    raise TypeError(f"unknown controller {controller!r}")


# ---------------------------------------------------------------------------
# Ground force and stance dynamics
# ---------------------------------------------------------------------------

def grf(x_f: float, v_f: float, phase: Phase, required: float = 0.0) -> float:
    """Ground reaction force gamma >= 0.

    Flight: zero.  Yielding: -x_f (depth-proportional push-back).  Static:
    the set-valued contact resolves to whatever force holds the foot still,
    so ``required`` is clamped into [0, -x_f].
    """
    if phase == Phase.FLIGHT:
        return 0.0
    if phase == Phase.YIELDING:
        return max(-x_f, 0.0)
    cap = max(-x_f, 0.0)
    return min(max(required, 0.0), cap)


def required_support(u: float, r_m: float) -> float:
    """Ground force needed to hold the foot static under actuator force u."""
    return u + 1.0 / (1.0 + r_m)


def dynamics(state: State, u: float, phase: Phase, r_m: float) -> np.ndarray:
    """Time derivative of [x_b, v_b, x_f, v_f, w_act, w_gnd].

    Body: dv_b = -1 + ((1+r_m)/r_m)*u in every phase.  Foot: yielding
    dv_f = -1 - (1+r_m)*(x_f + u); flight dv_f = -1 - (1+r_m)*u; static the
    foot is held (dx_f = dv_f = 0).  For the rigidly locked robot use
    :func:`rigid_dynamics` instead.
    """
    a_b = -1.0 + (1.0 + r_m) / r_m * u
    if phase == Phase.YIELDING:
        v_f = state.v_f
        a_f = -1.0 - (1.0 + r_m) * (state.x_f + u)
        gamma = -state.x_f
    elif phase == Phase.FLIGHT:
        v_f = state.v_f
        a_f = -1.0 - (1.0 + r_m) * u
        gamma = 0.0
    else:
        v_f = 0.0
        a_f = 0.0
        gamma = grf(state.x_f, 0.0, Phase.STATIC, required_support(u, r_m))
    return np.array([
        state.v_b,
        a_b,
        v_f,
        a_f,
        u * (state.v_b - v_f),
        -gamma * v_f,
    ])


def rigid_dynamics(x: float, v: float, phase: Phase) -> tuple[float, float]:
    """Lumped single-mass dynamics of the locked robot at foot position x."""
    if phase == Phase.YIELDING:
        return v, -1.0 - x
    if phase == Phase.FLIGHT:
        return v, -1.0
    return 0.0, 0.0


def phase_transition(state: State, u: float, phase: Phase, r_m: float,
                     eps_yield: float = EPS_YIELD,
                     vel_tol: float = VEL_TOL) -> Phase:
    """Next phase at a guard crossing.

    The foot stays static exactly while 0 <= required_support <= -x_f; the
    cone boundaries carry a hysteresis band eps_yield so that the contact
    cannot chatter.
    """
    req = required_support(u, r_m)
    if phase == Phase.YIELDING:
        if abs(state.v_f) <= vel_tol:
            if req < -eps_yield:
                return Phase.FLIGHT
            if req <= -state.x_f + eps_yield:
                return Phase.STATIC
        return Phase.YIELDING
    if phase == Phase.STATIC:
        if req > -state.x_f + eps_yield:
            return Phase.YIELDING
        if req < -eps_yield:
            return Phase.FLIGHT
        return Phase.STATIC
    # flight: contact resumes when the foot is in the ground and descending
    if state.x_f <= eps_yield and state.v_f <= -vel_tol:
        return Phase.YIELDING
    if state.x_f <= -eps_yield and state.v_f <= vel_tol:
        return Phase.YIELDING
    return Phase.FLIGHT


# ---------------------------------------------------------------------------
# Closed-form analytics
# ---------------------------------------------------------------------------

def body_arrest_force(x_b: float, v_b: float, x_f: float, r_m: float) -> float:
    """Constant force that brings the body to rest in the remaining stroke."""
    gap = x_b - x_f
    if gap <= 0:
        raise ValueError(f"body-foot gap must be positive, got {gap}")
    return r_m / (1.0 + r_m) * (1.0 + v_b * v_b / (2.0 * gap))


def terminal_residual(state: State, r_m: float) -> float:
    """Support margin at foot rest: x_f + foot weight + body-arrest force.

    Nonpositive means the ground at the current depth can hold the force
    needed to arrest the body; zero at the depth-optimal landing.
    """
    u_b = body_arrest_force(state.x_b, state.v_b, state.x_f, r_m)
    return state.x_f + 1.0 / (1.0 + r_m) + u_b


def rigid_depth(v0: float) -> float:
    """Maximum penetration depth of the rigidly locked robot, 1 + sqrt(1 + v0^2)."""
    if v0 > 0:
        raise ValueError(f"impact velocity must be <= 0, got {v0}")
    return 1.0 + math.sqrt(1.0 + v0 * v0)


# ---------------------------------------------------------------------------
# Nondimensionalization
# ---------------------------------------------------------------------------

def to_dimensionless(p: PhysicalParams) -> tuple[Params, float, Scales]:
    """Convert physical parameters to (Params, v0, Scales)."""
    scales = Scales.from_physical(p)
    u_max = p.U_max / scales.u_s if math.isfinite(p.U_max) else math.inf
    params = Params(
        r_m=p.m_b / p.m_f,
        s=p.S / scales.x_s,
        u_max=u_max,
    )
    v0 = p.V0 * scales.tau_s / scales.x_s
    return params, v0, scales


def from_dimensionless(params: Params, v0: float, scales: Scales) -> PhysicalParams:
    """Inverse of :func:`to_dimensionless` (round-trips to ~1e-12 relative)."""
    g = scales.x_s / (scales.tau_s * scales.tau_s)
    m_t = scales.u_s / g
    m_f = m_t / (1.0 + params.r_m)
    u_max = params.u_max * scales.u_s if math.isfinite(params.u_max) else math.inf
    return PhysicalParams(
        m_b=m_t - m_f,
        m_f=m_f,
        k_g=scales.u_s / scales.x_s,
        S=params.s * scales.x_s,
        U_max=u_max,
        V0=v0 * scales.x_s / scales.tau_s,
        g=g,
    )


__all__ = [
    "G_DEFAULT", "VEL_TOL", "EPS_YIELD",
    "Phase", "Params", "PhysicalParams", "Scales", "State",
    "Impedance", "BangBang", "ConstantForce", "Rigid", "Controller",
    "impact_state", "control_force", "grf", "required_support", "dynamics",
    "rigid_dynamics", "phase_transition", "body_arrest_force",
    "terminal_residual", "rigid_depth", "to_dimensionless", "from_dimensionless",
]
