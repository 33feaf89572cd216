"""Single-impact simulation: options, outcomes, trajectories, CSV export."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import IO, Iterable

import numpy as np

from . import _integrator as _core
from .model import (BangBang, ConstantForce, Controller, Impedance, Params,
                    Phase, Rigid, State)

_STATUS_NAMES = {
    _core.ST_TAU_MAX: "horizon",
    _core.ST_SETTLED: "settled",
    _core.ST_STROKE: "stroke_violation",
    _core.ST_FOOT_REST: "foot_rest",
    _core.ST_NONFINITE: "nonfinite",
    _core.ST_STEP_FAIL: "step_failure",
    _core.ST_BUFFER_FULL: "event_buffer_full",
}


class SimulationError(RuntimeError):
    """Integration failed (step collapse or non-finite state)."""


@dataclass(frozen=True)
class SimOptions:
    """Integration and termination controls.

    rel_tol/abs_tol   local error tolerances of the adaptive RK step
    event_tol         guard-crossing localization tolerance (time units)
    tau_max           simulation horizon
    settle_vel        threshold on |v_b| and on the body force imbalance
                      below which a static-phase run counts as settled
    record_dt         trajectory sampling interval; 0 records events only
    stop_at_rest      terminate at the first foot-rest (static entry)
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    event_tol: float = 1e-12
    tau_max: float = 50.0
    settle_vel: float = 1e-6
    record_dt: float = 0.01
    stop_at_rest: bool = False

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "event_tol", "tau_max", "settle_vel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.record_dt < 0:
            raise ValueError("record_dt must be >= 0")


@dataclass(frozen=True)
class SimEvent:
    tau: float
    kind: str


@dataclass
class Trajectory:
    """Sampled trajectory: periodic samples plus one sample at every event."""

    tau: np.ndarray      # (n,)
    states: np.ndarray   # (n, 6): x_b, v_b, x_f, v_f, w_act, w_gnd
    phase: np.ndarray    # (n,) Phase values
    u: np.ndarray        # (n,)
    gamma: np.ndarray    # (n,)
    events: list[SimEvent]
    event_tol: float = 1e-12

    def __len__(self) -> int:
        return len(self.tau)

    def state(self, i: int) -> State:
        return State.from_array(self.states[i], tau=float(self.tau[i]))

    def state_at(self, tau: float, tol: float = 1e-9) -> State:
        """Sample closest to tau; raises if none lies within tol."""
        i = int(np.argmin(np.abs(self.tau - tau)))
        if abs(self.tau[i] - tau) > tol:
            raise KeyError(f"no sample within {tol} of tau={tau}")
        return self.state(i)

    def write_csv(self, f: IO[str]) -> None:
        f.write("tau,x_b,v_b,x_f,v_f,phase,u,gamma,w_act,w_gnd\n")
        for i in range(len(self.tau)):
            y = self.states[i]
            f.write(",".join((
                _fmt(self.tau[i]), _fmt(y[0]), _fmt(y[1]), _fmt(y[2]), _fmt(y[3]),
                Phase(int(self.phase[i])).label,
                _fmt(self.u[i]), _fmt(self.gamma[i]), _fmt(y[4]), _fmt(y[5]),
            )) + "\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            self.write_csv(f)


@dataclass(frozen=True)
class SimOutcome:
    """Headline results of one impact.

    depth is the maximum penetration -min x_f over the whole run.  The
    energy terms e_act (actuator-absorbed) and e_gnd (ground-dissipated) are
    taken at the rest time for settled runs and at the final time otherwise.
    """

    depth: float
    rest_time: float
    steps: int
    stroke_violation: bool
    stroke_time: float
    settled: bool
    status: str
    final_state: State
    rest_state: State | None
    e_act: float
    e_gnd: float
    u_peak: float
    min_gap: float
    max_gap: float


def _fmt(x: float) -> str:
    x = float(x)
    if x == 0.0:
        x = 0.0  # normalize negative zero
    return format(x, ".17g")


def _encode(controller: Controller, params: Params):
    empty = np.empty(0, dtype=np.float64)
    if isinstance(controller, Impedance):
        return (_core.CTRL_IMPEDANCE, controller.k_p, controller.k_d,
                1.0 if controller.saturate else 0.0, empty)
    if isinstance(controller, BangBang):
        sw = np.asarray(controller.switch_times, dtype=np.float64)
        return (_core.CTRL_BANGBANG, controller.u_max, 0.0, 0.0, sw)
    if isinstance(controller, ConstantForce):
        return (_core.CTRL_CONSTANT, controller.u, 0.0, 0.0, empty)
    if isinstance(controller, Rigid):
        return (_core.CTRL_RIGID, 0.0, 0.0, 0.0, empty)
    raise TypeError(f"unknown controller {controller!r}")


_EV_KIND_LABEL = {
    _core.EV_STROKE: "stroke_violation",
    _core.EV_SETTLE: "settled",
    _core.EV_SWITCH: "control_switch",
}


def _event_label(kind: int, ph_from: int, ph_to: int) -> str:
    if kind == _core.EV_TRANSITION:
        return f"{Phase(ph_from).label}->{Phase(ph_to).label}"
    return _EV_KIND_LABEL[kind]


def _run_core(controller: Controller, params: Params, v0: float,
              options: SimOptions, record: bool):
    if v0 > 0:
        raise ValueError(f"impact velocity v0 must be <= 0, got {v0}")
    kind, c0, c1, c2, sw = _encode(controller, params)
    u_max = params.u_max if math.isfinite(params.u_max) else np.inf
    return _core.integrate_impact(
        kind, c0, c1, c2, sw,
        params.r_m, params.s, params.l0, u_max,
        float(v0),
        options.rel_tol, options.abs_tol, options.event_tol,
        options.tau_max, options.settle_vel, options.record_dt,
        options.stop_at_rest, record,
    )


def count_steps(trajectory: Trajectory, merge_tol: float | None = None) -> int:
    """Number of intrusion steps: maximal yielding episodes of the foot.

    Consecutive episodes separated only by an event-localization sliver
    (shorter than 10x the event tolerance) merge into one.
    """
    if merge_tol is None:
        merge_tol = 10.0 * trajectory.event_tol
    transitions = [(e.tau, e.kind) for e in trajectory.events if "->" in e.kind]
    in_yield = int(trajectory.phase[0]) == Phase.YIELDING if len(trajectory) else False
    episodes = 0
    last_exit = -math.inf
    if in_yield:
        episodes = 1
    for tau, kind in transitions:
        src, dst = kind.split("->")
        if dst == "yielding" and src != "yielding":
            if tau - last_exit >= merge_tol:
                episodes += 1
        elif src == "yielding" and dst != "yielding":
            last_exit = tau
    return episodes


def _steps_from_events(ev_t, ev_kind, ev_from, ev_to, phase0: int,
                       merge_tol: float) -> int:
    episodes = 1 if phase0 == _core.PH_YIELDING else 0
    last_exit = -math.inf
    for i in range(len(ev_t)):
        if ev_kind[i] != _core.EV_TRANSITION:
            continue
        if ev_to[i] == _core.PH_YIELDING and ev_from[i] != _core.PH_YIELDING:
            if ev_t[i] - last_exit >= merge_tol:
                episodes += 1
        elif ev_from[i] == _core.PH_YIELDING and ev_to[i] != _core.PH_YIELDING:
            last_exit = ev_t[i]
    return episodes


def _assemble(raw, options: SimOptions, record: bool):
    (status, t_end, y_end, phase_end,
     samp_t, samp_y, samp_ph, samp_u, samp_g,
     ev_t, ev_kind, ev_from, ev_to,
     min_xf, min_gap, max_gap, u_peak,
     rest_t, rest_y, have_rest, settled, stroke, stroke_t) = raw

    if status in (_core.ST_NONFINITE, _core.ST_STEP_FAIL, _core.ST_BUFFER_FULL):
        raise SimulationError(
            f"integration failed ({_STATUS_NAMES[status]}) at tau={t_end:.6g}, "
            f"state={np.asarray(y_end).tolist()}")

    final_state = State.from_array(y_end, tau=float(t_end))
    # the rest state only counts if the foot is still static at the end
    resting = have_rest and int(phase_end) == _core.PH_STATIC
    rest_state = State.from_array(rest_y, tau=float(rest_t)) if resting else None
    if rest_state is not None:
        e_act, e_gnd = -rest_state.w_act, rest_state.w_gnd
    else:
        e_act, e_gnd = -final_state.w_act, final_state.w_gnd

    phase0 = int(samp_ph[0]) if record and len(samp_ph) else None
    if phase0 is None:
        # reconstruct the initial phase from the first transition, if any
        phase0 = _core.PH_YIELDING
        for i in range(len(ev_t)):
            if ev_kind[i] == _core.EV_TRANSITION:
                phase0 = int(ev_from[i])
                break
        else:
            phase0 = int(phase_end)
    steps = _steps_from_events(ev_t, ev_kind, ev_from, ev_to, phase0,
                               10.0 * options.event_tol)

    outcome = SimOutcome(
        depth=max(0.0, -float(min_xf)),
        rest_time=float(rest_t) if resting else math.nan,
        steps=steps,
        stroke_violation=bool(stroke),
        stroke_time=float(stroke_t) if stroke else math.nan,
        settled=bool(settled),
        status=_STATUS_NAMES[int(status)],
        final_state=final_state,
        rest_state=rest_state,
        e_act=float(e_act),
        e_gnd=float(e_gnd),
        u_peak=float(u_peak),
        min_gap=float(min_gap),
        max_gap=float(max_gap),
    )
    trajectory = None
    if record:
        events = [SimEvent(float(ev_t[i]),
                           _event_label(int(ev_kind[i]), int(ev_from[i]), int(ev_to[i])))
                  for i in range(len(ev_t))]
        trajectory = Trajectory(
            tau=np.asarray(samp_t), states=np.asarray(samp_y),
            phase=np.asarray(samp_ph), u=np.asarray(samp_u),
            gamma=np.asarray(samp_g), events=events,
            event_tol=options.event_tol,
        )
    return outcome, trajectory


def simulate(controller: Controller, params: Params, v0: float,
             options: SimOptions = SimOptions()) -> tuple[SimOutcome, Trajectory]:
    """Simulate one impact from touchdown and return (outcome, trajectory)."""
    raw = _run_core(controller, params, v0, options, record=True)
    outcome, trajectory = _assemble(raw, options, record=True)
    return outcome, trajectory


def simulate_outcome(controller: Controller, params: Params, v0: float,
                     options: SimOptions = SimOptions()) -> SimOutcome:
    """Trajectory-free fast path: same integration, outcome only."""
    raw = _run_core(controller, params, v0, options, record=False)
    outcome, _ = _assemble(raw, options, record=False)
    return outcome


__all__ = [
    "SimOptions", "SimOutcome", "SimEvent", "Trajectory", "SimulationError",
    "simulate", "simulate_outcome", "count_steps",
]
