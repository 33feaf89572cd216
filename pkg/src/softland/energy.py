"""Energy accounting: mechanical energy, loss split, and cost of transport.

Mechanical energy uses the undisturbed ground surface as the gravitational
datum.  Losses split into actuator absorption e_act = -integral of
u*(v_b - v_f) and ground dissipation e_gnd = integral of gamma*(-v_f), and
the balance E(0) - E(T) = e_act + e_gnd closes to integrator accuracy.  Cost
of transport is the relative energy loss up to the foot-rest time T, in the
dissipative convention (e_gnd + e_act)/E(0) or the lossless-rendering one
e_gnd/E(0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .model import Params, Rigid, State, impact_state, rigid_depth
from .sim import SimOptions, SimOutcome, Trajectory


class EnergyAuditError(RuntimeError):
    """The work-energy balance failed beyond tolerance (integrator defect)."""


def mechanical_energy(state: State, r_m: float) -> float:
    """Kinetic plus gravitational energy, datum at the undisturbed surface."""
    body = r_m / (1.0 + r_m)
    foot = 1.0 / (1.0 + r_m)
    return (body * (0.5 * state.v_b ** 2 + state.x_b)
            + foot * (0.5 * state.v_f ** 2 + state.x_f))


def impact_energy(params: Params, v0: float) -> float:
    """Mechanical energy at touchdown."""
    return mechanical_energy(impact_state(params, v0), params.r_m)


def cot_dissipative(outcome: SimOutcome, e0: float) -> float:
    return (outcome.e_gnd + outcome.e_act) / e0


def cot_lossless(outcome: SimOutcome, e0: float) -> float:
    return outcome.e_gnd / e0


@dataclass(frozen=True)
class EnergyReport:
    """Loss breakdown of one settled impact, evaluated at the foot-rest time."""

    e0: float
    eT: float
    e_act: float
    e_gnd: float
    cot_dissipative: float
    cot_lossless: float
    audit_residual: float


def energy_report(outcome: SimOutcome, trajectory: Trajectory, r_m: float,
                  audit_tol: float = 1e-6) -> EnergyReport:
    """Energy accounting at the rest time T of a settled run.

    Raises on unsettled or stroke-violating outcomes; raises
    EnergyAuditError when the balance fails or a single-step intrusion's
    ground loss deviates from depth^2/2.
    """
    if outcome.stroke_violation:
        raise ValueError("energy report undefined for a stroke-violating run")
    if not outcome.settled or outcome.rest_state is None:
        raise ValueError("energy report needs a settled run with a rest time")
    s0 = trajectory.state(0)
    sT = outcome.rest_state
    e0 = mechanical_energy(s0, r_m)
    eT = mechanical_energy(sT, r_m)
    e_act = -sT.w_act
    e_gnd = sT.w_gnd
    residual = abs((e0 - eT) - (e_act + e_gnd))
    if residual > audit_tol:
        raise EnergyAuditError(
            f"energy balance off by {residual:.3e} (> {audit_tol:.1e})")
    if outcome.steps == 1:
        dev = abs(e_gnd - 0.5 * sT.x_f ** 2)
        if dev > audit_tol:
            raise EnergyAuditError(
                f"single-step ground loss deviates from depth^2/2 by {dev:.3e}")
    return EnergyReport(
        e0=e0, eT=eT, e_act=e_act, e_gnd=e_gnd,
        cot_dissipative=(e_gnd + e_act) / e0,
        cot_lossless=e_gnd / e0,
        audit_residual=residual,
    )


@dataclass(frozen=True)
class CotRow:
    """Depth-optimal vs CoT-optimal impedance and the rigid baseline at one v0."""

    v0: float
    kp_depth: float
    kd_depth: float
    depth_depthopt: float
    cot_depthopt_diss: float
    cot_depthopt_lossless: float
    kp_cot: float
    kd_cot: float
    depth_cotopt: float
    cot_cotopt_diss: float
    depth_rigid: float
    cot_rigid: float
    error: str | None = None


def cot_vs_depth_comparison(v0_list: Sequence[float], params: Params,
                            grid=None, options: SimOptions | None = None,
                            workers: int = 0,
                            depth_rows=None) -> list[CotRow]:
    """Sweep both objectives per v0 and report both CoT conventions.

    With grid=None the depth objective searches the standard gain box while
    the energy-loss objective searches the wider COT_GRID (its optimum runs
    toward a rigid-like leg at low speeds).  depth_rows may carry
    precomputed depth-objective curve rows (from optimize.optimal_curves)
    to reuse; rows whose sweeps fail carry the error instead of aborting
    the table.
    """
    from . import optimize as _opt
    from .sim import simulate_outcome

    if not len(v0_list):
        raise ValueError("v0_list must be nonempty")
    depth_grid = grid or _opt.GridSpec()
    cot_grid = grid or _opt.COT_GRID
    opts = options or _opt.SWEEP_OPTIONS
    depth_by_v0 = {}
    if depth_rows is not None:
        depth_by_v0 = {round(r.v0, 12): r for r in depth_rows
                       if r.error is None and r.r_m == params.r_m and r.s == params.s}

    rows: list[CotRow] = []
    warm_d = None
    warm_c = None
    for v0 in v0_list:
        v0 = float(v0)
        e0 = impact_energy(params, v0)
        try:
            row_d = depth_by_v0.get(round(v0, 12))
            if row_d is None:
                res_d = _opt.sweep_impedance(v0, params, grid=depth_grid,
                                             objective="depth",
                                             options=opts, workers=workers,
                                             warm_start=warm_d)
                kp_d, kd_d, out_d = res_d.k_p_star, res_d.k_d_star, res_d.refined_outcome
            else:
                kp_d, kd_d, out_d = row_d.k_p_star, row_d.k_d_star, row_d.outcome
            warm_d = (kp_d, kd_d)
            res_c = _opt.sweep_impedance(v0, params, grid=cot_grid,
                                         objective="cot",
                                         options=opts, workers=workers,
                                         warm_start=warm_c)
            warm_c = (res_c.k_p_star, res_c.k_d_star)
            out_c = res_c.refined_outcome
            rigid_out = simulate_outcome(Rigid(), params, v0, opts)
            rows.append(CotRow(
                v0=v0,
                kp_depth=kp_d, kd_depth=kd_d,
                depth_depthopt=out_d.depth,
                cot_depthopt_diss=cot_dissipative(out_d, e0),
                cot_depthopt_lossless=cot_lossless(out_d, e0),
                kp_cot=res_c.k_p_star, kd_cot=res_c.k_d_star,
                depth_cotopt=out_c.depth,
                cot_cotopt_diss=cot_dissipative(out_c, e0),
                depth_rigid=rigid_out.depth,
                cot_rigid=cot_lossless(rigid_out, e0),
            ))
        except (_opt.InfeasibleGridError, ValueError) as exc:
            rows.append(CotRow(v0=v0, kp_depth=math.nan, kd_depth=math.nan,
                               depth_depthopt=math.nan, cot_depthopt_diss=math.nan,
                               cot_depthopt_lossless=math.nan, kp_cot=math.nan,
                               kd_cot=math.nan, depth_cotopt=math.nan,
                               cot_cotopt_diss=math.nan, depth_rigid=math.nan,
                               cot_rigid=math.nan, error=str(exc)))
    return rows


def write_cot_csv(rows: Iterable[CotRow], f: IO[str]) -> None:
    def _fmt(x: float) -> str:
        return format(float(x), ".17g")

    f.write("v0,kp_depth,kd_depth,depth_depthopt,cot_depthopt_diss,"
            "cot_depthopt_lossless,kp_cot,kd_cot,depth_cotopt,cot_cotopt_diss,"
            "depth_rigid,cot_rigid\n")
    for r in rows:
        f.write(",".join(_fmt(v) for v in (
            r.v0, r.kp_depth, r.kd_depth, r.depth_depthopt,
            r.cot_depthopt_diss, r.cot_depthopt_lossless,
            r.kp_cot, r.kd_cot, r.depth_cotopt, r.cot_cotopt_diss,
            r.depth_rigid, r.cot_rigid)) + "\n")


def rigid_cot_closed_form(params: Params, v0: float) -> tuple[float, float]:
    """(depth, CoT) of the locked robot from the closed-form depth."""
    d = rigid_depth(v0)
    e0 = impact_energy(params, v0)
    return d, (0.5 * d * d) / e0


__all__ = [
    "EnergyAuditError", "EnergyReport", "mechanical_energy", "impact_energy",
    "cot_dissipative", "cot_lossless", "energy_report",
    "CotRow", "cot_vs_depth_comparison", "write_cot_csv",
    "rigid_cot_closed_form",
]
