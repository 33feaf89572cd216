"""Landing-policy optimization: bang-bang switch solving, impedance sweeps,
optimal-gain curves, and the rigid/impedance/bang-bang comparison."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize

from .energy import cot_dissipative, impact_energy, mechanical_energy
from .model import (BangBang, Impedance, Params, Rigid, State,
                    body_arrest_force, terminal_residual)
from .sim import SimOptions, SimOutcome, simulate_outcome

# Sweeps need the body ringing on the virtual leg spring to decay below the
# settle threshold, which for lightly damped gains takes a few hundred time
# units; trajectories are not recorded.
SWEEP_OPTIONS = SimOptions(tau_max=400.0, record_dt=0.0)

REST_OPTIONS = SimOptions(record_dt=0.0, stop_at_rest=True)


class InfeasibleGridError(RuntimeError):
    """Every grid cell failed; the message names the dominant constraint."""


def _resolve_workers(workers: int) -> int:
    if workers and workers > 0:
        return workers
    env = os.environ.get("SOFTLAND_WORKERS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def _parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    """Map preserving order; thread-parallel (the integrator releases the GIL)."""
    n = _resolve_workers(workers)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _fmt(x: float) -> str:
    x = float(x)
    if x == 0.0:
        x = 0.0  # normalize negative zero
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# Bang-bang switch-time solving
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BangBangSolution:
    """Open-loop force profile solution for one impact.

    switch_times are the sign flips of the +/-u_max profile; after the foot
    comes to rest at rest_time the body is arrested by the constant force
    arrest_force.  residual is the support margin at foot rest (zero at the
    depth-optimal single-switch solution).
    """

    switch_times: tuple[float, ...]
    depth: float
    residual: float
    feasible: bool
    reason: str = ""
    rest_time: float = math.nan
    rest_state: State | None = None
    arrest_force: float = math.nan


def _shoot(switch_times: tuple[float, ...], params: Params, v0: float,
           options: SimOptions) -> tuple[float | None, SimOutcome]:
    """Simulate the profile until first foot rest; residual there or None."""
    out = simulate_outcome(BangBang(params.u_max, switch_times), params, v0, options)
    if out.status != "foot_rest":
        return None, out
    return terminal_residual(out.final_state, params.r_m), out


def _stroke_ok(out: SimOutcome, params: Params) -> bool:
    return (not out.stroke_violation
            and out.max_gap <= params.s + 1e-9
            and out.min_gap >= -1e-9)


def solve_bang_bang(v0: float, params: Params,
                    options: SimOptions | None = None,
                    scan_points: int = 64) -> BangBangSolution:
    """Single-switch profile: stomp at +u_max, pull up at -u_max.

    The switch time is the root of the foot-rest support margin, located by
    bracketing a dense scan and bisecting (the margin falls monotonically as
    the stomp lengthens).  Infeasible when the margin stays positive over
    every admissible switch time or every candidate violates the stroke.
    """
    if not math.isfinite(params.u_max):
        raise ValueError("solve_bang_bang needs a finite u_max")
    if not v0 < 0:
        raise ValueError(f"impact velocity must be negative, got {v0}")
    opts = replace(options or REST_OPTIONS, stop_at_rest=True, record_dt=0.0)

    # cap the scan at the no-switch run: its foot rest (or stroke failure)
    # bounds any useful switch time
    _, out0 = _shoot((), params, v0, opts)
    t_cap = out0.rest_time if out0.status == "foot_rest" else out0.final_state.tau
    if out0.stroke_violation:
        t_cap = out0.stroke_time

    taus = np.linspace(t_cap / scan_points, t_cap, scan_points)
    residuals: list[float | None] = []
    strokes = 0
    for tsw in taus:
        r, out = _shoot((float(tsw),), params, v0, opts)
        if r is not None and not _stroke_ok(out, params):
            r = None
            strokes += 1
        residuals.append(r)

    def _res(tsw: float) -> float:
        r, _ = _shoot((float(tsw),), params, v0, opts)
        return r if r is not None else math.inf

    bracket = None
    for i in range(len(taus) - 1):
        a, b = residuals[i], residuals[i + 1]
        if a is not None and b is not None and a > 0.0 >= b:
            bracket = (taus[i], taus[i + 1])
            break
    if bracket is None:
        valid = [r for r in residuals if r is not None]
        if not valid:
            return BangBangSolution((), math.nan, math.nan, False,
                                    reason="stroke violated at every switch time")
        if min(valid) > 0.0:
            return BangBangSolution((), math.nan, min(valid), False,
                                    reason="force limit cannot support the body arrest")
        # margin already nonpositive at the earliest scanned switch: take it
        tau_star = float(taus[int(np.argmin([abs(r) if r is not None else math.inf
                                             for r in residuals]))])
    else:
        tau_star = float(brentq(_res, bracket[0], bracket[1],
                                xtol=1e-13, rtol=8.9e-16))

    r_star, out = _shoot((tau_star,), params, v0, opts)
    if r_star is None or not _stroke_ok(out, params):
        return BangBangSolution((tau_star,), math.nan, math.nan, False,
                                reason="stroke violated at the located switch time")
    rest = out.final_state
    u_b = body_arrest_force(rest.x_b, rest.v_b, rest.x_f, params.r_m)
    if u_b > params.u_max + 1e-9:
        return BangBangSolution((tau_star,), out.depth, r_star, False,
                                reason="force limit cannot support the body arrest",
                                rest_time=out.rest_time, rest_state=rest,
                                arrest_force=u_b)
    feasible = r_star <= 1e-8
    return BangBangSolution(
        switch_times=(tau_star,),
        depth=out.depth,
        residual=r_star,
        feasible=feasible,
        reason="" if feasible else "support margin positive at the root",
        rest_time=out.rest_time,
        rest_state=rest,
        arrest_force=u_b,
    )


def solve_multi_switch(v0: float, params: Params, n_switches: int,
                       options: SimOptions | None = None,
                       n_starts: int = 6, seed: int = 0) -> BangBangSolution:
    """Depth minimization over ascending switch vectors (Nelder-Mead with
    infeasibility penalties, multistart seeded around the single-switch root)."""
    if n_switches < 1:
        raise ValueError("n_switches must be >= 1")
    opts = replace(options or REST_OPTIONS, stop_at_rest=True, record_dt=0.0)
    single = solve_bang_bang(v0, params, options=opts)

    penalty = 1e3

    def objective(x: np.ndarray) -> float:
        bad = 0.0
        for i, xi in enumerate(x):
            if xi <= 0:
                bad += 1.0 - xi
            if i and x[i] <= x[i - 1]:
                bad += 1.0 + x[i - 1] - x[i]
        if bad > 0.0:
            return penalty * (1.0 + bad)
        r, out = _shoot(tuple(float(v) for v in x), params, v0, opts)
        if r is None or not _stroke_ok(out, params):
            return penalty
        return out.depth + penalty * max(r, 0.0)

    starts: list[np.ndarray] = []
    if single.feasible:
        t1 = single.switch_times[0]
        base = np.array([t1 * (i + 1) / n_switches for i in range(n_switches)])
        starts.append(base)
        starts.append(np.array([t1 * (0.5 + 0.5 * (i + 1) / n_switches)
                                for i in range(n_switches)]))
    rng = np.random.default_rng(seed)
    t_ref = single.switch_times[0] if single.feasible else 0.3
    while len(starts) < n_starts:
        pts = np.sort(rng.uniform(0.1 * t_ref, 2.5 * t_ref, size=n_switches))
        starts.append(pts)

    best_x = None
    best_f = math.inf
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-10,
                                "maxiter": 400 * n_switches})
        for cand, f in ((res.x, res.fun), (x0, objective(x0))):
            if f < best_f:
                best_f = f
                best_x = np.array(cand, dtype=float)

    if best_x is None or best_f >= penalty:
        return BangBangSolution((), math.nan, math.nan, False,
                                reason="no feasible switch vector found")
    times = tuple(float(v) for v in best_x)
    r, out = _shoot(times, params, v0, opts)
    rest = out.final_state
    u_b = body_arrest_force(rest.x_b, rest.v_b, rest.x_f, params.r_m)
    return BangBangSolution(
        switch_times=times,
        depth=out.depth,
        residual=float(r),
        feasible=(r <= 1e-6 and _stroke_ok(out, params)
                  and u_b <= params.u_max + 1e-9),
        rest_time=out.rest_time,
        rest_state=rest,
        arrest_force=u_b,
    )


# ---------------------------------------------------------------------------
# Impedance sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Rectangular gain grid, inclusive endpoints."""

    k_p_range: tuple[float, float] = (0.0, 1.0)
    k_p_count: int = 101
    k_d_range: tuple[float, float] = (0.0, 1.0)
    k_d_count: int = 101

    def __post_init__(self) -> None:
        for rng, cnt in ((self.k_p_range, self.k_p_count),
                         (self.k_d_range, self.k_d_count)):
            if cnt < 2:
                raise ValueError("grid counts must be >= 2")
            if not rng[1] > rng[0] or rng[0] < 0:
                raise ValueError(f"invalid gain range {rng}")

    @property
    def k_p_values(self) -> np.ndarray:
        return np.linspace(*self.k_p_range, self.k_p_count)

    @property
    def k_d_values(self) -> np.ndarray:
        return np.linspace(*self.k_d_range, self.k_d_count)


# The energy-loss optimum at low impact speeds lies at large stiffness and
# damping (a rigid-like leg), well outside the depth-sweep gain box; its
# low-speed valley is a narrow band that needs the finer pitch to resolve.
COT_GRID = GridSpec((0.0, 4.0), 201, (0.0, 4.0), 201)


@dataclass
class GridResult:
    """Dense sweep plus the pattern-search-refined optimum.

    Arrays are indexed [i, j] over (k_p_values[i], k_d_values[j]).  feasible
    means the run settled without violating the stroke; the argmin and the
    refinement only ever look at feasible cells.
    """

    objective: str
    k_p_values: np.ndarray
    k_d_values: np.ndarray
    depth: np.ndarray
    steps: np.ndarray
    feasible: np.ndarray
    cot: np.ndarray
    value: np.ndarray
    argmin: tuple[int, int]
    k_p_star: float
    k_d_star: float
    value_star: float
    refined_outcome: SimOutcome
    audit_max: float = 0.0       # worst energy-balance residual, settled cells
    e_gnd_dev_max: float = 0.0   # worst |e_gnd - depth^2/2|, single-step cells

    @property
    def depth_star(self) -> float:
        return self.refined_outcome.depth

    def write_csv(self, f: IO[str]) -> None:
        f.write("k_p,k_d,depth,steps,feasible\n")
        for i, kp in enumerate(self.k_p_values):
            for j, kd in enumerate(self.k_d_values):
                f.write(f"{_fmt(kp)},{_fmt(kd)},{_fmt(self.depth[i, j])},"
                        f"{int(self.steps[i, j])},"
                        f"{'true' if self.feasible[i, j] else 'false'}\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            self.write_csv(f)


def _cell_metrics(out: SimOutcome, e0: float) -> tuple[float, int, bool, float]:
    feasible = out.settled and not out.stroke_violation
    cot = cot_dissipative(out, e0) if feasible else math.nan
    return out.depth, out.steps, feasible, cot


def sweep_impedance(v0: float, params: Params,
                    grid: GridSpec = GridSpec(),
                    objective: str = "depth",
                    options: SimOptions | None = None,
                    workers: int = 0,
                    warm_start: tuple[float, float] | None = None,
                    refine_tol: float = 1e-4,
                    refine_starts: int = 8,
                    stroke_margin: float = 1.0) -> GridResult:
    """Grid-evaluate unsaturated impedance gains and refine the argmin.

    objective selects what the argmin minimizes: final penetration depth or
    the dissipative relative energy loss ("cot").  stroke_margin < 1 shrinks
    the stroke limit used during the sweep (a safety factor on the gap).
    """
    if objective not in ("depth", "cot"):
        raise ValueError(f"objective must be 'depth' or 'cot', got {objective!r}")
    opts = options or SWEEP_OPTIONS
    sweep_params = params if stroke_margin == 1.0 else replace(
        params, s=params.s * stroke_margin, l0=params.l0)
    e0 = impact_energy(params, v0)

    kp = grid.k_p_values
    kd = grid.k_d_values

    def run_cell(gains: tuple[float, float]) -> SimOutcome:
        return simulate_outcome(Impedance(gains[0], gains[1]), sweep_params, v0, opts)

    jobs = [(float(p), float(d)) for p in kp for d in kd]
    outs = _parallel_map(run_cell, jobs, workers)

    np_, nd = len(kp), len(kd)
    depth = np.empty((np_, nd))
    steps = np.empty((np_, nd), dtype=int)
    feas = np.zeros((np_, nd), dtype=bool)
    cot = np.full((np_, nd), math.nan)
    audit_max = 0.0
    e_gnd_dev_max = 0.0
    for idx, out in enumerate(outs):
        i, j = divmod(idx, nd)
        depth[i, j], steps[i, j], feas[i, j], cot[i, j] = _cell_metrics(out, e0)
        if out.settled and out.rest_state is not None:
            eT = mechanical_energy(out.rest_state, params.r_m)
            audit_max = max(audit_max,
                            abs((e0 - eT) - (out.e_act + out.e_gnd)))
            if out.steps == 1:
                e_gnd_dev_max = max(e_gnd_dev_max,
                                    abs(out.e_gnd - 0.5 * out.rest_state.x_f ** 2))
    value = depth if objective == "depth" else cot

    if not feas.any():
        n_stroke = sum(1 for o in outs if o.stroke_violation)
        n_unsettled = sum(1 for o in outs
                          if not o.settled and not o.stroke_violation)
        raise InfeasibleGridError(
            f"no feasible cell at v0={v0}: {n_stroke} stroke violations, "
            f"{n_unsettled} unsettled runs")

    # coarse argmin over feasible cells, ties toward softer gains
    best = None
    for i in range(np_):
        for j in range(nd):
            if not feas[i, j]:
                continue
            key = (value[i, j], kp[i], kd[j])
            if best is None or key < best[0]:
                best = (key, (i, j))
    argmin = best[1]

    cache: dict[tuple[float, float], SimOutcome] = {}
    for idx, out in enumerate(outs):
        cache[jobs[idx]] = out

    def evaluate(p: float, d: float) -> tuple[float, SimOutcome]:
        key = (p, d)
        out = cache.get(key)
        if out is None:
            out = run_cell(key)
            cache[key] = out
        dv, _, ok, cv = _cell_metrics(out, e0)
        if not ok:
            return math.inf, out
        return (dv if objective == "depth" else cv), out

    lo_p, hi_p = float(kp[0]), float(kp[-1])
    lo_d, hi_d = float(kd[0]), float(kd[-1])
    pitch_p = float(kp[1] - kp[0])
    pitch_d = float(kd[1] - kd[0])

    def clamp(p: float, d: float) -> tuple[float, float]:
        return (min(max(p, lo_p), hi_p), min(max(d, lo_d), hi_d))

    def explore(base, f_base, out_base, step_p, step_d):
        # axis-wise exploratory move of Hooke-Jeeves
        pt, f_pt, out_pt = base, f_base, out_base
        for axis, step in ((0, step_p), (1, step_d)):
            for sign in (1.0, -1.0):
                cand = list(pt)
                cand[axis] += sign * step
                cand = clamp(*cand)
                if cand == pt:
                    continue
                f_c, out_c = evaluate(*cand)
                if f_c < f_pt:
                    pt, f_pt, out_pt = cand, f_c, out_c
                    break
        return pt, f_pt, out_pt

    def refine(start):
        # Hooke-Jeeves: exploratory axis polls plus pattern moves along the
        # accumulated direction, which track the slanted valleys this
        # objective develops along its feasibility boundaries
        x, (f_x, out_x) = start, evaluate(*start)
        step_p, step_d = pitch_p, pitch_d
        while max(step_p, step_d) > refine_tol:
            x1, f1, out1 = explore(x, f_x, out_x, step_p, step_d)
            if f1 < f_x:
                while True:  # extrapolate while the direction keeps paying
                    cand = clamp(2.0 * x1[0] - x[0], 2.0 * x1[1] - x[1])
                    x, f_x, out_x = x1, f1, out1
                    f_c, out_c = evaluate(*cand)
                    x2, f2, out2 = explore(cand, f_c, out_c, step_p, step_d)
                    if f2 < f1:
                        x1, f1, out1 = x2, f2, out2
                    else:
                        break
                x, f_x, out_x = x1, f1, out1
            else:
                step_p *= 0.5
                step_d *= 0.5
        return x, f_x, out_x

    # multistart: the argmin cell, the warm start, and the next-best coarse
    # cells; the objective can split into near-degenerate basins along its
    # feasibility boundary, so one descent is not enough
    ranked = sorted(
        ((value[i, j], float(kp[i]), float(kd[j]))
         for i in range(np_) for j in range(nd) if feas[i, j]))
    starts = [(float(kp[argmin[0]]), float(kd[argmin[1]]))]
    if warm_start is not None:
        starts.append(clamp(float(warm_start[0]), float(warm_start[1])))
    starts.extend((p, d) for _, p, d in ranked[:refine_starts])
    seen = set()
    x = f_x = out_x = None
    for start in starts:
        if start in seen:
            continue
        seen.add(start)
        x_c, f_c, out_c = refine(start)
        if f_x is None or f_c < f_x:
            x, f_x, out_x = x_c, f_c, out_c

    return GridResult(
        objective=objective,
        k_p_values=kp, k_d_values=kd,
        depth=depth, steps=steps, feasible=feas, cot=cot, value=value,
        argmin=argmin,
        k_p_star=x[0], k_d_star=x[1], value_star=f_x,
        refined_outcome=out_x,
        audit_max=audit_max,
        e_gnd_dev_max=e_gnd_dev_max,
    )


# ---------------------------------------------------------------------------
# Optimal-gain curves and the policy comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurveRow:
    r_m: float
    s: float
    v0: float
    k_p_star: float = math.nan
    k_d_star: float = math.nan
    depth_star: float = math.nan
    cot_star: float = math.nan
    outcome: SimOutcome | None = None
    error: str | None = None


def optimal_curves(v0_list: Sequence[float], r_m_list: Sequence[float],
                   s_list: Sequence[float], objective: str = "depth",
                   grid: GridSpec = GridSpec(),
                   options: SimOptions | None = None,
                   workers: int = 0) -> list[CurveRow]:
    """Optimal gains per (r_m, s, v0); each (r_m, s) curve warm-starts the
    refinement from the previous impact velocity's solution."""
    if not (len(v0_list) and len(r_m_list) and len(s_list)):
        raise ValueError("v0_list, r_m_list, and s_list must be nonempty")
    rows: list[CurveRow] = []
    for r_m in r_m_list:
        for s in s_list:
            params = Params(r_m=float(r_m), s=float(s))
            warm = None
            for v0 in v0_list:
                try:
                    res = sweep_impedance(float(v0), params, grid=grid,
                                          objective=objective, options=options,
                                          workers=workers, warm_start=warm)
                except (InfeasibleGridError, ValueError) as exc:
                    rows.append(CurveRow(r_m=float(r_m), s=float(s),
                                         v0=float(v0), error=str(exc)))
                    continue
                out = res.refined_outcome
                e0 = impact_energy(params, float(v0))
                rows.append(CurveRow(
                    r_m=float(r_m), s=float(s), v0=float(v0),
                    k_p_star=res.k_p_star, k_d_star=res.k_d_star,
                    depth_star=out.depth,
                    cot_star=cot_dissipative(out, e0),
                    outcome=out,
                ))
                warm = (res.k_p_star, res.k_d_star)
    return rows


def write_curves_csv(rows: Iterable[CurveRow], f: IO[str]) -> None:
    f.write("r_m,s,v0,k_p_star,k_d_star,depth_star,cot_star\n")
    for r in rows:
        f.write(f"{_fmt(r.r_m)},{_fmt(r.s)},{_fmt(r.v0)},{_fmt(r.k_p_star)},"
                f"{_fmt(r.k_d_star)},{_fmt(r.depth_star)},{_fmt(r.cot_star)}\n")


@dataclass(frozen=True)
class CompareRow:
    v0: float
    depth_rigid: float
    depth_impedance: float
    depth_bangbang: float
    k_p_star: float = math.nan
    k_d_star: float = math.nan
    switch_time: float = math.nan


def compare_policies(v0_list: Sequence[float], params: Params,
                     grid: GridSpec = GridSpec(),
                     options: SimOptions | None = None,
                     workers: int = 0,
                     impedance_rows: Sequence[CurveRow] | None = None,
                     ) -> tuple[list[CompareRow], float]:
    """Depth of the rigid, optimal-impedance, and bang-bang policies per v0.

    When params.u_max is unbounded, the bound is taken as the peak force of
    the unsaturated optimal impedance controller at v0 = -10; the impedance
    policy is then simulated with saturation at that bound.  Returns the
    rows and the u_max actually used.
    """
    if not len(v0_list):
        raise ValueError("v0_list must be nonempty")
    opts = options or SWEEP_OPTIONS

    rows_by_v0: dict[float, CurveRow] = {}
    if impedance_rows is not None:
        rows_by_v0 = {round(r.v0, 12): r for r in impedance_rows
                      if r.error is None and r.r_m == params.r_m and r.s == params.s}

    def imp_row(v0: float, warm) -> CurveRow:
        key = round(float(v0), 12)
        if key in rows_by_v0:
            return rows_by_v0[key]
        res = sweep_impedance(float(v0), params, grid=grid, options=opts,
                              workers=workers, warm_start=warm)
        e0 = impact_energy(params, float(v0))
        row = CurveRow(r_m=params.r_m, s=params.s, v0=float(v0),
                       k_p_star=res.k_p_star, k_d_star=res.k_d_star,
                       depth_star=res.refined_outcome.depth,
                       cot_star=cot_dissipative(res.refined_outcome, e0),
                       outcome=res.refined_outcome)
        rows_by_v0[key] = row
        return row

    if math.isfinite(params.u_max):
        u_max = params.u_max
    else:
        ref = imp_row(-10.0, None)
        u_max = ref.outcome.u_peak
    bb_params = replace(params, u_max=u_max, l0=params.l0)

    rows: list[CompareRow] = []
    warm = None
    for v0 in v0_list:
        v0 = float(v0)
        rigid_out = simulate_outcome(Rigid(), params, v0, opts)
        row = imp_row(v0, warm)
        warm = (row.k_p_star, row.k_d_star)
        sat_out = simulate_outcome(
            Impedance(row.k_p_star, row.k_d_star, saturate=True),
            bb_params, v0, opts)
        bb = solve_bang_bang(v0, bb_params)
        rows.append(CompareRow(
            v0=v0,
            depth_rigid=rigid_out.depth,
            depth_impedance=sat_out.depth,
            depth_bangbang=bb.depth,
            k_p_star=row.k_p_star,
            k_d_star=row.k_d_star,
            switch_time=bb.switch_times[0] if bb.switch_times else math.nan,
        ))
    return rows, u_max


def write_compare_csv(rows: Iterable[CompareRow], u_max: float, f: IO[str]) -> None:
    f.write("v0,depth_rigid,depth_imp,depth_bb,u_max\n")
    for r in rows:
        f.write(f"{_fmt(r.v0)},{_fmt(r.depth_rigid)},{_fmt(r.depth_impedance)},"
                f"{_fmt(r.depth_bangbang)},{_fmt(u_max)}\n")


__all__ = [
    "SWEEP_OPTIONS", "REST_OPTIONS", "InfeasibleGridError",
    "BangBangSolution", "solve_bang_bang", "solve_multi_switch",
    "GridSpec", "GridResult", "sweep_impedance",
    "CurveRow", "optimal_curves", "write_curves_csv",
    "CompareRow", "compare_policies", "write_compare_csv",
]
