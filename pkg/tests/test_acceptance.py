"""Acceptance gate: one test per criterion, each printing a pass/fail line.

The heavy artifacts (the 101x101 gain sweeps over twenty impact velocities
and the policy comparison built on them) are computed once per session and
shared across criteria.  Run with `pytest tests/test_acceptance.py -v -s`.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from softland import (BangBang, Impedance, Params, Rigid, SimOptions,
                      State, rigid_depth, simulate, simulate_outcome,
                      terminal_residual)
from softland.energy import cot_vs_depth_comparison, impact_energy
from softland.optimize import (SWEEP_OPTIONS, CurveRow, compare_policies,
                               solve_bang_bang, solve_multi_switch,
                               sweep_impedance)

WORKERS = 2
V0_20 = tuple(-0.5 * k for k in range(1, 21))  # -0.5 .. -10.0
V0_INT = tuple(float(-k) for k in range(1, 11))


def report(criterion: int, ok: bool, detail: str) -> bool:
    print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


@pytest.fixture(scope="session")
def sweeps(canonical):
    """Depth sweeps (default 101x101 grid) for every criterion-5 velocity."""
    results = {}
    warm = None
    for v0 in V0_20:
        res = sweep_impedance(v0, canonical, workers=WORKERS, warm_start=warm)
        warm = (res.k_p_star, res.k_d_star)
        results[v0] = res
    return results


@pytest.fixture(scope="session")
def curve_rows(canonical, sweeps):
    rows = []
    for v0 in V0_20:
        res = sweeps[v0]
        out = res.refined_outcome
        rows.append(CurveRow(r_m=canonical.r_m, s=canonical.s, v0=v0,
                             k_p_star=res.k_p_star, k_d_star=res.k_d_star,
                             depth_star=out.depth, cot_star=math.nan,
                             outcome=out))
    return rows


@pytest.fixture(scope="session")
def compare_rows(canonical_u82, curve_rows):
    rows, u_max = compare_policies(V0_20, canonical_u82,
                                   workers=WORKERS, impedance_rows=curve_rows)
    assert u_max == 8.2
    return rows


def test_criterion_1_rigid_oracle(canonical):
    worst = 0.0
    for v0 in np.linspace(-10.0, 0.0, 21):
        out = simulate_outcome(Rigid(), canonical, float(v0))
        worst = max(worst, abs(out.depth - rigid_depth(float(v0))))
    zero = simulate_outcome(Rigid(), canonical, 0.0).depth
    ok = worst <= 1e-6 and abs(zero - 2.0) <= 1e-6
    assert report(1, ok, f"rigid depth max error {worst:.2e} over 21 velocities; "
                         f"depth(0) = {zero:.9f}")


def test_criterion_2_minimum_depth_identity():
    worst = 0.0
    for r_m in (0.5, 1.0, 5.0, 20.0):
        state = State(x_b=2.0, v_b=0.0, x_f=-1.0, v_f=0.0)
        worst = max(worst, abs(terminal_residual(state, r_m)))
    ok = worst <= 1e-12
    assert report(2, ok, f"support margin at depth 1 with body at rest: "
                         f"max |residual| = {worst:.2e}")


def test_criterion_3_stepped_intrusion(canonical):
    got = tuple(simulate_outcome(Impedance(0.2, kd), canonical, -1.0).steps
                for kd in (0.0, 0.18, 0.4))
    ok = got == (3, 2, 1)
    assert report(3, ok, f"intrusion steps for k_d = 0, 0.18, 0.4: {got}")


def test_criterion_4_bang_bang_limit(canonical_u82, compare_rows):
    slow = solve_bang_bang(-0.1, canonical_u82)
    depths = [r.depth_bangbang for r in compare_rows]  # ordered v0 -0.5..-10
    mono = all(b >= a - 1e-9 for a, b in zip(depths, depths[1:]))
    ok = slow.feasible and 1.0 <= slow.depth <= 1.1 and mono
    assert report(4, ok, f"depth({-0.1}) = {slow.depth:.6f} in [1.0, 1.1]; "
                         f"nondecreasing over 20 velocities: {mono}")


def test_criterion_5_policy_ordering(compare_rows):
    ordered = all(r.depth_bangbang <= r.depth_impedance + 1e-9
                  and r.depth_impedance <= r.depth_rigid + 1e-9
                  for r in compare_rows)
    halved = all(r.depth_bangbang <= 0.5 * r.depth_rigid + 1e-9
                 for r in compare_rows)
    ok = ordered and halved
    assert report(5, ok, f"bang-bang <= impedance <= rigid at 20 velocities: "
                         f"{ordered}; bang-bang <= rigid/2: {halved}")


def test_criterion_6_force_bound_convention(sweeps):
    u_peak = sweeps[-10.0].refined_outcome.u_peak
    ok = abs(u_peak - 8.2) <= 0.5
    assert report(6, ok, f"peak |u| of the unsaturated optimal controller at "
                         f"v0 = -10: {u_peak:.4f} (expected 8.2 +/- 0.5)")


def test_criterion_7_multi_switch_near_optimality(canonical_u82):
    worst = -math.inf
    details = []
    for v0 in (-1.0, -3.0, -6.0, -10.0):
        single = solve_bang_bang(v0, canonical_u82)
        multi = solve_multi_switch(v0, canonical_u82, 3)
        gain = (single.depth - multi.depth) / single.depth
        worst = max(worst, gain)
        details.append(f"{v0:g}: {gain * 100:+.3f}%")
    ok = worst <= 0.015
    assert report(7, ok, "3-switch depth improvement " + ", ".join(details))


def test_criterion_8_gain_curves(sweeps):
    kp = [sweeps[v0].k_p_star for v0 in V0_INT]
    kd = [sweeps[v0].k_d_star for v0 in V0_INT]
    mono = all(b >= a - 1e-3 for a, b in zip(kp, kp[1:]))
    k_min = min(kd)
    i_min = kd.index(k_min)
    interior = 2.0 <= abs(V0_INT[i_min]) <= 6.0
    extremes = kd[0] > k_min and kd[-1] > k_min
    ok = mono and interior and extremes
    assert report(8, ok, f"k_p* nondecreasing: {mono}; k_d* minimum "
                         f"{k_min:.4f} at |v0| = {abs(V0_INT[i_min]):g} "
                         f"(ends {kd[0]:.4f}, {kd[-1]:.4f})")


def test_criterion_9_stroke_boundary(canonical, sweeps):
    gaps = {v0: sweeps[v0].refined_outcome.min_gap for v0 in V0_INT}
    bound = 0.02 * canonical.s
    ok = all(g < bound for g in gaps.values())
    worst = max(gaps.values())
    assert report(9, ok, f"max over v0 of the optimal trajectory's closest "
                         f"approach to the stop: {worst:.4f} < {bound}")


def test_criterion_10_energy_audit(sweeps):
    audit = max(res.audit_max for res in sweeps.values())
    dev = max(res.e_gnd_dev_max for res in sweeps.values())
    ok = audit <= 1e-6 and dev <= 1e-6
    assert report(10, ok, f"worst energy-balance residual over every settled "
                          f"run of the criterion-5 sweeps: {audit:.2e}; worst "
                          f"single-step ground-loss deviation: {dev:.2e}")


def test_criterion_11_cot_convergence(canonical, curve_rows):
    rows = cot_vs_depth_comparison([-0.5, -10.0], canonical,
                                   workers=WORKERS, depth_rows=curve_rows)
    slow, fast = rows[0], rows[1]
    assert slow.error is None and fast.error is None
    converged = abs(fast.depth_cotopt - fast.depth_depthopt) <= 0.05 * fast.depth_depthopt
    separated = slow.depth_cotopt >= 1.5 * slow.depth_depthopt
    ok = converged and separated
    assert report(11, ok, f"at v0 = -10 CoT-optimal depth {fast.depth_cotopt:.4f} "
                          f"vs depth-optimal {fast.depth_depthopt:.4f}; at "
                          f"v0 = -0.5 ratio = "
                          f"{slow.depth_cotopt / slow.depth_depthopt:.2f} >= 1.5")


def test_criterion_12_determinism_and_convergence(canonical, canonical_u82):
    # bit-identical repetition
    a_out, a_traj = simulate(Impedance(0.2, 0.18), canonical, -1.0)
    b_out, b_traj = simulate(Impedance(0.2, 0.18), canonical, -1.0)
    identical = (a_out == b_out
                 and np.array_equal(a_traj.states, b_traj.states)
                 and np.array_equal(a_traj.tau, b_traj.tau))

    # halving the integrator tolerances leaves criterion 1/3/4 quantities put
    base = SimOptions(record_dt=0.0)
    fine = replace(base, rel_tol=base.rel_tol / 2, abs_tol=base.abs_tol / 2,
                   event_tol=base.event_tol / 2)
    d_rigid = max(
        abs(simulate_outcome(Rigid(), canonical, float(v0), base).depth
            - simulate_outcome(Rigid(), canonical, float(v0), fine).depth)
        for v0 in np.linspace(-10.0, 0.0, 21))
    steps_same = all(
        simulate_outcome(Impedance(0.2, kd), canonical, -1.0, base).steps
        == simulate_outcome(Impedance(0.2, kd), canonical, -1.0, fine).steps
        for kd in (0.0, 0.18, 0.4))
    d_bb = max(
        abs(solve_bang_bang(v0, canonical_u82, options=base).depth
            - solve_bang_bang(v0, canonical_u82, options=fine).depth)
        for v0 in (-0.1, -3.0, -10.0))
    ok = identical and d_rigid < 1e-6 and steps_same and d_bb < 1e-6
    assert report(12, ok, f"bit-identical reruns: {identical}; tolerance "
                          f"halving moved rigid depth {d_rigid:.2e}, step "
                          f"counts stable: {steps_same}, bang-bang depth "
                          f"{d_bb:.2e}")
