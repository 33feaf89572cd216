import math

import numpy as np
import pytest

from softland import Impedance, Params, SimOptions, simulate_outcome
from softland.optimize import (SWEEP_OPTIONS, GridSpec, InfeasibleGridError,
                               compare_policies, optimal_curves,
                               solve_bang_bang, solve_multi_switch,
                               sweep_impedance)

COARSE = GridSpec((0.0, 1.0), 21, (0.0, 1.0), 21)


class TestSolveBangBang:
    def test_residual_at_root(self, canonical_u82):
        sol = solve_bang_bang(-3.0, canonical_u82)
        assert sol.feasible
        assert abs(sol.residual) <= 1e-8

    def test_root_is_a_sign_change(self, canonical_u82):
        # slightly shorter stomps cannot support the arrest; slightly longer
        # ones land deeper but feasibly
        from softland import BangBang, terminal_residual
        sol = solve_bang_bang(-3.0, canonical_u82)
        tau = sol.switch_times[0]
        opts = SimOptions(stop_at_rest=True, record_dt=0.0)

        def residual(tsw):
            out = simulate_outcome(BangBang(8.2, (tsw,)), canonical_u82, -3.0, opts)
            return terminal_residual(out.final_state, 5.0), out.depth

        r_lo, _ = residual(tau - 1e-3)
        r_hi, d_hi = residual(tau + 1e-3)
        assert r_lo > 0.0
        assert r_hi < 0.0
        assert d_hi > sol.depth

    def test_dense_scan_oracle(self, canonical_u82):
        # oracle: scan switch times independently of the root finder, keep
        # the smallest depth whose rest state supports the body arrest; a
        # coarse pass brackets the feasibility boundary, a 10^4-point pass
        # resolves the minimum inside it
        from softland import BangBang, terminal_residual
        opts = SimOptions(stop_at_rest=True, record_dt=0.0)

        def feasible_depth(tsw):
            out = simulate_outcome(BangBang(8.2, (float(tsw),)),
                                   canonical_u82, -3.0, opts)
            if out.status != "foot_rest" or out.stroke_violation:
                return None
            if out.max_gap > canonical_u82.s or out.min_gap < 0.0:
                return None
            if terminal_residual(out.final_state, 5.0) > 0.0:
                return None
            return out.depth

        coarse = np.linspace(1e-4, 0.7, 1000)
        ok = [feasible_depth(t) is not None for t in coarse]
        i0 = ok.index(True)
        assert i0 > 0, "feasibility boundary not interior to the scan"
        best = math.inf
        for tsw in np.linspace(coarse[i0 - 1], coarse[i0 + 1], 10_000):
            d = feasible_depth(tsw)
            if d is not None and d < best:
                best = d

        sol = solve_bang_bang(-3.0, canonical_u82)
        assert sol.depth == pytest.approx(best, abs=1e-4)
        assert sol.depth <= best + 1e-12

    def test_approaches_minimum_depth(self, canonical_u82):
        sol = solve_bang_bang(-0.1, canonical_u82)
        assert 1.0 <= sol.depth <= 1.1

    def test_depth_nondecreasing_in_speed(self, canonical_u82):
        depths = [solve_bang_bang(v0, canonical_u82).depth
                  for v0 in (-0.5, -2.0, -5.0, -8.0, -10.0)]
        assert all(b >= a - 1e-9 for a, b in zip(depths, depths[1:]))

    def test_weak_actuator_infeasible(self):
        # u_max below the hover force can never support the arrest
        sol = solve_bang_bang(-1.0, Params(r_m=5.0, s=20.0, u_max=0.5))
        assert not sol.feasible
        assert "support" in sol.reason

    def test_tiny_stroke_infeasible(self):
        sol = solve_bang_bang(-3.0, Params(r_m=5.0, s=0.1, u_max=8.2))
        assert not sol.feasible
        assert "stroke" in sol.reason

    def test_requires_finite_bound(self, canonical):
        with pytest.raises(ValueError):
            solve_bang_bang(-1.0, canonical)
        with pytest.raises(ValueError):
            solve_bang_bang(0.0, Params(r_m=5.0, s=20.0, u_max=8.2))


class TestMultiSwitch:
    def test_single_switch_recovery(self, canonical_u82):
        sol1 = solve_bang_bang(-3.0, canonical_u82)
        multi = solve_multi_switch(-3.0, canonical_u82, 1)
        assert multi.feasible
        assert multi.depth == pytest.approx(sol1.depth, abs=1e-6)

    def test_three_switches_near_single(self, canonical_u82):
        sol1 = solve_bang_bang(-3.0, canonical_u82)
        sol3 = solve_multi_switch(-3.0, canonical_u82, 3)
        improvement = (sol1.depth - sol3.depth) / sol1.depth
        assert improvement <= 0.015

    def test_tiny_stroke_flagged(self):
        sol = solve_multi_switch(-3.0, Params(r_m=5.0, s=0.1, u_max=8.2), 2)
        assert not sol.feasible


class TestSweep:
    def test_stepped_intrusion_cells(self, canonical):
        # grid spanning the three damping values with known step counts
        grid = GridSpec((0.2, 0.3), 2, (0.0, 0.54), 28)
        res = sweep_impedance(-1.0, canonical, grid, workers=2)
        kd = res.k_d_values
        j0 = int(np.argmin(np.abs(kd - 0.0)))
        j18 = int(np.argmin(np.abs(kd - 0.18)))
        j40 = int(np.argmin(np.abs(kd - 0.40)))
        assert abs(kd[j18] - 0.18) < 1e-12 and abs(kd[j40] - 0.40) < 1e-12
        assert res.steps[0, j0] == 3
        assert res.steps[0, j18] == 2
        assert res.steps[0, j40] == 1

    def test_argmin_feasible_and_refined_no_worse(self, canonical):
        res = sweep_impedance(-1.0, canonical, COARSE, workers=2)
        i, j = res.argmin
        assert res.feasible[i, j]
        assert res.value_star <= res.value[i, j] + 1e-12

    def test_refined_is_local_minimum(self, canonical):
        res = sweep_impedance(-1.0, canonical, COARSE, workers=2)
        step = 1e-4
        for dp, dd in ((step, 0), (-step, 0), (0, step), (0, -step)):
            kp = min(max(res.k_p_star + dp, 0.0), 1.0)
            kd = min(max(res.k_d_star + dd, 0.0), 1.0)
            if (kp, kd) == (res.k_p_star, res.k_d_star):
                continue
            out = simulate_outcome(Impedance(kp, kd), canonical, -1.0,
                                   SWEEP_OPTIONS)
            feasible = out.settled and not out.stroke_violation
            assert (not feasible) or out.depth >= res.depth_star - 1e-9

    def test_worker_count_invariance(self, canonical):
        r1 = sweep_impedance(-1.0, canonical, COARSE, workers=1)
        r2 = sweep_impedance(-1.0, canonical, COARSE, workers=3)
        assert np.array_equal(r1.depth, r2.depth)
        assert np.array_equal(r1.steps, r2.steps)
        assert np.array_equal(r1.feasible, r2.feasible)
        assert r1.k_p_star == r2.k_p_star
        assert r1.k_d_star == r2.k_d_star
        assert r1.depth_star == r2.depth_star

    def test_stroke_boundary_property(self, canonical):
        res = sweep_impedance(-1.0, canonical, COARSE, workers=2)
        assert res.refined_outcome.min_gap < 0.02 * canonical.s

    def test_all_infeasible_grid_names_constraint(self):
        params = Params(r_m=5.0, s=0.05)
        with pytest.raises(InfeasibleGridError, match="stroke"):
            sweep_impedance(-3.0, params, GridSpec((0.0, 1.0), 3, (0.0, 1.0), 3),
                            workers=1)

    def test_bad_objective_rejected(self, canonical):
        with pytest.raises(ValueError):
            sweep_impedance(-1.0, canonical, COARSE, objective="speed")

    def test_cot_objective_runs(self, canonical):
        res = sweep_impedance(-1.0, canonical, GridSpec((0.0, 1.0), 6, (0.0, 1.0), 6),
                              objective="cot", workers=2)
        assert math.isfinite(res.value_star)
        assert res.value_star <= np.nanmin(res.cot) + 1e-12

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            GridSpec((0.0, 1.0), 1, (0.0, 1.0), 5)
        with pytest.raises(ValueError):
            GridSpec((1.0, 0.0), 5, (0.0, 1.0), 5)


class TestCurvesAndCompare:
    def test_single_element_lists_one_row(self, canonical):
        rows = optimal_curves([-1.0], [5.0], [20.0], grid=COARSE, workers=2)
        assert len(rows) == 1
        assert rows[0].error is None
        assert rows[0].outcome is not None

    def test_error_rows_do_not_abort(self):
        rows = optimal_curves([-3.0], [5.0], [0.05, 20.0],
                              grid=GridSpec((0.0, 1.0), 3, (0.0, 1.0), 3),
                              workers=1)
        assert len(rows) == 2
        assert rows[0].error is not None
        assert rows[1].error is None

    def test_empty_lists_rejected(self):
        with pytest.raises(ValueError):
            optimal_curves([], [5.0], [20.0])

    def test_compare_ordering(self, canonical_u82):
        rows, u_max = compare_policies([-1.0, -5.0], canonical_u82,
                                       grid=COARSE, workers=2)
        assert u_max == 8.2
        for r in rows:
            assert r.depth_bangbang <= r.depth_impedance + 1e-9
            assert r.depth_impedance <= r.depth_rigid + 1e-9

    def test_compare_derives_bound_when_unset(self, canonical):
        rows, u_max = compare_policies([-10.0], canonical,
                                       grid=COARSE, workers=2)
        assert math.isfinite(u_max)
        assert u_max > 1.0
