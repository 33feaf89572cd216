"""Event-driven adaptive Runge-Kutta core for the hybrid impact dynamics.

A Dormand-Prince 4(5) pair with quartic dense output advances the continuous
dynamics inside each contact phase; guard crossings (foot rest, ground
re-yield, lift-off, touchdown, stroke bounds, settling) are bracketed on each
accepted step and localized by bisection on the dense output, after which the
discrete phase switches and integration restarts from the event state.

The whole loop compiles with numba so that gain sweeps over 10^4+ impacts
stay fast; if numba is unavailable the identical code runs in pure Python.
All arithmetic is plain IEEE double precision and the loop is strictly
deterministic: the same inputs produce bit-identical outputs.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco

# phases (must match model.Phase)
PH_FLIGHT = 0
PH_YIELDING = 1
PH_STATIC = 2

# controller encodings
CTRL_IMPEDANCE = 0
CTRL_BANGBANG = 1
CTRL_CONSTANT = 2
CTRL_RIGID = 3

# termination statuses
ST_TAU_MAX = 0
ST_SETTLED = 1
ST_STROKE = 2
ST_FOOT_REST = 3
ST_NONFINITE = 4
ST_STEP_FAIL = 5
ST_BUFFER_FULL = 6

# event record kinds
EV_TRANSITION = 0
EV_STROKE = 1
EV_SETTLE = 2
EV_SWITCH = 3

VEL_TOL = 1e-9
EPS_YIELD = 1e-9

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# error weights: 5th-order solution minus the embedded 4th-order one
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# dense-output weights (Hairer's continuous extension)
_D1 = -12715105075.0 / 11282082432.0
_D3 = 87487479700.0 / 32700410799.0
_D4 = -10690763975.0 / 1880347072.0
_D5 = 701980252875.0 / 199316789632.0
_D6 = -1453857185.0 / 822651844.0
_D7 = 69997945.0 / 29380423.0

_NDIM = 6  # x_b, v_b, x_f, v_f, w_act, w_gnd
_NSUB = 16  # guard subsamples per accepted step


@njit(cache=True, nogil=True)
def _control(kind, c0, c1, c2, u_sign, y, l0, u_max):
    if kind == CTRL_IMPEDANCE:
        u = -c0 * (y[0] - y[2] - l0) - c1 * (y[1] - y[3])
        if c2 != 0.0:
            if u > u_max:
                u = u_max
            elif u < -u_max:
                u = -u_max
        return u
    if kind == CTRL_BANGBANG:
        return u_sign * c0
    if kind == CTRL_CONSTANT:
        return c0
    return 0.0


@njit(cache=True, nogil=True)
def _required(kind, u, wf):
    # ground force needed to hold the foot static
    if kind == CTRL_RIGID:
        return 1.0
    return u + wf


@njit(cache=True, nogil=True)
def _gamma(kind, phase, u, y, wf):
    if phase == PH_YIELDING:
        return max(-y[2], 0.0)
    if phase == PH_FLIGHT:
        return 0.0
    req = _required(kind, u, wf)
    cap = -y[2]
    if cap < 0.0:
        cap = 0.0
    if req < 0.0:
        return 0.0
    if req > cap:
        return cap
    return req


@njit(cache=True, nogil=True)
def _deriv(kind, c0, c1, c2, u_sign, phase, y, r_m, l0, u_max, dy):
    u = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
    if kind == CTRL_RIGID:
        v = y[3]
        if phase == PH_YIELDING:
            a = -1.0 - y[2]
            dwg = y[2] * v
        elif phase == PH_FLIGHT:
            a = -1.0
            dwg = 0.0
        else:
            v = 0.0
            a = 0.0
            dwg = 0.0
        dy[0] = v
        dy[1] = a
        dy[2] = v
        dy[3] = a
        dy[4] = 0.0
        dy[5] = dwg
        return
    kb = (1.0 + r_m) / r_m
    kf = 1.0 + r_m
    if phase == PH_YIELDING:
        vf = y[3]
        af = -1.0 - kf * (y[2] + u)
        dwg = y[2] * y[3]
    elif phase == PH_FLIGHT:
        vf = y[3]
        af = -1.0 - kf * u
        dwg = 0.0
    else:
        vf = 0.0
        af = 0.0
        dwg = 0.0
    dy[0] = y[1]
    dy[1] = -1.0 + kb * u
    dy[2] = vf
    dy[3] = af
    dy[4] = u * (y[1] - vf)
    dy[5] = dwg


@njit(cache=True, nogil=True)
def _event_g(kind, c0, c1, c2, u_sign, phase, y, r_m, wf, u_hover,
             l0, u_max, s, settle_vel, g):
    """Guard functions for the current phase, written into g[0:5].

    slot 0: yielding -> foot-rest (v_f rising), flight -> touchdown (x_f
            falling), static -> re-yield (support demand leaves the cone,
            rising)
    slot 1: flight -> in-crater descent (v_f falling, guarded on x_f < 0),
            static -> lift-off (support demand negative, falling)
    slot 2: stroke over-extension (gap - s rising)
    slot 3: stroke closure (gap falling through 0)
    slot 4: static only, settle candidate (body at rest under hover force,
            rising)
    """
    u = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
    gap = y[0] - y[2]
    if phase == PH_YIELDING:
        g[0] = y[3]
        g[1] = 0.0
    elif phase == PH_FLIGHT:
        g[0] = y[2]
        g[1] = y[3]
    else:
        req = _required(kind, u, wf)
        g[0] = req + y[2] - EPS_YIELD
        g[1] = req + EPS_YIELD
    g[2] = gap - s
    g[3] = gap
    if phase == PH_STATIC:
        r = abs(y[1])
        d = abs(u - u_hover)
        if d > r:
            r = d
        g[4] = settle_vel - r
    else:
        g[4] = 0.0


@njit(cache=True, nogil=True)
def _dense(rc, theta, out):
    # quartic interpolant over the accepted step, theta in [0, 1]
    om = 1.0 - theta
    for i in range(_NDIM):
        out[i] = rc[0, i] + theta * (rc[1, i] + om * (rc[2, i] + theta * (rc[3, i] + om * rc[4, i])))


@njit(cache=True, nogil=True)
def _settle_ok(kind, c0, c1, c2, u_sign, y, l0, u_max, u_hover, settle_vel):
    if kind == CTRL_RIGID:
        return True
    u = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
    return abs(y[1]) <= settle_vel and abs(u - u_hover) <= settle_vel


@njit(cache=True, nogil=True)
def integrate_impact(kind, c0, c1, c2, sw,
                     r_m, s, l0, u_max,
                     v0,
                     rtol, atol, event_tol, tau_max, settle_vel, record_dt,
                     stop_at_rest, record):
    """Simulate one impact from touchdown until settling or termination.

    Returns a flat tuple; see sim.simulate for the assembled result.  The
    trajectory buffers hold periodic samples (every record_dt) plus one
    sample at every event; with record=False only events are kept.
    """
    wf = 1.0 / (1.0 + r_m)
    u_hover = r_m / (1.0 + r_m)

    # buffers
    ev_cap = 4096
    ev_t = np.empty(ev_cap)
    ev_kind = np.empty(ev_cap, np.int64)
    ev_from = np.empty(ev_cap, np.int64)
    ev_to = np.empty(ev_cap, np.int64)
    n_ev = 0
    if record:
        s_cap = ev_cap + 64 + sw.shape[0]
        if record_dt > 0.0:
            s_cap += int(tau_max / record_dt) + 2
    else:
        s_cap = 1
    samp_t = np.empty(s_cap)
    samp_y = np.empty((s_cap, _NDIM))
    samp_ph = np.empty(s_cap, np.int64)
    samp_u = np.empty(s_cap)
    samp_g = np.empty(s_cap)
    n_s = 0

    # initial state
    y = np.empty(_NDIM)
    y[0] = l0
    y[1] = v0
    y[2] = 0.0
    y[3] = v0
    y[4] = 0.0
    y[5] = 0.0
    t = 0.0

    # bang-bang switch bookkeeping (switches at tau = 0 apply immediately)
    u_sign = 1.0
    n_sw = sw.shape[0]
    sw_i = 0
    while sw_i < n_sw and sw[sw_i] <= 0.0:
        u_sign = -u_sign
        sw_i += 1

    u0 = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
    req0 = _required(kind, u0, wf)
    if v0 < -VEL_TOL:
        phase = PH_YIELDING
    elif req0 > EPS_YIELD:
        phase = PH_YIELDING
    elif req0 < -EPS_YIELD:
        phase = PH_FLIGHT
    else:
        phase = PH_STATIC
        y[3] = 0.0

    # outcome tracking
    min_xf = y[2]
    min_gap = l0
    max_gap = l0
    u_peak = abs(u0)
    rest_t = np.nan
    rest_y = y.copy()
    have_rest = False
    settled = False
    stroke = False
    stroke_t = np.nan
    pending = False
    pend_t = 0.0
    status = -1

    # record helper state
    last_s_t = -1.0
    if record:
        samp_t[0] = t
        for i in range(_NDIM):
            samp_y[0, i] = y[i]
        samp_ph[0] = phase
        samp_u[0] = u0
        samp_g[0] = _gamma(kind, phase, u0, y, wf)
        n_s = 1
        last_s_t = t
    next_rec = record_dt if (record and record_dt > 0.0) else np.inf

    if phase == PH_STATIC:
        rest_t = 0.0
        have_rest = True
        if kind == CTRL_RIGID:
            settled = True
            status = ST_SETTLED
        elif _settle_ok(kind, c0, c1, c2, u_sign, y, l0, u_max, u_hover, settle_vel):
            pending = True
            pend_t = 0.0

    # RK work arrays
    k = np.empty((7, _NDIM))
    ytmp = np.empty(_NDIM)
    ynew = np.empty(_NDIM)
    yev = np.empty(_NDIM)
    rc = np.empty((5, _NDIM))
    g0 = np.empty(5)
    g1 = np.empty(5)
    gm = np.empty(5)
    gsub = np.empty((_NSUB + 1, 5))

    # initial step size (Hairer's heuristic)
    _deriv(kind, c0, c1, c2, u_sign, phase, y, r_m, l0, u_max, k[0])
    d0 = 0.0
    d1 = 0.0
    for i in range(_NDIM):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (k[0, i] / sc) ** 2
    d0 = np.sqrt(d0 / _NDIM)
    d1 = np.sqrt(d1 / _NDIM)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    for i in range(_NDIM):
        ytmp[i] = y[i] + h * k[0, i]
    _deriv(kind, c0, c1, c2, u_sign, phase, ytmp, r_m, l0, u_max, k[1])
    d2 = 0.0
    for i in range(_NDIM):
        sc = atol + rtol * abs(y[i])
        d2 += ((k[1, i] - k[0, i]) / sc) ** 2
    d2 = np.sqrt(d2 / _NDIM) / h
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    h = min(100.0 * h, h1, tau_max)

    n_guard = 0
    rejected_before = False
    while True:
        n_guard += 1
        if n_guard > 50_000_000:
            status = ST_STEP_FAIL
            break
        if status >= 0:
            break
        if t >= tau_max:
            status = ST_TAU_MAX
            break

        # segment end: next control switch or the horizon
        t_seg = tau_max
        at_switch = False
        if kind == CTRL_BANGBANG and sw_i < n_sw and sw[sw_i] < t_seg:
            t_seg = sw[sw_i]
            at_switch = True
        if t >= t_seg:
            if at_switch:
                u_sign = -u_sign
                sw_i += 1
                if n_ev < ev_cap:
                    ev_t[n_ev] = t
                    ev_kind[n_ev] = EV_SWITCH
                    ev_from[n_ev] = phase
                    ev_to[n_ev] = phase
                    n_ev += 1
                if record and n_s < s_cap:
                    uu = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
                    if t == last_s_t and n_s > 0:
                        n_s -= 1
                    samp_t[n_s] = t
                    for i in range(_NDIM):
                        samp_y[n_s, i] = y[i]
                    samp_ph[n_s] = phase
                    samp_u[n_s] = uu
                    samp_g[n_s] = _gamma(kind, phase, uu, y, wf)
                    n_s += 1
                    last_s_t = t
            continue
        if t_seg - t < 1e-14 * max(1.0, t_seg):
            t = t_seg
            continue

        # guard values at the step start
        _event_g(kind, c0, c1, c2, u_sign, phase, y, r_m, wf, u_hover,
                 l0, u_max, s, settle_vel, g0)

        # one accepted step, clipped to the segment end
        err = 0.0
        h_use = h
        hit_end = False
        accepted = False
        while not accepted:
            h_use = h
            hit_end = False
            if t + h_use >= t_seg:
                h_use = t_seg - t
                hit_end = True
            if h_use < 1e-14 * max(1.0, abs(t)) or not np.isfinite(h_use):
                status = ST_STEP_FAIL
                break

            _deriv(kind, c0, c1, c2, u_sign, phase, y, r_m, l0, u_max, k[0])
            for i in range(_NDIM):
                ytmp[i] = y[i] + h_use * _A21 * k[0, i]
            _deriv(kind, c0, c1, c2, u_sign, phase, ytmp, r_m, l0, u_max, k[1])
            for i in range(_NDIM):
                ytmp[i] = y[i] + h_use * (_A31 * k[0, i] + _A32 * k[1, i])
            _deriv(kind, c0, c1, c2, u_sign, phase, ytmp, r_m, l0, u_max, k[2])
            for i in range(_NDIM):
                ytmp[i] = y[i] + h_use * (_A41 * k[0, i] + _A42 * k[1, i] + _A43 * k[2, i])
            _deriv(kind, c0, c1, c2, u_sign, phase, ytmp, r_m, l0, u_max, k[3])
            for i in range(_NDIM):
                ytmp[i] = y[i] + h_use * (_A51 * k[0, i] + _A52 * k[1, i]
                                          + _A53 * k[2, i] + _A54 * k[3, i])
            _deriv(kind, c0, c1, c2, u_sign, phase, ytmp, r_m, l0, u_max, k[4])
            for i in range(_NDIM):
                ytmp[i] = y[i] + h_use * (_A61 * k[0, i] + _A62 * k[1, i]
                                          + _A63 * k[2, i] + _A64 * k[3, i]
                                          + _A65 * k[4, i])
            _deriv(kind, c0, c1, c2, u_sign, phase, ytmp, r_m, l0, u_max, k[5])
            for i in range(_NDIM):
                ynew[i] = y[i] + h_use * (_B1 * k[0, i] + _B3 * k[2, i]
                                          + _B4 * k[3, i] + _B5 * k[4, i]
                                          + _B6 * k[5, i])
            _deriv(kind, c0, c1, c2, u_sign, phase, ynew, r_m, l0, u_max, k[6])

            err = 0.0
            finite = True
            for i in range(_NDIM):
                if not np.isfinite(ynew[i]):
                    finite = False
                    break
                e = h_use * (_E1 * k[0, i] + _E3 * k[2, i] + _E4 * k[3, i]
                             + _E5 * k[4, i] + _E6 * k[5, i] + _E7 * k[6, i])
                ay = abs(y[i])
                an = abs(ynew[i])
                sc = atol + rtol * (ay if ay > an else an)
                err += (e / sc) ** 2
            if not finite:
                h = 0.5 * h_use
                rejected_before = True
                if h < 1e-14 * max(1.0, abs(t)):
                    status = ST_NONFINITE
                    break
                continue
            err = np.sqrt(err / _NDIM)
            if err <= 1.0:
                accepted = True
            else:
                fac = 0.9 * err ** -0.2
                if fac < 0.2:
                    fac = 0.2
                h = h_use * fac
                rejected_before = True
        if status >= 0:
            break

        t_new = t_seg if hit_end else t + h_use
        if err == 0.0:
            fac = 10.0
        else:
            fac = 0.9 * err ** -0.2
            if fac > 10.0:
                fac = 10.0
        if rejected_before and fac > 1.0:
            fac = 1.0
        rejected_before = False
        h = h_use * fac

        # dense-output coefficients for this step
        for i in range(_NDIM):
            rc[0, i] = y[i]
            dyi = ynew[i] - y[i]
            rc[1, i] = dyi
            rc[2, i] = h_use * k[0, i] - dyi
            rc[3, i] = dyi - h_use * k[6, i] - rc[2, i]
            rc[4, i] = h_use * (_D1 * k[0, i] + _D3 * k[2, i] + _D4 * k[3, i]
                                + _D5 * k[4, i] + _D6 * k[5, i] + _D7 * k[6, i])

        # guard scan over the step: guards are sampled on a fine interior
        # grid of the dense output so that short excursions (a gap dipping
        # through zero and back inside one step) cannot slip through
        _event_g(kind, c0, c1, c2, u_sign, phase, ynew, r_m, wf, u_hover,
                 l0, u_max, s, settle_vel, g1)
        for i in range(5):
            gsub[0, i] = g0[i]
            gsub[_NSUB, i] = g1[i]
        for q in range(1, _NSUB):
            _dense(rc, q * (1.0 / _NSUB), yev)
            _event_g(kind, c0, c1, c2, u_sign, phase, yev, r_m, wf, u_hover,
                     l0, u_max, s, settle_vel, gm)
            for i in range(5):
                gsub[q, i] = gm[i]
        best_theta = 2.0
        best_slot = -1
        for slot in range(5):
            if slot == 1 and phase == PH_YIELDING:
                continue
            if slot == 4 and (phase != PH_STATIC or kind == CTRL_RIGID or pending):
                continue
            if kind == CTRL_RIGID and (slot == 2 or slot == 3):
                continue
            # crossing direction per slot and phase
            if slot == 0:
                rising = phase != PH_FLIGHT
            elif slot == 1:
                rising = False
            elif slot == 2:
                rising = True
            elif slot == 3:
                rising = False
            else:
                rising = True
            for q in range(_NSUB):
                a = gsub[q, slot]
                b = gsub[q + 1, slot]
                if rising:
                    crossed = a < 0.0 and b >= 0.0
                else:
                    crossed = a > 0.0 and b <= 0.0
                if not crossed:
                    continue
                # bisect on the dense output within the bracketing subinterval
                lo = q * (1.0 / _NSUB)
                hi = (q + 1) * (1.0 / _NSUB)
                while (hi - lo) * h_use > event_tol:
                    mid = 0.5 * (lo + hi)
                    _dense(rc, mid, yev)
                    _event_g(kind, c0, c1, c2, u_sign, phase, yev, r_m, wf, u_hover,
                             l0, u_max, s, settle_vel, gm)
                    gmv = gm[slot]
                    if rising:
                        if gmv >= 0.0:
                            hi = mid
                        else:
                            lo = mid
                    else:
                        if gmv <= 0.0:
                            hi = mid
                        else:
                            lo = mid
                theta = hi
                _dense(rc, theta, yev)
                # guards that cancel the event; keep scanning later
                # subintervals in case a genuine crossing follows
                if slot == 0 and phase == PH_YIELDING:
                    ue = _control(kind, c0, c1, c2, u_sign, yev, l0, u_max)
                    if _required(kind, ue, wf) > -yev[2] + EPS_YIELD:
                        continue  # grazing touch, the foot keeps yielding
                if slot == 1 and phase == PH_FLIGHT:
                    if yev[2] >= -EPS_YIELD:
                        continue  # apex above the surface, still airborne
                if theta < best_theta:
                    best_theta = theta
                    best_slot = slot
                break

        # peak tracking only over the retained part of the step
        theta_keep = best_theta if best_slot >= 0 else 1.0
        for q in range(1, _NSUB):
            tq = q * (1.0 / _NSUB)
            if tq >= theta_keep:
                break
            _dense(rc, tq, yev)
            gap = yev[0] - yev[2]
            if gap < min_gap:
                min_gap = gap
            if gap > max_gap:
                max_gap = gap
            au = abs(_control(kind, c0, c1, c2, u_sign, yev, l0, u_max))
            if au > u_peak:
                u_peak = au

        if best_slot >= 0:
            t_ev = t + best_theta * h_use
            # periodic samples inside the retained part
            if record:
                while next_rec <= t_ev and n_s < s_cap:
                    if next_rec > t and next_rec > last_s_t:
                        _dense(rc, (next_rec - t) / h_use, yev)
                        uu = _control(kind, c0, c1, c2, u_sign, yev, l0, u_max)
                        samp_t[n_s] = next_rec
                        for i in range(_NDIM):
                            samp_y[n_s, i] = yev[i]
                        samp_ph[n_s] = phase
                        samp_u[n_s] = uu
                        samp_g[n_s] = _gamma(kind, phase, uu, yev, wf)
                        n_s += 1
                        last_s_t = next_rec
                    next_rec += record_dt
            t = t_ev
            _dense(rc, best_theta, y)
            u_now = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
            old_phase = phase
            if best_slot == 2 or best_slot == 3:
                stroke = True
                stroke_t = t
                status = ST_STROKE
                if n_ev < ev_cap:
                    ev_t[n_ev] = t
                    ev_kind[n_ev] = EV_STROKE
                    ev_from[n_ev] = phase
                    ev_to[n_ev] = phase
                    n_ev += 1
            elif best_slot == 4:
                pending = True
                pend_t = t
            else:
                if phase == PH_YIELDING:
                    req = _required(kind, u_now, wf)
                    if stop_at_rest:
                        # hand the rest state to the caller regardless of
                        # whether the support cone holds; a follow-up
                        # controller owns the arrest from here
                        phase = PH_STATIC
                        y[3] = 0.0
                        rest_t = t
                        for i in range(_NDIM):
                            rest_y[i] = y[i]
                        have_rest = True
                        status = ST_FOOT_REST
                    elif req < -EPS_YIELD:
                        phase = PH_FLIGHT
                    else:
                        phase = PH_STATIC
                        y[3] = 0.0
                        rest_t = t
                        for i in range(_NDIM):
                            rest_y[i] = y[i]
                        have_rest = True
                elif phase == PH_FLIGHT:
                    phase = PH_YIELDING
                    pending = False
                else:  # static exits
                    pending = False
                    if best_slot == 0:
                        phase = PH_YIELDING
                    else:
                        phase = PH_FLIGHT
                if n_ev < ev_cap:
                    ev_t[n_ev] = t
                    ev_kind[n_ev] = EV_TRANSITION
                    ev_from[n_ev] = old_phase
                    ev_to[n_ev] = phase
                    n_ev += 1
                else:
                    status = ST_BUFFER_FULL
                if status < 0 and phase == PH_STATIC and old_phase == PH_YIELDING:
                    if kind == CTRL_RIGID:
                        settled = True
                        status = ST_SETTLED
                    elif _settle_ok(kind, c0, c1, c2, u_sign, y, l0, u_max,
                                    u_hover, settle_vel):
                        pending = True
                        pend_t = t
            # tracking and the event sample
            if y[2] < min_xf:
                min_xf = y[2]
            gap = y[0] - y[2]
            if gap < min_gap:
                min_gap = gap
            if gap > max_gap:
                max_gap = gap
            au = abs(u_now)
            if au > u_peak:
                u_peak = au
            if record and n_s < s_cap:
                if t == last_s_t and n_s > 0:
                    n_s -= 1
                uu = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
                samp_t[n_s] = t
                for i in range(_NDIM):
                    samp_y[n_s, i] = y[i]
                samp_ph[n_s] = phase
                samp_u[n_s] = uu
                samp_g[n_s] = _gamma(kind, phase, uu, y, wf)
                n_s += 1
                last_s_t = t
            continue

        # no event: periodic samples from the dense output, then advance
        if record:
            while next_rec <= t_new and n_s < s_cap:
                if next_rec > t:
                    theta = (next_rec - t) / h_use
                    _dense(rc, theta, yev)
                    if next_rec > last_s_t:
                        uu = _control(kind, c0, c1, c2, u_sign, yev, l0, u_max)
                        samp_t[n_s] = next_rec
                        for i in range(_NDIM):
                            samp_y[n_s, i] = yev[i]
                        samp_ph[n_s] = phase
                        samp_u[n_s] = uu
                        samp_g[n_s] = _gamma(kind, phase, uu, yev, wf)
                        n_s += 1
                        last_s_t = next_rec
                next_rec += record_dt
        t = t_new
        for i in range(_NDIM):
            y[i] = ynew[i]
        if y[2] < min_xf:
            min_xf = y[2]
        gap = y[0] - y[2]
        if gap < min_gap:
            min_gap = gap
        if gap > max_gap:
            max_gap = gap
        u_now = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
        au = abs(u_now)
        if au > u_peak:
            u_peak = au
        if pending and phase == PH_STATIC and t > pend_t:
            if _settle_ok(kind, c0, c1, c2, u_sign, y, l0, u_max, u_hover, settle_vel):
                settled = True
                status = ST_SETTLED
                if n_ev < ev_cap:
                    ev_t[n_ev] = t
                    ev_kind[n_ev] = EV_SETTLE
                    ev_from[n_ev] = phase
                    ev_to[n_ev] = phase
                    n_ev += 1
            else:
                pending = False

    # final sample
    if record and n_s < s_cap and t > last_s_t:
        uu = _control(kind, c0, c1, c2, u_sign, y, l0, u_max)
        samp_t[n_s] = t
        for i in range(_NDIM):
            samp_y[n_s, i] = y[i]
        samp_ph[n_s] = phase
        samp_u[n_s] = uu
        samp_g[n_s] = _gamma(kind, phase, uu, y, wf)
        n_s += 1

    return (status, t, y, phase,
            samp_t[:n_s], samp_y[:n_s], samp_ph[:n_s], samp_u[:n_s], samp_g[:n_s],
            ev_t[:n_ev], ev_kind[:n_ev], ev_from[:n_ev], ev_to[:n_ev],
            min_xf, min_gap, max_gap, u_peak,
            rest_t, rest_y, have_rest, settled, stroke, stroke_t)
