"""Compiled scalar kernels for the averaged model and the closed loop.

Everything here works on flat float64 arrays so it can be jitted; the public
modules wrap these with dataclasses. Array layouts are fixed by the index
constants below.
"""
import math

import numpy as np
from numba import njit

# parameter vector
(C1, C2, C4, C5, C7, C9, C10, L3, L6, L8, L11,
 R1, R2, R01, R02, R4, R5, R04, R05, R7, R07, R08, R10, R11, F_AC) = range(25)
N_PARAMS = 25
# kernels take the parameter vector extended with its reciprocals: p[INV + C1] = 1/C1
INV = N_PARAMS

# disturbance vector
V_PV, V_B, V_S, R_L, V_LD, V_LQ, OMEGA = range(7)
N_DIST = 7

# gain vector
(K1, K1B, K1A, K3, K3B, K3A,
 K4, K4B, K4A, K6, K6B, K6A,
 K7, K8,
 K11, K11B, K11A, K12, K12B, K12A) = range(20)
N_GAINS = 20

# reference vector
X1S, X4S, X9S, X11S, X12S = range(5)
N_REFS = 5

# integral states (offsets inside the 6-vector)
A1, A3, A4, A6, A11, A12 = range(6)
N_ALPHA = 6
N_STATE = 12
N_AUG = N_STATE + N_ALPHA

SING_TOL = 1e-6

# status codes
OK = 0
SING_PV = 1
SING_BAT = 2
SING_SC = 3
SING_ACDC = 4
SING_X10 = 5
NONFINITE = 6

# backstepping variants for the supercapacitor loop
BS_EXACT = 0
BS_SIMPLIFIED = 1

# trajectory sample row: t, x(12), alpha(6), u(5), sat(5), refs(5), d(7)
COL_T = 0
COL_X = 1
COL_ALPHA = COL_X + N_STATE
COL_U = COL_ALPHA + N_ALPHA
COL_SAT = COL_U + 5
COL_REF = COL_SAT + 5
COL_D = COL_REF + N_REFS
N_COLS = COL_D + N_DIST


def param_vector(p):
    """Kernel parameter layout: the 25 constants followed by their reciprocals."""
    p = np.asarray(p, dtype=np.float64)
    return np.concatenate((p, 1.0 / p))


@njit(cache=True, error_model="numpy")
def plant_rhs(x, u, d, p, out):
    """Twelve right-hand sides of the averaged model. Caller guarantees x10 != 0."""
    x1, x2, x3, x4, x5, x6 = x[0], x[1], x[2], x[3], x[4], x[5]
    x7, x8, x9, x10, x11, x12 = x[6], x[7], x[8], x[9], x[10], x[11]
    u1, u2, u3, u4, u5 = u[0], u[1], u[2], u[3], u[4]
    w = d[OMEGA]

    out[0] = ((d[V_PV] - x1) * p[INV + R1] - x3) * p[INV + C1]
    out[1] = ((x9 - x2) * p[INV + R2] + (1.0 - u1) * x3) * p[INV + C2]
    out[2] = (x1 - x2 - p[R01] * x3 + x2 * u1 + (p[R01] - p[R02]) * x3 * u1) * p[INV + L3]
    out[3] = ((d[V_B] - x4) * p[INV + R4] - x6) * p[INV + C4]
    out[4] = ((x9 - x5) * p[INV + R5] + (1.0 - u2) * x6) * p[INV + C5]
    out[5] = (x4 - x5 - p[R04] * x6 + x5 * u2) * p[INV + L6]
    out[6] = ((x9 - x7) * p[INV + R7] - x8) * p[INV + C7]
    out[7] = (d[V_S] * u3 - p[R08] * x8 - x7) * p[INV + L8]
    out[8] = bus_rate(x, d, p)
    out[9] = (-1.5 * (d[V_LD] * x11 + d[V_LQ] * x12) / x10
              + (x9 - x10) * p[INV + R10]) * p[INV + C10]
    out[10] = (-p[R11] * x11 + w * x12 + 0.5 * x10 * u4 - d[V_LD]) * p[INV + L11]
    out[11] = (-p[R11] * x12 - w * x11 + 0.5 * x10 * u5 - d[V_LQ]) * p[INV + L11]


@njit(cache=True, error_model="numpy")
def bus_rate(x, d, p):
    x9 = x[8]
    i_in = ((x[1] - x9) * p[INV + R2] + (x[4] - x9) * p[INV + R5]
            + (x[6] - x9) * p[INV + R7] + (x[9] - x9) * p[INV + R10] - x9 / d[R_L])
    return i_in * p[INV + C9]


@njit(cache=True, error_model="numpy")
def pv_law(x, alpha, r, d, p, g):
    """Returns (u1_raw, z3, status)."""
    e1 = x[0] - r[X1S]
    z3 = (d[V_PV] - x[0]) * p[INV + R1] + p[C1] * g[K1] * e1 + p[C1] * g[K1B] * alpha[A1]
    v1 = (g[K3] * (x[2] - z3) + g[K3B] * alpha[A3]
          - p[C1] * g[K1B] * g[K1A] * e1
          + (p[C1] * g[K1] - p[INV + R1]) * (g[K1] * e1 + g[K1B] * alpha[A1]))
    den = x[1] + (p[R01] - p[R02]) * x[2]
    if abs(den) < SING_TOL:
        return math.nan, z3, SING_PV
    u1 = (-x[0] + x[1] + p[R01] * x[2] - p[L3] * v1) / den
    return u1, z3, OK


@njit(cache=True, error_model="numpy")
def battery_law(x, alpha, r, d, p, g):
    """Returns (u2_raw, z6, status)."""
    e4 = x[3] - r[X4S]
    z6 = (d[V_B] - x[3]) * p[INV + R4] + p[C4] * g[K4] * e4 + p[C4] * g[K4B] * alpha[A4]
    v2 = (-g[K6] * (x[5] - z6) - g[K6B] * alpha[A6]
          + g[K4B] * g[K4A] * e4
          - (p[C4] * g[K4] - p[INV + R4]) * (g[K4] * e4 + g[K4B] * alpha[A4]))
    if abs(x[4]) < SING_TOL:
        return math.nan, z6, SING_BAT
    u2 = (-x[3] + x[4] + p[R04] * x[5] + p[L6] * v2) / x[4]
    return u2, z6, OK


@njit(cache=True, error_model="numpy")
def supercap_terms(x, z7, d, p, g, x9_dot, mode):
    """Returns (u3_raw, z8, z8_dot, status) for the backstepping loop with constant z7."""
    x7, x8 = x[6], x[7]
    e7 = x7 - z7
    z8 = (x[8] - x7) * p[INV + R7] + p[C7] * g[K7] * e7
    e8 = x8 - z8
    if mode == BS_SIMPLIFIED:
        z8_dot = x9_dot * p[INV + R7] - g[K7] * (g[K7] * p[C7] - p[INV + R7]) * e7
        v3 = g[K8] * e8
    else:
        x7_dot = ((x[8] - x7) * p[INV + R7] - x8) * p[INV + C7]
        z8_dot = (x9_dot - x7_dot) * p[INV + R7] + p[C7] * g[K7] * x7_dot
        v3 = g[K8] * e8 - e7 * p[INV + C7]
    if abs(d[V_S]) < SING_TOL:
        return math.nan, z8, z8_dot, SING_SC
    u3 = (x7 + p[R08] * x8 + p[L8] * z8_dot - p[L8] * v3) / d[V_S]
    return u3, z8, z8_dot, OK


@njit(cache=True, error_model="numpy")
def acdc_law(x, alpha, r, d, p, g):
    """Returns (u4_raw, u5_raw, status)."""
    v4 = g[K11] * (x[10] - r[X11S]) + g[K11B] * alpha[A11]
    v5 = g[K12] * (x[11] - r[X12S]) + g[K12B] * alpha[A12]
    if abs(x[9]) < SING_TOL:
        return math.nan, math.nan, SING_ACDC
    w = d[OMEGA]
    u4 = 2.0 / x[9] * (d[V_LD] + p[R11] * x[10] - w * x[11] - p[L11] * v4)
    u5 = 2.0 / x[9] * (d[V_LQ] + p[R11] * x[11] + w * x[10] - p[L11] * v5)
    return u4, u5, OK


@njit(cache=True, error_model="numpy")
def integral_rates(x, z3, z6, r, g, out):
    out[A1] = g[K1A] * (x[0] - r[X1S])
    out[A3] = g[K3A] * (x[2] - z3)
    out[A4] = g[K4A] * (x[3] - r[X4S])
    out[A6] = g[K6A] * (x[5] - z6)
    out[A11] = g[K11A] * (x[10] - r[X11S])
    out[A12] = g[K12A] * (x[11] - r[X12S])


@njit(cache=True, error_model="numpy")
def saturate(u_raw, u, flags):
    for i in range(3):
        v = u_raw[i]
        if v > 1.0:
            u[i] = 1.0
            flags[i] = 1.0
        elif v < 0.0:
            u[i] = 0.0
            flags[i] = 1.0
        else:
            u[i] = v
            flags[i] = 0.0
    mag = math.sqrt(u_raw[3] * u_raw[3] + u_raw[4] * u_raw[4])
    if mag > 1.0:
        u[3] = u_raw[3] / mag
        u[4] = u_raw[4] / mag
        flags[3] = 1.0
        flags[4] = 1.0
    else:
        u[3] = u_raw[3]
        u[4] = u_raw[4]
        flags[3] = 0.0
        flags[4] = 0.0


@njit(cache=True, error_model="numpy")
def control(x, alpha, r, d, p, g, mode, u_raw, alpha_dot):
    """Raw control vector and unfrozen integral rates. Returns a status code."""
    u1, z3, st = pv_law(x, alpha, r, d, p, g)
    if st != OK:
        return st
    u2, z6, st = battery_law(x, alpha, r, d, p, g)
    if st != OK:
        return st
    if abs(x[9]) < SING_TOL:
        return SING_ACDC
    x9_dot = bus_rate(x, d, p)
    u3, z8, z8_dot, st = supercap_terms(x, r[X9S], d, p, g, x9_dot, mode)
    if st != OK:
        return st
    u4, u5, st = acdc_law(x, alpha, r, d, p, g)
    if st != OK:
        return st
    u_raw[0] = u1
    u_raw[1] = u2
    u_raw[2] = u3
    u_raw[3] = u4
    u_raw[4] = u5
    integral_rates(x, z3, z6, r, g, alpha_dot)
    return OK


@njit(cache=True, error_model="numpy")
def closed_loop_rhs(y, r, d, p, g, mode, dy, u_raw, u, flags):
    x = y[:N_STATE]
    alpha = y[N_STATE:]
    alpha_dot = dy[N_STATE:]
    st = control(x, alpha, r, d, p, g, mode, u_raw, alpha_dot)
    if st != OK:
        return st
    saturate(u_raw, u, flags)
    # anti-windup: freeze the integrators of a saturated channel
    if flags[0] != 0.0:
        alpha_dot[A1] = 0.0
        alpha_dot[A3] = 0.0
    if flags[1] != 0.0:
        alpha_dot[A4] = 0.0
        alpha_dot[A6] = 0.0
    if flags[3] != 0.0:
        alpha_dot[A11] = 0.0
        alpha_dot[A12] = 0.0
    plant_rhs(x, u, d, p, dy[:N_STATE])
    return OK


@njit(cache=True, error_model="numpy")
def eval_signals(k, t, cursor, seg_offsets, seg, dt, d):
    """Evaluate every disturbance signal at time t using the segment active at step k."""
    for s in range(N_DIST):
        j = cursor[s]
        while j + 1 < seg_offsets[s + 1] and seg[j + 1, 0] <= k:
            j += 1
        cursor[s] = j
        tau = t - seg[j, 0] * dt
        d[s] = (seg[j, 1] + seg[j, 2] * tau
                + seg[j, 3] * math.sin(2.0 * math.pi * seg[j, 4] * tau + seg[j, 5]))


@njit(cache=True, error_model="numpy")
def advance_refs(k, cursor, ref_start):
    j = cursor[0]
    while j + 1 < ref_start.shape[0] and ref_start[j + 1] <= k:
        j += 1
    cursor[0] = j
    return j


@njit(cache=True, error_model="numpy")
def new_workspace():
    return np.empty((5, N_AUG)), np.empty((4, 5)), np.empty(N_DIST)


@njit(cache=True, error_model="numpy")
def rk4_step(y, k, dt, r, seg_offsets, seg, cursor, p, g, mode, y_next, work, ubuf, d, comp):
    """One classical RK4 step from t = k*dt. Returns a status code.

    ``work``, ``ubuf`` and ``d`` are scratch buffers from :func:`new_workspace`.
    The state update uses compensated (Kahan) summation: ``comp`` carries the
    low-order bits lost when adding the small increment to the state and is
    updated in place. Pass zeros for a stand-alone step.
    """
    n = y.shape[0]
    k1 = work[0]
    k2 = work[1]
    k3 = work[2]
    k4 = work[3]
    tmp = work[4]
    u_raw = ubuf[0]
    u = ubuf[1]
    flags = ubuf[2]
    t = k * dt

    eval_signals(k, t, cursor, seg_offsets, seg, dt, d)
    st = closed_loop_rhs(y, r, d, p, g, mode, k1, u_raw, u, flags)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k1[i]
    eval_signals(k, t + 0.5 * dt, cursor, seg_offsets, seg, dt, d)
    if abs(tmp[9]) < SING_TOL:
        return SING_X10
    st = closed_loop_rhs(tmp, r, d, p, g, mode, k2, u_raw, u, flags)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k2[i]
    if abs(tmp[9]) < SING_TOL:
        return SING_X10
    st = closed_loop_rhs(tmp, r, d, p, g, mode, k3, u_raw, u, flags)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = y[i] + dt * k3[i]
    eval_signals(k, t + dt, cursor, seg_offsets, seg, dt, d)
    if abs(tmp[9]) < SING_TOL:
        return SING_X10
    st = closed_loop_rhs(tmp, r, d, p, g, mode, k4, u_raw, u, flags)
    if st != OK:
        return st
    for i in range(n):
        inc = dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - comp[i]
        y_next[i] = y[i] + inc
        comp[i] = (y_next[i] - y[i]) - inc
        if not math.isfinite(y_next[i]):
            return NONFINITE
    return OK


@njit(cache=True, error_model="numpy")
def record(row, k, dt, y, r, seg_offsets, seg, cursor, p, g, mode, work, ubuf, d):
    u_raw = ubuf[3]
    dy = work[0]
    t = k * dt
    eval_signals(k, t, cursor, seg_offsets, seg, dt, d)
    row[COL_T] = t
    for i in range(N_AUG):
        row[COL_X + i] = y[i]
    for i in range(N_REFS):
        row[COL_REF + i] = r[i]
    for i in range(N_DIST):
        row[COL_D + i] = d[i]
    if abs(y[9]) < SING_TOL:
        return SING_X10
    st = closed_loop_rhs(y, r, d, p, g, mode, dy, u_raw,
                         row[COL_U:COL_U + 5], row[COL_SAT:COL_SAT + 5])
    return st


@njit(cache=True, error_model="numpy")
def integrate(y0, n_steps, dt, decimate, p, g, ref_start, ref_vals,
              seg_offsets, seg, mode, samples):
    """Fixed-step RK4 from t=0 over n_steps, storing every `decimate`-th state.

    Returns (status, failing step, rows written). On failure the rows written so
    far are valid.
    """
    y = y0.copy()
    y_next = np.empty_like(y)
    comp = np.zeros_like(y)
    cursor = np.empty(N_DIST, dtype=np.int64)
    for s in range(N_DIST):
        cursor[s] = seg_offsets[s]
    rc = np.zeros(1, dtype=np.int64)
    work, ubuf, d = new_workspace()
    n_rows = 0
    for k in range(n_steps + 1):
        j = advance_refs(k, rc, ref_start)
        r = ref_vals[j]
        if k % decimate == 0 or k == n_steps:
            st = record(samples[n_rows], k, dt, y, r, seg_offsets, seg, cursor, p, g, mode,
                        work, ubuf, d)
            n_rows += 1
            if st != OK:
                return st, k, n_rows
        if k == n_steps:
            break
        st = rk4_step(y, k, dt, r, seg_offsets, seg, cursor, p, g, mode, y_next, work, ubuf, d,
                      comp)
        if st != OK:
            return st, k, n_rows
        y[:] = y_next
    return OK, n_steps, n_rows


@njit(cache=True, error_model="numpy")
def certificate_terms(data, p, g, out):
    """Per stored sample: virtual references and model derivative under the applied input.

    ``out`` rows: ``(z3, z6, z8, z8_dot, xdot[0..11])``; ``z8_dot`` is the exact
    chain-rule derivative of the static z8 expression along the model flow.
    """
    n = data.shape[0]
    for i in range(n):
        row = data[i]
        x = row[COL_X:COL_X + N_STATE]
        alpha = row[COL_ALPHA:COL_ALPHA + N_ALPHA]
        u = row[COL_U:COL_U + 5]
        r = row[COL_REF:COL_REF + N_REFS]
        d = row[COL_D:COL_D + N_DIST]
        xdot = out[i, 4:]
        plant_rhs(x, u, d, p, xdot)
        u1, z3, st = pv_law(x, alpha, r, d, p, g)
        u2, z6, st = battery_law(x, alpha, r, d, p, g)
        z8 = (x[8] - x[6]) * p[INV + R7] + p[C7] * g[K7] * (x[6] - r[X9S])
        out[i, 0] = z3
        out[i, 1] = z6
        out[i, 2] = z8
        out[i, 3] = (xdot[8] - xdot[6]) * p[INV + R7] + p[C7] * g[K7] * xdot[6]
