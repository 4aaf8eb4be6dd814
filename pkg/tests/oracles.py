"""Independent transcriptions used as test oracles.

Written directly from the model equations in scalar Python, sharing no code
with the package kernels.
"""
import math
from dataclasses import fields
from types import SimpleNamespace

import numpy as np
import sympy as sp

from acdc_microgrid.controllers import ControllerGains, ControllerState, ReferenceSet, control
from acdc_microgrid.plant import DEFAULT_PARAMS, Disturbances, GridParams

DIST_NAMES = ("V_PV", "V_B", "V_S", "R_L", "v_ld", "v_lq", "omega")
PARAM_NAMES = tuple(f.name for f in fields(GridParams))
GAIN_NAMES = tuple(f.name for f in fields(ControllerGains))


def model_rows(x, u, d, p):
    """The twelve right-hand sides, one expression per row.

    Works on plain floats, numpy arrays and sympy symbols alike; ``d`` and
    ``p`` only need the attribute names.
    """
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, x12 = x
    u1, u2, u3, u4, u5 = u
    V_PV, V_B, V_S, R_L, v_ld, v_lq, w = (d.V_PV, d.V_B, d.V_S, d.R_L, d.v_ld, d.v_lq, d.omega)
    C1, C2, C4, C5, C7, C9, C10 = p.C1, p.C2, p.C4, p.C5, p.C7, p.C9, p.C10
    L3, L6, L8, L11 = p.L3, p.L6, p.L8, p.L11
    R1, R2, R01, R02, R4, R5, R04 = p.R1, p.R2, p.R01, p.R02, p.R4, p.R5, p.R04
    R7, R08, R10, R11 = p.R7, p.R08, p.R10, p.R11
    return [
        -x1 / (R1 * C1) - x3 / C1 + V_PV / (R1 * C1),
        -x2 / (R2 * C2) + x3 / C2 - u1 * x3 / C2 + x9 / (R2 * C2),
        x1 / L3 - x2 / L3 - R01 * x3 / L3 + x2 * u1 / L3 + (R01 - R02) * x3 * u1 / L3,
        -x4 / (R4 * C4) - x6 / C4 + V_B / (R4 * C4),
        -x5 / (R5 * C5) + x6 / C5 - u2 * x6 / C5 + x9 / (R5 * C5),
        x4 / L6 - x5 / L6 - R04 * x6 / L6 + x5 * u2 / L6,
        -x7 / (R7 * C7) - x8 / C7 + x9 / (R7 * C7),
        V_S * u3 / L8 - R08 * x8 / L8 - x7 / L8,
        ((x2 - x9) / R2 + (x5 - x9) / R5) / C9
        + ((x7 - x9) / R7 + (x10 - x9) / R10 - x9 / R_L) / C9,
        -1.5 / C10 / x10 * (v_ld * x11 + v_lq * x12) + (x9 - x10) / (R10 * C10),
        (-R11 * x11 + w * x12 + 0.5 * x10 * u4 - v_ld) / L11,
        (-R11 * x12 - w * x11 + 0.5 * x10 * u5 - v_lq) / L11,
    ]


def row_magnitudes(x, u, d, p):
    """Sum of absolute values of each row's additive terms (rounding scale)."""
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, x12 = (abs(v) for v in x)
    u1, u2, u3, u4, u5 = (abs(v) for v in u)
    a = abs
    return [
        (x1 + a(d.V_PV)) / (p.R1 * p.C1) + x3 / p.C1,
        (x2 + x9) / (p.R2 * p.C2) + x3 * (1 + u1) / p.C2,
        (x1 + x2 + p.R01 * x3 + x2 * u1 + a(p.R01 - p.R02) * x3 * u1) / p.L3,
        (x4 + a(d.V_B)) / (p.R4 * p.C4) + x6 / p.C4,
        (x5 + x9) / (p.R5 * p.C5) + x6 * (1 + u2) / p.C5,
        (x4 + x5 + p.R04 * x6 + x5 * u2) / p.L6,
        (x7 + x9) / (p.R7 * p.C7) + x8 / p.C7,
        (a(d.V_S) * u3 + p.R08 * x8 + x7) / p.L8,
        ((x2 + x9) / p.R2 + (x5 + x9) / p.R5 + (x7 + x9) / p.R7 + (x10 + x9) / p.R10
         + x9 / d.R_L) / p.C9,
        1.5 * (a(d.v_ld) * x11 + a(d.v_lq) * x12) / (p.C10 * x10) + (x9 + x10) / (p.R10 * p.C10),
        (p.R11 * x11 + a(d.omega) * x12 + 0.5 * x10 * u4 + a(d.v_ld)) / p.L11,
        (p.R11 * x12 + a(d.omega) * x11 + 0.5 * x10 * u5 + a(d.v_lq)) / p.L11,
    ]


def interconnection_V(x, xs, p):
    return (p.C2 * (x[1] - xs[1]) ** 2 + p.C5 * (x[4] - xs[4]) ** 2
            + p.C10 * (x[9] - xs[9]) ** 2 + p.C9 * (x[8] - xs[8]) ** 2) / 2.0


def spike(x9, x9_star):
    return max(abs(a - b) / b for a, b in zip(x9, x9_star))


def hypot(a, b):
    return math.sqrt(a * a + b * b)


class Symbolic:
    """Error coordinates, their time derivative along the model, and the designed matrices."""

    def __init__(self):
        self.x = sp.symbols("x1:13")
        self.a = sp.symbols("a1 a3 a4 a6 a11 a12")
        self.u = sp.symbols("u1:6")
        self.r = sp.symbols("x1s x4s x9s x11s x12s")
        self.d = sp.symbols(" ".join(DIST_NAMES))
        self.p = sp.symbols(" ".join(PARAM_NAMES), positive=True)
        self.g = sp.symbols(" ".join(GAIN_NAMES), positive=True)
        D = SimpleNamespace(**dict(zip(DIST_NAMES, self.d)))
        P = SimpleNamespace(**dict(zip(PARAM_NAMES, self.p)))
        G = SimpleNamespace(**dict(zip(GAIN_NAMES, self.g)))
        x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, x12 = self.x
        a1, a3, a4, a6, a11, a12 = self.a
        x1s, x4s, x9s, x11s, x12s = self.r
        rows = model_rows(self.x, self.u, D, P)

        e1, e4, e11, e12 = x1 - x1s, x4 - x4s, x11 - x11s, x12 - x12s
        # virtual current references of the two cascaded voltage loops
        z3 = (D.V_PV - x1) / P.R1 + P.C1 * (G.K1 * e1 + G.K1b * a1)
        z6 = (D.V_B - x4) / P.R4 + P.C4 * (G.K4 * e4 + G.K4b * a4)
        e3, e6 = x3 - z3, x6 - z6
        rates = [G.K1a * e1, G.K3a * e3, G.K4a * e4, G.K6a * e6, G.K11a * e11, G.K12a * e12]
        self.xi = {"pv": [e1, a1, e3, a3], "battery": [e4, a4, e6, a6],
                   "acdc": [e11, a11, e12, a12]}
        self.A = {
            "pv": sp.Matrix([[-G.K1, -G.K1b, -1 / P.C1, 0], [G.K1a, 0, 0, 0],
                             [0, 0, -(G.K3 - G.K1 + 1 / (P.R1 * P.C1)), -G.K3b],
                             [0, 0, G.K3a, 0]]),
            "battery": sp.Matrix([[-G.K4, -G.K4b, -1 / P.C4, 0], [G.K4a, 0, 0, 0],
                                  [G.K4b * G.K4a * (1 - P.C4), 0,
                                   -(G.K6 - G.K4 + 1 / (P.R4 * P.C4)), -G.K6b],
                                  [0, 0, G.K6a, 0]]),
            "acdc": sp.Matrix([[-G.K11, -G.K11b, 0, 0], [G.K11a, 0, 0, 0],
                               [0, 0, -G.K12, -G.K12b], [0, 0, G.K12a, 0]]),
        }
        self.xi_dot = {}
        self.grad_x = {}
        self.grad_a = {}
        for key, xi in self.xi.items():
            gx = [[sp.diff(c, v) for v in self.x] for c in xi]
            ga = [[sp.diff(c, v) for v in self.a] for c in xi]
            self.grad_x[key], self.grad_a[key] = gx, ga
            self.xi_dot[key] = [sum(gx[i][j] * rows[j] for j in range(12))
                                + sum(ga[i][j] * rates[j] for j in range(6)) for i in range(4)]
        self.rates = rates
        self.args = [self.x, self.a, self.u, self.r, self.d, self.p, self.g]

    def lambdify(self, expr):
        return sp.lambdify(self.args, expr, "numpy")


def random_points(rng, n):
    lo = np.array([450, 950, -60, 550, 950, -60, 950, -40, 950, 950, -5, -5], float)
    hi = np.array([650, 1100, 60, 720, 1100, 60, 1100, 40, 1100, 1100, 5, 5], float)
    x = rng.uniform(lo, hi, (n, 12))
    a = rng.uniform(-5, 5, (n, 6))
    r = np.column_stack([rng.uniform(500, 650, n), rng.uniform(600, 720, n),
                         rng.uniform(950, 1050, n), rng.uniform(-2, 2, n), rng.uniform(-1, 1, n)])
    d = np.column_stack([rng.uniform(520, 700, n), rng.uniform(620, 750, n),
                         rng.uniform(1150, 1400, n), rng.uniform(20, 100, n),
                         rng.uniform(300, 340, n), rng.uniform(0, 20, n),
                         rng.uniform(310, 320, n)])
    return x, a, r, d


def package_raw_inputs(x, a, r, d, g, p=DEFAULT_PARAMS):
    out = np.empty((len(x), 5))
    for i in range(len(x)):
        out[i] = control(x[i], ControllerState.from_array(a[i]), ReferenceSet.from_array(r[i]),
                         Disturbances.from_array(d[i]), p, g)[0]
    return out


def linearization_error(sym, x, a, r, d, u, g, p=DEFAULT_PARAMS):
    """Largest relative deviation of d(xi)/dt from A xi over all subsystems and rows.

    Each row is compared relative to the magnitude of the terms that form it
    (chain-rule terms over the model rows plus the terms of A xi).
    """
    args = (x.T, a.T, u.T, r.T, d.T, p.as_array(), g.as_array())
    D = SimpleNamespace(**dict(zip(DIST_NAMES, d.T)))
    mags = np.array(row_magnitudes(x.T, u.T, D, p))
    rates = np.abs(np.array([np.broadcast_to(v, len(x)) for v in
                             sym.lambdify(sym.rates)(*args)]))
    worst = 0.0
    for key, xi in sym.xi.items():
        dot = sym.lambdify(sym.xi_dot[key])(*args)
        xi_v = sym.lambdify(xi)(*args)
        A = np.array(sym.lambdify(sym.A[key])(*args), dtype=float)
        for i in range(4):
            target = sum(A[i, j] * xi_v[j] for j in range(4))
            gx = sym.lambdify(sym.grad_x[key][i])(*args)
            ga = sym.lambdify(sym.grad_a[key][i])(*args)
            scale = (sum(np.abs(gx[j]) * mags[j] for j in range(12))
                     + sum(np.abs(ga[j]) * rates[j] for j in range(6))
                     + sum(abs(A[i, j]) * np.abs(xi_v[j]) for j in range(4)))
            err = np.abs(np.asarray(dot[i]) - target) / scale
            worst = max(worst, float(np.max(err)))
    return worst
