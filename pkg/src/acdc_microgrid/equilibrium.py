"""
Closed-loop steady state for a frozen set of references and disturbances.

Every steady-state relation of the averaged model reduces to a scalar
quadratic, so the solver is closed form. The grid-side converter voltages are
taken on the physical (larger) root: boost operation for the PV and battery
stages and the near-bus root for the inverter DC link.
"""
import math
from dataclasses import dataclass

import numpy as np

from .controllers import ControllerState, ReferenceSet
from .errors import Infeasible, InfeasibleInput, NoEquilibrium
from .plant import derivative


@dataclass(frozen=True)
class Equilibrium:
    """Steady operating point.

    Attributes
    ----------
    x_star : ndarray, shape (12,)
    u_star : ndarray, shape (5,)
    alpha_star : ControllerState
        Integral states at steady state (all zero: every PI correction vanishes).
    residual : float
        Max-norm of the model vector field at ``(x_star, u_star)``.
    relative_residual : float
        Largest per-row residual divided by the magnitude of that row's terms.
    """

    x_star: np.ndarray
    u_star: np.ndarray
    alpha_star: ControllerState
    residual: float
    relative_residual: float
    references: ReferenceSet
    disturbances: object


def dc_link_voltage(x9, p_dq, R10):
    """Steady inverter DC-link voltage for bus voltage ``x9`` and ``v_ld*x11 + v_lq*x12 = p_dq``.

    Raises NoEquilibrium when the exported power exceeds ``x9**2 / (6 R10)``.
    """
    disc = x9 * x9 - 6.0 * R10 * p_dq
    if disc < 0:
        raise NoEquilibrium(f"inverter DC link: no real steady state (discriminant {disc:.6g})")
    return 0.5 * (x9 + math.sqrt(disc))


def row_scales(s, u, d, p):
    """Magnitude of the additive terms in each row of the model, for relative residuals."""
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, x12 = s
    u1, u2, u3, u4, u5 = u
    w = d.omega
    a = abs
    return np.array([
        (a(d.V_PV) + a(x1)) / (p.R1 * p.C1) + a(x3) / p.C1,
        (a(x9) + a(x2)) / (p.R2 * p.C2) + a((1 - u1) * x3) / p.C2,
        (a(x1) + a(x2) + a(p.R01 * x3) + a(x2 * u1) + a((p.R01 - p.R02) * x3 * u1)) / p.L3,
        (a(d.V_B) + a(x4)) / (p.R4 * p.C4) + a(x6) / p.C4,
        (a(x9) + a(x5)) / (p.R5 * p.C5) + a((1 - u2) * x6) / p.C5,
        (a(x4) + a(x5) + a(p.R04 * x6) + a(x5 * u2)) / p.L6,
        (a(x9) + a(x7)) / (p.R7 * p.C7) + a(x8) / p.C7,
        (a(d.V_S * u3) + a(p.R08 * x8) + a(x7)) / p.L8,
        ((a(x2) + a(x9)) / p.R2 + (a(x5) + a(x9)) / p.R5 + (a(x7) + a(x9)) / p.R7
         + (a(x10) + a(x9)) / p.R10 + a(x9) / d.R_L) / p.C9,
        (1.5 * (a(d.v_ld * x11) + a(d.v_lq * x12)) / a(x10) + (a(x9) + a(x10)) / p.R10) / p.C10,
        (a(p.R11 * x11) + a(w * x12) + a(0.5 * x10 * u4) + a(d.v_ld)) / p.L11,
        (a(p.R11 * x12) + a(w * x11) + a(0.5 * x10 * u5) + a(d.v_lq)) / p.L11,
    ])


def relative_residual(s, u, d, p):
    f = derivative(s, u, d, p)
    scale = np.maximum(row_scales(s, u, d, p), np.finfo(float).tiny)
    return float(np.max(np.abs(f) / scale))


def input_violations(u, tol=0.0):
    out = []
    for i in range(3):
        if not -tol <= u[i] <= 1.0 + tol:
            out.append(f"u{i + 1} = {u[i]:.6g} outside [0, 1]")
    mag = math.hypot(u[3], u[4])
    if mag > 1.0 + tol:
        out.append(f"|(u4, u5)| = {mag:.6g} > 1")
    return out


def steady_voltages(x1, x3, x4, x6, x9, p_dq, p):
    """Steady grid-side voltages (x2*, x5*, x10*) for given port operating points.

    Works element-wise on arrays. ``p_dq`` is ``v_ld*x11 + v_lq*x12``. Entries
    without a real steady state come back as NaN.
    """
    x1, x3, x4, x6, x9, p_dq = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                                     for v in (x1, x3, x4, x6, x9, p_dq)))
    dr = p.R01 - p.R02
    # (x2 - x9)(x2 + dr x3) = R2 x3 (x1 - R02 x3)
    b = dr * x3 - x9
    c = -x9 * dr * x3 - p.R2 * x3 * (x1 - p.R02 * x3)
    with np.errstate(invalid="ignore"):
        x2 = 0.5 * (-b + np.sqrt(b * b - 4.0 * c))
        # x5 (x5 - x9) = R5 x6 (x4 - R04 x6)
        x5 = 0.5 * (x9 + np.sqrt(x9 * x9 + 4.0 * p.R5 * x6 * (x4 - p.R04 * x6)))
        # x10 (x9 - x10) = 1.5 R10 p_dq
        x10 = 0.5 * (x9 + np.sqrt(x9 * x9 - 6.0 * p.R10 * p_dq))
    return x2, x5, x10


def solve_equilibrium(r, d, p, g=None):
    """Steady state of the closed loop for references ``r`` and frozen disturbances ``d``.

    The supercapacitor branch carries no current (x8 = 0, x7 = x9*), so the
    returned point is a true fixed point only when the references satisfy the
    bus power balance; see :func:`check_power_balance`. ``g`` is accepted for
    interface symmetry; the steady state does not depend on the gains.

    Raises
    ------
    NoEquilibrium
        A steady-state quadratic has no real root.
    InfeasibleInput
        A steady-state duty cycle lies outside its bounds.
    """
    x9 = r.x9_star
    x1 = r.x1_star
    x4 = r.x4_star
    x11 = r.x11_star
    x12 = r.x12_star
    x3 = (d.V_PV - x1) / p.R1
    x6 = (d.V_B - x4) / p.R4
    x2, x5, x10 = (float(v) for v in steady_voltages(x1, x3, x4, x6, x9,
                                                     d.v_ld * x11 + d.v_lq * x12, p))
    for name, v in (("PV converter", x2), ("battery converter", x5),
                    ("inverter DC link", x10)):
        if math.isnan(v):
            raise NoEquilibrium(f"{name}: no real steady state")

    # duty cycles from the inductor rows
    u1 = (x2 - x1 + p.R01 * x3) / (x2 + (p.R01 - p.R02) * x3)
    u2 = 1.0 - (x4 - p.R04 * x6) / x5
    u4 = 2.0 * (d.v_ld + p.R11 * x11 - d.omega * x12) / x10
    u5 = 2.0 * (d.v_lq + p.R11 * x12 + d.omega * x11) / x10

    x7, x8 = x9, 0.0
    u3 = x7 / d.V_S

    xs = np.array([x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, x12])
    us = np.array([u1, u2, u3, u4, u5])
    bad = input_violations(us)
    if bad:
        raise InfeasibleInput("; ".join(bad))
    f = derivative(xs, us, d, p)
    return Equilibrium(xs, us, ControllerState(), float(np.max(np.abs(f))),
                       relative_residual(xs, us, d, p), r, d)


def check_power_balance(e, p, d):
    """Bus current mismatch at the equilibrium, in A.

    Load draw minus the current injected by the PV, battery and inverter ports
    when all of them sit on their targets. Zero for consistent references; a
    nonzero value is the current the supercapacitor has to supply.
    """
    x = e.x_star
    x9 = e.references.x9_star
    return x9 / d.R_L - ((x[1] - x9) / p.R2 + (x[4] - x9) / p.R5 + (x[9] - x9) / p.R10)


def _small_root(a, b, c, what):
    # smaller-magnitude root of a z^2 - b z + c = 0, b > 0, written to avoid cancellation
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise Infeasible(f"{what}: requested current not deliverable")
    return 2.0 * c / (b + math.sqrt(disc))


def feasible_reference_hint(d, p, p_ac=0.0, q_ac=0.0, x9_star=1000.0, pv_share=0.5,
                            x1_star=None):
    """References that close the bus power balance for the requested AC export.

    The current needed by the load and the inverter is split between the PV
    and battery ports: ``pv_share`` of it comes from the PV unless ``x1_star``
    pins the PV operating point, in which case the battery covers the rest.

    Raises
    ------
    Infeasible
        The allocation needs a steady input outside its bounds or a
        nonexistent steady state.
    """
    v2 = d.v_ld ** 2 + d.v_lq ** 2
    if v2 == 0.0:
        if p_ac or q_ac:
            raise Infeasible("grid voltage is zero")
        x11 = x12 = 0.0
    else:
        # P = 1.5 (v_ld x11 + v_lq x12), Q = 1.5 (v_lq x11 - v_ld x12)
        x11 = (d.v_ld * p_ac + d.v_lq * q_ac) / (1.5 * v2)
        x12 = (d.v_lq * p_ac - d.v_ld * q_ac) / (1.5 * v2)
    try:
        x10 = dc_link_voltage(x9_star, d.v_ld * x11 + d.v_lq * x12, p.R10)
    except NoEquilibrium as exc:
        raise Infeasible(str(exc)) from None
    i_req = x9_star / d.R_L + (x9_star - x10) / p.R10

    dr = p.R01 - p.R02
    if x1_star is None:
        i_pv = pv_share * i_req
        x2 = x9_star + p.R2 * i_pv
        # i_pv (x2 + dr x3) = x3 (V_PV - (R1 + R02) x3)
        x3 = _small_root(p.R1 + p.R02, d.V_PV - dr * i_pv, i_pv * x2, "PV")
        x1_star = d.V_PV - p.R1 * x3
    else:
        x3 = (d.V_PV - x1_star) / p.R1
        x2 = float(steady_voltages(x1_star, x3, 0.0, 0.0, x9_star, 0.0, p)[0])
        if math.isnan(x2):
            raise Infeasible("PV operating point has no steady state")
        i_pv = (x2 - x9_star) / p.R2
    i_bat = i_req - i_pv
    x5 = x9_star + p.R5 * i_bat
    # x5 i_bat = x6 (V_B - (R4 + R04) x6)
    x6 = _small_root(p.R4 + p.R04, d.V_B, x5 * i_bat, "battery")
    x4_star = d.V_B - p.R4 * x6

    r = ReferenceSet(x1_star, x4_star, x9_star, x11, x12)
    try:
        solve_equilibrium(r, d, p)
    except (NoEquilibrium, InfeasibleInput) as exc:
        raise Infeasible(str(exc)) from None
    return r
