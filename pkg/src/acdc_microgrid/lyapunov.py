"""
Lyapunov certificates of the closed loop, evaluated along trajectories.

The composite function is the sum of five non-negative pieces:

- ``V_13``, ``V_46``, ``V_1112``: quadratic forms ``xi' P xi`` of the
  feedback-linearised error subsystems, with ``P`` solving
  ``A' P + P A = -I`` for the designed error matrix ``A``;
- ``V_78``: the backstepping function of the supercapacitor loop;
- ``V_25910``: stored energy of the grid-side capacitors measured from the
  operating point.

The monitor differentiates the stored composite function by central
differences and reports where it increases, and checks the closed-form
derivative of ``V_78`` against the chain-rule value computed from the model.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from . import _kernels as K
from .controllers import DEFAULT_GAINS, error_dynamics
from .equilibrium import steady_voltages
from .errors import LyapunovSolveFailure
from .plant import DEFAULT_PARAMS

PIECES = ("V_13", "V_46", "V_1112", "V_78", "V_25910")
BALANCE_RTOL = 1e-6     # relative bus-current mismatch below which references count as consistent


def lyapunov_matrix(A):
    """Solution ``P`` of ``A' P + P A = -I``.

    Raises
    ------
    LyapunovSolveFailure
        ``A`` is not Hurwitz, or the solve produced a non-symmetric /
        non-positive-definite / non-finite result.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    eig = np.linalg.eigvals(A)
    if not np.all(eig.real < 0):
        raise LyapunovSolveFailure(f"matrix is not Hurwitz (max Re(eig) = {eig.real.max():.6g})")
    P = solve_continuous_lyapunov(A.T, -np.eye(A.shape[0]))
    P = 0.5 * (P + P.T)
    if not np.all(np.isfinite(P)) or np.linalg.eigvalsh(P).min() <= 0:
        raise LyapunovSolveFailure("Lyapunov solution is not positive definite")
    return P


def subsystem_matrices(g, p=DEFAULT_PARAMS):
    """``P`` matrices for the PV, battery and inverter error subsystems."""
    A = error_dynamics(g, p)
    return {key: lyapunov_matrix(A[key]) for key in ("pv", "battery", "acdc")}


def eval_interconnection_V(s, e, p=DEFAULT_PARAMS):
    """Capacitor energy of x2, x5, x10 and x9 measured from the operating point ``e``."""
    dx = np.asarray(s, dtype=float) - e.x_star
    return 0.5 * (p.C2 * dx[1] ** 2 + p.C5 * dx[4] ** 2 + p.C10 * dx[9] ** 2 + p.C9 * dx[8] ** 2)


def eval_V78(s, z7, z8):
    """``((x7 - z7)^2 + (x8 - z8)^2) / 2``."""
    return 0.5 * ((s[6] - z7) ** 2 + (s[7] - z8) ** 2)


def _error_vectors(x, alpha, refs, z3, z6):
    # columns as in controllers.error_dynamics
    pv = np.stack([x[..., 0] - refs[..., 0], alpha[..., 0], x[..., 2] - z3, alpha[..., 1]], -1)
    bat = np.stack([x[..., 3] - refs[..., 1], alpha[..., 2], x[..., 5] - z6, alpha[..., 3]], -1)
    ac = np.stack([x[..., 10] - refs[..., 3], alpha[..., 4], x[..., 11] - refs[..., 4],
                   alpha[..., 5]], -1)
    return pv, bat, ac


def _quad(P, xi):
    return np.einsum("...i,ij,...j->...", xi, P, xi)


def eval_error_subsystem_V(s, cs, e, g=DEFAULT_GAINS, p=DEFAULT_PARAMS):
    """``(V_13, V_46, V_1112)`` for grid state ``s`` and integral state ``cs``.

    The current errors are taken against the virtual references the
    controllers build from ``e``'s references and disturbances.

    Raises
    ------
    LyapunovSolveFailure
        A designed error matrix is not Hurwitz.
    """
    from .controllers import _arrays
    Ps = subsystem_matrices(g, p)
    x, alpha, r, d, pa, ga = _arrays(s, cs, e.references, e.disturbances, p, g)
    _, z3, _ = K.pv_law(x, alpha, r, d, pa, ga)
    _, z6, _ = K.battery_law(x, alpha, r, d, pa, ga)
    pv, bat, ac = _error_vectors(x, alpha, r, z3, z6)
    return (float(_quad(Ps["pv"], pv)), float(_quad(Ps["battery"], bat)),
            float(_quad(Ps["acdc"], ac)))


def vdot78(s, u, r, d, p=DEFAULT_PARAMS, g=DEFAULT_GAINS):
    """Chain-rule derivative of ``V_78`` along the model flow under input ``u``.

    Returns ``(vdot, target)`` where ``target = -K7 e7^2 - K8 e8^2``.
    """
    from .plant import derivative
    s = np.asarray(s, dtype=float)
    f = derivative(s, u, d, p)
    z7 = r.x9_star
    z8 = (s[8] - s[6]) / p.R7 + p.C7 * g.K7 * (s[6] - z7)
    z8_dot = (f[8] - f[6]) / p.R7 + p.C7 * g.K7 * f[6]
    e7, e8 = s[6] - z7, s[7] - z8
    return e7 * f[6] + e8 * (f[7] - z8_dot), -g.K7 * e7 ** 2 - g.K8 * e8 ** 2


@dataclass(frozen=True)
class CertificateSample:
    t: float
    V_13: float
    V_46: float
    V_1112: float
    V_78: float
    V_25910: float
    V_total: float
    Vdot_78: float
    Vdot_25910: float
    Vdot_total: float


@dataclass(frozen=True)
class Certificates:
    """Column arrays of :class:`CertificateSample` fields over a trajectory."""

    t: np.ndarray
    V_13: np.ndarray
    V_46: np.ndarray
    V_1112: np.ndarray
    V_78: np.ndarray
    V_25910: np.ndarray
    V_total: np.ndarray
    Vdot_78: np.ndarray
    Vdot_25910: np.ndarray
    Vdot_total: np.ndarray

    def __len__(self):
        return len(self.t)

    def sample(self, i):
        return CertificateSample(*(float(getattr(self, f)[i])
                                   for f in CertificateSample.__dataclass_fields__))


@dataclass(frozen=True)
class MonitorReport:
    """Outcome of :func:`monitor`.

    Sample classes for the decrease check (interior samples only):

    - *checked*: no channel saturated and the references and disturbances
      are constant across the difference stencil;
    - *saturated*: some channel saturated at a stencil sample; the decrease
      claim covers unconstrained flow only, so increases here are reported
      separately;
    - *varying*: unsaturated, but references or disturbances change across
      the stencil;
    - *unbalanced*: unsaturated with constant references and disturbances,
      but the references do not close the bus power balance, so the
      operating point the certificate is centred on is not an equilibrium.
    """

    certificates: Certificates
    tolerance: float
    violations: np.ndarray
    checked: np.ndarray
    saturated: np.ndarray
    varying: np.ndarray
    unbalanced: np.ndarray
    eq28_error: np.ndarray
    eq28_mask: np.ndarray
    terminal_distance: float
    lasalle_target: np.ndarray

    @staticmethod
    def _fraction(viol, mask):
        n = int(mask.sum())
        return float((viol & mask).sum()) / n if n else 0.0

    @property
    def violation_fraction(self):
        return self._fraction(self.violations, self.checked)

    @property
    def saturated_violation_fraction(self):
        return self._fraction(self.violations, self.saturated)

    @property
    def varying_violation_fraction(self):
        return self._fraction(self.violations, self.varying)

    @property
    def unbalanced_violation_fraction(self):
        return self._fraction(self.violations, self.unbalanced)

    @property
    def unconstrained_violation_fraction(self):
        """Violations among all unsaturated samples with constant references and disturbances."""
        return self._fraction(self.violations, self.checked | self.unbalanced)

    @property
    def eq28_max_error(self):
        """Largest scaled deviation of the V_78 derivative from its closed form (unsaturated u3)."""
        err = self.eq28_error[self.eq28_mask]
        return float(err.max()) if err.size else 0.0

    def to_dict(self):
        return {
            "samples": len(self.certificates),
            "tolerance": self.tolerance,
            "checked_samples": int(self.checked.sum()),
            "violation_fraction": self.violation_fraction,
            "saturated_samples": int(self.saturated.sum()),
            "saturated_violation_fraction": self.saturated_violation_fraction,
            "varying_samples": int(self.varying.sum()),
            "varying_violation_fraction": self.varying_violation_fraction,
            "unbalanced_samples": int(self.unbalanced.sum()),
            "unbalanced_violation_fraction": self.unbalanced_violation_fraction,
            "eq28_samples": int(self.eq28_mask.sum()),
            "eq28_max_error": self.eq28_max_error,
            "terminal_distance": self.terminal_distance,
            "max_V_total": float(np.max(self.certificates.V_total)) if len(self.certificates) else 0.0,
            "final_V_total": float(self.certificates.V_total[-1]) if len(self.certificates) else 0.0,
        }


def _operating_points(refs, dist, p):
    x1s, x4s, x9s, x11s, x12s = refs.T
    V_PV, V_B = dist[:, K.V_PV], dist[:, K.V_B]
    x3s = (V_PV - x1s) / p.R1
    x6s = (V_B - x4s) / p.R4
    p_dq = dist[:, K.V_LD] * x11s + dist[:, K.V_LQ] * x12s
    x2s, x5s, x10s = steady_voltages(x1s, x3s, x4s, x6s, x9s, p_dq, p)
    return x2s, x5s, x10s, x9s


def _eq28_scale(x, xdot, d, u, p, g):
    # magnitude of the terms summed when forming e7*x7_dot + e8*(x8_dot - z8_dot);
    # sets the floor below which the comparison is pure rounding
    a = np.abs
    s7 = (a(x[:, 8]) + a(x[:, 6])) / (p.R7 * p.C7) + a(x[:, 7]) / p.C7
    s8 = (a(d[:, K.V_S] * u[:, 2]) + p.R08 * a(x[:, 7]) + a(x[:, 6])) / p.L8
    s9 = ((a(x[:, 1]) + a(x[:, 8])) / p.R2 + (a(x[:, 4]) + a(x[:, 8])) / p.R5
          + (a(x[:, 6]) + a(x[:, 8])) / p.R7 + (a(x[:, 9]) + a(x[:, 8])) / p.R10
          + a(x[:, 8]) / d[:, K.R_L]) / p.C9
    z8 = (a(x[:, 8]) + a(x[:, 6])) / p.R7 + p.C7 * g.K7 * a(x[:, 6])
    return s7, s8 + (s9 + s7) / p.R7 + p.C7 * g.K7 * s7, z8


def certificates(trajectory, e=None, p=DEFAULT_PARAMS, g=DEFAULT_GAINS):
    """Evaluate every Lyapunov piece at every stored sample.

    Returns ``(Certificates, extras)``; ``extras`` carries intermediate
    arrays used by :func:`monitor`.
    """
    data = np.ascontiguousarray(trajectory.data)
    n = data.shape[0]
    x = data[:, K.COL_X:K.COL_X + 12]
    alpha = data[:, K.COL_ALPHA:K.COL_ALPHA + 6]
    u = data[:, K.COL_U:K.COL_U + 5]
    refs = data[:, K.COL_REF:K.COL_REF + 5]
    dist = data[:, K.COL_D:K.COL_D + 7]
    aux = np.empty((n, 16))
    K.certificate_terms(data, K.param_vector(p.as_array()), g.as_array(), aux)
    z3, z6, z8, z8_dot = aux[:, 0], aux[:, 1], aux[:, 2], aux[:, 3]
    xdot = aux[:, 4:]

    if e is None:
        x2s, x5s, x10s, x9s = _operating_points(refs, dist, p)
    else:
        xs = e.x_star
        x2s, x5s, x10s, x9s = (np.full(n, xs[i]) for i in (1, 4, 9, 8))

    Ps = subsystem_matrices(g, p)
    pv, bat, ac = _error_vectors(x, alpha, refs, z3, z6)
    V13, V46, V1112 = _quad(Ps["pv"], pv), _quad(Ps["battery"], bat), _quad(Ps["acdc"], ac)

    e7 = x[:, 6] - refs[:, 2]
    e8 = x[:, 7] - z8
    V78 = 0.5 * (e7 ** 2 + e8 ** 2)
    d2, d5, d10, d9 = x[:, 1] - x2s, x[:, 4] - x5s, x[:, 9] - x10s, x[:, 8] - x9s
    V25910 = 0.5 * (p.C2 * d2 ** 2 + p.C5 * d5 ** 2 + p.C10 * d10 ** 2 + p.C9 * d9 ** 2)
    Vtot = V13 + V46 + V1112 + V78 + V25910

    Vdot78 = e7 * xdot[:, 6] + e8 * (xdot[:, 7] - z8_dot)
    Vdot25910 = (p.C2 * d2 * xdot[:, 1] + p.C5 * d5 * xdot[:, 4] + p.C10 * d10 * xdot[:, 9]
                 + p.C9 * d9 * xdot[:, 8])
    h = trajectory.dt * trajectory.decimate
    t = data[:, K.COL_T]
    if n >= 2:
        Vdot = np.gradient(Vtot, t)
    else:
        Vdot = np.zeros(n)

    cert = Certificates(t.copy(), V13, V46, V1112, V78, V25910, Vtot, Vdot78, Vdot25910, Vdot)
    s7, s8, _ = _eq28_scale(x, xdot, dist, u, p, g)
    # bus current the operating point leaves uncovered (zero for consistent references)
    load = x9s / dist[:, K.R_L]
    mismatch = load - ((x2s - x9s) / p.R2 + (x5s - x9s) / p.R5 + (x10s - x9s) / p.R10)
    extras = {"e7": e7, "e8": e8, "scale28": np.abs(e7) * s7 + np.abs(e8) * s8, "h": h,
              "lasalle": np.stack([x2s, x5s, x10s, x9s], -1),
              "balanced": np.abs(mismatch) <= BALANCE_RTOL * np.abs(load)}
    return cert, extras


def monitor(trajectory, e=None, p=DEFAULT_PARAMS, g=DEFAULT_GAINS, tol=1e-4, rtol28=1e-6, vfloor=1e-9):
    """Check the decrease claims along a stored trajectory.

    Parameters
    ----------
    trajectory : Trajectory
    e : Equilibrium, optional
        Fixed operating point for the interconnection term. By default the
        operating point is recomputed at each sample from the active
        references and disturbances.
    tol : float
        A sample violates the decrease claim when the central-difference rate
        ``(V[k+1] - V[k-1]) / (t[k+1] - t[k-1])`` exceeds ``tol * max(V_total)``
        (per second). Comparing rates rather than increments keeps the
        verdict independent of the sampling interval.
    vfloor : float
        Lower bound on the ``max(V_total)`` scale. A trajectory resting at an
        operating point carries a composite function at rounding level
        (around 1e-19), whose sample-to-sample noise would otherwise count as
        increases.
    rtol28 : float
        Relative tolerance of the closed-form ``V_78`` derivative check. The
        comparison is floored at the rounding level of the chain-rule sum.

    Returns
    -------
    MonitorReport
        The headline ``violation_fraction`` covers the samples where the
        decrease claim applies: unsaturated, constant references and
        disturbances, and references that close the power balance.
    """
    cert, ex = certificates(trajectory, e, p, g)
    data = trajectory.data
    n = len(cert)
    V = cert.V_total
    vmax = float(np.max(np.abs(V))) if n else 0.0
    band = tol * max(vmax, vfloor)

    sat = data[:, K.COL_SAT:K.COL_SAT + 5] != 0.0
    sat_any = sat.any(axis=1)
    # signals that move the operating point or drive the closed loop; V_S is
    # divided out by the supercapacitor law and does not enter the certificate
    drive = np.concatenate([data[:, K.COL_REF:K.COL_REF + 5],
                            np.delete(data[:, K.COL_D:K.COL_D + 7], K.V_S, axis=1)], axis=1)

    interior = np.zeros(n, dtype=bool)
    violations = np.zeros(n, dtype=bool)
    stencil_sat = np.zeros(n, dtype=bool)
    stencil_var = np.zeros(n, dtype=bool)
    if n >= 3:
        interior[1:-1] = True
        violations[1:-1] = cert.Vdot_total[1:-1] > band
        stencil_sat[1:-1] = sat_any[:-2] | sat_any[1:-1] | sat_any[2:]
        stencil_var[1:-1] = (np.any(drive[2:] != drive[1:-1], axis=1)
                             | np.any(drive[1:-1] != drive[:-2], axis=1))
    saturated = interior & stencil_sat
    varying = interior & ~stencil_sat & stencil_var
    steady = interior & ~stencil_sat & ~stencil_var
    unbalanced = steady & ~ex["balanced"]
    checked = steady & ex["balanced"]

    target = -g.K7 * ex["e7"] ** 2 - g.K8 * ex["e8"] ** 2
    eps = np.finfo(float).eps
    denom = np.abs(target) + ex["scale28"] * eps / rtol28
    with np.errstate(invalid="ignore", divide="ignore"):
        err28 = np.where(denom > 0, np.abs(cert.Vdot_78 - target) / np.where(denom > 0, denom, 1.0),
                         0.0)
    mask28 = ~sat[:, 2]

    target_pt = ex["lasalle"][-1] if n else np.zeros(4)
    if n:
        x = data[-1, K.COL_X:K.COL_X + 12]
        dist = float(np.linalg.norm(x[[1, 4, 9, 8]] - target_pt))
    else:
        dist = 0.0
    return MonitorReport(cert, band, violations, checked, saturated, varying, unbalanced,
                         err28, mask28, dist, target_pt)


def lasalle_distance(trajectory, p=DEFAULT_PARAMS):
    """Distance of (x2, x5, x10, x9) to its operating point at every sample."""
    data = trajectory.data
    refs = data[:, K.COL_REF:K.COL_REF + 5]
    dist = data[:, K.COL_D:K.COL_D + 7]
    target = np.stack(_operating_points(refs, dist, p), -1)
    x = data[:, K.COL_X:K.COL_X + 12][:, [1, 4, 9, 8]]
    return np.linalg.norm(x - target, axis=1)
