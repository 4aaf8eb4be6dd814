"""
Local controllers: feedback-linearising PI loops for the PV boost (u1), the
battery converter (u2) and the inverter (u4, u5), plus the backstepping loop
of the supercapacitor converter (u3).

Each law returns its *raw* value; :func:`saturate` projects onto the admissible
input set. The integral states are kept in :class:`ControllerState`.
"""
from dataclasses import astuple, dataclass, fields, replace

import numpy as np

from . import _kernels as K
from .errors import SingularDenominator

SATURATION_CHANNELS = ("u1", "u2", "u3", "u4", "u5")


@dataclass(frozen=True)
class ReferenceSet:
    """Setpoints from the supervisory layer (V for voltages, A for currents)."""

    x1_star: float
    x4_star: float
    x9_star: float = 1000.0
    x11_star: float = 0.0
    x12_star: float = 0.0

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class ControllerState:
    """Integral states of the PI loops (all start at zero)."""

    alpha1: float = 0.0
    alpha3: float = 0.0
    alpha4: float = 0.0
    alpha6: float = 0.0
    alpha11: float = 0.0
    alpha12: float = 0.0

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a))


def _pi_pair(p1, p2):
    """(proportional, bar, integral) gains placing a PI loop at poles -p1, -p2.

    The integrator gain is one decade below the proportional one.
    """
    k = p1 + p2
    ka = k / 10.0
    return k, p1 * p2 / ka, ka


@dataclass(frozen=True)
class ControllerGains:
    """Gains of the five loops. Suffix ``b`` is the barred gain, ``a`` the integrator gain.

    Construction fails with ``ValueError`` unless every gain is positive and each
    designed error subsystem is Hurwitz for the default circuit constants; call
    :meth:`check` with other constants.
    """

    K1: float
    K1b: float
    K1a: float
    K3: float
    K3b: float
    K3a: float
    K4: float
    K4b: float
    K4a: float
    K6: float
    K6b: float
    K6a: float
    K7: float
    K8: float
    K11: float
    K11b: float
    K11a: float
    K12: float
    K12b: float
    K12a: float

    def __post_init__(self):
        from .plant import DEFAULT_PARAMS
        self.check(DEFAULT_PARAMS)

    def check(self, p):
        bad = [f.name for f in fields(self) if not getattr(self, f.name) > 0]
        if bad:
            raise ValueError(f"gains must be > 0: {', '.join(bad)}")
        for name, a in error_dynamics(self, p).items():
            eig = np.linalg.eigvals(a)
            if not np.all(eig.real < 0):
                raise ValueError(f"{name} error dynamics not Hurwitz: eigenvalues {eig}")

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    def replace(self, **changes):
        return replace(self, **changes)

    @classmethod
    def design(cls, p=None, voltage_poles=(10.0, 12.0), current_poles=(50.0, 60.0),
               supercap_pole=200.0, battery_current_poles=(400.0, 500.0)):
        """Default gains from pole locations (rad/s, given as positive magnitudes).

        Voltage loops (x1, x4) sit at ``voltage_poles``; current loops (x3,
        x11, x12) at ``current_poles``. The current-loop proportional gains
        absorb the residual ``K1 - 1/(R1 C1)`` term the PV and battery laws
        leave in the current error. The battery law feeds the voltage-loop
        integral forward without the capacitance factor, which couples its
        voltage and current errors; its current loop is therefore placed
        faster (``battery_current_poles``) so that the coupled subsystem keeps
        real, well-separated poles. The supercapacitor pair gets a double pole
        at ``-supercap_pole``.
        """
        from .plant import DEFAULT_PARAMS
        p = DEFAULT_PARAMS if p is None else p
        k1, k1b, k1a = _pi_pair(*voltage_poles)
        k4, k4b, k4a = k1, k1b, k1a
        ki, kib, kia = _pi_pair(*current_poles)
        kb, kbb, kba = _pi_pair(*battery_current_poles)
        k3 = ki + k1 - 1.0 / (p.R1 * p.C1)
        k6 = kb + k4 - 1.0 / (p.R4 * p.C4)
        # (s + K7)(s + K8) + 1/C7^2 = (s + a)^2  with  K7 = a - 1/C7, K8 = a + 1/C7
        k7 = supercap_pole - 1.0 / p.C7
        k8 = supercap_pole + 1.0 / p.C7
        return cls(k1, k1b, k1a, k3, kib, kia,
                   k4, k4b, k4a, k6, kbb, kba,
                   k7, k8,
                   ki, kib, kia, ki, kib, kia)


def error_dynamics(g, p):
    """Designed linear closed-loop matrices of each feedback-linearised subsystem.

    Keys and state orderings:

    - ``"pv"``: (x1 - x1*, alpha1, x3 - z3, alpha3)
    - ``"battery"``: (x4 - x4*, alpha4, x6 - z6, alpha6)
    - ``"acdc"``: (x11 - x11*, alpha11, x12 - x12*, alpha12)
    - ``"supercap"``: (x7 - z7, x8 - z8)
    """
    pv = np.array([
        [-g.K1, -g.K1b, -1.0 / p.C1, 0.0],
        [g.K1a, 0.0, 0.0, 0.0],
        [0.0, 0.0, -(g.K3 - g.K1 + 1.0 / (p.R1 * p.C1)), -g.K3b],
        [0.0, 0.0, g.K3a, 0.0],
    ])
    bat = np.array([
        [-g.K4, -g.K4b, -1.0 / p.C4, 0.0],
        [g.K4a, 0.0, 0.0, 0.0],
        # the battery voltage-loop feedforward lacks the C4 factor its PV
        # counterpart carries, which leaves this e4 coupling in the current error
        [g.K4b * g.K4a * (1.0 - p.C4), 0.0, -(g.K6 - g.K4 + 1.0 / (p.R4 * p.C4)), -g.K6b],
        [0.0, 0.0, g.K6a, 0.0],
    ])
    acdc = np.array([
        [-g.K11, -g.K11b, 0.0, 0.0],
        [g.K11a, 0.0, 0.0, 0.0],
        [0.0, 0.0, -g.K12, -g.K12b],
        [0.0, 0.0, g.K12a, 0.0],
    ])
    sc = np.array([
        [-g.K7, -1.0 / p.C7],
        [1.0 / p.C7, -g.K8],
    ])
    return {"pv": pv, "battery": bat, "acdc": acdc, "supercap": sc}


_SING_MSG = {
    K.SING_PV: "x2 + (R01 - R02) x3 is below tolerance",
    K.SING_BAT: "x5 is below tolerance",
    K.SING_SC: "V_S is below tolerance",
    K.SING_ACDC: "x10 is below tolerance",
    K.SING_X10: "x10 is below tolerance",
}


def _arrays(s, cs, r, d, p, g):
    alpha = cs.as_array() if cs is not None else np.zeros(6)
    return (np.asarray(s, dtype=float), alpha, r.as_array(), d.as_array(),
            K.param_vector(p.as_array()), g.as_array())


def _raise(status):
    raise SingularDenominator(_SING_MSG[status])


def pv_control(s, cs, r, d, p, g):
    """PV boost law. Returns ``(u1_raw, alpha1_dot, alpha3_dot)``."""
    x, alpha, ra, da, pa, ga = _arrays(s, cs, r, d, p, g)
    u1, z3, st = K.pv_law(x, alpha, ra, da, pa, ga)
    if st != K.OK:
        _raise(st)
    return u1, g.K1a * (x[0] - r.x1_star), g.K3a * (x[2] - z3)


def battery_control(s, cs, r, d, p, g):
    """Battery converter law. Returns ``(u2_raw, alpha4_dot, alpha6_dot)``."""
    x, alpha, ra, da, pa, ga = _arrays(s, cs, r, d, p, g)
    u2, z6, st = K.battery_law(x, alpha, ra, da, pa, ga)
    if st != K.OK:
        _raise(st)
    return u2, g.K4a * (x[3] - r.x4_star), g.K6a * (x[5] - z6)


def supercap_reference(s, r, p, g):
    """Virtual current reference z8 for the supercapacitor inductor (A).

    The voltage reference z7 is held at ``r.x9_star``.
    """
    s = np.asarray(s, dtype=float)
    return (s[8] - s[6]) / p.R7 + p.C7 * g.K7 * (s[6] - r.x9_star)


def supercap_control(s, r, d, p, g, x9_dot=None, simplified=False):
    """Backstepping law for the supercapacitor converter. Returns raw ``u3``.

    Parameters
    ----------
    x9_dot : float, optional
        Bus-voltage rate; computed from the bus row of the model if omitted.
    simplified : bool
        Use the simplified form that approximates dz8/dt by assuming x8 = z8 and
        omits the cross-term cancellation. The default is the exact form, which
        makes dV/dt = -K7 e7^2 - K8 e8^2 hold identically.
    """
    x, _, ra, da, pa, ga = _arrays(s, None, r, d, p, g)
    if x9_dot is None:
        if abs(x[9]) < K.SING_TOL:
            _raise(K.SING_ACDC)
        x9_dot = K.bus_rate(x, da, pa)
    mode = K.BS_SIMPLIFIED if simplified else K.BS_EXACT
    u3, _, _, st = K.supercap_terms(x, r.x9_star, da, pa, ga, float(x9_dot), mode)
    if st != K.OK:
        _raise(st)
    return u3


def acdc_control(s, cs, r, d, p, g):
    """Inverter dq current law. Returns ``(u4_raw, u5_raw, alpha11_dot, alpha12_dot)``."""
    x, alpha, ra, da, pa, ga = _arrays(s, cs, r, d, p, g)
    u4, u5, st = K.acdc_law(x, alpha, ra, da, pa, ga)
    if st != K.OK:
        _raise(st)
    return u4, u5, g.K11a * (x[10] - r.x11_star), g.K12a * (x[11] - r.x12_star)


def saturate(u_raw):
    """Project raw controls onto the admissible set.

    u1, u2, u3 are clipped to [0, 1]; (u4, u5) is scaled radially into the unit
    disk. Returns ``(u, flags)`` with a boolean flag per channel (both inverter
    flags are set together).
    """
    u_raw = np.asarray(u_raw, dtype=float)
    u = np.empty(5)
    flags = np.empty(5)
    K.saturate(u_raw, u, flags)
    return u, flags.astype(bool)


def controller_derivatives(s, cs, r, d, p, g):
    """Unfrozen integral rates (alpha1, alpha3, alpha4, alpha6, alpha11, alpha12)."""
    x, alpha, ra, da, pa, ga = _arrays(s, cs, r, d, p, g)
    _, z3, _ = K.pv_law(x, alpha, ra, da, pa, ga)
    _, z6, _ = K.battery_law(x, alpha, ra, da, pa, ga)
    out = np.empty(6)
    K.integral_rates(x, z3, z6, ra, ga, out)
    return out


def control(s, cs, r, d, p, g, simplified=False):
    """All five raw controls plus the integral rates with anti-windup applied.

    Returns ``(u_raw, u, flags, alpha_dot)``.
    """
    x, alpha, ra, da, pa, ga = _arrays(s, cs, r, d, p, g)
    y = np.concatenate([x, alpha])
    dy = np.empty(K.N_AUG)
    u_raw = np.empty(5)
    u = np.empty(5)
    flags = np.empty(5)
    mode = K.BS_SIMPLIFIED if simplified else K.BS_EXACT
    st = K.closed_loop_rhs(y, ra, da, pa, ga, mode, dy, u_raw, u, flags)
    if st != K.OK:
        _raise(st)
    return u_raw, u, flags.astype(bool), dy[12:]


DEFAULT_GAINS = ControllerGains.design()
