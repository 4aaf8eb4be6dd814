"""
Averaged model of the AC-connected DC microgrid.

State ordering (all SI units)::

    x1  PV-side capacitor voltage          x7  supercapacitor-side capacitor voltage
    x2  PV converter grid-side voltage     x8  supercapacitor inductor current
    x3  PV boost inductor current          x9  DC bus voltage
    x4  battery-side capacitor voltage     x10 inverter DC-link voltage
    x5  battery converter grid-side volt.  x11 inverter d-axis current
    x6  battery inductor current           x12 inverter q-axis current

States are plain ``numpy`` arrays of length 12; the control input is a length 5
array ``(u1, u2, u3, u4, u5)``.
"""
import math
import warnings
from dataclasses import astuple, dataclass, fields, replace

import numpy as np

from . import _kernels as K
from .errors import DomainViolation, SingularDenominator

STATE_NAMES = tuple(f"x{i}" for i in range(1, 13))
INPUT_NAMES = ("u1", "u2", "u3", "u4", "u5")


@dataclass(frozen=True)
class GridParams:
    """Circuit constants. Capacitances in F, inductances in H, resistances in Ohm.

    ``R05`` and ``R07`` are listed with the converter data but enter no row
    of the averaged model; they are carried for completeness only.
    """

    C1: float = 100e-3
    C2: float = 10e-3
    C4: float = 100e-3
    C5: float = 10e-3
    C7: float = 10e-3
    C9: float = 0.1e-3
    C10: float = 680e-6
    L3: float = 33e-3
    L6: float = 33e-3
    L8: float = 3.3e-3
    L11: float = 3.3e-3
    R1: float = 100e-3
    R2: float = 100e-3
    R01: float = 10e-3
    R02: float = 10e-3
    R4: float = 100e-3
    R5: float = 10e-3
    R04: float = 10e-3
    R05: float = 10e-3
    R7: float = 100e-3
    R07: float = 10e-3
    R08: float = 10e-3
    R10: float = 100e-3
    R11: float = 10e-3
    f: float = 50.0

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @property
    def omega(self):
        return 2.0 * math.pi * self.f


DEFAULT_PARAMS = GridParams()
UNUSED_PARAMS = ("R05", "R07")


@dataclass(frozen=True)
class Disturbances:
    """Snapshot of the exogenous inputs at one instant.

    V_PV, V_B, V_S in V; R_L in Ohm; v_ld, v_lq in V (dq grid voltage);
    omega in rad/s.
    """

    V_PV: float
    V_B: float
    V_S: float
    R_L: float
    v_ld: float = 325.0
    v_lq: float = 0.0
    omega: float = 2.0 * math.pi * 50.0

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a))

    def violations(self):
        out = []
        for name in ("V_PV", "V_B", "V_S", "R_L"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0")
        for name in ("v_ld", "v_lq"):
            if not getattr(self, name) >= 0:
                out.append(f"{name} must be >= 0")
        return out

    def replace(self, **changes):
        return replace(self, **changes)


def validate_params(p):
    """Check positivity of every circuit constant.

    Returns an empty list when ``p`` is valid, otherwise one message per
    offending field. The load resistance is a disturbance and is not checked.
    """
    out = []
    for fld in fields(p):
        v = getattr(p, fld.name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            out.append(f"{fld.name} must be > 0")
    return out


def _as_state(s):
    s = np.asarray(s, dtype=float)
    if s.shape != (12,):
        raise ValueError(f"state must have shape (12,), got {s.shape}")
    return s


def derivative(s, u, d, p, domain=None):
    """Open-loop vector field of the averaged model.

    Parameters
    ----------
    s : array_like, shape (12,)
        Grid state.
    u : array_like, shape (5,)
        Duty cycles / modulation indices.
    d : Disturbances
    p : GridParams
    domain : tuple of float, optional
        ``(x9_min, x9_max)``. When given, a :class:`DomainViolation` warning is
        issued if the bus voltage lies outside it.

    Returns
    -------
    ndarray, shape (12,)
        Time derivative of the state.
    """
    s = _as_state(s)
    if s[9] == 0.0:
        raise SingularDenominator("x10 = 0: DC-link row is singular")
    if domain is not None and not domain[0] <= s[8] <= domain[1]:
        warnings.warn(f"x9 = {s[8]:g} V outside [{domain[0]:g}, {domain[1]:g}]",
                      DomainViolation, stacklevel=2)
    out = np.empty(12)
    K.plant_rhs(s, np.asarray(u, dtype=float), d.as_array(), K.param_vector(p.as_array()), out)
    return out


def ac_power(s, d):
    """Active and reactive power delivered to the AC grid, in W and var."""
    x11, x12 = s[10], s[11]
    p_ac = 1.5 * (d.v_ld * x11 + d.v_lq * x12)
    q_ac = 1.5 * (d.v_lq * x11 - d.v_ld * x12)
    return p_ac, q_ac


def bus_port_currents(s, p, d):
    """Currents flowing into the DC bus node from each port, in A.

    Order: PV converter, battery converter, supercapacitor converter,
    inverter DC link, resistive load (always negative for a positive bus).
    Their sum equals ``C9 * dx9/dt``.
    """
    x9 = s[8]
    return np.array([
        (s[1] - x9) / p.R2,
        (s[4] - x9) / p.R5,
        (s[6] - x9) / p.R7,
        (s[9] - x9) / p.R10,
        -x9 / d.R_L,
    ])


def domain_box(d, x9_max=None):
    """Admissible bus-voltage interval: lower edge max(V_PV, V_B), upper edge V_S."""
    lo = max(d.V_PV, d.V_B)
    hi = d.V_S if x9_max is None else min(x9_max, d.V_S)
    return lo, hi
