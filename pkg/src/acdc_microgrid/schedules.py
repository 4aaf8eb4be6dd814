"""
Piecewise time signals for disturbances and piecewise-constant reference streams.

A signal is a list of segments, each starting at ``t_start`` and lasting until
the next one begins. Inside a segment, with ``tau = t - t_start``::

    value(t) = value + slope * tau + amplitude * sin(2 pi frequency tau + phase)

``constant`` and ``ramp`` are special cases; ``step`` switches from ``value``
to ``after`` at ``t_step`` and is expanded into two constant pieces.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .controllers import ReferenceSet
from .errors import ScheduleGap
from .plant import Disturbances

SIGNALS = ("V_PV", "V_B", "V_S", "R_L", "v_ld", "v_lq", "omega")
KINDS = ("constant", "step", "ramp", "sine")


@dataclass(frozen=True)
class Segment:
    t_start: float
    kind: str = "constant"
    value: float = 0.0
    slope: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    t_step: float = 0.0
    after: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")

    def pieces(self):
        """Equivalent (t_start, c0, c1, amplitude, frequency, phase) rows."""
        if self.kind == "step":
            return [(self.t_start, self.value, 0.0, 0.0, 0.0, 0.0),
                    (self.t_step, self.after, 0.0, 0.0, 0.0, 0.0)]
        if self.kind == "constant":
            return [(self.t_start, self.value, 0.0, 0.0, 0.0, 0.0)]
        if self.kind == "ramp":
            return [(self.t_start, self.value, self.slope, 0.0, 0.0, 0.0)]
        return [(self.t_start, self.value, self.slope, self.amplitude,
                 self.frequency, self.phase)]

    def breakpoints(self):
        return [row[0] for row in self.pieces()]


def constant(value, t_start=0.0):
    return Segment(t_start, "constant", value=value)


def _pieces(segments):
    rows = [row for seg in segments for row in seg.pieces()]
    return sorted(rows, key=lambda row: row[0])


def evaluate(segments, t):
    """Value of a piecewise signal at time ``t`` (right-continuous at breakpoints)."""
    rows = _pieces(segments)
    if not rows or rows[0][0] > t:
        raise ScheduleGap(f"signal undefined at t = {t}")
    active = rows[0]
    for row in rows:
        if row[0] <= t:
            active = row
    t0, c0, c1, amp, freq, ph = active
    tau = t - t0
    return c0 + c1 * tau + amp * math.sin(2.0 * math.pi * freq * tau + ph)


def _index(t, dt, what):
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"{what} at t = {t} is not a multiple of dt = {dt}")
    return k


@dataclass(frozen=True)
class CompiledSchedule:
    """Kernel-ready arrays; breakpoints are expressed as step indices."""

    dt: float
    ref_start: np.ndarray
    ref_vals: np.ndarray
    seg_offsets: np.ndarray
    seg: np.ndarray

    def disturbances_at(self, k, t=None):
        t = k * self.dt if t is None else t
        cursor = self.seg_offsets[:-1].copy()
        d = np.empty(K.N_DIST)
        K.eval_signals(k, t, cursor, self.seg_offsets, self.seg, self.dt, d)
        return Disturbances.from_array(d)

    def references_at(self, k):
        j = int(np.searchsorted(self.ref_start, k, side="right")) - 1
        return ReferenceSet.from_array(self.ref_vals[j])

    @property
    def breakpoints(self):
        ks = set(self.ref_start.tolist()) | set(self.seg[:, 0].astype(np.int64).tolist())
        return sorted(ks)


def compile_schedule(references, disturbances, dt):
    """Turn a reference list and disturbance segment lists into kernel arrays.

    Parameters
    ----------
    references : list of (t_start, ReferenceSet)
    disturbances : dict
        Signal name -> list of :class:`Segment`.
    dt : float
        Integration step; every breakpoint must be a multiple of it.
    """
    if not references:
        raise ScheduleGap("reference schedule is empty")
    refs = sorted(references, key=lambda tr: tr[0])
    if refs[0][0] != 0.0:
        raise ScheduleGap(f"reference schedule starts at t = {refs[0][0]}, not 0")
    starts = [_index(t, dt, "reference switch") for t, _ in refs]
    if len(set(starts)) != len(starts):
        raise ValueError("duplicate reference switch times")
    ref_vals = np.array([r.as_array() for _, r in refs])

    offsets = [0]
    rows = []
    for name in SIGNALS:
        segs = disturbances.get(name)
        if not segs:
            raise ScheduleGap(f"no segments for disturbance {name}")
        pieces = _pieces(segs)
        if pieces[0][0] != 0.0:
            raise ScheduleGap(f"disturbance {name} starts at t = {pieces[0][0]}, not 0")
        for t0, *coef in pieces:
            rows.append([float(_index(t0, dt, f"{name} breakpoint")), *coef])
        offsets.append(len(rows))
    return CompiledSchedule(dt, np.array(starts, dtype=np.int64), ref_vals,
                            np.array(offsets, dtype=np.int64), np.array(rows, dtype=float))


def constant_schedule(r, d):
    """Schedule holding references and disturbances fixed from t = 0."""
    refs = [(0.0, r)]
    dist = {name: [constant(getattr(d, name))] for name in SIGNALS}
    return refs, dist
