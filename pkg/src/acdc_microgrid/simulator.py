"""
Fixed-step RK4 simulation of the closed loop.

The integrated vector has 18 entries: the 12 grid states followed by the six
integral states (alpha1, alpha3, alpha4, alpha6, alpha11, alpha12). Control
laws, saturation and anti-windup are evaluated inside every RK4 stage.
Disturbance and reference breakpoints must fall on the step grid, so each
switch coincides with a step boundary.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .controllers import DEFAULT_GAINS, ControllerGains, ControllerState
from .errors import NonFiniteState, ScheduleGap, StageSingularity
from .plant import DEFAULT_PARAMS, GridParams
from .schedules import compile_schedule

DEFAULT_DT = 1e-6

COLUMNS = (("t",)
           + tuple(f"x{i}" for i in range(1, 13))
           + ("alpha1", "alpha3", "alpha4", "alpha6", "alpha11", "alpha12")
           + tuple(f"u{i}" for i in range(1, 6))
           + tuple(f"sat{i}" for i in range(1, 6))
           + ("x1_star", "x4_star", "x9_star", "x11_star", "x12_star")
           + ("V_PV", "V_B", "V_S", "R_L", "v_ld", "v_lq", "omega"))
assert len(COLUMNS) == K.N_COLS

BACKSTEPPING = {"exact": K.BS_EXACT, "simplified": K.BS_SIMPLIFIED}


@dataclass(frozen=True)
class Scenario:
    """Everything needed for one run.

    ``references`` is a list of ``(t_start, ReferenceSet)``; switch times must
    be multiples of ``interval``. ``disturbances`` maps each signal name to a
    list of :class:`~acdc_microgrid.schedules.Segment`. ``initial_state`` has
    12 entries (integral states start at zero) or 18; it is stored as a tuple
    so that scenarios compare by value.
    """

    t_end: float
    references: list
    disturbances: dict
    initial_state: tuple = None
    dt: float = DEFAULT_DT
    decimate: int = 100
    interval: float = 1.0
    params: GridParams = DEFAULT_PARAMS
    gains: ControllerGains = DEFAULT_GAINS
    backstepping: str = "exact"
    name: str = ""
    description: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.initial_state is not None:
            object.__setattr__(self, "initial_state",
                               tuple(float(v) for v in np.ravel(self.initial_state)))
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be >= dt")
        if int(self.decimate) != self.decimate or self.decimate < 1:
            raise ValueError("decimate must be a positive integer")
        if self.backstepping not in BACKSTEPPING:
            raise ValueError(f"backstepping must be one of {sorted(BACKSTEPPING)}")
        for t, _ in self.references:
            n = round(t / self.interval)
            if abs(n * self.interval - t) > 1e-9 * max(1.0, t):
                raise ValueError(f"reference switch at t = {t} is not a multiple of "
                                 f"the interval {self.interval}")

    @property
    def n_steps(self):
        n = round(self.t_end / self.dt)
        if abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise ValueError(f"t_end = {self.t_end} is not a multiple of dt = {self.dt}")
        return n

    def compile(self):
        sched = compile_schedule(self.references, self.disturbances, self.dt)
        bad = [k * self.dt for k in sched.breakpoints if k % self.decimate]
        if bad:
            raise ValueError(f"switch times {bad[:3]} do not fall on the output "
                             f"grid (dt * decimate = {self.dt * self.decimate})")
        return sched

    def replace(self, **changes):
        return replace(self, **changes)

    def initial_vector(self, sched=None):
        """18-vector of initial grid and integral states.

        Defaults to the equilibrium of the first reference block under the
        disturbances at t = 0.
        """
        if self.initial_state is not None:
            y = np.asarray(self.initial_state, dtype=float)
            if y.shape == (12,):
                return np.concatenate([y, np.zeros(6)])
            if y.shape == (18,):
                return y.copy()
            raise ValueError("initial_state must have 12 or 18 entries")
        from .equilibrium import solve_equilibrium
        sched = self.compile() if sched is None else sched
        e = solve_equilibrium(sched.references_at(0), sched.disturbances_at(0), self.params)
        return np.concatenate([e.x_star, e.alpha_star.as_array()])


class Trajectory:
    """Immutable table of samples; one row per stored instant, columns per ``COLUMNS``."""

    def __init__(self, data, dt, decimate=1, complete=True):
        data = np.array(data, dtype=float)
        data.setflags(write=False)
        self.data = data
        self.dt = dt
        self.decimate = decimate
        self.complete = complete

    def __len__(self):
        return self.data.shape[0]

    def column(self, name):
        return self.data[:, COLUMNS.index(name)]

    @property
    def t(self):
        return self.data[:, K.COL_T]

    @property
    def x(self):
        return self.data[:, K.COL_X:K.COL_X + 12]

    @property
    def alpha(self):
        return self.data[:, K.COL_ALPHA:K.COL_ALPHA + 6]

    @property
    def u(self):
        return self.data[:, K.COL_U:K.COL_U + 5]

    @property
    def sat(self):
        return self.data[:, K.COL_SAT:K.COL_SAT + 5].astype(bool)

    @property
    def refs(self):
        return self.data[:, K.COL_REF:K.COL_REF + 5]

    @property
    def dist(self):
        return self.data[:, K.COL_D:K.COL_D + 7]


def _raise_status(status, k, dt, partial=None):
    t = k * dt
    if status == K.NONFINITE:
        exc = NonFiniteState(f"state became non-finite in the step from t = {t:.9g} s")
    else:
        exc = StageSingularity(f"singular control/model denominator near t = {t:.9g} s "
                               f"(code {status})")
    exc.trajectory = partial
    raise exc


def step(s, cs, schedule, p, g, dt=None, k=0, backstepping="exact"):
    """Advance grid state ``s`` and integral state ``cs`` by one RK4 step.

    ``schedule`` is a compiled schedule; the step starts at ``t = k * dt``.
    Returns ``(next_s, next_cs, u)`` where ``u`` is the saturated input applied
    at the start of the step.
    """
    dt = schedule.dt if dt is None else dt
    y = np.concatenate([np.asarray(s, dtype=float), cs.as_array()])
    cursor = schedule.seg_offsets[:-1].copy()
    r = schedule.references_at(k).as_array()
    pa, ga = K.param_vector(p.as_array()), g.as_array()
    mode = BACKSTEPPING[backstepping]
    row = np.empty(K.N_COLS)
    work, ubuf, d = K.new_workspace()
    st = K.record(row, k, dt, y, r, schedule.seg_offsets, schedule.seg, cursor, pa, ga, mode,
                  work, ubuf, d)
    if st != K.OK:
        _raise_status(st, k, dt)
    y_next = np.empty(K.N_AUG)
    st = K.rk4_step(y, k, dt, r, schedule.seg_offsets, schedule.seg, cursor, pa, ga, mode, y_next,
                    work, ubuf, d, np.zeros(K.N_AUG))
    if st != K.OK:
        _raise_status(st, k, dt)
    return y_next[:12], ControllerState.from_array(y_next[12:]), row[K.COL_U:K.COL_U + 5].copy()


def run(sc):
    """Integrate a scenario from t = 0 to ``sc.t_end``.

    Raises
    ------
    ScheduleGap
        A schedule does not start at t = 0 or is empty.
    StageSingularity, NonFiniteState
        The integration failed; the exception's ``trajectory`` attribute holds
        the samples stored before the failure.
    """
    sched = sc.compile()
    y0 = sc.initial_vector(sched)
    n_steps = sc.n_steps
    n_rows = n_steps // sc.decimate + 2
    samples = np.empty((n_rows, K.N_COLS))
    status, k, n = K.integrate(y0, n_steps, sc.dt, int(sc.decimate), K.param_vector(sc.params.as_array()),
                               sc.gains.as_array(), sched.ref_start, sched.ref_vals,
                               sched.seg_offsets, sched.seg, BACKSTEPPING[sc.backstepping],
                               samples)
    if status != K.OK:
        partial = Trajectory(samples[:n], sc.dt, sc.decimate, complete=False)
        _raise_status(status, k, sc.dt, partial)
    return Trajectory(samples[:n], sc.dt, sc.decimate)


def resample(tr, every):
    """Keep every ``every``-th sample; the last sample is always kept."""
    if every < 1:
        raise ValueError("every must be >= 1")
    idx = np.arange(0, len(tr), every)
    if len(tr) and idx[-1] != len(tr) - 1:
        idx = np.append(idx, len(tr) - 1)
    return Trajectory(tr.data[idx], tr.dt, tr.decimate * every, tr.complete)


def constant_scenario(r, d, t_end, **kwargs):
    """Scenario with references and disturbances frozen at ``r`` and ``d``."""
    from .schedules import constant_schedule
    refs, dist = constant_schedule(r, d)
    return Scenario(t_end=t_end, references=refs, disturbances=dist, **kwargs)


__all__ = ["Scenario", "Trajectory", "step", "run", "resample", "COLUMNS",
           "ScheduleGap", "constant_scenario"]
