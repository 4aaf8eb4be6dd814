"""
Command-line front end: run scenario files, summarize trajectory CSVs and
print steady states.

::

    acdc-microgrid run <scenario.yaml> --out <dir> [--dt S] [--decimate N]
    acdc-microgrid summarize <trajectory.csv> [--scenario <scenario.yaml>] [--json]
    acdc-microgrid equilibrium <scenario.yaml> [--at T]

Exit status: 0 success, 1 input error, 2 runtime failure.

Trajectory CSV layout (one header line, then one row per stored sample; all
values written with 17 significant digits)::

    t, x1..x12, alpha1, alpha3, alpha4, alpha6, alpha11, alpha12, u1..u5, sat1..sat5,
    x1_star, x4_star, x9_star, x11_star, x12_star, V_PV, V_B, V_S, R_L, v_ld, v_lq, omega

``u1..u5`` are the applied (saturated) inputs, ``sat1..sat5`` are 0/1
saturation flags, and the trailing twelve columns record the active
references and disturbances so that a CSV can be summarized on its own.
"""
import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .controllers import DEFAULT_GAINS, ReferenceSet
from .equilibrium import check_power_balance, solve_equilibrium
from .errors import (InfeasibleInput, MalformedCsv, MicrogridError, NoEquilibrium,
                     NonFiniteState, ScenarioError, StageSingularity)
from .lyapunov import monitor
from .plant import DEFAULT_PARAMS, Disturbances
from .scenario_file import parse_scenario
from .simulator import COLUMNS, Trajectory, run

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2
STEADY_WINDOW = 0.2     # s, final part of each reference interval treated as steady
TRACKED = ("x1", "x4", "x9", "x11", "x12")


# --- CSV ---------------------------------------------------------------------

def write_csv(tr, path):
    """Write a trajectory with a header row; values use 17 significant digits (lossless)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        np.savetxt(fh, tr.data, fmt="%.17g", delimiter=",")


def read_csv(path):
    """Load a trajectory CSV written by :func:`write_csv`.

    Raises
    ------
    MalformedCsv
        Missing file, wrong header, ragged or non-numeric rows, or time not
        strictly increasing.
    """
    try:
        with open(path, encoding="ascii") as fh:
            header = fh.readline().strip()
            body = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise MalformedCsv(f"{path}: cannot read ({exc})") from None
    names = [h.strip() for h in header.split(",")] if header else []
    if tuple(names) != COLUMNS:
        raise MalformedCsv(f"{path}: header does not match the documented layout "
                           f"({len(names)} columns, expected {len(COLUMNS)})")
    rows = [ln for ln in body.splitlines() if ln.strip()]
    if not rows:
        raise MalformedCsv(f"{path}: no data rows")
    data = np.empty((len(rows), len(COLUMNS)))
    for i, ln in enumerate(rows):
        parts = ln.split(",")
        if len(parts) != len(COLUMNS):
            raise MalformedCsv(f"{path}: line {i + 2} has {len(parts)} fields, "
                               f"expected {len(COLUMNS)}")
        try:
            data[i] = [float(v) for v in parts]
        except ValueError:
            raise MalformedCsv(f"{path}: line {i + 2} has a non-numeric field") from None
    t = data[:, K.COL_T]
    if len(t) > 1 and not np.all(np.diff(t) > 0):
        raise MalformedCsv(f"{path}: time column is not strictly increasing")
    h = float(t[1] - t[0]) if len(t) > 1 else 1.0
    return Trajectory(data, dt=h, decimate=1)


# --- summary -----------------------------------------------------------------

@dataclass
class IntervalSummary:
    t_start: float
    t_end: float
    references: dict
    steady_error: dict          # value - reference at the last sample of the interval
    max_bus_deviation_steady: float   # max |x9 - x9*| over the final STEADY_WINDOW
    balance_residual: float     # A the supercapacitor must supply at the interval's targets
    mean_x8: float
    p_ac: float                 # W, mean over the final STEADY_WINDOW
    q_ac: float                 # var


@dataclass
class SummaryReport:
    t_end: float
    samples: int
    spike: float                # max |x9 - x9*| / x9* over the run
    spike_time: float
    saturation_duty: dict
    lyapunov_violation_fraction: float
    intervals: list = field(default_factory=list)
    lyapunov: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_text(self):
        out = [f"samples: {self.samples}, t_end = {self.t_end:g} s",
               f"bus spike: {100 * self.spike:.4f} % at t = {self.spike_time:g} s",
               "saturation duty: " + ", ".join(f"{k} {100 * v:.3f} %"
                                               for k, v in self.saturation_duty.items()),
               f"Lyapunov decrease violations: {100 * self.lyapunov_violation_fraction:.4f} % "
               "of checked samples", "",
               f"{'interval [s]':>14} {'e_x1 [V]':>11} {'e_x4 [V]':>11} {'e_x9 [V]':>11} "
               f"{'e_x11 [A]':>10} {'e_x12 [A]':>10} {'|dx9| end':>10} {'mismatch':>9} "
               f"{'mean x8':>9} {'P_ac [W]':>10} {'Q_ac':>8}"]
        for iv in self.intervals:
            e = iv.steady_error
            out.append(f"{iv.t_start:6.2f}-{iv.t_end:<7.2f} {e['x1']:11.3e} {e['x4']:11.3e} "
                       f"{e['x9']:11.3e} {e['x11']:10.2e} {e['x12']:10.2e} "
                       f"{iv.max_bus_deviation_steady:10.4f} {iv.balance_residual:9.3f} "
                       f"{iv.mean_x8:9.3f} {iv.p_ac:10.2f} {iv.q_ac:8.2f}")
        return "\n".join(out)


def _blocks(refs):
    # index ranges of consecutive samples sharing the same references
    change = np.flatnonzero(np.any(refs[1:] != refs[:-1], axis=1)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(refs)]])
    return list(zip(starts, ends))


def summarize_trajectory(tr, params=DEFAULT_PARAMS, gains=DEFAULT_GAINS):
    """Compute the :class:`SummaryReport` of an in-memory trajectory.

    The balance residual of an interval is evaluated at its references and
    the disturbances at its first sample.
    """
    t = tr.t
    x = tr.x
    refs = tr.refs
    n = len(t)
    x9s = refs[:, 2]
    dev = np.abs(x[:, 8] - x9s) / x9s
    i_spk = int(np.argmax(dev))
    sat = tr.sat
    duty = {f"u{i + 1}": float(sat[:, i].mean()) for i in range(5)}
    rep = monitor(tr, p=params, g=gains)

    intervals = []
    t_last = float(t[-1])
    for a, b in _blocks(refs):
        t0 = float(t[a])
        t1 = float(t[b]) if b < n else t_last
        last = b - 1
        r = ReferenceSet.from_array(refs[a])
        err = {name: float(x[last, idx] - refs[last, j])
               for j, (name, idx) in enumerate(zip(TRACKED, (0, 3, 8, 10, 11)))}
        win = (t >= t1 - STEADY_WINDOW - 1e-12) & (np.arange(n) >= a) & (np.arange(n) < b)
        if b == n:
            win |= np.arange(n) == n - 1
        d0 = Disturbances.from_array(tr.dist[a])
        try:
            e = solve_equilibrium(r, d0, params)
            bal = float(check_power_balance(e, params, d0))
        except (NoEquilibrium, InfeasibleInput):
            bal = float("nan")
        dist = tr.dist[win]
        xs = x[win]
        p_ac = 1.5 * (dist[:, K.V_LD] * xs[:, 10] + dist[:, K.V_LQ] * xs[:, 11])
        q_ac = 1.5 * (dist[:, K.V_LQ] * xs[:, 10] - dist[:, K.V_LD] * xs[:, 11])
        intervals.append(IntervalSummary(
            t0, t1, {k: v for k, v in zip(("x1_star", "x4_star", "x9_star", "x11_star",
                                           "x12_star"), r.as_array().tolist())},
            err, float(np.max(np.abs(xs[:, 8] - refs[win, 2]))), bal,
            float(np.mean(x[a:b, 7])), float(np.mean(p_ac)), float(np.mean(q_ac))))
    return SummaryReport(t_last, n, float(dev[i_spk]), float(t[i_spk]), duty,
                         rep.violation_fraction, intervals, rep.to_dict())


def summarize(csv_path, params=DEFAULT_PARAMS, gains=DEFAULT_GAINS):
    """Summary of a trajectory CSV. Raises :class:`MalformedCsv` on layout errors."""
    return summarize_trajectory(read_csv(csv_path), params, gains)


# --- commands ----------------------------------------------------------------

def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _write_reports(out_dir, tr, sc):
    summary = summarize_trajectory(tr, sc.params, sc.gains)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary.to_text() + "\n")
    with open(os.path.join(out_dir, "lyapunov.json"), "w", encoding="utf-8") as fh:
        json.dump(summary.lyapunov, fh, indent=2)
    return summary


def run_command(scenario_path, out_dir, dt=None, decimate=None):
    """Run a scenario file and write ``trajectory.csv``, ``summary.{json,txt}``, ``lyapunov.json``.

    Returns the exit status. On a runtime failure the samples stored before
    the failure are still written to ``trajectory.csv``.
    """
    try:
        sc = parse_scenario(scenario_path)
        changes = {}
        if dt is not None:
            changes["dt"] = dt
        if decimate is not None:
            changes["decimate"] = decimate
        if changes:
            sc = sc.replace(**changes)
            sc.n_steps
            sc.compile()
    except ScenarioError as exc:
        for msg in exc.errors:
            _err(f"{scenario_path}: {msg}")
        return EXIT_INPUT
    except (ValueError, MicrogridError) as exc:
        _err(f"{scenario_path}: {exc}")
        return EXIT_INPUT
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        _err(f"cannot create output directory {out_dir}: {exc.strerror}")
        return EXIT_INPUT
    csv_path = os.path.join(out_dir, "trajectory.csv")
    try:
        tr = run(sc)
    except (NoEquilibrium, InfeasibleInput) as exc:
        _err(f"initial state: {exc}")
        return EXIT_INPUT
    except (NonFiniteState, StageSingularity) as exc:
        partial = getattr(exc, "trajectory", None)
        if partial is not None:
            write_csv(partial, csv_path)
        _err(f"{exc}; partial trajectory ({0 if partial is None else len(partial)} samples) "
             f"written to {csv_path}")
        return EXIT_RUNTIME
    write_csv(tr, csv_path)
    summary = _write_reports(out_dir, tr, sc)
    print(summary.to_text())
    return EXIT_OK


def equilibrium_command(scenario_path, at=0.0):
    try:
        sc = parse_scenario(scenario_path)
        sched = sc.compile()
        k = int(round(at / sc.dt))
        r, d = sched.references_at(k), sched.disturbances_at(k)
        e = solve_equilibrium(r, d, sc.params)
    except ScenarioError as exc:
        for msg in exc.errors:
            _err(f"{scenario_path}: {msg}")
        return EXIT_INPUT
    except (ValueError, MicrogridError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    print(f"references at t = {at:g} s: " + ", ".join(
        f"{k} = {v:.10g}" for k, v in zip(("x1*", "x4*", "x9*", "x11*", "x12*"), r.as_array())))
    for i, v in enumerate(e.x_star):
        print(f"  x{i + 1:<3d} = {v:.12g}")
    for i, v in enumerate(e.u_star):
        print(f"  u{i + 1:<3d} = {v:.12g}")
    print(f"  |(u4, u5)| = {np.hypot(e.u_star[3], e.u_star[4]):.12g}")
    print(f"residual: {e.residual:.3e} (relative {e.relative_residual:.3e})")
    print(f"power-balance residual: {check_power_balance(e, sc.params, d):.6e} A")
    return EXIT_OK


def summarize_command(csv_path, scenario_path=None, as_json=False):
    try:
        p, g = DEFAULT_PARAMS, DEFAULT_GAINS
        if scenario_path is not None:
            sc = parse_scenario(scenario_path)
            p, g = sc.params, sc.gains
        rep = summarize(csv_path, p, g)
    except ScenarioError as exc:
        for msg in exc.errors:
            _err(msg)
        return EXIT_INPUT
    except MalformedCsv as exc:
        _err(str(exc))
        return EXIT_INPUT
    print(json.dumps(rep.to_dict(), indent=2) if as_json else rep.to_text())
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (status 1), not runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="acdc-microgrid",
                 description="Closed-loop simulation of an AC-connected DC microgrid.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="simulate a scenario file")
    r.add_argument("scenario")
    r.add_argument("--out", required=True, help="output directory (created if missing)")
    r.add_argument("--dt", type=float, help="integration step [s]")
    r.add_argument("--decimate", type=int, help="store every n-th step")
    s = sub.add_parser("summarize", help="summarize a trajectory CSV")
    s.add_argument("csv")
    s.add_argument("--scenario", help="take circuit constants and gains from this file")
    s.add_argument("--json", action="store_true", help="print JSON instead of text")
    e = sub.add_parser("equilibrium", help="print the steady state of a scenario")
    e.add_argument("scenario")
    e.add_argument("--at", type=float, default=0.0, help="time whose references to use [s]")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_command(args.scenario, args.out, args.dt, args.decimate)
    if args.command == "summarize":
        return summarize_command(args.csv, args.scenario, args.json)
    return equilibrium_command(args.scenario, args.at)


if __name__ == "__main__":
    sys.exit(main())
