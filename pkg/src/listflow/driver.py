"""Experiment drivers behind the command line: run, check, converge, rescale."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig, parse_config
from .dynamics import Outcome, evolve
from .geometry import bianchi_residual, curvature, masses
from .monitors import MARGIN_NAMES, audit, compute_constants, hessian_profile, y_profile, zeta_profile
from .singularity import BlowUpTracker, HistoryEntry, rescale, sensitivity, track_blowup
from .state import FlowState, reconstruct_u, validate_asymptotics

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MINIMAL_SPHERE = 10
EXIT_NON_FINITE = 11
EXIT_CFL = 12
EXIT_MONITOR = 13

EXIT_CODES = {
    "completed": EXIT_OK,
    Outcome.MINIMAL_SPHERE.value: EXIT_MINIMAL_SPHERE,
    Outcome.NON_FINITE.value: EXIT_NON_FINITE,
    Outcome.CFL_COLLAPSE.value: EXIT_CFL,
    "monitor_violation": EXIT_MONITOR,
}

FMT = "%.16e"  # 17 significant digits

SNAPSHOT_COLUMNS = (
    "r", "f", "z", "u", "lambda1", "lambda2", "R", "S", "riem_norm_sq",
    "H", "mu_BY", "mu_MS", "zeta", "zprime", "y",
)
SERIES_COLUMNS = (
    "t", "dt", "sup_riem", "min_f", "max_f", "sup_z", "min_S", "min_lambda2",
    "min_H_off_origin", "max_zeta",
) + MARGIN_NAMES + ("adm_estimate",)
HISTORY_COLUMNS = ("step", "t", "sup_riem", "r_argmax")


def write_table(path: Path, columns: Sequence[str], rows) -> None:
    a = np.asarray(rows, dtype=float)
    if a.ndim == 1:
        a = a.reshape(0 if a.size == 0 else 1, len(columns))
    np.savetxt(path, a, fmt=FMT, delimiter=",", header=",".join(columns), comments="")


def read_table(path: Path) -> tuple[list, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    a = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, a


def snapshot_table(state: FlowState, params) -> np.ndarray:
    curv = curvature(state, params)
    mass = masses(state, params, strict=False)
    return np.column_stack([
        state.grid.nodes, state.f, state.z, reconstruct_u(state),
        curv.lambda1, curv.lambda2, curv.R, curv.S, curv.riem_norm_sq,
        mass.H, mass.mu_BY, mass.mu_MS,
        zeta_profile(state), hessian_profile(state), y_profile(state),
    ])


class _FatalViolation(Exception):
    pass


@dataclass
class RunResult:
    reason: str
    exit_code: int
    final: FlowState
    records: list
    steps: int
    history: list
    tracker: Optional[BlowUpTracker] = None
    output_dir: Optional[Path] = None
    wall_seconds: float = 0.0

    @property
    def violations(self) -> list:
        return [(r.t, v) for r in self.records for v in r.violations]


def run(cfg: RunConfig, write: bool = True, audit_states: bool = True) -> RunResult:
    """Evolve with monitors, snapshots and blow-up tracking.

    Outputs go to ``cfg.output_dir``: ``time_series.csv``, ``history.csv``,
    ``snapshots/snap_XXXXX.csv``, ``candidates/state_XXXXXXXX.csv``,
    ``config.ini`` and ``summary.txt``.
    """
    params = cfg.params
    state = cfg.initial_state()
    consts = compute_constants(state, params)
    tracker = BlowUpTracker(params, cfg.blowup_C, cfg.blowup_keep)
    tracker.record(state)
    records, rows, snaps = [], [], []
    last_dt = [0.0]

    def on_step(st, dt):
        last_dt[0] = dt
        tracker.record(st)

    def on_output(st):
        if audit_states:
            rec = audit(st, consts, params, tol=cfg.tol)
            records.append(rec)
            rows.append([st.t, last_dt[0], rec.sup_riem, rec.min_f, rec.max_f, rec.sup_z, rec.min_S,
                         rec.min_lambda2, rec.min_H_off_origin, rec.max_zeta]
                        + [rec.margins[k] for k in MARGIN_NAMES] + [rec.adm_estimate])
        if write and cfg.snapshots:
            snaps.append(snapshot_table(st, params))
        if cfg.fatal_violations and records and records[-1].violations:
            raise _FatalViolation(st)

    try:
        traj = evolve(state, params, callbacks=[on_output], step_callbacks=[on_step])
        reason, final, steps, wall = traj.reason, traj.state, traj.steps, traj.wall_seconds
    except _FatalViolation as e:
        reason, final = "monitor_violation", e.args[0]
        steps, wall = len(tracker.history) - 1, math.nan
    res = RunResult(reason, EXIT_CODES.get(reason, 1), final, records, steps, tracker.history, tracker,
                    cfg.output_dir if write else None, wall)
    if write:
        _write_run(cfg, res, rows, snaps, consts)
    return res


def _write_run(cfg: RunConfig, res: RunResult, rows, snaps, consts) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.source_text)
    write_table(out / "time_series.csv", SERIES_COLUMNS, rows)
    write_table(out / "history.csv", HISTORY_COLUMNS,
                [[h.step, h.t, h.sup_riem, h.r_argmax] for h in res.history])
    if snaps:
        sd = out / "snapshots"
        sd.mkdir(exist_ok=True)
        for k, tab in enumerate(snaps):
            write_table(sd / f"snap_{k:05d}.csv", SNAPSHOT_COLUMNS, tab)
    cd = out / "candidates"
    cd.mkdir(exist_ok=True)
    for step, st in res.tracker.states.items():
        write_table(cd / f"state_{step:08d}.csv", ("t", "r", "f", "z"),
                    np.column_stack([np.full_like(st.f, st.t), st.grid.nodes, st.f, st.z]))
    lines = [f"termination = {res.reason}", f"exit_code = {res.exit_code}", f"steps = {res.steps}",
             f"t_final = {res.final.t:.16e}"]
    lines += [f"{k} = {v!r}" for k, v in consts.as_dict().items()]
    viol = sorted({v for _, v in res.violations})
    lines.append("violations = " + (",".join(viol) if viol else "none"))
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


@dataclass
class CheckReport:
    constants: dict
    asymptotics: object
    ok: bool

    def text(self) -> str:
        out = ["bound constants:"]
        out += [f"  {k:28s} {v!r}" for k, v in self.constants.items()]
        out.append("decay fits over r > R_max/2:")
        for fit in self.asymptotics.fits:
            e = "-" if fit.exponent is None else f"{fit.exponent:.3f}"
            out.append(f"  {fit.quantity:16s} exponent {e:>8s}  need <= {fit.required:+.1f}  {fit.status}")
        out.append("check: " + ("ok" if self.ok else "FAILED"))
        return "\n".join(out)


def check(cfg: RunConfig) -> CheckReport:
    state = cfg.initial_state()
    consts = compute_constants(state, cfg.params)
    rep = validate_asymptotics(state, cfg.params)
    return CheckReport(consts.as_dict(), rep, rep.ok)


@dataclass
class LevelErrors:
    N: int
    err_f: float
    err_z: float
    bianchi: float


@dataclass
class ConvergenceReport:
    levels: list
    errors: list  # LevelErrors for each adjacent pair (coarse level N)
    orders: dict = field(default_factory=dict)  # name -> list of orders
    band: tuple = (1.8, 2.2)

    def status(self, name: str) -> list:
        out = []
        for o in self.orders[name]:
            if o is None:
                out.append("exact")
            elif self.band[0] <= o <= self.band[1]:
                out.append("ok")
            else:
                out.append("pre-asymptotic")
        return out

    @property
    def ok(self) -> bool:
        return all(s in ("ok", "exact") for k in self.orders for s in self.status(k))

    def text(self) -> str:
        out = ["levels: " + " ".join(str(n) for n in self.levels)]
        out.append(f"{'N':>8s} {'|f_N - f_2N|':>14s} {'|z_N - z_2N|':>14s} {'bianchi_N':>14s}")
        for e in self.errors:
            out.append(f"{e.N:8d} {e.err_f:14.6e} {e.err_z:14.6e} {e.bianchi:14.6e}")
        for k in self.orders:
            parts = ["exact" if o is None else f"{o:.4f}" for o in self.orders[k]]
            out.append(f"order {k:8s} " + " ".join(parts) + "  [" + ", ".join(self.status(k)) + "]")
        return "\n".join(out)


def _evolve_level(args):
    cfg, N = args
    st = cfg.initial_state(cfg.grid(N))
    traj = evolve(st, cfg.params)
    if traj.reason != "completed":
        raise RuntimeError(f"level N={N} ended with {traj.reason}")
    return traj.state


def _order(a: float, b: float) -> Optional[float]:
    if a == 0 and b == 0:
        return None
    if a == 0 or b == 0:
        return math.inf
    return math.log2(a / b)


def converge(cfg: RunConfig, levels: Sequence[int], jobs: int = 1, states: Optional[list] = None) -> ConvergenceReport:
    """Richardson study on nested grids; each level must double the previous."""
    levels = [int(n) for n in levels]
    if len(levels) < 3:
        raise ValueError("need at least 3 levels")
    for a, b in zip(levels, levels[1:]):
        if b != 2 * a:
            raise ValueError(f"levels must double: {a} -> {b}")
    if states is None:
        work = [(cfg, N) for N in levels]
        if jobs > 1:
            with ProcessPoolExecutor(jobs) as ex:
                states = list(ex.map(_evolve_level, work))
        else:
            states = [_evolve_level(w) for w in work]
    bian = [float(np.max(np.abs(bianchi_residual(s)))) for s in states]
    errs = []
    for j in range(len(levels) - 1):
        c, fne = states[j], states[j + 1]
        errs.append(LevelErrors(
            levels[j],
            float(np.max(np.abs(c.f - fne.f[::2]))),
            float(np.max(np.abs(c.z - fne.z[::2]))),
            bian[j],
        ))
    orders = {
        "f": [_order(a.err_f, b.err_f) for a, b in zip(errs, errs[1:])],
        "z": [_order(a.err_z, b.err_z) for a, b in zip(errs, errs[1:])],
        "bianchi": [_order(a, b) for a, b in zip(bian, bian[1:])],
    }
    return ConvergenceReport(levels, errs, orders)


def load_history(run_dir: Path) -> list:
    p = Path(run_dir) / "history.csv"
    if not p.exists():
        raise FileNotFoundError(f"no history.csv in {run_dir}")
    _, a = read_table(p)
    return [HistoryEntry(int(row[0]), float(row[1]), float(row[2]), float(row[3])) for row in a]


def rescale_run(run_dir: Path, C: float) -> str:
    """Blow-up scan of a finished run; writes ``blowup/`` and returns the report."""
    run_dir = Path(run_dir)
    history = load_history(run_dir)
    if not C >= 1:
        raise ValueError(f"C must be >= 1, got {C}")
    cfg = parse_config((run_dir / "config.ini").read_text(), env={})
    summary = run_dir / "summary.txt"
    term = "unknown"
    if summary.exists():
        for line in summary.read_text().splitlines():
            if line.startswith("termination"):
                term = line.split("=", 1)[1].strip()
    rec = track_blowup(history, C, term)
    out = run_dir / "blowup"
    out.mkdir(exist_ok=True)
    lines = [f"C_used = {C!r}", f"termination = {term}", f"candidates = {len(rec.sequence)}"]
    lines += [f"sensitivity C={k:g}: {v}" for k, v in sensitivity(history).items()]
    if rec.empty:
        lines.append("no blow-up candidates")
    consts = None
    grid = cfg.grid()
    for step, (t, r, B) in zip(rec.steps, rec.sequence):
        p = run_dir / "candidates" / f"state_{step:08d}.csv"
        line = f"k step={step} t={t:.16e} r={r:.16e} B={B:.16e}"
        if p.exists():
            _, a = read_table(p)
            st = FlowState(float(a[0, 0]), a[:, 2].copy(), a[:, 3].copy(), grid)
            if consts is None:
                try:
                    consts = compute_constants(cfg.initial_state(grid), cfg.params)
                except (OSError, ValueError):
                    consts = False  # initial data unreadable from here
            prof = rescale(st, B, cfg.params, consts.C_lambda2_minus if consts else None)
            write_table(out / f"profile_{step:08d}.csv",
                        ("r_tilde", "f", "lambda1", "lambda2", "riem", "u"), prof.table())
            line += f" max_riem={float(np.max(prof.riem)):.6f}"
            if prof.lambda2_floor is not None:
                line += f" lambda2_floor={prof.lambda2_floor:.6e}"
        else:
            line += " profile=unavailable"
        lines.append(line)
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    return text
