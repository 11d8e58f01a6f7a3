"""Experiments: the invariant-drift metric, table reproduction, convergence
studies, and CSV emission.

Recorded table values act as expectations: rows produced by the conservative
construction must stay at round-off level (1e-12, or 5e-12 for the long
three-body run), while baseline rows must land within a factor-2 band of the
recorded value. Recorded values that are themselves at round-off level are
checked against the 1e-12 ceiling instead of a band, since their digits are
platform arithmetic, not physics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .scheme import make_scheme
from .solver import SolverConfig, Trajectory, integrate
from .systems import (
    ARENSTORF_PERIOD,
    ARENSTORF_X0,
    dho_exact_solution,
    get_system,
)

MULTIPLIER_TOL = 1e-12
PR3BP_MULTIPLIER_TOL = 5e-12
BASELINE_BAND = 2.0
ROUNDOFF_RECORDED_VALUE = 1e-13  # recorded values below this are round-off, not physics


@dataclass(frozen=True)
class ExperimentConfig:
    system_id: str
    method: str
    tau: float
    steps: int
    params: dict = field(default_factory=dict)
    variant: Optional[str] = None
    sigma: Optional[tuple] = None
    x0: Optional[tuple] = None
    t0: float = 0.0
    solver: SolverConfig = SolverConfig()
    out_path: Optional[str] = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")


@dataclass
class Report:
    config: ExperimentConfig
    invariant_names: tuple
    errors: tuple  # max drift per invariant
    initial_values: tuple
    wall_time: float
    max_iterations: int
    mean_iterations: float
    nonconverged_steps: int
    events: list
    trajectory: Trajectory

    def error_for(self, name):
        return self.errors[self.invariant_names.index(name)]


def conservation_error(trajectory: Trajectory, invariant) -> float:
    """max_k |psi(t^k, x^k) - psi(t^0, x^0)| over k = 1..N."""
    vals0 = (trajectory.t[0],) + tuple(trajectory.x[0])
    ref = ex.evaluate(invariant, vals0)
    worst = 0.0
    for k in range(1, len(trajectory.t)):
        vals = (trajectory.t[k],) + tuple(trajectory.x[k])
        worst = max(worst, abs(ex.evaluate(invariant, vals) - ref))
    return worst


def invariant_series(trajectory: Trajectory, invariant) -> np.ndarray:
    return np.array(
        [
            ex.evaluate(invariant, (trajectory.t[k],) + tuple(trajectory.x[k]))
            for k in range(len(trajectory.t))
        ]
    )


def run_experiment(cfg: ExperimentConfig) -> Report:
    system = get_system(cfg.system_id, **cfg.params)
    scheme = make_scheme(system, cfg.method, variant=cfg.variant, sigma=cfg.sigma)
    x0 = cfg.x0 if cfg.x0 is not None else system.default_x0
    start = time.perf_counter()
    traj = integrate(scheme, x0, t0=cfg.t0, tau=cfg.tau, steps=cfg.steps, cfg=cfg.solver)
    wall = time.perf_counter() - start
    errors = tuple(conservation_error(traj, psi) for psi in system.invariants)
    initial = system.invariant_values(cfg.t0, x0)
    report = Report(
        config=cfg,
        invariant_names=system.invariant_names,
        errors=errors,
        initial_values=initial,
        wall_time=wall,
        max_iterations=int(traj.iters[1:].max()) if traj.steps else 0,
        mean_iterations=float(traj.iters[1:].mean()) if traj.steps else 0.0,
        nonconverged_steps=traj.nonconverged_steps,
        events=list(traj.events),
        trajectory=traj,
    )
    if cfg.out_path:
        write_csv(cfg.out_path, traj, system)
    return report


# ---------------------------------------------------------------------------
# CSV emission (17 significant digits; round-trips bit-exactly)


def write_csv(path, trajectory: Trajectory, system):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_csv(trajectory, system))


def format_csv(trajectory: Trajectory, system) -> str:
    n, m = system.n, system.m
    header = (
        ["k", "t"]
        + [f"x{j}" for j in range(1, n + 1)]
        + [f"psi{i}" for i in range(1, m + 1)]
        + [f"drift{i}" for i in range(1, m + 1)]
        + ["iters"]
    )
    base = system.invariant_values(trajectory.t[0], trajectory.x[0])
    lines = [",".join(header)]
    for k in range(len(trajectory.t)):
        vals = system.invariant_values(trajectory.t[k], trajectory.x[k])
        row = [str(k), _num(trajectory.t[k])]
        row += [_num(v) for v in trajectory.x[k]]
        row += [_num(v) for v in vals]
        row += [_num(v - b) for v, b in zip(vals, base)]
        row.append(str(int(trajectory.iters[k])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _num(v):
    return format(float(v), ".17g")


def parse_csv(text):
    """Return (header, rows as float arrays, iters) from emitted CSV text."""
    lines = [ln for ln in text.strip().split("\n") if ln]
    header = lines[0].split(",")
    rows = []
    iters = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append([float(p) for p in parts[1:-1]])
        iters.append(int(parts[-1]))
    return header, np.array(rows), np.array(iters)


# ---------------------------------------------------------------------------
# the recorded tables


@dataclass(frozen=True)
class TableRow:
    label: str
    method: str
    recorded: tuple  # drift per invariant column from the reference runs
    variant: Optional[str] = None


@dataclass(frozen=True)
class TableSpec:
    table_id: int
    caption: str
    system_id: str
    params: dict
    x0: Optional[tuple]
    tau: float
    steps: int
    abs_tol: float
    rows: tuple
    multiplier_tol: float = MULTIPLIER_TOL


@dataclass
class TableCell:
    value: float
    recorded: float
    passed: bool
    criterion: str


@dataclass
class TableResult:
    spec: TableSpec
    invariant_names: tuple
    rows: list  # (TableRow, [TableCell, ...], Report)

    @property
    def all_passed(self):
        return all(cell.passed for _, cells, _ in self.rows for cell in cells)


TABLES = {
    1: TableSpec(
        table_id=1,
        caption="Invariant drift of E and L for rigid body rotation",
        system_id="rigid-body",
        params={},
        x0=(1.0, 1.0, 1.0),
        tau=0.01,
        steps=1000,
        abs_tol=1e-15,
        rows=(
            TableRow("Backward Euler", "backward-euler", (2.71e-2, 6.18e-2)),
            TableRow("Multiplier (= midpoint)", "multiplier", (3.997e-15, 3.997e-15)),
            TableRow("Trapezoidal", "trapezoidal", (5.09e-6, 8.33e-6)),
        ),
    ),
    2: TableSpec(
        table_id=2,
        caption="Invariant drift of V for the 2-species Lotka-Volterra system",
        system_id="lv2",
        params={},
        x0=(1.0, 2.0),
        tau=0.01,
        steps=1000,
        abs_tol=1e-13,
        rows=(
            TableRow("Backward Euler", "backward-euler", (2.71e-2,)),
            TableRow("Multiplier", "multiplier", (1.11e-14,)),
            TableRow("Midpoint", "midpoint", (7.32e-6,)),
            TableRow("Trapezoidal", "trapezoidal", (1.46e-5,)),
        ),
    ),
    3: TableSpec(
        table_id=3,
        caption="Invariant drift for the 3-species Lotka-Volterra system",
        system_id="lv3",
        params={},
        x0=(1.0, 2.0, 3.0),
        tau=0.01,
        steps=1000,
        abs_tol=1e-15,
        rows=(
            TableRow("Backward Euler", "backward-euler", (1.07e-14, 1.299)),
            TableRow("Multiplier F1", "multiplier", (5.33e-15, 1.42e-14), variant="F1"),
            TableRow("Midpoint", "midpoint", (6.22e-15, 4.17e-5)),
            TableRow("Trapezoidal", "trapezoidal", (7.99e-15, 8.34e-5)),
        ),
    ),
    4: TableSpec(
        table_id=4,
        caption="All six permutation-generated conservative discretizations (LV3)",
        system_id="lv3",
        params={},
        x0=(1.0, 2.0, 3.0),
        tau=0.01,
        steps=1000,
        abs_tol=1e-15,
        rows=tuple(
            TableRow(f"Multiplier {v}", "multiplier", recorded, variant=v)
            for v, recorded in (
                ("F1", (5.33e-15, 1.42e-14)),
                ("F2", (7.11e-15, 1.33e-14)),
                ("F3", (3.55e-15, 1.24e-14)),
                ("F4", (7.11e-15, 1.33e-14)),
                ("F5", (5.33e-15, 1.24e-14)),
                ("F6", (5.33e-15, 1.78e-14)),
            )
        ),
    ),
    5: TableSpec(
        table_id=5,
        caption="Jacobi-integral drift for the planar restricted three-body problem",
        system_id="pr3bp",
        params={},
        x0=ARENSTORF_X0,
        tau=ARENSTORF_PERIOD / 200000,
        steps=200000,
        abs_tol=1e-15,
        multiplier_tol=PR3BP_MULTIPLIER_TOL,
        rows=(
            TableRow("Backward Euler", "backward-euler", (3.22e-2,)),
            TableRow("Multiplier", "multiplier", (8.10e-14,)),
            TableRow("Midpoint", "midpoint", (2.48e-4,)),
            TableRow("Trapezoidal", "trapezoidal", (1.82e-4,)),
        ),
    ),
    6: TableSpec(
        table_id=6,
        caption="Invariant drift for the damped harmonic oscillator",
        system_id="dho",
        params={},
        x0=(1.0, 0.0),
        tau=0.01,
        steps=1000,
        abs_tol=1e-15,
        rows=(
            TableRow("Backward Euler", "backward-euler", (2.92e-1,)),
            TableRow("Multiplier", "multiplier", (5.77e-14,)),
            TableRow("Midpoint", "midpoint", (9.72e-5,)),
            TableRow("Trapezoidal", "trapezoidal", (9.72e-5,)),
        ),
    ),
}


def _judge_cell(value, recorded, is_multiplier, multiplier_tol):
    if is_multiplier:
        return TableCell(value, recorded, value <= multiplier_tol, f"<= {multiplier_tol:.0e}")
    if recorded <= ROUNDOFF_RECORDED_VALUE:
        return TableCell(value, recorded, value <= MULTIPLIER_TOL, f"<= {MULTIPLIER_TOL:.0e} (round-off cell)")
    lo, hi = recorded / BASELINE_BAND, recorded * BASELINE_BAND
    return TableCell(value, recorded, lo <= value <= hi, f"within 2x of {recorded:.3g}")


def reproduce_table(table_id, rows=None) -> TableResult:
    """Run a recorded table's configurations and judge each cell.

    `rows` optionally restricts to a subset of row labels.
    """
    if table_id not in TABLES:
        raise ValueError(f"unknown table {table_id}; known: {sorted(TABLES)}")
    spec = TABLES[table_id]
    system = get_system(spec.system_id, **spec.params)
    out = []
    for row in spec.rows:
        if rows is not None and row.label not in rows:
            continue
        cfg = ExperimentConfig(
            system_id=spec.system_id,
            method=row.method,
            tau=spec.tau,
            steps=spec.steps,
            params=spec.params,
            variant=row.variant,
            x0=spec.x0,
            solver=SolverConfig(abs_tol=spec.abs_tol),
        )
        report = run_experiment(cfg)
        is_mult = row.method.startswith("multiplier")
        cells = [
            _judge_cell(value, recorded, is_mult, spec.multiplier_tol)
            for value, recorded in zip(report.errors, row.recorded)
        ]
        out.append((row, cells, report))
    return TableResult(spec=spec, invariant_names=system.invariant_names, rows=out)


def format_table(result: TableResult) -> str:
    spec = result.spec
    names = result.invariant_names
    lines = [f"Table {spec.table_id}: {spec.caption}", ""]
    header = f"{'method':<28}" + "".join(f"{'Error[' + n + ']':>16}" for n in names)
    header += f"{'recorded':>20}{'status':>10}"
    lines.append(header)
    lines.append("-" * len(header))
    for row, cells, report in result.rows:
        vals = "".join(f"{c.value:>16.3e}" for c in cells)
        recorded = "/".join(f"{c.recorded:.3g}" for c in cells)
        status = "pass" if all(c.passed for c in cells) else "FAIL"
        lines.append(f"{row.label:<28}{vals}{recorded:>20}{status:>10}")
    lines.append("")
    lines.append(
        f"config: tau={spec.tau!r}, steps={spec.steps}, x0={spec.x0}, "
        f"solver tol={spec.abs_tol:g}"
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# convergence study


DEFAULT_TAU_LADDER = (1e-2, 5e-3, 2.5e-3, 1.25e-3)


@dataclass
class ConvergenceResult:
    taus: tuple
    errors: tuple  # max-norm final-state error per tau
    slope: float
    component_slopes: tuple


def convergence_study(
    system,
    method,
    tau_list=DEFAULT_TAU_LADDER,
    final_time=1.0,
    x0=None,
    variant=None,
    cfg=None,
) -> ConvergenceResult:
    """Observed order: log-log slope of final-time state error against tau.

    The reference is the exact damped-oscillator solution when available,
    otherwise the same scheme at tau_min/100 under a Newton iteration at
    tolerance 1e-15.
    """
    taus = tuple(sorted(tau_list, reverse=True))
    if len(taus) < 2:
        raise ValueError("need at least two step sizes")
    x0 = tuple(x0 if x0 is not None else system.default_x0)
    cfg = cfg or SolverConfig()
    scheme = make_scheme(system, method, variant=variant)

    if system.id == "dho":
        exact = dho_exact_solution(
            system.params["mass"], system.params["damping"], system.params["stiffness"], *x0
        )
        x_ref = np.array(exact(final_time))
    else:
        tau_ref = taus[-1] / 100
        steps_ref = round(final_time / tau_ref)
        ref_cfg = SolverConfig(method="newton", abs_tol=1e-15)
        traj_ref = integrate(scheme, x0, t0=0.0, tau=final_time / steps_ref, steps=steps_ref, cfg=ref_cfg)
        x_ref = traj_ref.x[-1]

    errs = []
    for tau in taus:
        steps = round(final_time / tau)
        if abs(steps * tau - final_time) > 1e-12 * max(1.0, final_time):
            raise ValueError(f"final time {final_time} is not a multiple of tau {tau}")
        traj = integrate(scheme, x0, t0=0.0, tau=tau, steps=steps, cfg=cfg)
        errs.append(np.abs(traj.x[-1] - x_ref))
    errs = np.array(errs)
    log_t = np.log(np.array(taus))
    max_err = errs.max(axis=1)
    slope = float(np.polyfit(log_t, np.log(max_err), 1)[0])
    comp = tuple(
        float(np.polyfit(log_t, np.log(np.maximum(errs[:, j], 1e-300)), 1)[0])
        for j in range(errs.shape[1])
    )
    return ConvergenceResult(taus=taus, errors=tuple(max_err), slope=slope, component_slopes=comp)


def _pr3bp_circular_x0(system, radius=0.8):
    """Near-circular rotating-frame orbit around the heavy primary; the
    Arenstorf state is unusable here since tau=1e-2 is far outside the
    stability region of its close approach."""
    import math

    alpha, beta = system.params["alpha"], system.params["beta"]
    omega = math.sqrt(beta / radius**3)
    return (-alpha + radius, 0.0, 0.0, (omega - 1.0) * radius)


# convergence-study anchors: benign initial data with bounded motion over T
CONVERGENCE_SETUPS = {
    "rigid-body": {"x0": (1.0, 1.0, 1.0), "final_time": 1.0},
    "lv2": {"x0": (1.0, 2.0), "final_time": 1.0},
    "lv3": {"x0": (1.0, 2.0, 3.0), "final_time": 1.0},
    "pr3bp": {"x0": None, "final_time": 1.0},
    "dho": {"x0": (1.0, 0.0), "final_time": 1.0},
}


def slope_for(system_id, method="multiplier", tau_list=DEFAULT_TAU_LADDER):
    setup = CONVERGENCE_SETUPS[system_id]
    system = get_system(system_id)
    x0 = setup["x0"]
    if system_id == "pr3bp" and x0 is None:
        x0 = _pr3bp_circular_x0(system)
    return convergence_study(
        system, method, tau_list=tau_list, final_time=setup["final_time"], x0=x0
    )
