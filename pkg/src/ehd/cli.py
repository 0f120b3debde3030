"""Command-line interface.

Subcommands: ``ehd run <config>``, ``ehd besov <ckpt> --s --p --r``,
``ehd audit <dir>``, ``ehd report <json>``.  Exit codes: 0 completed,
1 usage or configuration error, 2 blow-up suspected, 3 invariant violation.
Errors go to standard error with the machine-parsable prefix ``EHD-E<code>:``.
The environment variable EHD_THREADS caps internal FFT parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import criteria as _criteria
from .audit import AuditLedger
from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .config import ConfigError, RunConfig, parse_config
from .initial_conditions import charged_shear, random_smooth, taylor_green
from .littlewood_paley import BesovParams, besov_norm
from .solver import (
    InvariantViolation,
    RunStatus,
    State,
    StepControl,
    cfl_limit,
    derive,
    run,
    validate_initial_state,
)
from .spectral import (
    Grid,
    forward_transform,
    grad_l2_norm_sq,
    l2_norm_sq,
    lp_norm,
    spectral_power,
    vector_forward,
    vector_magnitude,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BLOWUP = 2
EXIT_INVARIANT = 3

REPORT_FORMAT_VERSION = 1

SERIES_COLUMNS = [
    "t",
    "dt",
    "bkm_integrand",
    "bkm_integral",
    "ps_u_p",
    "ps_u_integral",
    "ps_gradu_integral",
    "besov_aniso_integrand",
    "besov_aniso_integral",
]

AUDIT_COLUMNS = [
    "t",
    "charge_identity_residual",
    "velocity_margin",
    "positivity_term",
    "ls_ratio",
    "Y",
    "gn_ratio_L4",
    "gn_ratio_L3",
]

ENERGY_COLUMNS = ["t", "kinetic_energy", "potential_energy"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        raise _UsageError(message)


def _err(code: int, message: str) -> int:
    print(f"EHD-E{code}: {message}", file=sys.stderr)
    return code


def _build_parser() -> _Parser:
    parser = _Parser(prog="ehd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation from a config file")
    p_run.add_argument("config", help="path to the key-value config file")

    p_besov = sub.add_parser("besov", help="Besov norm of a checkpoint field")
    p_besov.add_argument("checkpoint")
    p_besov.add_argument("--s", type=float, required=True, help="regularity index")
    p_besov.add_argument("--p", type=float, required=True, help="Lebesgue exponent (inf ok)")
    p_besov.add_argument("--r", type=float, required=True, help="summation exponent (inf ok)")
    p_besov.add_argument(
        "--field",
        default="umag",
        choices=["umag", "ux", "uy", "uz", "v", "w", "zeta", "eta"],
        help="which stored field to evaluate (default: velocity magnitude)",
    )

    p_audit = sub.add_parser("audit", help="summarize audit/series CSVs from a run directory")
    p_audit.add_argument("directory")
    p_audit.add_argument("--audit-csv", default="audit.csv")
    p_audit.add_argument("--series-csv", default="series.csv")

    p_report = sub.add_parser("report", help="print a run report and emit plot-data CSVs")
    p_report.add_argument("report_json")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _err(EXIT_USAGE, str(exc))

    try:
        if args.command == "run":
            return cmd_run_path(args.config)
        if args.command == "besov":
            return cmd_besov(args.checkpoint, args.s, args.p, args.r, args.field)
        if args.command == "audit":
            return cmd_audit(args.directory, args.audit_csv, args.series_csv)
        return cmd_report(args.report_json)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"EHD-E{EXIT_USAGE}: {v}", file=sys.stderr)
        return EXIT_USAGE
    except (CheckpointError, OSError, ValueError) as exc:
        return _err(EXIT_USAGE, str(exc))
    except InvariantViolation as exc:
        return _err(EXIT_INVARIANT, str(exc))


def _build_initial_state(config: RunConfig) -> State:
    ic = config.initial_condition
    if ic.name == "from_checkpoint":
        return read_checkpoint(ic.params["path"])
    grid = Grid(config.grid_n)
    if ic.name == "taylor_green":
        return taylor_green(grid)
    if ic.name == "charged_shear":
        return charged_shear(grid)
    return random_smooth(
        grid,
        seed=ic.params["seed"],
        energy=ic.params.get("energy", 1.0),
        peak_wavenumber=ic.params.get("peak_wavenumber", 3.0),
    )


class _Orchestra:
    """Single run observer: criteria, audit ledger, CSV writers, checkpoints.

    Also applies the default alarm heuristic: an unset threshold becomes
    10x the accumulated integral once 10% of the horizon has passed (left
    unset if the integral is still exactly zero there).
    """

    def __init__(self, accs, ledger, series_writer, audit_writer, energy_writer,
                 config, out_dir):
        self.accs = accs
        self.ledger = ledger
        self.series_writer = series_writer
        self.audit_writer = audit_writer
        self.energy_writer = energy_writer
        self.config = config
        self.out_dir = out_dir
        self.thresholds_pending = [a for a in accs if a.threshold is None]
        self.series = {
            a.kind.value: {"t": [], "integrand": [], "integral": []} for a in accs
        }

    def __call__(self, state, derived, dt):
        for acc in self.accs:
            _criteria.observe(acc, state, derived, dt)
        if self.thresholds_pending and state.t >= 0.1 * self.config.t_end:
            for acc in self.thresholds_pending:
                if acc.integral > 0.0:
                    acc.threshold = 10.0 * acc.integral
            self.thresholds_pending = []
        record = self.ledger.update(state, derived, dt)
        kinetic = sum(l2_norm_sq(c) for c in derived.u_hat.components)
        potential = grad_l2_norm_sq(derived.psi_hat)
        self.energy_writer.writerow([state.t, kinetic, potential])
        self._write_series_row(state, dt)
        self.audit_writer.writerow(
            [
                record.t,
                record.charge_identity_residual,
                record.velocity_margin,
                record.positivity_term,
                record.ls_ratio,
                record.y,
                record.gn_ratio_l4,
                record.gn_ratio_l3,
            ]
        )
        for acc in self.accs:
            s = self.series[acc.kind.value]
            s["t"].append(state.t)
            s["integrand"].append(acc.last_integrand)
            s["integral"].append(acc.integral)
        if (
            self.config.checkpoint_every > 0
            and dt > 0.0
            and state.step_index % self.config.checkpoint_every == 0
        ):
            write_checkpoint(self.out_dir / f"state_{state.step_index:08d}.ehds", state)

    def _write_series_row(self, state, dt):
        first = {}
        for acc in self.accs:
            first.setdefault(acc.kind.value, acc)
        def get(kind, attr):
            acc = first.get(kind)
            return getattr(acc, attr) if acc is not None else ""
        self.series_writer.writerow(
            [
                state.t,
                dt,
                get("BKM", "last_integrand"),
                get("BKM", "integral"),
                get("PS_u", "p"),
                get("PS_u", "integral"),
                get("PS_grad_u", "integral"),
                get("BESOV_ANISO", "last_integrand"),
                get("BESOV_ANISO", "integral"),
            ]
        )


def _vector_tail_fraction(u_hat) -> float:
    g = u_hat.x.grid
    cap = np.floor(g.n / 3.0)
    outer = (np.abs(g.kx) > cap / 2) | (np.abs(g.ky) > cap / 2) | (np.abs(g.kz) > cap / 2)
    total = 0.0
    tail = 0.0
    for comp in u_hat.components:
        power = spectral_power(comp)
        total += power.sum()
        tail += power[np.broadcast_to(outer, power.shape)].sum()
    return float(tail / total) if total > 0 else 0.0


def cmd_run_path(config_path: str) -> int:
    config = parse_config(Path(config_path).read_text())
    return cmd_run(config)


def cmd_run(config: RunConfig) -> int:
    """Wire solver + criteria + audit observers, run, and write all outputs."""
    t_start = time.monotonic()
    state0 = _build_initial_state(config)
    try:
        validate_initial_state(state0)
    except InvariantViolation as exc:
        return _err(EXIT_INVARIANT, f"initial state rejected: {exc}")

    control = StepControl(
        dt=config.dt, cfl=config.cfl, t_end=config.t_end, dt_min=config.dt_min
    )
    limit = cfl_limit(state0, control.cfl)
    if limit < control.dt_min:
        raise ConfigError(
            [
                f"dt_min={control.dt_min:.3e} exceeds the CFL step limit "
                f"{limit:.3e} at t=0; lower dt_min or the initial speeds"
            ]
        )

    accs = [_criteria.make_accumulator(c.kind, c.p, c.threshold) for c in config.criteria]
    derived0 = derive(state0)
    ledger = AuditLedger.from_state(state0, derived0)

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series_path = out_dir / config.series_csv
    audit_path = out_dir / config.audit_csv
    energy_path = out_dir / config.energy_csv

    with open(series_path, "w", newline="") as f_series, open(
        audit_path, "w", newline=""
    ) as f_audit, open(energy_path, "w", newline="") as f_energy:
        series_writer = csv.writer(f_series)
        series_writer.writerow(SERIES_COLUMNS)
        audit_writer = csv.writer(f_audit)
        audit_writer.writerow(AUDIT_COLUMNS)
        energy_writer = csv.writer(f_energy)
        energy_writer.writerow(ENERGY_COLUMNS)
        orchestra = _Orchestra(
            accs, ledger, series_writer, audit_writer, energy_writer, config, out_dir
        )
        run_report = run(state0, control, hooks=[orchestra])

    final = run_report.final_state
    write_checkpoint(out_dir / config.checkpoint_path, final)

    crit_report = _criteria.report(accs, run_report.status)
    final_derived = derive(final)
    u_hat = final_derived.u_hat
    omega_hat = vector_forward(final_derived.omega)
    linf = {
        "u": {
            "value": lp_norm(vector_magnitude(final.u), math.inf),
            "tail_fraction": _vector_tail_fraction(u_hat),
        },
        "omega": {
            "value": lp_norm(vector_magnitude(final_derived.omega), math.inf),
            "tail_fraction": _vector_tail_fraction(omega_hat),
        },
    }

    wall = time.monotonic() - t_start
    report = {
        "format_version": REPORT_FORMAT_VERSION,
        "status": run_report.status.value,
        "diagnostic": run_report.diagnostic,
        "steps": run_report.steps,
        "t_final": run_report.t_final,
        "state_checksum": run_report.state_checksum,
        "criteria": crit_report.rows,
        "criteria_ranking": crit_report.ranking,
        "criteria_series": orchestra.series,
        "audit": ledger.summary(),
        "linf": linf,
        "config": config.as_dict(),
        "wall_clock": {
            "seconds": wall,
            "steps_per_second": run_report.steps / wall if wall > 0 else 0.0,
        },
    }
    report_path = out_dir / config.report_json
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    _print_run_summary(report, series_path, audit_path, energy_path, report_path)

    if run_report.status is RunStatus.COMPLETED:
        return EXIT_OK
    if run_report.status is RunStatus.BLOW_UP_SUSPECTED:
        return _err(EXIT_BLOWUP, f"blow-up suspected: {run_report.diagnostic}")
    return _err(EXIT_INVARIANT, f"invariant violation: {run_report.diagnostic}")


def _fmt(x, spec=".6g"):
    return format(x, spec) if isinstance(x, (int, float)) else str(x)


def _print_run_summary(report, series_path, audit_path, energy_path, report_path):
    print(f"status: {report['status']}  steps: {report['steps']}  "
          f"t_final: {_fmt(report['t_final'])}")
    for name in ("u", "omega"):
        entry = report["linf"][name]
        print(
            f"max |{name}| = {_fmt(entry['value'])}  "
            f"(spectral tail fraction {_fmt(entry['tail_fraction'], '.3g')})"
        )
    print(f"{'criterion':<12} {'p':>6} {'q':>8} {'integral':>14} "
          f"{'peak integrand':>16} {'crossed at':>11}")
    for row in report["criteria"]:
        crossed = row["crossed_at"] if row["crossed_at"] is not None else "-"
        print(
            f"{row['kind']:<12} {str(row['p']):>6} {str(row['q'])[:8]:>8} "
            f"{_fmt(row['integral']):>14} {_fmt(row['peak_integrand']):>16} "
            f"{str(crossed):>11}"
        )
    audit = report["audit"]
    print(
        "audit: charge-identity residual max "
        f"{_fmt(audit['max_charge_identity_residual'], '.3g')}, "
        f"velocity margin min {_fmt(audit['min_velocity_margin'], '.3g')}, "
        f"min charge {_fmt(audit['min_charge_value'], '.3g')}"
    )
    for flag in audit["flags"]:
        print(f"audit flag: {flag}")
    print(f"wrote {series_path}, {audit_path}, {energy_path}, {report_path}")


def cmd_besov(checkpoint: str, s: float, p: float, r: float, field_name: str = "umag") -> int:
    """Print the Besov norm of one field stored in a checkpoint."""
    state = read_checkpoint(checkpoint)
    fields = {
        "umag": lambda: vector_magnitude(state.u),
        "ux": lambda: state.u.x,
        "uy": lambda: state.u.y,
        "uz": lambda: state.u.z,
        "v": lambda: state.v,
        "w": lambda: state.w,
        "zeta": lambda: derive(state).zeta,
        "eta": lambda: derive(state).eta,
    }
    f = fields[field_name]()
    value = besov_norm(forward_transform(f), BesovParams(s, p, r))
    print(value)
    return EXIT_OK


def cmd_audit(directory: str, audit_csv: str = "audit.csv", series_csv: str = "series.csv") -> int:
    """Summarize the per-step audit (and criteria) series of a finished run."""
    audit_path = Path(directory) / audit_csv
    if not audit_path.exists():
        raise FileNotFoundError(f"no audit CSV at {audit_path}")
    with open(audit_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"audit CSV {audit_path} has no data rows")

    def column(name):
        return [float(r[name]) for r in rows if r[name] not in ("", "nan")]

    residuals = column("charge_identity_residual")
    margins = column("velocity_margin")
    print(f"steps audited: {len(rows)}  t range: [{rows[0]['t']}, {rows[-1]['t']}]")
    print(f"max charge-identity residual: {max(residuals):.6g}")
    print(f"min velocity decay margin:    {min(margins):.6g}")
    print(f"max positivity term:          {max(column('positivity_term')):.6g}")
    print(f"max log-Sobolev ratio:        {max(column('ls_ratio')):.6g}")
    print(f"final Y:                      {column('Y')[-1]:.6g}")

    series_path = Path(directory) / series_csv
    if series_path.exists():
        with open(series_path, newline="") as fh:
            srows = list(csv.DictReader(fh))
        if srows:
            last = srows[-1]
            print(
                "criteria integrals at end: "
                f"BKM={last['bkm_integral'] or 'n/a'}, "
                f"PS_u={last['ps_u_integral'] or 'n/a'}, "
                f"PS_grad_u={last['ps_gradu_integral'] or 'n/a'}, "
                f"BESOV_ANISO={last['besov_aniso_integral'] or 'n/a'}"
            )
    return EXIT_OK


def cmd_report(report_json: str) -> int:
    """Print a stored run report and emit per-criterion (t, integrand, integral) CSVs."""
    path = Path(report_json)
    report = json.loads(path.read_text())
    print(f"run status: {report['status']}  steps: {report['steps']}  "
          f"t_final: {report['t_final']}")
    print(f"state checksum: {report['state_checksum']}")
    print(f"{'criterion':<12} {'p':>6} {'q':>8} {'integral':>14} "
          f"{'peak integrand':>16} {'crossed at':>11}")
    for row in report["criteria"]:
        crossed = row["crossed_at"] if row["crossed_at"] is not None else "-"
        print(
            f"{row['kind']:<12} {str(row['p']):>6} {str(row['q'])[:8]:>8} "
            f"{row['integral']:>14.6g} {row['peak_integrand']:>16.6g} {str(crossed):>11}"
        )
    if report.get("criteria_ranking"):
        print("ranking (earliest alarm first): " + ", ".join(report["criteria_ranking"]))
    audit = report["audit"]
    print(
        "audit extremes: residual "
        f"{audit['max_charge_identity_residual']}, margin "
        f"{audit['min_velocity_margin']}, min charge {audit['min_charge_value']}"
    )

    for kind, series in report.get("criteria_series", {}).items():
        out = path.with_name(f"{path.stem}_criterion_{kind.lower()}.csv")
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "integrand", "integral"])
            for t, a, b in zip(series["t"], series["integrand"], series["integral"]):
                writer.writerow([t, a, b])
        print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
