"""Command-line front end: ``nslasalle check|simulate|report SCENARIO``.

Exit status: 0 when every requested check passes, 1 when a check fails,
2 on a model or runtime error (unreadable or invalid scenario, integrator
abort, evaluation error).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .certify import Certificate, check_corollary1, check_corollary2
from .expr import EvaluationError
from .field import key_to_pattern
from .scenario import MODES, Scenario, ScenarioError, bundled, load_scenario
from .simulate import (ConvergenceReport, InclusionReport, IntegratorError, Trajectory,
                       barbalat_report, inclusion_check, integrate)

log = logging.getLogger("nslasalle")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR = 0, 1, 2
INCLUSION_THRESHOLD = 0.99
RUN_MODES = MODES + ("both",)  # "both": the two certificates without simulation diagnostics


@dataclass
class RunReport:
    certificates: dict[str, Certificate] = field(default_factory=dict)
    trajectory: Trajectory | None = None
    convergence: ConvergenceReport | None = None
    inclusion: InclusionReport | None = None
    checks: dict[str, bool] = field(default_factory=dict)
    files: dict[str, Path] = field(default_factory=dict)
    error: str | None = None

    @property
    def exit_status(self) -> int:
        if self.error is not None:
            return EXIT_ERROR
        return EXIT_OK if all(self.checks.values()) else EXIT_CHECK_FAILED


def _fmt(value) -> str:
    return format(float(value) + 0.0, ".17g")


# --------------------------------------------------------------------------
# Writers
# --------------------------------------------------------------------------

def trajectory_rows(scenario: Scenario, traj: Trajectory, conv: ConvergenceReport | None = None):
    """Header and rows of the trajectory CSV: t, x1..xn, region, sliding, V, W, intW."""
    n = traj.dimension
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + ["region", "sliding", "V", "W", "intW"]
    if conv is None:
        conv = _convergence(scenario, traj, allow_short=True)
    sliding = traj.any_sliding()
    rows = []
    for k in range(len(traj)):
        region = key_to_pattern(traj.regions[k]) or "*"
        rows.append([_fmt(traj.times[k])] + [_fmt(v) for v in traj.states[k]]
                    + [region, "1" if sliding[k] else "0",
                       _fmt(conv.V[k]), _fmt(conv.W[k]), _fmt(conv.integral_W[k])])
    return header, rows


def write_trajectory_csv(path: Path, scenario: Scenario, traj: Trajectory,
                         conv: ConvergenceReport | None = None) -> None:
    header, rows = trajectory_rows(scenario, traj, conv)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_plot_data(path: Path, conv: ConvergenceReport) -> None:
    with open(path, "w") as fh:
        fh.write("# t V W\n")
        for t, v, w in zip(conv.times, conv.V, conv.W):
            fh.write(f"{_fmt(t)} {_fmt(v)} {_fmt(w)}\n")


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _fmt(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_value(x) for x in v) + "]"
    return str(v)


def certificate_text(cert: Certificate, scenario_name: str = "") -> str:
    lines = [f"certificate {cert.kind} {{"]
    if scenario_name:
        lines.append(f"  scenario = {scenario_name}")
    lines += [f"  verdict = {'pass' if cert.passed else 'fail'}",
              f"  r = {_value(cert.r)}", f"  c = {_value(cert.c)}",
              f"  sphere_min = {_value(cert.sphere_min)}",
              f"  sphere_argmin = {_value(cert.sphere_argmin)}"]
    lines.append("  samples {")
    lines += [f"    {k} = {_value(v)}" for k, v in cert.samples.items()]
    lines.append("  }")
    lines.append("  tolerances {")
    lines += [f"    {k} = {_value(v)}" for k, v in cert.tolerances.items()]
    lines.append("  }")
    for h in cert.hypotheses:
        lines.append(f"  hypothesis {h.name} {{")
        lines.append(f"    passed = {_value(h.passed)}")
        lines.append(f"    worst_margin = {_value(h.worst_margin)}")
        if h.witness:
            lines.append("    witness {")
            lines += [f"      {k} = {_value(v)}" for k, v in h.witness.items()]
            lines.append("    }")
        if h.detail:
            lines.append(f"    detail = {h.detail}")
        lines.append("  }")
    for note in cert.notes:
        lines.append(f"  note = {note}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def simulation_text(report: RunReport) -> str:
    conv, inc = report.convergence, report.inclusion
    lines = ["simulation {"]
    traj = report.trajectory
    lines.append(f"  samples = {len(traj)}")
    for e in traj.events:
        lines.append(f"  event = {e.kind} surface={e.surface} t={_fmt(e.t)}")
    for a in traj.annotations:
        lines.append(f"  annotation = {a}")
    if inc is not None:
        lines += [f"  inclusion_compliance = {_fmt(inc.compliance)}",
                  f"  inclusion_worst_distance = {_fmt(inc.worst_distance)}"]
    if conv is not None:
        lines += [f"  V_monotone = {_value(conv.monotone)}",
                  f"  V_max_increase = {_fmt(conv.max_increase)}",
                  f"  integral_W = {_fmt(conv.integral_W[-1])}",
                  f"  integral_bounded = {_value(conv.integral_bounded)}",
                  f"  tail_sup_W = {_fmt(conv.tail_sup_W)}",
                  f"  W_converged = {_value(conv.converged)}",
                  f"  state_tail_sup = {_fmt(conv.state_tail_sup)}"]
        lines += [f"  note = {n}" for n in conv.notes]
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Orchestration
# --------------------------------------------------------------------------

def _convergence(scenario: Scenario, traj: Trajectory, allow_short=False) -> ConvergenceReport:
    try:
        return barbalat_report(traj, scenario.V, scenario.triple.W, scenario.tail_fraction,
                               scenario.convergence_tol, parameters=scenario.parameters)
    except ValueError:
        if not allow_short:
            raise
        return barbalat_report(traj, scenario.V, scenario.triple.W, 0.999,
                               scenario.convergence_tol, parameters=scenario.parameters)


def simulate_scenario(scenario: Scenario) -> Trajectory:
    return integrate(scenario.field, scenario.x0, scenario.t0, scenario.tf, scenario.integrator)


def run(scenario: Scenario, mode: str | None = None, outdir=None) -> RunReport:
    """Execute the requested pipeline and write its files into ``outdir``.

    ``mode`` is ``check1``, ``check2``, ``both`` (the two certificates),
    ``simulate`` or ``all``; it defaults to the scenario's own mode.
    """
    mode = mode or scenario.mode
    if mode not in RUN_MODES:
        raise ValueError(f"mode must be one of {RUN_MODES}")
    report = RunReport()
    outdir = Path(outdir) if outdir is not None else None
    try:
        if mode in ("check2", "all", "both"):
            cert = check_corollary2(scenario.field, scenario.V, scenario.triple, scenario.domain,
                                    scenario.t_grid, tol=scenario.derivative_tol,
                                    safety=scenario.safety,
                                    surface_tol=scenario.integrator.surface_tol)
            report.certificates["corollary2"] = cert
            report.checks["corollary2"] = cert.passed
        if mode in ("check1", "simulate", "all", "both"):
            traj = simulate_scenario(scenario)
            report.trajectory = traj
        if mode in ("check1", "all", "both"):
            cert = check_corollary1(scenario.field, scenario.V, scenario.triple, scenario.domain,
                                    report.trajectory, safety=scenario.safety)
            report.certificates["corollary1"] = cert
            report.checks["corollary1"] = cert.passed
        if mode in ("simulate", "all"):
            conv = _convergence(scenario, report.trajectory)
            inc = inclusion_check(scenario.field, report.trajectory)
            report.convergence, report.inclusion = conv, inc
            report.checks["inclusion"] = inc.compliance >= INCLUSION_THRESHOLD
            report.checks["V_monotone"] = conv.monotone and conv.bounded_by_initial
            report.checks["integral_bound"] = conv.integral_bounded
            report.checks["W_converged"] = conv.converged
    except (IntegratorError, EvaluationError) as err:
        report.error = f"{type(err).__name__}: {err}"

    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        name = scenario.name
        if report.trajectory is not None:
            path = outdir / f"{name}.trajectory.csv"
            write_trajectory_csv(path, scenario, report.trajectory, report.convergence)
            report.files["trajectory"] = path
            conv = report.convergence or _convergence(scenario, report.trajectory, allow_short=True)
            path = outdir / f"{name}.plot.dat"
            write_plot_data(path, conv)
            report.files["plot"] = path
        parts = [certificate_text(c, name) for c in report.certificates.values()]
        if report.convergence is not None:
            parts.append(simulation_text(report))
        if report.error:
            parts.append(f"error = {report.error}\n")
        parts.append(f"exit_status = {report.exit_status}\n")
        path = outdir / f"{name}.certificate.txt"
        path.write_text("".join(parts))
        report.files["certificate"] = path
    return report


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def _resolve(path: str) -> Path:
    if path.startswith("bundled:"):
        return bundled(path.split(":", 1)[1])
    return Path(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nslasalle",
        description="Simulate Filippov solutions and check nonsmooth Lyapunov certificates.",
        epilog="exit status: 0 all checks pass, 1 a check failed, 2 model or runtime error")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario file, or bundled:NAME (sign, adaptive, frozen)")
    common.add_argument("-o", "--outdir", default="out", help="output directory (default: out)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a scenario entry; may be repeated")
    common.add_argument("--h", type=float, help="integration step")
    common.add_argument("--surface-tol", type=float, help="on-surface tolerance (state units)")
    common.add_argument("--event-tol", type=float, help="event bisection tolerance (time units)")
    common.add_argument("--samples", type=int, help="grid samples per axis")
    common.add_argument("--tol", type=float, help="derivative-bound tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("check", parents=[common], help="certify the hypotheses")
    p.add_argument("--corollary", choices=("1", "2", "both"), default="2",
                   help="pointwise (2), along a simulated solution (1), or both")
    sub.add_parser("simulate", parents=[common],
                   help="integrate and write the trajectory and convergence diagnostics")
    p = sub.add_parser("report", parents=[common], help="run the scenario's mode (default: all)")
    p.add_argument("--mode", choices=MODES, help="override the scenario's mode")
    return parser


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ScenarioError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    for flag, key in (("h", "simulate.h"), ("surface_tol", "simulate.surface_tol"),
                      ("event_tol", "simulate.event_tol"), ("samples", "domain.samples"),
                      ("tol", "domain.tol")):
        value = getattr(args, flag)
        if value is not None:
            out[key] = repr(value)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(_resolve(args.scenario), _overrides(args))
    except (FileNotFoundError, ScenarioError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR

    if args.command == "check":
        mode = {"1": "check1", "2": "check2", "both": "both"}[args.corollary]
    elif args.command == "simulate":
        mode = "simulate"
    else:
        mode = args.mode or scenario.mode
    try:
        report = run(scenario, mode, args.outdir)
    except (ValueError, ArithmeticError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR
    for name, ok in report.checks.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    for cert in report.certificates.values():
        for h in cert.failures():
            print(f"  {cert.kind}/{h.name} failed (margin {h.worst_margin!r}, witness {h.witness})")
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    for kind, path in report.files.items():
        print(f"wrote {kind}: {path}")
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
