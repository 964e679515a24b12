"""Command-line front end.

Subcommands:
  analyze  <scenario>   rank / null-space / mode report as a JSON document
  simulate <scenario>   covariance traces as CSV files
  cases                 comparative table of the four benchmark detection
                        patterns on the default geometry
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, simulation
from .analysis import AnalysisOptions, analyze_case, analyze_local, analyze_total
from .scenario import ScenarioError, load_scenario

_GROUP_PREFIXES = (
    ("position", ("dp_",)),
    ("velocity", ("dv_",)),
    ("attitude", ("psi_",)),
    ("features", ("dm_",)),
)


def report_to_dict(report, scenario_name: str) -> dict:
    """Structured report document for one analysis run."""
    return {
        "scenario": scenario_name,
        "scope": report.scope,
        "segment_index": report.segment_index,
        "expansion_mode": report.expansion_mode,
        "rank_tolerance": report.rank_tol,
        "state_labels": list(report.state_labels),
        "matrix_rows": report.matrix_rows,
        "matrix_cols": report.matrix_cols,
        "rank": report.rank,
        "nullity": report.nullity,
        "null_basis": [
            [float(v) for v in report.null_basis.vectors[:, k]]
            for k in range(report.null_basis.dim)
        ],
        "functionals": [
            {
                "label": v.label,
                "observable": bool(v.observable),
                "null_projection": float(v.null_projection),
            }
            for v in report.mode_results
        ],
        "observable_modes": report.observable_modes(),
    }


def _analysis_options(doc_options: AnalysisOptions, args) -> AnalysisOptions:
    expansion = doc_options.expansion_mode
    if args.first_order:
        expansion = "first_order"
    elif args.exact:
        expansion = "exact"
    rank_tol = args.tol if args.tol is not None else doc_options.rank_tol
    return AnalysisOptions(
        expansion_mode=expansion,
        rank_tol=rank_tol,
        extra_candidates=doc_options.extra_candidates,
    )


def cmd_analyze(args) -> int:
    doc = load_scenario(args.scenario)
    options = _analysis_options(doc.options, args)
    if args.local is not None:
        report = analyze_local(doc.scenario, args.local, options)
    else:
        report = analyze_total(doc.scenario, options)
    payload = json.dumps(report_to_dict(report, doc.name), indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
        print(f"wrote report to {args.out}")
    else:
        print(payload)
    return 0


def _write_csv(path: Path, labels, times, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["time_s"] + list(labels))
        for k in range(times.size):
            writer.writerow(
                [f"{times[k]:.6f}"] + [f"{col[k]:.12g}" for col in columns]
            )


def cmd_simulate(args) -> int:
    doc = load_scenario(args.scenario)
    doc.require_simulation_sections()
    sim_scenario = doc.sim_scenario()
    trace = simulation.simulate(
        sim_scenario,
        doc.trajectory,
        doc.sensor,
        seed=args.seed,
        duration=args.duration,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for group, prefixes in _GROUP_PREFIXES:
        labels = [
            lab
            for lab in trace.std
            if any(lab.startswith(p) for p in prefixes)
        ]
        path = out_dir / f"{group}.csv"
        _write_csv(path, labels, trace.times, [trace.std[lab] for lab in labels])
        written.append(path)
    rel_labels = list(trace.derived_std)
    rel_path = out_dir / "relative.csv"
    _write_csv(
        rel_path, rel_labels, trace.times, [trace.derived_std[lab] for lab in rel_labels]
    )
    written.append(rel_path)
    if args.state_run:
        run = simulation.state_comparison_run(
            sim_scenario,
            doc.trajectory,
            doc.sensor,
            seed=args.seed,
            duration=args.duration,
        )
        path = out_dir / "state_run.csv"
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["time_s"]
                + [f"true_{a}" for a in ("N", "E", "U")]
                + [f"ins_{a}" for a in ("N", "E", "U")]
                + [f"est_{a}" for a in ("N", "E", "U")]
            )
            for k in range(run.times.size):
                row = [f"{run.times[k]:.6f}"]
                for arr in (run.true_positions, run.ins_positions, run.estimated_positions):
                    row.extend(f"{v:.12g}" for v in arr[k])
                writer.writerow(row)
        written.append(path)
    rows = trace.times.size
    print(f"simulated {doc.name}: {rows} rows per trace (seed {args.seed})")
    for path in written:
        print(f"wrote {path}")
    return 0


def _parse_force(text: str, flag: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise ScenarioError(flag, "expected three comma-separated numbers")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise ScenarioError(flag, "entries must be numbers") from None


def _cases_table(forces, delta, options) -> str:
    lines = [
        f"expansion: {options.expansion_mode}   rank tolerance: {options.rank_tol:g}",
        f"{'case':<6}{'schedule':<22}{'rank':<7}{'nullity':<9}observable modes",
    ]
    for case_id in sorted(analysis.CASE_SCHEDULES):
        report = analyze_case(case_id, forces=forces, delta=delta, options=options)
        pattern = analysis.CASE_SCHEDULES[case_id]
        seg_sets = []
        for i in range(2):
            members = [f"f{c + 1}" for c in range(2) if pattern[c][i]]
            seg_sets.append("{" + ",".join(members) + "}")
        schedule = " / ".join(seg_sets)
        modes = ", ".join(report.observable_modes()) or "-"
        lines.append(
            f"{case_id:<6}{schedule:<22}"
            f"{report.rank}/{report.matrix_cols:<4} {report.nullity:<9}{modes}"
        )
    return "\n".join(lines)


def cmd_cases(args) -> int:
    forces = analysis.DEFAULT_FORCES
    if args.forces:
        forces = tuple(_parse_force(f, "--forces") for f in args.forces)
    modes = []
    if args.exact or not args.first_order:
        modes.append("exact")
    if args.first_order:
        modes.append("first_order")
    tol = args.tol if args.tol is not None else 1e-10
    blocks = []
    for mode in modes:
        options = AnalysisOptions(expansion_mode=mode, rank_tol=tol)
        blocks.append(_cases_table(forces, args.dt, options))
    print("\n\n".join(blocks))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slamobs",
        description=(
            "Observability analysis and covariance simulation of airborne "
            "inertial SLAM under time-varying feature detection schedules."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", help="rank/null-space report for a scenario file")
    p_analyze.add_argument("scenario", help="path to a scenario YAML file")
    p_analyze.add_argument(
        "--local",
        type=int,
        default=None,
        metavar="I",
        help="analyze a single segment instead of the whole scenario",
    )
    p_analyze.add_argument("--tol", type=float, default=None, help="relative rank tolerance")
    group = p_analyze.add_mutually_exclusive_group()
    group.add_argument(
        "--first-order", action="store_true", help="expand transitions to first order"
    )
    group.add_argument(
        "--exact", action="store_true", help="use exact transition matrices"
    )
    p_analyze.add_argument("--out", default=None, help="write the JSON report to this file")
    p_analyze.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("simulate", help="covariance simulation, CSV traces")
    p_sim.add_argument("scenario", help="path to a scenario YAML file")
    p_sim.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p_sim.add_argument("--out", default=".", help="output directory for CSV traces")
    p_sim.add_argument(
        "--duration", type=float, default=None, help="truncate the run to this many seconds"
    )
    p_sim.add_argument(
        "--state-run",
        action="store_true",
        help="also write a noisy-measurement trajectory comparison",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_cases = sub.add_parser(
        "cases", help="rank table of the four benchmark detection patterns"
    )
    p_cases.add_argument("--tol", type=float, default=None, help="relative rank tolerance")
    p_cases.add_argument(
        "--first-order", action="store_true", help="include the first-order table"
    )
    p_cases.add_argument(
        "--exact", action="store_true", help="include the exact table (default)"
    )
    p_cases.add_argument(
        "--forces",
        nargs=2,
        metavar=("F1", "F2"),
        default=None,
        help="per-segment specific forces as two 'x,y,z' triples",
    )
    p_cases.add_argument(
        "--dt", type=float, default=analysis.DEFAULT_SEGMENT_DURATION,
        help="segment duration in seconds",
    )
    p_cases.set_defaults(func=cmd_cases)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
