"""Command line front end.

Exit codes: 0 on success, 1 for configuration problems (bad flags, bad
scenario content — diagnostics name the offending key or flag), 2 for
runtime failures. Diagnostics go to stderr; data goes to files.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from .experiments import (fig7_q_grid, run_fig6_scenario, run_fig7_experiment,
                          write_d2d_csv, write_summary_json,
                          write_throughput_csv)
from .scenario import Scenario, ScenarioError, describe_schema, load_scenario


class _Parser(argparse.ArgumentParser):
    """Argparse, but usage mistakes are configuration errors (exit 1)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    epilog = "scenario keys (override in the file or via fig6/run flags):\n"
    epilog += describe_schema()
    parser = _Parser(
        prog="fmesim",
        description=("Deterministic simulator for resilient small-cell "
                     "networks: embedded core agents with disruption "
                     "buffering, and an infrastructure-free direct-mode "
                     "discovery protocol."),
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_out: bool = True) -> None:
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (required unless the scenario "
                            "sets run.seed)")
        if needs_out:
            p.add_argument("--out", default="out",
                           help="output directory (default: out)")

    p_run = sub.add_parser(
        "run", help="run a scenario file (three-cell style)",
        epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    p_run.add_argument("scenario", help="scenario file (YAML key tree)")
    common(p_run)
    p_run.add_argument("--rounds", type=int, default=None,
                       help="override run.rounds")
    p_run.add_argument("--paper-scale", action="store_true",
                       help="force run.scale = paper")

    p_fig6 = sub.add_parser(
        "fig6", help="three-cell recovery scenario with built-in defaults")
    common(p_fig6)
    p_fig6.add_argument("--rounds", type=int, default=None,
                        help="override run.rounds")
    p_fig6.add_argument("--paper-scale", action="store_true",
                        help="paper scale (250 terminals/cell, 600 s, "
                             "10 rounds) instead of desk scale")

    p_fig7 = sub.add_parser(
        "fig7", help="beacon-election Monte Carlo sweep")
    common(p_fig7)
    p_fig7.add_argument("--phi", default="0.8,0.92",
                        help="comma-separated coverage fractions "
                             "(default: 0.8,0.92)")
    p_fig7.add_argument("--q", default="0.05:1.0:0.05",
                        help="activity grid start:stop:step "
                             "(default: 0.05:1.0:0.05)")
    p_fig7.add_argument("--drops", type=int, default=2000,
                        help="Monte Carlo drops per grid point")
    p_fig7.add_argument("--m", type=int, default=75,
                        help="terminals per drop")

    p_val = sub.add_parser(
        "validate", help="schema-check a scenario file without running")
    p_val.add_argument("scenario", help="scenario file to check")

    return parser


def _resolve_seed(args, scn: Optional[Scenario]) -> int:
    if args.seed is not None:
        return args.seed
    if scn is not None and scn.seed is not None:
        return scn.seed
    print("error: --seed is required (no run.seed in the scenario)",
          file=sys.stderr)
    raise SystemExit(1)


def _apply_overrides(scn: Scenario, args) -> Scenario:
    overrides = {}
    if getattr(args, "paper_scale", False):
        overrides["run.scale"] = "paper"
    if getattr(args, "rounds", None) is not None:
        overrides["run.rounds"] = args.rounds
    return scn.with_values(**overrides) if overrides else scn


def _write_fig6(out_dir: str, result) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_throughput_csv(os.path.join(out_dir, "throughput.csv"), result.rows)
    write_summary_json(os.path.join(out_dir, "summary.json"), result.summary)


def _cmd_run(args) -> int:
    scn = _apply_overrides(load_scenario(args.scenario), args)
    seed = _resolve_seed(args, scn)
    result = run_fig6_scenario(scn, seed)
    _write_fig6(args.out, result)
    print(f"wrote {args.out}/throughput.csv and {args.out}/summary.json")
    return 0


def _cmd_fig6(args) -> int:
    scn = _apply_overrides(Scenario(), args)
    seed = _resolve_seed(args, scn)
    result = run_fig6_scenario(scn, seed)
    _write_fig6(args.out, result)
    print(f"wrote {args.out}/throughput.csv and {args.out}/summary.json")
    return 0


def _parse_phis(text: str) -> tuple[float, ...]:
    try:
        phis = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ScenarioError("--phi", f"not a float list: {text!r}") from exc
    if not phis:
        raise ScenarioError("--phi", "needs at least one value")
    for phi in phis:
        if not 0.0 <= phi < 1.0:
            raise ScenarioError("--phi", f"coverage {phi} outside [0, 1)")
    return phis


def _parse_q(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ScenarioError("--q", f"expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ScenarioError("--q", f"not numeric: {text!r}") from exc
    return fig7_q_grid(start, stop, step)


def _cmd_fig7(args) -> int:
    seed = _resolve_seed(args, None)
    phis = _parse_phis(args.phi)
    q_grid = _parse_q(args.q)
    try:
        result = run_fig7_experiment(seed, m=args.m, phis=phis,
                                     q_grid=q_grid, drops=args.drops)
    except ValueError as exc:
        # ill-posed sweep parameters are configuration, not runtime
        print(f"error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    write_d2d_csv(os.path.join(args.out, "d2d.csv"), result.rows)
    write_summary_json(os.path.join(args.out, "summary.json"),
                       result.summary)
    print(f"wrote {args.out}/d2d.csv and {args.out}/summary.json")
    return 0


def _cmd_validate(args) -> int:
    load_scenario(args.scenario)
    print(f"ok: {args.scenario}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "fig6": _cmd_fig6,
    "fig7": _cmd_fig7,
    "validate": _cmd_validate,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:          # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
