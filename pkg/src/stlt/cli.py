"""Command line front end.

    stlt tree     --scenario S [--out DIR] [--cache-dir DIR]
    stlt reach    --scenario S [--cache-dir DIR]
    stlt synth    --scenario S --out DIR [--branch B] [--soft] [--dt X]
                  [--t-end X] [--cache-dir DIR] [--seed N]
    stlt monitor  --scenario S --traj FILE [--out FILE]

`--scenario` takes a TOML file path or the name of a bundled scenario.
synth writes, per start state i: traj_i.csv, events_i.jsonl, plot_i.svg
and verdict_i.json.  Exit codes: 0 when every requested run satisfied
its formula, 2 when some run finished but failed the monitor, 3 when
the control program became infeasible, 4 for unusable inputs.  When
several runs disagree the most severe code wins.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .cbf import build_cbfs
from .controller import (
    read_trajectory_csv,
    run_closed_loop,
    write_events_jsonl,
    write_trajectory_csv,
)
from .monitor import stl_satisfied
from .scenario import Scenario, ScenarioError, load_scenario
from .svg import write_run_svg
from .tree import build_tree

__all__ = ["main"]

EXIT_SAT = 0
EXIT_UNSAT = 2
EXIT_INFEASIBLE = 3
EXIT_INPUT = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stlt",
        description="synthesize and audit controllers for temporal logic tasks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True,
                       help="scenario TOML path or bundled scenario name")
        p.add_argument("--cache-dir", default=None,
                       help="directory for cached grid solves")

    p_tree = sub.add_parser("tree", help="build the tree, print or write its codes")
    common(p_tree)
    p_tree.add_argument("--out", default=None, help="directory for tree.dot and codes.csv")

    p_reach = sub.add_parser("reach", help="run every grid solve a scenario needs")
    common(p_reach)

    p_synth = sub.add_parser("synth", help="close the loop from each start state")
    common(p_synth)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--branch", default=None,
                         help="branch index to follow, or 'auto' (default: scenario)")
    p_synth.add_argument("--soft", action="store_true",
                         help="slack-relaxed control program instead of hard failure")
    p_synth.add_argument("--dt", type=float, default=None, help="controller step override")
    p_synth.add_argument("--t-end", type=float, default=None, help="run length override")
    p_synth.add_argument("--start", type=int, default=None,
                         help="index into the scenario start list (default: all)")
    p_synth.add_argument("--seed", type=int, default=0,
                         help="seed for stochastic extensions; current runs are deterministic")

    p_mon = sub.add_parser("monitor", help="audit a recorded trajectory")
    common(p_mon)
    p_mon.add_argument("--traj", required=True, help="trajectory CSV to audit")
    p_mon.add_argument("--out", default=None, help="write the verdict JSON here too")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.command == "tree":
            return _cmd_tree(scenario, args)
        if args.command == "reach":
            return _cmd_reach(scenario, args)
        if args.command == "synth":
            return _cmd_synth(scenario, args)
        return _cmd_monitor(scenario, args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _build(scenario: Scenario, cache_dir):
    engine = scenario.engine(cache_dir)
    tree = build_tree(scenario.phi_desired, scenario.predicates, engine)
    return engine, tree


def _cmd_tree(scenario: Scenario, args) -> int:
    _, tree = _build(scenario, args.cache_dir)
    if args.out is None:
        sys.stdout.write(tree.codes_csv())
        return EXIT_SAT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tree.dot").write_text(tree.to_dot())
    (out / "codes.csv").write_text(tree.codes_csv())
    print(f"wrote {out / 'tree.dot'} and {out / 'codes.csv'}")
    return EXIT_SAT


def _cmd_reach(scenario: Scenario, args) -> int:
    engine, tree = _build(scenario, args.cache_dir)
    cbfs = build_cbfs(tree, engine)
    kind = "grid solves cached" if engine.kind == "grid" else "analytic sets"
    print(f"{scenario.name}: {len(tree.set_nodes())} set nodes, "
          f"{len(cbfs)} barriers ({kind})")
    return EXIT_SAT


def _cmd_synth(scenario: Scenario, args) -> int:
    engine = scenario.engine(args.cache_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.t_end is not None:
        overrides["t_end"] = args.t_end
    if args.branch is not None:
        overrides["branch"] = args.branch if args.branch == "auto" else int(args.branch)
    if args.soft:
        overrides["soft"] = True
    cfg = replace(scenario.run, **overrides)
    starts = scenario.starts
    if args.start is not None:
        if not 0 <= args.start < len(starts):
            raise ScenarioError(f"start index {args.start} out of range")
        starts = [starts[args.start]]
    if not starts:
        raise ScenarioError("scenario declares no start states")

    code = EXIT_SAT
    for i, x0 in enumerate(starts):
        run_tree = build_tree(scenario.phi_desired, scenario.predicates, engine)
        run_cbfs = build_cbfs(run_tree, engine)
        result = run_closed_loop(run_tree, run_cbfs, scenario.dyn, x0, cfg)
        for msg in result.warnings:
            print(f"warning: start {i}: {msg}", file=sys.stderr)
        write_trajectory_csv(out / f"traj_{i}.csv", result)
        write_events_jsonl(out / f"events_{i}.jsonl", result.events)
        write_run_svg(out / f"plot_{i}.svg", scenario.predicates, result.states,
                      title=f"{scenario.name} start {i}")
        if not result.completed:
            print(f"start {i}: {result.diagnostic}", file=sys.stderr)
            (out / f"verdict_{i}.json").write_text(json.dumps(
                {"satisfied": False, "reason": "control program infeasible",
                 "diagnostic": result.diagnostic}, indent=2) + "\n")
            code = max(code, EXIT_INFEASIBLE)
            continue
        verdict = stl_satisfied(result.times, result.states, scenario.phi,
                                scenario.predicates)
        payload = {
            "satisfied": verdict.satisfied,
            "margin": verdict.margin,
            "tolerance": verdict.tolerance,
            "witnesses": verdict.witnesses,
        }
        (out / f"verdict_{i}.json").write_text(json.dumps(payload, indent=2) + "\n")
        word = "satisfied" if verdict.satisfied else "violated"
        print(f"start {i}: {word}, margin {verdict.margin:.4f} "
              f"(tolerance {verdict.tolerance:.4f})")
        if not verdict.satisfied:
            code = max(code, EXIT_UNSAT)
    return code


def _cmd_monitor(scenario: Scenario, args) -> int:
    times, states = read_trajectory_csv(args.traj)
    if states.shape[1] != scenario.dyn.n:
        raise ScenarioError(
            f"trajectory has {states.shape[1]} state columns, scenario needs {scenario.dyn.n}")
    verdict = stl_satisfied(times, states, scenario.phi, scenario.predicates)
    payload = {
        "satisfied": verdict.satisfied,
        "margin": verdict.margin,
        "tolerance": verdict.tolerance,
        "witnesses": verdict.witnesses,
    }
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out is not None:
        Path(args.out).write_text(text + "\n")
    return EXIT_SAT if verdict.satisfied else EXIT_UNSAT


if __name__ == "__main__":
    sys.exit(main())
