"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime failure (including a failed
acceptance criterion in ``bench``).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reference as ref
from .lmpc import LMPCConfig, lp_at_step, run_lmpc
from .nlmpc import NLMPCConfig, ScenarioMismatch, compare, iterative_nlmpc
from .plant import run_closed_loop, zero_controller
from .scenario import ScenarioError, load_scenario, save_scenario
from .thermal import (
    BuildingModel, NetworkError, assemble_state_space, network_from_dict, save_network, validate_model,
)
from .traceio import emit_plots, read_trace, write_trace

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def load_model(path) -> tuple[BuildingModel, object]:
    """Accept either an RC network document or an assembled model document."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if "nodes" in data:
        network = network_from_dict(data)
        return assemble_state_space(network), network
    if "A" in data:
        return BuildingModel.from_dict(data), None
    raise NetworkError(f"{path}: neither a network (nodes) nor a model (A, B, C, E)")


def _tuning(parser):
    parser.add_argument("--window", type=int, help="prediction window in steps (default: scenario)")
    parser.add_argument("--segments", type=int, default=16, help="PWL segments for the fan cube")
    parser.add_argument("--eps", type=float, default=0.5, help="guard on |T_s - y| in degC")
    parser.add_argument("--slack-weight", type=float, default=1e4, help="comfort slack penalty")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lmpc-hvac", description="Linearized MPC for building HVAC.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-scenario", help="write the reference scenario and network")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--variant", type=int, choices=(1, 2), default=1)
    g.add_argument("--scenario", required=True, help="scenario JSON to write")
    g.add_argument("--model", help="network JSON to write")
    g.add_argument("--budget", type=float, help="switch to comfort mode with this spend budget")
    g.add_argument("--t-oc", type=float, default=23.0, help="comfort target in comfort mode")

    v = sub.add_parser("validate-model", help="re-derive a model and report discrepancies")
    v.add_argument("--model", required=True, help="network JSON")
    v.add_argument("--matrices", help="assembled model JSON to check against the network")
    v.add_argument("--export", help="write the assembled model JSON here")

    s = sub.add_parser("simulate", help="run a controller in closed loop")
    s.add_argument("--controller", choices=("lmpc", "nlmpc", "zero"), required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--timing", action="store_true", help="record per-step solver times in the CSV")
    s.add_argument("--no-plots", action="store_true")
    _tuning(s)

    c = sub.add_parser("compare", help="compare two simulate output directories")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--json", action="store_true", help="print the JSON report")

    d = sub.add_parser("dump-lp", help="print the LP solved at one step")
    d.add_argument("--step", type=int, required=True)
    d.add_argument("--scenario", required=True)
    d.add_argument("--model", required=True)
    d.add_argument("--out", help="write to a file instead of stdout")
    _tuning(d)

    b = sub.add_parser("bench", help="run the acceptance suite")
    b.add_argument("--only", help="comma-separated criterion numbers")
    b.add_argument("--seed", type=int, default=0, help="accepted for symmetry; the suite is fixed-seed")
    return p


def _lmpc_config(args) -> LMPCConfig:
    return LMPCConfig(segments=args.segments, eps=args.eps, slack_weight=args.slack_weight, window=args.window)


def cmd_gen(args) -> int:
    network = ref.reference_network()
    sc = ref.generate_reference(seed=args.seed, variant=args.variant, network=network)
    if args.budget is not None:
        sc = sc.with_objective(ref.comfort_objective(sc, args.budget, args.t_oc))
    save_scenario(sc, args.scenario)
    if args.model:
        save_network(network, args.model)
    return EXIT_OK


def cmd_validate(args) -> int:
    model, network = load_model(args.model)
    if network is None:
        raise UsageError("validate-model --model needs a network document")
    if args.matrices:
        model, _ = load_model(args.matrices)
    report = validate_model(model, network)
    print(report)
    if args.export:
        Path(args.export).write_text(json.dumps(assemble_state_space(network).to_dict(), indent=1) + "\n")
    return EXIT_OK if report.max_discrepancy == 0.0 else EXIT_FAIL


def cmd_simulate(args) -> int:
    model, _ = load_model(args.model)
    sc = load_scenario(args.scenario)
    sc.check_model(model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"controller": args.controller, "scenario": sc.name}
    if args.controller == "lmpc":
        cfg = _lmpc_config(args)
        trace = run_lmpc(model, sc, cfg)
        summary.update({k: trace.notes[k] for k in ("slack_activations", "fill_ordered", "solve_failures",
                                                     "guard_flags")})
        summary["config"] = {"segments": cfg.segments, "eps": cfg.eps, "slack_weight": cfg.slack_weight,
                             "window": cfg.window}
    elif args.controller == "nlmpc":
        trace = iterative_nlmpc(model, sc, NLMPCConfig(slack_weight=args.slack_weight, window=args.window))
        summary.update(trace.notes)
    else:
        trace = run_closed_loop(model, zero_controller(model.m), sc)
    summary["total_cost"] = trace.total_cost
    summary["clamped_steps"] = int(trace.clamped.sum())
    write_trace(trace, out / "trace.csv", solver_time=args.timing)
    save_scenario(sc, out / "scenario.json")
    timing = {"solver_time_total": trace.total_solver_time, "solver_time": trace.solver_time.tolist()}
    (out / "run.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps(timing) + "\n")
    if not args.no_plots:
        emit_plots(trace, out, sc)
    print(f"{args.controller}: cost {trace.total_cost:.6f}, solver time {trace.total_solver_time:.3f} s -> {out}")
    return EXIT_OK


def _load_run(directory):
    d = Path(directory)
    trace = read_trace(d / "trace.csv")
    timing = d / "timing.json"
    if timing.exists():
        trace.solver_time = np.asarray(json.loads(timing.read_text())["solver_time"], dtype=float)
    sc = load_scenario(d / "scenario.json") if (d / "scenario.json").exists() else None
    return trace, sc


def cmd_compare(args) -> int:
    ta, sa = _load_run(args.a)
    tb, sb = _load_run(args.b)
    if ta.solver_time.shape != (ta.K,) or tb.solver_time.shape != (tb.K,):
        raise ScenarioMismatch("timing records do not match the traces")
    report = compare(ta, tb, sa or sb)
    print(report.to_json() if args.json else report.text(), end="")
    return EXIT_OK


def cmd_dump(args) -> int:
    model, _ = load_model(args.model)
    sc = load_scenario(args.scenario)
    sc.check_model(model)
    text = lp_at_step(model, sc, args.step, _lmpc_config(args)).dump()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .acceptance import run_all

    only = None
    if args.only:
        try:
            only = [int(s) for s in args.only.split(",")]
        except ValueError:
            raise UsageError(f"--only expects numbers, got {args.only!r}") from None
        if not set(only) <= set(range(1, 10)):
            raise UsageError("criteria are numbered 1 to 9")
    results = run_all(only, echo=print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "gen-scenario": cmd_gen, "validate-model": cmd_validate, "simulate": cmd_simulate,
    "compare": cmd_compare, "dump-lp": cmd_dump, "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, NetworkError, ScenarioMismatch, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
