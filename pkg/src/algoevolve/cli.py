"""Command-line surface.

    algoevolve run      --config FILE [--seed N] [--llm MODE] [--out DIR] ...
    algoevolve evaluate ALGORITHM_FILE [--sizes ...] [--instances N] ...
    algoevolve report   RUN_DIR [--routes K] [--out DIR]

Exit codes: 0 success, 2 configuration problem, 3 model transport or
initialization failure, 4 candidate failed evaluation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import EvolutionConfig, run_evolution
from .errors import (
    AuthError,
    ConfigError,
    InitializationExhausted,
    LlmUnavailable,
    ScriptExhausted,
)
from .evaluator import (
    EvalLimits,
    FitnessEvaluator,
    evaluate_candidate,
    two_opt_baselines,
)
from .llm import (
    HttpChatTransport,
    LlmOperator,
    RecordingTransport,
    ReplayTransport,
    ScriptedTransport,
)
from .programs import parse_program
from .reporting import (
    RunManifest,
    SizeReportRow,
    best_snapshot,
    load_manifest,
    manifest_best_program,
    read_trace_csv,
    render_convergence,
    render_route,
    utc_now,
    write_report_table,
    write_run_outputs,
)
from .tsp import construct_tour, instance_batch, load_baseline_lengths

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_LLM = 3
EXIT_CANDIDATE = 4

DEFAULT_SIZES = "20,50,100,200,500,1000"


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _build_transport(mode: str, settings, transcript_path: Path | None):
    if mode == "live":
        transport = HttpChatTransport(settings)
    elif mode.startswith("mock:"):
        transport = ScriptedTransport.from_file(mode[len("mock:"):])
    elif mode.startswith("replay:"):
        transport = ReplayTransport(mode[len("replay:"):])
    else:
        raise ConfigError(f"unknown --llm mode {mode!r} "
                          "(expected live, mock:PATH, or replay:PATH)")
    if transcript_path is not None:
        transport = RecordingTransport(transport, transcript_path)
    return transport


def cmd_run(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        return _fail(EXIT_CONFIG, f"config file not found: {config_path}")
    try:
        doc = json.loads(config_path.read_text(encoding="utf-8"))
        config = EvolutionConfig.from_dict(doc)
        if args.seed is not None:
            config = EvolutionConfig.from_dict({**config.to_dict(), "rng_seed": args.seed})
        config.validate()
    except (ValueError, ConfigError) as exc:
        return _fail(EXIT_CONFIG, f"bad config {config_path}: {exc}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        transport = _build_transport(args.llm, config.llm,
                                     out_dir / "transcript.jsonl")
    except (ConfigError, OSError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    baselines = None
    if args.baseline.startswith("import:"):
        baselines = load_baseline_lengths(args.baseline[len("import:"):])
    elif args.baseline != "two-opt":
        return _fail(EXIT_CONFIG, f"unknown --baseline {args.baseline!r}")

    started = utc_now()
    llm = LlmOperator(transport)
    try:
        guest_cmd = tuple(args.guest_cmd.split()) if args.guest_cmd else None
        evaluator = FitnessEvaluator.for_run(
            config.evaluation_instance_size, config.evaluation_instance_count,
            config.rng_seed, parallel=args.parallel, baselines=baselines,
            limits=EvalLimits(batch_timeout_s=args.timeout,
                              guest_command=guest_cmd))
        best, trace = run_evolution(config, llm, evaluator,
                                    checkpoint_dir=out_dir / "checkpoints",
                                    resume_from=args.resume)
    except (LlmUnavailable, AuthError, ScriptExhausted, InitializationExhausted) as exc:
        return _fail(EXIT_LLM, f"{type(exc).__name__}: {exc}")
    except (ConfigError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    manifest = RunManifest(config=config, llm_mode=args.llm,
                           output_dir=str(out_dir), started_at=started,
                           finished_at=utc_now(), best=best_snapshot(best))
    write_run_outputs(out_dir, manifest, trace, best)
    for warning in trace.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"best fitness {best.fitness:.6f} after {config.generations} "
          f"generations -> {out_dir}")
    print(f"best program: {best.program.canonical_text}")
    return EXIT_OK


def _load_algorithm(path: Path):
    text = path.read_text(encoding="utf-8")
    stripped = text.strip()
    if stripped.startswith("{"):
        doc = json.loads(stripped)
        return parse_program(str(doc["program"]))
    return parse_program(text)


def cmd_evaluate(args: argparse.Namespace) -> int:
    algo_path = Path(args.algorithm)
    if not algo_path.is_file():
        return _fail(EXIT_CONFIG, f"algorithm file not found: {algo_path}")
    try:
        program = _load_algorithm(algo_path)
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except (ValueError, KeyError) as exc:
        return _fail(EXIT_CONFIG, f"cannot parse inputs: {exc}")
    if not sizes:
        return _fail(EXIT_CONFIG, "no sizes given")

    imported = None
    if args.baseline.startswith("import:"):
        imported = load_baseline_lengths(args.baseline[len("import:"):])
    elif args.baseline != "two-opt":
        return _fail(EXIT_CONFIG, f"unknown --baseline {args.baseline!r}")

    limits = EvalLimits(batch_timeout_s=args.timeout,
                        guest_command=tuple(args.guest_cmd.split()) if args.guest_cmd else None)
    rows: list[SizeReportRow] = []
    for size in sizes:
        batch = instance_batch(size, args.instances, base_seed=args.seed)
        if imported is not None:
            missing = [i.instance_id for i in batch if i.instance_id not in imported]
            if missing:
                return _fail(EXIT_CONFIG,
                             f"imported baselines missing {missing[:3]} ...")
            baselines = {i.instance_id: imported[i.instance_id] for i in batch}
        else:
            baselines = two_opt_baselines(batch, parallel=args.parallel)
        report = evaluate_candidate(program, batch, baselines, limits)
        if not report.ok:
            bad = [r for r in report.per_instance if r.status != "ok"]
            where = bad[0].instance_id if bad else "batch"
            why = bad[0].status if bad else report.detail
            return _fail(EXIT_CANDIDATE,
                         f"candidate failed on size {size} ({where}: {why})")
        mean_length = sum(r.length for r in report.per_instance) / len(report.per_instance)
        rows.append(SizeReportRow(size=size, instances=args.instances,
                                  mean_length=mean_length, mean_gap=report.mean_gap))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = write_report_table(rows, out_dir / "report.txt", out_dir / "report.csv")
    print(text, end="")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    try:
        manifest = load_manifest(run_dir)
        trace_rows = read_trace_csv(run_dir / "trace.csv")
    except (ConfigError, OSError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    out_dir = Path(args.out) if args.out else run_dir / "report"
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["generation,best_gap,mean_gap"]
    for row in trace_rows:
        lines.append(f"{row['generation']},{row['best_gap']!r},{row['mean_gap']!r}")
    (out_dir / "convergence.csv").write_text("\n".join(lines) + "\n",
                                             encoding="utf-8")

    trace = _trace_from_rows(trace_rows)
    render_convergence(trace, out_dir / "convergence.svg")

    if args.routes > 0:
        program = manifest_best_program(manifest)
        if not program.is_native:
            print("warning: best program is guest source; route plots need the "
                  "guest runtime, skipping", file=sys.stderr)
        else:
            config = manifest.config
            batch = instance_batch(config.evaluation_instance_size,
                                   min(args.routes, config.evaluation_instance_count),
                                   base_seed=config.rng_seed * 100000)
            for inst in batch:
                tour = construct_tour(program.selector(), inst, start=0)
                render_route(inst, tour, out_dir / f"route_{inst.instance_id}.svg",
                             label="best")
    print(f"report written to {out_dir}")
    return EXIT_OK


def _trace_from_rows(rows: list[dict]):
    from .engine import EvolutionTrace, GenerationRecord

    trace = EvolutionTrace()
    for row in rows:
        trace.generations.append(GenerationRecord(
            generation=row["generation"], best_fitness=row["best_gap"],
            mean_fitness=row["mean_gap"], crossover_attempts=0,
            mutation_attempts=0))
    return trace


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="algoevolve",
        description="Evolve constructive TSP heuristics with a chat model as "
                    "the variation operator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an evolution")
    p_run.add_argument("--config", required=True, help="JSON config file")
    p_run.add_argument("--seed", type=int, default=None, help="override rng_seed")
    p_run.add_argument("--llm", default="live",
                       help="live, mock:PATH, or replay:PATH")
    p_run.add_argument("--out", default="run_out", help="output directory")
    p_run.add_argument("--parallel", type=int, default=1,
                       help="concurrent candidate evaluations")
    p_run.add_argument("--timeout", type=float, default=60.0,
                       help="per-candidate batch timeout (seconds)")
    p_run.add_argument("--resume", default=None,
                       help="checkpoint file to resume from")
    p_run.add_argument("--baseline", default="two-opt",
                       help="two-opt or import:PATH")
    p_run.add_argument("--guest-cmd", default=None,
                       help="command line of the guest runtime for source candidates")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("evaluate", help="evaluate a saved algorithm "
                            "across problem sizes")
    p_eval.add_argument("algorithm", help="program file: mini-DSL line, "
                        "Python source, or best_algorithm.json")
    p_eval.add_argument("--sizes", default=DEFAULT_SIZES)
    p_eval.add_argument("--instances", type=int, default=64)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--baseline", default="two-opt",
                        help="two-opt or import:PATH")
    p_eval.add_argument("--out", default=".")
    p_eval.add_argument("--parallel", type=int, default=1)
    p_eval.add_argument("--timeout", type=float, default=600.0)
    p_eval.add_argument("--guest-cmd", default=None,
                        help="command line of the guest runtime for source candidates")
    p_eval.set_defaults(func=cmd_evaluate)

    p_rep = sub.add_parser("report", help="emit convergence CSV/figure and "
                           "route plots for a finished run")
    p_rep.add_argument("run_dir")
    p_rep.add_argument("--routes", type=int, default=0,
                       help="number of per-instance route plots")
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
