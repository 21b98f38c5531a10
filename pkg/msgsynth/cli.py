"""
Command-line interface of the toolkit.

Results go to standard output, diagnostics to standard error. Exit codes:
0 success or positive verdict, 1 negative verdict (not controllable,
mismatch, deadlock), 2 usage or parse error, 3 inconclusive (a bound was hit).
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional, Tuple

from msgsynth.cfm_runtime import explore, render_trace, simulate
from msgsynth.choice_analysis import ChoiceAnalysis
from msgsynth.config import Settings, load_settings
from msgsynth.errors import (
    GraphError,
    MsgSynthError,
    NotControllableError,
    PathError,
    SizeLimitError,
    SpecError,
)
from msgsynth.exporters import (
    export_dot_graph,
    export_dot_machines,
    export_structured,
    to_data,
)
from msgsynth.msg_core import format_word, linearizations
from msgsynth.realization import strip_annotations, synthesize_cfm
from msgsynth.spec_parser import MsgSpec, load_spec
from msgsynth.verification import (
    Verdict,
    check_equivalence,
    monitor_agreement,
    monitor_polling,
    monitor_promotion,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3

# (exit code, text for stdout, data for --format json)
Outcome = Tuple[int, str, object]


def _emit(args: argparse.Namespace, text: str, data: object) -> None:
    if args.format == "json":
        print(export_structured(data))
    elif text:
        print(text)


def _parse_control(text: Optional[str]) -> Optional[Tuple[int, str]]:
    if text is None:
        return None
    position, _, name = text.partition(":")
    if not name or not position.isdigit():
        raise argparse.ArgumentTypeError(
            f"control event must look like POSITION:!msg, got {text!r}"
        )
    return (int(position), name)


def cmd_validate(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    graph = spec.graph
    text = (
        f"valid: {len(spec.bmscs)} bMSCs, graph {graph.name} with "
        f"{len(graph.nodes)} nodes and {len(graph.edges)} edges"
    )
    data = {"valid": True, "bmscs": sorted(spec.bmscs), "graph": to_data(graph)}
    return EXIT_OK, text, data


def cmd_classify(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    analysis = ChoiceAnalysis(spec.graph)
    classification = analysis.classification
    lines = []
    for node, kind in classification.nodes:
        triggers = ",".join(sorted(analysis.triggers(node)))
        lines.append(f"{node}: {kind.value} (triggers {{{triggers}}})")
    for node, path in classification.counterexamples:
        lines.append(f"{node}: unresolved path {'.'.join(path)}")
    lines.append(classification.overall.value)
    code = EXIT_OK if classification.is_controllable else EXIT_NEGATIVE
    return code, "\n".join(lines), classification


def cmd_triggers(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    found = sorted(ChoiceAnalysis(spec.graph).triggers(args.node))
    return EXIT_OK, " ".join(found), {"node": args.node, "triggers": found}


def cmd_linearize(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    if args.bmsc not in spec.bmscs:
        raise GraphError(f"Unknown bMSC {args.bmsc!r}")
    words = sorted(linearizations(spec.bmscs[args.bmsc], cap=args.cap))
    rendered = [format_word(word) for word in words]
    return EXIT_OK, "\n".join(rendered), {"bmsc": args.bmsc, "words": rendered}


def cmd_synthesize(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    cfm = synthesize_cfm(spec.graph, _parse_control(args.initial_control))
    if args.out == "dot":
        return EXIT_OK, export_dot_machines(cfm, spec.graph.name).rstrip("\n"), cfm
    if args.out == "json":
        return EXIT_OK, export_structured(cfm), cfm
    lines = []
    for machine in cfm.machines:
        lines.append(
            f"{machine.process}: {len(machine.states)} states, "
            f"{len(machine.transitions)} transitions, "
            f"{len(machine.accepting)} accepting"
        )
    return EXIT_OK, "\n".join(lines), cfm


def cmd_explore(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    cfm = synthesize_cfm(spec.graph)
    result = explore(cfm, args.channel_bound, args.max_configs)
    violations = (
        monitor_agreement(result)
        + monitor_polling(result, ChoiceAnalysis(spec.graph))
        + monitor_promotion(result)
    )
    summary = result.summary()
    lines = [f"{key}: {value}" for key, value in summary.items()]
    lines.extend(str(violation) for violation in violations)
    data = dict(summary, violations=to_data(violations))
    if result.definite_deadlocks or violations:
        return EXIT_NEGATIVE, "\n".join(lines), data
    if result.boundary_hit:
        return EXIT_INCONCLUSIVE, "\n".join(lines), data
    return EXIT_OK, "\n".join(lines), data


def cmd_simulate(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    cfm = synthesize_cfm(spec.graph)
    trace = simulate(cfm, args.seed, args.max_steps, args.policy)
    text = render_trace(cfm, trace, channels=args.channels)
    if trace.truncated:
        return EXIT_INCONCLUSIVE, text, trace
    return (EXIT_OK if trace.accepting else EXIT_NEGATIVE), text, trace


def cmd_equiv(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    cfm = synthesize_cfm(spec.graph)
    if args.strip_annotations:
        cfm = strip_annotations(cfm)
    report = check_equivalence(
        spec.graph,
        cfm,
        visit_bound=args.visits,
        event_cap=args.event_cap,
        channel_bound=args.channel_bound,
        max_configs=args.max_configs,
    )
    lines = [
        f"verdict: {report.verdict.value}",
        f"word bound: {report.word_bound}",
        f"MSG words: {report.msg_words}, CFM words: {report.cfm_words}",
        f"deadlocks: {report.deadlocks}",
    ]
    lines.extend(f"missing in CFM: {format_word(w)}" for w in report.missing_in_cfm)
    lines.extend(f"extra in CFM: {format_word(w)}" for w in report.extra_in_cfm)
    lines.extend(f"note: {note}" for note in report.notes)
    codes = {
        Verdict.EQUAL: EXIT_OK,
        Verdict.MISMATCH: EXIT_NEGATIVE,
        Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    }
    return codes[report.verdict], "\n".join(lines), report


def cmd_partition(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    run = [node for item in args.run for node in item.split(".") if node]
    parts = ChoiceAnalysis(spec.graph).partition_run(run)
    text = "".join(str(part) for part in parts)
    return EXIT_OK, text, list(parts)


def cmd_graph(spec: MsgSpec, args: argparse.Namespace) -> Outcome:
    classification = ChoiceAnalysis(spec.graph).classification
    dot = export_dot_graph(spec.graph, classification).rstrip("\n")
    return EXIT_OK, dot, {"graph": to_data(spec.graph), "dot": dot}


COMMANDS: Dict[str, Callable[[MsgSpec, argparse.Namespace], Outcome]] = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "triggers": cmd_triggers,
    "linearize": cmd_linearize,
    "synthesize": cmd_synthesize,
    "explore": cmd_explore,
    "simulate": cmd_simulate,
    "equiv": cmd_equiv,
    "partition": cmd_partition,
    "graph": cmd_graph,
}


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msgsynth",
        description="Analyse, realize and verify message sequence graphs.",
    )
    parser.add_argument("--format", choices=["text", "json"], default="text")
    parser.add_argument("--log-level", default=settings.log_level)
    parser.add_argument(
        "--lineage-url",
        default=settings.lineage_url,
        help="OpenLineage endpoint for run audit events",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        child = sub.add_parser(name, help=help_text)
        child.add_argument("spec", help="path of a .msg specification")
        return child

    command("validate", "check the graph well-formedness invariants")
    command("classify", "classify every choice node")
    command("triggers", "triggers set of a node").add_argument("node")

    linearize = command("linearize", "list the linearizations of a bMSC")
    linearize.add_argument("bmsc")
    linearize.add_argument("--cap", type=int, default=settings.linearization_cap)

    synthesize = command("synthesize", "build the realizing machines")
    synthesize.add_argument("--out", choices=["text", "json", "dot"], default="text")
    synthesize.add_argument(
        "--initial-control", help="initial control event, e.g. 1:!a"
    )

    for name, help_text in (
        ("explore", "explore the synthesized CFM and run the monitors"),
        ("equiv", "bounded language equivalence of MSG and CFM"),
    ):
        child = command(name, help_text)
        child.add_argument(
            "--channel-bound", type=int, default=settings.channel_bound
        )
        child.add_argument("--max-configs", type=int, default=settings.max_configs)
        if name == "equiv":
            child.add_argument("--visits", type=int, default=settings.visit_bound)
            child.add_argument("--event-cap", type=int, default=settings.event_cap)
            child.add_argument(
                "--strip-annotations",
                action="store_true",
                help="compare against the machines with label-only messages",
            )

    simulate_cmd = command("simulate", "run one seeded execution")
    simulate_cmd.add_argument("--seed", type=int, default=settings.seed)
    simulate_cmd.add_argument("--max-steps", type=int, default=settings.max_steps)
    simulate_cmd.add_argument("--policy", choices=["random", "first"], default="random")
    simulate_cmd.add_argument("--channels", action="store_true")

    command("partition", "split a run into prediction paths").add_argument(
        "run", nargs="+", help="node ids, space or dot separated"
    )
    command("graph", "graphviz rendering of the MSG")
    return parser


def _audit_emitter(args: argparse.Namespace, settings: Settings):
    if not args.lineage_url:
        return None
    from msgsynth.audit import RunAuditEmitter

    try:
        return RunAuditEmitter(args.lineage_url, settings.lineage_namespace)
    except Exception as e:
        logger.warning(f"Run audit disabled: {e}")
        return None


def _run(args: argparse.Namespace, settings: Settings) -> int:
    spec = load_spec(args.spec)
    emitter = _audit_emitter(args, settings)
    job_name = f"msgsynth.{args.command}"
    run_id = None
    inputs: List[Dict] = []
    if emitter is not None:
        from msgsynth.audit import spec_dataset

        run_id = emitter.new_run_id()
        inputs = [spec_dataset(spec)]
        emitter.emit_start(job_name, run_id, inputs)
    try:
        code, text, data = COMMANDS[args.command](spec, args)
    except Exception as e:
        if emitter is not None:
            emitter.emit_fail(job_name, run_id, str(e))
        raise
    _emit(args, text, data)
    if emitter is not None:
        outputs = [
            {
                "name": f"{spec.graph.name}.{args.command}",
                "description": f"{args.command} result, exit code {code}",
            }
        ]
        emitter.emit_complete(job_name, run_id, inputs, outputs)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    settings = load_settings()
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args, settings)
    except (SpecError, GraphError, PathError, argparse.ArgumentTypeError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"Cannot read specification: {e}")
        return EXIT_USAGE
    except NotControllableError as e:
        logger.error(f"{e} (nodes: {', '.join(e.nodes)})")
        return EXIT_NEGATIVE
    except SizeLimitError as e:
        logger.error(str(e))
        return EXIT_INCONCLUSIVE
    except MsgSynthError as e:
        logger.error(str(e))
        return EXIT_NEGATIVE


if __name__ == "__main__":
    sys.exit(main())
