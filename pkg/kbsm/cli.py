"""Command-line driver: `kbsm eval|enumerate|tree|check-port|graph|infer|serve`.

Results go to standard out, diagnostics and logs to standard error. Exit
codes: 0 success, 1 stuck evaluation or failed verdict, 2 usage or parse
error, 3 inconclusive within the budget.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from kbsm.constants import GRAPH_FILE_SUFFIX, ExitCode, Strategy, Verdict
from kbsm.devgraph import (
    ChangeEdge,
    DevGraph,
    Extension,
    Modification,
    Node,
    PortChange,
    add_change,
    add_node,
    alternatives,
    apply_change,
    describe_edge,
    load,
    paths_to_node,
    replay,
    save,
    validate,
)
from kbsm.errors import WorkbenchError
from kbsm.inference import format_facts, infer, load_rule_file
from kbsm.logging_conf import get_logger, setup_logging
from kbsm.machine import Diverged, Halted, Stuck, Value, get_machine, render_outcome, run, unsupported_constructs
from kbsm.ndmachine import OutcomeSet, SearchBudget, calc_tree, eval_nd, render_tree
from kbsm.ports import (
    Port,
    check_completeness,
    check_consistency_conventional,
    check_consistency_kbs,
    check_equivalence,
    check_equivalence_kbs,
    get_port,
    load_corpus,
    rewrite_port,
)
from kbsm.rewrite import load_rewrite_table
from kbsm.schemas import CheckEntry, CheckReport
from kbsm.settings import get_settings
from kbsm.syntax import is_conventional, parse, parse_path, parse_program, render

logger = get_logger("cli")

Handler = Callable[[argparse.Namespace], int]


# --- shared helpers ---------------------------------------------------------------------


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _search_budget(args: argparse.Namespace) -> SearchBudget:
    return SearchBudget.from_settings(
        max_total_steps=args.max_steps,
        max_depth=args.max_depth,
        max_outcomes=args.max_outcomes,
        strategy=args.strategy,
    )


def completion_line(outcomes: OutcomeSet) -> str:
    if outcomes.complete:
        return "COMPLETE"
    d = outcomes.diagnostics
    return f"TRUNCATED (pruned={d.pruned} stuck={d.stuck} truncated={d.truncated})"


# --- evaluation commands ----------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    machine = get_machine(args.machine)
    program = parse_program(_read_text(args.file))
    unsupported = unsupported_constructs(machine, program)
    if unsupported:
        # Name a missing primitive before the literals it would be applied to.
        primitives = [problem for problem in unsupported if problem.startswith("primitive")]
        print(f"STUCK: {(primitives or unsupported)[0]} not supported by machine {machine.name}")
        return ExitCode.FAILED
    budget = args.budget or get_settings().eval_budget
    match run(machine, program, budget):
        case Value(value):
            print(render_outcome(value))
            return ExitCode.OK
        case Halted(value):
            print(f"HALTED: {render_outcome(value)}")
            return ExitCode.OK
        case Stuck(reason=reason):
            print(f"STUCK: {reason}")
            return ExitCode.FAILED
        case Diverged(steps_used):
            print(f"DIVERGED({steps_used})")
            return ExitCode.INCONCLUSIVE
    return ExitCode.FAILED


def cmd_enumerate(args: argparse.Namespace) -> int:
    machine = get_machine(args.machine)
    outcomes = eval_nd(machine, parse_program(_read_text(args.file)), _search_budget(args))
    for text in outcomes.texts():
        print(text)
    print(completion_line(outcomes))
    return ExitCode.OK if outcomes.complete else ExitCode.INCONCLUSIVE


def cmd_tree(args: argparse.Namespace) -> int:
    machine = get_machine(args.machine)
    tree, outcomes = calc_tree(machine, parse_program(_read_text(args.file)), _search_budget(args))
    print(render_tree(tree))
    return ExitCode.OK if outcomes.complete else ExitCode.INCONCLUSIVE


# --- port checks ------------------------------------------------------------------------------


def _build_port(args: argparse.Namespace) -> Port:
    source, target = get_machine(args.source), get_machine(args.target)
    if args.rewrites:
        return rewrite_port(load_rewrite_table(args.rewrites), source, target)
    if not args.port:
        raise WorkbenchError(
            "--port or --rewrites is required for this mode",
            error_code="USAGE", exit_code=ExitCode.USAGE,
        )
    return get_port(args.port, source, target)


def _entry_line(title: str, entry: CheckEntry) -> str:
    line = f"  {title} [{entry.index + 1}] {entry.program}"
    if entry.expected is not None or entry.actual is not None:
        line += f": expected {entry.expected}, got {entry.actual}"
    if entry.note:
        line += f" ({entry.note})"
    return line


def print_report(report: CheckReport) -> None:
    print(f"{report.check} ({report.mode}) of {report.subject}")
    print(
        f"corpus: {report.corpus_size} programs, {report.passed} passed, "
        f"{len(report.failed)} failed, {len(report.inconclusive)} inconclusive, "
        f"{report.undefined_both} undefined on both sides"
    )
    sections = (
        ("FAILED", report.failed),
        ("INCONCLUSIVE", report.inconclusive),
        ("UNDEFINED", report.translation_undefined),
        ("LOST", report.lost_outcomes),
    )
    for title, entries in sections:
        for entry in entries:
            print(_entry_line(title, entry))
    for note in report.budget_notes:
        print(f"  note: {note}")
    print(f"complete on this corpus: {'yes' if report.complete else 'no'}")
    print(f"VERDICT: {report.verdict.value}")


def report_exit_code(report: CheckReport, require_complete: bool = False) -> int:
    if report.verdict == Verdict.INCONSISTENT:
        return ExitCode.FAILED
    if report.inconclusive:
        return ExitCode.INCONCLUSIVE
    if require_complete and not report.complete:
        return ExitCode.FAILED
    return ExitCode.OK


def cmd_check_port(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    budget = args.budget
    match args.mode:
        case "equivalence":
            report = check_equivalence(get_machine(args.source), get_machine(args.target), corpus, budget)
        case "kbs-equivalence":
            report = check_equivalence_kbs(get_machine(args.source), get_machine(args.target), corpus, budget)
        case "kbs":
            report = check_consistency_kbs(_build_port(args), corpus, budget)
        case "completeness":
            report = check_completeness(_build_port(args), corpus, budget)
        case _:
            report = check_consistency_conventional(_build_port(args), corpus, budget)
    print_report(report)
    return report_exit_code(report, require_complete=args.mode == "completeness")


# --- development graphs ---------------------------------------------------------------------


def _summary(g: DevGraph) -> str:
    return f"OK ({len(g.nodes)} nodes, {len(g.edges)} edges)"


def _graph_path(args: argparse.Namespace) -> Path:
    path = Path(args.graph)
    if not path.name.endswith(GRAPH_FILE_SUFFIX):
        logger.warning(f"Graph file {path} does not use the {GRAPH_FILE_SUFFIX} extension")
    return path


def _program_arg(args: argparse.Namespace) -> str:
    return _read_text(args.file) if args.file else args.program


def _add_edge(args: argparse.Namespace, g: DevGraph, edge: ChangeEdge, machine: str | None = None) -> int:
    """Add `edge`; a missing target node is created from the recomputed program."""
    if edge.target not in g.nodes:
        source = g.node(edge.source)
        placeholder = Node(edge.target, source.program, machine or source.machine)
        scratch = DevGraph({**g.nodes, edge.target: placeholder}, g.edges)
        program = apply_change(scratch, edge, source.program)
        g = add_node(g, Node(edge.target, program, machine or source.machine, args.label or ""))
    g = add_change(g, edge)
    save(g, _graph_path(args))
    print(_summary(g))
    return ExitCode.OK


def cmd_graph_init(args: argparse.Namespace) -> int:
    path = _graph_path(args)
    if path.exists() and not args.force:
        raise WorkbenchError(
            f"{path} already exists (use --force to overwrite)",
            error_code="GRAPH_EXISTS", exit_code=ExitCode.USAGE,
        )
    g = DevGraph()
    save(g, path)
    print(_summary(g))
    return ExitCode.OK


def cmd_graph_add_node(args: argparse.Namespace) -> int:
    g = load(_graph_path(args))
    program = parse_program(_program_arg(args))
    g = add_node(g, Node(args.id, program, args.machine, args.label or ""))
    save(g, _graph_path(args))
    print(_summary(g))
    return ExitCode.OK


def cmd_graph_add_mod(args: argparse.Namespace) -> int:
    g = load(_graph_path(args))
    kind = Modification(parse_path(args.at), parse_program(args.replacement))
    return _add_edge(args, g, ChangeEdge(args.source, args.target, kind))


def cmd_graph_add_ext(args: argparse.Namespace) -> int:
    g = load(_graph_path(args))
    kind = Extension(parse(args.context, allow_holes=True))
    return _add_edge(args, g, ChangeEdge(args.source, args.target, kind))


def cmd_graph_add_port(args: argparse.Namespace) -> int:
    g = load(_graph_path(args))
    source = g.node(args.source)
    target_machine = args.machine or (
        g.nodes[args.target].machine if args.target in g.nodes else source.machine
    )
    note = None
    if args.verify_corpus:
        port = get_port(args.port, get_machine(source.machine), get_machine(target_machine))
        corpus = load_corpus(args.verify_corpus)
        if all(is_conventional(p) for p in corpus):
            report = check_consistency_conventional(port, corpus)
        else:
            report = check_consistency_kbs(port, corpus)
        if report.verdict == Verdict.INCONSISTENT:
            print_report(report)
            raise WorkbenchError(
                f"port {args.port} is inconsistent on {args.verify_corpus}",
                error_code="PORT_INCONSISTENT",
            )
        note = f"{report.verdict.value} on {report.corpus_size} programs of {args.verify_corpus}"
    edge = ChangeEdge(args.source, args.target, PortChange(args.port, note))
    return _add_edge(args, g, edge, machine=target_machine)


def _path_line(start: str, edges: Sequence[ChangeEdge]) -> str:
    parts = [start]
    for edge in edges:
        parts.append(f"--{edge.kind_name}--> {edge.target}")
    return " ".join(parts)


def cmd_graph_paths(args: argparse.Namespace) -> int:
    g = load(_graph_path(args))
    for path in paths_to_node(g, args.node):
        print(_path_line(path.start, path.edges))
    return ExitCode.OK


def cmd_graph_replay(args: argparse.Namespace) -> int:
    g = load(_graph_path(args))
    results = {render(replay(g, path)) for path in paths_to_node(g, args.node)}
    for text in sorted(results):
        print(text)
    return ExitCode.OK


def cmd_graph_check(args: argparse.Namespace) -> int:
    g = load(_graph_path(args))
    validate(g)
    for node_id in g.nodes:
        for path in paths_to_node(g, node_id):
            replay(g, path)
    print(_summary(g))
    return ExitCode.OK


def cmd_graph_alternatives(args: argparse.Namespace) -> int:
    g = load(_graph_path(args))
    edges = alternatives(g, args.node)
    if not edges:
        print("(none)")
    for edge in edges:
        print(describe_edge(edge))
    return ExitCode.OK


# --- inference and serving -----------------------------------------------------------------


def cmd_infer(args: argparse.Namespace) -> int:
    system = load_rule_file(args.rules)
    result = infer(system.rules, system.goal, system.start, _search_budget(args))
    for facts in result.sorted_outcomes():
        print(format_facts(facts))
    if result.complete:
        print("COMPLETE")
    else:
        d = result.diagnostics
        print(f"TRUNCATED (pruned={d.pruned} stuck={d.stuck} truncated={d.truncated})")
    return ExitCode.OK if result.complete else ExitCode.INCONCLUSIVE


def cmd_serve(args: argparse.Namespace) -> int:
    from kbsm.main import serve

    serve(host=args.host, port=args.port)
    return ExitCode.OK


# --- parser --------------------------------------------------------------------------------------


def _add_machine(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--machine", default="arith", help="machine name (default: arith)")


def _add_search_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strategy", choices=[s.value for s in Strategy])
    parser.add_argument("--max-steps", type=positive_int, help="global step pool (default 100000)")
    parser.add_argument("--max-depth", type=positive_int, help="steps per branch (default 10000)")
    parser.add_argument("--max-outcomes", type=positive_int, help="stop after this many outcomes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kbsm", description="Conventional and KBS SECD machine workbench"
    )
    parser.add_argument("--log-level", help="logging level for standard error")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("eval", help="run a conventional program")
    p.add_argument("file", help="program file ('-' for standard input)")
    _add_machine(p)
    p.add_argument("--budget", type=positive_int, help="step budget (default 100000)")
    p.set_defaults(handler=cmd_eval)

    for name, handler, text in (
        ("enumerate", cmd_enumerate, "list the outcomes of a KBS program"),
        ("tree", cmd_tree, "show the calculation tree of a KBS program"),
    ):
        p = commands.add_parser(name, help=text)
        p.add_argument("file", help="program file ('-' for standard input)")
        _add_machine(p)
        _add_search_flags(p)
        p.set_defaults(handler=handler)

    p = commands.add_parser("check-port", help="check a port or two machines on a corpus")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--port", help="built-in port name")
    source.add_argument("--rewrites", help="rewrite-table file defining the program translation")
    p.add_argument("--source", default="arith")
    p.add_argument("--target", default="arith")
    p.add_argument("--corpus", required=True)
    p.add_argument(
        "--mode",
        choices=["conventional", "kbs", "completeness", "equivalence", "kbs-equivalence"],
        default="conventional",
    )
    p.add_argument("--budget", type=positive_int, help="step budget per evaluation")
    p.set_defaults(handler=cmd_check_port)

    graph = commands.add_parser("graph", help="manage a development graph")
    graph_commands = graph.add_subparsers(dest="graph_command", required=True)

    def graph_parser(name: str, handler: Handler, text: str) -> argparse.ArgumentParser:
        sub = graph_commands.add_parser(name, help=text)
        sub.add_argument("--graph", required=True, help=f"graph file (*{GRAPH_FILE_SUFFIX})")
        sub.set_defaults(handler=handler)
        return sub

    p = graph_parser("init", cmd_graph_init, "create an empty graph")
    p.add_argument("--force", action="store_true")

    p = graph_parser("add-node", cmd_graph_add_node, "add a root or standalone node")
    p.add_argument("--id", required=True)
    _add_machine(p)
    program = p.add_mutually_exclusive_group(required=True)
    program.add_argument("--program", help="program text")
    program.add_argument("--file", help="program file")
    p.add_argument("--label")

    def edge_parser(name: str, handler: Handler, text: str) -> argparse.ArgumentParser:
        sub = graph_parser(name, handler, text)
        sub.add_argument("--from", dest="source", required=True)
        sub.add_argument("--to", dest="target", required=True)
        sub.add_argument("--label", help="label for a newly created target node")
        return sub

    p = edge_parser("add-mod", cmd_graph_add_mod, "record a modification")
    p.add_argument("--at", required=True, help="comma-separated selectors, e.g. lam-body")
    p.add_argument("--replacement", required=True)

    p = edge_parser("add-ext", cmd_graph_add_ext, "record an extension")
    p.add_argument("--context", required=True, help="parameterised program with '_' holes")

    p = edge_parser("add-port", cmd_graph_add_port, "record a port")
    p.add_argument("--port", required=True)
    p.add_argument("--machine", help="machine of a newly created target node")
    p.add_argument("--verify-corpus", help="refuse the port unless consistent on this corpus")

    for name, handler, text in (
        ("paths", cmd_graph_paths, "list the development paths to a node"),
        ("replay", cmd_graph_replay, "replay the changes leading to a node"),
        ("alternatives", cmd_graph_alternatives, "list the changes leaving a node"),
    ):
        p = graph_parser(name, handler, text)
        p.add_argument("--node", required=True)

    graph_parser("check", cmd_graph_check, "revalidate every edge and replay every path")

    p = commands.add_parser("infer", help="run the inference engine on a rule file")
    p.add_argument("--rules", required=True)
    _add_search_flags(p)
    p.set_defaults(handler=cmd_infer)

    p = commands.add_parser("serve", help="start the HTTP surface")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(log_level=args.log_level)
    try:
        return int(args.handler(args))
    except WorkbenchError as e:
        logger.debug(f"{args.command} failed with {e.error_code}")
        print(f"error: {e.message}", file=sys.stderr)
        return int(e.exit_code)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return int(ExitCode.USAGE)


def run_cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run_cli()
