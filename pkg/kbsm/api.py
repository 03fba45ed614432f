"""Main API router and endpoints."""

from fastapi import APIRouter

from kbsm import metrics
from kbsm.inference import infer, parse_rule_file
from kbsm.machine import MACHINES, Diverged, Halted, Stuck, Value, get_machine, render_outcome, run
from kbsm.ndmachine import SearchBudget, calc_tree, eval_nd, render_tree
from kbsm.ports import (
    check_completeness,
    check_consistency_conventional,
    check_consistency_kbs,
    check_equivalence,
    check_equivalence_kbs,
    get_port,
    parse_corpus,
    port_names,
    rewrite_port,
)
from kbsm.rewrite import parse_rewrite_table
from kbsm.schemas import (
    CheckPortRequest,
    CheckReport,
    Diagnostics,
    EnumerateResponse,
    EvalRequest,
    EvalResponse,
    InferRequest,
    InferResponse,
    MachineInfo,
    PortInfo,
    SearchRequest,
    TreeResponse,
)
from kbsm.settings import get_settings
from kbsm.syntax import parse_program

api_router = APIRouter()


def _search_budget(request: SearchRequest | InferRequest) -> SearchBudget:
    return SearchBudget.from_settings(
        max_total_steps=request.max_steps,
        max_depth=request.max_depth,
        max_outcomes=request.max_outcomes,
        strategy=request.strategy,
    )


@api_router.post("/eval", response_model=EvalResponse)
def evaluate(request: EvalRequest) -> EvalResponse:
    """Run a conventional program on a deterministic machine."""
    machine = get_machine(request.machine)
    result = run(machine, parse_program(request.program), request.budget or get_settings().eval_budget)
    match result:
        case Value(value, steps):
            response = EvalResponse(kind="value", result=render_outcome(value), steps=steps)
        case Halted(value, steps):
            response = EvalResponse(kind="halted", result=render_outcome(value), steps=steps)
        case Stuck(_, reason, steps):
            response = EvalResponse(kind="stuck", reason=reason, steps=steps)
        case Diverged(steps_used):
            response = EvalResponse(kind="diverged", steps=steps_used)
    metrics.record_evaluation(machine.name, response.kind, response.steps)
    return response


@api_router.post("/enumerate", response_model=EnumerateResponse)
def enumerate_outcomes(request: SearchRequest) -> EnumerateResponse:
    """Enumerate the outcomes of a KBS program."""
    machine = get_machine(request.machine)
    outcomes = eval_nd(machine, parse_program(request.program), _search_budget(request))
    metrics.record_enumeration(machine.name, outcomes.complete)
    return EnumerateResponse(
        outcomes=outcomes.texts(),
        complete=outcomes.complete,
        diagnostics=Diagnostics(**outcomes.diagnostics.as_dict()),
    )


@api_router.post("/tree", response_model=TreeResponse)
def calculation_tree(request: SearchRequest) -> TreeResponse:
    """Render the calculation tree of a KBS program."""
    machine = get_machine(request.machine)
    tree, outcomes = calc_tree(machine, parse_program(request.program), _search_budget(request))
    metrics.record_enumeration(machine.name, outcomes.complete)
    return TreeResponse(tree=render_tree(tree), outcomes=outcomes.texts(), complete=outcomes.complete)


@api_router.post("/check-port", response_model=CheckReport)
def check_port(request: CheckPortRequest) -> CheckReport:
    """Check a port, or two machines, on a corpus."""
    source, target = get_machine(request.source), get_machine(request.target)
    corpus = parse_corpus("\n\n".join(request.corpus))
    if request.mode == "equivalence":
        report = check_equivalence(source, target, corpus, request.budget)
    elif request.mode == "kbs-equivalence":
        report = check_equivalence_kbs(source, target, corpus, request.budget)
    else:
        if request.rewrites is not None:
            port = rewrite_port(parse_rewrite_table(request.rewrites), source, target)
        else:
            port = get_port(request.port or "", source, target)
        if request.mode == "kbs":
            report = check_consistency_kbs(port, corpus, request.budget)
        elif request.mode == "completeness":
            report = check_completeness(port, corpus, request.budget)
        else:
            report = check_consistency_conventional(port, corpus, request.budget)
    metrics.record_check(report.check, report.verdict.value)
    return report


@api_router.post("/infer", response_model=InferResponse)
def run_inference(request: InferRequest) -> InferResponse:
    """Run the inference engine on a rule file."""
    system = parse_rule_file(request.rules)
    result = infer(system.rules, system.goal, system.start, _search_budget(request))
    metrics.record_inference(result.complete)
    return InferResponse(
        outcomes=result.sorted_outcomes(), complete=result.complete, dead_ends=result.dead_ends
    )


@api_router.get("/machines", response_model=list[MachineInfo])
def list_machines() -> list[MachineInfo]:
    return [
        MachineInfo(
            name=m.name,
            features=sorted(f.value for f in m.features),
            primitives=sorted(m.primitives),
        )
        for m in MACHINES.values()
    ]


@api_router.get("/ports", response_model=list[PortInfo])
def list_ports() -> list[PortInfo]:
    return [PortInfo(name=name, description=text) for name, text in port_names().items()]
