"""Ports between machines and the checks that certify them on a corpus.

A port is a program translation plus an outcome translation. For
conventional programs a port is consistent when translating the source
outcome gives the target outcome (both sides undefined also agrees). For
KBS programs the target's outcome set must be a subset of the translated
source outcome set; a port is complete when the translations are total and
the sets are equal. Every verdict is relative to the corpus it ran on.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from kbsm.constants import Verdict
from kbsm.errors import FormatError, TermSyntaxError, TranslationUndefined, UnknownPort, WorkbenchError
from kbsm.logging_conf import EvaluationLogger
from kbsm.machine import (
    Diverged,
    EvalResult,
    Halted,
    MachineDef,
    Outcome,
    Stuck,
    Value,
    outcome_key,
    readback,
    render_outcome,
    run,
)
from kbsm.ndmachine import OutcomeSet, SearchBudget, eval_nd
from kbsm.oracle import normalize
from kbsm.rewrite import RewriteTable, rewrite_fixpoint
from kbsm.schemas import CheckEntry, CheckReport
from kbsm.settings import get_settings
from kbsm.syntax import (
    App,
    Expr,
    Fail,
    IntLit,
    Lam,
    Or,
    PExpr,
    Prim,
    Term,
    Var,
    canonical_text,
    fill,
    hole_count,
    is_conventional,
    map_children,
    parse,
    parse_program,
    render,
)

evaluation_logger = EvaluationLogger("ports")


# --- translations and ports ------------------------------------------------------------


@dataclass(frozen=True)
class ProgramTranslation:
    """Translation of programs; raises TranslationUndefined where partial.

    Holes are opaque leaves, so translations also apply to parameterised
    programs.
    """

    name: str
    fn: Callable[[PExpr], PExpr]

    def __call__(self, term: PExpr) -> PExpr:
        return self.fn(term)


@dataclass(frozen=True)
class OutcomeTranslation:
    name: str
    fn: Callable[[Outcome], Outcome]

    def __call__(self, value: Outcome) -> Outcome:
        return self.fn(value)


@dataclass(frozen=True)
class Port:
    name: str
    source: MachineDef
    target: MachineDef
    program_t: ProgramTranslation
    outcome_t: OutcomeTranslation
    # Compare outcomes by the normal form of their readback instead of the readback.
    extensional: bool = False

    @property
    def subject(self) -> str:
        return f"port {self.name} ({self.source.name} -> {self.target.name})"


def bottom_up(name: str, node_fn: Callable[[Term], Term]) -> ProgramTranslation:
    """Translation applying `node_fn` to every node after its children."""

    def translate(term: Term) -> Term:
        return node_fn(map_children(term, translate))

    return ProgramTranslation(name, translate)


def _left_commit(term: Term) -> Term:
    return term.left if isinstance(term, Or) else term


def _right_commit(term: Term) -> Term:
    return term.right if isinstance(term, Or) else term


def _eliminate_fail(term: Term) -> Term:
    match term:
        case Or(Fail(), other) | Or(other, Fail()):
            return other
    return term


def _fail_to_99(term: Term) -> Term:
    return IntLit(99) if isinstance(term, Fail) else term


def church_numeral(n: int) -> Expr:
    body: Expr = Var("x")
    for _ in range(n):
        body = App(Var("f"), body)
    return Lam("f", Lam("x", body))


CHURCH_ADD = parse(r"\m. \n. \f. \x. m f (n f x)")
CHURCH_MUL = parse(r"\m. \n. \f. m (n f)")


def _church_encode(term: Term) -> Term:
    match term:
        case IntLit(value):
            if value < 0:
                raise TranslationUndefined("church", f"negative literal {value}")
            return church_numeral(value)
        case Prim("add"):
            return CHURCH_ADD
        case Prim("mul"):
            return CHURCH_MUL
        case Prim(op):
            raise TranslationUndefined("church", f"primitive {op} has no encoding")
    return term


IDENTITY = ProgramTranslation("identity", lambda term: term)
LEFT_COMMIT = bottom_up("left-commit", _left_commit)
RIGHT_COMMIT = bottom_up("right-commit", _right_commit)
FAIL_ELIMINATION = bottom_up("fail-elimination", _eliminate_fail)
FAIL_TO_99 = bottom_up("fail-to-99", _fail_to_99)
CHURCH = bottom_up("church", _church_encode)

IDENTITY_OUTCOME = OutcomeTranslation("identity", lambda value: value)


def church_outcome(target: MachineDef, budget: int | None = None) -> OutcomeTranslation:
    """Encode a source outcome and evaluate the encoding on `target`."""
    steps = budget or get_settings().eval_budget

    def translate(value: Outcome) -> Outcome:
        result = run(target, CHURCH(readback(value)), steps)
        if not isinstance(result, Value):
            raise TranslationUndefined("church", f"encoded outcome did not evaluate ({type(result).__name__})")
        return result.value

    return OutcomeTranslation("church", translate)


_PORT_DESCRIPTIONS = {
    "identity": "programs and outcomes unchanged",
    "left-commit": "every `a or b` becomes `a`",
    "right-commit": "every `a or b` becomes `b`",
    "fail-elimination": "`fail or k` and `k or fail` become `k`",
    "fail-to-99": "every `fail` becomes the literal 99",
    "church": "integers and add/mul become Church encodings (arith -> base)",
}

_SIMPLE_TRANSLATIONS = {
    "identity": IDENTITY,
    "left-commit": LEFT_COMMIT,
    "right-commit": RIGHT_COMMIT,
    "fail-elimination": FAIL_ELIMINATION,
    "fail-to-99": FAIL_TO_99,
}


def port_names() -> dict[str, str]:
    return dict(_PORT_DESCRIPTIONS)


def get_port(name: str, source: MachineDef, target: MachineDef) -> Port:
    """Instantiate a built-in port between two machines."""
    if name == "church":
        return Port(name, source, target, CHURCH, church_outcome(target), extensional=True)
    translation = _SIMPLE_TRANSLATIONS.get(name)
    if translation is None:
        raise UnknownPort(name, sorted(_PORT_DESCRIPTIONS))
    return Port(name, source, target, translation, IDENTITY_OUTCOME)


def rewrite_port(table: RewriteTable, source: MachineDef, target: MachineDef) -> Port:
    name = f"rewrite:{table.name}"
    translation = ProgramTranslation(name, lambda term: rewrite_fixpoint(term, table))
    return Port(name, source, target, translation, IDENTITY_OUTCOME)


def outcome_only_port(
    name: str, source: MachineDef, target: MachineDef, outcome_t: OutcomeTranslation
) -> Port:
    """Port translating outcomes only; programs run unchanged on the target."""
    return Port(name, source, target, IDENTITY, outcome_t)


def program_only_port(
    name: str, source: MachineDef, target: MachineDef, program_t: ProgramTranslation
) -> Port:
    """Port translating programs only; outcomes are compared as they are."""
    return Port(name, source, target, program_t, IDENTITY_OUTCOME)


# --- corpora ----------------------------------------------------------------------------


def parse_corpus(text: str) -> list[Expr]:
    """Programs of a corpus file.

    One program per line. A file whose programs are separated by blank
    lines, with at least one program spanning several lines, is read block
    by block instead. `#` starts a comment.
    """
    blocks: list[list[str]] = [[]]
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            blocks[-1].append(line)
        elif not raw.strip() and blocks[-1]:
            blocks.append([])
    blocks = [block for block in blocks if block]
    if len(blocks) > 1 and any(len(block) > 1 for block in blocks):
        sources = ["\n".join(block) for block in blocks]
    else:
        sources = [line for block in blocks for line in block]

    programs = []
    for index, source in enumerate(sources):
        try:
            programs.append(parse_program(source))
        except TermSyntaxError as e:
            raise FormatError(f"corpus item {index + 1}", e.message) from e
    return programs


def load_corpus(path: str | Path) -> list[Expr]:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


# --- checks -----------------------------------------------------------------------------

ItemKind = Literal["pass", "undefined-both", "fail", "inconclusive", "undefined", "lost"]


@dataclass(frozen=True)
class _ItemResult:
    kind: ItemKind
    entry: CheckEntry | None = None
    budget_note: str | None = None


class _Inconclusive(Exception):
    pass


def _map_items(fn: Callable[[int, Expr], _ItemResult], corpus: Sequence[Expr]) -> list[_ItemResult]:
    workers = get_settings().check_workers
    if workers <= 1 or len(corpus) <= 1:
        return [fn(index, program) for index, program in enumerate(corpus)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(corpus)), corpus))


def _assemble(
    check: str,
    subject: str,
    mode: Literal["conventional", "kbs", "homomorphism"],
    results: Iterable[_ItemResult],
    equivalence: bool = False,
) -> CheckReport:
    passed = undefined_both = corpus_size = 0
    failed: list[CheckEntry] = []
    inconclusive: list[CheckEntry] = []
    undefined: list[CheckEntry] = []
    lost: list[CheckEntry] = []
    notes: list[str] = []
    for result in results:
        corpus_size += 1
        if result.budget_note:
            notes.append(result.budget_note)
        match result.kind:
            case "pass":
                passed += 1
            case "undefined-both":
                passed += 1
                undefined_both += 1
            case "lost":
                passed += 1
                lost.append(result.entry)  # type: ignore[arg-type]
            case "fail":
                failed.append(result.entry)  # type: ignore[arg-type]
            case "inconclusive":
                inconclusive.append(result.entry)  # type: ignore[arg-type]
            case "undefined":
                undefined.append(result.entry)  # type: ignore[arg-type]

    if equivalence:
        complete = not inconclusive
    else:
        complete = not (inconclusive or undefined or lost)
    if failed:
        verdict = Verdict.INCONSISTENT
    elif equivalence:
        verdict = Verdict.EQUIVALENT
    elif complete:
        verdict = Verdict.CONSISTENT_AND_COMPLETE
    else:
        verdict = Verdict.CONSISTENT

    report = CheckReport(
        check=check,
        subject=subject,
        mode=mode,
        corpus_size=corpus_size,
        passed=passed,
        failed=failed,
        undefined_both=undefined_both,
        inconclusive=inconclusive,
        translation_undefined=undefined,
        lost_outcomes=lost,
        verdict=verdict,
        complete=complete,
        budget_notes=notes,
    )
    evaluation_logger.log_check(check, subject, verdict.value, corpus_size)
    return report


def describe_result(result: EvalResult) -> str:
    match result:
        case Value(value):
            return render_outcome(value)
        case Halted(value):
            return f"HALTED: {render_outcome(value)}"
        case Stuck(reason=reason):
            return f"STUCK: {reason}"
        case Diverged(steps_used):
            return f"DIVERGED({steps_used})"
    raise TypeError(result)


def _key(value: Outcome, extensional: bool) -> str:
    if not extensional:
        return outcome_key(value)
    normal = normalize(readback(value), get_settings().normalize_budget)
    if normal is None:
        raise _Inconclusive(f"no normal form for {render_outcome(value)} within budget")
    return canonical_text(normal)


def _set_text(values: Iterable[Outcome], stuck: bool = False) -> str:
    texts = sorted(render_outcome(v) for v in values)
    if stuck:
        texts.append("STUCK")
    return "{" + ", ".join(texts) + "}"


def _compare_runs(
    index: int,
    program: Expr,
    left: EvalResult,
    right: EvalResult,
    translate: Callable[[Outcome], Outcome],
    extensional: bool,
) -> _ItemResult:
    """Compare two deterministic runs under the 'equal when defined' relation.

    Values and halts are both defined results and compare by their outcome;
    stuck runs are undefined; a divergence leaves the item undecided.
    """
    text = render(program)
    if isinstance(left, Diverged) or isinstance(right, Diverged):
        entry = CheckEntry(
            index=index, program=text, expected=describe_result(left),
            actual=describe_result(right), note="budget exhausted",
        )
        return _ItemResult("inconclusive", entry, f"item {index + 1}: evaluation diverged within budget")

    left_defined = isinstance(left, Value | Halted)
    right_defined = isinstance(right, Value | Halted)
    if not left_defined and not right_defined:
        return _ItemResult("undefined-both")

    expected_text = describe_result(left)
    entry = CheckEntry(index=index, program=text, expected=expected_text, actual=describe_result(right))
    if left_defined != right_defined:
        return _ItemResult("fail", entry.model_copy(update={"note": "defined on one side only"}))

    try:
        expected = translate(left.value)  # type: ignore[union-attr]
    except TranslationUndefined as e:
        return _ItemResult("undefined", entry.model_copy(update={"note": e.reason}))
    try:
        same = _key(expected, extensional) == _key(right.value, extensional)  # type: ignore[union-attr]
    except _Inconclusive as e:
        return _ItemResult("inconclusive", entry.model_copy(update={"note": str(e)}))
    if same:
        return _ItemResult("pass")
    entry = entry.model_copy(update={"expected": render_outcome(expected), "note": "outcomes differ"})
    return _ItemResult("fail", entry)


def _eval_budget(budget: int | None) -> int:
    return budget or get_settings().eval_budget


def _search_budget(budget: SearchBudget | int | None) -> SearchBudget:
    if isinstance(budget, SearchBudget):
        return budget
    return SearchBudget.from_settings(max_total_steps=budget)


def check_equivalence(
    m1: MachineDef, m2: MachineDef, corpus: Sequence[Expr], budget: int | None = None
) -> CheckReport:
    """Do two machines agree on every conventional corpus program?"""
    steps = _eval_budget(budget)

    def check_item(index: int, program: Expr) -> _ItemResult:
        return _compare_runs(
            index, program, run(m1, program, steps), run(m2, program, steps),
            lambda value: value, extensional=False,
        )

    return _assemble(
        "equivalence", f"machines {m1.name} and {m2.name}", "conventional",
        _map_items(check_item, corpus), equivalence=True,
    )


def check_consistency_conventional(
    port: Port, corpus: Sequence[Expr], budget: int | None = None
) -> CheckReport:
    """Translated source outcomes against target outcomes of translated programs."""
    steps = _eval_budget(budget)

    def check_item(index: int, program: Expr) -> _ItemResult:
        try:
            translated = port.program_t(program)
        except TranslationUndefined as e:
            entry = CheckEntry(index=index, program=render(program), note=e.reason)
            return _ItemResult("undefined", entry)
        return _compare_runs(
            index, program, run(port.source, program, steps),
            run(port.target, translated, steps), port.outcome_t, port.extensional,
        )

    return _assemble("consistency", port.subject, "conventional", _map_items(check_item, corpus))


_STUCK_KEY = "<stuck>"


def _truncation_note(index: int, side: str, outcomes: OutcomeSet) -> str:
    d = outcomes.diagnostics
    return (
        f"item {index + 1}: {side} enumeration truncated "
        f"(pruned={d.pruned} stuck={d.stuck} truncated={d.truncated})"
    )


def _compare_sets(
    index: int,
    program: Expr,
    left: OutcomeSet,
    right: OutcomeSet,
    translate: Callable[[Outcome], Outcome],
    extensional: bool,
    require_equal: bool,
) -> _ItemResult:
    text = render(program)
    notes = [
        _truncation_note(index, side, outcomes)
        for side, outcomes in (("source", left), ("target", right))
        if not outcomes.complete
    ]
    if notes:
        entry = CheckEntry(
            index=index, program=text, expected=_set_text(left.values),
            actual=_set_text(right.values), note="enumeration incomplete",
        )
        return _ItemResult("inconclusive", entry, "; ".join(notes))

    image: dict[str, Outcome] = {}
    undefined_reason = None
    try:
        for value in left.values:
            try:
                translated = translate(value)
            except TranslationUndefined as e:
                undefined_reason = e.reason
                continue
            image.setdefault(_key(translated, extensional), translated)
        target_keys = {_key(value, extensional) for value in right.values}
    except _Inconclusive as e:
        entry = CheckEntry(index=index, program=text, note=str(e))
        return _ItemResult("inconclusive", entry)

    # A stuck branch is observable: it takes part in the comparison as one more outcome.
    source_stuck = left.diagnostics.stuck > 0
    target_stuck = right.diagnostics.stuck > 0
    image_keys = set(image) | ({_STUCK_KEY} if source_stuck else set())
    if target_stuck:
        target_keys.add(_STUCK_KEY)

    entry = CheckEntry(
        index=index, program=text, expected=_set_text(image.values(), source_stuck),
        actual=_set_text(right.values, target_stuck),
    )
    if require_equal:
        if target_keys == image_keys:
            return _ItemResult("pass")
        return _ItemResult("fail", entry.model_copy(update={"note": "outcome sets differ"}))
    if target_stuck and not source_stuck:
        return _ItemResult("fail", entry.model_copy(update={"note": "target gets stuck where the source does not"}))
    if undefined_reason is not None:
        return _ItemResult("undefined", entry.model_copy(update={"note": undefined_reason}))
    if not target_keys <= image_keys:
        return _ItemResult("fail", entry.model_copy(update={"note": "target gains outcomes"}))
    if target_keys != image_keys:
        return _ItemResult("lost", entry.model_copy(update={"note": "target loses outcomes"}))
    return _ItemResult("pass")


def check_consistency_kbs(
    port: Port, corpus: Sequence[Expr], budget: SearchBudget | int | None = None
) -> CheckReport:
    """Target outcome sets must be subsets of the translated source outcome sets."""
    search = _search_budget(budget)

    def check_item(index: int, program: Expr) -> _ItemResult:
        try:
            translated = port.program_t(program)
        except TranslationUndefined as e:
            entry = CheckEntry(index=index, program=render(program), note=e.reason)
            return _ItemResult("undefined", entry)
        return _compare_sets(
            index, program, eval_nd(port.source, program, search),
            eval_nd(port.target, translated, search), port.outcome_t,
            port.extensional, require_equal=False,
        )

    return _assemble("consistency", port.subject, "kbs", _map_items(check_item, corpus))


def check_equivalence_kbs(
    m1: MachineDef, m2: MachineDef, corpus: Sequence[Expr], budget: SearchBudget | int | None = None
) -> CheckReport:
    """Do two non-deterministic machines give equal outcome sets?"""
    search = _search_budget(budget)

    def check_item(index: int, program: Expr) -> _ItemResult:
        return _compare_sets(
            index, program, eval_nd(m1, program, search), eval_nd(m2, program, search),
            lambda value: value, extensional=False, require_equal=True,
        )

    return _assemble(
        "equivalence", f"machines {m1.name} and {m2.name}", "kbs",
        _map_items(check_item, corpus), equivalence=True,
    )


def check_completeness(
    port: Port,
    corpus: Sequence[Expr],
    budget: SearchBudget | int | None = None,
    mode: Literal["conventional", "kbs"] | None = None,
) -> CheckReport:
    """Consistency plus total translations (and equal outcome sets for KBS).

    The mode is KBS when any corpus program uses `or` or `fail`, unless given.
    """
    if mode is None:
        mode = "conventional" if all(is_conventional(p) for p in corpus) else "kbs"
    if mode == "kbs":
        report = check_consistency_kbs(port, corpus, budget)
    else:
        steps = budget.max_total_steps if isinstance(budget, SearchBudget) else budget
        report = check_consistency_conventional(port, corpus, steps)
    return report.model_copy(update={"check": "completeness"})


def check_homomorphism(
    t: ProgramTranslation, contexts: Sequence[PExpr], fillers: Sequence[Expr]
) -> CheckReport:
    """Does translating a filled context equal filling the translated context?"""
    results = []
    index = 0
    for context in contexts:
        if hole_count(context) != 1:
            raise WorkbenchError(
                f"context {render(context)} must have exactly one hole",
                error_code="INVALID_CONTEXT",
            )
        for filler in fillers:
            text = f"{render(context)} <- {render(filler)}"
            try:
                whole = t(fill(context, filler))
                parts = fill(t(context), t(filler))
            except TranslationUndefined as e:
                results.append(_ItemResult("undefined", CheckEntry(index=index, program=text, note=e.reason)))
            else:
                if whole == parts:
                    results.append(_ItemResult("pass"))
                else:
                    entry = CheckEntry(
                        index=index, program=text, expected=render(parts), actual=render(whole),
                        note="translation is not compositional here",
                    )
                    results.append(_ItemResult("fail", entry))
            index += 1
    return _assemble("homomorphism", f"translation {t.name}", "homomorphism", results)

