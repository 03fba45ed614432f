"""Tests for ports, corpora and the equivalence, consistency and completeness checks."""

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from kbsm.constants import Verdict
from kbsm.errors import FormatError, TranslationUndefined, UnknownPort, WorkbenchError
from kbsm.machine import Diverged, Halted, IntVal, Stuck, Value, get_machine, readback
from kbsm.ndmachine import SearchBudget
from kbsm.oracle import normalize
from kbsm.ports import (
    CHURCH,
    FAIL_TO_99,
    IDENTITY,
    IDENTITY_OUTCOME,
    LEFT_COMMIT,
    OutcomeTranslation,
    Port,
    ProgramTranslation,
    bottom_up,
    check_completeness,
    check_consistency_conventional,
    check_consistency_kbs,
    check_equivalence,
    check_equivalence_kbs,
    check_homomorphism,
    church_numeral,
    church_outcome,
    describe_result,
    get_port,
    parse_corpus,
    port_names,
    outcome_only_port,
    program_only_port,
    rewrite_port,
)
from kbsm.rewrite import parse_rewrite_table
from kbsm.settings import get_settings
from kbsm.syntax import App, Hole, IntLit, Lam, Prim, Var, alpha_eq, parse, size
from tests.strategies import conventional_terms, kbs_terms, one_hole_contexts

ARITH = get_machine("arith")
BASE = get_machine("base")

LOSSY_CORPUS = ["1 or 2", "fail or 3", "add (1 or 2) 10"]

CHURCH_CORPUS = [
    "0",
    "1",
    "5",
    "add 1 2",
    "add 0 0",
    "add 4 3",
    "mul 2 3",
    "mul 0 7",
    "mul 1 6",
    "mul 3 4",
    "add (mul 2 2) 3",
    "mul (add 1 1) (add 2 1)",
    "add (add 1 1) (add 1 1)",
    "mul 2 (mul 2 2)",
    r"(\x. add x x) 3",
    r"(\x. mul x x) 3",
    r"(\f. f 2) (add 5)",
    r"(\x. \y. add x y) 2 7",
    r"(\n. mul n (add n 1)) 2",
    r"(\g. g (g 1)) (mul 3)",
]


def corpus(*programs: str):
    return [parse(p) for p in programs]


@pytest.mark.unit
class TestCorpus:
    def test_one_program_per_line(self):
        text = "# arithmetic\n1\n\nadd 1 2  # three\n"
        assert parse_corpus(text) == corpus("1", "add 1 2")

    def test_lines_without_blank_separators(self):
        assert parse_corpus("1 or 2\nfail or 3\nadd (1 or 2) 10\n") == corpus(*LOSSY_CORPUS)

    def test_blank_separated_single_lines(self):
        assert parse_corpus("add 1 2\n\n1\n") == corpus("add 1 2", "1")

    def test_blocks(self):
        text = "add 1\n  2\n\n# next\nmul 3\n  4\n"
        assert parse_corpus(text) == corpus("add 1 2", "mul 3 4")

    def test_errors_name_the_item(self):
        with pytest.raises(FormatError) as exc_info:
            parse_corpus("1\n(2 or\n")
        assert "corpus item 2" in exc_info.value.message

    def test_holes_are_rejected(self):
        with pytest.raises(WorkbenchError):
            parse_corpus("f _\n")


@pytest.mark.unit
class TestPorts:
    def test_port_names(self):
        assert set(port_names()) == {"identity", "left-commit", "right-commit", "fail-elimination", "fail-to-99", "church"}

    def test_unknown_port(self):
        with pytest.raises(UnknownPort):
            get_port("teleport", ARITH, ARITH)

    def test_subject(self):
        assert get_port("church", ARITH, BASE).subject == "port church (arith -> base)"

    def test_church_encoding(self):
        assert CHURCH(IntLit(2)) == church_numeral(2)
        assert church_numeral(0) == Lam("f", Lam("x", Var("x")))
        with pytest.raises(TranslationUndefined):
            CHURCH(parse("add -1 2"))
        with pytest.raises(TranslationUndefined):
            CHURCH(parse("halt 1"))

    def test_church_outcome_evaluates_on_the_target(self):
        value = church_outcome(BASE)(IntVal(2))
        assert alpha_eq(normalize(readback(value), 100), church_numeral(2))

    def test_describe_result(self):
        assert describe_result(Value(IntVal(3))) == "3"
        assert describe_result(Stuck(None, "unbound variable x")) == "STUCK: unbound variable x"
        assert describe_result(Diverged(10)) == "DIVERGED(10)"
        assert describe_result(Halted(IntVal(1))) == "HALTED: 1"


@pytest.mark.unit
class TestEquivalence:
    def test_reflexive(self):
        report = check_equivalence(BASE, BASE, corpus(r"(\x. x) (\y. y)", "x"))
        assert report.verdict == Verdict.EQUIVALENT
        assert report.undefined_both == 1

    def test_missing_primitive_is_detected(self):
        report = check_equivalence(ARITH, BASE, corpus("add 1 2"))
        assert report.verdict == Verdict.INCONSISTENT
        assert report.failed[0].expected == "3"
        assert report.failed[0].actual.startswith("STUCK")

    def test_symmetric(self):
        programs = corpus("add 1 2", r"\x. x", "1")
        forward = check_equivalence(ARITH, BASE, programs)
        backward = check_equivalence(BASE, ARITH, programs)
        assert forward.verdict == backward.verdict

    def test_empty_corpus(self):
        report = check_equivalence(ARITH, BASE, [])
        assert report.verdict == Verdict.EQUIVALENT
        assert report.corpus_size == 0

    def test_kbs_equivalence(self):
        report = check_equivalence_kbs(ARITH, ARITH, corpus("1 or 2", "fail"))
        assert report.verdict == Verdict.EQUIVALENT
        assert report.mode == "kbs"


@pytest.mark.unit
class TestConventionalConsistency:
    def test_identity(self):
        report = check_consistency_conventional(get_port("identity", ARITH, ARITH), corpus("add 1 2", r"\x. x"))
        assert report.verdict == Verdict.CONSISTENT_AND_COMPLETE
        assert report.passed == 2

    def test_constant_port_is_inconsistent(self):
        port = program_only_port("zero", ARITH, ARITH, ProgramTranslation("zero", lambda term: IntLit(0)))
        report = check_consistency_conventional(port, corpus("add 1 2"))
        assert report.verdict == Verdict.INCONSISTENT
        assert report.failed[0].expected == "3"
        assert report.failed[0].actual == "0"

    def test_outcome_only_port(self):
        shift = OutcomeTranslation("shift", lambda value: IntVal(value.value + 1))
        report = check_consistency_conventional(outcome_only_port("shift", ARITH, ARITH, shift), corpus("add 1 2"))
        assert report.verdict == Verdict.INCONSISTENT
        assert report.failed[0].expected == "4"

    def test_church_port_on_arithmetic(self):
        port = get_port("church", ARITH, BASE)
        report = check_consistency_conventional(port, corpus(*CHURCH_CORPUS), 100_000)
        assert report.corpus_size == 20
        assert report.passed == 20
        assert report.verdict == Verdict.CONSISTENT_AND_COMPLETE

    def test_undefined_translation_is_not_complete(self):
        report = check_consistency_conventional(get_port("church", ARITH, BASE), corpus("add -1 2", "1"))
        assert report.verdict == Verdict.CONSISTENT
        assert not report.complete
        assert report.translation_undefined[0].note == "negative literal -1"

    def test_divergence_is_inconclusive(self):
        report = check_consistency_conventional(
            get_port("identity", BASE, BASE), corpus(r"(\x. x x) (\x. x x)"), budget=100
        )
        assert report.verdict == Verdict.CONSISTENT
        assert len(report.inconclusive) == 1
        assert report.budget_notes

    def test_both_undefined_agree(self):
        report = check_consistency_conventional(get_port("identity", ARITH, ARITH), corpus("x"))
        assert report.passed == 1
        assert report.undefined_both == 1

    def test_parallel_items_give_the_same_report(self, fresh_settings):
        programs = corpus(*CHURCH_CORPUS[:8])
        port = get_port("church", ARITH, BASE)
        sequential = check_consistency_conventional(port, programs)
        fresh_settings.setenv("KBSM_CHECK_WORKERS", "4")
        get_settings.cache_clear()
        assert check_consistency_conventional(port, programs) == sequential


@pytest.mark.unit
class TestKbsConsistency:
    def test_identity(self):
        report = check_consistency_kbs(get_port("identity", ARITH, ARITH), corpus(*LOSSY_CORPUS))
        assert report.verdict == Verdict.CONSISTENT_AND_COMPLETE

    def test_left_commit_loses_outcomes(self):
        report = check_consistency_kbs(get_port("left-commit", ARITH, ARITH), corpus(*LOSSY_CORPUS))
        assert report.verdict == Verdict.CONSISTENT
        assert not report.complete
        assert [e.index for e in report.lost_outcomes] == [0, 1, 2]
        assert report.lost_outcomes[0].expected == "{1, 2}"
        assert report.lost_outcomes[0].actual == "{1}"

    def test_fail_to_99_gains_outcomes(self):
        report = check_consistency_kbs(get_port("fail-to-99", ARITH, ARITH), corpus("fail or 1"))
        assert report.verdict == Verdict.INCONSISTENT
        assert report.failed[0].actual == "{1, 99}"

    def test_fail_elimination_is_complete(self):
        report = check_consistency_kbs(get_port("fail-elimination", ARITH, ARITH), corpus("fail or 3", "1 or fail"))
        assert report.verdict == Verdict.CONSISTENT_AND_COMPLETE

    def test_truncated_enumeration_is_inconclusive(self):
        budget = SearchBudget(max_total_steps=3)
        report = check_consistency_kbs(get_port("identity", ARITH, ARITH), corpus("add (1 or 2) 3"), budget)
        assert len(report.inconclusive) == 1
        assert report.verdict == Verdict.CONSISTENT
        assert "truncated" in report.budget_notes[0]

    def test_rewrite_port_matches_builtin(self):
        table = parse_rewrite_table("$1 or $2 => $1", name="commit")
        port = rewrite_port(table, ARITH, ARITH)
        assert port.name == "rewrite:commit"
        report = check_consistency_kbs(port, corpus(*LOSSY_CORPUS))
        builtin = check_consistency_kbs(get_port("left-commit", ARITH, ARITH), corpus(*LOSSY_CORPUS))
        assert report.verdict == builtin.verdict
        assert report.lost_outcomes == builtin.lost_outcomes

    def test_stuck_branches_take_part_in_the_comparison(self):
        report = check_consistency_kbs(get_port("left-commit", ARITH, ARITH), corpus("x or 1"))
        assert report.verdict == Verdict.CONSISTENT
        assert report.lost_outcomes[0].expected == "{1, STUCK}"
        assert report.lost_outcomes[0].actual == "{STUCK}"


def _integers_only(value):
    if not isinstance(value, IntVal):
        raise TranslationUndefined("integers-only", "not an integer")
    return value


def _drop_halt(term):
    match term:
        case App(Prim("halt"), arg):
            return arg
    return term


PROGRAM_TRANSLATIONS = (
    IDENTITY,
    LEFT_COMMIT,
    FAIL_TO_99,
    ProgramTranslation("to-x", lambda term: Var("x")),
    ProgramTranslation("to-zero", lambda term: IntLit(0)),
    ProgramTranslation("halt-wrap", lambda term: App(Prim("halt"), term)),
    ProgramTranslation("apply-to-1", lambda term: App(term, IntLit(1))),
    bottom_up("drop-halt", _drop_halt),
)
OUTCOME_TRANSLATIONS = (
    IDENTITY_OUTCOME,
    OutcomeTranslation("integers-only", _integers_only),
    OutcomeTranslation("increment", lambda v: IntVal(v.value + 1) if isinstance(v, IntVal) else v),
)


@st.composite
def generated_ports(draw):
    return Port(
        "generated",
        ARITH,
        draw(st.sampled_from([ARITH, BASE])),
        draw(st.sampled_from(PROGRAM_TRANSLATIONS)),
        draw(st.sampled_from(OUTCOME_TRANSLATIONS)),
    )


@pytest.mark.unit
class TestCoherence:
    """On conventional corpora both consistency checks reach the same verdict."""

    @pytest.mark.parametrize("name", ["identity", "left-commit"])
    def test_builtin_ports(self, name):
        port = get_port(name, ARITH, ARITH)
        programs = corpus("add 1 2", r"(\x. x) 4", "x")
        assert check_consistency_kbs(port, programs).verdict == check_consistency_conventional(port, programs).verdict

    def test_target_stuck_is_inconsistent_in_both(self):
        port = program_only_port("to-x", ARITH, ARITH, ProgramTranslation("to-x", lambda term: Var("x")))
        programs = corpus("1")
        conventional = check_consistency_conventional(port, programs)
        kbs = check_consistency_kbs(port, programs)
        assert conventional.verdict == kbs.verdict == Verdict.INCONSISTENT
        assert kbs.failed[0].note == "target gets stuck where the source does not"

    def test_halt_and_value_compare_by_outcome(self):
        port = program_only_port("drop-halt", ARITH, ARITH, bottom_up("drop-halt", _drop_halt))
        programs = corpus("halt 3")
        assert check_consistency_conventional(port, programs).verdict == Verdict.CONSISTENT_AND_COMPLETE
        assert check_consistency_kbs(port, programs).verdict == Verdict.CONSISTENT_AND_COMPLETE

    def test_partial_outcome_translation_is_undefined_in_both(self):
        port = outcome_only_port("integers-only", ARITH, ARITH, OutcomeTranslation("integers-only", _integers_only))
        programs = corpus(r"\x. x")
        conventional = check_consistency_conventional(port, programs)
        kbs = check_consistency_kbs(port, programs)
        assert conventional.verdict == kbs.verdict == Verdict.CONSISTENT
        assert len(conventional.translation_undefined) == len(kbs.translation_undefined) == 1

    @pytest.mark.property
    @settings(
        max_examples=200,
        deadline=None,
        suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
    )
    @given(generated_ports(), st.lists(conventional_terms(max_size=12), min_size=1, max_size=4))
    def test_generated_ports_and_corpora(self, port, programs):
        conventional = check_consistency_conventional(port, programs, budget=2_000)
        kbs = check_consistency_kbs(port, programs, SearchBudget(max_total_steps=2_000, max_depth=2_000))
        assume(not conventional.inconclusive and not kbs.inconclusive)
        assert conventional.verdict == kbs.verdict
        assert conventional.complete == kbs.complete
        assert [e.index for e in conventional.failed] == [e.index for e in kbs.failed]


@pytest.mark.unit
class TestCompleteness:
    def test_identity(self):
        report = check_completeness(get_port("identity", ARITH, ARITH), corpus(*LOSSY_CORPUS))
        assert report.check == "completeness"
        assert report.verdict == Verdict.CONSISTENT_AND_COMPLETE

    def test_left_commit_is_not_complete(self):
        report = check_completeness(get_port("left-commit", ARITH, ARITH), corpus("1 or 2"))
        assert report.mode == "kbs"
        assert report.verdict == Verdict.CONSISTENT
        assert not report.complete

    def test_church_port_is_complete_on_arithmetic(self):
        report = check_completeness(get_port("church", ARITH, BASE), corpus(*CHURCH_CORPUS[:10]))
        assert report.mode == "conventional"
        assert report.verdict == Verdict.CONSISTENT_AND_COMPLETE

    def test_forced_mode(self):
        report = check_completeness(get_port("identity", ARITH, ARITH), corpus("1"), mode="kbs")
        assert report.mode == "kbs"


@pytest.mark.unit
class TestHomomorphism:
    def test_identity(self):
        report = check_homomorphism(IDENTITY, [App(Hole(), IntLit(1))], corpus("2 or 3", "x"))
        assert report.verdict == Verdict.CONSISTENT_AND_COMPLETE
        assert report.passed == 2
        assert (report.check, report.mode) == ("homomorphism", "homomorphism")

    def test_left_commit(self):
        report = check_homomorphism(LEFT_COMMIT, [App(Hole(), IntLit(1))], corpus("2 or 3"))
        assert report.failed == []
        assert report.passed == 1

    def test_size_dependent_translation_fails(self):
        by_size = ProgramTranslation("by-size", lambda term: IntLit(size(term)))
        report = check_homomorphism(by_size, [App(Hole(), IntLit(1))], corpus("2 or 3"))
        assert report.verdict == Verdict.INCONSISTENT
        assert report.failed[0].note == "translation is not compositional here"

    def test_contexts_need_exactly_one_hole(self):
        with pytest.raises(WorkbenchError) as exc_info:
            check_homomorphism(IDENTITY, [App(Hole(), Hole())], corpus("1"))
        assert exc_info.value.error_code == "INVALID_CONTEXT"

    @pytest.mark.property
    @settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(one_hole_contexts(), kbs_terms(max_size=10))
    def test_shipped_translations_are_compositional(self, context, filler):
        for translation in (IDENTITY, LEFT_COMMIT):
            assert check_homomorphism(translation, [context], [filler]).failed == []
