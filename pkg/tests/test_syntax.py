"""Tests for the term algebra, parser and parameterised programs."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kbsm.constants import Selector
from kbsm.errors import HoleNotAllowed, InvalidPath, NoHoles, TermSyntaxError
from kbsm.syntax import (
    App,
    Fail,
    Hole,
    IntLit,
    Lam,
    MetaVar,
    Or,
    Prim,
    Var,
    all_paths,
    alpha_eq,
    canonical_text,
    decompose,
    extend,
    fill,
    free_vars,
    hole_count,
    is_conventional,
    modify,
    parse,
    parse_path,
    parse_program,
    render,
    render_path,
    subterm_at,
    substitute,
)
from tests.strategies import conventional_terms, kbs_terms

I = Lam("x", Var("x"))


def rename_bound(term, suffix: str, scope: dict[str, str] | None = None):
    """`term` with every bound name suffixed; free names are kept."""
    scope = scope or {}
    match term:
        case Var(name):
            return Var(scope.get(name, name))
        case Lam(param, body):
            fresh = param + suffix
            return Lam(fresh, rename_bound(body, suffix, {**scope, param: fresh}))
        case App(fun, arg):
            return App(rename_bound(fun, suffix, scope), rename_bound(arg, suffix, scope))
        case Or(left, right):
            return Or(rename_bound(left, suffix, scope), rename_bound(right, suffix, scope))
    return term


@pytest.mark.unit
class TestParse:
    """Concrete syntax to terms."""

    def test_identity(self):
        assert parse(r"\x. x") == Lam("x", Var("x"))

    def test_or_binds_looser_than_application(self):
        assert parse(r"(\x. x) fail or 3") == Or(App(I, Fail()), IntLit(3))

    def test_curried_primitive(self):
        assert parse("add 1 2") == App(App(Prim("add"), IntLit(1)), IntLit(2))

    def test_or_is_left_associative(self):
        assert parse("1 or 2 or 3") == Or(Or(IntLit(1), IntLit(2)), IntLit(3))

    def test_lambda_body_extends_right(self):
        assert parse(r"\x. x or y") == Lam("x", Or(Var("x"), Var("y")))

    def test_single_tokens(self):
        assert parse("x") == Var("x")
        assert parse("42") == IntLit(42)
        assert parse("-3") == IntLit(-3)
        assert parse("fail") == Fail()
        assert parse("halt") == Prim("halt")

    def test_names_may_start_with_underscore(self):
        assert parse(r"\_a. _a") == Lam("_a", Var("_a"))

    def test_keyword_prefixes_are_names(self):
        assert parse("failure order") == App(Var("failure"), Var("order"))

    def test_comments_are_ignored(self):
        assert parse("1 # the answer\n") == IntLit(1)

    def test_holes_need_permission(self):
        with pytest.raises(HoleNotAllowed):
            parse("f _")
        assert parse("f _", allow_holes=True) == App(Var("f"), Hole())
        assert parse("_", allow_holes=True) == Hole()

    def test_parse_program_rejects_holes(self):
        with pytest.raises(HoleNotAllowed):
            parse_program("_")

    def test_metavariables_only_in_rewrite_tables(self):
        with pytest.raises(TermSyntaxError):
            parse("$1 or $2")
        assert parse("$1 or $2", allow_metavars=True) == Or(MetaVar(1), MetaVar(2))

    @pytest.mark.parametrize("text", ["", r"\x x", "(1 or", "1 or", "f )", r"\or. x", r"\add. 1"])
    def test_malformed_input(self, text):
        with pytest.raises(TermSyntaxError) as exc_info:
            parse(text)
        assert exc_info.value.error_code == "SYNTAX_ERROR"
        assert exc_info.value.exit_code == 2

    def test_syntax_error_reports_position(self):
        with pytest.raises(TermSyntaxError) as exc_info:
            parse("f\n  )")
        assert exc_info.value.line == 2


@pytest.mark.unit
class TestRender:
    def test_examples(self):
        assert render(Lam("x", Var("x"))) == r"\x. x"
        assert render(Or(Fail(), IntLit(3))) == "fail or 3"
        assert render(Hole()) == "_"

    def test_parenthesises_only_where_needed(self):
        assert render(App(I, Lam("y", Var("y")))) == r"(\x. x) (\y. y)"
        assert render(App(Var("f"), App(Var("g"), Var("x")))) == "f (g x)"
        assert render(Or(IntLit(1), Or(IntLit(2), IntLit(3)))) == "1 or (2 or 3)"
        assert render(App(Var("f"), Or(IntLit(1), IntLit(2)))) == "f (1 or 2)"

    @pytest.mark.property
    @given(kbs_terms())
    def test_parse_inverts_render(self, term):
        assert parse(render(term)) == term


@pytest.mark.unit
class TestStructure:
    def test_is_conventional(self):
        assert is_conventional(I)
        assert not is_conventional(Or(Var("x"), Var("y")))
        assert not is_conventional(Lam("x", Fail()))

    def test_hole_count(self):
        assert hole_count(Hole()) == 1
        assert hole_count(App(Hole(), Hole())) == 2
        assert hole_count(Var("x")) == 0

    def test_free_vars(self):
        assert free_vars(parse(r"\x. x y (\y. z)")) == {"y", "z"}


@pytest.mark.unit
class TestHoles:
    def test_fill_replaces_every_hole(self):
        assert fill(App(Hole(), Hole()), Var("x")) == App(Var("x"), Var("x"))

    def test_fill_without_holes(self):
        assert fill(Lam("y", Var("y")), IntLit(5)) == Lam("y", Var("y"))

    def test_fill_captures(self):
        assert fill(Lam("x", Hole()), Var("x")) == Lam("x", Var("x"))

    def test_extend(self):
        assert extend(App(I, Hole()), IntLit(3)) == App(I, IntLit(3))
        assert extend(Hole(), parse("1 or 2")) == parse("1 or 2")
        assert extend(Or(Hole(), Hole()), IntLit(1)) == Or(IntLit(1), IntLit(1))

    def test_extend_needs_a_hole(self):
        with pytest.raises(NoHoles):
            extend(Var("x"), IntLit(1))


@pytest.mark.unit
class TestPaths:
    def test_parse_and_render_path(self):
        path = parse_path("lam-body, app-fun")
        assert path == (Selector.LAM_BODY, Selector.APP_FUN)
        assert render_path(path) == "lam-body,app-fun"
        assert parse_path("") == ()

    def test_unknown_selector(self):
        with pytest.raises(InvalidPath):
            parse_path("lam-head")

    def test_decompose(self):
        assert decompose(App(Var("f"), Var("x")), (Selector.APP_ARG,)) == (App(Var("f"), Hole()), Var("x"))
        assert decompose(Var("x"), ()) == (Hole(), Var("x"))
        term = Lam("x", App(Var("x"), Var("x")))
        context, sub = decompose(term, (Selector.LAM_BODY, Selector.APP_FUN))
        assert context == Lam("x", App(Hole(), Var("x")))
        assert sub == Var("x")
        assert fill(context, sub) == term

    def test_modify(self):
        assert modify(App(Var("f"), Var("x")), (Selector.APP_ARG,), Lam("y", Var("y"))) == App(Var("f"), Lam("y", Var("y")))
        assert modify(Or(Fail(), IntLit(1)), (Selector.OR_LEFT,), IntLit(2)) == Or(IntLit(2), IntLit(1))

    def test_path_must_match_shape(self):
        with pytest.raises(InvalidPath):
            subterm_at(Var("x"), (Selector.LAM_BODY,))
        with pytest.raises(InvalidPath):
            modify(App(Var("f"), Var("x")), (Selector.OR_LEFT,), IntLit(1))

    @pytest.mark.property
    @given(kbs_terms(), st.data())
    def test_modify_with_own_subterm_is_identity(self, term, data):
        at = data.draw(st.sampled_from(list(all_paths(term))))
        assert modify(term, at, subterm_at(term, at)) == term

    @pytest.mark.property
    @given(kbs_terms(), st.data())
    def test_decompose_then_fill_restores(self, term, data):
        at = data.draw(st.sampled_from(list(all_paths(term))))
        context, sub = decompose(term, at)
        assert hole_count(context) == 1
        assert fill(context, sub) == term


@pytest.mark.unit
class TestBinding:
    def test_alpha_eq(self):
        assert alpha_eq(Lam("x", Var("x")), Lam("y", Var("y")))
        assert not alpha_eq(Var("x"), Var("y"))
        assert alpha_eq(parse(r"\x. \y. x"), parse(r"\a. \b. a"))
        assert not alpha_eq(parse(r"\x. \y. x"), parse(r"\x. \y. y"))
        assert not alpha_eq(parse(r"\x. y"), parse(r"\y. y"))

    def test_canonical_text_agrees_with_alpha_eq(self):
        assert canonical_text(parse(r"\x. \y. x")) == canonical_text(parse(r"\a. \b. a"))
        assert canonical_text(parse(r"\x. y")) != canonical_text(parse(r"\y. y"))

    def test_substitute_avoids_capture(self):
        result = substitute(parse(r"\y. x y"), {"x": Var("y")})
        assert isinstance(result, Lam)
        assert result.param != "y"
        assert alpha_eq(result, parse(r"\z. y z"))

    def test_substitute_respects_shadowing(self):
        term = parse(r"\x. x")
        assert substitute(term, {"x": IntLit(1)}) == term

    def test_substitution_is_simultaneous(self):
        assert substitute(parse("x y"), {"x": Var("y"), "y": Var("x")}) == parse("y x")

    @pytest.mark.property
    @given(conventional_terms(max_size=15))
    def test_alpha_eq_is_reflexive(self, term):
        assert alpha_eq(term, term)

    @pytest.mark.property
    @given(kbs_terms(max_size=15), kbs_terms(max_size=15))
    def test_alpha_eq_is_symmetric(self, a, b):
        assert alpha_eq(a, b) == alpha_eq(b, a)
        renamed = rename_bound(a, "1")
        assert alpha_eq(a, renamed) and alpha_eq(renamed, a)

    @pytest.mark.property
    @given(kbs_terms(max_size=15), kbs_terms(max_size=15), st.booleans())
    def test_alpha_eq_is_transitive(self, a, other, related):
        b = rename_bound(a, "1")
        c = rename_bound(b, "2") if related else other
        assert alpha_eq(a, c) == alpha_eq(b, c)
        if related:
            assert alpha_eq(a, c)
