"""Term algebra, concrete syntax and parameterised programs.

A program is a λ-term optionally extended with the non-deterministic `or`,
the branch-killing `fail`, integer literals and the builtin primitives
`add`, `mul` and `halt`. A parameterised program additionally contains
holes (`_`).

Filling a parameterised program is plain *replacement*, not substitution:
variables in the filler may be captured by binders around the hole. The
capture-avoiding `substitute` below is a separate operation used by the
evaluators.
"""

from __future__ import annotations

import re
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass
from functools import lru_cache

from lark import Lark, Token, Transformer_NonRecursive, v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError

from kbsm.constants import KEYWORDS, PRIMITIVE_ARITY, Selector
from kbsm.errors import HoleNotAllowed, InvalidPath, NoHoles, TermSyntaxError, WorkbenchError

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Lam:
    param: str
    body: Term


@dataclass(frozen=True, slots=True)
class App:
    fun: Term
    arg: Term


@dataclass(frozen=True, slots=True)
class Or:
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Fail:
    pass


@dataclass(frozen=True, slots=True)
class IntLit:
    value: int


@dataclass(frozen=True, slots=True)
class Prim:
    op: str


@dataclass(frozen=True, slots=True)
class Hole:
    pass


@dataclass(frozen=True, slots=True)
class MetaVar:
    """Pattern variable `$n`; only produced when parsing rewrite tables."""

    index: int


Term = Var | Lam | App | Or | Fail | IntLit | Prim | Hole | MetaVar
# Expr is a Term without holes or metavariables; PExpr may contain holes.
Expr = Term
PExpr = Term
Path = tuple[Selector, ...]


def is_valid_name(text: str) -> bool:
    """Identifiers usable as variables and binders."""
    return (
        bool(NAME_RE.fullmatch(text))
        and text not in KEYWORDS
        and text not in PRIMITIVE_ARITY
        and text != "_"
    )


# --- concrete syntax -----------------------------------------------------------

GRAMMAR = r"""
    ?start: term

    ?term: lam
         | orterm

    lam: "\\" NAME "." term

    ?orterm: orterm "or" appterm -> or_
           | appterm

    ?appterm: appterm atom -> app
            | atom

    ?atom: NAME -> var
         | INT -> int
         | "fail" -> fail
         | META -> meta
         | "(" term ")"

    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    INT: /-?[0-9]+/
    META: /\$[0-9]+/
    COMMENT: /#[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark(GRAMMAR, parser="lalr", maybe_placeholders=False)


@v_args(inline=True)
class _TermBuilder(Transformer_NonRecursive):
    def __init__(self, allow_holes: bool, allow_metavars: bool):
        super().__init__()
        self.allow_holes = allow_holes
        self.allow_metavars = allow_metavars

    def lam(self, name: Token, body: Term) -> Lam:
        if not is_valid_name(str(name)):
            raise TermSyntaxError(
                name.start_pos or 0,
                f"{name} cannot be used as a binder",
                name.line or 1,
                name.column or 1,
            )
        return Lam(str(name), body)

    def or_(self, left: Term, right: Term) -> Or:
        return Or(left, right)

    def app(self, fun: Term, arg: Term) -> App:
        return App(fun, arg)

    def var(self, name: Token) -> Term:
        if str(name) == "_":
            return self.hole(name)
        if str(name) in PRIMITIVE_ARITY:
            return Prim(str(name))
        return Var(str(name))

    def int(self, token: Token) -> IntLit:
        return IntLit(int(token))

    def fail(self) -> Fail:
        return Fail()

    def hole(self, token: Token) -> Hole:
        if not self.allow_holes:
            raise HoleNotAllowed(token.start_pos or 0)
        return Hole()

    def meta(self, token: Token) -> MetaVar:
        if not self.allow_metavars:
            raise TermSyntaxError(
                token.start_pos or 0,
                f"metavariable {token} outside a rewrite table",
                token.line or 1,
                token.column or 1,
            )
        return MetaVar(int(str(token)[1:]))


def parse(text: str, allow_holes: bool = False, allow_metavars: bool = False) -> PExpr:
    """Parse program text into a term.

    Raises TermSyntaxError on malformed input and HoleNotAllowed when `_`
    appears while holes are switched off.
    """
    try:
        tree = _parser().parse(text)
    except UnexpectedEOF as e:
        raise TermSyntaxError(len(text), "unexpected end of input", *_end_position(text)) from e
    except UnexpectedInput as e:
        position = e.pos_in_stream if e.pos_in_stream is not None else len(text)
        line = e.line if e.line and e.line > 0 else 1
        column = e.column if e.column and e.column > 0 else 1
        raise TermSyntaxError(position, _describe(e, text), line, column) from e

    if isinstance(tree, Token):
        # A lone token is inlined all the way up; rebuild a tiny tree for it.
        return _single_token(tree, allow_holes, allow_metavars)
    try:
        return _TermBuilder(allow_holes, allow_metavars).transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, WorkbenchError):
            raise e.orig_exc from None
        raise


def parse_program(text: str) -> Expr:
    """Parse a complete program (no holes)."""
    return parse(text, allow_holes=False)


def _single_token(token: Token, allow_holes: bool, allow_metavars: bool) -> Term:
    builder = _TermBuilder(allow_holes, allow_metavars)
    match token.type:
        case "NAME":
            return builder.var(token)
        case "INT":
            return builder.int(token)
        case "META":
            return builder.meta(token)
    raise TermSyntaxError(token.start_pos or 0, f"unexpected token {token!r}")


def _end_position(text: str) -> tuple[int, int]:
    lines = text.split("\n")
    return len(lines), len(lines[-1]) + 1


def _describe(error: UnexpectedInput, text: str) -> str:
    token = getattr(error, "token", None)
    if token is not None:
        if token.type == "$END":
            return "unexpected end of input"
        return f"unexpected {str(token)!r}"
    char = getattr(error, "char", None)
    if char is not None:
        return f"unexpected character {char!r}"
    return "malformed input"


def render(term: PExpr) -> str:
    """Render a term with the fewest parentheses the grammar allows."""
    return _render_term(term)


def _render_term(term: Term) -> str:
    if isinstance(term, Lam):
        return f"\\{term.param}. {_render_term(term.body)}"
    return _render_or(term)


def _render_or(term: Term) -> str:
    if isinstance(term, Or):
        return f"{_render_or(term.left)} or {_render_app(term.right)}"
    return _render_app(term)


def _render_app(term: Term) -> str:
    if isinstance(term, App):
        return f"{_render_app(term.fun)} {_render_atom(term.arg)}"
    return _render_atom(term)


def _render_atom(term: Term) -> str:
    match term:
        case Var(name):
            return name
        case IntLit(value):
            return str(value)
        case Prim(op):
            return op
        case Fail():
            return "fail"
        case Hole():
            return "_"
        case MetaVar(index):
            return f"${index}"
    return f"({_render_term(term)})"


# --- structure ------------------------------------------------------------------


def children(term: Term) -> tuple[tuple[Selector, Term], ...]:
    """Immediate subterms with the selector that reaches each."""
    match term:
        case Lam(_, body):
            return ((Selector.LAM_BODY, body),)
        case App(fun, arg):
            return ((Selector.APP_FUN, fun), (Selector.APP_ARG, arg))
        case Or(left, right):
            return ((Selector.OR_LEFT, left), (Selector.OR_RIGHT, right))
    return ()


def map_children(term: Term, fn: Callable[[Term], Term]) -> Term:
    """Rebuild a node with `fn` applied to each immediate subterm."""
    match term:
        case Lam(param, body):
            return Lam(param, fn(body))
        case App(fun, arg):
            return App(fn(fun), fn(arg))
        case Or(left, right):
            return Or(fn(left), fn(right))
    return term


def iter_subterms(term: Term) -> Iterator[Term]:
    """Pre-order traversal of every node."""
    stack = [term]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(child for _, child in reversed(children(node)))


def size(term: Term) -> int:
    return sum(1 for _ in iter_subterms(term))


def is_conventional(term: Expr) -> bool:
    """True iff no `or` and no `fail` occurs."""
    return not any(isinstance(node, Or | Fail) for node in iter_subterms(term))


def hole_count(term: PExpr) -> int:
    return sum(1 for node in iter_subterms(term) if isinstance(node, Hole))


def to_expr(term: PExpr) -> Expr:
    """Convert a hole-free parameterised program to a program."""
    if hole_count(term):
        raise HoleNotAllowed(0)
    return term


def fill(context: PExpr, filler: Expr) -> Expr:
    """Replace every hole in `context` with `filler` (no capture avoidance)."""
    if isinstance(context, Hole):
        return filler
    return map_children(context, lambda child: fill(child, filler))


def extend(context: PExpr, program: Expr) -> Expr:
    """Wrap `context` around `program`."""
    if hole_count(context) == 0:
        raise NoHoles()
    return fill(context, program)


def parse_path(text: str) -> Path:
    """Parse a comma-separated selector list such as `lam-body,app-fun`."""
    steps = [part.strip() for part in text.split(",") if part.strip()]
    try:
        return tuple(Selector(step) for step in steps)
    except ValueError as e:
        raise InvalidPath(f"unknown selector in path {text!r}", tuple(steps)) from e


def render_path(path: Path) -> str:
    return ",".join(step.value for step in path)


def subterm_at(term: Term, at: Path) -> Term:
    node = term
    for depth, step in enumerate(at):
        node = _select(node, step, at[: depth + 1])
    return node


def _select(node: Term, step: Selector, prefix: Path) -> Term:
    for selector, child in children(node):
        if selector == step:
            return child
    raise InvalidPath(
        f"selector {step.value} does not match {type(node).__name__} node", prefix
    )


def decompose(term: Expr, at: Path) -> tuple[PExpr, Expr]:
    """Split `term` into a one-hole context and the subterm at `at`."""
    subterm = subterm_at(term, at)
    return _replace_at(term, at, Hole()), subterm


def modify(term: Expr, at: Path, replacement: Expr) -> Expr:
    """Replace the single subterm at `at`."""
    context, _ = decompose(term, at)
    return fill(context, replacement)


def _replace_at(term: Term, at: Path, new: Term) -> Term:
    if not at:
        return new
    step, rest = at[0], at[1:]
    _select(term, step, at[:1])
    match term:
        case Lam(param, body):
            return Lam(param, _replace_at(body, rest, new))
        case App(fun, arg):
            if step == Selector.APP_FUN:
                return App(_replace_at(fun, rest, new), arg)
            return App(fun, _replace_at(arg, rest, new))
        case Or(left, right):
            if step == Selector.OR_LEFT:
                return Or(_replace_at(left, rest, new), right)
            return Or(left, _replace_at(right, rest, new))
    raise InvalidPath(f"selector {step.value} does not match {type(term).__name__} node", at)


def all_paths(term: Term) -> Iterator[Path]:
    """Every valid path in `term`, root first."""
    stack: list[tuple[Path, Term]] = [((), term)]
    while stack:
        path, node = stack.pop()
        yield path
        for selector, child in reversed(children(node)):
            stack.append(((*path, selector), child))


# --- binding ---------------------------------------------------------------------


def free_vars(term: Term) -> frozenset[str]:
    match term:
        case Var(name):
            return frozenset({name})
        case Lam(param, body):
            return free_vars(body) - {param}
        case App(fun, arg):
            return free_vars(fun) | free_vars(arg)
        case Or(left, right):
            return free_vars(left) | free_vars(right)
    return frozenset()


def fresh_name(base: str, avoid: frozenset[str] | set[str]) -> str:
    stem = base.rstrip("0123456789") or "v"
    counter = 1
    while f"{stem}{counter}" in avoid:
        counter += 1
    return f"{stem}{counter}"


def substitute(term: Term, mapping: Mapping[str, Term]) -> Term:
    """Capture-avoiding simultaneous substitution of free variables."""
    if not mapping:
        return term
    match term:
        case Var(name):
            return mapping.get(name, term)
        case Lam(param, body):
            inner = {k: v for k, v in mapping.items() if k != param and k in free_vars(body)}
            if not inner:
                return term
            incoming = frozenset().union(*(free_vars(v) for v in inner.values()))
            if param in incoming:
                avoid = incoming | free_vars(body) | set(inner)
                renamed = fresh_name(param, avoid)
                body = substitute(body, {param: Var(renamed)})
                param = renamed
            return Lam(param, substitute(body, inner))
    return map_children(term, lambda child: substitute(child, mapping))


def alpha_eq(a: Term, b: Term) -> bool:
    """Structural equality up to consistent renaming of bound variables."""
    return _alpha(a, b, {}, {}, 0)


def _alpha(a: Term, b: Term, env_a: dict[str, int], env_b: dict[str, int], depth: int) -> bool:
    match a, b:
        case Var(x), Var(y):
            if x in env_a or y in env_b:
                return env_a.get(x) == env_b.get(y)
            return x == y
        case Lam(x, body_a), Lam(y, body_b):
            return _alpha(body_a, body_b, {**env_a, x: depth}, {**env_b, y: depth}, depth + 1)
        case App(f, x), App(g, y):
            return _alpha(f, g, env_a, env_b, depth) and _alpha(x, y, env_a, env_b, depth)
        case Or(l1, r1), Or(l2, r2):
            return _alpha(l1, l2, env_a, env_b, depth) and _alpha(r1, r2, env_a, env_b, depth)
    return type(a) is type(b) and not isinstance(a, Var | Lam | App | Or) and a == b


def canonical_text(term: Term) -> str:
    """Text identical for exactly the alpha-equivalent terms."""
    return _render_term(_canonicalize(term, {}, 0))


def _canonicalize(term: Term, env: dict[str, str], depth: int) -> Term:
    match term:
        case Var(name):
            return Var(env.get(name, name))
        case Lam(param, body):
            # '%' cannot occur in source names, so these never meet a free variable.
            bound = f"%{depth}"
            return Lam(bound, _canonicalize(body, {**env, param: bound}, depth + 1))
    return map_children(term, lambda child: _canonicalize(child, env, depth))
