"""Reference evaluators on terms, independent of the machine.

`oracle_eval` is a substitution-based call-by-value evaluator using the
same order as the machine (argument first). It keeps its own explicit
continuation stack, so deep programs do not exhaust the Python stack.
`normalize` computes normal-order beta normal forms and is used to compare
outcomes extensionally, e.g. Church numerals.
"""

from __future__ import annotations

from dataclasses import dataclass

from kbsm.constants import PRIMITIVE_ARITY
from kbsm.errors import HoleNotAllowed, NonConventional
from kbsm.machine import Diverged, EvalResult, Halted, Stuck, Value
from kbsm.settings import get_settings
from kbsm.syntax import (
    App,
    Expr,
    Fail,
    Hole,
    IntLit,
    Lam,
    MetaVar,
    Or,
    Prim,
    Term,
    iter_subterms,
    render,
    substitute,
)


@dataclass(frozen=True, slots=True)
class _EvalArg:
    """Continuation: the argument is being evaluated, `fun` is next."""

    fun: Expr


@dataclass(frozen=True, slots=True)
class _ApplyTo:
    """Continuation: the function is being evaluated, then apply it to `arg`."""

    arg: Expr


def _prim_spine(term: Expr) -> tuple[str, list[Expr]] | None:
    args: list[Expr] = []
    while isinstance(term, App):
        args.append(term.arg)
        term = term.fun
    if isinstance(term, Prim):
        return term.op, args[::-1]
    return None


def _check_conventional(e: Expr) -> None:
    for node in iter_subterms(e):
        if isinstance(node, Or | Fail):
            raise NonConventional("or" if isinstance(node, Or) else "fail")
        if isinstance(node, Hole | MetaVar):
            raise HoleNotAllowed(0)


def oracle_eval(e: Expr, budget: int | None = None) -> EvalResult:
    """Evaluate `e` by substitution; `budget` bounds the number of reductions.

    Values are abstractions, integer literals, primitives and partially
    applied primitives. All extensions are assumed to be enabled.
    """
    _check_conventional(e)
    budget = budget or get_settings().oracle_budget
    reductions = 0
    konts: list[_EvalArg | _ApplyTo] = []
    current: Expr = e
    value: Expr | None = None

    while True:
        if value is None:
            match current:
                case App(fun, arg):
                    konts.append(_EvalArg(fun))
                    current = arg
                    continue
                case Lam() | IntLit() | Prim():
                    value = current
                case _:
                    return Stuck(None, f"unbound variable {render(current)}", reductions)

        if not konts:
            return Value(value, reductions)

        kont = konts.pop()
        if isinstance(kont, _EvalArg):
            konts.append(_ApplyTo(value))
            current, value = kont.fun, None
            continue

        fn, arg = value, kont.arg
        if isinstance(fn, Lam):
            if reductions >= budget:
                return Diverged(reductions)
            reductions += 1
            current, value = substitute(fn.body, {fn.param: arg}), None
            continue

        spine = _prim_spine(fn)
        if spine is None:
            return Stuck(None, f"cannot apply {render(fn)}", reductions)
        op, args = spine
        args.append(arg)
        if len(args) < PRIMITIVE_ARITY[op]:
            value = App(fn, arg)
            continue
        if reductions >= budget:
            return Diverged(reductions)
        reductions += 1
        if op == "halt":
            return Halted(arg, reductions)
        if not all(isinstance(a, IntLit) for a in args):
            return Stuck(None, f"{op} applied to a non-integer", reductions)
        a, b = (x.value for x in args)  # type: ignore[union-attr]
        value = IntLit(a + b if op == "add" else a * b)


def _reduce_once(term: Term) -> Term | None:
    """Contract the leftmost-outermost redex, or None for a normal form."""
    match term:
        case App(Lam(param, body), arg):
            return substitute(body, {param: arg})
        case App(App(Prim("add" | "mul" as op), IntLit(a)), IntLit(b)):
            return IntLit(a + b if op == "add" else a * b)
        case App(fun, arg):
            reduced = _reduce_once(fun)
            if reduced is not None:
                return App(reduced, arg)
            reduced = _reduce_once(arg)
            return None if reduced is None else App(fun, reduced)
        case Lam(param, body):
            reduced = _reduce_once(body)
            return None if reduced is None else Lam(param, reduced)
        case Or(left, right):
            reduced = _reduce_once(left)
            if reduced is not None:
                return Or(reduced, right)
            reduced = _reduce_once(right)
            return None if reduced is None else Or(left, reduced)
    return None


def normalize(e: Expr, budget: int) -> Expr | None:
    """Beta normal form by normal-order reduction; None if `budget` runs out."""
    current = e
    for _ in range(budget + 1):
        reduced = _reduce_once(current)
        if reduced is None:
            return current
        current = reduced
    return None

