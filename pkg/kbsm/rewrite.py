"""Rewrite tables: program translations given as data.

A table is a list of `LHS => RHS` lines. Both sides are terms in the
concrete syntax where `$1`, `$2`, ... stand for arbitrary subterms, e.g.

    # drop the right alternative
    $1 or $2 => $1

Rules are tried in file order at each node; the term is rewritten
leftmost-innermost until no rule applies or the step cap is reached.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from kbsm.errors import FormatError, TermSyntaxError, TranslationUndefined
from kbsm.logging_conf import get_logger
from kbsm.settings import get_settings
from kbsm.syntax import (
    App,
    Lam,
    MetaVar,
    Or,
    PExpr,
    Term,
    children,
    iter_subterms,
    map_children,
    parse,
)

logger = get_logger("rewrite")


@dataclass(frozen=True, slots=True)
class RewriteRule:
    lhs: Term
    rhs: Term

    def __post_init__(self) -> None:
        if isinstance(self.lhs, MetaVar):
            raise ValueError("a rule left-hand side must not be a bare metavariable")
        unbound = metavars(self.rhs) - metavars(self.lhs)
        if unbound:
            names = ", ".join(f"${i}" for i in sorted(unbound))
            raise ValueError(f"right-hand side uses unbound {names}")


@dataclass(frozen=True, slots=True)
class RewriteTable:
    name: str
    rules: tuple[RewriteRule, ...]


def metavars(term: Term) -> frozenset[int]:
    return frozenset(n.index for n in iter_subterms(term) if isinstance(n, MetaVar))


def parse_rewrite_table(text: str, name: str = "rewrites") -> RewriteTable:
    """Parse the text of a rewrite table."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.count("=>") != 1:
            raise FormatError(f"line {lineno}", "expected exactly one '=>'")
        left, right = (part.strip() for part in line.split("=>"))
        try:
            lhs = parse(left, allow_holes=True, allow_metavars=True)
            rhs = parse(right, allow_holes=True, allow_metavars=True)
            rules.append(RewriteRule(lhs, rhs))
        except TermSyntaxError as e:
            raise FormatError(f"line {lineno}", e.message) from e
        except ValueError as e:
            raise FormatError(f"line {lineno}", str(e)) from e
    logger.debug(f"Loaded rewrite table {name} with {len(rules)} rules")
    return RewriteTable(name, tuple(rules))


def load_rewrite_table(path: str | Path) -> RewriteTable:
    path = Path(path)
    return parse_rewrite_table(path.read_text(encoding="utf-8"), name=path.stem)


def match(pattern: Term, term: Term, bindings: dict[int, Term] | None = None) -> dict[int, Term] | None:
    """Bindings making `pattern` equal to `term`, or None.

    Binders are matched literally; a metavariable used twice must bind
    structurally equal subterms.
    """
    bindings = {} if bindings is None else bindings
    if isinstance(pattern, MetaVar):
        bound = bindings.get(pattern.index)
        if bound is None:
            bindings[pattern.index] = term
            return bindings
        return bindings if bound == term else None
    if type(pattern) is not type(term):
        return None
    if isinstance(pattern, Lam) and pattern.param != term.param:  # type: ignore[union-attr]
        return None
    pattern_children = children(pattern)
    if not pattern_children:
        return bindings if pattern == term else None
    for (_, p), (_, t) in zip(pattern_children, children(term), strict=True):
        if match(p, t, bindings) is None:
            return None
    return bindings


def instantiate(template: Term, bindings: dict[int, Term]) -> Term:
    if isinstance(template, MetaVar):
        return bindings[template.index]
    return map_children(template, lambda child: instantiate(child, bindings))


def _rewrite_once(term: Term, table: RewriteTable) -> Term | None:
    """One leftmost-innermost rewrite step, or None at a normal form."""
    match term:
        case Lam(param, body):
            reduced = _rewrite_once(body, table)
            if reduced is not None:
                return Lam(param, reduced)
        case App(fun, arg):
            reduced = _rewrite_once(fun, table)
            if reduced is not None:
                return App(reduced, arg)
            reduced = _rewrite_once(arg, table)
            if reduced is not None:
                return App(fun, reduced)
        case Or(left, right):
            reduced = _rewrite_once(left, table)
            if reduced is not None:
                return Or(reduced, right)
            reduced = _rewrite_once(right, table)
            if reduced is not None:
                return Or(left, reduced)
    for rule in table.rules:
        bindings = match(rule.lhs, term)
        if bindings is not None:
            return instantiate(rule.rhs, bindings)
    return None


def rewrite_fixpoint(term: PExpr, table: RewriteTable, step_cap: int | None = None) -> PExpr:
    """Rewrite until no rule applies; TranslationUndefined past `step_cap` steps."""
    step_cap = step_cap or get_settings().rewrite_step_cap
    current = term
    for _ in range(step_cap):
        rewritten = _rewrite_once(current, table)
        if rewritten is None:
            return current
        current = rewritten
    if _rewrite_once(current, table) is None:
        return current
    raise TranslationUndefined(f"rewrite:{table.name}", f"no fixed point within {step_cap} steps")
