"""Forward-chaining inference compiled onto the non-deterministic machine.

Data is a finite set of facts and rules are requires/adds/removes triples.
The engine is a machine primitive: applied to a fact set that meets the
goal it returns the set; otherwise it expands to

    engine d1 or (engine d2 or ( ... or engine dn))

over the fact sets d1..dn produced by the applicable rules, or to `fail`
when no rule applies. The non-deterministic machine then explores every
branch under the usual search budget.
"""

from __future__ import annotations

import re
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from kbsm.constants import Feature
from kbsm.errors import NotApplicable, RuleFileError, StateSpaceExceeded
from kbsm.logging_conf import get_logger
from kbsm.machine import (
    DataVal,
    Env,
    Expand,
    MachineDef,
    Outcome,
    Primitive,
    PrimitiveFault,
    PrimPartial,
    define_machine,
)
from kbsm.ndmachine import SearchBudget, SearchDiagnostics, eval_nd
from kbsm.settings import get_settings
from kbsm.syntax import App, Expr, Fail, Or, Prim, Var

logger = get_logger("inference")

Facts = frozenset[str]

ENGINE = "engine"


@dataclass(frozen=True, slots=True)
class Rule:
    name: str
    requires: Facts = frozenset()
    adds: Facts = frozenset()
    removes: Facts = frozenset()

    def __post_init__(self) -> None:
        clash = self.adds & self.removes
        if clash:
            raise ValueError(f"rule {self.name} both adds and removes {', '.join(sorted(clash))}")

    def applicable(self, data: Facts) -> bool:
        """Requirements hold and applying the rule would change the data."""
        return self.requires <= data and (
            not self.adds <= data or bool(self.removes & data)
        )


@dataclass(frozen=True, slots=True)
class Goal:
    """Satisfied by every fact set containing all of `facts`."""

    facts: Facts = frozenset()

    def satisfied(self, data: Facts) -> bool:
        return self.facts <= data


@dataclass(frozen=True)
class RuleSystem:
    rules: tuple[Rule, ...]
    goal: Goal
    start: Facts


@dataclass(frozen=True)
class InferenceResult:
    outcomes: frozenset[Facts]
    complete: bool
    dead_ends: int
    diagnostics: SearchDiagnostics = field(default_factory=SearchDiagnostics)

    def sorted_outcomes(self) -> list[list[str]]:
        return sorted(sorted(facts) for facts in self.outcomes)


def applicable_rules(rules: Iterable[Rule], data: Facts) -> list[Rule]:
    return [rule for rule in rules if rule.applicable(data)]


def apply_rule(rule: Rule, data: Facts) -> Facts:
    if not rule.applicable(data):
        raise NotApplicable(rule.name)
    return (data - rule.removes) | rule.adds


def format_facts(facts: Iterable[str]) -> str:
    return "{" + ", ".join(sorted(facts)) + "}"


# --- the engine primitive ------------------------------------------------------------------


def _engine_primitive(rules: Sequence[Rule], goal: Goal) -> Primitive:
    def engine(args: tuple[Outcome, ...]) -> Outcome | Expand:
        (data,) = args
        if not isinstance(data, DataVal):
            raise PrimitiveFault("engine applied to something other than a fact set")
        if goal.satisfied(data.payload):
            return data
        successors = [apply_rule(rule, data.payload) for rule in applicable_rules(rules, data.payload)]
        if not successors:
            return Expand(Fail(), Env.of())
        bindings: dict[str, Outcome] = {ENGINE: PrimPartial(ENGINE)}
        branches: list[Expr] = []
        for index, facts in enumerate(successors):
            name = f"d{index}"
            bindings[name] = DataVal(facts)
            branches.append(App(Var(ENGINE), Var(name)))
        term = branches[-1]
        for branch in reversed(branches[:-1]):
            term = Or(branch, term)
        return Expand(term, Env.of(bindings))

    return Primitive(ENGINE, 1, engine)


def inference_machine(rules: Sequence[Rule], goal: Goal) -> MachineDef:
    return define_machine("inference", [Feature.BASE], [_engine_primitive(rules, goal)])


def infer(
    rules: Sequence[Rule],
    goal: Goal,
    data: Iterable[str],
    budget: SearchBudget | None = None,
) -> InferenceResult:
    """Every goal-satisfying fact set reachable from `data`, by non-deterministic search."""
    start = frozenset(data)
    machine = inference_machine(rules, goal)
    program = App(Prim(ENGINE), Var("start"))
    outcomes = eval_nd(machine, program, budget, env={"start": DataVal(start)})
    found = frozenset(v.payload for v in outcomes.values if isinstance(v, DataVal))
    logger.info(
        f"Inference from {format_facts(start)}: {len(found)} outcomes, "
        f"{'complete' if outcomes.complete else 'truncated'}",
        extra={"rules": len(rules), "outcomes": len(found), "complete": outcomes.complete},
    )
    return InferenceResult(found, outcomes.complete, outcomes.diagnostics.pruned, outcomes.diagnostics)


def reachability_oracle(
    rules: Sequence[Rule], goal: Goal, data: Iterable[str], max_states: int | None = None
) -> frozenset[Facts]:
    """Goal states reachable by breadth-first closure; goal states are not expanded."""
    limit = max_states or get_settings().inference_max_states
    start = frozenset(data)
    seen = {start}
    queue = deque([start])
    found = set()
    while queue:
        current = queue.popleft()
        if goal.satisfied(current):
            found.add(current)
            continue
        for rule in applicable_rules(rules, current):
            following = apply_rule(rule, current)
            if following not in seen:
                if len(seen) >= limit:
                    raise StateSpaceExceeded(limit)
                seen.add(following)
                queue.append(following)
    return frozenset(found)


# --- rule files ------------------------------------------------------------------------------

_RULE_LINE = re.compile(r"^rule\s+([^\s:]+)\s*:(.*)$")
_DIRECTIVE = re.compile(r"^(goal|start)\s*:(.*)$")
_CLAUSE = re.compile(r"^(requires|adds|removes)\b(.*)$")


def _facts(text: str, lineno: int) -> Facts:
    facts = [part.strip() for part in text.split(",")]
    if facts == [""]:
        return frozenset()
    for fact in facts:
        if not fact or any(ch.isspace() for ch in fact):
            raise RuleFileError(lineno, f"malformed fact list {text.strip()!r}")
    return frozenset(facts)


def parse_rule_file(text: str) -> RuleSystem:
    """Parse a rule file; goal and start default to the empty set."""
    rules: list[Rule] = []
    names: set[str] = set()
    goal = Goal()
    start: Facts = frozenset()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if directive := _DIRECTIVE.match(line):
            facts = _facts(directive.group(2), lineno)
            if directive.group(1) == "goal":
                goal = Goal(facts)
            else:
                start = facts
            continue
        rule_line = _RULE_LINE.match(line)
        if rule_line is None:
            raise RuleFileError(lineno, f"expected 'rule NAME: ...', 'goal: ...' or 'start: ...', got {line!r}")
        name = rule_line.group(1)
        if name in names:
            raise RuleFileError(lineno, f"duplicate rule name {name!r}")
        clauses: dict[str, Facts] = {}
        for clause in filter(None, (c.strip() for c in rule_line.group(2).split(";"))):
            parsed = _CLAUSE.match(clause)
            if parsed is None:
                raise RuleFileError(lineno, f"unknown clause {clause!r}")
            keyword = parsed.group(1)
            if keyword in clauses:
                raise RuleFileError(lineno, f"repeated clause {keyword!r}")
            clauses[keyword] = _facts(parsed.group(2), lineno)
        try:
            rules.append(Rule(name, **clauses))
        except ValueError as e:
            raise RuleFileError(lineno, str(e)) from e
        names.add(name)
    return RuleSystem(tuple(rules), goal, start)


def load_rule_file(path: str | Path) -> RuleSystem:
    return parse_rule_file(Path(path).read_text(encoding="utf-8"))
