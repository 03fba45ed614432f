"""Non-deterministic SECD machine and bounded search over its calculations.

Two rules extend the deterministic machine:

    (s, b, (e1 or e2) :: c, d) -> (s, b, e1 :: c, d) | (s, b, e2 :: c, d)
    (s, b, fail :: c, d)       -> no successor (the branch is pruned)

A program's calculations form a tree; `enumerate` collects the values at
terminal leaves, `calc_tree` returns the tree itself. Both explore it
sequentially under a `SearchBudget`, left branch first.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import StrEnum

from kbsm.constants import Strategy
from kbsm.errors import HoleNotAllowed
from kbsm.logging_conf import EvaluationLogger
from kbsm.machine import (
    Apply,
    Env,
    HaltAt,
    MachineDef,
    MachineState,
    Next,
    Outcome,
    StuckAt,
    Terminal,
    outcome_key,
    render_outcome,
    step,
)
from kbsm.settings import get_settings
from kbsm.syntax import Expr, Fail, Hole, MetaVar, Or, iter_subterms, render

evaluation_logger = EvaluationLogger("ndmachine")


@dataclass(frozen=True, slots=True)
class Successors:
    states: tuple[MachineState, ...]


@dataclass(frozen=True, slots=True)
class TerminalMarker:
    value: Outcome


@dataclass(frozen=True, slots=True)
class StuckMarker:
    reason: str


@dataclass(frozen=True, slots=True)
class HaltMarker:
    value: Outcome


NDTransitionResult = Successors | TerminalMarker | StuckMarker | HaltMarker


def nd_step(m: MachineDef, s: MachineState) -> NDTransitionResult:
    """All successors of `s`: two for `or`, none for `fail`, else as `step`."""
    if s.control:
        head, rest = s.control[0], s.control[1:]
        if isinstance(head, Or):
            return Successors(
                (
                    MachineState(s.stack, s.env, (head.left, *rest), s.dump),
                    MachineState(s.stack, s.env, (head.right, *rest), s.dump),
                )
            )
        if isinstance(head, Fail):
            return Successors(())
    match step(m, s):
        case Next(state):
            return Successors((state,))
        case Terminal(value):
            return TerminalMarker(value)
        case HaltAt(value):
            return HaltMarker(value)
        case StuckAt(reason):
            return StuckMarker(reason)
    raise AssertionError("unreachable")


def nd_load(program: Expr, env: Env | Mapping[str, Outcome] | None = None) -> MachineState:
    """Load any complete program, `or` and `fail` included."""
    if any(isinstance(node, Hole | MetaVar) for node in iter_subterms(program)):
        raise HoleNotAllowed(0)
    if not isinstance(env, Env):
        env = Env.of(env)
    return MachineState((), env, (program,), None)


# --- budgets and results ------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SearchBudget:
    """Limits on one search.

    `max_total_steps` is a single pool shared by all branches, `max_depth`
    bounds the transitions along one branch and `max_outcomes` stops the
    search once that many distinct outcomes are known.
    """

    max_total_steps: int = 100_000
    max_depth: int = 10_000
    max_outcomes: int | None = None
    strategy: Strategy = Strategy.DFS

    def __post_init__(self) -> None:
        if self.max_total_steps < 1 or self.max_depth < 1:
            raise ValueError("search budgets must be at least 1")
        if self.max_outcomes is not None and self.max_outcomes < 1:
            raise ValueError("max_outcomes must be at least 1")

    @classmethod
    def from_settings(cls, **overrides: object) -> SearchBudget:
        settings = get_settings()
        values: dict[str, object] = {
            "max_total_steps": settings.max_steps,
            "max_depth": settings.max_depth,
            "max_outcomes": settings.max_outcomes,
            "strategy": Strategy(settings.strategy),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        values["strategy"] = Strategy(values["strategy"])
        return cls(**values)  # type: ignore[arg-type]


@dataclass(slots=True)
class SearchDiagnostics:
    pruned: int = 0
    stuck: int = 0
    truncated: int = 0
    halted: int = 0
    steps_used: int = 0
    stuck_reasons: list[str] = field(default_factory=list)

    def as_dict(self) -> dict[str, int]:
        return {
            "pruned": self.pruned,
            "stuck": self.stuck,
            "truncated": self.truncated,
            "halted": self.halted,
            "steps": self.steps_used,
        }


@dataclass(frozen=True)
class OutcomeSet:
    """Distinct terminal values in discovery order.

    `complete` is True iff the whole calculation tree was explored.
    """

    values: tuple[Outcome, ...]
    complete: bool
    diagnostics: SearchDiagnostics

    def keys(self) -> frozenset[str]:
        return frozenset(outcome_key(v) for v in self.values)

    def texts(self) -> list[str]:
        return sorted(render_outcome(v) for v in self.values)

    def __len__(self) -> int:
        return len(self.values)


class NodeStatus(StrEnum):
    BRANCH = "branch"
    TERMINAL = "terminal"
    PRUNED = "pruned"
    STUCK = "stuck"
    TRUNCATED = "truncated"


@dataclass(slots=True)
class CalculationTree:
    state: MachineState
    status: NodeStatus = NodeStatus.BRANCH
    children: list[CalculationTree] = field(default_factory=list)
    outcome: Outcome | None = None
    reason: str | None = None

    def leaves(self) -> list[CalculationTree]:
        found = []
        stack = [self]
        while stack:
            node = stack.pop()
            if node.children:
                stack.extend(reversed(node.children))
            else:
                found.append(node)
        return found


# --- search -----------------------------------------------------------------------------------


@dataclass(slots=True)
class _Search:
    m: MachineDef
    budget: SearchBudget
    build_tree: bool
    diagnostics: SearchDiagnostics = field(default_factory=SearchDiagnostics)
    found: dict[str, Outcome] = field(default_factory=dict)
    complete: bool = True

    def run(self, start: MachineState) -> CalculationTree | None:
        root = CalculationTree(start) if self.build_tree else None
        frontier: deque[tuple[MachineState, int, CalculationTree | None]] = deque(
            [(start, 0, root)]
        )
        take = frontier.pop if self.budget.strategy == Strategy.DFS else frontier.popleft
        stopped = False

        while frontier:
            state, depth, node = take()
            if stopped:
                self._leaf(node, NodeStatus.TRUNCATED)
                continue
            result = nd_step(self.m, state)
            match result:
                case TerminalMarker(value):
                    self._record(value)
                    self._leaf(node, NodeStatus.TERMINAL, outcome=value)
                case HaltMarker(value):
                    self.diagnostics.halted += 1
                    self._record(value)
                    self._leaf(node, NodeStatus.TERMINAL, outcome=value)
                case StuckMarker(reason):
                    self.diagnostics.stuck += 1
                    if reason not in self.diagnostics.stuck_reasons:
                        self.diagnostics.stuck_reasons.append(reason)
                    self._leaf(node, NodeStatus.STUCK, reason=reason)
                case Successors(states):
                    if (
                        self.diagnostics.steps_used >= self.budget.max_total_steps
                        or depth >= self.budget.max_depth
                    ):
                        self._leaf(node, NodeStatus.TRUNCATED)
                        continue
                    self.diagnostics.steps_used += 1
                    if not states:
                        self.diagnostics.pruned += 1
                        self._leaf(node, NodeStatus.PRUNED)
                        continue
                    if node is not None:
                        node.children = [CalculationTree(child) for child in states]
                        children = [
                            (child.state, depth + 1, child) for child in node.children
                        ]
                    else:
                        children = [(child, depth + 1, None) for child in states]
                    if self.budget.strategy == Strategy.DFS:
                        frontier.extend(reversed(children))
                    else:
                        frontier.extend(children)
            cap = self.budget.max_outcomes
            if cap is not None and len(self.found) >= cap and frontier:
                stopped = True
        return root

    def _record(self, value: Outcome) -> None:
        self.found.setdefault(outcome_key(value), value)

    def _leaf(
        self,
        node: CalculationTree | None,
        status: NodeStatus,
        outcome: Outcome | None = None,
        reason: str | None = None,
    ) -> None:
        if status == NodeStatus.TRUNCATED:
            self.diagnostics.truncated += 1
            self.complete = False
        if node is not None:
            node.status = status
            node.outcome = outcome
            node.reason = reason

    def outcome_set(self) -> OutcomeSet:
        return OutcomeSet(tuple(self.found.values()), self.complete, self.diagnostics)


def enumerate(
    m: MachineDef,
    program: Expr,
    budget: SearchBudget | None = None,
    env: Env | Mapping[str, Outcome] | None = None,
) -> OutcomeSet:
    """Distinct outcomes of every calculation of `program` within `budget`."""
    budget = budget or SearchBudget.from_settings()
    search = _Search(m, budget, build_tree=False)
    search.run(nd_load(program, env))
    outcomes = search.outcome_set()
    evaluation_logger.log_search(
        m.name, budget.strategy.value, len(outcomes), outcomes.complete,
        outcomes.diagnostics.as_dict(),
    )
    return outcomes


eval_nd = enumerate


def calc_tree(
    m: MachineDef,
    program: Expr,
    budget: SearchBudget | None = None,
    env: Env | Mapping[str, Outcome] | None = None,
) -> tuple[CalculationTree, OutcomeSet]:
    """The explored calculation tree of `program`, with the outcomes it yields."""
    budget = budget or SearchBudget.from_settings()
    search = _Search(m, budget, build_tree=True)
    root = search.run(nd_load(program, env))
    assert root is not None
    return root, search.outcome_set()


# --- rendering ----------------------------------------------------------------------------------


def node_label(node: CalculationTree) -> str:
    control = node.state.control
    if control:
        head = control[0]
        label = "@" if isinstance(head, Apply) else render(head)
    else:
        label = "done" if node.state.dump is None else "return"
    match node.status:
        case NodeStatus.TERMINAL:
            assert node.outcome is not None
            label += f" [terminal: {render_outcome(node.outcome)}]"
        case NodeStatus.PRUNED:
            label += " [pruned]"
        case NodeStatus.STUCK:
            label += f" [stuck: {node.reason}]"
        case NodeStatus.TRUNCATED:
            label += " [truncated]"
    return label


def render_tree(tree: CalculationTree) -> str:
    """Indented text form, one node per line, children in left-to-right order."""
    lines: list[str] = []
    stack: list[tuple[CalculationTree, str, str]] = [(tree, "", "")]
    while stack:
        node, connector, prefix = stack.pop()
        lines.append(f"{prefix}{connector}{node_label(node)}")
        if connector == "├─ ":
            child_prefix = prefix + "│  "
        elif connector == "└─ ":
            child_prefix = prefix + "   "
        else:
            child_prefix = prefix
        last = len(node.children) - 1
        for index in range(last, -1, -1):
            stack.append(
                (node.children[index], "└─ " if index == last else "├─ ", child_prefix)
            )
    return "\n".join(lines)
