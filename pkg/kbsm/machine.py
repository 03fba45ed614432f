"""Deterministic call-by-value SECD machine with pluggable extensions.

States are quadruples (stack, environment, control, dump). The five base
rules, in the order they are matched:

    (s, b, i :: c, d)                  -> ((b . i) :: s, b, c, d)
    (s, b, \\i.e :: c, d)               -> (<i, b, e> :: s, b, c, d)
    (s, b, (e1 e2) :: c, d)            -> (s, b, e2 :: e1 :: @ :: c, d)
    (<i, b1, e> :: v :: s, b2, @ :: c, d) -> ([], b1 + (i -> v), [e], (s, b2, c, d))
    (v :: _, _, [], (s, b, c, d))      -> (v :: s, b, c, d)

The argument of an application is evaluated before the function. Integer
literals, the primitives `add`/`mul` and `halt` are extensions switched on
per machine; primitives consume their arguments through the same `@`
instruction, one at a time.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any

from kbsm.constants import PRIMITIVE_ARITY, PRIMITIVE_FEATURE, Feature
from kbsm.errors import HoleNotAllowed, NonConventional, UnknownMachine
from kbsm.logging_conf import EvaluationLogger
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
    Var,
    canonical_text,
    free_vars,
    iter_subterms,
    render,
    substitute,
)

evaluation_logger = EvaluationLogger("machine")


# --- outcomes and states ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Env:
    """Immutable map from names to outcomes."""

    bindings: Mapping[str, Outcome] = field(default_factory=lambda: MappingProxyType({}))

    def lookup(self, name: str) -> Outcome | None:
        return self.bindings.get(name)

    def extend(self, name: str, value: Outcome) -> Env:
        return Env(MappingProxyType({**self.bindings, name: value}))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Env) and dict(self.bindings) == dict(other.bindings)

    def __hash__(self) -> int:
        return hash(frozenset(self.bindings))

    def __repr__(self) -> str:
        return f"Env({dict(self.bindings)!r})"

    @classmethod
    def of(cls, bindings: Mapping[str, Outcome] | None = None) -> Env:
        return cls(MappingProxyType(dict(bindings or {})))


@dataclass(frozen=True, slots=True)
class Closure:
    param: str
    env: Env
    body: Expr


@dataclass(frozen=True, slots=True)
class IntVal:
    value: int


@dataclass(frozen=True, slots=True)
class PrimPartial:
    op: str
    applied: tuple[Outcome, ...] = ()


@dataclass(frozen=True, slots=True)
class DataVal:
    """Outcome type contributed by machine extensions (e.g. fact sets)."""

    payload: frozenset[str]


Outcome = Closure | IntVal | PrimPartial | DataVal


@dataclass(frozen=True, slots=True)
class Apply:
    """The `@` instruction; never part of a source program."""

    def __repr__(self) -> str:
        return "@"


APPLY = Apply()

ControlItem = Term | Apply


@dataclass(frozen=True, slots=True)
class MachineState:
    stack: tuple[Outcome, ...] = ()
    env: Env = field(default_factory=Env.of)
    control: tuple[ControlItem, ...] = ()
    dump: MachineState | None = None

    @property
    def is_terminal(self) -> bool:
        return not self.control and self.dump is None


def dump_depth(state: MachineState) -> int:
    depth = 0
    dump = state.dump
    while dump is not None:
        depth += 1
        dump = dump.dump
    return depth


# --- machine definitions ------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Halt:
    value: Outcome


@dataclass(frozen=True, slots=True)
class Expand:
    """Primitive result entered like a closure body: `term` under `env`."""

    term: Expr
    env: Env


class PrimitiveFault(Exception):
    """Raised by a primitive implementation to make the machine stuck."""


@dataclass(frozen=True, slots=True)
class Primitive:
    name: str
    arity: int
    implementation: Callable[[tuple[Outcome, ...]], Outcome | Halt | Expand]


def _int_args(op: str, args: tuple[Outcome, ...]) -> list[int]:
    values = []
    for arg in args:
        if not isinstance(arg, IntVal):
            raise PrimitiveFault(f"{op} applied to non-integer {render_outcome(arg)}")
        values.append(arg.value)
    return values


def _add(args: tuple[Outcome, ...]) -> Outcome:
    a, b = _int_args("add", args)
    return IntVal(a + b)


def _mul(args: tuple[Outcome, ...]) -> Outcome:
    a, b = _int_args("mul", args)
    return IntVal(a * b)


def _halt(args: tuple[Outcome, ...]) -> Halt:
    return Halt(args[0])


BUILTIN_PRIMITIVES = {
    "add": Primitive("add", PRIMITIVE_ARITY["add"], _add),
    "mul": Primitive("mul", PRIMITIVE_ARITY["mul"], _mul),
    "halt": Primitive("halt", PRIMITIVE_ARITY["halt"], _halt),
}


@dataclass(frozen=True)
class MachineDef:
    name: str
    features: frozenset[Feature]
    primitives: Mapping[str, Primitive]

    def enabled(self, feature: Feature) -> bool:
        return feature in self.features


def define_machine(
    name: str,
    features: Iterable[Feature | str],
    extra_primitives: Iterable[Primitive] = (),
) -> MachineDef:
    """Build a machine from its extensions; `base` is always on."""
    enabled = frozenset(Feature(f) for f in features) | {Feature.BASE}
    if Feature.ARITH in enabled and Feature.INTEGERS not in enabled:
        raise ValueError("the arith extension requires integers")
    primitives = {
        op: prim
        for op, prim in BUILTIN_PRIMITIVES.items()
        if PRIMITIVE_FEATURE[op] in enabled
    }
    for prim in extra_primitives:
        primitives[prim.name] = prim
    return MachineDef(name, enabled, MappingProxyType(primitives))


MACHINES: dict[str, MachineDef] = {
    "base": define_machine("base", [Feature.BASE]),
    "arith": define_machine(
        "arith", [Feature.BASE, Feature.INTEGERS, Feature.ARITH, Feature.HALT]
    ),
}


def get_machine(name: str) -> MachineDef:
    try:
        return MACHINES[name]
    except KeyError:
        raise UnknownMachine(name, sorted(MACHINES)) from None


def unsupported_constructs(m: MachineDef, program: Expr) -> list[str]:
    """Constructs in `program` the machine has no rule for."""
    problems = []
    for node in iter_subterms(program):
        match node:
            case IntLit(value) if not m.enabled(Feature.INTEGERS):
                problems.append(f"integer literal {value}")
            case Prim(op) if op not in m.primitives:
                problems.append(f"primitive {op}")
            case Hole() | MetaVar():
                problems.append("hole")
    return sorted(set(problems))


# --- transitions ------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Next:
    state: MachineState


@dataclass(frozen=True, slots=True)
class Terminal:
    value: Outcome


@dataclass(frozen=True, slots=True)
class StuckAt:
    reason: str


@dataclass(frozen=True, slots=True)
class HaltAt:
    value: Outcome


StepResult = Next | Terminal | StuckAt | HaltAt


def step(m: MachineDef, s: MachineState) -> StepResult:
    """Perform one transition of machine `m` from state `s`."""
    if not s.control:
        if not s.stack:
            return StuckAt("empty stack with no control left")
        if s.dump is None:
            return Terminal(s.stack[0])
        d = s.dump
        return Next(MachineState((s.stack[0], *d.stack), d.env, d.control, d.dump))

    head, rest = s.control[0], s.control[1:]
    match head:
        case Var(name):
            value = s.env.lookup(name)
            if value is None:
                return StuckAt(f"unbound variable {name}")
            return Next(MachineState((value, *s.stack), s.env, rest, s.dump))
        case Lam(param, body):
            closure = Closure(param, s.env, body)
            return Next(MachineState((closure, *s.stack), s.env, rest, s.dump))
        case App(fun, arg):
            return Next(MachineState(s.stack, s.env, (arg, fun, APPLY, *rest), s.dump))
        case IntLit(value):
            if not m.enabled(Feature.INTEGERS):
                return StuckAt(f"integers not supported by machine {m.name}")
            return Next(MachineState((IntVal(value), *s.stack), s.env, rest, s.dump))
        case Prim(op):
            if op not in m.primitives:
                return StuckAt(f"primitive {op} not supported by machine {m.name}")
            return Next(MachineState((PrimPartial(op), *s.stack), s.env, rest, s.dump))
        case Apply():
            return _apply(m, s, rest)
        case Or() | Fail():
            return StuckAt("non-deterministic construct on a deterministic machine")
    return StuckAt("incomplete program (hole)")


def _apply(m: MachineDef, s: MachineState, rest: tuple[ControlItem, ...]) -> StepResult:
    if len(s.stack) < 2:
        return StuckAt("@ with fewer than two stack entries")
    fn, arg, *below = s.stack
    saved = tuple(below)

    if isinstance(fn, Closure):
        resume = MachineState(saved, s.env, rest, s.dump)
        return Next(MachineState((), fn.env.extend(fn.param, arg), (fn.body,), resume))

    if isinstance(fn, PrimPartial):
        prim = m.primitives.get(fn.op)
        if prim is None:
            return StuckAt(f"primitive {fn.op} not supported by machine {m.name}")
        applied = (*fn.applied, arg)
        if len(applied) < prim.arity:
            partial = PrimPartial(fn.op, applied)
            return Next(MachineState((partial, *saved), s.env, rest, s.dump))
        try:
            result = prim.implementation(applied)
        except PrimitiveFault as e:
            return StuckAt(str(e))
        match result:
            case Halt(value):
                return HaltAt(value)
            case Expand(term, env):
                resume = MachineState(saved, s.env, rest, s.dump)
                return Next(MachineState((), env, (term,), resume))
        return Next(MachineState((result, *saved), s.env, rest, s.dump))

    return StuckAt(f"cannot apply {render_outcome(fn)}")


# --- evaluation -----------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Value:
    # An Outcome for the machine; a term for the oracle evaluator.
    value: Any
    steps: int = 0


@dataclass(frozen=True, slots=True)
class Diverged:
    steps_used: int


@dataclass(frozen=True, slots=True)
class Stuck:
    state: MachineState | None
    reason: str
    steps: int = 0


@dataclass(frozen=True, slots=True)
class Halted:
    value: Any
    steps: int = 0


EvalResult = Value | Diverged | Stuck | Halted


@dataclass(frozen=True, slots=True)
class Calculation:
    """The sequence of states a run passed through, and how it ended."""

    states: tuple[MachineState, ...]
    result: EvalResult


def load(program: Expr, env: Env | Mapping[str, Outcome] | None = None) -> MachineState:
    """Load a conventional program onto the deterministic machine."""
    for node in iter_subterms(program):
        if isinstance(node, Or):
            raise NonConventional("or")
        if isinstance(node, Fail):
            raise NonConventional("fail")
        if isinstance(node, Hole | MetaVar):
            raise HoleNotAllowed(0)
    return MachineState((), _as_env(env), (program,), None)


def _as_env(env: Env | Mapping[str, Outcome] | None) -> Env:
    if isinstance(env, Env):
        return env
    return Env.of(env)


def run(
    m: MachineDef,
    program: Expr,
    budget: int,
    env: Env | Mapping[str, Outcome] | None = None,
) -> EvalResult:
    """Run `program` until it terminates, gets stuck, halts or spends `budget` steps."""
    result = _drive(m, load(program, env), budget, None)
    evaluation_logger.log_run(m.name, type(result).__name__, _steps_of(result))
    return result


def trace(
    m: MachineDef,
    program: Expr,
    budget: int,
    env: Env | Mapping[str, Outcome] | None = None,
) -> Calculation:
    """Like run, but keep every state from the initial one to the last."""
    states: list[MachineState] = []
    result = _drive(m, load(program, env), budget, states)
    return Calculation(tuple(states), result)


def _drive(
    m: MachineDef, state: MachineState, budget: int, record: list[MachineState] | None
) -> EvalResult:
    if budget < 1:
        raise ValueError("budget must be at least 1")
    steps = 0
    while True:
        if record is not None:
            record.append(state)
        outcome = step(m, state)
        match outcome:
            case Terminal(value):
                return Value(value, steps)
            case StuckAt(reason):
                return Stuck(state, reason, steps)
            case HaltAt(value):
                return Halted(value, steps + 1)
            case Next(following):
                if steps >= budget:
                    return Diverged(steps)
                steps += 1
                state = following


def _steps_of(result: EvalResult) -> int:
    if isinstance(result, Diverged):
        return result.steps_used
    return result.steps


# --- readback -------------------------------------------------------------------------------


def readback(v: Outcome) -> Expr:
    """Canonical term for an outcome: closures get their environment substituted in."""
    match v:
        case IntVal(value):
            return IntLit(value)
        case Closure(param, env, body):
            mapping = {
                name: readback(bound)
                for name in sorted(free_vars(body) - {param})
                if (bound := env.lookup(name)) is not None
            }
            return Lam(param, substitute(body, mapping))
        case PrimPartial(op, applied):
            term: Expr = Prim(op)
            for arg in applied:
                term = App(term, readback(arg))
            return term
    raise TypeError(f"{type(v).__name__} outcomes have no term form")


def render_outcome(v: Outcome) -> str:
    if isinstance(v, DataVal):
        return "{" + ", ".join(sorted(v.payload)) + "}"
    return render(readback(v))


def outcome_key(v: Outcome) -> str:
    """Deduplication key: equal exactly for alpha-equivalent readbacks."""
    if isinstance(v, DataVal):
        return "data:" + "\x00".join(sorted(v.payload))
    return canonical_text(readback(v))
