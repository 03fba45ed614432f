"""Hypothesis strategies for terms, rule systems and development graphs."""

from hypothesis import strategies as st

from kbsm.devgraph import ChangeEdge, DevGraph, Extension, Modification, Node, PortChange, add_change, add_node, apply_change
from kbsm.inference import Goal, Rule
from kbsm.syntax import App, Expr, Fail, Hole, IntLit, Lam, Or, PExpr, Prim, Var, all_paths

NAMES = ("x", "y", "z")
FACTS = ("a", "b", "c", "d", "e", "f")


def _draw_term(draw: st.DrawFn, bound: tuple[str, ...], fuel: int, choice: bool) -> Expr:
    kinds = ["int", "id"]
    if bound:
        kinds += ["var", "var"]
    if fuel >= 2:
        kinds += ["lam", "prim"]
    if fuel >= 3:
        kinds += ["app", "app"]
        if choice:
            kinds += ["or"]
    if choice:
        kinds += ["fail"]
    kind = draw(st.sampled_from(kinds))
    match kind:
        case "int":
            return IntLit(draw(st.integers(0, 9)))
        case "id":
            return Lam("w", Var("w"))
        case "var":
            return Var(draw(st.sampled_from(bound)))
        case "prim":
            return Prim(draw(st.sampled_from(["add", "mul"])))
        case "fail":
            return Fail()
        case "lam":
            name = draw(st.sampled_from(NAMES))
            return Lam(name, _draw_term(draw, (*bound, name), fuel - 1, choice))
    left_fuel = draw(st.integers(1, fuel - 2))
    left = _draw_term(draw, bound, left_fuel, choice)
    right = _draw_term(draw, bound, fuel - 1 - left_fuel, choice)
    return Or(left, right) if kind == "or" else App(left, right)


@st.composite
def conventional_terms(draw: st.DrawFn, max_size: int = 30) -> Expr:
    """Closed terms without `or` and `fail`, of at most `max_size` nodes."""
    return _draw_term(draw, (), max_size, choice=False)


@st.composite
def kbs_terms(draw: st.DrawFn, max_size: int = 20) -> Expr:
    """Closed terms that may use `or` and `fail`."""
    return _draw_term(draw, (), max_size, choice=True)


CONTEXTS: tuple[PExpr, ...] = (
    Hole(),
    App(Hole(), IntLit(1)),
    App(Lam("x", Var("x")), Hole()),
    Lam("y", Hole()),
    Or(Hole(), IntLit(7)),
    App(App(Prim("add"), Hole()), IntLit(2)),
)


@st.composite
def one_hole_contexts(draw: st.DrawFn) -> PExpr:
    """A one-hole context, possibly nested inside a second one."""
    outer = draw(st.sampled_from(CONTEXTS))
    inner = draw(st.sampled_from(CONTEXTS))
    return _plug(outer, inner)


def _plug(context: PExpr, inner: PExpr) -> PExpr:
    match context:
        case Hole():
            return inner
        case Lam(param, body):
            return Lam(param, _plug(body, inner))
        case App(fun, arg):
            return App(_plug(fun, inner), _plug(arg, inner))
        case Or(left, right):
            return Or(_plug(left, inner), _plug(right, inner))
    return context


def _facts(draw: st.DrawFn, max_size: int = 3) -> frozenset[str]:
    return frozenset(draw(st.sets(st.sampled_from(FACTS), max_size=max_size)))


@st.composite
def rule_systems(draw: st.DrawFn) -> tuple[list[Rule], Goal, frozenset[str]]:
    """Requires/adds/removes rules over at most six facts, with a goal and a start set."""
    rules = []
    for index in range(draw(st.integers(0, 6))):
        requires = _facts(draw)
        adds = _facts(draw)
        removes = _facts(draw) - adds
        rules.append(Rule(f"r{index}", requires, adds, removes))
    goal = Goal(_facts(draw, max_size=2))
    return rules, goal, _facts(draw)


REPLACEMENTS: tuple[Expr, ...] = (IntLit(1), Var("x"), Lam("x", Var("x")), App(Prim("add"), IntLit(2)))
EXTENSIONS: tuple[PExpr, ...] = (App(Lam("x", Var("x")), Hole()), Lam("x", Hole()), Or(Hole(), IntLit(0)))
ROOTS: tuple[Expr, ...] = (Lam("x", Var("x")), App(App(Prim("add"), IntLit(1)), IntLit(2)), Or(IntLit(1), IntLit(2)))


@st.composite
def dev_graphs(draw: st.DrawFn, max_nodes: int = 50) -> DevGraph:
    """Valid graphs grown one node at a time from one or two roots."""
    g = DevGraph()
    for index in range(draw(st.integers(1, 2))):
        g = add_node(g, Node(f"root{index}", draw(st.sampled_from(ROOTS)), "arith"))
    for index in range(draw(st.integers(0, max_nodes - len(g.nodes)))):
        node_id = f"n{index}"
        source = g.node(draw(st.sampled_from(sorted(g.nodes))))
        kind_name = draw(st.sampled_from(["modification", "extension", "port"]))
        if kind_name == "modification":
            at = draw(st.sampled_from(list(all_paths(source.program))))
            kind = Modification(at, draw(st.sampled_from(REPLACEMENTS)))
        elif kind_name == "extension":
            kind = Extension(draw(st.sampled_from(EXTENSIONS)))
        else:
            kind = PortChange(draw(st.sampled_from(["identity", "left-commit", "fail-elimination"])))
        edge = ChangeEdge(source.id, node_id, kind)
        placeholder = add_node(g, Node(node_id, source.program, "arith"))
        program = apply_change(placeholder, edge, source.program)
        g = add_change(add_node(g, Node(node_id, program, "arith", label=kind_name)), edge)
    return g
