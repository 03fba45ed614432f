"""Development graphs: programs connected by the changes that produced them.

Nodes are programs on a named machine. Edges carry the change itself (a
modification at a path, an extension context, or a port name), so every
edge can be recomputed from its source node and the graph can be replayed
and revalidated at any time. Graph values are immutable; every operation
returns a new graph.
"""

from __future__ import annotations

import os
import tempfile
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType

from pydantic import ValidationError

from kbsm.constants import GRAPH_FORMAT_VERSION
from kbsm.errors import (
    CycleCreated,
    DuplicateId,
    EdgeValidationFailed,
    FormatError,
    InvalidPath,
    InvalidProgram,
    MachineMismatch,
    NoHoles,
    ReplayMismatch,
    TranslationUndefined,
    UnknownMachine,
    UnknownNode,
    UnknownPort,
    WorkbenchError,
)
from kbsm.logging_conf import get_logger
from kbsm.machine import get_machine, unsupported_constructs
from kbsm.ports import get_port
from kbsm.schemas import EdgeRecord, GraphDocument, NodeRecord
from kbsm.syntax import (
    Expr,
    Path as TermPath,
    PExpr,
    extend,
    modify,
    parse,
    parse_path,
    parse_program,
    render,
    render_path,
)

logger = get_logger("devgraph")


@dataclass(frozen=True, slots=True)
class Node:
    id: str
    program: Expr
    machine: str
    label: str = ""


@dataclass(frozen=True, slots=True)
class Modification:
    at: TermPath
    replacement: Expr


@dataclass(frozen=True, slots=True)
class Extension:
    context: PExpr


@dataclass(frozen=True, slots=True)
class PortChange:
    port_name: str
    # Free-text note of the check that vetted the port, if any.
    report: str | None = None


ChangeKind = Modification | Extension | PortChange


@dataclass(frozen=True, slots=True)
class ChangeEdge:
    source: str
    target: str
    kind: ChangeKind

    @property
    def kind_name(self) -> str:
        match self.kind:
            case Modification():
                return "modification"
            case Extension():
                return "extension"
        return "port"


@dataclass(frozen=True, slots=True)
class GraphPath:
    """Edges from a root to a node; empty when the node is the root itself."""

    start: str
    edges: tuple[ChangeEdge, ...] = ()

    @property
    def end(self) -> str:
        return self.edges[-1].target if self.edges else self.start


@dataclass(frozen=True)
class DevGraph:
    nodes: Mapping[str, Node] = field(default_factory=lambda: MappingProxyType({}))
    edges: tuple[ChangeEdge, ...] = ()

    @property
    def roots(self) -> list[str]:
        targets = {edge.target for edge in self.edges}
        return [node_id for node_id in self.nodes if node_id not in targets]

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def incoming(self, node_id: str) -> list[ChangeEdge]:
        return [edge for edge in self.edges if edge.target == node_id]

    def outgoing(self, node_id: str) -> list[ChangeEdge]:
        return [edge for edge in self.edges if edge.source == node_id]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DevGraph)
            and dict(self.nodes) == dict(other.nodes)
            and self.edges == other.edges
        )


# --- construction ------------------------------------------------------------------------


def _check_program(node: Node) -> None:
    try:
        machine = get_machine(node.machine)
    except UnknownMachine as e:
        raise InvalidProgram(node.id, e.message) from e
    problems = unsupported_constructs(machine, node.program)
    if problems:
        raise InvalidProgram(
            node.id, f"machine {node.machine} does not support {', '.join(problems)}"
        )


def add_node(g: DevGraph, node: Node) -> DevGraph:
    """Add a node; its program must be complete and runnable on its machine."""
    if node.id in g.nodes:
        raise DuplicateId(node.id)
    _check_program(node)
    logger.debug(f"Adding node {node.id} on {node.machine}")
    return replace(g, nodes=MappingProxyType({**g.nodes, node.id: node}))


def apply_change(g: DevGraph, edge: ChangeEdge, program: Expr) -> Expr:
    """The program `edge` produces from `program`."""
    try:
        match edge.kind:
            case Modification(at, replacement):
                return modify(program, at, replacement)
            case Extension(context):
                return extend(context, program)
            case PortChange(port_name):
                port = get_port(
                    port_name,
                    get_machine(g.node(edge.source).machine),
                    get_machine(g.node(edge.target).machine),
                )
                return port.program_t(program)
    except (InvalidPath, NoHoles, TranslationUndefined, UnknownPort) as e:
        raise EdgeValidationFailed(e.message) from e
    raise TypeError(edge.kind)


def _reaches(g: DevGraph, start: str, goal: str) -> bool:
    seen = set()
    stack = [start]
    while stack:
        current = stack.pop()
        if current == goal:
            return True
        if current in seen:
            continue
        seen.add(current)
        stack.extend(edge.target for edge in g.outgoing(current))
    return False


def validate_edge(g: DevGraph, edge: ChangeEdge) -> None:
    """Recompute the edge from its source and compare with its stored target."""
    source, target = g.node(edge.source), g.node(edge.target)
    if not isinstance(edge.kind, PortChange) and source.machine != target.machine:
        raise MachineMismatch(edge.kind_name, source.machine, target.machine)
    recomputed = apply_change(g, edge, source.program)
    if recomputed != target.program:
        raise EdgeValidationFailed(
            f"{edge.kind_name} {edge.source} -> {edge.target} does not reproduce the target",
            recomputed=render(recomputed),
            stored=render(target.program),
        )


def add_change(g: DevGraph, edge: ChangeEdge) -> DevGraph:
    """Append a change edge after validating it against both endpoints."""
    g.node(edge.source)
    g.node(edge.target)
    if _reaches(g, edge.target, edge.source):
        raise CycleCreated(edge.source, edge.target)
    validate_edge(g, edge)
    logger.debug(f"Adding {edge.kind_name} edge {edge.source} -> {edge.target}")
    return replace(g, edges=(*g.edges, edge))


def validate(g: DevGraph) -> None:
    """Revalidate every node and edge; raises on the first problem."""
    for node in g.nodes.values():
        _check_program(node)
    for edge in g.edges:
        validate_edge(g, edge)


# --- paths -----------------------------------------------------------------------------------


def paths_to_node(g: DevGraph, node_id: str) -> list[GraphPath]:
    """Every edge sequence from a root to `node_id`."""
    g.node(node_id)
    found: list[GraphPath] = []
    # Walk backwards; each entry is the node reached and the edges after it.
    stack: list[tuple[str, tuple[ChangeEdge, ...]]] = [(node_id, ())]
    while stack:
        current, suffix = stack.pop()
        incoming = g.incoming(current)
        if not incoming:
            found.append(GraphPath(current, suffix))
            continue
        for edge in reversed(incoming):
            stack.append((edge.source, (edge, *suffix)))
    return found


def iter_all_paths(g: DevGraph) -> Iterator[GraphPath]:
    for node_id in g.nodes:
        yield from paths_to_node(g, node_id)


def replay(g: DevGraph, path: GraphPath) -> Expr:
    """Re-apply the path's changes to its start program and check the result."""
    program = g.node(path.start).program
    position = path.start
    for edge in path.edges:
        if edge.source != position:
            raise WorkbenchError(
                f"path is not contiguous at {position} (edge starts at {edge.source})",
                error_code="INVALID_GRAPH_PATH",
            )
        program = apply_change(g, edge, program)
        position = edge.target
    stored = g.node(position).program
    if program != stored:
        raise ReplayMismatch(position, render(program), render(stored))
    return program


def alternatives(g: DevGraph, node_id: str) -> list[ChangeEdge]:
    """Changes leaving `node_id`: the development paths branching there."""
    g.node(node_id)
    return g.outgoing(node_id)


# --- persistence -----------------------------------------------------------------------------


def to_document(g: DevGraph) -> GraphDocument:
    nodes = [
        NodeRecord(id=node.id, machine=node.machine, program=render(node.program), label=node.label)
        for node in g.nodes.values()
    ]
    edges = [_edge_record(edge) for edge in g.edges]
    return GraphDocument(version=GRAPH_FORMAT_VERSION, nodes=nodes, edges=edges)


def _edge_record(edge: ChangeEdge) -> EdgeRecord:
    # The record validates its payload on construction, so it is built whole.
    ends = {"source": edge.source, "target": edge.target, "kind": edge.kind_name}
    match edge.kind:
        case Modification(at, replacement):
            return EdgeRecord(**ends, at=[s.value for s in at], replacement=render(replacement))
        case Extension(context):
            return EdgeRecord(**ends, context=render(context))
        case PortChange(port_name, report):
            return EdgeRecord(**ends, port=port_name, report=report)
    raise TypeError(edge.kind)


def _parse_field(location: str, text: str, allow_holes: bool = False) -> Expr:
    try:
        return parse(text, allow_holes=allow_holes) if allow_holes else parse_program(text)
    except WorkbenchError as e:
        raise FormatError(location, e.message) from e


def _edge_from_record(index: int, record: EdgeRecord) -> ChangeEdge:
    location = f"edges.{index}"
    kind: ChangeKind
    match record.kind:
        case "modification":
            try:
                at = parse_path(",".join(record.at or []))
            except InvalidPath as e:
                raise FormatError(f"{location}.at", e.message) from e
            kind = Modification(at, _parse_field(f"{location}.replacement", record.replacement or ""))
        case "extension":
            kind = Extension(_parse_field(f"{location}.context", record.context or "", allow_holes=True))
        case _:
            kind = PortChange(record.port or "", record.report)
    return ChangeEdge(record.source, record.target, kind)


def from_document(document: GraphDocument) -> DevGraph:
    """Rebuild a graph, revalidating every node and edge on the way."""
    if document.version != GRAPH_FORMAT_VERSION:
        raise FormatError("version", f"unsupported graph format version {document.version}")
    g = DevGraph()
    for index, record in enumerate(document.nodes):
        program = _parse_field(f"nodes.{index}.program", record.program)
        g = add_node(g, Node(record.id, program, record.machine, record.label))
    for index, record in enumerate(document.edges):
        g = add_change(g, _edge_from_record(index, record))
    return g


def _describe_validation_error(error: ValidationError) -> tuple[str, str]:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ())) or "document"
    return location, first.get("msg", "invalid document")


def save(g: DevGraph, destination: str | Path) -> None:
    """Write the graph as JSON, replacing the destination atomically."""
    destination = Path(destination)
    text = to_document(g).model_dump_json(by_alias=True, indent=2, exclude_none=True)
    fd, tmp = tempfile.mkstemp(dir=destination.parent or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
        os.replace(tmp, destination)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.info(f"Saved graph with {len(g.nodes)} nodes to {destination}")


def loads(text: str) -> DevGraph:
    try:
        document = GraphDocument.model_validate_json(text)
    except ValidationError as e:
        raise FormatError(*_describe_validation_error(e)) from e
    return from_document(document)


def load(source: str | Path) -> DevGraph:
    return loads(Path(source).read_text(encoding="utf-8"))


def describe_edge(edge: ChangeEdge) -> str:
    match edge.kind:
        case Modification(at, replacement):
            detail = f"at [{render_path(at)}] put {render(replacement)}"
        case Extension(context):
            detail = f"into {render(context)}"
        case PortChange(port_name, report):
            detail = port_name + (f" ({report})" if report else "")
    return f"{edge.source} -> {edge.target} {edge.kind_name} {detail}"
