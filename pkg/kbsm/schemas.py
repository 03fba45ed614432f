"""Pydantic schemas for reports, persisted graphs and HTTP bodies."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from kbsm.constants import GRAPH_FORMAT_VERSION, Strategy, Verdict

# --- check reports -----------------------------------------------------------------


class CheckEntry(BaseModel):
    """One corpus item singled out by a check."""

    index: int = Field(..., ge=0, description="Position in the corpus")
    program: str = Field(..., description="Program in concrete syntax")
    expected: str | None = Field(None, description="Translated source outcome(s)")
    actual: str | None = Field(None, description="Target outcome(s)")
    note: str = Field(default="", description="Why the item was singled out")


class CheckReport(BaseModel):
    """Evidence record of an equivalence, consistency or completeness check."""

    check: str = Field(..., description="Which relation was checked")
    subject: str = Field(..., description="Port or machine pair checked")
    mode: Literal["conventional", "kbs", "homomorphism"] = Field(default="conventional")
    corpus_size: int = Field(default=0, ge=0)
    passed: int = Field(default=0, ge=0)
    failed: list[CheckEntry] = Field(default_factory=list)
    undefined_both: int = Field(default=0, ge=0)
    inconclusive: list[CheckEntry] = Field(default_factory=list)
    translation_undefined: list[CheckEntry] = Field(default_factory=list)
    lost_outcomes: list[CheckEntry] = Field(
        default_factory=list, description="KBS items whose target set is a proper subset"
    )
    verdict: Verdict
    complete: bool = Field(..., description="Complete on this corpus")
    budget_notes: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def verdict_matches_failures(self) -> "CheckReport":
        if (self.verdict == Verdict.INCONSISTENT) != bool(self.failed):
            raise ValueError("verdict is inconsistent exactly when some item failed")
        return self


# --- development graph documents -------------------------------------------------


class NodeRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(..., min_length=1)
    machine: str = Field(..., min_length=1)
    program: str = Field(..., description="Program in concrete syntax")
    label: str = ""


class EdgeRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    source: str = Field(..., alias="from")
    target: str = Field(..., alias="to")
    kind: Literal["modification", "extension", "port"]
    at: list[str] | None = Field(None, description="Selector names (modification)")
    replacement: str | None = Field(None, description="Replacement program (modification)")
    context: str | None = Field(None, description="Parameterised program (extension)")
    port: str | None = Field(None, description="Port name (port)")
    report: str | None = Field(None, description="Verification note (port)")

    @model_validator(mode="after")
    def payload_matches_kind(self) -> "EdgeRecord":
        required = {
            "modification": ("at", "replacement"),
            "extension": ("context",),
            "port": ("port",),
        }[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind} edge is missing {', '.join(missing)}")
        return self


class GraphDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int = GRAPH_FORMAT_VERSION
    nodes: list[NodeRecord] = Field(default_factory=list)
    edges: list[EdgeRecord] = Field(default_factory=list)


# --- HTTP bodies -------------------------------------------------------------------------


class EvalRequest(BaseModel):
    """Request schema for a deterministic run."""

    program: str = Field(..., min_length=1, max_length=100000)
    machine: str = Field(default="arith")
    budget: int | None = Field(default=None, ge=1)


class EvalResponse(BaseModel):
    kind: Literal["value", "stuck", "diverged", "halted"]
    result: str | None = Field(None, description="Readback of the value or halt argument")
    reason: str | None = None
    steps: int


class SearchRequest(BaseModel):
    """Request schema for enumeration and tree display."""

    program: str = Field(..., min_length=1, max_length=100000)
    machine: str = Field(default="arith")
    strategy: Strategy | None = None
    max_steps: int | None = Field(default=None, ge=1)
    max_depth: int | None = Field(default=None, ge=1)
    max_outcomes: int | None = Field(default=None, ge=1)


class Diagnostics(BaseModel):
    pruned: int
    stuck: int
    truncated: int
    halted: int
    steps: int


class EnumerateResponse(BaseModel):
    outcomes: list[str]
    complete: bool
    diagnostics: Diagnostics


class TreeResponse(BaseModel):
    tree: str
    outcomes: list[str]
    complete: bool


class CheckPortRequest(BaseModel):
    """Request schema for port and machine checks."""

    mode: Literal[
        "conventional", "kbs", "completeness", "equivalence", "kbs-equivalence"
    ] = "conventional"
    port: str | None = None
    rewrites: str | None = Field(None, description="Rewrite table text")
    source: str = "arith"
    target: str = "arith"
    corpus: list[str] = Field(default_factory=list)
    budget: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def port_given_for_port_modes(self) -> "CheckPortRequest":
        if self.mode not in ("equivalence", "kbs-equivalence") and not (
            self.port or self.rewrites
        ):
            raise ValueError("a port or a rewrite table is required")
        return self


class InferRequest(BaseModel):
    """Request schema for the inference engine; `rules` uses the rule-file format."""

    rules: str
    strategy: Strategy | None = None
    max_steps: int | None = Field(default=None, ge=1)
    max_depth: int | None = Field(default=None, ge=1)
    max_outcomes: int | None = Field(default=None, ge=1)


class InferResponse(BaseModel):
    outcomes: list[list[str]]
    complete: bool
    dead_ends: int


class MachineInfo(BaseModel):
    name: str
    features: list[str]
    primitives: list[str]


class PortInfo(BaseModel):
    name: str
    description: str
