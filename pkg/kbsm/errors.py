"""Workbench error types and their HTTP rendering."""

from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from kbsm import metrics
from kbsm.constants import ExitCode
from kbsm.logging_conf import get_logger

logger = get_logger("errors")


class WorkbenchError(Exception):
    """Base workbench error class."""

    def __init__(
        self,
        message: str,
        error_code: str = "WORKBENCH_ERROR",
        exit_code: int = ExitCode.FAILED,
        status_code: int = 400,
        details: dict[str, Any] | None = None,
    ):
        self.message = message
        self.error_code = error_code
        self.exit_code = exit_code
        self.status_code = status_code
        self.details = details or {}
        super().__init__(self.message)


# --- syntax -----------------------------------------------------------------


class TermSyntaxError(WorkbenchError):
    """Malformed program text."""

    def __init__(self, position: int, message: str, line: int = 1, column: int = 1):
        self.position = position
        self.line = line
        self.column = column
        super().__init__(
            message=f"syntax error at {line}:{column}: {message}",
            error_code="SYNTAX_ERROR",
            exit_code=ExitCode.USAGE,
            status_code=422,
            details={"position": position, "line": line, "column": column},
        )


class HoleNotAllowed(WorkbenchError):
    """A `_` appeared where only complete programs are accepted."""

    def __init__(self, position: int):
        self.position = position
        super().__init__(
            message=f"hole '_' not allowed here (position {position})",
            error_code="HOLE_NOT_ALLOWED",
            exit_code=ExitCode.USAGE,
            status_code=422,
            details={"position": position},
        )


class InvalidPath(WorkbenchError):
    """A path selector does not match the shape of the term."""

    def __init__(self, message: str, path: tuple[str, ...] = ()):
        super().__init__(
            message=message,
            error_code="INVALID_PATH",
            details={"path": list(path)},
        )


class NoHoles(WorkbenchError):
    """An extension context without any hole."""

    def __init__(self) -> None:
        super().__init__(
            message="an extension context must contain at least one hole",
            error_code="NO_HOLES",
        )


# --- machines -----------------------------------------------------------------


class NonConventional(WorkbenchError):
    """A KBS construct was loaded onto the deterministic machine."""

    def __init__(self, construct: str):
        super().__init__(
            message=f"program is not conventional: contains {construct}",
            error_code="NON_CONVENTIONAL",
            details={"construct": construct},
        )


class UnknownMachine(WorkbenchError):
    """No machine is registered under the given name."""

    def __init__(self, name: str, known: list[str]):
        super().__init__(
            message=f"unknown machine {name!r} (known: {', '.join(known)})",
            error_code="UNKNOWN_MACHINE",
            exit_code=ExitCode.USAGE,
            status_code=404,
            details={"machine": name},
        )


# --- ports --------------------------------------------------------------------


class UnknownPort(WorkbenchError):
    """No built-in port is registered under the given name."""

    def __init__(self, name: str, known: list[str]):
        super().__init__(
            message=f"unknown port {name!r} (known: {', '.join(known)})",
            error_code="UNKNOWN_PORT",
            exit_code=ExitCode.USAGE,
            status_code=404,
            details={"port": name},
        )


class TranslationUndefined(WorkbenchError):
    """A partial translation has no image for its input."""

    def __init__(self, translation: str, reason: str):
        self.translation = translation
        self.reason = reason
        super().__init__(
            message=f"translation {translation} undefined: {reason}",
            error_code="TRANSLATION_UNDEFINED",
            details={"translation": translation, "reason": reason},
        )


# --- development graph ---------------------------------------------------------


class DuplicateId(WorkbenchError):
    def __init__(self, node_id: str):
        super().__init__(
            message=f"node {node_id!r} already exists",
            error_code="DUPLICATE_ID",
            details={"node": node_id},
        )


class InvalidProgram(WorkbenchError):
    def __init__(self, node_id: str, reason: str):
        super().__init__(
            message=f"node {node_id!r}: invalid program: {reason}",
            error_code="INVALID_PROGRAM",
            details={"node": node_id, "reason": reason},
        )


class EdgeValidationFailed(WorkbenchError):
    """Recomputing an edge payload did not reproduce the stored target."""

    def __init__(self, detail: str, recomputed: str | None = None, stored: str | None = None):
        self.recomputed = recomputed
        self.stored = stored
        message = f"edge validation failed: {detail}"
        if recomputed is not None:
            message += f" (recomputed {recomputed!r}, stored {stored!r})"
        super().__init__(
            message=message,
            error_code="EDGE_VALIDATION_FAILED",
            details={"detail": detail, "recomputed": recomputed, "stored": stored},
        )


class MachineMismatch(WorkbenchError):
    def __init__(self, kind: str, source: str, target: str):
        super().__init__(
            message=f"{kind} edge must stay on one machine, got {source} -> {target}",
            error_code="MACHINE_MISMATCH",
            details={"kind": kind, "source": source, "target": target},
        )


class CycleCreated(WorkbenchError):
    def __init__(self, source: str, target: str):
        super().__init__(
            message=f"edge {source} -> {target} would create a cycle",
            error_code="CYCLE_CREATED",
            details={"from": source, "to": target},
        )


class UnknownNode(WorkbenchError):
    def __init__(self, node_id: str):
        super().__init__(
            message=f"unknown node {node_id!r}",
            error_code="UNKNOWN_NODE",
            details={"node": node_id},
        )


class ReplayMismatch(WorkbenchError):
    def __init__(self, node_id: str, replayed: str, stored: str):
        super().__init__(
            message=f"replay of {node_id!r} gave {replayed!r}, stored {stored!r}",
            error_code="REPLAY_MISMATCH",
            details={"node": node_id, "replayed": replayed, "stored": stored},
        )


class FormatError(WorkbenchError):
    """Malformed persisted document."""

    def __init__(self, location: str, message: str):
        super().__init__(
            message=f"format error at {location}: {message}",
            error_code="FORMAT_ERROR",
            exit_code=ExitCode.USAGE,
            status_code=422,
            details={"location": location},
        )


# --- inference -----------------------------------------------------------------


class NotApplicable(WorkbenchError):
    def __init__(self, rule: str):
        super().__init__(
            message=f"rule {rule!r} is not applicable",
            error_code="NOT_APPLICABLE",
            details={"rule": rule},
        )


class StateSpaceExceeded(WorkbenchError):
    def __init__(self, limit: int):
        super().__init__(
            message=f"reachable state space exceeds {limit} states",
            error_code="STATE_SPACE_EXCEEDED",
            details={"limit": limit},
        )


class RuleFileError(WorkbenchError):
    def __init__(self, line: int, message: str):
        super().__init__(
            message=f"rule file line {line}: {message}",
            error_code="RULE_FILE_ERROR",
            exit_code=ExitCode.USAGE,
            status_code=422,
            details={"line": line},
        )


# --- HTTP surface ----------------------------------------------------------------


def error_body(
    request: Request,
    code: str,
    message: str,
    status_code: int,
    details: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """The `{"error": {...}}` body of every failed request."""
    return {
        "error": {
            "message": message,
            "code": code,
            "status_code": status_code,
            "request_id": getattr(request.state, "request_id", None),
            "details": details or {},
        }
    }


def _context(details: dict[str, Any]) -> str:
    return ", ".join(f"{key}={value}" for key, value in details.items() if value is not None)


async def workbench_exception_handler(request: Request, exc: WorkbenchError) -> JSONResponse:
    """Domain errors keep their code, status and context (machine, port, node, position)."""
    request.state.error_code = exc.error_code
    metrics.record_error(exc.error_code)
    logger.warning(
        f"{exc.error_code} on {request.url.path}: {exc.message}"
        + (f" ({_context(exc.details)})" if exc.details else ""),
        extra={"error_code": exc.error_code, "error_details": exc.details},
    )
    body = error_body(request, exc.error_code, exc.message, exc.status_code, exc.details)
    return JSONResponse(status_code=exc.status_code, content=body)


async def validation_exception_handler(
    request: Request, exc: RequestValidationError
) -> JSONResponse:
    """Malformed request bodies, before any program is parsed."""
    problems = [{"loc": list(err.get("loc", ())), "msg": err.get("msg", "")} for err in exc.errors()]
    request.state.error_code = "VALIDATION_ERROR"
    metrics.record_error("VALIDATION_ERROR")
    logger.info(f"Rejected body for {request.url.path}: {problems}")
    body = error_body(
        request, "VALIDATION_ERROR", "Validation error", 422, {"validation_errors": problems}
    )
    return JSONResponse(status_code=422, content=body)


async def internal_error_handler(request: Request, exc: Exception) -> JSONResponse:
    """Anything else is a bug in the workbench."""
    metrics.record_error("INTERNAL_ERROR")
    logger.error(f"Unhandled {type(exc).__name__} on {request.url.path}", exc_info=exc)
    body = error_body(request, "INTERNAL_ERROR", "Internal server error", 500)
    return JSONResponse(status_code=500, content=body)


def setup_error_handlers(app: FastAPI) -> None:
    app.add_exception_handler(WorkbenchError, workbench_exception_handler)  # type: ignore[arg-type]
    app.add_exception_handler(RequestValidationError, validation_exception_handler)  # type: ignore[arg-type]
    app.add_exception_handler(Exception, internal_error_handler)
