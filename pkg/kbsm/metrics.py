"""Metrics and monitoring functionality using Prometheus."""

from fastapi import FastAPI
from prometheus_client import Counter, Histogram, Info
from prometheus_fastapi_instrumentator import Instrumentator, metrics

from kbsm import __version__

EVALUATIONS = Counter(
    "kbsm_evaluations_total",
    "Deterministic runs by machine and result kind",
    ["machine", "result"],
)

MACHINE_STEPS = Histogram(
    "kbsm_machine_steps",
    "Transitions used by a deterministic run",
    ["machine"],
    buckets=(1, 10, 100, 1_000, 10_000, 100_000, float("inf")),
)

ENUMERATIONS = Counter(
    "kbsm_enumerations_total",
    "Non-deterministic searches by machine and completeness",
    ["machine", "complete"],
)

PORT_CHECKS = Counter(
    "kbsm_port_checks_total", "Port and machine checks by kind and verdict", ["check", "verdict"]
)

INFERENCES = Counter(
    "kbsm_inferences_total", "Inference runs by completeness", ["complete"]
)

ERRORS = Counter("kbsm_errors_total", "Failed requests by workbench error code", ["code"])

APP_INFO = Info("kbsm", "KBS machine workbench information")


def setup_metrics(app: FastAPI) -> None:
    """Setup Prometheus metrics for the FastAPI application."""
    APP_INFO.info({"version": __version__, "name": "KBS Machine Workbench"})

    instrumentator = Instrumentator(
        should_ignore_untemplated=True,
        should_instrument_requests_inprogress=True,
        excluded_handlers=["/health", "/metrics"],
    )
    instrumentator.add(
        metrics.latency(
            should_include_handler=True,
            should_include_method=True,
            should_include_status=True,
        )
    )
    instrumentator.instrument(app).expose(app, include_in_schema=False)


def record_evaluation(machine: str, result: str, steps: int) -> None:
    """Record a deterministic run."""
    EVALUATIONS.labels(machine=machine, result=result).inc()
    MACHINE_STEPS.labels(machine=machine).observe(steps)


def record_enumeration(machine: str, complete: bool) -> None:
    ENUMERATIONS.labels(machine=machine, complete=str(complete).lower()).inc()


def record_check(check: str, verdict: str) -> None:
    PORT_CHECKS.labels(check=check, verdict=verdict).inc()


def record_inference(complete: bool) -> None:
    INFERENCES.labels(complete=str(complete).lower()).inc()


def record_error(code: str) -> None:
    ERRORS.labels(code=code).inc()
