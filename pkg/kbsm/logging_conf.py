"""Logging for the workbench: every handler writes to standard error or a file.

Standard out carries results (outcomes, reports, rendered trees), so nothing
configured here may write to it.
"""

import logging
import logging.config
import sys
from pathlib import Path
from typing import Any

from kbsm.settings import get_settings

CONSOLE_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
FILE_FORMAT = "%(asctime)s %(levelname)-7s %(name)s %(funcName)s:%(lineno)d: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Third-party loggers and the level they are held at.
LIBRARY_LEVELS = {"uvicorn": "INFO", "lark": "WARNING"}


def logging_config(level: str, log_file: str | None = None) -> dict[str, Any]:
    """dictConfig for the `kbsm` logger tree, optionally mirrored to a rotating file."""
    handlers: dict[str, dict[str, Any]] = {
        "stderr": {
            "class": "logging.StreamHandler",
            "level": level,
            "formatter": "console",
            "stream": sys.stderr,
        },
    }
    if log_file:
        handlers["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "level": level,
            "formatter": "file",
            "filename": log_file,
            "maxBytes": 5 * 1024 * 1024,
            "backupCount": 3,
            "encoding": "utf-8",
        }
    loggers: dict[str, dict[str, Any]] = {
        "kbsm": {"handlers": list(handlers), "level": level, "propagate": False},
    }
    for name, library_level in LIBRARY_LEVELS.items():
        loggers[name] = {"handlers": ["stderr"], "level": library_level, "propagate": False}
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "console": {"format": CONSOLE_FORMAT, "datefmt": DATE_FORMAT},
            "file": {"format": FILE_FORMAT, "datefmt": DATE_FORMAT},
        },
        "handlers": handlers,
        "loggers": loggers,
    }


def setup_logging(log_level: str | None = None, log_file: str | None = None) -> None:
    """Configure logging from the arguments, falling back to KBSM_LOG_LEVEL / KBSM_LOG_FILE."""
    settings = get_settings()
    level = (log_level or settings.log_level).upper()
    log_file = log_file or settings.log_file
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
    logging.config.dictConfig(logging_config(level, log_file))
    get_logger().debug(f"Logging at {level}" + (f", mirrored to {log_file}" if log_file else ""))


def get_logger(name: str | None = None) -> logging.Logger:
    """Logger under the `kbsm` namespace."""
    if not name:
        return logging.getLogger("kbsm")
    if name.startswith("kbsm"):
        return logging.getLogger(name)
    return logging.getLogger(f"kbsm.{name}")


class EvaluationLogger:
    """Logger for machine runs, searches and checks."""

    def __init__(self, name: str = "evaluation"):
        self.logger = get_logger(name)

    def log_run(self, machine: str, result_kind: str, steps: int) -> None:
        """Log a finished deterministic run."""
        self.logger.debug(
            f"Run finished on {machine}: {result_kind} after {steps} steps",
            extra={"machine": machine, "result_kind": result_kind, "steps": steps},
        )

    def log_search(
        self,
        machine: str,
        strategy: str,
        outcomes: int,
        complete: bool,
        diagnostics: dict[str, Any],
    ) -> None:
        """Log a finished non-deterministic search; truncated searches at INFO."""
        level = logging.DEBUG if complete else logging.INFO
        self.logger.log(
            level,
            f"Search on {machine} ({strategy}): {outcomes} outcomes, "
            f"{'complete' if complete else 'truncated'} {diagnostics}",
            extra={
                "machine": machine,
                "strategy": strategy,
                "outcomes": outcomes,
                "complete": complete,
            },
        )

    def log_check(self, check: str, subject: str, verdict: str, corpus_size: int) -> None:
        """Log a port or equivalence check verdict."""
        self.logger.info(
            f"Check {check} for {subject}: {verdict} on {corpus_size} programs",
            extra={"check": check, "subject": subject, "verdict": verdict},
        )


class RequestLogger:
    """One line per HTTP request, carrying the workbench error code of failures."""

    def __init__(self, name: str = "http"):
        self.logger = get_logger(name)

    def log_request(
        self,
        method: str,
        path: str,
        status_code: int,
        duration_ms: float,
        request_id: str | None = None,
        error_code: str | None = None,
    ) -> None:
        line = f"{method} {path} -> {status_code} in {duration_ms:.1f} ms [{request_id}]"
        extra = {"status_code": status_code, "request_id": request_id, "error_code": error_code}
        if error_code:
            self.logger.warning(f"{line} {error_code}", extra=extra)
        elif status_code >= 400:
            self.logger.warning(line, extra=extra)
        else:
            self.logger.info(line, extra=extra)

    def log_crash(self, method: str, path: str, error: Exception, request_id: str | None = None) -> None:
        self.logger.error(
            f"{method} {path} raised {type(error).__name__}: {error} [{request_id}]",
            extra={"request_id": request_id},
        )
