"""Constants for the workbench."""

from enum import IntEnum, StrEnum


class ExitCode(IntEnum):
    """Process exit codes of the command-line driver."""

    OK = 0
    FAILED = 1
    USAGE = 2
    INCONCLUSIVE = 3


class Selector(StrEnum):
    """Child selectors making up a term path."""

    LAM_BODY = "lam-body"
    APP_FUN = "app-fun"
    APP_ARG = "app-arg"
    OR_LEFT = "or-left"
    OR_RIGHT = "or-right"


class Feature(StrEnum):
    """Machine extensions."""

    BASE = "base"
    INTEGERS = "integers"
    ARITH = "arith"
    HALT = "halt"


class Strategy(StrEnum):
    BFS = "bfs"
    DFS = "dfs"


class Verdict(StrEnum):
    EQUIVALENT = "equivalent"
    CONSISTENT = "consistent"
    CONSISTENT_AND_COMPLETE = "consistent-and-complete"
    INCONSISTENT = "inconsistent"


# Reserved words of the concrete grammar.
KEYWORDS = frozenset({"or", "fail"})

# Built-in primitives and their arities.
PRIMITIVE_ARITY = {"add": 2, "mul": 2, "halt": 1}

# Feature enabling each built-in primitive.
PRIMITIVE_FEATURE = {
    "add": Feature.ARITH,
    "mul": Feature.ARITH,
    "halt": Feature.HALT,
}

GRAPH_FORMAT_VERSION = 1
GRAPH_FILE_SUFFIX = ".devg.json"
