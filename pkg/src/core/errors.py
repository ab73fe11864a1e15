from typing import Optional


class CQError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code: int = 1


# ----------------------------------------------------------------------
# Grammar errors (validation failures, exit 2)
# ----------------------------------------------------------------------
class GrammarError(CQError):
    exit_code = 2


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class GrammarDefinitionError(GrammarError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{suffix}")


class EmptyLanguageError(GrammarError):
    def __init__(self, start: str, unproductive):
        self.start = start
        self.unproductive = frozenset(unproductive)
        names = ", ".join(sorted(self.unproductive))
        super().__init__(f"start symbol '{start}' derives no program (unproductive: {names})")


# ----------------------------------------------------------------------
# Enumeration / sampling errors
# ----------------------------------------------------------------------
class IndexOutOfRangeError(CQError, IndexError):
    def __init__(self, index: int, total: Optional[int]):
        self.index = index
        self.total = total
        if total is None:
            super().__init__(f"index {index} is not a valid enumeration index")
        else:
            super().__init__(f"index {index} is out of range for a language of {total} programs")


class EstimationError(CQError):
    pass


class LanguageExhaustedError(EstimationError):
    """The (finite) language has no program at or beyond the requested size."""


class BucketPartitionError(CQError, ValueError):
    pass


# ----------------------------------------------------------------------
# Harness / metrics errors
# ----------------------------------------------------------------------
class ConfigurationError(CQError):
    pass


class EmptyCampaignError(CQError):
    def __init__(self, language: str = ""):
        self.language = language
        name = f"campaign '{language}'" if language else "campaign"
        super().__init__(f"{name} has no samples; CQ is undefined")
