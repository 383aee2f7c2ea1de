"""Custom exceptions for splitting computations."""


class SplittingError(Exception):
    """Base class for all splitkit errors."""
    pass


class CapabilityError(SplittingError):
    """Raised when a group or subgroup kind has no supporting engine."""

    def __init__(self, feature: str, detail: str = ""):
        self.feature = feature
        self.detail = detail
        message = f"unsupported: {feature}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class BudgetError(SplittingError):
    """Raised when an enumeration exceeds its explicit budget."""

    def __init__(self, what: str, limit: int):
        self.what = what
        self.limit = limit
        super().__init__(f"{what} exceeded budget of {limit}")


class ComputationTimeoutError(SplittingError):
    """Raised when a bounded computation runs out of time."""

    def __init__(self, what: str, timeout: float):
        self.what = what
        self.timeout = timeout
        super().__init__(f"{what} timed out after {timeout} seconds")


class GroupMismatchError(SplittingError):
    """Raised when elements of different groups are combined."""

    def __init__(self, left: str, right: str):
        self.left = left
        self.right = right
        super().__init__(f"cannot combine elements of {left} and {right}")


class DisconnectedInputError(SplittingError):
    """Raised when sources and sinks are not connected in a window."""

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"disconnected input: {detail}")


class SizeRefusalError(SplittingError):
    """Raised when an exhaustive routine is handed an oversize input."""

    def __init__(self, what: str, size: int, limit: int):
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(f"{what} refused: size {size} exceeds {limit}")


class ContainmentError(SplittingError):
    """Raised when an artificial split is asked for with C not inside D."""

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"containment failed: {detail}")


class TrivialSplittingError(SplittingError):
    """Raised when a trivial splitting reaches an analysis pipeline."""

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"trivial splitting: {detail}")


class PocsetAxiomError(SplittingError):
    """Raised when a pocset window violates an axiom."""

    def __init__(self, detail: str, pair: tuple = ()):
        self.detail = detail
        self.pair = pair
        message = detail if not pair else f"{detail}: " + " / ".join(str(p) for p in pair)
        super().__init__(message)


class WindowInstabilityError(SplittingError):
    """Raised when a claim fails at the current window scale."""

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"window instability: {detail}")


class ScenarioParseError(SplittingError):
    """Raised when a scenario file cannot be parsed."""

    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        self.detail = detail
        super().__init__(f"line {line_no}: {detail}")
