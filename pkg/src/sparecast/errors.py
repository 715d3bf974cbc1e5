"""Exception types shared across the engine."""


class SparecastError(Exception):
    """Base class for all engine errors."""


class DocumentError(SparecastError):
    """Document-level validation failure; carries the offending node id."""

    def __init__(self, message: str, node_id: str | None = None):
        super().__init__(message)
        self.node_id = node_id


class MalformedDocument(DocumentError):
    pass


class CycleDetected(DocumentError):
    pass


class DanglingParent(DocumentError):
    pass


class NegativeValue(DocumentError):
    pass


class UnknownNode(SparecastError):
    pass


class EmptyInput(SparecastError):
    pass


class NonPositiveFactor(SparecastError):
    pass


class TooManyModes(SparecastError):
    """Uncertain-mode count above the enumeration cap; caller must prune or escalate."""

    def __init__(self, message: str, count: int | None = None, cap: int | None = None):
        super().__init__(message)
        self.count = count
        self.cap = cap


class UnknownIndicator(SparecastError):
    pass


class DegeneratePrior(SparecastError):
    pass


class MissingRateSummary(SparecastError):
    pass


class MissingChildPlan(SparecastError):
    pass


class NotSpared(SparecastError):
    pass


class StaleEdit(SparecastError):
    pass


class UnknownTarget(SparecastError):
    pass


class UnknownHotspot(SparecastError):
    pass


class InvalidAction(SparecastError):
    pass


class CapExceeded(SparecastError):
    pass


class UnknownSession(SparecastError):
    pass
