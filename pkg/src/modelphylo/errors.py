from __future__ import annotations


class ModelPhyloError(Exception):
    """Base class for all errors raised by this package."""


class SnapshotIOError(ModelPhyloError):
    pass


class CorruptSnapshotError(ModelPhyloError):
    def __init__(self, malformed: int, total: int, threshold: float):
        self.malformed = malformed
        self.total = total
        self.threshold = threshold
        super().__init__(
            f"{malformed}/{total} malformed lines exceeds the {threshold:.0%} threshold"
        )


class NodeNotFoundError(ModelPhyloError, KeyError):
    pass


class UndefinedInputError(ModelPhyloError, ValueError):
    pass


class NoDataError(ModelPhyloError, ValueError):
    pass


class NoSitesError(ModelPhyloError, ValueError):
    pass


class TooLargeError(ModelPhyloError, ValueError):
    pass


class InvalidPermutationError(ModelPhyloError, ValueError):
    pass


class AuthError(ModelPhyloError):
    pass


class FetchAborted(ModelPhyloError):
    """Retries exhausted; ``resume_token`` restarts from the last completed page."""

    def __init__(self, message: str, resume_token: str | None, records_fetched: int = 0):
        super().__init__(message)
        self.resume_token = resume_token
        self.records_fetched = records_fetched
