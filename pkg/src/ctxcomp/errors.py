"""Exception types shared across the toolkit."""

from __future__ import annotations


class CtxError(Exception):
    """Base class for every error raised by ctxcomp."""


class ParseError(CtxError):
    pass


class NoChangeFound(CtxError):
    pass


class GitError(CtxError):
    pass


class EmptyCorpus(CtxError):
    pass


class EmptySequence(CtxError):
    pass


class EmptyPool(CtxError):
    pass


class UnknownMethod(CtxError):
    pass


class MethodOverBudget(CtxError):
    pass


class SchemaError(CtxError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RelevantMissing(CtxError):
    pass


class MissingInstance(CtxError):
    pass


class EmptyUnion(CtxError):
    pass


class PositiveLogLik(CtxError):
    pass


class CoverageGap(CtxError):
    """Some model has no prediction for some instance.

    ``gaps`` lists the missing ``(model, instance_id)`` pairs.
    """

    def __init__(self, gaps: list[tuple[str, str]]):
        self.gaps = gaps
        shown = ", ".join(f"{m}:{i}" for m, i in gaps[:10])
        more = f" (+{len(gaps) - 10} more)" if len(gaps) > 10 else ""
        super().__init__(f"{len(gaps)} missing predictions: {shown}{more}")


class EmptyIntersection(CtxError):
    """No instance is present in every dataset variant."""


class ConfigError(CtxError):
    pass
