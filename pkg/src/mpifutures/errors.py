"""Exception hierarchy shared by all modules."""


class FutureError(Exception):
    """Base class for every error raised by this package."""


class ModelError(FutureError):
    """A problem with a model: syntax, sorts, references.

    ``span`` is an optional ``(line, column)`` pair, 1-based.
    """

    def __init__(self, message, span=None):
        self.message = message
        self.span = span
        if span is not None:
            message = f"{span[0]}:{span[1]}: {message}"
        super().__init__(message)


class ModelSyntaxError(ModelError):
    def __init__(self, message, span=None, expected=()):
        self.expected = tuple(expected)
        if self.expected:
            message = f"{message} (expected {', '.join(self.expected)})"
        super().__init__(message, span)


class SortError(ModelError):
    pass


class UndefinedReference(ModelError):
    pass


class UnboundVariable(ModelError):
    pass


class UnknownProcess(ModelError):
    pass


class NonFiniteSort(ModelError):
    pass


class UnguardedRecursion(ModelError):
    pass


class RankOutOfRange(FutureError):
    pass


class RankCountOutOfRange(FutureError):
    pass


class EmptyQueue(FutureError):
    pass


class DuplicateValues(FutureError):
    pass


class UnknownAction(FutureError):
    pass


class NotParallel(FutureError):
    pass


class PermissionOverflow(FutureError):
    pass


class ProgramFault(FutureError):
    pass


class BoundExceeded(FutureError):
    pass
