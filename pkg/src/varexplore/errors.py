"""Exception hierarchy shared by every module.

Store errors are mapped to and from their class name on the HTTP wire, so
every exception that can cross the network lives here.
"""


class VarExploreError(Exception):
    """Base class for all package errors."""


# -- parameter space --------------------------------------------------------

class ParamSpaceError(VarExploreError, ValueError):
    pass


class MalformedRange(ParamSpaceError):
    pass


class InvertedBounds(ParamSpaceError):
    pass


class NonPositiveLogBound(ParamSpaceError):
    pass


class PointSpaceMismatch(ParamSpaceError):
    pass


# -- trial store ------------------------------------------------------------

class StoreError(VarExploreError):
    retryable = False


class StoreUnavailable(StoreError):
    retryable = True


class StudyNotFound(StoreError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class StudyConfigMismatch(StoreError, ValueError):
    pass


class UnknownTrial(StoreError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class IllegalTransition(StoreError):
    pass


class NonFiniteValue(StoreError, ValueError):
    pass


class NoCompletedTrials(StoreError):
    pass


class CorruptLog(StoreError):
    pass


# -- samplers ---------------------------------------------------------------

class SamplerError(VarExploreError):
    pass


class UnknownSampler(SamplerError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MultiObjectiveUnsupported(SamplerError):
    pass


class DimensionMismatch(SamplerError, ValueError):
    pass


# -- fanova -----------------------------------------------------------------

class InsufficientData(VarExploreError, ValueError):
    pass


class DegenerateTargets(VarExploreError, ValueError):
    pass


# -- executor ---------------------------------------------------------------

class WorkflowError(VarExploreError):
    pass


class UnknownWorkflow(WorkflowError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnboundMetricInput(WorkflowError):
    pass


class CycleIntroduced(WorkflowError):
    pass


class StepFailed(WorkflowError):
    def __init__(self, step, message):
        super().__init__(f"step {step!r} failed: {message}")
        self.step = step


class StepTimeout(StepFailed):
    pass


class MonitorUnreachable(VarExploreError):
    pass


class MalformedResponse(VarExploreError, ValueError):
    pass


# -- plume ------------------------------------------------------------------

class ShapeMismatch(VarExploreError, ValueError):
    pass


class OutOfDomainSource(VarExploreError, ValueError):
    pass


# -- driver -----------------------------------------------------------------

class PayloadError(VarExploreError, ValueError):
    """Aggregated payload validation failure.

    ``diagnostics`` is a list of ``(path, message)`` pairs where ``path`` is a
    dotted location inside the payload document.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = [f"{path}: {msg}" for path, msg in self.diagnostics]
        super().__init__("invalid payload:\n  " + "\n  ".join(lines))


_BY_NAME = {
    name: obj
    for name, obj in list(globals().items())
    if isinstance(obj, type) and issubclass(obj, VarExploreError)
}


def error_class(name):
    """Look up an exception class by name (used by the HTTP store client)."""
    return _BY_NAME.get(name, StoreError)
