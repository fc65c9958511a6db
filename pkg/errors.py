"""Exception hierarchy for the analysis modules.

Every error carries a ``details`` dict so reports and the JSON service can
surface measured values alongside the message.
"""


class AnalysisError(Exception):
    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": self.message, "details": self.details}


class InverseError(AnalysisError):
    pass


class NewtonError(AnalysisError):
    pass


class PreconditionError(AnalysisError):
    pass


class RefinementBudgetError(AnalysisError):
    pass


class DegenerateFrameError(AnalysisError):
    pass


class RootFindingError(AnalysisError):
    pass


class BracketError(AnalysisError):
    pass


class OrbitEscapedError(AnalysisError):
    pass


class OrderingError(AnalysisError):
    """Two computed parameters came out in the wrong order."""


class EscapeFailure(AnalysisError):
    pass


class LocalizationFailure(AnalysisError):
    pass


class ConfigError(AnalysisError):
    """Invalid run configuration; ``details['errors']`` mirrors form.errors."""
