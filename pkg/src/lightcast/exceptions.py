"""Exception hierarchy. Every error raised on purpose derives from LightcastError."""


class LightcastError(Exception):
    pass


class FrameError(LightcastError, ValueError):
    pass


class DuplicateTimestampError(FrameError):
    pass


class InsufficientDataError(FrameError):
    pass


class ZeroVarianceError(LightcastError, ValueError):
    """A column is constant where a spread is required (scaling, correlation, R²)."""


class DegenerateDesignError(LightcastError, ValueError):
    """Regression design cannot be solved, e.g. a lag column collinear with the intercept."""


class ConvergenceWarning(UserWarning):
    pass


class RankDeficiencyWarning(UserWarning):
    pass


class ShortHistoryWarning(UserWarning):
    pass


class NotFittedError(LightcastError, AttributeError):
    pass


# ingestion


class ProviderError(LightcastError):
    pass


class HTTPError(ProviderError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class AuthError(HTTPError):
    pass


class EmptyPayloadError(ProviderError):
    pass


class MalformedPayloadError(ProviderError):
    pass


class StageError(LightcastError):
    """Benchmark stage failure; carries the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
