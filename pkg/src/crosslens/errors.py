"""Exception hierarchy for the analysis engine."""


class CrosslensError(Exception):
    """Base class for all engine errors."""


# --- bundle / run lifecycle ---

class MissingTaskFile(CrosslensError):
    pass


class EmptySources(CrosslensError):
    pass


class UnknownModality(CrosslensError):
    pass


class OutputDirExists(CrosslensError):
    pass


class IoFailure(CrosslensError):
    pass


class ConfigError(CrosslensError):
    pass


# --- profiling ---

class ParseFailure(CrosslensError):
    pass


class EncodingFailure(CrosslensError):
    pass


class VisionBackendUnavailable(CrosslensError):
    pass


class ExtractionInconsistent(CrosslensError):
    """Vision backend returned a ragged grid; reported, never silently repaired."""


# --- model gateway ---

class GatewayFailure(CrosslensError):
    pass


class BackendTimeout(GatewayFailure):
    pass


class BackendError(GatewayFailure):
    def __init__(self, message, status=None, body=None):
        super().__init__(message)
        self.status = status
        self.body = body


class RetriesExhausted(GatewayFailure):
    """All completion attempts failed validation; carries the last error."""

    def __init__(self, message, last_error=None, attempts=0):
        super().__init__(message)
        self.last_error = last_error
        self.attempts = attempts


class NoCodeBlock(CrosslensError):
    pass


# --- scoring ---

class EmptyGoalKeywords(CrosslensError):
    pass


class OutOfRangeInput(CrosslensError):
    pass


class OutOfRangeComponent(CrosslensError):
    pass


class EmptyGroundTruth(CrosslensError):
    pass


# --- synthesis ---

class MissingStageArtifacts(CrosslensError):
    pass
