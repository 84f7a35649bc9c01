from typing import Optional


class BandAssignmentError(Exception):
    """Base error. `exit_code` plays the role an HTTP status code plays for a route."""

    exit_code: int = 2

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class UsageError(BandAssignmentError):
    exit_code = 1


class ConfigError(BandAssignmentError):
    pass


class MissingFeatureError(BandAssignmentError):
    def __init__(self, feature: str, index: int):
        super().__init__(f"example {index} is missing feature '{feature}'")
        self.feature = feature
        self.index = index


class DegenerateScaleError(BandAssignmentError):
    def __init__(self, feature: str):
        super().__init__(f"feature '{feature}' has zero variance; cannot standardize")
        self.feature = feature


class FeatureMismatchError(BandAssignmentError):
    pass


class DatasetTooSmallError(BandAssignmentError):
    pass


class OutOfRangeError(BandAssignmentError, ValueError):
    pass


class DomainError(BandAssignmentError, ValueError):
    pass


class NonPsdCovarianceError(BandAssignmentError):
    def __init__(self, jitter: float):
        super().__init__(f"covariance matrix not factorizable; last diagonal jitter tried: {jitter:g}")
        self.jitter = jitter


class UnsupportedConfigurationError(BandAssignmentError):
    pass


class InsufficientFeatureError(BandAssignmentError):
    pass


class DimensionMismatchError(BandAssignmentError):
    pass


class TrainingDivergenceError(BandAssignmentError):
    def __init__(self, epoch: int):
        super().__init__(f"training diverged: non-finite loss at epoch {epoch}")
        self.epoch = epoch


class SelectionFailureError(BandAssignmentError):
    pass


class DatasetParseError(BandAssignmentError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ModelFormatError(BandAssignmentError):
    pass


class ReportError(BandAssignmentError):
    pass
