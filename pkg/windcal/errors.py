"""Exception hierarchy for windcal.

Every error carries a machine-readable ``code`` and a human ``message`` so that
commands can report failures uniformly.
"""

from typing import Optional, Sequence


class WindcalError(Exception):
    """Base class for structural errors raised by windcal."""

    code = "WINDCAL_ERROR"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        """Serialize to an error-detail dictionary."""
        return {"code": self.code, "message": self.message}


class ParseError(WindcalError):
    """Interchange input could not be parsed."""

    code = "PARSE_ERROR"

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(WindcalError):
    """A JSON configuration file is missing or invalid."""

    code = "CONFIG_ERROR"


class IdentifiabilityError(WindcalError):
    """Sensor contrasts cannot be estimated from the given records."""

    code = "IDENTIFIABILITY_ERROR"


class RankDeficiencyError(WindcalError):
    """Design matrix does not have full column rank."""

    code = "RANK_DEFICIENT"

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; dependent columns: {', '.join(self.columns)}")


class FactorizationError(WindcalError):
    """A covariance matrix was not numerically positive definite."""

    code = "FACTORIZATION_FAILED"

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class DegenerateResponseError(WindcalError):
    """Response has no residual variation to model."""

    code = "DEGENERATE_RESPONSE"


class InsufficientDataError(WindcalError):
    """Too few observations for the requested operation."""

    code = "INSUFFICIENT_DATA"


class NoCollocationsError(WindcalError):
    """No matched pairs were found, as opposed to a computation failure."""

    code = "NO_COLLOCATIONS"
