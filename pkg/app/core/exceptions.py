from typing import Optional, Sequence

from app.core.constants import EXIT_VALIDATION, EXIT_NUMERICAL


class SlideKitError(Exception):
    """Base error; `exit_code` is what the CLI returns for it"""
    exit_code: int = EXIT_VALIDATION

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# ========== VALIDATION ERRORS (exit 2) ==========

class ValidationError(SlideKitError):
    """Input violates a documented invariant"""


class ParseError(ValidationError):
    """Malformed CSV or JSON input"""

    def __init__(self, detail: str, line: Optional[int] = None, column: Optional[int] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            detail = f"{detail} ({', '.join(location)})"
        super().__init__(detail)
        self.line = line
        self.column = column


class UnknownLevelLabel(ValidationError):
    """Planning matrix uses a label the factor does not declare"""


class MissingSlidingEntry(ValidationError):
    """Sliding table lacks a parent level or a slid level"""


class UnsupportedLevelCount(ValidationError):
    """Linear-quadratic coding only covers two and three levels"""


class UnsupportedDegree(ValidationError):
    """RSM monomial exponent above the supported degree"""


class OutOfRange(ValidationError):
    """Value outside the range of the settings used for coding"""


class DuplicateParentLevel(ValidationError):
    """NEM model repeats a parent level"""


class OffDesignParentLevel(ValidationError):
    """Nested-effects prediction requested at a parent level never run"""


# ========== NUMERICAL ERRORS (exit 3) ==========

class NumericalError(SlideKitError):
    exit_code = EXIT_NUMERICAL


class RankDeficient(NumericalError):
    """Model matrix is not of full column rank"""

    def __init__(self, rank: int, n_terms: int, dependent_terms: Sequence[str]):
        names = ", ".join(dependent_terms)
        super().__init__(
            f"Model matrix has rank {rank} < {n_terms} terms; dependent terms: {{{names}}}"
        )
        self.rank = rank
        self.dependent_terms = list(dependent_terms)


class DegenerateRange(NumericalError):
    """Settings with max == min cannot be proportionally coded"""


class ZeroResidualDf(NumericalError):
    """Saturated fit: no degrees of freedom left for inference"""
