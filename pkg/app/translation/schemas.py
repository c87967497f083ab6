from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from app.coding.service import rsm_term_label
from app.core.constants import MAX_RSM_DEGREE


class NemModel(BaseModel):
    """Per parent level (alpha, beta, gamma) in the proportionally coded slid factor"""
    parent_levels: Tuple[float, ...]
    alpha: Tuple[float, ...]
    beta: Tuple[float, ...]
    gamma: Tuple[float, ...]
    parent: str = "A"
    slid: str = "B"

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def validate_levels(self):
        n = len(self.parent_levels)
        if n == 0:
            raise ValueError('NEM model needs at least one parent level')
        if not len(self.alpha) == len(self.beta) == len(self.gamma) == n:
            raise ValueError(f"Need one (alpha, beta, gamma) triple per parent level ({n})")
        values = self.parent_levels + self.alpha + self.beta + self.gamma
        if not all(np.isfinite(v) for v in values):
            raise ValueError('NEM model values must be finite')
        return self

    @property
    def n_levels(self) -> int:
        return len(self.parent_levels)

    def triple(self, index: int) -> Tuple[float, float, float]:
        return self.alpha[index], self.beta[index], self.gamma[index]


class RsmModel(BaseModel):
    """Polynomial coefficients keyed by (parent exponent, slid exponent); absent keys are zero"""
    coefficients: Dict[Tuple[int, int], float] = Field(default_factory=dict)
    factors: Tuple[str, str] = ("A", "B")

    model_config = ConfigDict(frozen=True)

    @field_validator('coefficients', mode='before')
    def parse_keys(cls, v):
        # JSON keys come as "i,j"
        parsed = {}
        for key, value in dict(v).items():
            if isinstance(key, str):
                try:
                    i, j = (int(part) for part in key.split(","))
                except ValueError:
                    raise ValueError(f"Coefficient key {key!r} must look like 'i,j'")
                key = (i, j)
            parsed[tuple(key)] = value
        return parsed

    @field_validator('coefficients')
    def validate_coefficients(cls, v):
        for (i, j), value in v.items():
            if i < 0 or j < 0 or i > MAX_RSM_DEGREE or j > MAX_RSM_DEGREE:
                raise ValueError(f"Exponents ({i}, {j}) outside 0..{MAX_RSM_DEGREE}")
            if not np.isfinite(value):
                raise ValueError(f"Coefficient ({i}, {j}) must be finite")
        return v

    @field_serializer('coefficients')
    def serialize_coefficients(self, coefficients: Dict[Tuple[int, int], float]):
        return {f"{i},{j}": value for (i, j), value in sorted(coefficients.items())}

    def get(self, i: int, j: int) -> float:
        return self.coefficients.get((i, j), 0.0)

    def evaluate(self, x_a: Union[float, Sequence[float]], x_b: Union[float, Sequence[float]]):
        """Sum of coefficient * x_A^i * x_B^j; scalar in, scalar out"""
        a = np.asarray(x_a, dtype=float)
        b = np.asarray(x_b, dtype=float)
        total = np.zeros(np.broadcast(a, b).shape)
        for (i, j), value in sorted(self.coefficients.items()):
            total = total + value * a ** i * b ** j
        return float(total) if total.ndim == 0 else total

    def labels(self) -> Dict[str, float]:
        """Coefficients under canonical term labels"""
        return {
            rsm_term_label(key, self.factors): value
            for key, value in sorted(self.coefficients.items())
        }


class RcrsModel(BaseModel):
    """RCRS coefficients with the affine center s + t*x_A and half-width r of the slid factor"""
    eta0: float = 0.0
    eta1: float = 0.0
    eta11: float = 0.0
    eta2: float = 0.0
    eta22: float = 0.0
    eta12: float = 0.0
    s: float = 0.0
    t: float = 0.0
    r: float = 1.0

    model_config = ConfigDict(frozen=True)

    @field_validator('r')
    def validate_half_width(cls, v):
        if not v > 0:
            raise ValueError('Half-width r must be positive')
        return v


class ConstraintReport(BaseModel):
    """Whether a three-level NEM model fits the six-term second-order RSM model"""
    gamma_spread: float
    beta_curvature: float
    tol: float
    gamma_ok: bool
    beta_ok: bool

    model_config = ConfigDict(frozen=True)

    @property
    def representable(self) -> bool:
        return self.gamma_ok and self.beta_ok


class IdentityCheck(BaseModel):
    name: str
    rcrs_value: float
    nem_value: float
    difference: float
    passed: bool

    model_config = ConfigDict(frozen=True)


class IdentityReport(BaseModel):
    """RCRS coefficients against averages/half-differences of NEM conditional effects"""
    checks: Tuple[IdentityCheck, ...]
    tol: float
    parent: Optional[str] = None
    slid: Optional[str] = None

    model_config = ConfigDict(frozen=True)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_difference(self) -> float:
        return max((c.difference for c in self.checks), default=0.0)
