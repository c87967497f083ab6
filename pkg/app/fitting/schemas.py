from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from app.coding.models import CodingScheme
from app.core.exceptions import ValidationError


def _float_array(v) -> np.ndarray:
    # None comes back from JSON for quantities that were not available
    array = np.array(v, dtype=float)
    array.setflags(write=False)
    return array


def _nullable(values: np.ndarray):
    return np.where(np.isfinite(values), values, None).tolist()


class FitResult(BaseModel):
    """Least-squares fit with inference and estimate correlations"""
    scheme: Optional[CodingScheme] = None
    terms: Tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    residual_df: int = Field(..., ge=0)
    sigma2_hat: Optional[float] = None
    r_squared: float = Field(..., ge=0.0, le=1.0)
    fitted_values: np.ndarray
    estimate_correlations: np.ndarray
    inference_available: bool = True
    n_runs: int = Field(..., ge=1)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator(
        'coefficients',
        'standard_errors',
        't_values',
        'p_values',
        'fitted_values',
        'estimate_correlations',
        mode='before',
    )
    def coerce_arrays(cls, v):
        return _float_array(v)

    @model_validator(mode='after')
    def validate_shapes(self):
        p = len(self.terms)
        for name in ('coefficients', 'standard_errors', 't_values', 'p_values'):
            if getattr(self, name).shape != (p,):
                raise ValueError(f"{name} must have one entry per term ({p})")
        if self.estimate_correlations.shape != (p, p):
            raise ValueError(f"estimate_correlations must be {p} x {p}")
        if self.fitted_values.shape != (self.n_runs,):
            raise ValueError(f"fitted_values must have one entry per run ({self.n_runs})")
        return self

    @field_serializer(
        'coefficients',
        'standard_errors',
        't_values',
        'p_values',
        'fitted_values',
        'estimate_correlations',
    )
    def serialize_arrays(self, values: np.ndarray):
        return _nullable(values)

    def coefficient(self, term: str) -> float:
        if term not in self.terms:
            raise ValidationError(f"Fit has no term {term}")
        return float(self.coefficients[self.terms.index(term)])

    def coefficient_map(self) -> Dict[str, float]:
        return {t: float(c) for t, c in zip(self.terms, self.coefficients)}

    def correlation_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.estimate_correlations, index=list(self.terms), columns=list(self.terms))

    def summary_frame(self) -> pd.DataFrame:
        """Term / value / t / p table"""
        return pd.DataFrame({
            "term": list(self.terms),
            "value": self.coefficients,
            "t": self.t_values,
            "p": self.p_values,
        })


class CollinearityReport(BaseModel):
    """Variance inflation factors and condition number of a model matrix"""
    terms: Tuple[str, ...]
    vif: Dict[str, float]
    condition_number: float

    model_config = ConfigDict(frozen=True)

    @field_serializer('vif')
    def serialize_vif(self, vif: Dict[str, float]):
        return {k: (v if np.isfinite(v) else None) for k, v in vif.items()}

    @field_serializer('condition_number')
    def serialize_condition_number(self, value: float):
        return value if np.isfinite(value) else None

    @property
    def max_vif(self) -> float:
        return max(self.vif.values()) if self.vif else 1.0
