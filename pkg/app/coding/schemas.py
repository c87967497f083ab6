from typing import Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_serializer, field_validator, model_validator

from app.coding.models import CodingScheme
from app.core.constants import INTERCEPT
from app.core.exceptions import ValidationError


class ModelMatrix(BaseModel):
    """Runs x terms coded matrix"""
    scheme: CodingScheme
    terms: Tuple[str, ...]
    values: np.ndarray
    intercept_included: bool = False

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator('values', mode='before')
    def coerce_values(cls, v):
        array = np.array(v, dtype=float)
        if array.ndim != 2:
            raise ValueError('Model matrix values must be two-dimensional (runs x terms)')
        array.setflags(write=False)
        return array

    @field_validator('terms')
    def validate_terms(cls, v):
        if len(set(v)) != len(v):
            duplicated = sorted({t for t in v if v.count(t) > 1})
            raise ValueError(f"Duplicate term labels: {', '.join(duplicated)}")
        return v

    @model_validator(mode='after')
    def validate_shape(self):
        if self.values.shape[1] != len(self.terms):
            raise ValueError(
                f"Model matrix has {self.values.shape[1]} columns for {len(self.terms)} terms"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError('Model matrix values must be finite')
        if self.intercept_included:
            if not self.terms or self.terms[0] != INTERCEPT:
                raise ValueError(f"Intercept column must come first and be labeled {INTERCEPT}")
            if not np.all(self.values[:, 0] == 1.0):
                raise ValueError('Intercept column must be all ones')
        elif INTERCEPT in self.terms:
            raise ValueError(f"Term {INTERCEPT} is reserved for the intercept column")
        return self

    @field_serializer('values')
    def serialize_values(self, values: np.ndarray):
        return values.tolist()

    @property
    def runs(self) -> int:
        return self.values.shape[0]

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def column(self, term: str) -> np.ndarray:
        if term not in self.terms:
            raise ValidationError(f"Model matrix has no term {term}")
        return self.values[:, self.terms.index(term)]

    def select(self, terms: Sequence[str]) -> "ModelMatrix":
        """Sub-matrix with the given terms, in the given order"""
        index = [self.terms.index(t) if t in self.terms else None for t in terms]
        missing = [t for t, i in zip(terms, index) if i is None]
        if missing:
            raise ValidationError(f"Model matrix has no terms {', '.join(missing)}")
        terms = tuple(terms)
        return ModelMatrix(
            scheme=self.scheme,
            terms=terms,
            values=self.values[:, index],
            intercept_included=bool(terms) and terms[0] == INTERCEPT,
        )

    def without_intercept(self) -> "ModelMatrix":
        if not self.intercept_included:
            return self
        return self.select(self.terms[1:])

    def with_intercept(self) -> "ModelMatrix":
        if self.intercept_included:
            return self
        return ModelMatrix(
            scheme=self.scheme,
            terms=(INTERCEPT,) + self.terms,
            values=np.column_stack([np.ones(self.runs), self.values]),
            intercept_included=True,
        )

    def hstack(self, other: "ModelMatrix") -> "ModelMatrix":
        """Append the columns of `other`; its intercept is dropped"""
        if other.runs != self.runs:
            raise ValidationError(
                f"Cannot join model matrices with {self.runs} and {other.runs} runs"
            )
        other = other.without_intercept()
        return ModelMatrix(
            scheme=self.scheme,
            terms=self.terms + other.terms,
            values=np.column_stack([self.values, other.values]),
            intercept_included=self.intercept_included,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=list(self.terms))
