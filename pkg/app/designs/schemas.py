from collections import Counter
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.exceptions import UnknownLevelLabel, ValidationError
from app.designs.models import FactorKind, FactorRole


def _strictly_increasing(values) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


class FactorSpec(BaseModel):
    """Factor metadata"""
    name: str
    kind: FactorKind = FactorKind.QUANTITATIVE
    role: FactorRole = FactorRole.FREE
    levels: Tuple[str, ...]
    settings: Optional[Tuple[float, ...]] = None
    parent: Optional[str] = None
    description: Optional[str] = None
    unit: Optional[str] = None  # No computational role

    model_config = ConfigDict(frozen=True)

    @field_validator('name')
    def validate_name(cls, v):
        if not v or not v.strip():
            raise ValueError('Factor name must not be empty')
        return v

    @field_validator('levels')
    def validate_levels(cls, v):
        if len(v) == 0:
            raise ValueError('Factor must declare at least one level')
        if len(set(v)) != len(v):
            raise ValueError('Factor levels must be distinct')
        return v

    @field_validator('settings')
    def validate_settings(cls, v):
        if v is not None:
            if not all(np.isfinite(x) for x in v):
                raise ValueError('Factor settings must be finite')
            if not _strictly_increasing(v):
                raise ValueError('Factor settings must be strictly increasing')
        return v

    @model_validator(mode='after')
    def validate_role(self):
        if self.role is FactorRole.SLID:
            if self.settings is not None:
                raise ValueError(
                    f"Slid factor {self.name} carries no unconditional settings; "
                    "they belong in its sliding table"
                )
            if not self.parent:
                raise ValueError(f"Slid factor {self.name} must name exactly one parent factor")
            if self.parent == self.name:
                raise ValueError(f"Slid factor {self.name} cannot slide on itself")
        else:
            if self.parent is not None:
                raise ValueError(f"Only slid factors name a parent ({self.name} is {self.role.value})")
            if self.kind is FactorKind.QUANTITATIVE and self.settings is None:
                raise ValueError(f"Quantitative factor {self.name} needs numeric settings")
        if self.settings is not None:
            if self.kind is FactorKind.QUALITATIVE:
                raise ValueError(f"Qualitative factor {self.name} has no numeric settings")
            if len(self.settings) != len(self.levels):
                raise ValueError(
                    f"Factor {self.name} declares {len(self.levels)} levels "
                    f"but {len(self.settings)} settings"
                )
        return self

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def is_quantitative(self) -> bool:
        return self.kind is FactorKind.QUANTITATIVE

    def level_index(self, label: str) -> int:
        """Position of a level label in the declared level order"""
        try:
            return self.levels.index(label)
        except ValueError:
            raise UnknownLevelLabel(
                f"Level {label!r} is not declared for factor {self.name} "
                f"(levels: {', '.join(self.levels)})"
            )


class SlidingSpec(BaseModel):
    """Parent level -> actual settings of the slid factor, with optional coded geometry"""
    parent: str
    slid: str
    table: Dict[str, Tuple[float, ...]]
    # Coded geometry: center m(x) = s + t*x, half-width r
    s: Optional[float] = None
    t: Optional[float] = None
    r: Optional[float] = None

    model_config = ConfigDict(frozen=True)

    @field_validator('table')
    def validate_table(cls, v):
        if not v:
            raise ValueError('Sliding table must have at least one parent level')
        lengths = {len(entry) for entry in v.values()}
        if len(lengths) != 1:
            raise ValueError('Every sliding table entry must have the same number of settings')
        for label, entry in v.items():
            if not all(np.isfinite(x) for x in entry):
                raise ValueError(f"Sliding settings at parent level {label!r} must be finite")
            if not _strictly_increasing(entry):
                raise ValueError(
                    f"Sliding settings at parent level {label!r} must be strictly increasing"
                )
        return v

    @field_validator('r')
    def validate_half_width(cls, v):
        if v is not None and not v > 0:
            raise ValueError('Half-width r must be positive')
        return v

    @model_validator(mode='after')
    def validate_geometry(self):
        given = [x is not None for x in (self.s, self.t, self.r)]
        if any(given) and not all(given):
            raise ValueError('Geometry needs all of s, t and r')
        if self.parent == self.slid:
            raise ValueError('A factor cannot slide on itself')
        return self

    @property
    def has_geometry(self) -> bool:
        return self.r is not None

    @property
    def geometry(self) -> Optional[Tuple[float, float, float]]:
        if not self.has_geometry:
            return None
        return (self.s, self.t, self.r)

    @property
    def n_slid_levels(self) -> int:
        return len(next(iter(self.table.values())))


class PlanningMatrix(BaseModel):
    """Run-by-factor table of symbolic level labels"""
    runs: int = Field(..., ge=1)
    columns: Dict[str, Tuple[str, ...]]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def validate_lengths(self):
        for name, column in self.columns.items():
            if len(column) != self.runs:
                raise ValueError(
                    f"Column {name} has {len(column)} entries but the planning matrix has {self.runs} runs"
                )
        return self

    def level_counts(self, name: str) -> Dict[str, int]:
        """Occurrences of each label in a column"""
        return dict(Counter(self.columns[name]))


class SlidingDesign(BaseModel):
    """Planning matrix with symbolic levels resolved to actual settings"""
    planning: PlanningMatrix
    factors: Tuple[FactorSpec, ...]
    sliding: Tuple[SlidingSpec, ...] = ()
    actual: Dict[str, Tuple[float, ...]] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True)

    @property
    def runs(self) -> int:
        return self.planning.runs

    @property
    def factor_names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def factor(self, name: str) -> FactorSpec:
        for spec in self.factors:
            if spec.name == name:
                return spec
        raise ValidationError(f"Design has no factor named {name}")

    def labels(self, name: str) -> Tuple[str, ...]:
        return self.planning.columns[name]

    def level_indices(self, name: str) -> np.ndarray:
        """Per-run index of the level label in the factor's level order"""
        spec = self.factor(name)
        return np.array([spec.level_index(label) for label in self.labels(name)], dtype=int)

    def actual_array(self, name: str) -> np.ndarray:
        if name not in self.actual:
            raise ValidationError(f"Factor {name} has no numeric settings")
        return np.asarray(self.actual[name], dtype=float)

    def sliding_for(self, slid: str) -> Optional[SlidingSpec]:
        for spec in self.sliding:
            if spec.slid == slid:
                return spec
        return None

    def sliding_pair(self) -> Tuple[FactorSpec, FactorSpec, SlidingSpec]:
        """The (parent, slid, table) triple; one slid factor per design"""
        if not self.sliding:
            raise ValidationError("Design has no slid factor")
        if len(self.sliding) > 1:
            raise ValidationError("Only designs with a single slid factor are supported")
        spec = self.sliding[0]
        return self.factor(spec.parent), self.factor(spec.slid), spec

    def free_factors(self) -> Tuple[FactorSpec, ...]:
        return tuple(f for f in self.factors if f.role is FactorRole.FREE)
