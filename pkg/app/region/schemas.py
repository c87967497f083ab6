from typing import Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.region.models import Zone

Point = Tuple[float, float]


class Region(BaseModel):
    """Experimental region R_E in coded (x_parent, x_slid) space, inside the cube [-1, 1]^2"""
    factors: Tuple[str, str]
    parent_levels: Tuple[float, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    vertices: Tuple[Point, ...]
    area: float = Field(..., ge=0.0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def validate_sections(self):
        n = len(self.parent_levels)
        if n < 2:
            raise ValueError('Region needs at least 2 parent levels')
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError('Region needs one slid range per parent level')
        if any(b <= a for a, b in zip(self.parent_levels, self.parent_levels[1:])):
            raise ValueError('Region parent levels must be strictly increasing')
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError('Region cross-sections must have lower <= upper')
        return self

    @property
    def area_ratio(self) -> float:
        """Share of the modeling cube covered by the region"""
        return self.area / 4.0

    def cross_section(self, x_parent: float) -> Optional[Tuple[float, float]]:
        """Slid range at a coded parent value; None outside the parent span"""
        if x_parent < self.parent_levels[0] or x_parent > self.parent_levels[-1]:
            return None
        lo = float(np.interp(x_parent, self.parent_levels, self.lower))
        hi = float(np.interp(x_parent, self.parent_levels, self.upper))
        return lo, hi

    def to_frame(self) -> pd.DataFrame:
        parent, slid = self.factors
        return pd.DataFrame(list(self.vertices), columns=[f"x_{parent}", f"x_{slid}"])


class Prediction(BaseModel):
    value: float
    zone: Zone
    x_parent: float
    x_slid: float

    model_config = ConfigDict(frozen=True)


class TransformDiagnostics(BaseModel):
    """Raw |corr(x_A, x_B)| and region coverage before and after the product transform"""
    corr_before: Optional[float] = None
    corr_after: Optional[float] = None
    area_ratio_before: Optional[float] = None
    area_ratio_after: Optional[float] = None

    model_config = ConfigDict(frozen=True)
