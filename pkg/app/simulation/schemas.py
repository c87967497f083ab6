from typing import Annotated, Dict, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings
from app.core.constants import MAX_RSM_DEGREE, RSM_TERM_PRESETS, WELDING_FIXTURE
from app.simulation.models import Strategy
from app.translation.schemas import RsmModel


# ========== SURFACES ==========

class SurfaceEq1(BaseModel):
    """
    Additive surface g1(x_A) + g2(z) in coded units, with the standardized slid
    coordinate z = (x_B - c0 - c1*x_A) / r_B.

    g1 and g2 are coefficient lists in increasing powers.
    """
    kind: Literal["eq1"] = "eq1"
    g1: Tuple[float, ...] = ()
    g2: Tuple[float, ...] = ()
    c_B: Tuple[float, float] = (0.0, 0.0)
    r_B: float = 1.0

    model_config = ConfigDict(frozen=True)

    @field_validator('g1', 'g2')
    def validate_polynomial(cls, v):
        if len(v) > MAX_RSM_DEGREE + 1:
            raise ValueError(f"Polynomials are limited to degree {MAX_RSM_DEGREE}")
        if not all(np.isfinite(c) for c in v):
            raise ValueError('Polynomial coefficients must be finite')
        return v

    @field_validator('c_B')
    def validate_center(cls, v):
        if not all(np.isfinite(c) for c in v):
            raise ValueError('Center line coefficients must be finite')
        return v

    @field_validator('r_B')
    def validate_half_width(cls, v):
        if not (np.isfinite(v) and v > 0):
            raise ValueError('r_B must be positive')
        return v


class PolynomialSurface(BaseModel):
    """Surface given directly as an RSM polynomial in coded (x_A, x_B)"""
    kind: Literal["polynomial"] = "polynomial"
    model: RsmModel

    model_config = ConfigDict(frozen=True)


Surface = Annotated[Union[SurfaceEq1, PolynomialSurface], Field(discriminator="kind")]


# ========== CONFIG ==========

class NestedDesignRecipe(BaseModel):
    """Arguments of build_nested_design"""
    parent_settings: Tuple[float, ...]
    center: Tuple[float, float]
    half_width: float = Field(..., gt=0)
    n_slid: int = 3
    replicates: int = Field(1, ge=1)
    tilt: float = 0.0

    model_config = ConfigDict(frozen=True)

    @field_validator('parent_settings')
    def validate_parent_settings(cls, v):
        if len(v) < 2:
            raise ValueError('A nested design needs at least 2 parent settings')
        return v


class SimConfig(BaseModel):
    """Simulation configuration, as read from the `simulate --config` JSON file"""
    surface: Surface
    design: Union[str, NestedDesignRecipe] = WELDING_FIXTURE
    noise_sd: float = Field(1.0, ge=0)
    grid_n: int = Field(default_factory=lambda: settings.DEFAULT_GRID_N, ge=2)
    reps: int = Field(default_factory=lambda: settings.DEFAULT_REPS, ge=1)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0)
    rsm_terms: Optional[str] = None

    model_config = ConfigDict(frozen=True)

    @field_validator('rsm_terms')
    def validate_rsm_terms(cls, v):
        if v is not None and v not in RSM_TERM_PRESETS:
            raise ValueError(f"Unknown RSM term preset {v!r} (known: {', '.join(RSM_TERM_PRESETS)})")
        return v


# ========== REPORTS ==========

class StrategyScore(BaseModel):
    """
    Averages over the successful replications of one strategy.

    max_interaction is the mean over replications of the largest
    |interaction coefficient| of the fitted model.
    """
    strategy: Strategy
    rmse_mean: Optional[float] = None
    rmse_se: Optional[float] = None
    band_rmse_mean: Optional[float] = None
    r_squared_mean: Optional[float] = None
    max_interaction: Optional[float] = None
    failures: int = Field(0, ge=0)
    scored_points: int = Field(0, ge=0)

    model_config = ConfigDict(frozen=True)

    @field_validator('rmse_mean', 'rmse_se', 'band_rmse_mean')
    def validate_non_negative(cls, v):
        if v is not None and v < 0:
            raise ValueError('RMSE values are non-negative')
        return v


class SimReport(BaseModel):
    scores: Tuple[StrategyScore, ...]
    reps: int
    seed: int
    noise_sd: float
    grid_n: int
    grid_points: int
    band_points: int

    model_config = ConfigDict(frozen=True)

    def score(self, strategy: Union[Strategy, str]) -> StrategyScore:
        strategy = Strategy(strategy)
        for score in self.scores:
            if score.strategy is strategy:
                return score
        raise KeyError(strategy.value)


class EliminationReport(BaseModel):
    """RCRS fit on noiseless surface data; eliminated when every interaction is within tol"""
    matched: bool
    coefficients: Dict[str, float]
    interactions: Dict[str, float]
    max_interaction: float
    eliminated: bool
    tol: float

    model_config = ConfigDict(frozen=True)


class ParityReport(BaseModel):
    """R^2 of RCRS without interactions against RSM with x_A*x_B, noiseless data"""
    r2_rcrs_no_interaction: float
    r2_rsm_with_interaction: float
    difference: float
    terms: Tuple[str, ...]

    model_config = ConfigDict(frozen=True)
