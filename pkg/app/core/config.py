from pydantic_settings import BaseSettings
from pydantic import field_validator

from app.core.constants import (
    PROJECT_NAME,
    DEFAULT_LOG_FORMAT,
    LOG_LEVELS,
)


class Settings(BaseSettings):
    """
    Application settings using Pydantic BaseSettings
    """
    # Project
    PROJECT_NAME: str = PROJECT_NAME

    # Logging
    LOG_LEVEL: str = "WARNING"
    LOG_FORMAT: str = DEFAULT_LOG_FORMAT

    # Numerical tolerances
    RANK_TOLERANCE: float = 1e-10
    SPAN_TOLERANCE: float = 1e-9
    GEOMETRY_TOLERANCE: float = 1e-9
    BOUNDARY_TOLERANCE: float = 1e-9
    PARENT_LEVEL_TOLERANCE: float = 1e-12
    CONSTRAINT_TOLERANCE: float = 1e-12
    IDENTITY_TOLERANCE: float = 1e-9
    ELIMINATION_TOLERANCE: float = 1e-9

    # Simulation defaults
    DEFAULT_SEED: int = 42
    DEFAULT_REPS: int = 200
    DEFAULT_GRID_N: int = 21

    # Reports
    REPORT_DECIMALS: int = 2
    P_VALUE_DECIMALS: int = 4

    @field_validator('LOG_LEVEL')
    def validate_log_level(cls, v):
        level = v.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")
        return level

    @field_validator(
        'RANK_TOLERANCE',
        'SPAN_TOLERANCE',
        'GEOMETRY_TOLERANCE',
        'BOUNDARY_TOLERANCE',
        'PARENT_LEVEL_TOLERANCE',
        'CONSTRAINT_TOLERANCE',
        'IDENTITY_TOLERANCE',
        'ELIMINATION_TOLERANCE',
    )
    def validate_tolerance(cls, v):
        if not v > 0:
            raise ValueError("Tolerances must be positive")
        return v

    @field_validator('DEFAULT_REPS', 'DEFAULT_GRID_N')
    def validate_counts(cls, v):
        if v < 1:
            raise ValueError("Simulation counts must be at least 1")
        return v

    class Config:
        env_file = ".env"
        env_prefix = "SLIDEKIT_"
        case_sensitive = True
        extra = "ignore"


# Create global settings instance
settings = Settings()
