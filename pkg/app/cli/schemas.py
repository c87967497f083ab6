from pathlib import Path
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.cli.models import Command, ModelSource, ReportFormat
from app.coding.models import CodingScheme

# Flags each subcommand cannot run without
REQUIRED_FLAGS = {
    Command.CODE: ("design", "scheme"),
    Command.FIT: ("design", "response", "scheme"),
    Command.TRANSLATE: ("source",),
    Command.PREDICT: ("model", "design", "at"),
    Command.REGION: ("design",),
    Command.SIMULATE: ("sim_config",),
    Command.FIXTURE: ("name", "out"),
}

TRANSLATE_INPUTS = {
    ModelSource.NEM: ("design",),
    ModelSource.RCRS: ("eta",),
    ModelSource.RSM: ("model", "design"),
}

FLAG_NAMES = {
    "source": "--from",
    "sim_config": "--config",
}


class CliConfig(BaseModel):
    """Validated arguments of one CLI invocation"""
    command: Command
    design: Optional[str] = None
    response: Optional[Path] = None
    column: Optional[str] = None
    scheme: Optional[CodingScheme] = None
    covariates: Optional[str] = None
    terms: Optional[str] = None
    baseline: Optional[str] = None
    interactions: bool = True
    intercept: bool = False
    require_inference: bool = False
    vif: bool = False
    correlations: bool = False
    source: Optional[ModelSource] = None
    target: str = "rsm"
    fit: Optional[Path] = None
    model: Optional[Path] = None
    eta: Optional[Path] = None
    geometry: Optional[Tuple[float, float, float]] = None
    at: Optional[str] = None
    coded: bool = False
    product_transform: bool = False
    sim_config: Optional[Path] = None
    seed: Optional[int] = Field(None, ge=0)
    reps: Optional[int] = Field(None, ge=1)
    name: Optional[str] = None
    with_geometry: bool = False
    out: Optional[Path] = None
    report: ReportFormat = ReportFormat.JSON

    model_config = ConfigDict(frozen=True)

    @field_validator('geometry', mode='before')
    def parse_geometry(cls, v):
        if isinstance(v, str):
            parts = [p.strip() for p in v.split(",")]
            if len(parts) != 3:
                raise ValueError("--geometry takes three comma-separated numbers s,t,r")
            return tuple(float(p) for p in parts)
        return v

    @field_validator('covariates')
    def validate_covariates(cls, v):
        if v is not None and v not in ("lq", "linear"):
            raise ValueError("--covariates must be lq or linear")
        return v

    @field_validator('target')
    def validate_target(cls, v):
        if v not in ("rsm", "nem"):
            raise ValueError("--to must be rsm or nem")
        return v

    @model_validator(mode='after')
    def validate_required(self):
        required = REQUIRED_FLAGS[self.command]
        if self.command is Command.TRANSLATE and self.source is not None:
            required = required + TRANSLATE_INPUTS[self.source]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            flags = ", ".join(FLAG_NAMES.get(m, "--" + m.replace("_", "-")) for m in missing)
            raise ValueError(f"{self.command.value} needs {flags}")
        if self.command is Command.TRANSLATE and self.source is ModelSource.NEM:
            if (self.fit is None) == (self.response is None):
                raise ValueError("translate --from nem needs exactly one of --fit or --response")
        return self
