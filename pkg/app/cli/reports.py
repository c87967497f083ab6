import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel

from app.cli.models import ReportFormat
from app.coding.schemas import ModelMatrix
from app.core.config import settings
from app.fitting.schemas import FitResult
from app.simulation.schemas import SimReport
from app.translation.schemas import RsmModel

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
MISSING = "-"

Result = Union[BaseModel, pd.DataFrame]


# ========== FORMATTING ==========

def _number(value, decimals: Optional[int] = None) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return MISSING
    decimals = settings.REPORT_DECIMALS if decimals is None else decimals
    return f"{value:.{decimals}f}"


def _p_value(value) -> str:
    if value is None or not math.isfinite(value):
        return MISSING
    decimals = settings.P_VALUE_DECIMALS
    floor = 10.0 ** -decimals
    if value < floor:
        return f"<{floor:.{decimals}f}"
    return f"{value:.{decimals}f}"


def format_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Aligned plain-text table: first column left-aligned, the rest right-aligned"""
    widths = [max([len(h)] + [len(row[i]) for row in rows]) for i, h in enumerate(headers)]

    def line(cells: Sequence[str]) -> str:
        return "  ".join(
            cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(cells, widths))
        ).rstrip()

    return "\n".join([line(headers)] + [line(row) for row in rows])


def _fit_table(fit: FitResult) -> str:
    rows = [
        [term, _number(value), _number(t), _p_value(p)]
        for term, value, t, p in zip(fit.terms, fit.coefficients, fit.t_values, fit.p_values)
    ]
    return format_table(["term", "value", "t", "p"], rows)


def _simulation_table(report: SimReport) -> str:
    decimals = settings.P_VALUE_DECIMALS
    rows = [
        [
            score.strategy.label,
            _number(score.rmse_mean, decimals),
            _number(score.rmse_se, decimals),
            _number(score.band_rmse_mean, decimals),
            _number(score.r_squared_mean, decimals),
            _number(score.max_interaction, decimals),
            str(score.failures),
            str(score.scored_points),
        ]
        for score in report.scores
    ]
    return format_table(
        ["strategy", "rmse", "se", "band_rmse", "r2", "max_interaction", "failures", "points"], rows
    )


def _frame_table(frame: pd.DataFrame) -> str:
    headers = [str(c) for c in frame.columns]
    rows: List[List[str]] = []
    for _, row in frame.iterrows():
        rows.append([_number(v) if isinstance(v, float) else str(v) for v in row.tolist()])
    if frame.index.name is not None or not isinstance(frame.index, pd.RangeIndex):
        headers = [""] + headers
        rows = [[str(label)] + row for label, row in zip(frame.index, rows)]
    return format_table(headers, rows)


def _fields_table(result: BaseModel) -> str:
    rows = []
    for key, value in sorted(result.model_dump(mode="json").items()):
        if isinstance(value, float):
            text = _number(value, decimals=6)
        elif isinstance(value, (dict, list)):
            text = json.dumps(value, sort_keys=True)
        else:
            text = MISSING if value is None else str(value)
        rows.append([key, text])
    return format_table(["field", "value"], rows)


def _to_frame(result: Result) -> pd.DataFrame:
    if isinstance(result, pd.DataFrame):
        return result
    if isinstance(result, FitResult):
        return result.summary_frame()
    if isinstance(result, ModelMatrix):
        return result.to_frame()
    if isinstance(result, RsmModel):
        labels = result.labels()
        return pd.DataFrame({"term": list(labels), "value": list(labels.values())})
    if isinstance(result, SimReport):
        return pd.DataFrame([s.model_dump(mode="json") for s in result.scores])
    return pd.DataFrame([result.model_dump(mode="json")])


# ========== EMIT ==========

def emit_report(result: Result, fmt: Union[ReportFormat, str] = ReportFormat.JSON) -> str:
    """
    Render a result as text.

    json is lossless with sorted keys; table rounds for reading (values to
    REPORT_DECIMALS, p-values to P_VALUE_DECIMALS); csv keeps full precision.
    """
    fmt = ReportFormat(fmt)
    if fmt is ReportFormat.JSON:
        if isinstance(result, pd.DataFrame):
            payload = json.loads(result.to_json(orient="split", double_precision=15))
        else:
            payload = result.model_dump(mode="json")
        return json.dumps(payload, sort_keys=True, indent=2)

    if fmt is ReportFormat.CSV:
        frame = _to_frame(result)
        keep_index = not isinstance(frame.index, pd.RangeIndex)
        return frame.to_csv(index=keep_index, float_format=CSV_FLOAT_FORMAT, lineterminator="\n").rstrip("\n")

    if isinstance(result, FitResult):
        return _fit_table(result)
    if isinstance(result, SimReport):
        return _simulation_table(result)
    if isinstance(result, (pd.DataFrame, ModelMatrix, RsmModel)):
        return _frame_table(_to_frame(result))
    return _fields_table(result)


def write_output(text: str, out: Optional[Path] = None) -> None:
    """Results go to the output file when given, stdout otherwise"""
    if out is None:
        print(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text + "\n", encoding="utf-8")
    logger.info("Wrote %s", out)
