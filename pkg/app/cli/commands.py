import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError

from app.cli.models import Command, ModelSource, ReportFormat
from app.cli.reports import CSV_FLOAT_FORMAT, emit_report, write_output
from app.cli.schemas import CliConfig
from app.coding.models import CodingScheme
from app.coding.service import build_model_matrix, proportional_code
from app.core.constants import CLI_NAME, EXIT_OK, EXIT_VALIDATION, RSM_TERM_PRESETS, WELDING_FIXTURE
from app.core.exceptions import ParseError, SlideKitError, ValidationError
from app.core.logger import setup_logging
from app.designs.fixtures import build_welding_fixture
from app.designs.schemas import SlidingDesign
from app.designs.service import get_design, save_design
from app.fitting.schemas import FitResult
from app.fitting.service import collinearity_diagnostics, estimate_correlations, ols_fit
from app.region.schemas import Prediction
from app.region.service import (
    build_region,
    classify,
    predict_nem,
    predict_rcrs,
    predict_rsm,
    product_transform,
)
from app.simulation.schemas import SimConfig
from app.simulation.service import run_simulation
from app.translation.schemas import NemModel, RcrsModel, RsmModel
from app.translation.service import (
    nem_model_from_fit,
    nem_to_rsm,
    rcrs_expand,
    rsm_model_from_fit,
    rsm_to_nem,
)

logger = logging.getLogger(__name__)


# ========== PARSER ==========

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=CLI_NAME,
        description="Analysis of experiments with sliding levels",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def design_arg(p: argparse.ArgumentParser, required: bool = True) -> None:
        p.add_argument("--design", required=required,
                       help=f"design file base (<name>.csv + <name>.json) or '{WELDING_FIXTURE}'")

    def report_arg(p: argparse.ArgumentParser, default: ReportFormat = ReportFormat.JSON) -> None:
        p.add_argument("--report", choices=[f.value for f in ReportFormat], default=default.value)

    schemes = [CodingScheme.RCRS.value, CodingScheme.NEM.value, CodingScheme.RSM.value]

    code = sub.add_parser(Command.CODE.value, help="write a model matrix")
    design_arg(code)
    code.add_argument("--scheme", required=True, choices=schemes)
    code.add_argument("--covariates", choices=["lq", "linear"])
    code.add_argument("--terms", choices=list(RSM_TERM_PRESETS), help="RSM term preset")
    code.add_argument("--baseline", help="baseline level of a qualitative parent (NEM)")
    code.add_argument("--no-interactions", dest="interactions", action="store_false")
    code.add_argument("--intercept", action="store_true", help="include the intercept column")
    code.add_argument("--vif", action="store_true", help="print collinearity diagnostics")
    code.add_argument("--correlations", action="store_true", help="print estimate correlations")
    code.add_argument("--out", type=Path)
    report_arg(code, ReportFormat.CSV)

    fit = sub.add_parser(Command.FIT.value, help="least-squares fit")
    design_arg(fit)
    fit.add_argument("--response", required=True, type=Path)
    fit.add_argument("--column", help="response column when the file has several")
    fit.add_argument("--scheme", required=True, choices=schemes)
    fit.add_argument("--covariates", choices=["lq", "linear"])
    fit.add_argument("--terms", choices=list(RSM_TERM_PRESETS))
    fit.add_argument("--baseline")
    fit.add_argument("--no-interactions", dest="interactions", action="store_false")
    fit.add_argument("--require-inference", action="store_true",
                     help="fail instead of warning on a saturated fit")
    fit.add_argument("--correlations", action="store_true", help="print estimate correlations")
    fit.add_argument("--out", type=Path)
    report_arg(fit)

    translate = sub.add_parser(Command.TRANSLATE.value, help="translate between model forms")
    translate.add_argument("--from", dest="source", required=True, choices=[s.value for s in ModelSource])
    translate.add_argument("--to", dest="target", default="rsm", choices=["rsm", "nem"])
    design_arg(translate, required=False)
    translate.add_argument("--fit", type=Path, help="NEM FitResult JSON")
    translate.add_argument("--response", type=Path)
    translate.add_argument("--column")
    translate.add_argument("--covariates", choices=["lq", "linear"])
    translate.add_argument("--eta", type=Path, help="RCRS coefficients JSON")
    translate.add_argument("--geometry", help="s,t,r")
    translate.add_argument("--model", type=Path, help="RSM model JSON")
    translate.add_argument("--out", type=Path)
    report_arg(translate)

    predict = sub.add_parser(Command.PREDICT.value, help="predict at a point")
    predict.add_argument("--model", required=True, type=Path,
                         help="RsmModel, NemModel or FitResult JSON")
    design_arg(predict)
    predict.add_argument("--at", required=True, help='e.g. "A=3,B=29"')
    predict.add_argument("--coded", action="store_true", help="--at values are already coded")
    predict.add_argument("--out", type=Path)
    report_arg(predict, ReportFormat.TABLE)

    region = sub.add_parser(Command.REGION.value, help="polygon of the experimental region")
    design_arg(region)
    region.add_argument("--product-transform", action="store_true",
                        help="replace the slid settings by parent x slid first")
    region.add_argument("--out", type=Path)

    simulate = sub.add_parser(Command.SIMULATE.value, help="strategy comparison on a synthetic surface")
    simulate.add_argument("--config", dest="sim_config", required=True, type=Path)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--reps", type=int)
    simulate.add_argument("--out", type=Path)
    report_arg(simulate)

    fixture = sub.add_parser(Command.FIXTURE.value, help="write a bundled design")
    fixture.add_argument("--name", required=True, choices=[WELDING_FIXTURE])
    fixture.add_argument("--with-geometry", action="store_true")
    fixture.add_argument("--out", required=True, type=Path)

    return parser


# ========== INPUT FILES ==========

def _read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"Malformed JSON in {path}: {exc.msg}", line=exc.lineno, column=exc.colno)


def _validate(model_cls, payload: Any, path: Path):
    try:
        return model_cls.model_validate(payload)
    except PydanticValidationError as exc:
        raise ValidationError(f"Invalid {model_cls.__name__} in {path}: {exc}")


def _load_model(model_cls, path: Path):
    return _validate(model_cls, _read_json(path), path)


def read_response(path: Path, column: Optional[str] = None) -> np.ndarray:
    """Response column of a CSV file with a header row"""
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ParseError(f"Response file {path} is empty", line=1)
    except pd.errors.ParserError as exc:
        raise ParseError(f"Malformed response file {path}: {exc}")

    if column is None:
        if frame.shape[1] != 1:
            raise ValidationError(
                f"Response file {path} has {frame.shape[1]} columns; pick one with --column"
            )
        column = frame.columns[0]
    if column not in frame.columns:
        raise ValidationError(f"Response file {path} has no column {column!r}")

    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna()
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise ParseError(f"Non-numeric response in {path}", line=line,
                         column=list(frame.columns).index(column) + 1)
    return values.to_numpy(dtype=float)


def _parse_point(text: str) -> Dict[str, float]:
    point = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep:
            raise ValidationError(f"--at expects NAME=VALUE pairs, got {part!r}")
        try:
            point[name.strip()] = float(value)
        except ValueError:
            raise ValidationError(f"--at value for {name.strip()} is not a number: {value!r}")
    return point


def _coded_point(design: SlidingDesign, text: str, coded: bool) -> Tuple[float, float]:
    parent, slid, _ = design.sliding_pair()
    point = _parse_point(text)
    missing = [n for n in (parent.name, slid.name) if n not in point]
    if missing:
        raise ValidationError(f"--at needs values for {', '.join(missing)}")
    if coded:
        return point[parent.name], point[slid.name]
    return tuple(
        float(proportional_code(list(design.actual_array(name)), point[name], allow_extrapolation=True))
        for name in (parent.name, slid.name)
    )


# ========== HANDLERS ==========

def _matrix(config: CliConfig, design: SlidingDesign, intercept: bool):
    return build_model_matrix(
        design,
        config.scheme,
        covariates=config.covariates,
        baseline=config.baseline,
        term_set=config.terms,
        intercept=intercept,
        interactions=config.interactions,
    )


def handle_code(config: CliConfig) -> None:
    design = get_design(config.design)
    matrix = _matrix(config, design, config.intercept)
    write_output(emit_report(matrix, config.report), config.out)
    if config.vif:
        print(emit_report(collinearity_diagnostics(matrix.with_intercept()), ReportFormat.JSON))
    if config.correlations:
        frame = estimate_correlations(matrix.with_intercept())
        print(emit_report(frame, config.report))


def handle_fit(config: CliConfig) -> None:
    design = get_design(config.design)
    matrix = _matrix(config, design, intercept=True)
    fit = ols_fit(matrix, read_response(config.response, config.column),
                  require_inference=config.require_inference)
    write_output(emit_report(fit, config.report), config.out)
    if config.correlations:
        print(emit_report(fit.correlation_frame(), config.report))


def _nem_fit(config: CliConfig, design: SlidingDesign) -> FitResult:
    if config.fit is not None:
        return _load_model(FitResult, config.fit)
    matrix = build_model_matrix(design, CodingScheme.NEM, covariates=config.covariates)
    return ols_fit(matrix, read_response(config.response, config.column))


def handle_translate(config: CliConfig) -> None:
    if config.source is ModelSource.RCRS:
        model = _load_model(RcrsModel, config.eta)
        if config.geometry is not None:
            s, t, r = config.geometry
            model = RcrsModel(**{**model.model_dump(), "s": s, "t": t, "r": r})
        result = rcrs_expand(model)
    elif config.source is ModelSource.NEM:
        design = get_design(config.design)
        result = nem_model_from_fit(_nem_fit(config, design), design)
        if config.target == "rsm":
            result = nem_to_rsm(result)
    else:
        design = get_design(config.design)
        result = rsm_to_nem(_load_model(RsmModel, config.model), sorted(_parent_levels(design)))
    write_output(emit_report(result, config.report), config.out)


def _parent_levels(design: SlidingDesign) -> List[float]:
    parent, _, _ = design.sliding_pair()
    actual = list(design.actual_array(parent.name))
    return [float(proportional_code(actual, a)) for a in parent.settings]


def _prediction_model(path: Path, design: SlidingDesign):
    """RsmModel, NemModel or an RCRS FitResult, told apart by their keys"""
    payload = _read_json(path)
    if not isinstance(payload, dict):
        raise ValidationError(f"Model file {path} must hold a JSON object")
    if "terms" in payload:
        fit = _validate(FitResult, payload, path)
        parent, slid, _ = design.sliding_pair()
        if fit.scheme is CodingScheme.NEM:
            return nem_model_from_fit(fit, design)
        if fit.scheme is CodingScheme.RSM:
            return rsm_model_from_fit(fit, (parent.name, slid.name))
        return fit
    if "alpha" in payload:
        return _validate(NemModel, payload, path)
    return _validate(RsmModel, payload, path)


def handle_predict(config: CliConfig) -> None:
    design = get_design(config.design)
    region = build_region(design)
    x_parent, x_slid = _coded_point(design, config.at, config.coded)
    model = _prediction_model(config.model, design)

    if isinstance(model, RsmModel):
        prediction = predict_rsm(model, region, x_parent, x_slid)
    else:
        if isinstance(model, NemModel):
            value = predict_nem(model, x_parent, x_slid)
        else:
            value = predict_rcrs(model, design, x_parent, x_slid)
        prediction = Prediction(
            value=value, zone=classify(region, x_parent, x_slid), x_parent=x_parent, x_slid=x_slid
        )
    write_output(emit_report(prediction, config.report), config.out)


def handle_region(config: CliConfig) -> None:
    design = get_design(config.design)
    diagnostics = None
    if config.product_transform:
        design, diagnostics = product_transform(design)
        logger.info("Area ratio %s -> %s", diagnostics.area_ratio_before, diagnostics.area_ratio_after)
    frame = build_region(design).to_frame()
    text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n").rstrip("\n")
    write_output(text, config.out)
    if diagnostics is not None and config.out is not None:
        print(emit_report(diagnostics, ReportFormat.JSON))


def handle_simulate(config: CliConfig) -> None:
    payload = _read_json(config.sim_config)
    if not isinstance(payload, dict):
        raise ValidationError(f"Simulation config {config.sim_config} must hold a JSON object")
    overrides = {k: v for k, v in (("seed", config.seed), ("reps", config.reps)) if v is not None}
    sim = _validate(SimConfig, {**payload, **overrides}, config.sim_config)
    write_output(emit_report(run_simulation(sim), config.report), config.out)


def handle_fixture(config: CliConfig) -> None:
    design = build_welding_fixture(with_geometry=config.with_geometry)
    for path in save_design(design, config.out):
        print(path)


HANDLERS = {
    Command.CODE: handle_code,
    Command.FIT: handle_fit,
    Command.TRANSLATE: handle_translate,
    Command.PREDICT: handle_predict,
    Command.REGION: handle_region,
    Command.SIMULATE: handle_simulate,
    Command.FIXTURE: handle_fixture,
}


# ========== DISPATCH ==========

def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one CLI invocation and return its exit code: 0 on success, 2 for
    validation and parse errors, 3 for numerical failures
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION

    setup_logging("DEBUG" if args.verbose else None)
    options = {k: v for k, v in vars(args).items() if k != "verbose" and v is not None}
    try:
        config = CliConfig.model_validate(options)
        HANDLERS[config.command](config)
    except PydanticValidationError as exc:
        messages = "; ".join(error["msg"] for error in exc.errors())
        print(f"{CLI_NAME}: error: {messages}", file=sys.stderr)
        return EXIT_VALIDATION
    except SlideKitError as exc:
        print(f"{CLI_NAME}: error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"{CLI_NAME}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK
