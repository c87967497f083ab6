import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError

from app.core.config import settings
from app.core.constants import WELDING_FIXTURE
from app.core.exceptions import (
    MissingSlidingEntry,
    ParseError,
    UnknownLevelLabel,
    ValidationError,
)
from app.coding.service import proportional_code_array
from app.designs.models import FactorRole
from app.designs.schemas import FactorSpec, PlanningMatrix, SlidingDesign, SlidingSpec

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ========== RESOLUTION ==========

def _check_sliding_table(
    spec: SlidingSpec, parent: FactorSpec, slid: FactorSpec
) -> None:
    """Every parent level needs an entry with one setting per slid level"""
    for label in spec.table:
        if label not in parent.levels:
            raise UnknownLevelLabel(
                f"Sliding table of {slid.name} lists parent level {label!r} "
                f"not declared for {parent.name}"
            )
    for label in parent.levels:
        if label not in spec.table:
            raise MissingSlidingEntry(
                f"Sliding table of {slid.name} is missing parent level {label!r} of {parent.name}"
            )
        if len(spec.table[label]) != slid.n_levels:
            raise MissingSlidingEntry(
                f"Sliding table of {slid.name} at {parent.name}={label} has "
                f"{len(spec.table[label])} settings for {slid.n_levels} slid levels"
            )


def resolve_settings(
    planning: PlanningMatrix,
    factors: Sequence[FactorSpec],
    sliding: Sequence[SlidingSpec] = (),
) -> SlidingDesign:
    """
    Materialize actual numeric settings for every quantitative factor
    """
    factors = tuple(factors)
    sliding = tuple(sliding)
    by_name = {f.name: f for f in factors}
    if len(by_name) != len(factors):
        raise ValidationError("Factor names must be unique")

    for name in planning.columns:
        if name not in by_name:
            raise ValidationError(f"Planning matrix column {name} has no factor spec")
    for spec in factors:
        if spec.name not in planning.columns:
            raise ValidationError(f"Factor {spec.name} has no planning matrix column")
        for run, label in enumerate(planning.columns[spec.name], start=1):
            if label not in spec.levels:
                raise UnknownLevelLabel(
                    f"Run {run}: level {label!r} is not declared for factor {spec.name}"
                )

    tables: Dict[str, SlidingSpec] = {}
    for spec in sliding:
        if spec.slid not in by_name or spec.parent not in by_name:
            raise ValidationError(
                f"Sliding table {spec.parent} -> {spec.slid} references an unknown factor"
            )
        if spec.slid in tables:
            raise ValidationError(f"Factor {spec.slid} has more than one sliding table")
        slid = by_name[spec.slid]
        if slid.role is not FactorRole.SLID or slid.parent != spec.parent:
            raise ValidationError(
                f"Sliding table {spec.parent} -> {spec.slid} does not match factor {spec.slid} "
                f"(role {slid.role.value}, parent {slid.parent})"
            )
        if by_name[spec.parent].role is not FactorRole.PARENT:
            raise ValidationError(f"Factor {spec.parent} slides {spec.slid} but is not a parent")
        _check_sliding_table(spec, by_name[spec.parent], slid)
        tables[spec.slid] = spec

    actual: Dict[str, Tuple[float, ...]] = {}
    for spec in factors:
        labels = planning.columns[spec.name]
        if spec.role is FactorRole.SLID:
            table = tables.get(spec.name)
            if table is None:
                raise MissingSlidingEntry(f"Slid factor {spec.name} has no sliding table")
            parent_labels = planning.columns[table.parent]
            actual[spec.name] = tuple(
                float(table.table[p][spec.level_index(label)])
                for p, label in zip(parent_labels, labels)
            )
        elif spec.settings is not None:
            actual[spec.name] = tuple(
                float(spec.settings[spec.level_index(label)]) for label in labels
            )

    design = SlidingDesign(planning=planning, factors=factors, sliding=sliding, actual=actual)
    for spec in sliding:
        if spec.has_geometry:
            check_geometry(design, spec)
    return design


# ========== GEOMETRY ==========

def _coded_table(design: SlidingDesign, spec: SlidingSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coded parent value, midpoint and half-range of every table entry"""
    parent = design.factor(spec.parent)
    if not parent.is_quantitative:
        raise ValidationError(f"Parent {parent.name} is qualitative; sliding geometry needs a numeric parent")
    parent_actual = design.actual_array(spec.parent)
    slid_actual = design.actual_array(spec.slid)
    xs, mids, halves = [], [], []
    for label in parent.levels:
        entry = np.asarray(spec.table[label], dtype=float)
        x = proportional_code_array(
            parent_actual, [parent.settings[parent.level_index(label)]]
        )[0]
        coded = proportional_code_array(slid_actual, entry)
        xs.append(x)
        mids.append((coded[0] + coded[-1]) / 2)
        halves.append((coded[-1] - coded[0]) / 2)
    return np.array(xs), np.array(mids), np.array(halves)


def check_geometry(design: SlidingDesign, spec: Optional[SlidingSpec] = None, tol: Optional[float] = None) -> None:
    """
    Verify an annotated (s, t, r) against the sliding table in coded units
    """
    tol = settings.GEOMETRY_TOLERANCE if tol is None else tol
    specs = [spec] if spec is not None else [s for s in design.sliding if s.has_geometry]
    for spec in specs:
        if not spec.has_geometry:
            continue
        xs, mids, halves = _coded_table(design, spec)
        expected = spec.s + spec.t * xs
        center_gap = float(np.max(np.abs(mids - expected)))
        width_gap = float(np.max(np.abs(halves - spec.r)))
        if center_gap > tol or width_gap > tol:
            logger.warning(
                "Geometry annotation of %s disagrees with its table (center %.3g, half-width %.3g)",
                spec.slid, center_gap, width_gap,
            )
            raise ValidationError(
                f"Geometry (s={spec.s}, t={spec.t}, r={spec.r}) of {spec.slid} is inconsistent "
                f"with its sliding table: center off by {center_gap:.3g}, half-width off by {width_gap:.3g}"
            )


def sliding_geometry(design: SlidingDesign, tol: Optional[float] = None) -> Optional[Tuple[float, float, float]]:
    """
    Coded (s, t, r) implied by the sliding table, or None when the centers are
    not affine in the coded parent or the half-widths are not constant
    """
    tol = settings.GEOMETRY_TOLERANCE if tol is None else tol
    parent, _, spec = design.sliding_pair()
    if spec.has_geometry:
        return spec.geometry
    if not parent.is_quantitative:
        return None
    xs, mids, halves = _coded_table(design, spec)
    if len(xs) < 2:
        return None
    t, s = np.polyfit(xs, mids, 1)
    if np.max(np.abs(s + t * xs - mids)) > tol:
        return None
    if np.ptp(halves) > tol:
        return None
    return float(s), float(t), float(np.mean(halves))


def with_geometry(design: SlidingDesign) -> SlidingDesign:
    """Annotate the sliding table with its inferred geometry"""
    geometry = sliding_geometry(design)
    if geometry is None:
        raise ValidationError("Sliding table is not affine with constant half-width")
    s, t, r = geometry
    _, _, spec = design.sliding_pair()
    annotated = spec.model_copy(update={"s": s, "t": t, "r": r})
    return resolve_settings(design.planning, design.factors, (annotated,))


# ========== FILE I/O ==========

def _design_paths(path: PathLike) -> Tuple[Path, Path]:
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    return base.with_name(base.name + ".csv"), base.with_name(base.name + ".json")


def _read_planning(csv_path: Path) -> Tuple[List[str], List[List[str]]]:
    try:
        frame = pd.read_csv(csv_path, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError(f"Design file {csv_path} is empty", line=1)
    except pd.errors.ParserError as exc:
        line = re.search(r"line (\d+)", str(exc))
        saw = re.search(r"saw (\d+)", str(exc))
        raise ParseError(
            f"Malformed design file {csv_path}",
            line=int(line.group(1)) if line else None,
            column=int(saw.group(1)) if saw else None,
        )
    header = [str(x).strip() for x in frame.iloc[0].tolist()]
    seen = set()
    for column, name in enumerate(header, start=1):
        if not name:
            raise ParseError("Empty factor name in header", line=1, column=column)
        if name in seen:
            raise ParseError(f"Duplicate factor column {name!r}", line=1, column=column)
        seen.add(name)
    rows = []
    for line, (_, row) in enumerate(frame.iloc[1:].iterrows(), start=2):
        values = row.tolist()
        for column, value in enumerate(values, start=1):
            if not isinstance(value, str) or value == "":
                raise ParseError("Missing level label", line=line, column=column)
        rows.append([v.strip() for v in values])
    return header, rows


def load_design(path: PathLike) -> SlidingDesign:
    """
    Load `<name>.csv` (symbolic levels) and `<name>.json` (factor metadata)
    """
    csv_path, meta_path = _design_paths(path)
    header, rows = _read_planning(csv_path)

    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"Malformed design metadata {meta_path}: {exc.msg}", line=exc.lineno, column=exc.colno)

    if not isinstance(meta, dict):
        raise ValidationError(f"Design metadata {meta_path} must be a JSON object")
    runs = meta.get("runs")
    if runs is not None and runs != len(rows):
        raise ValidationError(
            f"Design metadata declares {runs} runs but {csv_path} has {len(rows)} data rows"
        )

    try:
        factors = tuple(FactorSpec.model_validate(f) for f in meta.get("factors", []))
        sliding = tuple(SlidingSpec.model_validate(s) for s in meta.get("sliding", []))
        planning = PlanningMatrix(
            runs=len(rows),
            columns={name: tuple(row[i] for row in rows) for i, name in enumerate(header)},
        )
    except PydanticValidationError as exc:
        raise ValidationError(f"Invalid design {meta_path}: {exc}")

    declared = [f.name for f in factors]
    if sorted(declared) != sorted(header):
        raise ValidationError(
            f"Design columns {header} do not match declared factors {declared}"
        )

    design = resolve_settings(planning, factors, sliding)
    logger.info("Loaded design %s: %d runs, %d factors", csv_path, design.runs, len(factors))
    return design


def save_design(design: SlidingDesign, path: PathLike) -> Tuple[Path, Path]:
    """
    Write the design as `<name>.csv` + `<name>.json`
    """
    csv_path, meta_path = _design_paths(path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)

    frame = pd.DataFrame({name: list(column) for name, column in design.planning.columns.items()})
    frame.to_csv(csv_path, index=False, lineterminator="\n")

    meta = {
        "runs": design.runs,
        "factors": [f.model_dump(mode="json") for f in design.factors],
        "sliding": [s.model_dump(mode="json") for s in design.sliding],
    }
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote design to %s and %s", csv_path, meta_path)
    return csv_path, meta_path


def get_design(reference: PathLike) -> SlidingDesign:
    """
    Resolve a design reference: a bundled fixture name or a file path
    """
    if str(reference) == WELDING_FIXTURE:
        from app.designs.fixtures import build_welding_fixture

        return build_welding_fixture()
    return load_design(reference)
