import logging
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial

from app.coding.service import coded_factor, lq_contrasts, proportional_code_array, slid_contrasts
from app.core.config import settings
from app.core.constants import INTERCEPT
from app.core.exceptions import (
    DegenerateRange,
    DuplicateParentLevel,
    OffDesignParentLevel,
    ValidationError,
)
from app.designs.schemas import SlidingDesign, SlidingSpec
from app.designs.service import resolve_settings
from app.fitting.schemas import FitResult
from app.region.models import Zone
from app.region.schemas import Point, Prediction, Region, TransformDiagnostics
from app.translation.schemas import NemModel, RsmModel

logger = logging.getLogger(__name__)


# ========== GEOMETRY ==========

def polygon_area(vertices: Sequence[Point]) -> float:
    """Shoelace area of a simple polygon"""
    if len(vertices) < 3:
        return 0.0
    xs = np.array([v[0] for v in vertices], dtype=float)
    ys = np.array([v[1] for v in vertices], dtype=float)
    return float(abs(np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))) / 2.0)


def _is_left(p0: Point, p1: Point, p2: Point) -> float:
    return (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])


def _on_segment(p: Point, a: Point, b: Point, tol: float) -> bool:
    ab = np.subtract(b, a)
    ap = np.subtract(p, a)
    length2 = float(ab @ ab)
    if length2 == 0.0:
        return float(np.hypot(*ap)) <= tol
    u = min(max(float(ap @ ab) / length2, 0.0), 1.0)
    return float(np.hypot(*(ap - u * ab))) <= tol


def _winding_number(p: Point, vertices: Sequence[Point]) -> int:
    wn = 0
    closed = tuple(vertices) + (vertices[0],)
    for a, b in zip(closed, closed[1:]):
        if a[1] <= p[1]:
            if b[1] > p[1] and _is_left(a, b, p) > 0:
                wn += 1
        elif b[1] <= p[1] and _is_left(a, b, p) < 0:
            wn -= 1
    return wn


def build_region(design: SlidingDesign, factors: Optional[Tuple[str, str]] = None) -> Region:
    """
    Polygon whose cross-section at each coded parent level is the coded slid
    range there, linear between adjacent parent levels
    """
    if factors is None:
        parent, slid, _ = design.sliding_pair()
        factors = (parent.name, slid.name)
    parent_name, slid_name = factors
    parent = design.factor(parent_name)
    slid = design.factor(slid_name)
    if not (parent.is_quantitative and slid.is_quantitative):
        raise ValidationError("Region needs two quantitative factors")

    x_parent = coded_factor(design, parent_name)
    x_slid = coded_factor(design, slid_name)
    table: Optional[SlidingSpec] = design.sliding_for(slid_name)
    if table is not None and table.parent != parent_name:
        raise ValidationError(f"{slid_name} slides on {table.parent}, not {parent_name}")

    labels = design.labels(parent_name)
    present = [label for label in parent.levels if label in labels]
    if len(present) < 2:
        raise ValidationError(f"Region needs at least 2 levels of {parent_name}, found {len(present)}")

    sections = []
    for label in present:
        x = float(x_parent[labels.index(label)])
        if table is not None:
            coded = proportional_code_array(design.actual_array(slid_name), table.table[label])
        else:
            coded = x_slid[[k for k, lab in enumerate(labels) if lab == label]]
        sections.append((x, float(np.min(coded)), float(np.max(coded))))
    sections.sort()

    levels = tuple(s[0] for s in sections)
    lower = tuple(s[1] for s in sections)
    upper = tuple(s[2] for s in sections)
    vertices = tuple((x, lo) for x, lo in zip(levels, lower)) + tuple(
        (x, hi) for x, hi in reversed(list(zip(levels, upper)))
    )
    return Region(
        factors=(parent_name, slid_name),
        parent_levels=levels,
        lower=lower,
        upper=upper,
        vertices=vertices,
        area=polygon_area(vertices),
    )


def classify(region: Region, x_parent: float, x_slid: float, tol: Optional[float] = None) -> Zone:
    """
    InsideRE (boundary included), ExtrapolationBand or OutsideRM
    """
    tol = settings.BOUNDARY_TOLERANCE if tol is None else tol
    if abs(x_parent) > 1.0 + tol or abs(x_slid) > 1.0 + tol:
        return Zone.OUTSIDE_RM
    point = (float(x_parent), float(x_slid))
    vertices = region.vertices
    closed = tuple(vertices) + (vertices[0],)
    if any(_on_segment(point, a, b, tol) for a, b in zip(closed, closed[1:])):
        return Zone.INSIDE_RE
    if _winding_number(point, vertices) != 0:
        return Zone.INSIDE_RE
    return Zone.EXTRAPOLATION_BAND


# ========== PREDICTION ==========

def predict_rsm(model: RsmModel, region: Region, x_parent: float, x_slid: float) -> Prediction:
    """RSM prediction with its zone; extrapolation is reported, not refused"""
    zone = classify(region, x_parent, x_slid)
    value = model.evaluate(x_parent, x_slid)
    if zone.is_extrapolation:
        logger.warning(
            "Prediction at (%.4g, %.4g) is an extrapolation (%s)", x_parent, x_slid, zone.value
        )
    return Prediction(value=value, zone=zone, x_parent=x_parent, x_slid=x_slid)


def _match_level(levels: Sequence[float], x: float, parent: str) -> int:
    tol = settings.PARENT_LEVEL_TOLERANCE
    matches = [k for k, level in enumerate(levels) if abs(level - x) <= tol]
    if not matches:
        raise OffDesignParentLevel(
            f"{parent} = {x} is not a parent level of the design ({', '.join(f'{v:g}' for v in levels)}); "
            "nested effects cannot be interpolated between parent levels"
        )
    if len(matches) > 1:
        raise DuplicateParentLevel(f"Parent level {x} appears more than once")
    return matches[0]


def on_parent_level(design: SlidingDesign, x_parent) -> np.ndarray:
    """Mask of coded parent values that sit on a parent level of the design"""
    parent, _, _ = design.sliding_pair()
    levels = np.unique(coded_factor(design, parent.name))
    x = np.atleast_1d(np.asarray(x_parent, dtype=float))
    gaps = np.abs(x[:, None] - levels[None, :])
    return np.any(gaps <= settings.PARENT_LEVEL_TOLERANCE, axis=1)


def predict_nem(model: NemModel, x_parent: float, x_slid: float) -> float:
    """
    alpha + beta*x_B + gamma*x_B^2 at a parent level of the model; refuses other x_A
    """
    index = _match_level(model.parent_levels, x_parent, model.parent)
    alpha, beta, gamma = model.triple(index)
    return float(alpha + beta * x_slid + gamma * x_slid ** 2)


def _slid_polynomials(coded: np.ndarray, n_levels: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Coefficients (increasing powers) of the polynomials through the slid contrast values at the coded settings"""
    vander = np.vander(coded, increasing=True)
    pairs = [slid_contrasts(n_levels, k) for k in range(n_levels)]
    linear = np.linalg.solve(vander, [p[0] for p in pairs])
    if pairs[0][1] is None:
        return linear, None
    return linear, np.linalg.solve(vander, [p[1] for p in pairs])


def rcrs_columns(design: SlidingDesign, x_parent, x_slid) -> Dict[str, np.ndarray]:
    """
    RCRS model columns at arbitrary coded (x_A, x_B).

    Slid contrasts are the polynomials through their values at each parent level's
    own settings, so unevenly spaced tables reproduce their fitted values. With an
    annotated (s, t, r) geometry they are taken in the standardized coordinate
    z = (x_B - s - t*x_A) / r (z and 3z^2 - 2 for three equally spaced settings)
    and their coefficients are interpolated linearly between parent levels;
    otherwise every point must sit on a parent level of the design. Parent
    contrasts are interpolated through their values at the parent levels (x and
    3x^2 - 2 for equally spaced levels).
    """
    parent, slid, spec = design.sliding_pair()
    a = np.atleast_1d(np.asarray(x_parent, dtype=float))
    b = np.atleast_1d(np.asarray(x_slid, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    x_levels = proportional_code_array(design.actual_array(parent.name), parent.settings)

    slid_actual = design.actual_array(slid.name)
    polynomials = []
    for i, label in enumerate(parent.levels):
        coded = proportional_code_array(slid_actual, spec.table[label])
        if spec.has_geometry:
            s, t, r = spec.geometry
            coded = (coded - s - t * x_levels[i]) / r
        polynomials.append(_slid_polynomials(coded, slid.n_levels))

    slid_quadratic = np.zeros_like(b)
    if spec.has_geometry:
        s, t, r = spec.geometry
        z = (b - s - t * a) / r
        # Coefficients between parent levels are interpolated linearly in x_A
        linear = np.array([np.interp(a, x_levels, column) for column in zip(*(p[0] for p in polynomials))])
        slid_linear = polynomial.polyval(z, linear, tensor=False)
        if polynomials[0][1] is not None:
            quadratic = np.array([np.interp(a, x_levels, column) for column in zip(*(p[1] for p in polynomials))])
            slid_quadratic = polynomial.polyval(z, quadratic, tensor=False)
    else:
        slid_linear = np.empty_like(b)
        index = np.array([_match_level(list(x_levels), float(x), parent.name) for x in a], dtype=int)
        for i in np.unique(index):
            at_level = index == i
            linear, quadratic = polynomials[i]
            slid_linear[at_level] = polynomial.polyval(b[at_level], linear)
            if quadratic is not None:
                slid_quadratic[at_level] = polynomial.polyval(b[at_level], quadratic)

    contrasts = [lq_contrasts(parent.n_levels, i) for i in range(parent.n_levels)]
    degree = parent.n_levels - 1
    parent_linear = np.polyval(np.polyfit(x_levels, [c[0] for c in contrasts], degree), a)
    columns = {
        INTERCEPT: np.ones_like(a),
        f"{parent.name}_l": parent_linear,
        f"{slid.name}_l": slid_linear,
        f"{slid.name}_q": slid_quadratic,
        f"{parent.name}_l*{slid.name}_l": parent_linear * slid_linear,
        f"{parent.name}_l*{slid.name}_q": parent_linear * slid_quadratic,
    }
    if contrasts[0][1] is not None:
        columns[f"{parent.name}_q"] = np.polyval(np.polyfit(x_levels, [c[1] for c in contrasts], degree), a)
    return columns


def predict_rcrs(
    fit: Union[FitResult, Mapping[str, float]],
    design: SlidingDesign,
    x_parent,
    x_slid,
):
    """
    RCRS prediction; terms outside the parent/slid block (covariates) sit at their mean, 0
    """
    coefficients = fit.coefficient_map() if isinstance(fit, FitResult) else dict(fit)
    columns = rcrs_columns(design, x_parent, x_slid)
    value = sum(c * columns[term] for term, c in coefficients.items() if term in columns)
    if np.ndim(x_parent) == 0 and np.ndim(x_slid) == 0:
        return float(np.asarray(value).reshape(-1)[0])
    return value


# ========== PRODUCT TRANSFORM ==========

def _abs_corr(design: SlidingDesign, a: str, b: str) -> Optional[float]:
    x, y = design.actual_array(a), design.actual_array(b)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(abs(np.corrcoef(x, y)[0, 1]))


def _area_ratio(design: SlidingDesign) -> Optional[float]:
    try:
        return build_region(design).area_ratio
    except (ValidationError, DegenerateRange):
        return None


def product_transform(design: SlidingDesign) -> Tuple[SlidingDesign, TransformDiagnostics]:
    """
    Replace the slid settings by parent setting x slid setting
    """
    parent, slid, spec = design.sliding_pair()
    if not (parent.is_quantitative and slid.is_quantitative):
        raise ValidationError("Product transform needs a quantitative parent and slid factor")

    table = {}
    for label in parent.levels:
        a = parent.settings[parent.level_index(label)]
        table[label] = tuple(a * b for b in spec.table[label])
    products = [v for entry in table.values() for v in entry]
    if max(products) == min(products):
        raise DegenerateRange("All transformed settings are equal")
    for label, entry in table.items():
        if any(b <= a for a, b in zip(entry, entry[1:])):
            raise ValidationError(
                f"Transformed settings at {parent.name}={label} are not increasing; "
                "the parent setting must be positive"
            )

    transformed = resolve_settings(
        design.planning,
        design.factors,
        tuple(
            SlidingSpec(parent=spec.parent, slid=spec.slid, table=table) if s is spec else s
            for s in design.sliding
        ),
    )
    diagnostics = TransformDiagnostics(
        corr_before=_abs_corr(design, parent.name, slid.name),
        corr_after=_abs_corr(transformed, parent.name, slid.name),
        area_ratio_before=_area_ratio(design),
        area_ratio_after=_area_ratio(transformed),
    )
    logger.info(
        "Product transform: |corr| %s -> %s", diagnostics.corr_before, diagnostics.corr_after
    )
    return transformed, diagnostics
