import logging
from fractions import Fraction
from numbers import Rational
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.coding.models import CodingScheme
from app.coding.schemas import ModelMatrix
from app.core.constants import INTERCEPT, MAX_RSM_DEGREE, RSM_TERM_PRESETS, WELDING_TERMS
from app.core.exceptions import (
    DegenerateRange,
    OutOfRange,
    UnsupportedDegree,
    UnsupportedLevelCount,
    ValidationError,
)
from app.designs.models import FactorRole
from app.designs.schemas import FactorSpec, SlidingDesign

logger = logging.getLogger(__name__)

Number = Union[int, float, Fraction]
TermSet = Union[None, str, Sequence[Tuple[int, ...]]]

LINEAR = {2: (-1, 1), 3: (-1, 0, 1)}
QUADRATIC = {3: (1, -2, 1)}
# Conditional low/high of a two-level slid factor
SLID_TWO_LEVEL = (1, -1)


# ========== CONTRASTS ==========

def lq_contrasts(n_levels: int, level_index: int) -> Tuple[int, Optional[int]]:
    """
    Linear-quadratic contrast values (linear, quadratic) of a level;
    quadratic is None for two-level factors
    """
    if n_levels not in LINEAR:
        raise UnsupportedLevelCount(
            f"Linear-quadratic coding needs 2 or 3 levels, got {n_levels}"
        )
    if not 0 <= level_index < n_levels:
        raise ValidationError(f"Level index {level_index} out of range for {n_levels} levels")
    quadratic = QUADRATIC[n_levels][level_index] if n_levels in QUADRATIC else None
    return LINEAR[n_levels][level_index], quadratic


def slid_contrasts(n_levels: int, level_index: int) -> Tuple[int, Optional[int]]:
    """Slid factor contrasts; a two-level slid factor codes its conditional low/high as (+1, -1)"""
    if n_levels == 2:
        lq_contrasts(n_levels, level_index)
        return SLID_TWO_LEVEL[level_index], None
    return lq_contrasts(n_levels, level_index)


def _contrast_columns(n_levels: int, indices: np.ndarray, slid: bool = False) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    contrasts = slid_contrasts if slid else lq_contrasts
    pairs = [contrasts(n_levels, int(i)) for i in indices]
    linear = np.array([p[0] for p in pairs], dtype=float)
    if n_levels == 2:
        return linear, None
    return linear, np.array([p[1] for p in pairs], dtype=float)


# ========== PROPORTIONAL CODING ==========

def _is_exact(x) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


def proportional_code(
    settings: Sequence[Number],
    value: Number,
    allow_extrapolation: bool = False,
) -> Number:
    """
    Map value to [-1, 1] using the min and max of settings.
    Exact (Fraction) when settings and value are ints or Fractions.
    """
    if len(settings) == 0:
        raise DegenerateRange("Cannot code against an empty set of settings")
    lo, hi = min(settings), max(settings)
    if hi == lo:
        raise DegenerateRange(f"All settings equal {lo}; proportional coding is undefined")
    if not allow_extrapolation and not lo <= value <= hi:
        raise OutOfRange(f"Value {value} outside the coded range [{lo}, {hi}]")
    exact = _is_exact(value) and all(_is_exact(x) for x in settings)
    coded = (2 * Fraction(value) - Fraction(lo) - Fraction(hi)) / (Fraction(hi) - Fraction(lo))
    return coded if exact else float(coded)


def proportional_code_array(settings: Sequence[float], values: Sequence[float]) -> np.ndarray:
    """Vectorized proportional coding; no range check"""
    settings = np.asarray(settings, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = float(np.min(settings)), float(np.max(settings))
    if hi == lo:
        raise DegenerateRange(f"All settings equal {lo}; proportional coding is undefined")
    return (2.0 * values - lo - hi) / (hi - lo)


def coded_factor(design: SlidingDesign, name: str) -> np.ndarray:
    """Per-run proportional coding of a quantitative factor"""
    spec = design.factor(name)
    if not spec.is_quantitative:
        raise ValidationError(f"Factor {name} is qualitative and has no proportional coding")
    actual = design.actual_array(name)
    return proportional_code_array(actual, actual)


# ========== HELPERS ==========

def _finish(
    scheme: CodingScheme,
    terms: List[str],
    columns: List[np.ndarray],
    runs: int,
    intercept: bool,
) -> ModelMatrix:
    if intercept:
        terms = [INTERCEPT] + terms
        columns = [np.ones(runs)] + columns
    values = np.column_stack(columns) if columns else np.zeros((runs, 0))
    matrix = ModelMatrix(scheme=scheme, terms=tuple(terms), values=values, intercept_included=intercept)
    logger.debug("Coded %s matrix: %d runs x %d terms", scheme.label, matrix.runs, matrix.n_terms)
    return matrix


def _check_levels(spec: FactorSpec) -> None:
    if spec.n_levels not in LINEAR:
        raise UnsupportedLevelCount(
            f"Factor {spec.name} has {spec.n_levels} levels; linear-quadratic coding needs 2 or 3"
        )


def _parent_columns(design: SlidingDesign, parent: FactorSpec) -> Tuple[List[str], List[np.ndarray]]:
    _check_levels(parent)
    linear, quadratic = _contrast_columns(parent.n_levels, design.level_indices(parent.name))
    terms, columns = [f"{parent.name}_l"], [linear]
    if quadratic is not None:
        terms.append(f"{parent.name}_q")
        columns.append(quadratic)
    return terms, columns


def _nested_columns(
    design: SlidingDesign,
    parent: FactorSpec,
    slid: FactorSpec,
) -> Tuple[List[str], List[np.ndarray]]:
    """Conditional slid contrasts, zero outside their parent level"""
    _check_levels(slid)
    linear, quadratic = _contrast_columns(slid.n_levels, design.level_indices(slid.name), slid=True)
    parent_index = design.level_indices(parent.name)
    terms, columns = [], []
    for i in range(parent.n_levels):
        mask = (parent_index == i).astype(float)
        terms.append(f"{slid.name}_l|{parent.name}_{i + 1}")
        columns.append(linear * mask)
        if quadratic is not None:
            terms.append(f"{slid.name}_q|{parent.name}_{i + 1}")
            columns.append(quadratic * mask)
    return terms, columns


# ========== RCRS / NEM ==========

def code_rcrs(design: SlidingDesign, interactions: bool = True, intercept: bool = True) -> ModelMatrix:
    """
    RCRS coding: the slid factor is coded on its symbolic level as if it were not slid
    """
    parent, slid, _ = design.sliding_pair()
    _check_levels(slid)
    terms, columns = _parent_columns(design, parent)
    parent_linear = columns[0]
    s_linear, s_quadratic = _contrast_columns(slid.n_levels, design.level_indices(slid.name), slid=True)
    terms.append(f"{slid.name}_l")
    columns.append(s_linear)
    if s_quadratic is not None:
        terms.append(f"{slid.name}_q")
        columns.append(s_quadratic)

    if interactions:
        terms.append(f"{parent.name}_l*{slid.name}_l")
        columns.append(parent_linear * s_linear)
        if s_quadratic is not None:
            terms.append(f"{parent.name}_l*{slid.name}_q")
            columns.append(parent_linear * s_quadratic)

    return _finish(CodingScheme.RCRS, terms, columns, design.runs, intercept)


def code_nem(design: SlidingDesign, intercept: bool = True) -> ModelMatrix:
    """
    Nested-effects coding: parent main effects plus slid contrasts conditional on each parent level
    """
    parent, slid, _ = design.sliding_pair()
    if not parent.is_quantitative:
        raise ValidationError(
            f"Parent {parent.name} is qualitative; use the qualitative nested coding"
        )
    terms, columns = _parent_columns(design, parent)
    nested_terms, nested_columns = _nested_columns(design, parent, slid)
    return _finish(CodingScheme.NEM, terms + nested_terms, columns + nested_columns, design.runs, intercept)


def code_nem_qualitative(
    design: SlidingDesign,
    baseline_level: Optional[str] = None,
    intercept: bool = True,
) -> ModelMatrix:
    """
    Nested-effects coding for a qualitative parent: contrasts A_{b,j} (+1 at the
    baseline level b, -1 at level j, 0 elsewhere) plus conditional slid contrasts
    """
    parent, slid, _ = design.sliding_pair()
    if parent.n_levels < 2:
        raise ValidationError(f"Parent {parent.name} needs at least 2 levels")
    baseline = parent.level_index(baseline_level) if baseline_level is not None else 0
    parent_index = design.level_indices(parent.name)

    terms, columns = [], []
    for j in range(parent.n_levels):
        if j == baseline:
            continue
        column = np.zeros(design.runs)
        column[parent_index == baseline] = 1.0
        column[parent_index == j] = -1.0
        terms.append(f"{parent.name}_{{{baseline + 1},{j + 1}}}")
        columns.append(column)

    nested_terms, nested_columns = _nested_columns(design, parent, slid)
    return _finish(CodingScheme.NEM, terms + nested_terms, columns + nested_columns, design.runs, intercept)


# ========== RSM ==========

def rsm_term_label(exponents: Sequence[int], factors: Sequence[str]) -> str:
    """Canonical label of a monomial, e.g. (1, 2) over (A, B) -> x_A*x_B^2"""
    parts = []
    for name, power in zip(factors, exponents):
        if power == 1:
            parts.append(f"x_{name}")
        elif power > 1:
            parts.append(f"x_{name}^{power}")
    return "*".join(parts) if parts else INTERCEPT


def parse_rsm_term(label: str, factors: Sequence[str]) -> Tuple[int, ...]:
    """Exponent tuple of a canonical monomial label"""
    exponents = [0] * len(factors)
    if label == INTERCEPT:
        return tuple(exponents)
    for part in label.split("*"):
        base, _, power = part.partition("^")
        name = base[2:] if base.startswith("x_") else None
        if name not in factors:
            raise ValidationError(f"Term {label!r} is not a monomial in {', '.join(factors)}")
        try:
            exponents[list(factors).index(name)] += int(power) if power else 1
        except ValueError:
            raise ValidationError(f"Term {label!r} has a non-integer exponent")
    return tuple(exponents)


def resolve_term_set(term_set: TermSet, n_factors: int = 2) -> Tuple[Tuple[int, ...], ...]:
    """Preset name, explicit exponent tuples or None (welding preset)"""
    if term_set is None:
        terms = WELDING_TERMS
    elif isinstance(term_set, str):
        if term_set not in RSM_TERM_PRESETS:
            raise ValidationError(
                f"Unknown RSM term preset {term_set!r} (known: {', '.join(RSM_TERM_PRESETS)})"
            )
        terms = RSM_TERM_PRESETS[term_set]
    else:
        terms = tuple(tuple(int(e) for e in term) for term in term_set)

    seen = set()
    for term in terms:
        if len(term) != n_factors:
            raise ValidationError(f"Term {term} needs one exponent per factor ({n_factors})")
        if any(e < 0 for e in term):
            raise ValidationError(f"Term {term} has a negative exponent")
        if any(e > MAX_RSM_DEGREE for e in term):
            raise UnsupportedDegree(
                f"Term {term} has an exponent above {MAX_RSM_DEGREE}; higher-degree polynomials are not supported"
            )
        if sum(term) == 0:
            raise ValidationError("The constant term is the intercept, not an RSM term")
        if term in seen:
            raise ValidationError(f"Term {term} listed twice")
        seen.add(term)
    return tuple(terms)


def code_rsm(
    design: SlidingDesign,
    term_set: TermSet = None,
    factors: Optional[Sequence[str]] = None,
    intercept: bool = True,
) -> ModelMatrix:
    """
    RSM coding: monomials of the proportionally coded factors
    """
    if factors is None:
        parent, slid, _ = design.sliding_pair()
        factors = (parent.name, slid.name)
    factors = tuple(factors)
    terms = resolve_term_set(term_set, len(factors))

    coded = {name: coded_factor(design, name) for name in factors}
    labels, columns = [], []
    for exponents in terms:
        column = np.ones(design.runs)
        for name, power in zip(factors, exponents):
            if power:
                column = column * coded[name] ** power
        labels.append(rsm_term_label(exponents, factors))
        columns.append(column)
    return _finish(CodingScheme.RSM, labels, columns, design.runs, intercept)


# ========== COVARIATES ==========

def code_covariates(
    design: SlidingDesign,
    mode: str = "lq",
    factors: Optional[Sequence[str]] = None,
) -> ModelMatrix:
    """
    Contrast columns of the free factors (no intercept).

    mode "lq" adds linear and quadratic contrasts of three-level factors, "linear"
    only the linear one. Two-level factors get the centered contrast
    (-2*n_high/n, 2*n_low/n), which is +-1 when the column is balanced.
    """
    if mode not in ("lq", "linear"):
        raise ValidationError(f"Unknown covariate mode {mode!r}; use lq or linear")
    specs = (
        [design.factor(name) for name in factors]
        if factors is not None
        else [f for f in design.factors if f.role is FactorRole.FREE]
    )

    terms, columns = [], []
    for spec in specs:
        _check_levels(spec)
        index = design.level_indices(spec.name)
        if spec.n_levels == 2:
            n_low = int(np.sum(index == 0))
            n_high = design.runs - n_low
            low, high = -2.0 * n_high / design.runs, 2.0 * n_low / design.runs
            terms.append(f"{spec.name}_l")
            columns.append(np.where(index == 0, low, high))
            continue
        linear, quadratic = _contrast_columns(spec.n_levels, index)
        terms.append(f"{spec.name}_l")
        columns.append(linear)
        if mode == "lq":
            terms.append(f"{spec.name}_q")
            columns.append(quadratic)
    return _finish(CodingScheme.COVARIATE, terms, columns, design.runs, intercept=False)


def build_model_matrix(
    design: SlidingDesign,
    scheme: Union[CodingScheme, str],
    covariates: Optional[str] = None,
    baseline: Optional[str] = None,
    term_set: TermSet = None,
    intercept: bool = True,
    interactions: bool = True,
) -> ModelMatrix:
    """Model matrix for a scheme, optionally followed by covariate contrasts"""
    scheme = CodingScheme(scheme)
    if scheme is CodingScheme.RCRS:
        matrix = code_rcrs(design, interactions=interactions, intercept=intercept)
    elif scheme is CodingScheme.NEM:
        parent, _, _ = design.sliding_pair()
        if parent.is_quantitative and baseline is None:
            matrix = code_nem(design, intercept=intercept)
        else:
            matrix = code_nem_qualitative(design, baseline_level=baseline, intercept=intercept)
    elif scheme is CodingScheme.RSM:
        matrix = code_rsm(design, term_set=term_set, intercept=intercept)
    else:
        matrix = code_covariates(design, mode=covariates or "lq")
        return matrix.with_intercept() if intercept else matrix

    if covariates:
        matrix = matrix.hstack(code_covariates(design, mode=covariates))
    return matrix

