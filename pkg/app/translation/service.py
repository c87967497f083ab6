import logging
import re
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from app.coding.models import CodingScheme
from app.coding.service import (
    code_covariates,
    code_nem,
    lq_contrasts,
    parse_rsm_term,
    proportional_code_array,
    slid_contrasts,
)
from app.core.config import settings
from app.core.constants import INTERCEPT
from app.core.exceptions import (
    DuplicateParentLevel,
    UnsupportedLevelCount,
    ValidationError,
)
from app.designs.schemas import SlidingDesign
from app.fitting.schemas import FitResult
from app.fitting.service import ols_fit
from app.translation.schemas import (
    ConstraintReport,
    IdentityCheck,
    IdentityReport,
    NemModel,
    RcrsModel,
    RsmModel,
)

logger = logging.getLogger(__name__)

Coefficients = Union[FitResult, Mapping[str, float]]

NEM_LINEAR_TERM = re.compile(r"^(?P<slid>.+)_l\|(?P<parent>.+)_1$")


# ========== NEM <-> RSM ==========

def rsm_to_nem(model: RsmModel, parent_levels: Sequence[float]) -> NemModel:
    """
    Conditional (alpha, beta, gamma) of the RSM model at each coded parent level
    """
    if any(j > 2 for (_, j) in model.coefficients):
        raise ValidationError("NEM models are quadratic in the slid factor; RSM model has x_B^3 terms")
    levels = tuple(float(x) for x in parent_levels)
    by_power: Dict[int, List[float]] = {0: [], 1: [], 2: []}
    for x in levels:
        for j in by_power:
            by_power[j].append(sum(
                value * x ** i for (i, jj), value in sorted(model.coefficients.items()) if jj == j
            ))
    parent, slid = model.factors
    return NemModel(
        parent_levels=levels,
        alpha=tuple(by_power[0]),
        beta=tuple(by_power[1]),
        gamma=tuple(by_power[2]),
        parent=parent,
        slid=slid,
    )


def _newton_monomial(xs: Sequence[float], values: Sequence[float]) -> List[float]:
    """Monomial coefficients of the interpolating polynomial, via divided differences"""
    n = len(xs)
    table = list(values)
    differences = [table[0]]
    for k in range(1, n):
        table = [(table[i + 1] - table[i]) / (xs[i + k] - xs[i]) for i in range(n - k)]
        differences.append(table[0])

    monomial = [0.0] * n
    basis = [1.0]
    for k, d in enumerate(differences):
        for i, b in enumerate(basis):
            monomial[i] += d * b
        # basis *= (x - xs[k])
        shifted = [0.0] + basis
        basis = [shifted[i] - xs[k] * (basis[i] if i < len(basis) else 0.0) for i in range(len(shifted))]
    return monomial


def nem_to_rsm(model: NemModel) -> RsmModel:
    """
    Interpolate alpha, beta and gamma in the coded parent; the degree in x_A is
    (number of parent levels - 1)
    """
    levels = model.parent_levels
    if len(set(levels)) != len(levels):
        raise DuplicateParentLevel(f"NEM model repeats a parent level: {levels}")
    if len(levels) not in (2, 3):
        raise UnsupportedLevelCount(
            f"NEM to RSM translation needs 2 or 3 parent levels, got {len(levels)}"
        )

    coefficients: Dict[Tuple[int, int], float] = {}
    for j, values in enumerate((model.alpha, model.beta, model.gamma)):
        for i, value in enumerate(_newton_monomial(levels, values)):
            if i > 0 and value == 0.0:
                continue
            coefficients[(i, j)] = float(value)
    return RsmModel(coefficients=coefficients, factors=(model.parent, model.slid))


def _standard_level_index(levels: Sequence[float]) -> Dict[int, int]:
    """Map -1, 0, 1 to positions in `levels`"""
    tol = settings.PARENT_LEVEL_TOLERANCE
    index = {}
    for target in (-1, 0, 1):
        matches = [k for k, x in enumerate(levels) if abs(x - target) <= tol]
        if len(matches) != 1:
            raise ValidationError(
                f"Second-order constraints need parent levels -1, 0, 1; got {tuple(levels)}"
            )
        index[target] = matches[0]
    return index


def check_second_order_constraints(model: NemModel, tol: Optional[float] = None) -> ConstraintReport:
    """
    Constraints under which a three-level NEM model reduces to the six-term
    second-order RSM model: equal gammas and beta linear in x_A
    """
    tol = settings.CONSTRAINT_TOLERANCE if tol is None else tol
    if model.n_levels != 3:
        raise ValidationError(f"Second-order constraints need 3 parent levels, got {model.n_levels}")
    index = _standard_level_index(model.parent_levels)
    gamma_spread = float(max(model.gamma) - min(model.gamma))
    beta = {x: model.beta[k] for x, k in index.items()}
    beta_curvature = float(abs(beta[1] + beta[-1] - 2.0 * beta[0]) / 2.0)
    return ConstraintReport(
        gamma_spread=gamma_spread,
        beta_curvature=beta_curvature,
        tol=tol,
        gamma_ok=gamma_spread <= tol,
        beta_ok=beta_curvature <= tol,
    )


# ========== FROM FITS ==========

def _conditional_settings(design: SlidingDesign) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Coded parent level values and coded slid settings per parent level"""
    parent, slid, spec = design.sliding_pair()
    if not parent.is_quantitative:
        raise ValidationError(f"Parent {parent.name} is qualitative; NEM translation needs coded parent levels")
    parent_actual = design.actual_array(parent.name)
    slid_actual = design.actual_array(slid.name)
    x_levels = proportional_code_array(parent_actual, parent.settings)
    coded = [proportional_code_array(slid_actual, spec.table[label]) for label in parent.levels]
    return x_levels, coded


def nem_model_from_fit(fit: FitResult, design: SlidingDesign) -> NemModel:
    """
    Conditional (alpha, beta, gamma) from a NEM fit: the fitted conditional means at
    each parent level, re-expressed in the proportionally coded slid factor
    """
    parent, slid, _ = design.sliding_pair()
    if fit.scheme not in (None, CodingScheme.NEM):
        raise ValidationError(f"Expected a NEM fit, got {fit.scheme.value}")
    coefficients = fit.coefficient_map()

    def coefficient(term: str) -> float:
        if term not in coefficients:
            raise ValidationError(f"NEM fit has no term {term}")
        return coefficients[term]

    x_levels, coded = _conditional_settings(design)
    alpha, beta, gamma = [], [], []
    for i in range(parent.n_levels):
        p_linear, p_quadratic = lq_contrasts(parent.n_levels, i)
        base = coefficient(INTERCEPT) + coefficient(f"{parent.name}_l") * p_linear
        if p_quadratic is not None:
            base += coefficient(f"{parent.name}_q") * p_quadratic

        means = []
        for k in range(slid.n_levels):
            s_linear, s_quadratic = slid_contrasts(slid.n_levels, k)
            mean = base + coefficient(f"{slid.name}_l|{parent.name}_{i + 1}") * s_linear
            if s_quadratic is not None:
                mean += coefficient(f"{slid.name}_q|{parent.name}_{i + 1}") * s_quadratic
            means.append(mean)

        # Change of basis {1, contrasts} -> {1, x_B, x_B^2} at this level's settings
        solution = np.linalg.solve(np.vander(coded[i], increasing=True), np.array(means))
        alpha.append(float(solution[0]))
        beta.append(float(solution[1]))
        gamma.append(float(solution[2]) if len(solution) > 2 else 0.0)

    return NemModel(
        parent_levels=tuple(float(x) for x in x_levels),
        alpha=tuple(alpha),
        beta=tuple(beta),
        gamma=tuple(gamma),
        parent=parent.name,
        slid=slid.name,
    )


def hybrid_fit(
    design: SlidingDesign,
    response: Sequence[float],
    covariates: Optional[str] = None,
) -> RsmModel:
    """
    Hybrid strategy: fit NEM, collect the conditional effects, interpolate them in x_A
    """
    matrix = code_nem(design)
    if covariates:
        matrix = matrix.hstack(code_covariates(design, mode=covariates))
    fit = ols_fit(matrix, response)
    model = nem_to_rsm(nem_model_from_fit(fit, design))
    logger.debug("Hybrid RSM model with %d coefficients", len(model.coefficients))
    return model


def rsm_model_from_fit(fit: FitResult, factors: Sequence[str] = ("A", "B")) -> RsmModel:
    """RSM coefficients of a fit; covariate terms are left out"""
    factors = tuple(factors)
    coefficients = {}
    for term, value in fit.coefficient_map().items():
        if term != INTERCEPT and not term.startswith("x_"):
            continue
        coefficients[parse_rsm_term(term, factors)] = value
    return RsmModel(coefficients=coefficients, factors=factors)


# ========== RCRS ==========

def rcrs_expand(model: RcrsModel) -> RsmModel:
    """
    Polynomial form of the RCRS model once the slid coordinate
    (x_B - s - t*x_A) / r is substituted
    """
    e0, e1, e11 = model.eta0, model.eta1, model.eta11
    e2, e22, e12 = model.eta2, model.eta22, model.eta12
    s, t, r = model.s, model.t, model.r
    coefficients = {
        (0, 0): e0 + (s * s / (r * r)) * e22 - (s / r) * e2,
        (1, 0): e1 - (t / r) * e2 - (s / r) * e12 + (2 * s * t / (r * r)) * e22,
        (2, 0): e11 + (t * t / (r * r)) * e22 - (t / r) * e12,
        (0, 1): (1 / r) * e2 - (2 * s / (r * r)) * e22,
        (0, 2): (1 / (r * r)) * e22,
        (1, 1): (1 / r) * e12 - (2 * t / (r * r)) * e22,
    }
    return RsmModel(coefficients=coefficients)


def eval_rcrs(model: RcrsModel, x_a, x_b):
    """Direct evaluation of the RCRS model at coded (x_A, x_B)"""
    a = np.asarray(x_a, dtype=float)
    z = (np.asarray(x_b, dtype=float) - model.s - model.t * a) / model.r
    value = (
        model.eta0 + model.eta1 * a + model.eta11 * a ** 2
        + model.eta2 * z + model.eta22 * z ** 2 + model.eta12 * a * z
    )
    return float(value) if np.ndim(value) == 0 else value


def _coefficients(source: Coefficients) -> Dict[str, float]:
    if isinstance(source, FitResult):
        return source.coefficient_map()
    return {k: float(v) for k, v in source.items()}


def rcrs_nem_identity_check(
    fit_rcrs: Coefficients,
    fit_nem: Coefficients,
    tol: Optional[float] = None,
) -> IdentityReport:
    """
    RCRS slid effects are averages (main) and half-differences (interaction with
    the parent) of the two NEM conditional effects; A_l agrees in both
    """
    tol = settings.IDENTITY_TOLERANCE if tol is None else tol
    rcrs = _coefficients(fit_rcrs)
    nem = _coefficients(fit_nem)

    names = [NEM_LINEAR_TERM.match(term) for term in nem]
    names = [m for m in names if m]
    if not names:
        raise ValidationError("NEM coefficients need a conditional linear term such as B_l|A_1")
    slid, parent = names[0].group("slid"), names[0].group("parent")
    if f"{slid}_l|{parent}_3" in nem:
        raise ValidationError("Identity check applies to two-level parents only")

    def pick(source: Dict[str, float], term: str, kind: str) -> float:
        if term not in source:
            raise ValidationError(f"{kind} coefficients have no term {term}")
        return source[term]

    def conditional(effect: str, level: int) -> float:
        return pick(nem, f"{slid}_{effect}|{parent}_{level}", "NEM")

    relations = [
        (f"{parent}_l", pick(nem, f"{parent}_l", "NEM")),
    ]
    for effect in ("l", "q"):
        if f"{slid}_{effect}|{parent}_1" not in nem:
            continue
        first, second = conditional(effect, 1), conditional(effect, 2)
        relations.append((f"{slid}_{effect}", (first + second) / 2.0))
        relations.append((f"{parent}_l*{slid}_{effect}", (second - first) / 2.0))

    checks = []
    for term, nem_value in relations:
        rcrs_value = pick(rcrs, term, "RCRS")
        difference = abs(rcrs_value - nem_value)
        checks.append(IdentityCheck(
            name=term,
            rcrs_value=rcrs_value,
            nem_value=nem_value,
            difference=difference,
            passed=difference <= tol,
        ))
    return IdentityReport(checks=tuple(checks), tol=tol, parent=parent, slid=slid)
