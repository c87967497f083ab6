import logging
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial

from app.coding.service import code_rcrs, code_rsm, coded_factor, rsm_term_label
from app.core.config import settings
from app.core.constants import SECOND_ORDER_TERMS, WELDING_TERMS
from app.core.exceptions import SlideKitError, ValidationError
from app.designs.fixtures import build_nested_design
from app.designs.schemas import SlidingDesign
from app.designs.service import get_design, sliding_geometry
from app.fitting.service import ols_fit
from app.region.models import Zone
from app.region.service import build_region, classify, on_parent_level, rcrs_columns
from app.simulation.models import Strategy
from app.simulation.schemas import (
    EliminationReport,
    NestedDesignRecipe,
    ParityReport,
    PolynomialSurface,
    SimConfig,
    SimReport,
    StrategyScore,
    SurfaceEq1,
)
from app.translation.service import hybrid_fit, rsm_model_from_fit

logger = logging.getLogger(__name__)

Surface = Union[SurfaceEq1, PolynomialSurface]

# RSM terms with the x_A*x_B interaction; x_A^2 is constant on a two-level parent
PARITY_TWO_LEVEL_TERMS = ((1, 0), (0, 1), (0, 2), (1, 1))


# ========== SURFACES ==========

def eval_surface(surface: Surface, x_a, x_b):
    """
    Value of the ground-truth surface at coded (x_A, x_B); scalar in, scalar out
    """
    if isinstance(surface, PolynomialSurface):
        return surface.model.evaluate(x_a, x_b)
    a = np.asarray(x_a, dtype=float)
    b = np.asarray(x_b, dtype=float)
    c0, c1 = surface.c_B
    z = (b - c0 - c1 * a) / surface.r_B
    value = polynomial.polyval(a, surface.g1 or (0.0,)) + polynomial.polyval(z, surface.g2 or (0.0,))
    return float(value) if np.ndim(value) == 0 else value


def _design_points(design: SlidingDesign) -> Tuple[np.ndarray, np.ndarray]:
    parent, slid, _ = design.sliding_pair()
    return coded_factor(design, parent.name), coded_factor(design, slid.name)


def _interaction_terms(design: SlidingDesign) -> List[str]:
    parent, slid, _ = design.sliding_pair()
    return [f"{parent.name}_l*{slid.name}_l", f"{parent.name}_l*{slid.name}_q"]


# ========== ELIMINATION ==========

def elimination_check(
    surface: SurfaceEq1,
    design: SlidingDesign,
    tol: Optional[float] = None,
) -> EliminationReport:
    """
    Fit the RCRS model to noiseless surface data and report the interaction
    coefficients; they vanish when the sliding table follows the surface's
    center line and half-width
    """
    tol = settings.ELIMINATION_TOLERANCE if tol is None else tol
    x_a, x_b = _design_points(design)
    fit = ols_fit(code_rcrs(design), eval_surface(surface, x_a, x_b))
    coefficients = fit.coefficient_map()
    interactions = {t: coefficients[t] for t in _interaction_terms(design) if t in coefficients}
    largest = max((abs(v) for v in interactions.values()), default=0.0)

    geometry = sliding_geometry(design)
    matched = geometry is not None and bool(np.allclose(
        geometry,
        (surface.c_B[0], surface.c_B[1], surface.r_B),
        rtol=0.0,
        atol=settings.GEOMETRY_TOLERANCE,
    ))
    logger.debug("Elimination check (%s): max interaction %.3g",
                 "matched" if matched else "mismatched", largest)
    return EliminationReport(
        matched=matched,
        coefficients=coefficients,
        interactions=interactions,
        max_interaction=largest,
        eliminated=largest <= tol,
        tol=tol,
    )


def _parity_terms(design: SlidingDesign) -> Tuple[Tuple[int, int], ...]:
    parent, _, _ = design.sliding_pair()
    return PARITY_TWO_LEVEL_TERMS if parent.n_levels == 2 else SECOND_ORDER_TERMS


def r_squared_parity(
    surface: Surface,
    design: SlidingDesign,
    rsm_terms: Optional[Sequence[Tuple[int, int]]] = None,
) -> ParityReport:
    """
    R^2 of the RCRS model without interaction terms against the RSM model that
    keeps x_A*x_B, both on noiseless surface data
    """
    parent, slid, _ = design.sliding_pair()
    terms = tuple(rsm_terms) if rsm_terms is not None else _parity_terms(design)
    if (1, 1) not in terms:
        raise ValidationError("Parity check needs the x_A*x_B term in the RSM model")

    x_a, x_b = _design_points(design)
    y = eval_surface(surface, x_a, x_b)
    r2_rcrs = ols_fit(code_rcrs(design, interactions=False), y).r_squared
    r2_rsm = ols_fit(code_rsm(design, term_set=terms), y).r_squared
    return ParityReport(
        r2_rcrs_no_interaction=r2_rcrs,
        r2_rsm_with_interaction=r2_rsm,
        difference=abs(r2_rcrs - r2_rsm),
        terms=tuple(rsm_term_label(t, (parent.name, slid.name)) for t in terms),
    )


# ========== COMPARISON ==========

class _Points(NamedTuple):
    x_a: np.ndarray
    x_b: np.ndarray
    truth: np.ndarray


class _Outcome(NamedTuple):
    inside: np.ndarray
    band: np.ndarray
    r_squared: float
    max_interaction: float


def _evaluation_grid(design: SlidingDesign, surface: Surface, grid_n: int) -> Tuple[_Points, _Points]:
    """Uniform grid over the modeling square split into InsideRE and band points"""
    region = build_region(design)
    axis = np.linspace(-1.0, 1.0, grid_n)
    a, b = (g.ravel() for g in np.meshgrid(axis, axis, indexing="ij"))
    zones = [classify(region, x, y) for x, y in zip(a, b)]
    inside = np.array([zone is Zone.INSIDE_RE for zone in zones], dtype=bool)
    band = np.array([zone is Zone.EXTRAPOLATION_BAND for zone in zones], dtype=bool)

    def points(mask: np.ndarray) -> _Points:
        return _Points(a[mask], b[mask], np.asarray(eval_surface(surface, a[mask], b[mask]), dtype=float))

    return points(inside), points(band)


def _rcrs_scorable(design: SlidingDesign, points: _Points) -> _Points:
    """
    Points where the RCRS model can predict: all of them with an annotated
    geometry, only those on a parent level of the design otherwise
    """
    _, _, spec = design.sliding_pair()
    if spec.has_geometry:
        return points
    keep = on_parent_level(design, points.x_a)
    return _Points(points.x_a[keep], points.x_b[keep], points.truth[keep])


def _rsm_interaction(coefficients: Dict[Tuple[int, int], float]) -> float:
    return max((abs(v) for (i, j), v in coefficients.items() if i >= 1 and j >= 1), default=0.0)


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return 1.0
    return float(np.clip(1.0 - float(np.sum((y - fitted) ** 2)) / sst, 0.0, 1.0))


def _default_rsm_terms(design: SlidingDesign):
    parent, _, _ = design.sliding_pair()
    return WELDING_TERMS if parent.n_levels == 2 else SECOND_ORDER_TERMS


def _strategies(
    design: SlidingDesign,
    scored: Dict[Strategy, Tuple[_Points, _Points]],
    rsm_terms,
) -> Dict[Strategy, Callable[[np.ndarray], _Outcome]]:
    """One scorer per strategy; design-only work is done here, once"""
    x_a, x_b = _design_points(design)
    rcrs_matrix = code_rcrs(design)
    rcrs_inside, rcrs_band = (
        rcrs_columns(design, p.x_a, p.x_b) if p.x_a.size else {} for p in scored[Strategy.RCRS]
    )
    inside, band = scored[Strategy.DIRECT_RSM]
    interactions = _interaction_terms(design)
    rsm_matrix = code_rsm(design, term_set=rsm_terms if rsm_terms is not None else _default_rsm_terms(design))
    parent, slid, _ = design.sliding_pair()

    def predict(columns: Dict[str, np.ndarray], coefficients: Dict[str, float], size: int) -> np.ndarray:
        total = np.zeros(size)
        for term, value in coefficients.items():
            if term in columns:
                total = total + value * columns[term]
        return total

    def rcrs(y: np.ndarray) -> _Outcome:
        fit = ols_fit(rcrs_matrix, y)
        coefficients = fit.coefficient_map()
        return _Outcome(
            inside=predict(rcrs_inside, coefficients, scored[Strategy.RCRS][0].x_a.size),
            band=predict(rcrs_band, coefficients, scored[Strategy.RCRS][1].x_a.size),
            r_squared=fit.r_squared,
            max_interaction=max((abs(coefficients[t]) for t in interactions if t in coefficients), default=0.0),
        )

    def hybrid(y: np.ndarray) -> _Outcome:
        model = hybrid_fit(design, y)
        return _Outcome(
            inside=np.asarray(model.evaluate(inside.x_a, inside.x_b)),
            band=np.asarray(model.evaluate(band.x_a, band.x_b)),
            r_squared=_r_squared(y, np.asarray(model.evaluate(x_a, x_b))),
            max_interaction=_rsm_interaction(model.coefficients),
        )

    def direct(y: np.ndarray) -> _Outcome:
        fit = ols_fit(rsm_matrix, y)
        model = rsm_model_from_fit(fit, (parent.name, slid.name))
        return _Outcome(
            inside=np.asarray(model.evaluate(inside.x_a, inside.x_b)),
            band=np.asarray(model.evaluate(band.x_a, band.x_b)),
            r_squared=fit.r_squared,
            max_interaction=_rsm_interaction(model.coefficients),
        )

    return {Strategy.RCRS: rcrs, Strategy.HYBRID_RSM: hybrid, Strategy.DIRECT_RSM: direct}


def _rmse(predicted: np.ndarray, truth: np.ndarray) -> Optional[float]:
    if truth.size == 0:
        return None
    return float(np.sqrt(np.mean((predicted - truth) ** 2)))


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def run_comparison(
    surface: Surface,
    design: SlidingDesign,
    noise_sd: float,
    reps: int,
    seed: int,
    grid_n: int,
    rsm_terms=None,
) -> SimReport:
    """
    Score RCRS, hybrid RSM and direct RSM on noisy replicates of the surface.

    Each replication draws its noise from its own generator, spawned from the
    master seed, so the report depends only on (seed, configuration). RMSE is
    taken against the true surface on the InsideRE grid points; the
    extrapolation band is scored separately.
    """
    if reps < 1:
        raise ValidationError("reps must be at least 1")
    if grid_n < 2:
        raise ValidationError("grid_n must be at least 2")
    if not (np.isfinite(noise_sd) and noise_sd >= 0):
        raise ValidationError("noise_sd must be a non-negative number")

    inside, band = _evaluation_grid(design, surface, grid_n)
    scored = {
        Strategy.RCRS: (_rcrs_scorable(design, inside), _rcrs_scorable(design, band)),
        Strategy.HYBRID_RSM: (inside, band),
        Strategy.DIRECT_RSM: (inside, band),
    }
    strategies = _strategies(design, scored, rsm_terms)

    x_a, x_b = _design_points(design)
    mean_response = np.asarray(eval_surface(surface, x_a, x_b), dtype=float)

    results = {s: {"rmse": [], "band": [], "r2": [], "interaction": [], "failures": 0} for s in Strategy}
    for rep, stream in enumerate(np.random.SeedSequence(seed).spawn(reps)):
        rng = np.random.default_rng(stream)
        y = mean_response + noise_sd * rng.standard_normal(design.runs)
        for strategy, scorer in strategies.items():
            try:
                outcome = scorer(y)
            except SlideKitError as exc:
                logger.warning("Replication %d: %s fit failed: %s", rep, strategy.label, exc.detail)
                results[strategy]["failures"] += 1
                continue
            inside_points, band_points = scored[strategy]
            rmse = _rmse(outcome.inside, inside_points.truth)
            band_rmse = _rmse(outcome.band, band_points.truth)
            if rmse is not None:
                results[strategy]["rmse"].append(rmse)
            if band_rmse is not None:
                results[strategy]["band"].append(band_rmse)
            results[strategy]["r2"].append(outcome.r_squared)
            results[strategy]["interaction"].append(outcome.max_interaction)
        logger.debug("Replication %d of %d done", rep + 1, reps)

    scores = []
    for strategy in Strategy:
        result = results[strategy]
        rmse = result["rmse"]
        if not rmse and not result["failures"]:
            logger.warning("No grid point can be scored for %s", strategy.label)
        se = float(np.std(rmse, ddof=1) / np.sqrt(len(rmse))) if len(rmse) > 1 else None
        scores.append(StrategyScore(
            strategy=strategy,
            rmse_mean=_mean(rmse),
            rmse_se=se,
            band_rmse_mean=_mean(result["band"]),
            r_squared_mean=_mean(result["r2"]),
            max_interaction=_mean(result["interaction"]),
            failures=result["failures"],
            scored_points=scored[strategy][0].truth.size,
        ))

    return SimReport(
        scores=tuple(scores),
        reps=reps,
        seed=seed,
        noise_sd=noise_sd,
        grid_n=grid_n,
        grid_points=inside.truth.size,
        band_points=band.truth.size,
    )


def resolve_design(reference: Union[str, NestedDesignRecipe]) -> SlidingDesign:
    """Fixture name, design file path or nested design recipe"""
    if isinstance(reference, NestedDesignRecipe):
        return build_nested_design(**reference.model_dump())
    return get_design(reference)


def run_simulation(config: SimConfig) -> SimReport:
    design = resolve_design(config.design)
    logger.info(
        "Simulating %d replications (seed %d, noise sd %g) on a %d-run design",
        config.reps, config.seed, config.noise_sd, design.runs,
    )
    return run_comparison(
        config.surface,
        design,
        noise_sd=config.noise_sd,
        reps=config.reps,
        seed=config.seed,
        grid_n=config.grid_n,
        rsm_terms=config.rsm_terms,
    )
