import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings
import hypothesis.strategies as st
from pydantic import ValidationError as PydanticValidationError

from app.core.exceptions import ValidationError
from app.designs.fixtures import build_welding_fixture
from app.simulation.models import Strategy
from app.simulation.schemas import NestedDesignRecipe, PolynomialSurface, SimConfig, SurfaceEq1
from app.simulation.service import (
    elimination_check,
    eval_surface,
    r_squared_parity,
    resolve_design,
    run_comparison,
    run_simulation,
)
from app.translation.schemas import RsmModel

WELDING_CENTER = (0.0, -7 / 11)
WELDING_HALF_WIDTH = 4 / 11


@pytest.fixture
def matched_surface():
    """Additive surface whose slid coordinate follows the welding sliding table"""
    return SurfaceEq1(g1=(0.0, 1.5), g2=(2.0, 1.0, -0.5), c_B=WELDING_CENTER, r_B=WELDING_HALF_WIDTH)


@pytest.fixture
def shifted_surface():
    """Same shape with its center line tilted 0.3 away from the table"""
    return SurfaceEq1(g2=(0.0, 0.0, 1.0), c_B=(0.0, WELDING_CENTER[1] + 0.3), r_B=WELDING_HALF_WIDTH)


@pytest.fixture
def second_order():
    return PolynomialSurface(model=RsmModel(coefficients={
        (0, 0): 10.0, (1, 0): 2.0, (0, 1): -3.0, (2, 0): 1.0, (0, 2): 0.5, (1, 1): -1.5,
    }))


# ========== SURFACES ==========

def test_eval_surface_eq1():
    surface = SurfaceEq1(g1=(1.0, 2.0), g2=(0.0, 0.0, 1.0), c_B=(0.0, 0.0), r_B=0.5)
    value = eval_surface(surface, 0.5, 0.25)
    assert isinstance(value, float)
    assert value == pytest.approx(2.25)
    np.testing.assert_allclose(eval_surface(surface, [0.0, 0.5], [0.0, 0.25]), [1.0, 2.25])


def test_eval_polynomial_surface(second_order):
    assert eval_surface(second_order, 1.0, 1.0) == pytest.approx(9.0)


def test_surface_validation():
    with pytest.raises(PydanticValidationError):
        SurfaceEq1(r_B=0.0)
    with pytest.raises(PydanticValidationError):
        SurfaceEq1(g2=(0.0, 0.0, 0.0, 0.0, 1.0))


# ========== ELIMINATION ==========

def test_matched_geometry_eliminates_interactions(welding, matched_surface):
    report = elimination_check(matched_surface, welding)
    assert report.matched
    assert report.eliminated
    assert set(report.interactions) == {"A_l*B_l", "A_l*B_q"}
    assert report.max_interaction <= 1e-9
    assert report.coefficients["A_l"] == pytest.approx(1.5)


def test_shifted_center_leaves_an_interaction(welding, shifted_surface):
    report = elimination_check(shifted_surface, welding)
    assert not report.matched
    assert not report.eliminated
    assert report.interactions["A_l*B_l"] == pytest.approx(-1.65)
    assert report.interactions["A_l*B_q"] == pytest.approx(0.0, abs=1e-9)



coefficient = st.floats(min_value=-5, max_value=5, allow_nan=False)


@hypothesis_settings(max_examples=50, deadline=None)
@given(st.lists(coefficient, min_size=3, max_size=3), st.lists(coefficient, min_size=3, max_size=3))
def test_elimination_holds_for_every_matched_surface(g1, g2):
    surface = SurfaceEq1(g1=tuple(g1), g2=tuple(g2), c_B=WELDING_CENTER, r_B=WELDING_HALF_WIDTH)
    report = elimination_check(surface, build_welding_fixture())
    assert report.matched
    assert report.max_interaction <= 1e-9


def test_flat_slid_part_leaves_no_slid_effects(welding):
    report = elimination_check(SurfaceEq1(g1=(1.0, 2.0)), welding)
    for term in ("B_l", "B_q", "A_l*B_l", "A_l*B_q"):
        assert report.coefficients[term] == pytest.approx(0.0, abs=1e-9)

# ========== R^2 PARITY ==========

def test_r_squared_parity_for_matched_surface(welding, matched_surface):
    report = r_squared_parity(matched_surface, welding)
    assert report.terms == ("x_A", "x_B", "x_B^2", "x_A*x_B")
    assert report.r2_rcrs_no_interaction == pytest.approx(1.0)
    assert report.r2_rsm_with_interaction == pytest.approx(1.0)
    assert report.difference < 1e-9


def test_shifted_surface_breaks_parity(welding, shifted_surface):
    report = r_squared_parity(shifted_surface, welding)
    assert report.r2_rsm_with_interaction == pytest.approx(1.0)
    assert report.r2_rcrs_no_interaction < 0.99


def test_parity_needs_the_interaction_term(welding, matched_surface):
    with pytest.raises(ValidationError):
        r_squared_parity(matched_surface, welding, rsm_terms=[(1, 0), (0, 1)])


# ========== COMPARISON ==========

def test_comparison_is_reproducible(welding, matched_surface):
    first = run_comparison(matched_surface, welding, noise_sd=1.0, reps=4, seed=7, grid_n=5)
    second = run_comparison(matched_surface, welding, noise_sd=1.0, reps=4, seed=7, grid_n=5)
    other = run_comparison(matched_surface, welding, noise_sd=1.0, reps=4, seed=8, grid_n=5)
    assert first.model_dump() == second.model_dump()
    assert first.score(Strategy.RCRS).rmse_mean != other.score(Strategy.RCRS).rmse_mean
    assert [s.strategy for s in first.scores] == list(Strategy)


def test_noiseless_representable_surface_is_exact(nested, second_order):
    report = run_comparison(second_order, nested, noise_sd=0.0, reps=2, seed=1, grid_n=7)
    assert report.grid_points > 0
    assert report.band_points > 0
    for score in report.scores:
        assert score.failures == 0
        assert score.rmse_mean <= 1e-8
        assert score.band_rmse_mean <= 1e-8
        assert score.r_squared_mean == pytest.approx(1.0)


def test_rmse_scales_with_noise(nested, second_order):
    low = run_comparison(second_order, nested, noise_sd=1.0, reps=5, seed=3, grid_n=5)
    high = run_comparison(second_order, nested, noise_sd=2.0, reps=5, seed=3, grid_n=5)
    for strategy in Strategy:
        assert high.score(strategy).rmse_mean == pytest.approx(2.0 * low.score(strategy).rmse_mean, rel=1e-6)
        assert high.score(strategy).rmse_mean > low.score(strategy).rmse_mean


def test_rmse_grows_monotonically_with_noise(nested, second_order):
    # Same seed for every noise level: the replications share their draws
    reports = [
        run_comparison(second_order, nested, noise_sd=sd, reps=200, seed=17, grid_n=5)
        for sd in (0.25, 0.5, 1.0)
    ]
    for strategy in Strategy:
        rmse = [report.score(strategy).rmse_mean for report in reports]
        assert rmse[0] < rmse[1] < rmse[2]
        assert rmse[2] == pytest.approx(4.0 * rmse[0], rel=1e-6)
        assert all(report.score(strategy).failures == 0 for report in reports)


def test_rank_deficient_strategy_is_counted_as_failure(welding, matched_surface):
    report = run_comparison(
        matched_surface, welding, noise_sd=1.0, reps=3, seed=2, grid_n=5, rsm_terms="expanded"
    )
    direct = report.score(Strategy.DIRECT_RSM)
    assert direct.failures == 3
    assert direct.rmse_mean is None
    assert direct.rmse_se is None
    assert report.score(Strategy.RCRS).failures == 0


def test_rcrs_without_geometry_scores_parent_levels_only(welding, welding_geometry, matched_surface):
    plain = run_comparison(matched_surface, welding, noise_sd=1.0, reps=2, seed=5, grid_n=5)
    annotated = run_comparison(matched_surface, welding_geometry, noise_sd=1.0, reps=2, seed=5, grid_n=5)
    assert plain.score(Strategy.RCRS).scored_points < annotated.score(Strategy.RCRS).scored_points
    assert annotated.score(Strategy.RCRS).scored_points == annotated.grid_points


def test_comparison_input_checks(welding, matched_surface):
    with pytest.raises(ValidationError):
        run_comparison(matched_surface, welding, noise_sd=-1.0, reps=2, seed=1, grid_n=5)
    with pytest.raises(ValidationError):
        run_comparison(matched_surface, welding, noise_sd=1.0, reps=0, seed=1, grid_n=5)


# ========== CONFIG ==========

def test_run_simulation_from_recipe():
    config = SimConfig.model_validate({
        "surface": {"kind": "polynomial", "model": {"coefficients": {"0,0": 1.0, "1,1": 2.0}}},
        "design": {"parent_settings": [1, 2, 3], "center": [10, 2], "half_width": 1},
        "noise_sd": 0.5,
        "reps": 3,
        "grid_n": 5,
        "seed": 11,
    })
    assert isinstance(config.design, NestedDesignRecipe)
    report = run_simulation(config)
    assert report.reps == 3
    assert report.seed == 11
    assert resolve_design(config.design).runs == 9


def test_sim_config_defaults():
    config = SimConfig.model_validate({"surface": {"kind": "eq1", "g2": [0, 1]}})
    assert config.design == "welding"
    assert config.reps == 200
    assert config.seed == 42
    assert isinstance(config.surface, SurfaceEq1)


def test_sim_config_rejects_unknown_preset():
    with pytest.raises(PydanticValidationError):
        SimConfig.model_validate({"surface": {"kind": "eq1"}, "rsm_terms": "cubic"})
