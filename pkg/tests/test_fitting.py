import logging

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st
from scipy import stats

from app.coding.models import CodingScheme
from app.coding.schemas import ModelMatrix
from app.coding.service import code_covariates, code_nem, code_rcrs, code_rsm
from app.core.constants import INTERCEPT
from app.core.exceptions import RankDeficient, ValidationError, ZeroResidualDf
from app.fitting.schemas import FitResult
from app.fitting.service import (
    collinearity_diagnostics,
    estimate_correlations,
    ols_fit,
    span_equal,
    t_test_p_values,
)

CORRELATION_TERMS = ["x_A", "x_B", "x_B^2", "x_A*x_B", "x_A*x_B^2"]


# ========== OLS ==========

def test_exact_polynomial_is_recovered(welding):
    matrix = code_rsm(welding)
    x_a, x_b = matrix.column("x_A"), matrix.column("x_B")
    fit = ols_fit(matrix, 1.0 + 2.0 * x_a + 3.0 * x_b)
    np.testing.assert_allclose(fit.coefficients, [1, 2, 3, 0, 0, 0], atol=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.residual_df == 12
    assert fit.scheme is CodingScheme.RSM


def test_inference_matches_t_distribution(welding, rng):
    y = rng.normal(50.0, 5.0, size=welding.runs)
    fit = ols_fit(code_rcrs(welding), y)
    assert fit.inference_available
    np.testing.assert_allclose(fit.t_values, fit.coefficients / fit.standard_errors)
    expected = 2 * stats.t.sf(np.abs(fit.t_values), fit.residual_df)
    np.testing.assert_allclose(fit.p_values, expected, rtol=1e-8)
    assert np.all((fit.p_values >= 0) & (fit.p_values <= 1))
    np.testing.assert_allclose(np.diag(fit.estimate_correlations), 1.0)
    assert fit.sigma2_hat == pytest.approx(np.sum((y - fit.fitted_values) ** 2) / 12)


@given(st.floats(min_value=-40, max_value=40), st.integers(min_value=1, max_value=300))
def test_p_values_agree_with_scipy(t, df):
    p = t_test_p_values(np.array([t]), df)[0]
    assert p == pytest.approx(2 * stats.t.sf(abs(t), df), rel=1e-7, abs=1e-12)


def test_rank_deficiency_names_dependent_terms():
    u = np.array([1.0, 2.0, 3.0, 5.0])
    matrix = ModelMatrix(
        scheme=CodingScheme.RSM,
        terms=(INTERCEPT, "u", "v"),
        values=np.column_stack([np.ones(4), u, 2 * u]),
        intercept_included=True,
    )
    with pytest.raises(RankDeficient) as info:
        ols_fit(matrix, [1.0, 2.0, 2.0, 4.0])
    assert info.value.dependent_terms == ["v"]
    assert info.value.rank == 2
    assert info.value.exit_code == 3


def test_saturated_fit_warns_and_skips_inference(nested, rng, caplog):
    y = rng.normal(size=nested.runs)
    with caplog.at_level(logging.WARNING):
        fit = ols_fit(code_nem(nested), y)
    assert "Saturated fit" in caplog.text
    assert not fit.inference_available
    assert fit.residual_df == 0
    assert fit.sigma2_hat is None
    assert np.all(np.isnan(fit.p_values))
    np.testing.assert_allclose(fit.fitted_values, y, atol=1e-10)


def test_saturated_fit_can_be_refused(nested, rng):
    with pytest.raises(ZeroResidualDf):
        ols_fit(code_nem(nested), rng.normal(size=nested.runs), require_inference=True)


def test_response_is_checked(welding):
    matrix = code_rcrs(welding)
    with pytest.raises(ValidationError):
        ols_fit(matrix, np.zeros(17))
    with pytest.raises(ValidationError):
        ols_fit(matrix, np.full(18, np.nan))
    with pytest.raises(ValidationError):
        ols_fit(code_rcrs(welding, intercept=False), np.zeros(18))


def test_fit_result_json_keeps_missing_inference(nested, rng):
    fit = ols_fit(code_nem(nested), rng.normal(size=nested.runs))
    loaded = FitResult.model_validate_json(fit.model_dump_json())
    assert loaded.terms == fit.terms
    np.testing.assert_array_equal(loaded.coefficients, fit.coefficients)
    assert np.all(np.isnan(loaded.t_values))
    assert loaded.sigma2_hat is None


def test_summary_frame(welding, rng):
    fit = ols_fit(code_rcrs(welding), rng.normal(size=welding.runs))
    frame = fit.summary_frame()
    assert list(frame.columns) == ["term", "value", "t", "p"]
    assert frame["term"].tolist() == list(fit.terms)
    assert fit.coefficient("A_l") == frame["value"].iloc[1]


# ========== DIAGNOSTICS ==========

def test_welding_estimate_correlations(welding):
    frame = estimate_correlations(code_rsm(welding), CORRELATION_TERMS)
    values = np.abs(frame.to_numpy()[np.triu_indices(5, k=1)])
    ordered = np.sort(values)[::-1]
    np.testing.assert_allclose(ordered[:4], [0.9867, 0.9867, 0.9568, 0.9066], atol=0.01)
    assert np.all(ordered[4:] <= 0.01)
    assert abs(frame.loc["x_A", "x_B"]) == pytest.approx(0.96, abs=0.01)
    assert abs(frame.loc["x_A", "x_A*x_B^2"]) == pytest.approx(0.91, abs=0.01)
    assert abs(frame.loc["x_B", "x_A*x_B^2"]) == pytest.approx(0.99, abs=0.01)
    assert abs(frame.loc["x_B^2", "x_A*x_B"]) == pytest.approx(0.99, abs=0.01)
    # Monomials of odd and even total degree do not mix
    assert abs(frame.loc["x_A", "x_B^2"]) < 1e-9
    assert abs(frame.loc["x_A*x_B", "x_A*x_B^2"]) < 1e-9


def test_covariates_leave_correlations_unchanged(welding):
    matrix = code_rsm(welding)
    before = estimate_correlations(matrix, CORRELATION_TERMS)
    after = estimate_correlations(matrix.hstack(code_covariates(welding)), CORRELATION_TERMS)
    assert np.max(np.abs(after.to_numpy() - before.to_numpy())) < 1e-9


def test_orthogonal_columns_have_unit_vif(welding):
    matrix = code_covariates(welding, factors=["C", "D", "E", "F", "G"]).with_intercept()
    report = collinearity_diagnostics(matrix)
    assert set(report.vif) == set(matrix.terms[1:])
    np.testing.assert_allclose(list(report.vif.values()), 1.0, atol=1e-9)
    assert report.condition_number == pytest.approx(1.0)


def test_welding_rsm_is_collinear(welding):
    report = collinearity_diagnostics(code_rsm(welding))
    assert report.max_vif > 5
    assert report.condition_number > 1


def test_spans_of_the_three_codings_coincide(welding):
    rcrs, nem, rsm = code_rcrs(welding), code_nem(welding), code_rsm(welding)
    assert span_equal(rcrs, nem)
    assert span_equal(rcrs, rsm)
    assert not span_equal(code_rcrs(welding, interactions=False), nem)


def test_three_codings_give_the_same_fitted_values(welding, rng):
    matrices = [code_rcrs(welding), code_nem(welding), code_rsm(welding)]
    for _ in range(100):
        y = rng.normal(loc=50.0, scale=5.0, size=welding.runs)
        rcrs, nem, rsm = (ols_fit(m, y).fitted_values for m in matrices)
        np.testing.assert_allclose(nem, rcrs, rtol=0, atol=1e-9)
        np.testing.assert_allclose(rsm, rcrs, rtol=0, atol=1e-9)


def test_span_ignores_column_order(welding):
    matrix = code_rcrs(welding)
    # Intercept stays first
    order = [0] + list(range(matrix.n_terms - 1, 0, -1))
    shuffled = ModelMatrix(
        scheme=matrix.scheme,
        terms=tuple(matrix.terms[i] for i in order),
        values=matrix.values[:, order],
        intercept_included=True,
    )
    assert shuffled.terms != matrix.terms
    assert span_equal(matrix, shuffled)
    assert span_equal(shuffled, matrix)
    assert span_equal(matrix, matrix)
