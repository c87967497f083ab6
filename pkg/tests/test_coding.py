from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st
from pydantic import ValidationError as PydanticValidationError

from app.coding.models import CodingScheme
from app.coding.schemas import ModelMatrix
from app.coding.service import (
    build_model_matrix,
    code_covariates,
    code_nem,
    code_nem_qualitative,
    code_rcrs,
    code_rsm,
    lq_contrasts,
    parse_rsm_term,
    proportional_code,
    resolve_term_set,
    rsm_term_label,
    slid_contrasts,
)
from app.core.constants import INTERCEPT
from app.core.exceptions import (
    DegenerateRange,
    OutOfRange,
    UnsupportedDegree,
    UnsupportedLevelCount,
    ValidationError,
)
from app.designs.fixtures import build_nested_design
from app.designs.models import FactorKind, FactorRole
from app.designs.schemas import FactorSpec, PlanningMatrix, SlidingSpec
from app.designs.service import resolve_settings
from app.fitting.service import ols_fit


# ========== CONTRASTS ==========

def test_lq_contrasts():
    assert [lq_contrasts(2, i) for i in range(2)] == [(-1, None), (1, None)]
    assert [lq_contrasts(3, i) for i in range(3)] == [(-1, 1), (0, -2), (1, 1)]


def test_four_levels_are_unsupported():
    with pytest.raises(UnsupportedLevelCount):
        lq_contrasts(4, 0)


def test_two_level_slid_factor_codes_low_as_plus_one():
    assert slid_contrasts(2, 0) == (1, None)
    assert slid_contrasts(2, 1) == (-1, None)
    assert slid_contrasts(3, 0) == (-1, 1)


# ========== PROPORTIONAL CODING ==========

def test_proportional_code_is_exact_for_integers():
    assert proportional_code([18, 40], 32) == Fraction(3, 11)
    assert proportional_code([2, 4], 3) == Fraction(0)
    assert isinstance(proportional_code([18.0, 40.0], 32.0), float)


def test_proportional_code_range_checks():
    with pytest.raises(OutOfRange):
        proportional_code([2, 4], 5)
    assert proportional_code([2, 4], 5, allow_extrapolation=True) == Fraction(2)
    with pytest.raises(DegenerateRange):
        proportional_code([3, 3], 3)


@given(
    st.lists(st.integers(min_value=-1000, max_value=1000), min_size=2, max_size=6, unique=True),
    st.data(),
)
def test_proportional_code_stays_in_unit_interval(values, data):
    value = data.draw(st.integers(min_value=min(values), max_value=max(values)))
    coded = proportional_code(values, value)
    assert isinstance(coded, Fraction)
    assert -1 <= coded <= 1
    assert proportional_code(values, min(values)) == -1
    assert proportional_code(values, max(values)) == 1
    lo, hi = min(values), max(values)
    assert lo + (coded + 1) * (hi - lo) / 2 == value


# ========== RCRS / NEM ==========

def test_rcrs_terms_and_columns(welding):
    matrix = code_rcrs(welding)
    assert matrix.terms == (INTERCEPT, "A_l", "B_l", "B_q", "A_l*B_l", "A_l*B_q")
    assert matrix.column("B_l")[:9].tolist() == [-1, -1, -1, 0, 0, 0, 1, 1, 1]
    assert matrix.column("B_q")[:9].tolist() == [1, 1, 1, -2, -2, -2, 1, 1, 1]
    np.testing.assert_array_equal(matrix.column("A_l*B_q"), matrix.column("A_l") * matrix.column("B_q"))


def test_rcrs_without_interactions(welding):
    matrix = code_rcrs(welding, interactions=False, intercept=False)
    assert matrix.terms == ("A_l", "B_l", "B_q")
    assert not matrix.intercept_included


def test_nem_columns_vanish_off_their_parent_level(welding):
    matrix = code_nem(welding)
    assert matrix.terms == (INTERCEPT, "A_l", "B_l|A_1", "B_q|A_1", "B_l|A_2", "B_q|A_2")
    a2 = welding.level_indices("A") == 1
    assert np.all(matrix.column("B_l|A_1")[a2] == 0)
    assert np.all(matrix.column("B_q|A_2")[~a2] == 0)
    assert matrix.column("B_l|A_2")[a2].tolist() == [-1, -1, -1, 0, 0, 0, 1, 1, 1]


def test_nem_on_three_level_parent(nested):
    matrix = code_nem(nested)
    assert matrix.n_terms == 9
    assert matrix.column("A_q").tolist() == [1, 1, 1, -2, -2, -2, 1, 1, 1]


def _qualitative_design():
    factors = (
        FactorSpec(name="A", kind=FactorKind.QUALITATIVE, role=FactorRole.PARENT, levels=("x", "y", "z")),
        FactorSpec(name="B", role=FactorRole.SLID, levels=("low", "high"), parent="A"),
    )
    runs = [(a, b) for a in ("x", "y", "z") for b in ("low", "high")]
    planning = PlanningMatrix(
        runs=len(runs),
        columns={"A": tuple(a for a, _ in runs), "B": tuple(b for _, b in runs)},
    )
    table = SlidingSpec(parent="A", slid="B", table={"x": (1.0, 2.0), "y": (2.0, 3.0), "z": (5.0, 6.0)})
    return resolve_settings(planning, factors, (table,))


def test_qualitative_nem_uses_baseline_contrasts():
    design = _qualitative_design()
    matrix = code_nem_qualitative(design, baseline_level="y")
    assert matrix.terms[1:3] == ("A_{2,1}", "A_{2,3}")
    assert matrix.column("A_{2,1}").tolist() == [-1, -1, 1, 1, 0, 0]
    assert matrix.column("A_{2,3}").tolist() == [0, 0, 1, 1, -1, -1]
    assert matrix.column("B_l|A_3").tolist() == [0, 0, 0, 0, 1, -1]


def test_build_model_matrix_routes_qualitative_parent():
    design = _qualitative_design()
    matrix = build_model_matrix(design, CodingScheme.NEM)
    assert matrix.terms[1:3] == ("A_{1,2}", "A_{1,3}")
    with pytest.raises(ValidationError):
        code_nem(design)


def test_two_level_qualitative_contrast_is_half_the_mean_difference():
    factors = (
        FactorSpec(name="A", kind=FactorKind.QUALITATIVE, role=FactorRole.PARENT, levels=("x", "y")),
        FactorSpec(name="B", role=FactorRole.SLID, levels=("low", "high"), parent="A"),
    )
    planning = PlanningMatrix(runs=4, columns={"A": ("x", "x", "y", "y"), "B": ("low", "high", "low", "high")})
    table = SlidingSpec(parent="A", slid="B", table={"x": (1.0, 2.0), "y": (4.0, 5.0)})
    design = resolve_settings(planning, factors, (table,))
    fit = ols_fit(code_nem_qualitative(design), np.array([1.0, 3.0, 6.0, 10.0]))
    assert fit.coefficient("A_{1,2}") == pytest.approx((2.0 - 8.0) / 2)


# ========== RSM ==========

def test_rsm_first_run_of_welding(welding):
    matrix = code_rsm(welding, intercept=False)
    assert matrix.terms == ("x_A", "x_B", "x_B^2", "x_A*x_B", "x_A*x_B^2")
    np.testing.assert_allclose(matrix.values[0], [-1, 3 / 11, 9 / 121, -3 / 11, -9 / 121])


def test_rsm_x_b_is_coded_against_all_runs(welding):
    x_b = code_rsm(welding, intercept=False).column("x_B")
    np.testing.assert_allclose(x_b[[0, 3, 6]], [3 / 11, 7 / 11, 1])
    np.testing.assert_allclose(x_b[[9, 12, 15]], [-1, -7 / 11, -3 / 11])


def test_rsm_presets(nested):
    assert code_rsm(nested, "second_order").n_terms == 6
    assert code_rsm(nested, "expanded").n_terms == 9


def test_term_labels():
    assert rsm_term_label((1, 2), ("A", "B")) == "x_A*x_B^2"
    assert rsm_term_label((0, 0), ("A", "B")) == INTERCEPT
    assert parse_rsm_term("x_A^2*x_B", ("A", "B")) == (2, 1)
    with pytest.raises(ValidationError):
        parse_rsm_term("x_C", ("A", "B"))


def test_term_set_validation():
    with pytest.raises(ValidationError):
        resolve_term_set("cubic")
    with pytest.raises(UnsupportedDegree):
        resolve_term_set([(4, 0)])
    with pytest.raises(ValidationError):
        resolve_term_set([(1, 0), (1, 0)])
    with pytest.raises(ValidationError):
        resolve_term_set([(0, 0)])


# ========== COVARIATES ==========

def test_covariates_of_welding(welding):
    matrix = code_covariates(welding)
    assert matrix.terms == (
        "C_l", "C_q", "D_l", "D_q", "E_l", "E_q", "F_l", "F_q", "G_l", "G_q", "H_l",
    )
    h = matrix.column("H_l")
    assert sorted(set(h.tolist())) == pytest.approx([-4 / 3, 2 / 3])
    assert h.sum() == pytest.approx(0.0, abs=1e-12)


def _off_diagonal(values: np.ndarray) -> np.ndarray:
    gram = values.T @ values
    return gram - np.diag(np.diag(gram))


def test_welding_codings_are_orthogonal(welding):
    rcrs = code_rcrs(welding, intercept=False).values
    nem = code_nem(welding, intercept=False).values
    covariates = code_covariates(welding).values
    np.testing.assert_allclose(rcrs.sum(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(_off_diagonal(rcrs), 0.0, atol=1e-12)
    np.testing.assert_allclose(_off_diagonal(nem), 0.0, atol=1e-12)
    np.testing.assert_allclose(_off_diagonal(covariates), 0.0, atol=1e-12)
    np.testing.assert_allclose(covariates.T @ rcrs, 0.0, atol=1e-12)
    np.testing.assert_allclose(covariates.T @ nem, 0.0, atol=1e-12)


def test_linear_covariates(welding):
    matrix = code_covariates(welding, mode="linear")
    assert matrix.terms == ("C_l", "D_l", "E_l", "F_l", "G_l", "H_l")


def test_model_matrix_with_covariates(welding):
    matrix = build_model_matrix(welding, "rcrs", covariates="lq")
    assert matrix.n_terms == 6 + 11
    assert matrix.intercept_included


# ========== MODEL MATRIX ==========

def test_model_matrix_rejects_duplicate_terms():
    with pytest.raises(PydanticValidationError):
        ModelMatrix(scheme=CodingScheme.RSM, terms=("x_A", "x_A"), values=np.zeros((3, 2)))


def test_model_matrix_is_read_only(welding):
    matrix = code_rcrs(welding)
    with pytest.raises(ValueError):
        matrix.values[0, 0] = 5.0


def test_hstack_requires_matching_runs(welding):
    other = build_nested_design((1.0, 2.0), center=(0.0, 1.0), half_width=1.0)
    with pytest.raises(ValidationError):
        code_rcrs(welding).hstack(code_rcrs(other))
