import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.special import betainc

from app.coding.schemas import ModelMatrix
from app.core.config import settings
from app.core.exceptions import RankDeficient, ValidationError, ZeroResidualDf
from app.fitting.schemas import CollinearityReport, FitResult

logger = logging.getLogger(__name__)


# ========== RANK ==========

def dependent_terms(values: np.ndarray, terms: Sequence[str], tol: Optional[float] = None) -> Tuple[int, List[str]]:
    """
    Rank and the terms whose column lies in the span of the columns before it.

    A column is dependent when its residual after projection onto the accepted
    columns has norm <= tol * (its own norm).
    """
    tol = settings.RANK_TOLERANCE if tol is None else tol
    n = values.shape[0]
    basis = np.zeros((n, 0))
    dependent = []
    for j, term in enumerate(terms):
        column = values[:, j]
        norm = np.linalg.norm(column)
        if norm == 0.0:
            dependent.append(term)
            continue
        residual = column - basis @ (basis.T @ column)
        # Second pass keeps the basis orthogonal to working precision
        residual = residual - basis @ (basis.T @ residual)
        residual_norm = np.linalg.norm(residual)
        if residual_norm <= tol * norm:
            dependent.append(term)
        else:
            basis = np.column_stack([basis, residual / residual_norm])
    return basis.shape[1], dependent


def _check_rank(matrix: ModelMatrix) -> None:
    rank, dependent = dependent_terms(matrix.values, matrix.terms)
    logger.debug("Model matrix rank %d of %d terms", rank, matrix.n_terms)
    if dependent:
        raise RankDeficient(rank, matrix.n_terms, dependent)


def _inverse_normal(r: np.ndarray) -> np.ndarray:
    """(X'X)^-1 from the triangular QR factor"""
    r_inv = linalg.solve_triangular(r, np.eye(r.shape[0]))
    return r_inv @ r_inv.T


def _correlations(c: np.ndarray) -> np.ndarray:
    scale = np.sqrt(np.diag(c))
    corr = np.clip(c / np.outer(scale, scale), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def t_test_p_values(t_values: np.ndarray, df: int) -> np.ndarray:
    """Two-sided p-values of the central t distribution via the regularized incomplete beta"""
    t_values = np.asarray(t_values, dtype=float)
    return betainc(df / 2.0, 0.5, df / (df + t_values ** 2))


# ========== OLS ==========

def ols_fit(
    matrix: ModelMatrix,
    response: Sequence[float],
    require_inference: bool = False,
) -> FitResult:
    """
    Ordinary least squares by QR decomposition
    """
    y = np.asarray(response, dtype=float)
    if y.ndim != 1:
        raise ValidationError("Response must be a single column")
    if y.shape[0] != matrix.runs:
        raise ValidationError(
            f"Response has {y.shape[0]} values but the model matrix has {matrix.runs} runs"
        )
    if not np.all(np.isfinite(y)):
        raise ValidationError("Response values must be finite")
    if not matrix.intercept_included:
        raise ValidationError("Least-squares fits need a model matrix with an intercept column")

    _check_rank(matrix)
    X = matrix.values
    n, p = X.shape

    q, r = linalg.qr(X, mode='economic')
    coefficients = linalg.solve_triangular(r, q.T @ y)
    fitted = X @ coefficients
    residuals = y - fitted
    sse = float(residuals @ residuals)
    sst = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if sst == 0.0 else float(np.clip(1.0 - sse / sst, 0.0, 1.0))

    c = _inverse_normal(r)
    df = n - p

    if df == 0:
        if require_inference:
            raise ZeroResidualDf(
                f"Saturated fit: {n} runs for {p} terms leaves no residual degrees of freedom"
            )
        logger.warning("Saturated fit (%d runs, %d terms): no inference available", n, p)
        nan = np.full(p, np.nan)
        standard_errors, t_values, p_values, sigma2 = nan, nan, nan, None
        inference = False
    else:
        sigma2 = sse / df
        standard_errors = np.sqrt(sigma2 * np.diag(c))
        with np.errstate(divide='ignore', invalid='ignore'):
            t_values = np.where(standard_errors > 0, coefficients / standard_errors, np.nan)
        p_values = t_test_p_values(t_values, df)
        inference = True

    return FitResult(
        scheme=matrix.scheme,
        terms=matrix.terms,
        coefficients=coefficients,
        standard_errors=standard_errors,
        t_values=t_values,
        p_values=p_values,
        residual_df=df,
        sigma2_hat=sigma2,
        r_squared=r_squared,
        fitted_values=fitted,
        estimate_correlations=_correlations(c),
        inference_available=inference,
        n_runs=n,
    )


# ========== DIAGNOSTICS ==========

def estimate_correlations(matrix: ModelMatrix, terms: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Correlations between coefficient estimators, from (X'X)^-1 alone.
    Defaults to every non-intercept term.
    """
    _check_rank(matrix)
    _, r = linalg.qr(matrix.values, mode='economic')
    corr = _correlations(_inverse_normal(r))
    frame = pd.DataFrame(corr, index=list(matrix.terms), columns=list(matrix.terms))
    if terms is None:
        terms = [t for t in matrix.terms if not (matrix.intercept_included and t == matrix.terms[0])]
    missing = [t for t in terms if t not in matrix.terms]
    if missing:
        raise ValidationError(f"Model matrix has no terms {', '.join(missing)}")
    return frame.loc[list(terms), list(terms)]


def _contained(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """Every column of b lies in the span of a"""
    if b.shape[1] == 0:
        return True
    if a.shape[1] == 0:
        return not np.any(b)
    basis = linalg.orth(a)
    residual = b - basis @ (basis.T @ b)
    return bool(np.all(np.linalg.norm(residual, axis=0) <= tol * np.linalg.norm(b, axis=0)))


def span_equal(m1: ModelMatrix, m2: ModelMatrix, tol: Optional[float] = None) -> bool:
    """
    True when the column spaces of the two matrices coincide
    """
    tol = settings.SPAN_TOLERANCE if tol is None else tol
    if m1.runs != m2.runs:
        return False
    return _contained(m1.values, m2.values, tol) and _contained(m2.values, m1.values, tol)


def collinearity_diagnostics(matrix: ModelMatrix) -> CollinearityReport:
    """
    Variance inflation factor per non-intercept term and the condition number
    of the column-scaled matrix
    """
    _check_rank(matrix)
    X = matrix.values
    n = matrix.runs
    start = 1 if matrix.intercept_included else 0

    vif = {}
    for j in range(start, matrix.n_terms):
        column = X[:, j]
        others = np.column_stack([np.ones(n), np.delete(X[:, start:], j - start, axis=1)])
        beta, *_ = np.linalg.lstsq(others, column, rcond=None)
        ss_res = float(np.sum((column - others @ beta) ** 2))
        ss_tot = float(np.sum((column - column.mean()) ** 2))
        if ss_tot == 0.0 or ss_res == 0.0:
            vif[matrix.terms[j]] = float('inf')
        else:
            vif[matrix.terms[j]] = ss_tot / ss_res

    scaled = X / np.linalg.norm(X, axis=0)
    singular_values = np.linalg.svd(scaled, compute_uv=False)
    condition = float(singular_values[0] / singular_values[-1]) if singular_values[-1] > 0 else float('inf')
    logger.debug("Condition number %.3g, max VIF %.3g", condition, max(vif.values(), default=1.0))

    return CollinearityReport(terms=matrix.terms, vif=vif, condition_number=condition)
