"""Closed-form ridge classifiers and their (weighted) mean-squared-error.

The fitted weight vector solves the shifted normal equations
(X'X + lambda I) h = X'y. Negative lambda is legal input; a grid search may
probe regions where the shifted matrix is indefinite. Systems are solved
through an eigendecomposition of X'X, and a grid point is reported as
infeasible (``SingularSystemError``) when the shifted spectrum is singular
or its condition number exceeds ``COND_LIMIT``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError

#: Condition-number ceiling beyond which a shifted system counts as singular.
COND_LIMIT = 1e12

_MSE_MODES = ("partial", "full")


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"expected an n-by-d matrix, got shape {X.shape}")
    return X


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must all be -1 or +1")
    return y


class RidgePath:
    """Ridge solutions for one (X, y) across many regularization values.

    X'X is eigendecomposed once; each lambda then costs O(d^2).
    """

    def __init__(self, X, y):
        X = _as_matrix(X)
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y disagree on the sample count")
        gram = X.T @ X
        evals, vecs = np.linalg.eigh(gram)
        self._evals = evals
        self._vecs = vecs
        self._vb = vecs.T @ (X.T @ y)

    def _shifted(self, lam: float) -> np.ndarray:
        return self._evals + lam

    def solve(self, lam: float) -> np.ndarray:
        """Weight vector at one regularization value."""
        shifted = self._shifted(lam)
        amin = np.abs(shifted).min()
        amax = np.abs(shifted).max()
        if amin == 0.0 or amax > COND_LIMIT * amin:
            raise SingularSystemError(
                f"X'X + {lam} I is singular or numerically indefinite", lam=lam
            )
        return self._vecs @ (self._vb / shifted)

    def solve_grid(self, lams) -> tuple[np.ndarray, np.ndarray]:
        """Weight vectors for a whole grid.

        Returns ``(H, feasible)`` where H has one column per grid value
        (zeroed where infeasible) and ``feasible`` marks solvable points.
        """
        lams = np.asarray(lams, dtype=float).ravel()
        shifted = self._evals[:, None] + lams[None, :]
        absd = np.abs(shifted)
        amin = absd.min(axis=0)
        amax = absd.max(axis=0)
        feasible = (amin > 0.0) & (amax <= COND_LIMIT * amin)
        safe = np.where(shifted == 0.0, 1.0, shifted)
        H = self._vecs @ (self._vb[:, None] / safe)
        H[:, ~feasible] = 0.0
        return H, feasible


def fit_ridge(X, y, lam: float) -> np.ndarray:
    """Exact solution of (X'X + lam I) h = X'y.

    Raises ``SingularSystemError`` when the shifted system is singular or its
    condition estimate exceeds ``COND_LIMIT`` (possible for negative lam);
    grid searches record such points as infeasible instead of aborting.
    """
    return RidgePath(X, y).solve(lam)


def mse(h, X, y) -> float:
    """Mean squared error 1 - (2/n) y'Xh + (1/n) h'X'X h.

    The leading constant 1 is y'y/n, which requires labels in {-1, +1}.
    """
    X = _as_matrix(X)
    y = _check_labels(y)
    h = np.asarray(h, dtype=float).ravel()
    n = X.shape[0]
    p = X @ h
    return float(1.0 - 2.0 * (y @ p) / n + (p @ p) / n)


def weighted_mse(h, X, y, w, mode: str = "partial") -> float:
    """Importance-weighted validation MSE.

    ``mode="partial"`` weights only the data-dependent terms,
    1 - (2/n) y'WXh + (1/n) h'X'WXh, leaving the constant label-energy term
    unweighted; this is the form the benchmark tables use. ``mode="full"``
    returns (1/n) sum_i w_i (h(x_i) - y_i)^2, the statistically standard
    estimator. Both share their argmin over a lambda grid whenever the
    weights are constant.
    """
    if mode not in _MSE_MODES:
        raise ValueError(f"mode must be one of {_MSE_MODES}, got {mode!r}")
    X = _as_matrix(X)
    y = _check_labels(y)
    h = np.asarray(h, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    n = X.shape[0]
    if w.shape[0] != n:
        raise ValueError(f"{w.shape[0]} weights for {n} samples")
    if np.any(w < 0):
        raise ValueError("importance weights must be nonnegative")
    p = X @ h
    cross = (w * y) @ p
    quad = w @ (p * p)
    if mode == "partial":
        return float(1.0 - 2.0 * cross / n + quad / n)
    return float((w.sum() - 2.0 * cross + quad) / n)


def weighted_ridge_minimizer(X, y, w) -> np.ndarray:
    """Exact minimizer (X'WX)^{-1} X'Wy of the weighted quadratic risk."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if np.any(w < 0):
        raise ValueError("importance weights must be nonnegative")
    gram = X.T @ (w[:, None] * X)
    rhs = X.T @ (w * y)
    evals = np.linalg.eigvalsh(gram)
    amin = np.abs(evals).min()
    amax = np.abs(evals).max()
    if amin == 0.0 or amax > COND_LIMIT * amin:
        raise SingularSystemError("X'WX is singular")
    return np.linalg.solve(gram, rhs)


@dataclass(frozen=True)
class SvdSpectrum:
    """Singular values of a design matrix plus the diagnostic alpha/alpha^2.

    Singular values at or below numerical rank tolerance are flagged in
    ``zero_flags`` and get a 0.0 sentinel in ``inverse_spectrum`` instead of
    a division.
    """

    singular_values: np.ndarray
    inverse_spectrum: np.ndarray
    zero_flags: np.ndarray


def svd_spectrum(X) -> SvdSpectrum:
    """Singular values (descending) and their normalized inverses 1/alpha."""
    X = _as_matrix(X)
    sv = np.linalg.svd(X, compute_uv=False)
    tol = max(X.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    flags = sv <= tol
    inverse = np.where(flags, 0.0, sv / np.where(flags, 1.0, sv) ** 2)
    return SvdSpectrum(sv, inverse, flags)
