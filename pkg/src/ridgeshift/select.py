"""Regularization-grid construction and the three selection procedures:
unweighted source cross-validation, importance-weighted source
cross-validation, and labeled-target (oracle) selection.

Grid points whose shifted normal equations are singular get +inf risk and
are excluded from the argmin instead of failing the run. Ties break toward
the smallest grid value, and a selected value sitting on either end of the
grid is flagged as boundary-clipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .data import LabeledDataset, SplitPlan
from .errors import SelectionError
from .ridge import RidgePath

#: The classic exponentially increasing grid used as a documentation example.
_EXPONENTIAL_GRID = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)


def make_lambda_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Ascending arithmetic grid lo, lo+step, ... capped at hi (inclusive
    whenever hi lands on the lattice)."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def exponential_lambda_grid() -> np.ndarray:
    """The standard exponentially increasing nonnegative grid."""
    return np.array(_EXPONENTIAL_GRID)


@dataclass(frozen=True)
class SelectionResult:
    """Risk curve over a grid and its argmin.

    ``risk_curve`` holds +inf at infeasible grid points; ``boundary`` is True
    when the selected value sits on either end of the grid.
    """

    grid: np.ndarray
    risk_curve: np.ndarray
    lambda_hat: float
    infeasible_count: int
    boundary: bool

    def __post_init__(self):
        if len(self.grid) != len(self.risk_curve):
            raise ValueError("risk curve length does not match the grid")


def _argmin_result(grid: np.ndarray, curve: np.ndarray) -> SelectionResult:
    finite = np.isfinite(curve)
    if not finite.any():
        raise SelectionError("every grid point was infeasible")
    idx = int(np.argmin(np.where(finite, curve, np.inf)))  # ties -> smallest lambda
    lam = float(grid[idx])
    return SelectionResult(
        grid=grid,
        risk_curve=curve,
        lambda_hat=lam,
        infeasible_count=int((~finite).sum()),
        boundary=(idx == 0 or idx == len(grid) - 1),
    )


def _check_weights(w, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != n:
        raise ValueError(f"{w.shape[0]} weights for {n} source samples")
    if np.any(w < 0):
        raise ValueError("importance weights must be nonnegative")
    return w


def cv_risk_curves(
    source: LabeledDataset,
    grid: np.ndarray,
    plan: SplitPlan,
    weight_sets: Mapping[str, Optional[np.ndarray]],
    mode: str = "partial",
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Cross-validated risk curves for several weightings sharing the folds.

    The per-fold ridge fits depend only on the split, so evaluating many
    weight vectors (``None`` meaning unweighted) costs little more than one.
    Returns the per-weighting mean curves plus the joint feasibility mask.
    """
    if mode not in ("partial", "full"):
        raise ValueError(f"unknown weighted-risk mode {mode!r}")
    if plan.n != source.n:
        raise ValueError("split plan was built for a different sample count")
    X, y = source.features, source.labels
    grid = np.asarray(grid, dtype=float)
    checked = {
        name: None if w is None else _check_weights(w, source.n)
        for name, w in weight_sets.items()
    }
    sums = {name: np.zeros(len(grid)) for name in weight_sets}
    feasible = np.ones(len(grid), dtype=bool)
    for t_idx, v_idx in zip(plan.train_indices, plan.validation_indices):
        path = RidgePath(X[t_idx], y[t_idx])
        H, fold_feasible = path.solve_grid(grid)
        feasible &= fold_feasible
        Xv = X[v_idx]
        yv = y[v_idx]
        nv = len(v_idx)
        P = Xv @ H
        P2 = P * P
        for name, w in checked.items():
            wv = np.ones(nv) if w is None else w[v_idx]
            cross = (wv * yv) @ P
            quad = wv @ P2
            if mode == "partial":
                curve = 1.0 - 2.0 * cross / nv + quad / nv
            else:
                curve = (wv.sum() - 2.0 * cross + quad) / nv
            sums[name] += curve
    curves = {}
    for name, total in sums.items():
        curve = total / plan.fold_count
        curve[~feasible] = np.inf
        curves[name] = curve
    return curves, feasible


def cv_select(
    source: LabeledDataset,
    grid: np.ndarray,
    plan: SplitPlan,
    weights: Optional[np.ndarray] = None,
    mode: str = "partial",
) -> SelectionResult:
    """K-fold (un)weighted source cross-validation over the grid.

    Weights, when given, are one per source sample, estimated once on the
    full sample; each fold evaluates with its own restriction of them.
    """
    curves, _ = cv_risk_curves(source, grid, plan, {"": weights}, mode=mode)
    return _argmin_result(np.asarray(grid, dtype=float), curves[""])


def cv_select_multi(
    source: LabeledDataset,
    grid: np.ndarray,
    plan: SplitPlan,
    weight_sets: Mapping[str, Optional[np.ndarray]],
    mode: str = "partial",
) -> dict[str, SelectionResult]:
    """Run :func:`cv_select` for several weightings while sharing the fits."""
    grid = np.asarray(grid, dtype=float)
    curves, _ = cv_risk_curves(source, grid, plan, weight_sets, mode=mode)
    return {name: _argmin_result(grid, curve) for name, curve in curves.items()}


def target_select(
    source: LabeledDataset,
    target_labeled: LabeledDataset,
    grid: np.ndarray,
) -> SelectionResult:
    """Oracle selection: fit on all source data, evaluate mean squared error
    on the full labeled target set. Only possible in experiments where
    target labels exist."""
    if source.d != target_labeled.d:
        raise ValueError("source and target must share feature dimensionality")
    grid = np.asarray(grid, dtype=float)
    path = RidgePath(source.features, source.labels)
    H, feasible = path.solve_grid(grid)
    Z = target_labeled.features
    u = target_labeled.labels
    m = target_labeled.n
    P = Z @ H
    curve = 1.0 - 2.0 * (u @ P) / m + (P * P).sum(axis=0) / m
    curve[~feasible] = np.inf
    return _argmin_result(grid, curve)
