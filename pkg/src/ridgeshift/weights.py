"""Importance-weight estimators: ratio of Gaussians, KLIEP, KMM, nearest
neighbour, plus the small constrained solvers backing them.

All estimators consume raw sample matrices (n-by-d source, m-by-d target)
and return one nonnegative weight per source row. They are deterministic:
no random restarts, and KLIEP's internal width-selection folds are fixed
contiguous splits, so repeated runs on the same inputs reproduce bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DegenerateDataError,
    EstimationFailureError,
    InfeasibleConstraintsError,
)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"expected an n-by-d sample matrix, got shape {X.shape}")
    return X


# ---------------------------------------------------------------------------
# kernels and bandwidths
# ---------------------------------------------------------------------------

def gaussian_kernel(a, b, sigma: float) -> float:
    """exp(-||a - b||^2 / (2 sigma^2)) for a single pair of points."""
    if sigma <= 0:
        raise ValueError("kernel bandwidth must be positive")
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return float(np.exp(-np.sum((a - b) ** 2) / (2.0 * sigma**2)))


def gaussian_gram(A, B, sigma: float) -> np.ndarray:
    """Pairwise Gaussian kernel matrix between the rows of A and B."""
    if sigma <= 0:
        raise ValueError("kernel bandwidth must be positive")
    D = cdist(_as_matrix(A), _as_matrix(B), "sqeuclidean")
    return np.exp(-D / (2.0 * sigma**2))


def silverman_bandwidth(X) -> float:
    """Rule-of-thumb bandwidth 1.06 sigma_hat n^(-1/5).

    sigma_hat is the per-dimension sample standard deviation (ddof=1); for
    multivariate data the per-dimension rule is averaged.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise DegenerateDataError("bandwidth selection needs at least 2 samples")
    bw = float(np.mean(1.06 * X.std(axis=0, ddof=1) * n ** (-0.2)))
    if not bw > 0:
        raise DegenerateDataError("zero sample spread; cannot pick a bandwidth")
    return bw


# ---------------------------------------------------------------------------
# ratio of Gaussians
# ---------------------------------------------------------------------------

def _gaussian_fit_logpdf(X, points) -> np.ndarray:
    """Log density of a maximum-likelihood Gaussian fit of X at given points."""
    mu = X.mean(axis=0)
    centered = X - mu
    cov = centered.T @ centered / X.shape[0]  # ML (1/n) covariance
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DegenerateDataError("singular fitted covariance") from None
    diff = points - mu
    sol = np.linalg.solve(chol, diff.T)
    maha = np.sum(sol**2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    d = X.shape[1]
    return -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))


def estimate_rg(source, target) -> np.ndarray:
    """Ratio-of-Gaussians weights: fit one Gaussian per sample set by maximum
    likelihood and evaluate their density ratio at the source points."""
    source = _as_matrix(source)
    target = _as_matrix(target)
    if source.shape[0] < 2 or target.shape[0] < 2:
        raise DegenerateDataError("fitting a Gaussian needs at least 2 samples per set")
    if source.shape[1] != target.shape[1]:
        raise ValueError("source and target must share feature dimensionality")
    log_t = _gaussian_fit_logpdf(target, source)
    log_s = _gaussian_fit_logpdf(source, source)
    return np.exp(log_t - log_s)


# ---------------------------------------------------------------------------
# KLIEP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KliepConfig:
    """Settings for the KLIEP estimator.

    ``width_candidates=None`` picks ``width_factors`` times the Silverman
    bandwidth of the pooled sample. Width selection is a 3-fold
    cross-validation on held-out target log-likelihood with fixed contiguous
    folds.
    """

    width_candidates: tuple[float, ...] | None = None
    width_factors: tuple[float, ...] = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
    cv_folds: int = 3
    max_iterations: int = 300
    tolerance: float = 1e-7

    def __post_init__(self):
        if self.width_candidates is not None and not self.width_candidates:
            raise ValueError("width_candidates must be nonempty when given")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")


def _fit_kliep_alpha(
    K_fit: np.ndarray,
    source_kernel_sums: np.ndarray,
    n: int,
    max_iterations: int,
    tolerance: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Maximize sum_j log(K_fit @ alpha)_j over alpha >= 0 with the source
    normalization sum_i w(x_i) = source_kernel_sums @ alpha = n.

    Projected gradient ascent with backtracking: step, clip to the
    nonnegative orthant, rescale onto the normalization constraint, accept
    only if the objective improved. Returns the coefficients and the
    objective trace (non-decreasing by construction).
    """
    b = source_kernel_sums
    b_total = b.sum()
    if not b_total > 0:
        raise EstimationFailureError("source kernel mass vanished for this width")
    alpha = np.full(K_fit.shape[1], n / b_total)
    w_fit = K_fit @ alpha
    if np.any(w_fit <= 0):
        raise EstimationFailureError("initial KLIEP model has zero mass on a target point")
    obj = float(np.log(w_fit).sum())
    trace = [obj]
    step = 1.0
    for _ in range(max_iterations):
        grad = K_fit.T @ (1.0 / w_fit)
        accepted = False
        while step > 1e-14:
            cand = np.maximum(alpha + step * grad, 0.0)
            mass = b @ cand
            if mass > 0:
                cand *= n / mass
                w_cand = K_fit @ cand
                if np.all(w_cand > 0):
                    obj_cand = float(np.log(w_cand).sum())
                    if obj_cand > obj:
                        accepted = True
                        break
            step *= 0.5
        if not accepted:
            break
        gain = obj_cand - obj
        alpha, w_fit, obj = cand, w_cand, obj_cand
        trace.append(obj)
        if gain < tolerance * max(1.0, abs(obj)):
            break
        step *= 2.0
    return alpha, np.asarray(trace)


def _kliep_width_candidates(source, target, cfg: KliepConfig) -> tuple[float, ...]:
    if cfg.width_candidates is not None:
        return cfg.width_candidates
    pooled = np.vstack([source, target])
    base = silverman_bandwidth(pooled)
    return tuple(f * base for f in cfg.width_factors)


def estimate_kliep(source, target, cfg: KliepConfig | None = None) -> np.ndarray:
    """KLIEP weights: model w(x) as a nonnegative kernel expansion centered at
    the target points and maximize target log-likelihood subject to the
    source normalization sum_i w(x_i) = n.

    The normalization is the single sum constraint over source points; per-
    target-point normalizations have no solution in general (see README).
    """
    cfg = cfg or KliepConfig()
    source = _as_matrix(source)
    target = _as_matrix(target)
    if source.shape[1] != target.shape[1]:
        raise ValueError("source and target must share feature dimensionality")
    n, m = source.shape[0], target.shape[0]
    if n < cfg.cv_folds or m < cfg.cv_folds:
        raise ValueError(f"need at least {cfg.cv_folds} samples per set")

    candidates = _kliep_width_candidates(source, target, cfg)
    folds = np.array_split(np.arange(m), cfg.cv_folds)  # fixed contiguous folds

    best_width = None
    best_score = -np.inf
    for width in candidates:
        scores = []
        for held in folds:
            keep = np.setdiff1d(np.arange(m), held, assume_unique=True)
            centers = target[keep]
            K_fit = gaussian_gram(centers, centers, width)
            b = gaussian_gram(source, centers, width).sum(axis=0)
            try:
                alpha, _ = _fit_kliep_alpha(
                    K_fit, b, n, cfg.max_iterations, cfg.tolerance
                )
            except EstimationFailureError:
                scores = None
                break
            w_held = gaussian_gram(target[held], centers, width) @ alpha
            if np.any(w_held <= 0):
                scores = None
                break
            scores.append(np.log(w_held).mean())
        if scores is None:
            continue
        score = float(np.mean(scores))
        if score > best_score:
            best_score = score
            best_width = width
    if best_width is None:
        raise EstimationFailureError(
            "every candidate width gave -inf held-out likelihood"
        )

    K_fit = gaussian_gram(target, target, best_width)
    b = gaussian_gram(source, target, best_width).sum(axis=0)
    alpha, _ = _fit_kliep_alpha(K_fit, b, n, cfg.max_iterations, cfg.tolerance)
    return gaussian_gram(source, target, best_width) @ alpha


# ---------------------------------------------------------------------------
# KMM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KmmConfig:
    """Settings for the KMM estimator.

    ``sum_slack`` is the epsilon of the constraint |sum w - n| <= n epsilon;
    ``None`` uses upper_bound / sqrt(n). ``bandwidth=None`` applies the
    Silverman rule to the pooled source+target sample. ``solver_tolerance``
    is relative to max(1, ||linear term||_inf).
    """

    upper_bound: float = 1000.0
    sum_slack: float | None = None
    solver_tolerance: float = 3e-3
    max_iterations: int = 5000
    bandwidth: float | None = None

    def __post_init__(self):
        if not self.upper_bound > 0:
            raise ValueError("upper_bound must be positive")
        if self.sum_slack is not None and self.sum_slack < 0:
            raise ValueError("sum_slack must be nonnegative")
        if not self.solver_tolerance > 0:
            raise ValueError("solver_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


def _power_iteration_largest(H: np.ndarray, iterations: int = 100) -> float:
    """Largest eigenvalue estimate of a PSD matrix; deterministic start."""
    n = H.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(iterations):
        hv = H @ v
        norm = np.linalg.norm(hv)
        if norm == 0.0:
            return 0.0
        v = hv / norm
        lam = float(v @ (H @ v))
    return lam


def _project_box_band(
    v: np.ndarray, upper: float, lo: float, hi: float
) -> np.ndarray:
    """Feasible point of {0 <= w <= upper, lo <= sum w <= hi} near v.

    Cyclic projections (clip to the box, shift onto the sum band) followed by
    a proportional-slack polish; the returned vector satisfies the box
    exactly and the band within the loop's exit check.
    """
    w = np.clip(v, 0.0, upper)
    size = w.shape[0]
    for _ in range(100):
        s = w.sum()
        if lo <= s <= hi:
            return w
        target = min(max(s, lo), hi)
        w = np.clip(w + (target - s) / size, 0.0, upper)
    # distribute the remaining shift over coordinates with slack, aiming
    # slightly inside the band so rounding cannot push the sum back out
    s = w.sum()
    band = hi - lo
    margin = min(1e-9 * max(1.0, abs(lo), abs(hi)), band / 4) if band > 0 else 0.0
    if s < lo:
        target = lo + margin
        room = upper - w
        capacity = room.sum()
        if capacity < target - s:
            raise InfeasibleConstraintsError(
                "sum band is unreachable under the box constraint"
            )
        w = np.clip(w + (target - s) * room / capacity, 0.0, upper)
    elif s > hi:
        target = max(hi - margin, 0.0)
        w = np.clip(w - (s - target) * w / s, 0.0, upper)
    s = w.sum()
    if not (lo <= s <= hi):
        raise InfeasibleConstraintsError("projection failed to reach the sum band")
    return w


def solve_box_sum_qp(
    H,
    f,
    upper_bound: float,
    sum_target: float,
    slack: float,
    tolerance: float = 1e-6,
    max_iterations: int = 5000,
) -> np.ndarray:
    """Minimize (1/2) w'Hw - f'w over 0 <= w <= upper_bound with
    |sum w - sum_target| <= slack.

    Projected gradient descent with step 1/L (L from power iteration);
    feasibility of the returned point is guaranteed by the projection.
    Raises ``EstimationFailureError`` (carrying the final projected-gradient
    residual) when the tolerance is not met within ``max_iterations``.
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float).ravel()
    size = f.shape[0]
    if H.shape != (size, size):
        raise ValueError(f"H has shape {H.shape}, expected ({size}, {size})")
    if slack < 0:
        raise InfeasibleConstraintsError("negative sum slack makes the band empty")
    lo = sum_target - slack
    hi = sum_target + slack
    if lo > size * upper_bound or hi < 0:
        raise InfeasibleConstraintsError(
            f"band [{lo}, {hi}] cannot be met with weights in [0, {upper_bound}]"
        )
    L = max(_power_iteration_largest(H) * 1.001, 1e-12)
    w = _project_box_band(np.full(size, sum_target / size), upper_bound, lo, hi)
    residual = np.inf
    for _ in range(max_iterations):
        grad = H @ w - f
        w_next = _project_box_band(w - grad / L, upper_bound, lo, hi)
        residual = L * float(np.max(np.abs(w_next - w)))
        w = w_next
        if residual <= tolerance:
            return w
    raise EstimationFailureError(
        f"projected gradient stalled at residual {residual:.3e} > {tolerance:.3e}",
        residual=residual,
    )


def estimate_kmm(source, target, cfg: KmmConfig | None = None) -> np.ndarray:
    """KMM weights: minimize the maximum mean discrepancy between reweighted
    source and target samples, i.e. solve the QP

        min_w (1/2) w' K_ss w - kappa' w,   kappa_i = (n/m) sum_j k(x_i, z_j)

    subject to 0 <= w_i <= B and |sum w - n| <= n epsilon.
    """
    cfg = cfg or KmmConfig()
    source = _as_matrix(source)
    target = _as_matrix(target)
    if source.shape[1] != target.shape[1]:
        raise ValueError("source and target must share feature dimensionality")
    n, m = source.shape[0], target.shape[0]
    sigma = cfg.bandwidth
    if sigma is None:
        sigma = silverman_bandwidth(np.vstack([source, target]))
    K = gaussian_gram(source, source, sigma)
    kappa = (n / m) * gaussian_gram(source, target, sigma).sum(axis=1)
    eps = cfg.sum_slack if cfg.sum_slack is not None else cfg.upper_bound / np.sqrt(n)
    tol = cfg.solver_tolerance * max(1.0, float(np.max(np.abs(kappa))))
    return solve_box_sum_qp(
        K,
        kappa,
        upper_bound=cfg.upper_bound,
        sum_target=float(n),
        slack=float(n * eps),
        tolerance=tol,
        max_iterations=cfg.max_iterations,
    )


# ---------------------------------------------------------------------------
# nearest neighbour
# ---------------------------------------------------------------------------

def estimate_nn(source, target) -> np.ndarray:
    """Voronoi-count weights: one per source sample, equal to the number of
    target samples whose nearest source point it is, plus 1 (Laplace
    smoothing). Weights therefore sum to n + m; equidistant ties go to the
    lowest source index.
    """
    source = _as_matrix(source)
    n = source.shape[0]
    target = np.asarray(target, dtype=float)
    if target.size == 0:
        return np.ones(n)
    target = _as_matrix(target)
    if source.shape[1] != target.shape[1]:
        raise ValueError("source and target must share feature dimensionality")
    owner = np.argmin(cdist(target, source, "sqeuclidean"), axis=1)
    return np.bincount(owner, minlength=n) + 1.0
