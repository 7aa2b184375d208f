"""Benchmark runners and result emission.

Two experiments are reproduced at desk scale:

* ``run_artificial`` -- 1-d Gaussian classes. The source draws features from
  N(mean_y, source_variance); each target column re-draws the class features
  with a different variance. Selected regularization values are aggregated
  over seeded repeats for unweighted source CV, importance-weighted CV under
  each estimator, the analytic marginal density ratio, and labeled-target
  (oracle) selection.
* ``run_heart`` -- cross-hospital transfer on the four UCI heart-disease
  files. Datasets are fixed, so only the CV split plans are re-randomized
  per repetition; weight estimation and oracle selection are deterministic
  per pair (their standard error is exactly 0).

Tables are emitted as CSV and markdown plus a JSON run manifest. Table files
are byte-identical across runs with the same seed and config; the manifest
carries the only wall-clock field.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy

try:
    from importlib.metadata import version as _pkg_version

    PACKAGE_VERSION = _pkg_version("ridgeshift")
except Exception:  # pragma: no cover - metadata absent in odd installs
    PACKAGE_VERSION = "unknown"

from .config import ExperimentConfig
from .data import (
    HEART_FILES,
    HEART_HOSPITALS,
    LabeledDataset,
    load_uci_heart,
    make_split_plan,
    missing_fractions,
    preprocess,
)
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    EstimationFailureError,
    InfeasibleConstraintsError,
    SelectionError,
)
from .select import cv_select_multi, make_lambda_grid, target_select
from .shift import (
    GaussianSpec,
    ShiftProblem,
    sample_gaussian_classes,
    true_importance_weights,
    variance_shift_problem,
)
from .weights import (
    KliepConfig,
    KmmConfig,
    estimate_kliep,
    estimate_kmm,
    estimate_nn,
    estimate_rg,
)

LAMBDA_V = "lambda_V"
LAMBDA_Z = "lambda_Z"
TRUE_RATIO = "true_ratio"

#: Ordered source->target hospital pairs of the heart-disease table.
HEART_PAIRS = (
    ("C", "V"), ("C", "H"), ("C", "S"),
    ("V", "H"), ("V", "S"), ("H", "S"),
    ("V", "C"), ("H", "C"), ("S", "C"),
    ("H", "V"), ("S", "V"), ("S", "H"),
)

_WEIGHT_FAILURES = (
    EstimationFailureError,
    DegenerateDataError,
    InfeasibleConstraintsError,
)


@dataclass(frozen=True)
class CellStats:
    """Aggregate of one table cell over repeats."""

    mean: float
    stderr: float
    n_success: int
    n_failed: int
    boundary_count: int

    def failure_fraction(self) -> float:
        total = self.n_success + self.n_failed
        return self.n_failed / total if total else 0.0


@dataclass(frozen=True)
class ResultTable:
    """Row/column labels, per-cell statistics, and run metadata."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    cells: tuple[tuple[CellStats, ...], ...]
    metadata: Mapping[str, str]

    def __post_init__(self):
        if len(self.cells) != len(self.row_labels):
            raise ValueError("cell grid does not match the row labels")
        for row in self.cells:
            if len(row) != len(self.col_labels):
                raise ValueError("cell grid does not match the column labels")
            for cell in row:
                if cell.n_success and not cell.stderr >= 0:
                    raise ValueError("negative standard error")

    def cell(self, row_label: str, col_label: str) -> CellStats:
        i = self.row_labels.index(row_label)
        j = self.col_labels.index(col_label)
        return self.cells[i][j]

    def max_failure_fraction(self) -> float:
        worst = 0.0
        for row in self.cells:
            for cell in row:
                worst = max(worst, cell.failure_fraction())
        return worst


def _aggregate(values: list[float], boundaries: list[bool], failures: int) -> CellStats:
    k = len(values)
    if k == 0:
        return CellStats(math.nan, math.nan, 0, failures, 0)
    arr = np.asarray(values)
    stderr = float(arr.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return CellStats(float(arr.mean()), stderr, k, failures, sum(boundaries))


def estimator_weights(name: str, source_x, target_x, cfg: ExperimentConfig) -> np.ndarray:
    """Run one named importance-weight estimator with the config's settings."""
    if name == "rG":
        return estimate_rg(source_x, target_x)
    if name == "KLIEP":
        return estimate_kliep(
            source_x,
            target_x,
            KliepConfig(
                width_factors=cfg.kliep_width_factors,
                cv_folds=cfg.kliep_cv_folds,
                max_iterations=cfg.kliep_max_iterations,
                tolerance=cfg.kliep_tolerance,
            ),
        )
    if name == "KMM":
        return estimate_kmm(
            source_x,
            target_x,
            KmmConfig(
                upper_bound=cfg.kmm_upper_bound,
                sum_slack=cfg.kmm_sum_slack,
                solver_tolerance=cfg.kmm_solver_tolerance,
                max_iterations=cfg.kmm_max_iterations,
            ),
        )
    if name == "NN":
        return estimate_nn(source_x, target_x)
    raise ConfigurationError(f"unknown estimator {name!r}")


def _with_intercept(data: LabeledDataset) -> LabeledDataset:
    feats = np.column_stack([data.features, np.ones(data.n)])
    mask = np.column_stack([data.missing_mask, np.zeros(data.n, dtype=bool)])
    return LabeledDataset(
        feats, data.labels, data.feature_names + ("intercept",), mask
    )


def artificial_method_labels(cfg: ExperimentConfig) -> tuple[str, ...]:
    return (LAMBDA_V, *cfg.estimators, TRUE_RATIO, LAMBDA_Z)


def heart_method_labels(cfg: ExperimentConfig) -> tuple[str, ...]:
    return (LAMBDA_V, *cfg.estimators, LAMBDA_Z)


def _artificial_repeat(args) -> tuple[int, int, dict]:
    """One seeded repeat of one target-variance column.

    Returns per-method outcomes: ("ok", lambda_hat, boundary) or
    ("failed", message). Weight-estimation failures are per method; a
    selection failure marks every CV-based method of the repeat.
    """
    cfg, var_index, variance, repeat = args
    rng = np.random.default_rng([cfg.seed, var_index, repeat])
    source_conds = tuple(GaussianSpec(m, cfg.source_variance) for m in cfg.class_means)
    target_conds = tuple(GaussianSpec(m, variance) for m in cfg.class_means)
    source = sample_gaussian_classes(
        source_conds, cfg.class_priors, cfg.n_source, rng, cfg.samples_per_class
    )
    target = sample_gaussian_classes(target_conds, cfg.class_priors, cfg.m_target, rng)
    plan = make_split_plan(source.n, cfg.fold_count, rng)
    problem = variance_shift_problem(
        cfg.class_means, cfg.source_variance, variance, cfg.class_priors
    )

    outcomes: dict = {}
    weight_sets: dict = {LAMBDA_V: None}
    for name in cfg.estimators:
        try:
            weight_sets[name] = estimator_weights(
                name, source.features, target.features, cfg
            )
        except _WEIGHT_FAILURES as exc:
            outcomes[name] = ("failed", str(exc))
    weight_sets[TRUE_RATIO] = true_importance_weights(problem, source.features)

    if cfg.add_intercept:
        source = _with_intercept(source)
        target = _with_intercept(target)
    grid = make_lambda_grid(cfg.grid_min, cfg.grid_max, cfg.grid_step)
    try:
        selections = cv_select_multi(
            source, grid, plan, weight_sets, mode=cfg.weighted_mode
        )
        for name, sel in selections.items():
            outcomes[name] = ("ok", sel.lambda_hat, sel.boundary)
    except SelectionError as exc:
        for name in weight_sets:
            outcomes[name] = ("failed", str(exc))
    try:
        sel_z = target_select(source, target, grid)
        outcomes[LAMBDA_Z] = ("ok", sel_z.lambda_hat, sel_z.boundary)
    except SelectionError as exc:
        outcomes[LAMBDA_Z] = ("failed", str(exc))
    return var_index, repeat, outcomes


def _run_tasks(task_fn, tasks, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(task_fn, tasks, chunksize=1))
    return [task_fn(t) for t in tasks]


def _base_metadata(cfg: ExperimentConfig, experiment: str) -> dict:
    return {
        "experiment": experiment,
        "seed": str(cfg.seed),
        "config_hash": cfg.config_hash(),
        "repeats": str(cfg.repeats),
        "grid": f"{cfg.grid_min}:{cfg.grid_max}:{cfg.grid_step}",
        "lambda_convention": (
            "unaveraged training loss; divide by the training-fold size "
            "for the averaged-loss convention"
        ),
    }


def run_artificial(cfg: ExperimentConfig) -> ResultTable:
    """Selected-lambda means and standard errors per method and target
    variance, over ``cfg.repeats`` seeded repeats."""
    methods = artificial_method_labels(cfg)
    cols = tuple(str(v) for v in cfg.target_variances)
    tasks = [
        (cfg, ci, var, r)
        for ci, var in enumerate(cfg.target_variances)
        for r in range(cfg.repeats)
    ]
    raw = _run_tasks(_artificial_repeat, tasks, cfg.jobs)
    raw.sort(key=lambda item: (item[0], item[1]))

    values = {(m, ci): [] for m in methods for ci in range(len(cols))}
    bounds = {key: [] for key in values}
    fails = {key: 0 for key in values}
    for ci, _repeat, outcomes in raw:
        for m in methods:
            status = outcomes.get(m, ("failed", "missing"))
            if status[0] == "ok":
                values[(m, ci)].append(status[1])
                bounds[(m, ci)].append(status[2])
            else:
                fails[(m, ci)] += 1
    cells = tuple(
        tuple(
            _aggregate(values[(m, ci)], bounds[(m, ci)], fails[(m, ci)])
            for ci in range(len(cols))
        )
        for m in methods
    )
    meta = _base_metadata(cfg, "artificial")
    meta.update(
        {
            "n_source": str(cfg.n_source),
            "m_target": str(cfg.m_target),
            "target_variances": ",".join(str(v) for v in cfg.target_variances),
        }
    )
    return ResultTable(methods, cols, cells, meta)


def _heart_pair_task(args) -> tuple[int, dict]:
    """All repetitions of one source->target hospital pair.

    Features are removed when their missing fraction exceeds the threshold
    in either domain so the pair keeps an aligned feature set; each domain is
    then z-scored independently. Weights and oracle selection depend only on
    the fixed datasets, so they are computed once.
    """
    cfg, pair_index, pair, raw_source, raw_target = args
    threshold = cfg.missing_removal_threshold
    over = (missing_fractions(raw_source) > threshold) | (
        missing_fractions(raw_target) > threshold
    )
    removal = [name for name, flag in zip(raw_source.feature_names, over) if flag]
    source, _ = preprocess(raw_source, threshold, also_remove=removal)
    target, _ = preprocess(raw_target, threshold, also_remove=removal)

    weight_sets: dict = {LAMBDA_V: None}
    failures: dict = {}
    for name in cfg.estimators:
        try:
            weight_sets[name] = estimator_weights(
                name, source.features, target.features, cfg
            )
        except _WEIGHT_FAILURES as exc:
            failures[name] = str(exc)

    if cfg.add_intercept:
        source = _with_intercept(source)
        target = _with_intercept(target)
    grid = make_lambda_grid(cfg.grid_min, cfg.grid_max, cfg.grid_step)

    per_method: dict = {m: {"values": [], "bounds": [], "failed": 0} for m in
                        (LAMBDA_V, *cfg.estimators, LAMBDA_Z)}
    for name, _msg in failures.items():
        per_method[name]["failed"] = cfg.repeats

    try:
        sel_z = target_select(source, target, grid)
        z_outcome = ("ok", sel_z.lambda_hat, sel_z.boundary)
    except SelectionError as exc:
        z_outcome = ("failed", str(exc))

    for r in range(cfg.repeats):
        rng = np.random.default_rng([cfg.seed, pair_index, r])
        plan = make_split_plan(source.n, cfg.fold_count, rng)
        try:
            selections = cv_select_multi(
                source, grid, plan, weight_sets, mode=cfg.weighted_mode
            )
            for name, sel in selections.items():
                per_method[name]["values"].append(sel.lambda_hat)
                per_method[name]["bounds"].append(sel.boundary)
        except SelectionError:
            for name in weight_sets:
                per_method[name]["failed"] += 1
        if z_outcome[0] == "ok":
            per_method[LAMBDA_Z]["values"].append(z_outcome[1])
            per_method[LAMBDA_Z]["bounds"].append(z_outcome[2])
        else:
            per_method[LAMBDA_Z]["failed"] += 1
    return pair_index, per_method


def load_heart_domains(cfg: ExperimentConfig, data_dir: str | Path) -> dict:
    """Load the four hospital files, raising a FileNotFoundError that names
    the hospital when one is absent."""
    data_dir = Path(data_dir)
    raw = {}
    for abbrev, fname in HEART_FILES.items():
        path = data_dir / fname
        if not path.exists():
            raise FileNotFoundError(
                f"missing heart-disease file for hospital "
                f"{HEART_HOSPITALS[abbrev]!r}: {path}"
            )
        raw[abbrev] = load_uci_heart(path, HEART_HOSPITALS[abbrev])
    return raw


def run_heart(cfg: ExperimentConfig, data_dir: str | Path) -> ResultTable:
    """Selected-lambda means and standard errors for the 12 ordered hospital
    pairs; rows are pairs, columns are methods."""
    raw = load_heart_domains(cfg, data_dir)
    methods = heart_method_labels(cfg)
    rows = tuple(f"{s} {t}" for s, t in HEART_PAIRS)
    tasks = [
        (cfg, pi, pair, raw[pair[0]], raw[pair[1]])
        for pi, pair in enumerate(HEART_PAIRS)
    ]
    results = _run_tasks(_heart_pair_task, tasks, cfg.jobs)
    results.sort(key=lambda item: item[0])

    cells = []
    for _pi, per_method in results:
        row = []
        for m in methods:
            rec = per_method[m]
            row.append(_aggregate(rec["values"], rec["bounds"], rec["failed"]))
        cells.append(tuple(row))
    meta = _base_metadata(cfg, "heart")
    meta.update(
        {
            "missing_removal_threshold": str(cfg.missing_removal_threshold),
            "standardization": "per-domain z-scoring on non-missing entries, 0-imputation",
            "repetition_semantics": "re-randomized CV split plans on fixed datasets",
        }
    )
    return ResultTable(rows, tuple(methods), tuple(cells), meta)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _format_stat(value: float) -> str:
    return repr(float(value))


def _markdown_cell(cell: CellStats) -> str:
    if cell.n_success == 0:
        return f"failed ({cell.n_failed})"
    mean = cell.mean + 0.0  # normalize -0
    text = f"{mean:.0f} ({cell.stderr:.0f})"
    if cell.boundary_count > 0:
        text += "*"
    return text


def emit_table(table: ResultTable, format: str, path: str | Path) -> Path:
    """Write a ResultTable as CSV (mean/stderr column pairs) or markdown
    (``mean (stderr)`` cells, ``*`` marking boundary-clipped results).

    Emission is a pure function of the table, so re-emitting the same table
    yields a byte-identical file.
    """
    path = Path(path)
    meta_lines = [f"{k}={table.metadata[k]}" for k in sorted(table.metadata)]
    if format == "csv":
        lines = [f"# {m}" for m in meta_lines]
        header = ["label"]
        for col in table.col_labels:
            header.extend([f"{col} mean", f"{col} stderr"])
        lines.append(",".join(header))
        for label, row in zip(table.row_labels, table.cells):
            out = [label]
            for cell in row:
                out.extend([_format_stat(cell.mean), _format_stat(cell.stderr)])
            lines.append(",".join(out))
    elif format == "markdown":
        lines = [f"<!-- {m} -->" for m in meta_lines]
        lines.append("| label | " + " | ".join(table.col_labels) + " |")
        lines.append("|" + " --- |" * (len(table.col_labels) + 1))
        for label, row in zip(table.row_labels, table.cells):
            lines.append(
                "| " + " | ".join([label, *(_markdown_cell(c) for c in row)]) + " |"
            )
        if any(c.boundary_count for row in table.cells for c in row):
            lines.append("")
            lines.append("`*` at least one repeat selected a grid-boundary value.")
    else:
        raise ConfigurationError(f"unknown table format {format!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_mse_curves(
    problem: ShiftProblem, cfg: ExperimentConfig, path: str | Path
) -> Path:
    """Write population target-MSE curves over the lambda grid, one column
    per target variance, plus a final per-column argmin row.

    Curves use closed-form moments of the scaled-class-variance family at
    the configured source sample size, so the file is deterministic: the
    fitted path is h(lambda) = n E[xy] / (n E[xx] + lambda) and the risk is
    1 - 2 h E[uz] + h^2 E[zz].
    """
    path = Path(path)
    grid = make_lambda_grid(cfg.grid_min, cfg.grid_max, cfg.grid_step)
    priors = problem.class_priors
    labels = (-1.0, 1.0)
    mus = [c.mean for c in problem.source_conditionals]
    variances = [c.variance for c in problem.source_conditionals]
    e_xy = sum(p * y * mu for p, y, mu in zip(priors, labels, mus))
    e_xx = sum(p * (v + mu**2) for p, v, mu in zip(priors, variances, mus))
    n = cfg.n_source

    curves = []
    argmins = []
    for var in cfg.target_variances:
        e_uz = e_xy  # target classes keep the source means
        e_zz = sum(p * (var + mu**2) for p, mu in zip(priors, mus))
        denom = n * e_xx + grid
        feasible = np.abs(denom) > abs(n * e_xx) / 1e12
        h = np.where(feasible, n * e_xy / np.where(feasible, denom, 1.0), 0.0)
        risk = 1.0 - 2.0 * h * e_uz + h * h * e_zz
        risk[~feasible] = np.inf
        curves.append(risk)
        argmins.append(float(grid[int(np.argmin(risk))]))

    lines = [
        f"# experiment=curves",
        f"# seed={cfg.seed}",
        f"# config_hash={cfg.config_hash()}",
        f"# n_source={n}",
    ]
    header = ["lambda"] + [f"sigma2={v}" for v in cfg.target_variances]
    lines.append("\t".join(header))
    for i, lam in enumerate(grid):
        row = [repr(float(lam))] + [_format_stat(c[i]) for c in curves]
        lines.append("\t".join(row))
    lines.append("\t".join(["argmin"] + [repr(a) for a in argmins]))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_manifest(
    table: ResultTable | None,
    cfg: ExperimentConfig,
    path: str | Path,
    experiment: str,
) -> Path:
    """JSON run manifest: seed, config (and its hash), library versions and
    per-cell failure counts. ``generated_at`` is the single field that varies
    between otherwise identical runs."""
    path = Path(path)
    failures = {}
    if table is not None:
        for label, row in zip(table.row_labels, table.cells):
            for col, cell in zip(table.col_labels, row):
                if cell.n_failed:
                    failures[f"{label}|{col}"] = cell.n_failed
    manifest = {
        "experiment": experiment,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "config": cfg.as_dict(),
        "versions": {
            "ridgeshift": PACKAGE_VERSION,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "failure_counts": failures,
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path
