"""Dataset container, UCI heart-disease ingestion, and preprocessing.

Preprocessing follows a fixed recipe: drop features whose missing fraction
exceeds a threshold, z-score the remaining features on their non-missing
entries, then impute missing cells with 0 (i.e. the post-standardization
mean). Z-scoring uses the population (1/n) standard deviation; zero-variance
features are centered and left with divisor 1 so constant columns survive
as all-zero columns instead of producing NaNs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ParseError

#: Attribute columns of the UCI "processed" heart-disease files, in file order.
HEART_FEATURE_NAMES = (
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
    "thalach", "exang", "oldpeak", "slope", "ca", "thal",
)

#: Hospital abbreviation -> file name of the processed UCI export.
HEART_FILES = {
    "C": "processed.cleveland.data",
    "V": "processed.va.data",
    "H": "processed.hungarian.data",
    "S": "processed.switzerland.data",
}

HEART_HOSPITALS = {
    "C": "cleveland",
    "V": "virginia",
    "H": "hungary",
    "S": "switzerland",
}


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LabeledDataset:
    """An n-by-d feature matrix with labels in {-1, +1}.

    ``missing_mask`` marks cells whose raw value was absent; masked cells may
    hold NaN until :func:`preprocess` imputes them. All arrays are read-only,
    so datasets are safe to share across threads or worker processes.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    missing_mask: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim == 1:
            feats = feats[:, None]
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {feats.shape}")
        labels = np.asarray(self.labels, dtype=float).ravel()
        if labels.shape[0] != feats.shape[0]:
            raise ValueError(
                f"{labels.shape[0]} labels for {feats.shape[0]} feature rows"
            )
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must all be -1 or +1")
        mask = self.missing_mask
        if mask is None:
            mask = np.zeros(feats.shape, dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != feats.shape:
                raise ValueError(
                    f"missing_mask shape {mask.shape} != features shape {feats.shape}"
                )
        if not np.all(np.isfinite(feats[~mask])):
            raise ValueError("non-finite feature values outside the missing mask")
        names = tuple(self.feature_names)
        if not names:
            names = tuple(f"x{i}" for i in range(feats.shape[1]))
        if len(names) != feats.shape[1]:
            raise ValueError(f"{len(names)} feature names for {feats.shape[1]} columns")
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "missing_mask", _readonly(mask))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train/validation index pairs; one pair per fold."""

    train_indices: tuple[np.ndarray, ...]
    validation_indices: tuple[np.ndarray, ...]
    fold_count: int

    def __post_init__(self):
        if self.fold_count != len(self.train_indices) or self.fold_count != len(
            self.validation_indices
        ):
            raise ValueError("fold_count does not match the number of index pairs")
        if self.fold_count < 1:
            raise ValueError("a split plan needs at least one fold")
        sizes = set()
        trains, vals = [], []
        for t, v in zip(self.train_indices, self.validation_indices):
            t = np.asarray(t, dtype=int)
            v = np.asarray(v, dtype=int)
            if len(v) == 0:
                raise ValueError("empty validation fold")
            if len(t) == 0:
                raise ValueError("empty training fold")
            if np.intersect1d(t, v).size:
                raise ValueError("train and validation indices overlap")
            union = np.union1d(t, v)
            n = len(t) + len(v)
            if union.size != n or union[0] != 0 or union[-1] != n - 1:
                raise ValueError("each fold must partition 0..n-1")
            sizes.add(n)
            trains.append(_readonly(t))
            vals.append(_readonly(v))
        if len(sizes) != 1:
            raise ValueError("folds disagree on the sample count")
        object.__setattr__(self, "train_indices", tuple(trains))
        object.__setattr__(self, "validation_indices", tuple(vals))

    @property
    def n(self) -> int:
        return len(self.train_indices[0]) + len(self.validation_indices[0])


@dataclass(frozen=True)
class PreprocessReport:
    """What :func:`preprocess` did: removals, per-feature statistics."""

    removed_features: tuple[tuple[str, float], ...]
    forced_removals: tuple[str, ...]
    per_feature_mean: np.ndarray
    per_feature_std: np.ndarray
    zero_variance_features: tuple[str, ...]
    kept_features: tuple[str, ...] = ()


def load_uci_heart(path: str | Path, domain_name: str) -> LabeledDataset:
    """Parse one UCI "processed" heart-disease file.

    Expects 13 comma-separated attribute columns plus a trailing diagnosis
    column, with "?" marking missing cells. The diagnosis is collapsed to a
    binary label: +1 for any positive value (disease present), -1 for 0.
    No imputation happens here; missing cells are NaN with the mask set.
    """
    path = Path(path)
    rows, label_vals, masks = [], [], []
    expected = len(HEART_FEATURE_NAMES) + 1
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue  # blank line
            if len(record) != expected:
                raise ParseError(
                    f"{domain_name} ({path.name}) line {lineno}: expected "
                    f"{expected} columns, found {len(record)}"
                )
            vals = np.empty(expected - 1)
            miss = np.zeros(expected - 1, dtype=bool)
            for j, cell in enumerate(record[:-1]):
                cell = cell.strip()
                if cell == "?":
                    vals[j] = np.nan
                    miss[j] = True
                    continue
                try:
                    vals[j] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{domain_name} ({path.name}) line {lineno}: "
                        f"non-numeric value {cell!r} in column "
                        f"{HEART_FEATURE_NAMES[j]!r}"
                    ) from None
            diag_cell = record[-1].strip()
            try:
                diag = float(diag_cell)
            except ValueError:
                raise ParseError(
                    f"{domain_name} ({path.name}) line {lineno}: "
                    f"non-numeric diagnosis {diag_cell!r}"
                ) from None
            if diag < 0:
                raise ParseError(
                    f"{domain_name} ({path.name}) line {lineno}: "
                    f"negative diagnosis {diag_cell!r}"
                )
            rows.append(vals)
            masks.append(miss)
            label_vals.append(1.0 if diag > 0 else -1.0)
    if not rows:
        raise ParseError(f"{domain_name} ({path.name}): no data rows")
    return LabeledDataset(
        features=np.vstack(rows),
        labels=np.array(label_vals),
        feature_names=HEART_FEATURE_NAMES,
        missing_mask=np.vstack(masks),
    )


def missing_fractions(data: LabeledDataset) -> np.ndarray:
    """Fraction of missing cells per feature column."""
    return data.missing_mask.mean(axis=0)


def preprocess(
    data: LabeledDataset,
    missing_removal_threshold: float = 0.99,
    also_remove: Sequence[str] = (),
) -> tuple[LabeledDataset, PreprocessReport]:
    """Drop mostly-missing features, z-score the rest, impute missing with 0.

    ``also_remove`` names extra features to drop regardless of their own
    missing fraction; cross-domain runs use it so a source/target pair ends
    up with an aligned feature set.
    """
    if data.n < 2:
        raise ValueError("preprocess needs at least 2 samples")
    unknown = set(also_remove) - set(data.feature_names)
    if unknown:
        raise ConfigurationError(f"unknown feature names in also_remove: {sorted(unknown)}")

    fractions = missing_fractions(data)
    removed = []
    forced = []
    keep = []
    for j, name in enumerate(data.feature_names):
        if fractions[j] > missing_removal_threshold:
            removed.append((name, float(fractions[j])))
        elif name in also_remove:
            forced.append(name)
        else:
            keep.append(j)
    if not keep:
        raise ConfigurationError("preprocessing removed every feature")

    feats = data.features[:, keep]
    mask = data.missing_mask[:, keep]
    kept_names = tuple(data.feature_names[j] for j in keep)

    d = len(keep)
    means = np.zeros(d)
    stds = np.zeros(d)
    zero_var = []
    out = np.empty_like(feats)
    for j in range(d):
        present = ~mask[:, j]
        col = feats[present, j]
        if col.size:
            means[j] = col.mean()
            stds[j] = col.std()  # population (1/n) standard deviation
        divisor = stds[j]
        if divisor == 0.0:
            zero_var.append(kept_names[j])
            divisor = 1.0
        out[:, j] = (feats[:, j] - means[j]) / divisor
    out[mask] = 0.0

    cleaned = LabeledDataset(
        features=out,
        labels=data.labels,
        feature_names=kept_names,
        missing_mask=mask,
    )
    report = PreprocessReport(
        removed_features=tuple(removed),
        forced_removals=tuple(forced),
        per_feature_mean=_readonly(means),
        per_feature_std=_readonly(stds),
        zero_variance_features=tuple(zero_var),
        kept_features=kept_names,
    )
    return cleaned, report


def make_split_plan(n: int, fold_count: int, rng: np.random.Generator) -> SplitPlan:
    """Random partition of 0..n-1 into ``fold_count`` near-equal validation folds."""
    if not 2 <= fold_count <= n:
        raise ValueError(f"fold_count must be in [2, {n}], got {fold_count}")
    perm = rng.permutation(n)
    parts = np.array_split(perm, fold_count)
    all_idx = np.arange(n)
    trains, vals = [], []
    for part in parts:
        v = np.sort(part)
        vals.append(v)
        trains.append(np.setdiff1d(all_idx, v, assume_unique=True))
    return SplitPlan(tuple(trains), tuple(vals), fold_count)


def make_holdout_plan(
    n: int, validation_fraction: float, rng: np.random.Generator
) -> SplitPlan:
    """Single random train/validation split.

    Unlike :func:`make_split_plan`, a holdout plan does not validate every
    sample at least once.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError("validation_fraction must be in (0, 1)")
    nv = min(n - 1, max(1, round(n * validation_fraction)))
    perm = rng.permutation(n)
    v = np.sort(perm[:nv])
    t = np.sort(perm[nv:])
    return SplitPlan((t,), (v,), 1)
