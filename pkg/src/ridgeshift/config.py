"""Experiment configuration: defaults, key=value config files, hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

KNOWN_ESTIMATORS = ("rG", "KLIEP", "KMM", "NN")
KNOWN_FORMATS = ("csv", "markdown")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a benchmark run depends on.

    Values come from three layers, later winning: dataclass defaults, a
    key=value config file, command-line flags.
    """

    seed: int = 2016
    repeats: int = 100
    n_source: int = 100
    m_target: int = 100
    samples_per_class: int | None = None
    class_means: tuple[float, float] = (-1.0, 1.0)
    source_variance: float = 1.0
    prior_positive: float = 0.5
    target_variances: tuple[float, ...] = (0.1, 0.5, 1.0, 2.0, 3.0, 4.0)
    grid_min: float = -100.0
    grid_max: float = 500.0
    grid_step: float = 1.0
    fold_count: int = 5
    estimators: tuple[str, ...] = KNOWN_ESTIMATORS
    weighted_mode: str = "partial"
    add_intercept: bool = False
    kmm_upper_bound: float = 1000.0
    kmm_sum_slack: float | None = None
    kmm_solver_tolerance: float = 3e-3
    kmm_max_iterations: int = 5000
    kliep_width_factors: tuple[float, ...] = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
    kliep_cv_folds: int = 3
    kliep_max_iterations: int = 300
    kliep_tolerance: float = 1e-7
    missing_removal_threshold: float = 0.99
    out_dir: str = "."
    formats: tuple[str, ...] = ("csv", "markdown")
    jobs: int = 1
    failure_budget: float = 0.5

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigurationError("repeats must be at least 1")
        unknown = set(self.estimators) - set(KNOWN_ESTIMATORS)
        if unknown:
            raise ConfigurationError(
                f"unknown estimators {sorted(unknown)}; known: {KNOWN_ESTIMATORS}"
            )
        bad_formats = set(self.formats) - set(KNOWN_FORMATS)
        if bad_formats:
            raise ConfigurationError(
                f"unknown output formats {sorted(bad_formats)}; known: {KNOWN_FORMATS}"
            )
        if not self.grid_min < self.grid_max:
            raise ConfigurationError("grid_min must be below grid_max")
        if self.grid_step <= 0:
            raise ConfigurationError("grid_step must be positive")
        if self.weighted_mode not in ("partial", "full"):
            raise ConfigurationError("weighted_mode must be 'partial' or 'full'")
        if not 0.0 <= self.failure_budget <= 1.0:
            raise ConfigurationError("failure_budget must be a fraction in [0, 1]")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")
        if not 0.0 < self.prior_positive < 1.0:
            raise ConfigurationError("prior_positive must lie strictly inside (0, 1)")

    @property
    def class_priors(self) -> tuple[float, float]:
        return (1.0 - self.prior_positive, self.prior_positive)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


_TUPLE_FLOAT_FIELDS = {"class_means", "target_variances", "kliep_width_factors"}
_TUPLE_STR_FIELDS = {"estimators", "formats"}
_OPTIONAL_INT_FIELDS = {"samples_per_class"}
_OPTIONAL_FLOAT_FIELDS = {"kmm_sum_slack"}


def _coerce(name: str, raw: str, target_type):
    raw = raw.strip()
    if name in _TUPLE_FLOAT_FIELDS:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    if name in _TUPLE_STR_FIELDS:
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    if name in _OPTIONAL_INT_FIELDS:
        return None if raw.lower() == "none" else int(raw)
    if name in _OPTIONAL_FLOAT_FIELDS:
        return None if raw.lower() == "none" else float(raw)
    if target_type is bool:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigurationError(f"cannot read {raw!r} as a boolean for {name}")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def read_config_file(path: str | Path) -> dict:
    """Parse a plain key=value config file ('#' starts a comment)."""
    path = Path(path)
    field_types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    type_map = {"int": int, "float": float, "str": str, "bool": bool}
    values: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(
                f"{path.name} line {lineno}: expected key=value, got {stripped!r}"
            )
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in field_types:
            raise ConfigurationError(f"{path.name} line {lineno}: unknown key {key!r}")
        declared = field_types[key]
        base = declared.split("|")[0].strip() if isinstance(declared, str) else declared
        target = type_map.get(base, str) if isinstance(base, str) else base
        try:
            values[key] = _coerce(key, raw, target)
        except ValueError as exc:
            raise ConfigurationError(
                f"{path.name} line {lineno}: bad value for {key!r}: {exc}"
            ) from None
    return values


def build_config(
    file_values: dict | None = None, overrides: dict | None = None, **defaults
) -> ExperimentConfig:
    """Layer defaults < config file < explicit overrides into a config."""
    merged: dict = dict(defaults)
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
