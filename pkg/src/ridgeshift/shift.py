"""One-dimensional covariate-shift problems with a shared class posterior.

A problem is defined by Gaussian source class-conditionals, class priors and
a target marginal (a single Gaussian or a two-component mixture). The class
posterior is computed from the source side by Bayes' rule and carried over
to the target unchanged, which pins down the target class-conditionals as
p(z|y) = p(y|z) p_Z(z) / p(y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .data import LabeledDataset

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianSpec:
    """A univariate Gaussian, parameterized by mean and variance."""

    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * ((x - self.mean) ** 2 / self.variance + _LOG_2PI + math.log(self.variance))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(self.mean, math.sqrt(self.variance), size)


@dataclass(frozen=True)
class GaussianMixture:
    """A finite Gaussian mixture with strictly positive weights."""

    weights: tuple[float, ...]
    components: tuple[GaussianSpec, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.components) or not self.components:
            raise ValueError("weights and components must align and be nonempty")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to 1")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        logs = np.stack(
            [math.log(w) + c.logpdf(x) for w, c in zip(self.weights, self.components)]
        )
        m = logs.max(axis=0)
        return m + np.log(np.exp(logs - m).sum(axis=0))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        choice = rng.choice(len(self.components), size=size, p=self.weights)
        draws = np.column_stack([c.sample(size, rng) for c in self.components])
        return draws[np.arange(size), choice]


Marginal = Union[GaussianSpec, GaussianMixture]


@dataclass(frozen=True)
class ShiftProblem:
    """Source class-conditionals + priors + a target marginal.

    ``source_conditionals`` and ``class_priors`` are ordered (class -1,
    class +1).
    """

    source_conditionals: tuple[GaussianSpec, GaussianSpec]
    class_priors: tuple[float, float]
    target_marginal: Marginal

    def __post_init__(self):
        p_neg, p_pos = self.class_priors
        if not (0.0 < p_neg < 1.0 and 0.0 < p_pos < 1.0):
            raise ValueError("class priors must lie strictly inside (0, 1)")
        if abs(p_neg + p_pos - 1.0) > 1e-12:
            raise ValueError("class priors must sum to 1")
        if len(self.source_conditionals) != 2:
            raise ValueError("need one source conditional per class")

    def prior(self, label: int) -> float:
        return self.class_priors[0] if label < 0 else self.class_priors[1]

    def conditional(self, label: int) -> GaussianSpec:
        return self.source_conditionals[0] if label < 0 else self.source_conditionals[1]

    def source_marginal(self) -> GaussianMixture:
        return GaussianMixture(self.class_priors, self.source_conditionals)


def identity_shift_problem(
    conditionals: tuple[GaussianSpec, GaussianSpec],
    priors: tuple[float, float] = (0.5, 0.5),
) -> ShiftProblem:
    """Problem whose target marginal equals the source marginal."""
    return ShiftProblem(conditionals, priors, GaussianMixture(priors, conditionals))


def variance_shift_problem(
    class_means: tuple[float, float] = (-1.0, 1.0),
    source_variance: float = 1.0,
    target_variance: float = 1.0,
    priors: tuple[float, float] = (0.5, 0.5),
) -> ShiftProblem:
    """Scaled-class-variance family: the target marginal is the source class
    mixture with every class variance replaced by ``target_variance``."""
    conds = tuple(GaussianSpec(m, source_variance) for m in class_means)
    target = GaussianMixture(
        priors, tuple(GaussianSpec(m, target_variance) for m in class_means)
    )
    return ShiftProblem(conds, priors, target)


def source_posterior(problem: ShiftProblem, x):
    """P(y = +1 | x) under the source model, computed in log space."""
    lp = math.log(problem.class_priors[1]) + problem.source_conditionals[1].logpdf(x)
    ln = math.log(problem.class_priors[0]) + problem.source_conditionals[0].logpdf(x)
    return 1.0 / (1.0 + np.exp(ln - lp))


def target_conditional_density(problem: ShiftProblem, z, y: int):
    """p(z | y) in the target domain, with the posterior carried over from
    the source side."""
    post = source_posterior(problem, z)
    if y < 0:
        post = 1.0 - post
    return post * problem.target_marginal.pdf(z) / problem.prior(y)


def sample_gaussian_classes(
    conditionals: tuple[GaussianSpec, GaussianSpec],
    priors: tuple[float, float],
    n: int,
    rng: np.random.Generator,
    samples_per_class: int | None = None,
) -> LabeledDataset:
    """Draw labels (from the priors, or a fixed per-class count) and features
    from the labeled Gaussian conditionals."""
    if samples_per_class is not None:
        if samples_per_class < 1:
            raise ValueError("samples_per_class must be positive")
        labels = np.repeat([-1.0, 1.0], samples_per_class)
        labels = labels[rng.permutation(len(labels))]
    else:
        if n < 1:
            raise ValueError("need at least one sample")
        labels = np.where(rng.random(n) < priors[1], 1.0, -1.0)
    pos = labels > 0
    feats = np.empty(len(labels))
    feats[~pos] = conditionals[0].sample(int((~pos).sum()), rng)
    feats[pos] = conditionals[1].sample(int(pos.sum()), rng)
    return LabeledDataset(features=feats[:, None], labels=labels, feature_names=("x",))


def sample_source(
    problem: ShiftProblem,
    n: int,
    rng: np.random.Generator,
    samples_per_class: int | None = None,
) -> LabeledDataset:
    """Sample a labeled source set from the problem's class-conditionals."""
    return sample_gaussian_classes(
        problem.source_conditionals, problem.class_priors, n, rng, samples_per_class
    )


def sample_target(problem: ShiftProblem, m: int, rng: np.random.Generator) -> LabeledDataset:
    """Sample target features from the target marginal, then labels from the
    shared posterior (exact and rejection-free)."""
    if m < 1:
        raise ValueError("need at least one sample")
    z = problem.target_marginal.sample(m, rng)
    p_pos = source_posterior(problem, z)
    labels = np.where(rng.random(m) < p_pos, 1.0, -1.0)
    return LabeledDataset(features=z[:, None], labels=labels, feature_names=("x",))


def true_importance_weights(problem: ShiftProblem, points) -> np.ndarray:
    """Density ratio target-marginal / source-marginal at the given points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 2:
        if pts.shape[1] != 1:
            raise ValueError("shift problems are one-dimensional")
        pts = pts[:, 0]
    log_w = problem.target_marginal.logpdf(pts) - problem.source_marginal().logpdf(pts)
    return np.exp(log_w)


@dataclass(frozen=True)
class DomainPair:
    """A sampled source/target dataset pair from one shift problem."""

    source: LabeledDataset
    target: LabeledDataset

    def __post_init__(self):
        if self.source.d != self.target.d:
            raise ValueError("source and target must share feature dimensionality")


def sample_domain_pair(
    problem: ShiftProblem,
    n: int,
    m: int,
    rng: np.random.Generator,
    samples_per_class: int | None = None,
) -> DomainPair:
    source = sample_source(problem, n, rng, samples_per_class)
    target = sample_target(problem, m, rng)
    return DomainPair(source, target)
