"""Acquisition scoring over a finite candidate set, and arm selection.

Implements the mean-plus-scaled-deviation scores (vanilla and round-indexed
UCB), expected improvement, posterior-draw scoring, and the
likelihood-weighted UCB whose exploration term is modulated by a smoothed
importance weight that upweights candidates with rare predicted payoffs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .density import GmmModel, gmm_fit_weighted, kde_eval, kde_fit
from .exceptions import SelectionError
from .gp import GpModel, gp_predict, gp_sample_marginal

__all__ = [
    "ACQUISITION_KINDS",
    "AcquisitionConfig",
    "CandidateSet",
    "LikelihoodRatioField",
    "score_vucb",
    "score_gpucb",
    "beta_schedule",
    "score_ei",
    "score_ts",
    "compute_likelihood_ratio",
    "score_lwucb",
    "select_next_arm",
]

ACQUISITION_KINDS = ("ei", "ts", "v_ucb", "gp_ucb", "lw_ucb")

DENSITY_FLOOR = 1e-12


@dataclass(eq=False)
class CandidateSet:
    """The finite arm collection: contexts (M, d) plus unique opaque ids."""

    contexts: np.ndarray
    ids: list

    def __post_init__(self) -> None:
        self.contexts = np.atleast_2d(np.asarray(self.contexts, dtype=float))
        if self.contexts.shape[0] < 1:
            raise ValueError("a candidate set needs at least one arm")
        if not np.all(np.isfinite(self.contexts)):
            raise ValueError("candidate contexts must be finite")
        self.ids = list(self.ids)
        if len(self.ids) != self.contexts.shape[0]:
            raise ValueError("ids and contexts must have equal length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("candidate ids must be unique")

    def __len__(self) -> int:
        return self.contexts.shape[0]

    @property
    def dim(self) -> int:
        return self.contexts.shape[1]


@dataclass
class AcquisitionConfig:
    """Which score to use and its parameters.

    ``cardinality_for_beta`` overrides the candidate count used in the
    round-indexed UCB schedule (contextual problems use the context dimension
    instead of the arm count); when None the harness supplies the
    environment's value.
    """

    kind: str
    kappa: float = 1.0
    delta: float = 0.1
    xi: float = 0.01
    n_gmm: int = 2
    prior_density: float = 1.0
    cardinality_for_beta: float | None = None

    def __post_init__(self) -> None:
        self.kind = str(self.kind).lower()
        if self.kind not in ACQUISITION_KINDS:
            raise ValueError(
                f"unknown acquisition kind {self.kind!r}; expected one of {ACQUISITION_KINDS}"
            )
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError("kappa must be finite and nonnegative")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        if not (math.isfinite(self.xi) and self.xi >= 0):
            raise ValueError("xi must be finite and nonnegative")
        if self.n_gmm < 1:
            raise ValueError("n_gmm must be a positive integer")
        if not (math.isfinite(self.prior_density) and self.prior_density > 0):
            raise ValueError("prior_density must be finite and positive")

    def label(self) -> str:
        """Short slug distinguishing this config in bundle names and tables."""
        if self.kind in ("v_ucb",):
            return f"{self.kind}_k{self.kappa:g}"
        if self.kind == "lw_ucb":
            return f"{self.kind}_k{self.kappa:g}_g{self.n_gmm}"
        if self.kind == "gp_ucb":
            return f"{self.kind}_d{self.delta:g}"
        if self.kind == "ei":
            return f"{self.kind}_x{self.xi:g}"
        return self.kind


@dataclass(eq=False)
class LikelihoodRatioField:
    """Raw per-candidate importance weights plus their smooth mixture fit."""

    gmm: GmmModel
    raw_weights: np.ndarray


def score_vucb(mean, std, kappa: float) -> np.ndarray:
    """Vanilla UCB: mu(x) + kappa * sigma(x)."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if mean.shape != std.shape:
        raise ValueError("mean and std must have equal shape")
    return mean + kappa * std


def beta_schedule(t: int, cardinality: float, delta: float) -> float:
    """Round-indexed exploration coefficient 2 log(|D| t^2 pi^2 / (6 delta)), clamped at 0."""
    if t < 1:
        raise ValueError("round index t must be >= 1")
    if cardinality < 1:
        raise ValueError("cardinality must be >= 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    beta = 2.0 * math.log(cardinality * t * t * math.pi**2 / (6.0 * delta))
    return max(beta, 0.0)


def score_gpucb(mean, std, t: int, cardinality: float, delta: float) -> np.ndarray:
    """GP-UCB: mu(x) + sqrt(beta_t) * sigma(x) with the standard beta schedule."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if mean.shape != std.shape:
        raise ValueError("mean and std must have equal shape")
    return mean + math.sqrt(beta_schedule(t, cardinality, delta)) * std


def score_ei(mean, std, best_reward: float, xi: float) -> np.ndarray:
    """Expected improvement over the incumbent: sigma * (lam * Phi(lam) + phi(lam)).

    lam = (mu - y* - xi) / sigma.  Where sigma == 0 the score is defined as 0
    (no improvement is possible under a degenerate posterior).
    """
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if mean.shape != std.shape:
        raise ValueError("mean and std must have equal shape")
    scores = np.zeros(mean.shape[0])
    pos = std > 0
    lam = (mean[pos] - best_reward - xi) / std[pos]
    scores[pos] = std[pos] * (lam * norm.cdf(lam) + norm.pdf(lam))
    np.maximum(scores, 0.0, out=scores)  # guard tiny negative rounding
    return scores


def score_ts(model: GpModel, candidates: CandidateSet, rng: np.random.Generator) -> np.ndarray:
    """Posterior-draw scores: one independent marginal sample per arm."""
    return gp_sample_marginal(model, candidates.contexts, rng)


def compute_likelihood_ratio(
    model: GpModel,
    candidates: CandidateSet,
    n_gmm: int,
    rng: np.random.Generator,
    prior_density: float = 1.0,
) -> LikelihoodRatioField:
    """Importance weights from the input-prior over output-density ratio.

    Pipeline: posterior means at every candidate; a 1-D KDE of those means as
    the output density; raw weight prior_density / max(density, floor) per
    candidate (a flat input prior treats every arm equally); then a weighted
    mixture fit over the candidate contexts yields the smooth field used by
    the likelihood-weighted UCB.
    """
    if len(candidates) < n_gmm:
        raise ValueError(
            f"need at least n_gmm={n_gmm} candidates, got {len(candidates)}"
        )
    mean, _ = gp_predict(model, candidates.contexts)
    kde = kde_fit(mean)
    dens = np.maximum(kde_eval(kde, mean), DENSITY_FLOOR)
    raw = prior_density / dens
    gmm = gmm_fit_weighted(candidates.contexts, raw, n_gmm, rng)
    return LikelihoodRatioField(gmm=gmm, raw_weights=raw)


def score_lwucb(
    mean,
    std,
    field: LikelihoodRatioField,
    candidates: CandidateSet,
    kappa: float,
) -> np.ndarray:
    """Likelihood-weighted UCB: mu(x) + kappa * w(x) * sigma(x).

    w(x) is the smooth mixture field evaluated at each candidate context.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if mean.shape != std.shape:
        raise ValueError("mean and std must have equal shape")
    if mean.shape[0] != len(candidates):
        raise ValueError("scores and candidate set have mismatched lengths")
    w = field.gmm.density(candidates.contexts)
    return mean + kappa * w * std


def select_next_arm(scores, ids=None):
    """Index (or id) of the maximal score; ties break toward the lowest index.

    Raises :class:`SelectionError` when any score is non-finite, naming the
    offending arm.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.shape[0] < 1:
        raise ValueError("scores must be nonempty")
    bad = ~np.isfinite(scores)
    if np.any(bad):
        i = int(np.argmax(bad))
        name = ids[i] if ids is not None else i
        raise SelectionError(f"non-finite acquisition score {scores[i]!r} at arm {name!r}")
    best = int(np.argmax(scores))
    return ids[best] if ids is not None else best
