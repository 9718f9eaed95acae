"""Density estimators used by the likelihood-ratio pipeline.

One-dimensional Gaussian kernel density estimation for the payoff-output
density, and a weighted expectation-maximization fit of a Gaussian mixture
used to smooth per-candidate importance weights into a positive field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

__all__ = ["Kde1d", "GmmModel", "kde_fit", "kde_eval", "gmm_fit_weighted", "gmm_eval"]

_LOG_2PI = math.log(2.0 * math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class Kde1d:
    """Gaussian-kernel density estimate of a scalar sample."""

    samples: np.ndarray
    bandwidth: float

    def density(self, y):
        """Density at ``y`` (scalar or array): (1/(N h)) sum phi((y - y_i)/h)."""
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        if not np.all(np.isfinite(y_arr)):
            raise ValueError("query points must be finite")
        n = self.samples.shape[0]
        out = np.empty(y_arr.shape[0])
        # Chunked so the (Q, N) kernel matrix stays within a few tens of MB.
        chunk = max(1, int(4_000_000 / max(n, 1)))
        for lo in range(0, y_arr.shape[0], chunk):
            z = (y_arr[lo : lo + chunk, None] - self.samples[None, :]) / self.bandwidth
            out[lo : lo + chunk] = np.exp(-0.5 * z * z).sum(axis=1)
        out *= _INV_SQRT_2PI / (n * self.bandwidth)
        return float(out[0]) if np.isscalar(y) or np.ndim(y) == 0 else out


def kde_fit(values) -> Kde1d:
    """Fit a 1-D Gaussian KDE with the Silverman bandwidth.

    h = 0.9 * min(sample std, IQR/1.34) * N^(-1/5), floored at
    max(1e-6, 1e-3 * data range) so constant samples stay usable.
    """
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.shape[0] < 1:
        raise ValueError("kde_fit requires at least one value")
    if not np.all(np.isfinite(v)):
        raise ValueError("kde_fit requires finite values")
    n = v.shape[0]
    std = float(np.std(v, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(v, [75.0, 25.0])
    spread = min(std, float(q75 - q25) / 1.34)
    floor = max(1e-6, 1e-3 * float(v.max() - v.min()))
    h = max(floor, 0.9 * spread * n ** (-0.2))
    return Kde1d(samples=v.copy(), bandwidth=h)


def kde_eval(kde: Kde1d, y):
    """Evaluate ``kde`` at ``y``; see :meth:`Kde1d.density`."""
    return kde.density(y)


@dataclass(eq=False)
class GmmModel:
    """Gaussian mixture: simplex weights, component means and covariances.

    ``log_likelihood_path`` holds the weighted log-likelihood recorded at
    every EM iteration of the fit that produced the model.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood_path: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def density(self, x):
        """Mixture density at ``x``: a d-vector or an (M, d) batch."""
        x_arr = np.asarray(x, dtype=float)
        single = x_arr.ndim <= 1
        pts = np.atleast_2d(x_arr)
        if x_arr.ndim == 1 and self.dim == 1 and x_arr.shape[0] != 1:
            pts = x_arr[:, None]  # batch of scalar queries against a 1-D mixture
            single = False
        if pts.shape[1] != self.dim:
            raise ValueError(f"query dimension {pts.shape[1]} does not match mixture dimension {self.dim}")
        log_probs = _component_log_pdfs(pts, self.means, self.covariances)
        dens = np.exp(log_probs) @ self.weights
        return float(dens[0]) if single else dens


def _component_log_pdfs(X: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Log N(x_i; mean_k, cov_k) for all points and components, shape (M, K)."""
    m, d = X.shape
    k = means.shape[0]
    out = np.empty((m, k))
    for j in range(k):
        L = cholesky(covs[j], lower=True)
        z = solve_triangular(L, (X - means[j]).T, lower=True)
        log_det = float(np.sum(np.log(np.diag(L))))
        out[:, j] = -0.5 * np.sum(z * z, axis=0) - log_det - 0.5 * d * _LOG_2PI
    return out


def _regularized(cov: np.ndarray, reg: float) -> tuple[np.ndarray, float]:
    """Add ``reg`` to the diagonal, escalating until the matrix factorizes.

    Returns the regularized covariance and the level actually used, so a
    caller can keep the level sticky across EM iterations (a level that
    toggled on and off between iterations would break monotonicity).
    """
    d = cov.shape[0]
    if reg > 0:
        cov = cov + reg * np.eye(d)
    while True:
        try:
            cholesky(cov, lower=True)
            return cov, reg
        except np.linalg.LinAlgError:
            step = max(reg * 9.0, 1e-12)
            cov = cov + step * np.eye(d)
            reg += step
            if reg > 1e8:
                raise np.linalg.LinAlgError(
                    "component covariance could not be regularized"
                ) from None


def gmm_fit_weighted(
    points,
    weights,
    n_components: int,
    rng: np.random.Generator,
    max_iterations: int = 200,
    tol: float = 1e-6,
) -> GmmModel:
    """Fit a Gaussian mixture to weighted points by EM.

    Weights are normalized internally; the weighted log-likelihood
    sum_i w_i log(sum_k alpha_k N(x_i; gamma_k, Sigma_k)) is non-decreasing
    across iterations and recorded on the returned model.  If fewer points
    carry positive weight than ``n_components``, the component count is
    reduced to the feasible number with a warning.

    Initialization is k-means++-style seeding on a weight-resampled copy of
    the points, driven by ``rng``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]  # a flat list of scalars is a 1-D problem
    w = np.asarray(weights, dtype=float)
    if X.shape[0] != w.shape[0]:
        raise ValueError("points and weights must have equal length")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = float(w.sum())
    if total <= 0:
        raise ValueError("weights must not be all zero")
    if n_components < 1:
        raise ValueError("n_components must be positive")
    n_positive = int(np.count_nonzero(w > 0))
    if n_positive < n_components:
        warnings.warn(
            f"only {n_positive} points carry positive weight; "
            f"reducing n_components from {n_components} to {n_positive}",
            stacklevel=2,
        )
        n_components = n_positive

    w = w / total
    m, d = X.shape

    # Weighted global moments; with one component the EM fixed point is the
    # weighted sample moments, so return them directly (regularizing only if
    # the covariance does not factorize).
    mean_all = w @ X
    centered = X - mean_all
    cov_all = (w[:, None] * centered).T @ centered
    cov_all = 0.5 * (cov_all + cov_all.T)
    if n_components == 1:
        cov, _ = _regularized(cov_all, 0.0)
        ll = float(w @ _component_log_pdfs(X, mean_all[None, :], cov[None, :, :])[:, 0])
        return GmmModel(
            weights=np.ones(1),
            means=mean_all[None, :].copy(),
            covariances=cov[None, :, :].copy(),
            log_likelihood_path=np.array([ll]),
        )

    # Constant diagonal regularization keeps every M-step factorizable; the
    # per-component level only ever escalates, never resets, so the effective
    # objective stays fixed across iterations.
    base_reg = 1e-6 * float(np.trace(cov_all)) / d
    reg_levels = np.full(n_components, base_reg)

    means = _kmeanspp_seeds(X, w, n_components, rng)
    covs = np.empty((n_components, d, d))
    for j in range(n_components):
        covs[j], reg_levels[j] = _regularized(cov_all, reg_levels[j])
    alphas = np.full(n_components, 1.0 / n_components)

    ll_path: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iterations):
        log_pdfs = _component_log_pdfs(X, means, covs)
        log_weighted = log_pdfs + np.log(alphas)[None, :]
        log_norm = _logsumexp_rows(log_weighted)
        ll = float(w @ log_norm)
        ll_path.append(ll)

        resp = np.exp(log_weighted - log_norm[:, None])
        if abs(ll - prev_ll) < tol:
            break
        prev_ll = ll

        wr = w[:, None] * resp
        nk = wr.sum(axis=0) + 10.0 * np.finfo(float).eps
        alphas = nk / nk.sum()
        means = (wr.T @ X) / nk[:, None]
        for j in range(n_components):
            diff = X - means[j]
            cov = (wr[:, j][:, None] * diff).T @ diff / nk[j]
            covs[j], reg_levels[j] = _regularized(0.5 * (cov + cov.T), reg_levels[j])

    return GmmModel(
        weights=alphas,
        means=means,
        covariances=covs,
        log_likelihood_path=np.asarray(ll_path),
    )


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    hi = a.max(axis=1)
    return hi + np.log(np.exp(a - hi[:, None]).sum(axis=1))


def _kmeanspp_seeds(X: np.ndarray, w: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding on a weight-resampled copy of the points."""
    m = X.shape[0]
    resampled = X[rng.choice(m, size=m, replace=True, p=w)]
    seeds = [resampled[rng.integers(m)]]
    for _ in range(1, k):
        d2 = np.min(
            [np.sum((resampled - s) ** 2, axis=1) for s in seeds], axis=0
        )
        total = float(d2.sum())
        if total <= 0:  # all remaining mass sits on already-chosen seeds
            seeds.append(resampled[rng.integers(m)])
            continue
        seeds.append(resampled[rng.choice(m, p=d2 / total)])
    return np.array(seeds, dtype=float)


def gmm_eval(model: GmmModel, x):
    """Evaluate the mixture density; see :meth:`GmmModel.density`."""
    return model.density(x)
