"""Gaussian-process regression with an ARD squared-exponential kernel.

Hyperparameters live in log space (signal variance, per-dimension
lengthscales, noise variance, in that packing order), are fitted by
multistart L-BFGS on the negative log-marginal likelihood, and the fitted
model caches the Cholesky factor of the regularized covariance so posterior
queries are cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.linalg.lapack import dpotri

from .exceptions import FitError, NumericsError
from .optimize import multistart_minimize

__all__ = [
    "History",
    "GpHyperparams",
    "GpModel",
    "FitConfig",
    "kernel_eval",
    "kernel_matrix",
    "nlml",
    "nlml_gradient",
    "gp_fit",
    "gp_predict",
    "gp_sample_marginal",
    "NOISE_VARIANCE_FLOOR",
]

NOISE_VARIANCE_FLOOR = 1e-8
_JITTER_SCALE_INITIAL = 1e-10  # relative to signal variance
_JITTER_SCALE_MAX = 1e-4


class History:
    """Ordered context-reward observations; append-only.

    All contexts share one dimension, all entries are finite.  ``X`` and
    ``y`` return copies so past entries cannot be mutated through the views.
    """

    def __init__(self, contexts=None, rewards=None):
        self._contexts: list[np.ndarray] = []
        self._rewards: list[float] = []
        if contexts is not None:
            rewards = [] if rewards is None else rewards
            if len(contexts) != len(rewards):
                raise ValueError("contexts and rewards must have equal length")
            for x, r in zip(contexts, rewards):
                self.add(x, r)

    def add(self, context, reward: float) -> None:
        x = np.atleast_1d(np.asarray(context, dtype=float))
        if x.ndim != 1:
            raise ValueError("a context must be a 1-D coordinate vector")
        if not np.all(np.isfinite(x)):
            raise ValueError("context coordinates must be finite")
        if not math.isfinite(reward):
            raise ValueError("reward must be finite")
        if self._contexts and x.shape[0] != self._contexts[0].shape[0]:
            raise ValueError(
                f"context dimension {x.shape[0]} does not match history dimension "
                f"{self._contexts[0].shape[0]}"
            )
        self._contexts.append(x.copy())
        self._rewards.append(float(reward))

    def __len__(self) -> int:
        return len(self._rewards)

    @property
    def dim(self) -> int:
        if not self._contexts:
            raise ValueError("empty history has no dimension")
        return self._contexts[0].shape[0]

    @property
    def X(self) -> np.ndarray:
        if not self._contexts:
            return np.empty((0, 0))
        return np.array(self._contexts)

    @property
    def y(self) -> np.ndarray:
        return np.array(self._rewards)

    def copy(self) -> "History":
        return History(self._contexts, self._rewards)


@dataclass(frozen=True, eq=False)
class GpHyperparams:
    """Kernel and noise hyperparameters, stored in log space."""

    log_signal_variance: float
    log_lengthscales: np.ndarray
    log_noise_variance: float

    def __post_init__(self):
        object.__setattr__(
            self, "log_lengthscales", np.atleast_1d(np.asarray(self.log_lengthscales, dtype=float))
        )

    @classmethod
    def from_values(cls, signal_variance, lengthscales, noise_variance) -> "GpHyperparams":
        """Build from positive values; the noise floor is applied here."""
        if signal_variance <= 0 or np.any(np.asarray(lengthscales) <= 0):
            raise ValueError("signal variance and lengthscales must be positive")
        noise = max(float(noise_variance), NOISE_VARIANCE_FLOOR)
        return cls(
            log_signal_variance=math.log(float(signal_variance)),
            log_lengthscales=np.log(np.asarray(lengthscales, dtype=float)),
            log_noise_variance=math.log(noise),
        )

    @property
    def signal_variance(self) -> float:
        return math.exp(self.log_signal_variance)

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(self.log_lengthscales)

    @property
    def noise_variance(self) -> float:
        return math.exp(self.log_noise_variance)

    @property
    def dim(self) -> int:
        return self.log_lengthscales.shape[0]

    def to_vector(self) -> np.ndarray:
        """Pack as (log signal variance, log lengthscales..., log noise variance)."""
        return np.concatenate(
            ([self.log_signal_variance], self.log_lengthscales, [self.log_noise_variance])
        )

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "GpHyperparams":
        vec = np.asarray(vec, dtype=float)
        return cls(
            log_signal_variance=float(vec[0]),
            log_lengthscales=vec[1:-1].copy(),
            log_noise_variance=float(vec[-1]),
        )


def kernel_eval(a, b, hp: GpHyperparams) -> float:
    """ARD squared-exponential kernel between two contexts.

    sigma_f^2 * exp(-0.5 * sum_d (a_d - b_d)^2 / ell_d^2); symmetric, equal to
    the signal variance at a == b.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.shape[0] != hp.dim:
        raise ValueError(
            f"kernel inputs must both have dimension {hp.dim}, got {a.shape[0]} and {b.shape[0]}"
        )
    z = (a - b) / hp.lengthscales
    return hp.signal_variance * math.exp(-0.5 * float(z @ z))


def kernel_matrix(Xa: np.ndarray, Xb: np.ndarray, hp: GpHyperparams) -> np.ndarray:
    """Cross-covariance matrix of shape (len(Xa), len(Xb)).

    Squared distances come from explicit coordinate differences: the usual
    a^2 + b^2 - 2ab expansion cancels catastrophically at the tiny
    lengthscales an unbounded likelihood fit can reach once the history
    contains many repeated arms, and that breaks positive definiteness.
    """
    Xa = np.atleast_2d(np.asarray(Xa, dtype=float))
    Xb = np.atleast_2d(np.asarray(Xb, dtype=float))
    if Xa.shape[1] != hp.dim or Xb.shape[1] != hp.dim:
        raise ValueError("context dimension does not match hyperparameters")
    with np.errstate(over="ignore"):
        diff = (Xa[:, None, :] - Xb[None, :, :]) / hp.lengthscales
        sq = np.einsum("mnd,mnd->mn", diff, diff)
        return hp.signal_variance * np.exp(-0.5 * sq)


def _chol_with_jitter(A: np.ndarray, signal_variance: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of A + jitter*I, escalating jitter on failure.

    ``A`` is consumed (the jitter is added to its diagonal in place).
    """
    n = A.shape[0]
    if not np.all(np.isfinite(A)):
        raise NumericsError("covariance matrix contains non-finite entries")
    scale = _JITTER_SCALE_INITIAL
    added = 0.0
    while scale <= _JITTER_SCALE_MAX:
        jitter = scale * signal_variance
        A.flat[:: n + 1] += jitter - added  # flatiter setitem writes through
        added = jitter
        try:
            L = cholesky(A, lower=True, check_finite=False)
            return L, jitter
        except np.linalg.LinAlgError:
            scale *= 10.0
    raise NumericsError(
        "covariance matrix is not positive definite even with jitter "
        f"{_JITTER_SCALE_MAX * signal_variance:g}"
    )


def _sq_diffs_per_dim(X: np.ndarray) -> np.ndarray:
    """Pairwise squared coordinate differences, shape (d, N, N).

    Hyperparameter-independent, so a fit precomputes this once and reuses it
    for every objective evaluation.
    """
    diffs = X[:, None, :] - X[None, :, :]
    return np.transpose(diffs * diffs, (2, 0, 1))


@dataclass(eq=False)
class _NlmlParts:
    """Factorization byproducts shared between the value and its gradient."""

    value: float
    K: np.ndarray
    L: np.ndarray
    alpha: np.ndarray
    sigvar: float
    noise: float
    inv_sq_ells: np.ndarray


def _nlml_parts(
    vec: np.ndarray,
    sqd: np.ndarray,
    y: np.ndarray,
    fixed_log_noise: float | None = None,
) -> _NlmlParts | None:
    """Objective value (plus gradient ingredients) in packed log space.

    Returns None at degenerate corners of log space (exp overflow) and lets
    :class:`NumericsError` propagate on factorization failure; callers map
    both to +inf.  When ``fixed_log_noise`` is given the packed vector omits
    the noise entry.
    """
    d, n, _ = sqd.shape
    log_sigvar = vec[0]
    log_ells = vec[1 : 1 + d]
    log_noise = vec[1 + d] if fixed_log_noise is None else fixed_log_noise

    if log_sigvar > 700.0 or log_noise > 700.0 or np.any(log_ells > 700.0) or np.any(log_ells < -350.0):
        return None

    sigvar = math.exp(log_sigvar)
    noise = math.exp(log_noise)
    inv_sq_ells = np.exp(-2.0 * log_ells)

    # Overflow at extreme-but-unguarded corners yields inf/nan, which the
    # line search rejects; no need for numpy to warn about it.
    with np.errstate(over="ignore", invalid="ignore"):
        w = np.tensordot(inv_sq_ells, sqd, axes=(0, 0))
        K = sigvar * np.exp(-0.5 * w)
        A = K.copy()
        A.flat[:: n + 1] += noise
        L, _ = _chol_with_jitter(A, sigvar)
        alpha = cho_solve((L, True), y, check_finite=False)
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        value = 0.5 * logdet + 0.5 * float(y @ alpha) + 0.5 * n * math.log(2.0 * math.pi)
    return _NlmlParts(value, K, L, alpha, sigvar, noise, inv_sq_ells)


def _nlml_grad(parts: _NlmlParts, sqd: np.ndarray, n_params: int, learn_noise: bool) -> np.ndarray:
    """Gradient 0.5 tr(A^-1 dA) - 0.5 alpha' dA alpha per log hyperparameter.

    Works with the lower triangle of A^-1 as returned by LAPACK dpotri (the
    upper triangle stays zero), exploiting the symmetry of every dA.
    """
    d = sqd.shape[0]
    K, L, alpha = parts.K, parts.L, parts.alpha
    with np.errstate(over="ignore", invalid="ignore"):
        A_low, info = dpotri(L, lower=1)
        if info != 0:
            raise NumericsError(f"dpotri failed with info={info}")
        diag_inv = np.diagonal(A_low)
        tr_inv = float(diag_inv.sum())

        grad = np.empty(n_params)
        # dA/dlog sigma_f^2 = K; diagonal of K is sigma_f^2 everywhere.
        B = A_low * K
        tr_invK = 2.0 * float(B.sum()) - parts.sigvar * tr_inv
        grad[0] = 0.5 * (tr_invK - float(alpha @ (K @ alpha)))
        # dA/dlog ell_j = K * sqd_j / ell_j^2, zero on the diagonal.
        for j in range(d):
            scale = parts.inv_sq_ells[j]
            tr_term = 2.0 * float(np.sum(B * sqd[j])) * scale
            quad = float(alpha @ ((K * sqd[j]) @ alpha)) * scale
            grad[1 + j] = 0.5 * (tr_term - quad)
        if learn_noise:
            grad[1 + d] = 0.5 * parts.noise * (tr_inv - float(alpha @ alpha))
    return grad


def _nlml_and_grad(
    vec: np.ndarray,
    sqd: np.ndarray,
    y: np.ndarray,
    fixed_log_noise: float | None = None,
) -> tuple[float, np.ndarray]:
    """Value and gradient together; see :func:`_nlml_parts`."""
    parts = _nlml_parts(vec, sqd, y, fixed_log_noise)
    if parts is None:
        return np.inf, np.zeros(vec.shape[0])
    grad = _nlml_grad(parts, sqd, vec.shape[0], learn_noise=fixed_log_noise is None)
    return parts.value, grad


def nlml(hp: GpHyperparams, hist: History) -> float:
    """Negative log-marginal likelihood of the history under ``hp``.

    0.5 log|K + sigma_n^2 I| + 0.5 y' (K + sigma_n^2 I)^-1 y + (N/2) log 2pi,
    computed through the jittered Cholesky factorization.
    """
    if len(hist) < 1:
        raise ValueError("nlml requires at least one observation")
    value, _ = _nlml_and_grad(hp.to_vector(), _sq_diffs_per_dim(hist.X), hist.y)
    return value


def nlml_gradient(hp: GpHyperparams, hist: History) -> np.ndarray:
    """Gradient of :func:`nlml` w.r.t. the packed log-hyperparameter vector."""
    if len(hist) < 1:
        raise ValueError("nlml_gradient requires at least one observation")
    _, grad = _nlml_and_grad(hp.to_vector(), _sq_diffs_per_dim(hist.X), hist.y)
    return grad


@dataclass
class GpModel:
    """Fitted GP: hyperparameters plus cached factorization for queries."""

    hyperparams: GpHyperparams
    training_history: History
    chol_factor: np.ndarray
    alpha: np.ndarray
    nlml_value: float = math.nan

    @classmethod
    def from_history(cls, hp: GpHyperparams, hist: History) -> "GpModel":
        """Factorize the training covariance under ``hp`` (N = 0 allowed)."""
        hist = hist.copy()
        n = len(hist)
        if n == 0:
            return cls(hp, hist, np.empty((0, 0)), np.empty(0))
        K = kernel_matrix(hist.X, hist.X, hp)
        A = K + hp.noise_variance * np.eye(n)
        L, _ = _chol_with_jitter(A, hp.signal_variance)
        alpha = cho_solve((L, True), hist.y)
        return cls(hp, hist, L, alpha)


@dataclass
class FitConfig:
    """Controls for :func:`gp_fit`."""

    n_restarts: int = 8
    max_iterations: int = 200
    gradient_tolerance: float = 1e-6
    seed: int = 0
    restart_spread: float = 3.0
    fixed_noise_variance: float | None = None
    warm_start: GpHyperparams | None = None


def _start_centers(X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Data-scaled default centers for the restart draws (log space)."""
    y_var = float(np.var(y))
    log_sigvar = math.log(y_var) if y_var > 0 else 0.0
    stds = np.std(X, axis=0)
    log_ells = np.where(stds > 0, np.log(np.where(stds > 0, stds, 1.0)), 0.0)
    noise_center = 1e-2 * y_var
    log_noise = math.log(noise_center) if noise_center > 0 else math.log(1e-2)
    return log_sigvar, log_ells, log_noise


def gp_fit(hist: History, cfg: FitConfig | None = None) -> GpModel:
    """Fit hyperparameters by multistart L-BFGS on the NLML.

    Deterministic given ``cfg.seed``.  Raises :class:`FitError` when every
    restart fails to produce a finite NLML.
    """
    cfg = cfg or FitConfig()
    n = len(hist)
    if n < 1:
        raise ValueError("gp_fit requires at least one observation")
    X, y = hist.X, hist.y
    d = X.shape[1]
    sqd = _sq_diffs_per_dim(X)

    fixed_log_noise = None
    if cfg.fixed_noise_variance is not None:
        fixed_log_noise = math.log(max(cfg.fixed_noise_variance, NOISE_VARIANCE_FLOOR))
    learn_noise = fixed_log_noise is None

    # Line-search trials need only the value; the factorization of the
    # accepted point is reused when its gradient is requested next.
    cache: dict[bytes, _NlmlParts] = {}

    def value_objective(vec: np.ndarray) -> float:
        try:
            parts = _nlml_parts(vec, sqd, y, fixed_log_noise)
        except NumericsError:
            return np.inf
        if parts is None:
            return np.inf
        cache.clear()
        cache[vec.tobytes()] = parts
        return parts.value

    def objective(vec: np.ndarray) -> tuple[float, np.ndarray]:
        parts = cache.get(vec.tobytes())
        if parts is None:
            try:
                parts = _nlml_parts(vec, sqd, y, fixed_log_noise)
            except NumericsError:
                parts = None
        if parts is None:
            return np.inf, np.zeros_like(vec)
        try:
            grad = _nlml_grad(parts, sqd, vec.shape[0], learn_noise)
        except NumericsError:
            return np.inf, np.zeros_like(vec)
        return parts.value, grad

    log_sigvar_c, log_ells_c, log_noise_c = _start_centers(X, y)
    center = np.concatenate(([log_sigvar_c], log_ells_c, [log_noise_c]))
    if fixed_log_noise is not None:
        center = center[:-1]

    rng = np.random.default_rng(cfg.seed)
    starts = [
        center + rng.uniform(-cfg.restart_spread, cfg.restart_spread, size=center.shape[0])
        for _ in range(cfg.n_restarts)
    ]
    if cfg.warm_start is not None:
        warm = cfg.warm_start.to_vector()
        if fixed_log_noise is not None:
            warm = warm[:-1]
        starts.append(warm)

    try:
        best = multistart_minimize(
            objective,
            starts,
            max_iterations=cfg.max_iterations,
            gradient_tolerance=cfg.gradient_tolerance,
            value_objective=value_objective,
        )
    except Exception as exc:
        raise FitError(f"hyperparameter fit failed on N={n} observations: {exc}") from exc

    vec = best.argmin
    if fixed_log_noise is not None:
        vec = np.concatenate((vec, [fixed_log_noise]))
    # Apply the noise floor to the learned value.
    vec[-1] = max(vec[-1], math.log(NOISE_VARIANCE_FLOOR))
    hp = GpHyperparams.from_vector(vec)
    model = GpModel.from_history(hp, hist)
    model.nlml_value = best.min_value
    return model


def gp_predict(model: GpModel, queries) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at each query context.

    Accepts an (M, d) array (a ``CandidateSet.contexts`` works directly).
    With an empty training history this returns the prior: zero mean and the
    signal variance.  Variances are clamped to [0, signal variance].
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    hp = model.hyperparams
    if queries.shape[1] != hp.dim:
        raise ValueError(
            f"query dimension {queries.shape[1]} does not match model dimension {hp.dim}"
        )
    m = queries.shape[0]
    if len(model.training_history) == 0:
        return np.zeros(m), np.full(m, hp.signal_variance)

    K_star = kernel_matrix(queries, model.training_history.X, hp)
    mean = K_star @ model.alpha
    v = solve_triangular(model.chol_factor, K_star.T, lower=True)
    var = hp.signal_variance - np.sum(v * v, axis=0)
    np.clip(var, 0.0, hp.signal_variance, out=var)
    return mean, var


def gp_sample_marginal(model: GpModel, queries, rng: np.random.Generator) -> np.ndarray:
    """One independent draw from the marginal posterior N(mu(x), sigma^2(x)) per query."""
    mean, var = gp_predict(model, queries)
    return mean + np.sqrt(var) * rng.standard_normal(mean.shape[0])
