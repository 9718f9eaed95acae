"""Multistart limited-memory BFGS minimizer with backtracking line search.

Small unconstrained problems only (a handful of hyperparameters); the
acceptance of a step requires Armijo sufficient decrease, so the returned
value never exceeds the value at the start point.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .exceptions import OptimizationError

__all__ = ["MinimizeProblem", "MinimizeResult", "minimize", "multistart_minimize"]

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]

_HISTORY_LENGTH = 10
_ARMIJO_C1 = 1e-4
_BACKTRACK_FACTOR = 0.5
_MAX_BACKTRACKS = 50
_MAX_EXPANSIONS = 20


@dataclass
class MinimizeProblem:
    """One minimization run: objective returning (value, gradient), and controls."""

    objective: Objective
    initial_point: np.ndarray
    max_iterations: int = 200
    gradient_tolerance: float = 1e-6
    value_tolerance: float = 1e-9  # stop once per-step improvement stalls
    value_objective: Callable[[np.ndarray], float] | None = None  # cheap value-only path

    def __post_init__(self) -> None:
        self.initial_point = np.asarray(self.initial_point, dtype=float)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.value_tolerance < 0:
            raise ValueError("value_tolerance must be nonnegative")


@dataclass
class MinimizeResult:
    argmin: np.ndarray
    min_value: float
    converged: bool
    n_iterations: int = 0


def _is_finite(value: float, gradient: np.ndarray) -> bool:
    return bool(np.isfinite(value) and np.all(np.isfinite(gradient)))


def minimize(problem: MinimizeProblem) -> MinimizeResult:
    """Run L-BFGS from ``problem.initial_point``.

    Returns the best iterate found.  ``converged`` is True iff the gradient
    infinity-norm fell below ``gradient_tolerance`` within the iteration
    budget.  A non-finite objective or gradient encountered mid-run stops the
    search and returns the best iterate so far with ``converged=False``.  A
    non-finite objective at the initial point yields ``min_value=inf`` so the
    caller can discard the run.
    """
    x = problem.initial_point.copy()
    f, g = problem.objective(x)
    if not _is_finite(f, np.asarray(g)):
        return MinimizeResult(argmin=x, min_value=np.inf, converged=False)
    g = np.asarray(g, dtype=float)
    value_only = problem.value_objective or (lambda v: problem.objective(v)[0])

    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []

    for iteration in range(problem.max_iterations + 1):
        if np.max(np.abs(g)) <= problem.gradient_tolerance:
            return MinimizeResult(x, f, converged=True, n_iterations=iteration)
        if iteration == problem.max_iterations:
            break

        direction = -_two_loop_direction(g, s_hist, y_hist)
        slope = float(g @ direction)
        if slope >= 0.0:
            # History produced an ascent direction; fall back to steepest descent.
            direction = -g
            slope = float(g @ direction)

        trial = _line_search(value_only, x, f, direction, slope)
        if trial is None:
            # Line search exhausted (flat, non-finite region, or numerical noise).
            return MinimizeResult(x, f, converged=False, n_iterations=iteration)
        x_new, f_new = trial
        f_full, g_new = problem.objective(x_new)
        g_new = np.asarray(g_new, dtype=float)
        if not _is_finite(f_full, g_new):
            # Gradient (or value) went non-finite mid-run; keep the best iterate.
            return MinimizeResult(x, f, converged=False, n_iterations=iteration)
        f_new = f_full
        stalled = f - f_new <= problem.value_tolerance * (1.0 + abs(f_new))

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        # Positive curvature only, with an absolute floor: near-zero gradient
        # differences can pass a purely relative test through underflow and
        # then poison the two-loop recursion with 1/0.
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y) and sy > 1e-300 and float(y @ y) > 0.0:
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > _HISTORY_LENGTH:
                s_hist.pop(0)
                y_hist.pop(0)

        x, f, g = x_new, f_new, g_new
        if stalled:
            converged = bool(np.max(np.abs(g)) <= problem.gradient_tolerance)
            return MinimizeResult(x, f, converged=converged, n_iterations=iteration + 1)

    return MinimizeResult(x, f, converged=False, n_iterations=problem.max_iterations)


def _line_search(value_only, x, f, direction, slope):
    """Armijo line search with an expansion phase (value-only evaluations).

    Backtracks from the unit step until sufficient decrease holds; when the
    unit step already satisfies it, doubles the step while the condition
    keeps holding and the value keeps improving (a badly scaled quasi-Newton
    direction would otherwise freeze progress).  Returns (x, f) at the
    accepted point, or None when no acceptable step exists.
    """

    def evaluate(step):
        x_t = x + step * direction
        f_t = value_only(x_t)
        ok = np.isfinite(f_t) and f_t <= f + _ARMIJO_C1 * step * slope
        return ok, x_t, f_t

    ok, x_t, f_t = evaluate(1.0)
    if ok:
        best = (x_t, f_t)
        step = 1.0
        for _ in range(_MAX_EXPANSIONS):
            step *= 2.0
            ok2, x2, f2 = evaluate(step)
            if ok2 and f2 < best[1]:
                best = (x2, f2)
            else:
                break
        return best
    step = 1.0
    for _ in range(_MAX_BACKTRACKS - 1):
        step *= _BACKTRACK_FACTOR
        ok, x_t, f_t = evaluate(step)
        if ok:
            return x_t, f_t
    return None


def _two_loop_direction(g: np.ndarray, s_hist: list[np.ndarray], y_hist: list[np.ndarray]) -> np.ndarray:
    """Approximate H^-1 g via the standard two-loop recursion."""
    q = g.copy()
    if not s_hist:
        return q
    alphas = []
    rhos = [1.0 / float(y @ s) for s, y in zip(s_hist, y_hist)]
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    s_last, y_last = s_hist[-1], y_hist[-1]
    gamma = float(s_last @ y_last) / float(y_last @ y_last)
    q *= gamma
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def multistart_minimize(
    objective: Objective,
    starts: Sequence[np.ndarray],
    max_iterations: int = 200,
    gradient_tolerance: float = 1e-6,
    value_tolerance: float = 1e-9,
    value_objective: Callable[[np.ndarray], float] | None = None,
) -> MinimizeResult:
    """Run :func:`minimize` from every start and keep the lowest finite value.

    Starts whose objective is non-finite at the start point are skipped.
    Raises :class:`OptimizationError` when every start fails.
    """
    if len(starts) == 0:
        raise ValueError("at least one start point is required")
    best: MinimizeResult | None = None
    for start in starts:
        result = minimize(
            MinimizeProblem(
                objective=objective,
                initial_point=np.asarray(start, dtype=float),
                max_iterations=max_iterations,
                gradient_tolerance=gradient_tolerance,
                value_tolerance=value_tolerance,
                value_objective=value_objective,
            )
        )
        if not np.isfinite(result.min_value):
            continue
        if best is None or result.min_value < best.min_value:
            best = result
    if best is None:
        raise OptimizationError("all %d starts failed to produce a finite value" % len(starts))
    return best
