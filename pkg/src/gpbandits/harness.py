"""Benchmark harness: seeded trials, regret accounting, aggregation,
iteration timing, and result persistence.

A trial initializes the history with a few uniformly chosen arms, then loops:
fit the GP, score every candidate under the configured acquisition (with the
likelihood-ratio pipeline refreshed each round for the weighted UCB), pull
the argmax arm, append the observation.  Initial pulls are excluded from the
regret curves; the round counter starts after initialization.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import (
    AcquisitionConfig,
    CandidateSet,
    compute_likelihood_ratio,
    score_ei,
    score_gpucb,
    score_lwucb,
    score_ts,
    score_vucb,
    select_next_arm,
)
from .environments import Environment
from .gp import FitConfig, GpHyperparams, History, gp_fit, gp_predict

__all__ = [
    "TrialConfig",
    "TrialRecord",
    "AggregateCurves",
    "run_trial",
    "run_experiment",
    "derive_trial_seed",
    "aggregate",
    "time_iterations",
    "persist_results",
    "load_results",
    "trial_config_summary",
    "MANIFEST_SCHEMA_VERSION",
]

MANIFEST_SCHEMA_VERSION = 1


@dataclass
class TrialConfig:
    """One trial: environment, acquisition, horizon, and reproducibility knobs.

    ``fixed_noise`` is a noise standard deviation; when set, the GP's noise
    variance is fixed to its square instead of being learned.
    """

    environment: Environment
    acquisition: AcquisitionConfig
    horizon: int
    n_init: int = 3
    seed: int = 0
    normalize_contexts: bool = True
    fixed_noise: float | None = None
    warm_start: bool = False
    gp_restarts: int = 8

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")


@dataclass
class TrialRecord:
    """Per-round traces of one trial; all arrays have length ``horizon``."""

    arm_ids: list
    rewards: np.ndarray
    simple_regrets: np.ndarray
    cumulative_regrets: np.ndarray
    seconds: np.ndarray
    final_hyperparams: GpHyperparams
    seed: int


@dataclass
class AggregateCurves:
    """Pointwise median and median absolute deviation of cumulative regret."""

    median: np.ndarray
    mad: np.ndarray
    n_trials: int


def _normalize_contexts(X: np.ndarray) -> np.ndarray:
    """Map each dimension to [0, 1] over the candidate bounding box."""
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span = np.where(span > 0, span, 1.0)
    return (X - lo) / span


def _scores_for_round(kind, cfg, model, mean, std, t, cand, best_reward, cardinality, acq_rng):
    acq = cfg.acquisition
    if kind == "v_ucb":
        return score_vucb(mean, std, acq.kappa)
    if kind == "gp_ucb":
        return score_gpucb(mean, std, t, cardinality, acq.delta)
    if kind == "ei":
        return score_ei(mean, std, best_reward, acq.xi)
    if kind == "ts":
        return score_ts(model, cand, acq_rng)
    field = compute_likelihood_ratio(model, cand, acq.n_gmm, acq_rng, acq.prior_density)
    return score_lwucb(mean, std, field, cand, acq.kappa)


def run_trial(cfg: TrialConfig) -> TrialRecord:
    """Run one seeded trial; deterministic given ``cfg`` (timings aside).

    The initial arms are drawn uniformly without replacement from a stream
    that depends only on the seed, so different acquisition configs share
    identical initializations for the same seed.
    """
    env = cfg.environment
    m = len(env)
    if cfg.n_init > m:
        raise ValueError(f"n_init={cfg.n_init} exceeds the {m} available arms")

    init_ss, noise_ss, fit_ss, acq_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    init_rng = np.random.default_rng(init_ss)
    noise_rng = np.random.default_rng(noise_ss)
    fit_rng = np.random.default_rng(fit_ss)
    acq_rng = np.random.default_rng(acq_ss)

    X = env.candidates.contexts
    Xn = _normalize_contexts(X) if cfg.normalize_contexts else X
    cand = CandidateSet(contexts=Xn, ids=list(env.candidates.ids))

    history = History()
    best_reward = -np.inf
    for i in init_rng.choice(m, size=cfg.n_init, replace=False):
        reward, _ = env.pull(env.candidates.ids[int(i)], init_rng)
        history.add(Xn[int(i)], reward)
        best_reward = max(best_reward, reward)

    fixed_noise_var = None if cfg.fixed_noise is None else float(cfg.fixed_noise) ** 2
    cardinality = cfg.acquisition.cardinality_for_beta
    if cardinality is None:
        cardinality = env.beta_cardinality
    kind = cfg.acquisition.kind

    arm_ids: list = []
    rewards = np.empty(cfg.horizon)
    regrets = np.empty(cfg.horizon)
    cums = np.empty(cfg.horizon)
    seconds = np.empty(cfg.horizon)
    cum = 0.0
    model = None
    for t in range(1, cfg.horizon + 1):
        tic = time.perf_counter()
        fit_cfg = FitConfig(
            n_restarts=cfg.gp_restarts,
            seed=int(fit_rng.integers(0, 2**63 - 1)),
            fixed_noise_variance=fixed_noise_var,
            warm_start=model.hyperparams if (cfg.warm_start and model is not None) else None,
        )
        model = gp_fit(history, fit_cfg)
        mean, var = gp_predict(model, Xn)
        std = np.sqrt(var)
        scores = _scores_for_round(
            kind, cfg, model, mean, std, t, cand, best_reward, cardinality, acq_rng
        )
        idx = select_next_arm(scores)
        arm_id = env.candidates.ids[idx]
        reward, regret = env.pull(arm_id, noise_rng)
        history.add(Xn[idx], reward)
        best_reward = max(best_reward, reward)
        seconds[t - 1] = time.perf_counter() - tic

        arm_ids.append(arm_id)
        rewards[t - 1] = reward
        regrets[t - 1] = regret
        cum += regret
        cums[t - 1] = cum

    return TrialRecord(
        arm_ids=arm_ids,
        rewards=rewards,
        simple_regrets=regrets,
        cumulative_regrets=cums,
        seconds=seconds,
        final_hyperparams=model.hyperparams,
        seed=cfg.seed,
    )


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    """Per-trial seed: SeedSequence(master, spawn_key=(index,)) folded to 64 bits.

    Stable in the trial index, so growing an experiment never perturbs
    earlier trials.
    """
    state = np.random.SeedSequence(master_seed, spawn_key=(trial_index,)).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def _run_indexed_trial(args: tuple[int, TrialConfig]):
    index, cfg = args
    try:
        return index, run_trial(cfg), None
    except Exception as exc:  # recorded, not silently substituted
        return index, None, f"{type(exc).__name__}: {exc}"


def run_experiment(
    cfg: TrialConfig,
    n_trials: int,
    n_jobs: int = 1,
    environments=None,
) -> tuple[list[TrialRecord], list[tuple[int, str]]]:
    """Run ``n_trials`` independent trials with seeds derived from ``cfg.seed``.

    ``environments`` (optional) supplies one environment per snapshot; trial
    ``i`` then runs on ``environments[i % len(environments)]``.  Per-trial
    failures are collected and reported alongside the surviving records;
    record order follows the trial index regardless of ``n_jobs``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    env_cycle = list(environments) if environments is not None else [cfg.environment]
    jobs = [
        (
            i,
            replace(
                cfg,
                seed=derive_trial_seed(cfg.seed, i),
                environment=env_cycle[i % len(env_cycle)],
            ),
        )
        for i in range(n_trials)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_run_indexed_trial, jobs))
    else:
        outcomes = [_run_indexed_trial(job) for job in jobs]
    outcomes.sort(key=lambda item: item[0])

    records: list[TrialRecord] = []
    failures: list[tuple[int, str]] = []
    for index, record, error in outcomes:
        if error is None:
            records.append(record)
        else:
            failures.append((index, error))
    if failures:
        warnings.warn(f"{len(failures)} of {n_trials} trials failed", stacklevel=2)
    return records, failures


def aggregate(records) -> AggregateCurves:
    """Pointwise median and unscaled MAD of the cumulative-regret curves."""
    records = list(records)
    if not records:
        raise ValueError("aggregate requires at least one record")
    horizons = {record.cumulative_regrets.shape[0] for record in records}
    if len(horizons) != 1:
        raise ValueError(f"records have unequal horizons: {sorted(horizons)}")
    curves = np.vstack([record.cumulative_regrets for record in records])
    median = np.median(curves, axis=0)
    mad = np.median(np.abs(curves - median), axis=0)
    return AggregateCurves(median=median, mad=mad, n_trials=len(records))


def time_iterations(
    environment: Environment,
    acquisitions,
    horizon: int,
    n_experiments: int = 10,
    n_init: int = 3,
    master_seed: int = 0,
    normalize_contexts: bool = True,
    fixed_noise: float | None = None,
    gp_restarts: int = 8,
) -> dict[str, float]:
    """Mean wall-clock seconds per iteration for each acquisition config.

    Runs serially (no concurrent trials) so timings are not skewed by
    contention; experiment seeds are shared across configs.
    """
    results: dict[str, float] = {}
    for acq in acquisitions:
        per_round: list[np.ndarray] = []
        for i in range(n_experiments):
            cfg = TrialConfig(
                environment=environment,
                acquisition=acq,
                horizon=horizon,
                n_init=n_init,
                seed=derive_trial_seed(master_seed, i),
                normalize_contexts=normalize_contexts,
                fixed_noise=fixed_noise,
                gp_restarts=gp_restarts,
            )
            per_round.append(run_trial(cfg).seconds)
        results[acq.label()] = float(np.concatenate(per_round).mean())
    return results


def trial_config_summary(cfg: TrialConfig) -> dict:
    """JSON-ready view of a trial configuration (environment by name)."""
    acq = cfg.acquisition
    return {
        "environment": cfg.environment.name,
        "noise_std": cfg.environment.noise_std,
        "n_arms": len(cfg.environment),
        "acquisition": {
            "kind": acq.kind,
            "kappa": acq.kappa,
            "delta": acq.delta,
            "xi": acq.xi,
            "n_gmm": acq.n_gmm,
            "prior_density": acq.prior_density,
            "cardinality_for_beta": acq.cardinality_for_beta,
        },
        "horizon": cfg.horizon,
        "n_init": cfg.n_init,
        "seed": cfg.seed,
        "normalize_contexts": cfg.normalize_contexts,
        "fixed_noise": cfg.fixed_noise,
        "warm_start": cfg.warm_start,
        "gp_restarts": cfg.gp_restarts,
    }


_TRACE_HEADER = ["round", "arm_id", "reward", "simple_regret", "cumulative_regret", "seconds"]


def persist_results(records, curves: AggregateCurves | None, out_dir, config: dict, failures=()) -> Path:
    """Write a result bundle: manifest.json, per-trial traces, aggregate CSV.

    Floats are written with ``repr`` so a round trip through
    :func:`load_results` reconstructs them exactly.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        trials_meta = []
        for i, record in enumerate(records):
            name = f"trial_{i:03d}.csv"
            with open(out / name, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(_TRACE_HEADER)
                for t in range(record.rewards.shape[0]):
                    writer.writerow(
                        [
                            t + 1,
                            record.arm_ids[t],
                            repr(float(record.rewards[t])),
                            repr(float(record.simple_regrets[t])),
                            repr(float(record.cumulative_regrets[t])),
                            repr(float(record.seconds[t])),
                        ]
                    )
            hp = record.final_hyperparams
            trials_meta.append(
                {
                    "index": i,
                    "file": name,
                    "seed": record.seed,
                    "final_hyperparams": {
                        "log_signal_variance": hp.log_signal_variance,
                        "log_lengthscales": [float(v) for v in hp.log_lengthscales],
                        "log_noise_variance": hp.log_noise_variance,
                    },
                }
            )
        if curves is not None:
            with open(out / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["round", "median_cum_regret", "mad"])
                for t in range(curves.median.shape[0]):
                    writer.writerow(
                        [t + 1, repr(float(curves.median[t])), repr(float(curves.mad[t]))]
                    )
        manifest = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "package_version": __version__,
            "config": config,
            "n_trials": len(records),
            "n_failures": len(list(failures)),
            "failures": [{"index": i, "error": msg} for i, msg in failures],
            "trials": trials_meta,
        }
        with open(out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing result bundle under {out}: {exc}") from exc
    return out


def _parse_arm_id(cell: str):
    try:
        return int(cell)
    except ValueError:
        return cell


def load_results(out_dir) -> tuple[list[TrialRecord], AggregateCurves | None, dict]:
    """Re-read a bundle written by :func:`persist_results`."""
    out = Path(out_dir)
    try:
        with open(out / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
        records = []
        for meta in manifest["trials"]:
            rows = []
            with open(out / meta["file"], newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                if header != _TRACE_HEADER:
                    raise OSError(f"unexpected trace header {header} in {meta['file']}")
                rows = list(reader)
            hp_meta = meta["final_hyperparams"]
            records.append(
                TrialRecord(
                    arm_ids=[_parse_arm_id(row[1]) for row in rows],
                    rewards=np.array([float(row[2]) for row in rows]),
                    simple_regrets=np.array([float(row[3]) for row in rows]),
                    cumulative_regrets=np.array([float(row[4]) for row in rows]),
                    seconds=np.array([float(row[5]) for row in rows]),
                    final_hyperparams=GpHyperparams(
                        log_signal_variance=hp_meta["log_signal_variance"],
                        log_lengthscales=np.array(hp_meta["log_lengthscales"]),
                        log_noise_variance=hp_meta["log_noise_variance"],
                    ),
                    seed=meta["seed"],
                )
            )
        curves = None
        aggregate_path = out / "aggregate.csv"
        if aggregate_path.exists():
            with open(aggregate_path, newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                next(reader)
                rows = list(reader)
            curves = AggregateCurves(
                median=np.array([float(row[1]) for row in rows]),
                mad=np.array([float(row[2]) for row in rows]),
                n_trials=manifest["n_trials"],
            )
        return records, curves, manifest
    except OSError as exc:
        raise OSError(f"failed reading result bundle under {out}: {exc}") from exc
