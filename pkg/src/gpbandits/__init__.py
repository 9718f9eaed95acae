"""Gaussian-process bandit optimization with likelihood-weighted UCB.

A numpy/scipy library for multi-armed and contextual bandit problems: GP
regression of the payoff surface, classical acquisition baselines (expected
improvement, posterior sampling, two UCB variants), a likelihood-weighted UCB
that steers exploration toward rare extreme payoffs, benchmark environments,
and a seeded experiment harness with CSV result bundles.
"""

__version__ = "0.1.0"

from .acquisition import (
    ACQUISITION_KINDS,
    AcquisitionConfig,
    CandidateSet,
    LikelihoodRatioField,
    beta_schedule,
    compute_likelihood_ratio,
    score_ei,
    score_gpucb,
    score_lwucb,
    score_ts,
    score_vucb,
    select_next_arm,
)
from .density import GmmModel, Kde1d, gmm_eval, gmm_fit_weighted, kde_eval, kde_fit
from .environments import (
    Environment,
    SnapshotDataset,
    load_snapshot_csv,
    make_cosine,
    make_michalewicz,
    make_modified_michalewicz,
    make_sensor_env,
    make_snapshot_fixture,
    make_wheel,
    merge_snapshots,
    write_snapshot_csv,
)
from .exceptions import (
    FitError,
    GpBanditsError,
    IngestionError,
    NumericsError,
    OptimizationError,
    SelectionError,
)
from .gp import (
    FitConfig,
    GpHyperparams,
    GpModel,
    History,
    gp_fit,
    gp_predict,
    gp_sample_marginal,
    kernel_eval,
    nlml,
    nlml_gradient,
)
from .harness import (
    AggregateCurves,
    TrialConfig,
    TrialRecord,
    aggregate,
    derive_trial_seed,
    load_results,
    persist_results,
    run_experiment,
    run_trial,
    time_iterations,
)
from .optimize import MinimizeProblem, MinimizeResult, minimize, multistart_minimize
