"""Scratch pilot: wheel rho=0.9 ordering sanity check (not shipped)."""
import time

import numpy as np

from gpbandits.acquisition import AcquisitionConfig
from gpbandits.environments import make_wheel
from gpbandits.harness import TrialConfig, aggregate, run_experiment

env = make_wheel(rho=0.9, grid_n=70)
configs = [
    AcquisitionConfig(kind="lw_ucb", kappa=0.5, n_gmm=4),
    AcquisitionConfig(kind="lw_ucb", kappa=1.0, n_gmm=4),
    AcquisitionConfig(kind="lw_ucb", kappa=2.0, n_gmm=4),
    AcquisitionConfig(kind="v_ucb"),
    AcquisitionConfig(kind="gp_ucb"),
    AcquisitionConfig(kind="ei"),
    AcquisitionConfig(kind="ts"),
]
for acq in configs:
    t0 = time.perf_counter()
    cfg = TrialConfig(environment=env, acquisition=acq, horizon=100, seed=0)
    records, failures = run_experiment(cfg, 6, n_jobs=2)
    curves = aggregate(records)
    dt = time.perf_counter() - t0
    print(
        f"{acq.label():18s} median R_100={curves.median[-1]:8.3f} "
        f"mad={curves.mad[-1]:7.3f} failures={len(failures)} ({dt:.0f}s)",
        flush=True,
    )
