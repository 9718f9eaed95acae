"""Command-line entry point.

Experiments are defined in JSON spec files; see the README for the schema
and the ``experiments/`` directory for ready-made specs.  Subcommands::

    gpbandits run <spec.json>                 run all configured acquisitions
    gpbandits bench-runtime <spec.json>       per-iteration runtime table
    gpbandits sweep-gmm <spec.json> --values 2,4,6   mixture-size sweep

Exit codes: 0 success, 1 validation error, 2 partial trial failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .acquisition import ACQUISITION_KINDS, AcquisitionConfig
from .environments import (
    Environment,
    load_snapshot_csv,
    make_cosine,
    make_michalewicz,
    make_modified_michalewicz,
    make_sensor_env,
    make_wheel,
)
from .harness import (
    TrialConfig,
    aggregate,
    persist_results,
    run_experiment,
    time_iterations,
    trial_config_summary,
)

__all__ = ["main", "ExperimentSpec", "SpecError", "load_spec"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARTIAL_FAILURE = 2
EXIT_IO = 3

_ENVIRONMENT_KINDS = ("cosine", "michalewicz", "modified_michalewicz", "wheel", "snapshot_csv")


class SpecError(ValueError):
    """An experiment spec failed validation; the message names the field."""


@dataclass
class ExperimentSpec:
    """Validated experiment definition."""

    name: str
    environment: dict
    acquisitions: list[AcquisitionConfig]
    horizon: int
    n_trials: int
    n_init: int = 3
    seed: int = 0
    normalize_contexts: bool = True
    fixed_noise: float | None = None
    out_dir: str = ""
    n_timing_experiments: int = 10
    base_dir: Path = field(default_factory=Path)

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "environment": self.environment,
            "acquisitions": [vars(a).copy() for a in self.acquisitions],
            "horizon": self.horizon,
            "n_trials": self.n_trials,
            "n_init": self.n_init,
            "seed": self.seed,
            "normalize_contexts": self.normalize_contexts,
            "fixed_noise": self.fixed_noise,
            "out_dir": self.out_dir,
            "n_timing_experiments": self.n_timing_experiments,
        }


def _require(data: dict, key: str, kind, where: str):
    if key not in data:
        raise SpecError(f"{where}: missing required field {key!r}")
    value = data[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SpecError(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _positive_int(data: dict, key: str, where: str, default=None) -> int:
    value = data.get(key, default)
    if value is None:
        raise SpecError(f"{where}: missing required field {key!r}")
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise SpecError(f"{where}.{key}: expected a positive integer, got {value!r}")
    return value


def validate_spec(data: dict, base_dir: Path, source: str = "spec") -> ExperimentSpec:
    """Validate a parsed spec document; raises :class:`SpecError` on problems."""
    if not isinstance(data, dict):
        raise SpecError(f"{source}: top level must be a JSON object")
    env = _require(data, "environment", dict, source)
    env_kind = env.get("kind")
    if env_kind not in _ENVIRONMENT_KINDS:
        raise SpecError(
            f"{source}.environment.kind: unknown environment {env_kind!r}; "
            f"expected one of {_ENVIRONMENT_KINDS}"
        )
    if env_kind == "wheel" and not isinstance(env.get("rho"), (int, float)):
        raise SpecError(f"{source}.environment.rho: wheel environments require a numeric rho")
    if env_kind == "snapshot_csv" and not isinstance(env.get("path"), str):
        raise SpecError(f"{source}.environment.path: snapshot environments require a file path")

    raw_acqs = _require(data, "acquisitions", list, source)
    if not raw_acqs:
        raise SpecError(f"{source}.acquisitions: at least one acquisition is required")
    acquisitions = []
    for i, raw in enumerate(raw_acqs):
        where = f"{source}.acquisitions[{i}]"
        if not isinstance(raw, dict):
            raise SpecError(f"{where}: expected an object")
        kind = raw.get("kind")
        if kind not in ACQUISITION_KINDS:
            raise SpecError(
                f"{where}.kind: unknown acquisition {kind!r}; expected one of {ACQUISITION_KINDS}"
            )
        allowed = {"kind", "kappa", "delta", "xi", "n_gmm", "prior_density", "cardinality_for_beta"}
        unknown = set(raw) - allowed
        if unknown:
            raise SpecError(f"{where}: unknown fields {sorted(unknown)}")
        try:
            acquisitions.append(AcquisitionConfig(**raw))
        except ValueError as exc:
            raise SpecError(f"{where}: {exc}") from exc

    name = data.get("name") or env_kind
    spec = ExperimentSpec(
        name=str(name),
        environment=env,
        acquisitions=acquisitions,
        horizon=_positive_int(data, "horizon", source),
        n_trials=_positive_int(data, "n_trials", source),
        n_init=_positive_int(data, "n_init", source, default=3),
        seed=int(_require(data, "seed", int, source)) if "seed" in data else 0,
        normalize_contexts=bool(data.get("normalize_contexts", True)),
        fixed_noise=None if data.get("fixed_noise") is None else float(data["fixed_noise"]),
        out_dir=str(data.get("out_dir") or f"results/{name}"),
        n_timing_experiments=_positive_int(data, "n_timing_experiments", source, default=10),
        base_dir=base_dir,
    )
    return spec


def load_spec(path) -> ExperimentSpec:
    """Parse and validate a JSON spec file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read spec file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: not valid JSON ({exc})") from None
    return validate_spec(data, base_dir=path.resolve().parent, source=path.name)


def build_environments(spec: ExperimentSpec) -> list[Environment]:
    """Instantiate the spec's environment; sensor datasets yield one per snapshot."""
    env = spec.environment
    kind = env["kind"]
    if kind == "cosine":
        return [make_cosine(env.get("grid_n", 50), env.get("noise_std", 1e-4))]
    if kind == "michalewicz":
        return [make_michalewicz(env.get("grid_n", 50), env.get("noise_std", 1e-4))]
    if kind == "modified_michalewicz":
        return [make_modified_michalewicz(env.get("grid_n", 50), env.get("noise_std", 1e-4))]
    if kind == "wheel":
        return [make_wheel(float(env["rho"]), env.get("grid_n", 70), env.get("noise_std", 1e-3))]
    # snapshot_csv; relative paths resolve against the spec file's directory
    path = Path(env["path"])
    if not path.is_absolute():
        path = spec.base_dir / path
    dataset = load_snapshot_csv(path, dims=env.get("dims"))
    partial = bool(env.get("partial_context", False))
    noise_std = env.get("noise_std", 1e-4)
    index = env.get("snapshot_index")
    if index is not None:
        return [make_sensor_env(dataset, int(index), noise_std, partial)]
    return [
        make_sensor_env(dataset, s, noise_std, partial) for s in range(dataset.n_snapshots)
    ]


def _check_n_gmm(acquisitions, environments) -> None:
    min_arms = min(len(e) for e in environments)
    for acq in acquisitions:
        if acq.kind == "lw_ucb" and acq.n_gmm > min_arms:
            raise SpecError(
                f"acquisition {acq.label()}: n_gmm={acq.n_gmm} exceeds the "
                f"{min_arms} available arms"
            )


def _run_one_acquisition(spec, environments, acq, jobs, out_root):
    cfg = TrialConfig(
        environment=environments[0],
        acquisition=acq,
        horizon=spec.horizon,
        n_init=spec.n_init,
        seed=spec.seed,
        normalize_contexts=spec.normalize_contexts,
        fixed_noise=spec.fixed_noise,
    )
    records, failures = run_experiment(
        cfg, spec.n_trials, n_jobs=jobs, environments=environments
    )
    curves = aggregate(records) if records else None
    config = trial_config_summary(cfg)
    config.update(
        {
            "experiment": spec.name,
            "environment_spec": spec.environment,
            "master_seed": spec.seed,
            "n_trials": spec.n_trials,
            "acquisition_label": acq.label(),
        }
    )
    bundle = persist_results(records, curves, out_root / acq.label(), config, failures)
    return bundle, curves, failures


def cmd_run(spec: ExperimentSpec, jobs: int) -> int:
    environments = build_environments(spec)
    _check_n_gmm(spec.acquisitions, environments)
    out_root = Path(spec.out_dir)
    n_failed = 0
    summary = []
    for acq in spec.acquisitions:
        bundle, curves, failures = _run_one_acquisition(spec, environments, acq, jobs, out_root)
        n_failed += len(failures)
        final = curves.median[-1] if curves is not None else float("nan")
        summary.append((acq.label(), final, str(bundle)))
    width = max(len(label) for label, _, _ in summary)
    print(f"{spec.name}: median cumulative regret at T={spec.horizon} "
          f"({spec.n_trials} trials, seed {spec.seed})")
    for label, final, bundle in summary:
        print(f"  {label:<{width}}  {final:12.6f}  -> {bundle}")
    if n_failed:
        print(f"warning: {n_failed} trials failed", file=sys.stderr)
        return EXIT_PARTIAL_FAILURE
    return EXIT_OK


def cmd_bench_runtime(spec: ExperimentSpec, jobs: int) -> int:
    environments = build_environments(spec)
    _check_n_gmm(spec.acquisitions, environments)
    times = time_iterations(
        environments[0],
        spec.acquisitions,
        horizon=spec.horizon,
        n_experiments=spec.n_timing_experiments,
        n_init=spec.n_init,
        master_seed=spec.seed,
        normalize_contexts=spec.normalize_contexts,
        fixed_noise=spec.fixed_noise,
    )
    out_root = Path(spec.out_dir)
    try:
        out_root.mkdir(parents=True, exist_ok=True)
        csv_path = out_root / "runtime.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["acquisition", "mean_seconds_per_iteration"])
            for label, seconds in times.items():
                writer.writerow([label, f"{seconds:.6f}"])
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    width = max(len(label) for label in times)
    print(f"{spec.name}: mean seconds per iteration "
          f"({spec.n_timing_experiments} experiments, T={spec.horizon})")
    for label, seconds in times.items():
        print(f"  {label:<{width}}  {seconds:.6f}")
    print(f"written to {csv_path}")
    return EXIT_OK


def cmd_sweep_gmm(spec: ExperimentSpec, values: list[int], jobs: int) -> int:
    environments = build_environments(spec)
    templates = [a for a in spec.acquisitions if a.kind == "lw_ucb"]
    if not templates:
        raise SpecError("sweep-gmm requires an lw_ucb acquisition in the spec")
    template = templates[0]
    min_arms = min(len(e) for e in environments)
    for value in values:
        if value < 1 or value > min_arms:
            raise SpecError(
                f"--values: n_gmm={value} out of range [1, {min_arms}] for this environment"
            )
    out_root = Path(spec.out_dir)
    n_failed = 0
    summary = []
    for value in values:
        acq = replace(template, n_gmm=value)
        bundle, curves, failures = _run_one_acquisition(spec, environments, acq, jobs, out_root)
        n_failed += len(failures)
        final = curves.median[-1] if curves is not None else float("nan")
        summary.append((value, final, str(bundle)))
    print(f"{spec.name}: mixture-size sweep, median cumulative regret at T={spec.horizon}")
    for value, final, bundle in summary:
        print(f"  n_gmm={value:<3d}  {final:12.6f}  -> {bundle}")
    if n_failed:
        print(f"warning: {n_failed} trials failed", file=sys.stderr)
        return EXIT_PARTIAL_FAILURE
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpbandits",
        description="GP bandit benchmark runner (see README for the spec-file schema)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("spec", help="path to a JSON experiment spec")
        p.add_argument("--jobs", type=int, default=1, help="concurrent trials (default 1)")
        p.add_argument("--seed", type=int, default=None, help="override the spec's master seed")
        p.add_argument("--out", default=None, help="override the spec's output directory")

    add_common(sub.add_parser("run", help="run every configured acquisition"))
    add_common(sub.add_parser("bench-runtime", help="per-iteration runtime table"))
    sweep = sub.add_parser("sweep-gmm", help="rerun lw_ucb over several mixture sizes")
    add_common(sweep)
    sweep.add_argument(
        "--values",
        required=True,
        help="comma-separated mixture sizes, e.g. 2,4,6",
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = load_spec(args.spec)
        if args.seed is not None:
            spec.seed = args.seed
        if args.out is not None:
            spec.out_dir = args.out
        if args.jobs < 1:
            raise SpecError("--jobs must be a positive integer")
        if args.command == "run":
            return cmd_run(spec, args.jobs)
        if args.command == "bench-runtime":
            return cmd_bench_runtime(spec, args.jobs)
        try:
            values = [int(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise SpecError(f"--values: expected comma-separated integers, got {args.values!r}")
        if not values:
            raise SpecError("--values: at least one mixture size is required")
        return cmd_sweep_gmm(spec, values, args.jobs)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
