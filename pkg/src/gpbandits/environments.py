"""Reward oracles: synthetic benchmark surfaces, the wheel bandit, and
snapshot-CSV-backed sensor environments.

Every environment is an immutable finite arm collection with noise-free true
payoffs; pulling an arm returns the noisy reward together with the noise-free
simple regret against the best arm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .acquisition import CandidateSet
from .exceptions import IngestionError

__all__ = [
    "Environment",
    "SnapshotDataset",
    "cosine_value",
    "michalewicz_value",
    "modified_michalewicz_value",
    "wheel_value",
    "make_cosine",
    "make_michalewicz",
    "make_modified_michalewicz",
    "make_wheel",
    "load_snapshot_csv",
    "write_snapshot_csv",
    "merge_snapshots",
    "make_sensor_env",
    "make_snapshot_fixture",
]


@dataclass(eq=False)
class Environment:
    """A finite bandit problem: arms, true payoffs, and pull noise."""

    name: str
    candidates: CandidateSet
    true_values: np.ndarray
    noise_std: float
    beta_cardinality: float = 0.0  # |D| used by the round-indexed UCB schedule

    def __post_init__(self) -> None:
        self.true_values = np.asarray(self.true_values, dtype=float)
        if self.true_values.shape[0] != len(self.candidates):
            raise ValueError("true_values and candidates have mismatched lengths")
        if not np.all(np.isfinite(self.true_values)):
            raise ValueError("true payoffs must be finite")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.beta_cardinality <= 0:
            self.beta_cardinality = float(len(self.candidates))
        self._index = {arm_id: i for i, arm_id in enumerate(self.candidates.ids)}
        self.optimum = float(self.true_values.max())

    def __len__(self) -> int:
        return len(self.candidates)

    def arm_index(self, arm_id) -> int:
        try:
            return self._index[arm_id]
        except KeyError:
            raise KeyError(f"unknown arm id {arm_id!r} in environment {self.name!r}") from None

    def simple_regret(self, arm_id) -> float:
        """Noise-free gap f(x*) - f(x) for the given arm."""
        return self.optimum - float(self.true_values[self.arm_index(arm_id)])

    def pull(self, arm_id, rng: np.random.Generator) -> tuple[float, float]:
        """Observe a noisy reward; returns (reward, simple regret).

        The regret is computed from the noise-free payoff, not the observed
        reward.
        """
        i = self.arm_index(arm_id)
        reward = float(self.true_values[i])
        if self.noise_std > 0:
            reward += self.noise_std * rng.standard_normal()
        return reward, self.optimum - float(self.true_values[i])


# ----------------------------------------------------------------------
# Synthetic surfaces on [0, 1]^2
# ----------------------------------------------------------------------


def cosine_value(x1, x2):
    """1 - [u^2 + v^2 - 0.3 cos(3 pi u) - 0.3 cos(3 pi v)], u = 1.6 x1 - 0.5, v = 1.6 x2 - 0.5."""
    u = 1.6 * np.asarray(x1, dtype=float) - 0.5
    v = 1.6 * np.asarray(x2, dtype=float) - 0.5
    return 1.0 - (u * u + v * v - 0.3 * np.cos(3.0 * np.pi * u) - 0.3 * np.cos(3.0 * np.pi * v))


def michalewicz_value(x1, x2):
    """sin(pi x1) sin^20(pi x1^2) + sin(pi x2) sin^20(2 pi x2^2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return np.sin(np.pi * x1) * np.sin(np.pi * x1 * x1) ** 20 + np.sin(np.pi * x2) * np.sin(
        2.0 * np.pi * x2 * x2
    ) ** 20


def modified_michalewicz_value(x1, x2):
    """sin(pi x1) sin^20(2 pi x1^2) + sin(pi x2) sin^20(3 pi x2^2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return np.sin(np.pi * x1) * np.sin(2.0 * np.pi * x1 * x1) ** 20 + np.sin(np.pi * x2) * np.sin(
        3.0 * np.pi * x2 * x2
    ) ** 20


def wheel_value(x, y, rho: float):
    """Wheel payoff on the unit disk.

    Inner disk (r <= rho) pays 0.2; outer-ring quadrants pay 1 (upper right),
    0.05 (upper left), 0.1 (lower right), and 0 (lower left).  Quadrant
    boundaries go to the right/upper side (coordinate >= 0).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    quadrant = np.select(
        [(x >= 0) & (y >= 0), (x < 0) & (y >= 0), (x >= 0) & (y < 0)],
        [1.0, 0.05, 0.1],
        default=0.0,
    )
    return np.where(r <= rho, 0.2, quadrant)


def _square_grid(grid_n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Row-major (grid_n^2, 2) nodes of the inclusive-endpoint square grid."""
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    axis = np.linspace(lo, hi, grid_n)
    a, b = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def _surface_env(name: str, fn, grid_n: int, noise_std: float) -> Environment:
    grid = _square_grid(grid_n)
    values = fn(grid[:, 0], grid[:, 1])
    candidates = CandidateSet(contexts=grid, ids=list(range(grid.shape[0])))
    return Environment(name=name, candidates=candidates, true_values=values, noise_std=noise_std)


def make_cosine(grid_n: int = 50, noise_std: float = 1e-4) -> Environment:
    """Cosine surface on a uniform grid over [0, 1]^2."""
    return _surface_env("cosine", cosine_value, grid_n, noise_std)


def make_michalewicz(grid_n: int = 50, noise_std: float = 1e-4) -> Environment:
    """Michalewicz surface: large flat regions plus one deep narrow well."""
    return _surface_env("michalewicz", michalewicz_value, grid_n, noise_std)


def make_modified_michalewicz(grid_n: int = 50, noise_std: float = 1e-4) -> Environment:
    """Michalewicz variant with several extreme payoff islands."""
    return _surface_env("modified_michalewicz", modified_michalewicz_value, grid_n, noise_std)


def make_wheel(rho: float, grid_n: int = 70, noise_std: float = 1e-3) -> Environment:
    """Wheel bandit: grid nodes of [-1, 1]^2 restricted to the unit disk."""
    if not (0.0 < rho < 1.0):
        raise ValueError("rho must lie in (0, 1)")
    grid = _square_grid(grid_n, -1.0, 1.0)
    inside = np.hypot(grid[:, 0], grid[:, 1]) <= 1.0
    grid = grid[inside]
    values = wheel_value(grid[:, 0], grid[:, 1], rho)
    candidates = CandidateSet(contexts=grid, ids=list(range(grid.shape[0])))
    return Environment(
        name=f"wheel_rho{rho:g}", candidates=candidates, true_values=values, noise_std=noise_std
    )


# ----------------------------------------------------------------------
# Snapshot-CSV sensor environments
# ----------------------------------------------------------------------

_HEADERS = {
    ("sensor_id", "x", "y", "value"): (2, False),
    ("sensor_id", "x", "y", "z", "value"): (3, False),
    ("snapshot", "sensor_id", "x", "y", "value"): (2, True),
    ("snapshot", "sensor_id", "x", "y", "z", "value"): (3, True),
}


@dataclass(eq=False)
class SnapshotDataset:
    """Sensor contexts plus one value vector per snapshot."""

    sensor_ids: list
    contexts: np.ndarray  # (M, d)
    values: np.ndarray  # (S, M)
    snapshot_labels: list
    n_dropped_rows: int = 0
    n_dropped_sensors: int = 0

    def __post_init__(self) -> None:
        self.contexts = np.atleast_2d(np.asarray(self.contexts, dtype=float))
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.contexts.shape[0]:
            raise ValueError("values and contexts have mismatched sensor counts")
        if self.values.shape[0] != len(self.snapshot_labels):
            raise ValueError("values and snapshot_labels have mismatched snapshot counts")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("snapshot values must be finite")

    @property
    def n_sensors(self) -> int:
        return self.contexts.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.contexts.shape[1]


def _parse_cell(text: str, line_no: int, column: str) -> float:
    text = text.strip()
    if text == "" or text.lower() == "nan":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise IngestionError(f"line {line_no}: non-numeric {column} value {text!r}") from None


def load_snapshot_csv(path, dims: int | None = None) -> SnapshotDataset:
    """Ingest a snapshot CSV file.

    Header is ``sensor_id,x,y,value`` (d=2) or ``sensor_id,x,y,z,value``
    (d=3), optionally with a leading ``snapshot`` column for multi-snapshot
    files.  Blank lines are ignored.  Rows with missing (empty or NaN) cells
    are dropped and counted; sensors absent from some snapshot after the
    drops are removed so every retained sensor has one finite value in every
    snapshot.  A malformed header, a duplicate sensor within a snapshot, a
    sensor whose coordinates differ across rows, or a non-numeric cell raise
    :class:`IngestionError` with the line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh))]
    rows = [(ln, [c.strip() for c in row]) for ln, row in rows if any(c.strip() for c in row)]
    if not rows:
        raise IngestionError(f"{path}: file contains no rows")

    header_ln, header = rows[0]
    key = tuple(c.lower() for c in header)
    if key not in _HEADERS:
        raise IngestionError(
            f"line {header_ln}: malformed header {','.join(header)!r}; expected one of "
            + "; ".join(",".join(h) for h in _HEADERS)
        )
    d, has_snapshot_col = _HEADERS[key]
    if dims is not None and dims != d:
        raise IngestionError(f"line {header_ln}: header declares d={d}, expected d={dims}")

    coords: dict[str, tuple[float, ...]] = {}
    snapshots: dict[str, dict[str, float]] = {}
    labels: list[str] = []
    n_dropped = 0
    for ln, row in rows[1:]:
        if len(row) != len(header):
            raise IngestionError(f"line {ln}: expected {len(header)} fields, got {len(row)}")
        if has_snapshot_col:
            label, sensor_id = row[0], row[1]
            cells = row[2:]
        else:
            label, sensor_id = "0", row[0]
            cells = row[1:]
        parsed = [
            _parse_cell(cell, ln, name) for cell, name in zip(cells, header[-(d + 1) :])
        ]
        if label not in snapshots:
            snapshots[label] = {}
            labels.append(label)
        if sensor_id in snapshots[label]:
            raise IngestionError(f"line {ln}: duplicate sensor_id {sensor_id!r} in snapshot {label!r}")
        if any(math.isnan(v) for v in parsed):
            n_dropped += 1
            snapshots[label][sensor_id] = math.nan  # remembered so duplicates still error
            continue
        xyz, value = tuple(parsed[:-1]), parsed[-1]
        if sensor_id in coords and coords[sensor_id] != xyz:
            raise IngestionError(
                f"line {ln}: sensor_id {sensor_id!r} has inconsistent coordinates "
                f"{xyz} vs {coords[sensor_id]}"
            )
        coords[sensor_id] = xyz
        snapshots[label][sensor_id] = value

    kept = [
        sid
        for sid in coords
        if all(sid in snap and not math.isnan(snap[sid]) for snap in snapshots.values())
    ]
    if not kept:
        raise IngestionError(f"{path}: no sensor has a finite value in every snapshot")
    all_ids = set(coords) | {sid for snap in snapshots.values() for sid in snap}
    n_dropped_sensors = len(all_ids) - len(kept)

    contexts = np.array([coords[sid] for sid in kept])
    values = np.array([[snapshots[label][sid] for sid in kept] for label in labels])
    return SnapshotDataset(
        sensor_ids=kept,
        contexts=contexts,
        values=values,
        snapshot_labels=labels,
        n_dropped_rows=n_dropped,
        n_dropped_sensors=n_dropped_sensors,
    )


def write_snapshot_csv(dataset: SnapshotDataset, path) -> None:
    """Write a dataset in the multi-snapshot schema (floats survive a round trip)."""
    d = dataset.dim
    header = ["snapshot", "sensor_id", "x", "y", "value"] if d == 2 else [
        "snapshot", "sensor_id", "x", "y", "z", "value"
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s, label in enumerate(dataset.snapshot_labels):
            for i, sid in enumerate(dataset.sensor_ids):
                writer.writerow(
                    [label, sid]
                    + [repr(float(c)) for c in dataset.contexts[i]]
                    + [repr(float(dataset.values[s, i]))]
                )


def merge_snapshots(datasets) -> SnapshotDataset:
    """Concatenate single-snapshot datasets (one file per snapshot) into one.

    Sensor sets and coordinates must agree exactly.
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("merge_snapshots requires at least one dataset")
    first = datasets[0]
    for ds in datasets[1:]:
        if ds.sensor_ids != first.sensor_ids or not np.array_equal(ds.contexts, first.contexts):
            raise IngestionError("snapshot files disagree on the sensor set or coordinates")
    labels = []
    seen = set()
    for k, ds in enumerate(datasets):
        for label in ds.snapshot_labels:
            unique = label if label not in seen else f"{label}#{k}"
            seen.add(unique)
            labels.append(unique)
    return SnapshotDataset(
        sensor_ids=first.sensor_ids,
        contexts=first.contexts,
        values=np.vstack([ds.values for ds in datasets]),
        snapshot_labels=labels,
        n_dropped_rows=sum(ds.n_dropped_rows for ds in datasets),
        n_dropped_sensors=sum(ds.n_dropped_sensors for ds in datasets),
    )


def make_sensor_env(
    dataset: SnapshotDataset,
    snapshot_index: int,
    noise_std: float = 1e-4,
    partial_context: bool = False,
) -> Environment:
    """One bandit problem per snapshot: arms are sensors, payoffs are readings.

    ``partial_context`` drops the last context dimension (elevation) of a
    d=3 dataset.  The round-indexed UCB cardinality is the context dimension,
    as appropriate for dataset-backed contextual problems.
    """
    if not (0 <= snapshot_index < dataset.n_snapshots):
        raise IndexError(
            f"snapshot_index {snapshot_index} out of range [0, {dataset.n_snapshots})"
        )
    contexts = dataset.contexts
    if partial_context:
        if dataset.dim < 3:
            raise ValueError("partial_context requires a d=3 dataset")
        contexts = contexts[:, :2]
    candidates = CandidateSet(contexts=contexts, ids=list(dataset.sensor_ids))
    return Environment(
        name=f"sensor[{dataset.snapshot_labels[snapshot_index]}]",
        candidates=candidates,
        true_values=dataset.values[snapshot_index].copy(),
        noise_std=noise_std,
        beta_cardinality=float(contexts.shape[1]),
    )


def make_snapshot_fixture(
    n_sensors: int = 20,
    n_snapshots: int = 10,
    seed: int = 7,
    extreme_value: float = 5.0,
) -> SnapshotDataset:
    """Synthetic sensor dataset with one planted extreme sensor per snapshot.

    Background readings are a smooth spatial field plus small perturbations
    (roughly within [0.5, 1.5]); the planted sensor reads ``extreme_value``.
    Which sensor is extreme rotates across snapshots.
    """
    rng = np.random.default_rng(seed)
    contexts = rng.uniform(0.0, 1.0, size=(n_sensors, 2))
    extremes = rng.permutation(n_sensors)
    values = np.empty((n_snapshots, n_sensors))
    for s in range(n_snapshots):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        background = 1.0 + 0.3 * np.sin(
            2.0 * np.pi * (contexts[:, 0] + 0.5 * contexts[:, 1]) + phase
        )
        background += 0.05 * rng.standard_normal(n_sensors)
        background[extremes[s % n_sensors]] = extreme_value + 0.1 * rng.standard_normal()
        values[s] = background
    return SnapshotDataset(
        sensor_ids=list(range(n_sensors)),
        contexts=contexts,
        values=values,
        snapshot_labels=[str(s) for s in range(n_snapshots)],
    )
