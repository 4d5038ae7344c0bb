"""Classical and quantum Nearest Centroid.

Both predictors share the fitted :class:`CentroidModel`; the quantum one swaps
the exact Euclidean distance for :func:`qnc.distance.estimate_distance_trees`,
one circuit estimate per (point, centroid) pair.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .angles import AngleTree, compile_angles, is_power_of_two
from .distance import DistanceEstimate, estimate_distance_trees
from .errors import DimensionError, QncError, ZeroVectorError
from .rng import stream
from .simulator import NoiseSpec

WORKERS_ENV = "QNC_WORKERS"


@dataclass(frozen=True, eq=False)
class CentroidModel:
    classes: tuple
    centroids: np.ndarray
    trees: tuple[AngleTree | None, ...] | None

    @property
    def dimension(self) -> int:
        return self.centroids.shape[1]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.centroids, axis=1)


@dataclass
class PredictionReport:
    """Labels for each point (``None`` when unclassified) and the distances used."""

    classes: tuple
    labels: list
    distances: np.ndarray
    estimates: list[list[DistanceEstimate | None]] | None = None
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def unclassified(self) -> list[int]:
        return [i for i, label in enumerate(self.labels) if label is None]

    def _classified(self, reference: Sequence) -> list[tuple]:
        if len(reference) != len(self.labels):
            raise ValueError("reference and prediction lengths differ")
        return [(r, p) for r, p in zip(reference, self.labels) if p is not None]

    def accuracy(self, reference: Sequence) -> float:
        """Fraction of classified points whose label matches ``reference``."""
        pairs = self._classified(reference)
        if not pairs:
            return float("nan")
        return sum(r == p for r, p in pairs) / len(pairs)

    def confusion(self, reference: Sequence) -> np.ndarray:
        """Rows index the reference class, columns the predicted class."""
        index = {c: i for i, c in enumerate(self.classes)}
        matrix = np.zeros((len(self.classes), len(self.classes)), dtype=int)
        for r, p in self._classified(reference):
            matrix[index[r], index[p]] += 1
        return matrix

    def to_dict(self, reference: Sequence | None = None, reference_name: str = "reference") -> dict:
        out = {
            "classes": [_plain(c) for c in self.classes],
            "labels": [None if p is None else _plain(p) for p in self.labels],
            "distances": [[None if np.isnan(v) else float(v) for v in row] for row in self.distances],
            "unclassified": self.unclassified,
        }
        if self.failures:
            out["failures"] = {str(k): v for k, v in sorted(self.failures.items())}
        if self.estimates is not None:
            out["estimates"] = [[None if e is None else e.to_dict() for e in row]
                                for row in self.estimates]
        if reference is not None:
            out[reference_name] = {"accuracy": self.accuracy(reference),
                                   "confusion": self.confusion(reference).tolist()}
        return out


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


def fit(points, labels) -> CentroidModel:
    """Class means, plus their loader angle trees when the dimension allows."""
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    if points.ndim != 2 or len(points) != len(labels):
        raise DimensionError("points must be (n, d) with one label per point")
    classes = tuple(_plain(c) for c in np.unique(labels))
    if not classes:
        raise ValueError("no training points")
    centroids = np.stack([points[labels == c].mean(axis=0) for c in classes])
    trees = None
    if is_power_of_two(points.shape[1]) and points.shape[1] >= 2:
        trees = tuple(_tree_or_none(c) for c in centroids)
    return CentroidModel(classes, centroids, trees)


def _tree_or_none(v) -> AngleTree | None:
    try:
        return compile_angles(v)
    except ZeroVectorError:
        return None


def _argmin_label(classes, row: np.ndarray):
    # np.argmin returns the first minimum, i.e. the lowest class index on ties.
    return classes[int(np.argmin(row))]


def predict_classical(model: CentroidModel, points) -> PredictionReport:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != model.dimension:
        raise DimensionError(f"expected points of dimension {model.dimension}")
    diff = points[:, None, :] - model.centroids[None, :, :]
    distances = np.sqrt(np.einsum("nkd,nkd->nk", diff, diff))
    labels = [_argmin_label(model.classes, row) for row in distances]
    return PredictionReport(model.classes, labels, distances)


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def predict_quantum(model: CentroidModel, points, shots: int | None,
                    noise: NoiseSpec | None = None, mitigated: bool = True,
                    seed: int | None = 0, workers: int | None = None) -> PredictionReport:
    """Nearest Centroid with every distance estimated on the distance circuit.

    Pair ``(i, j)`` draws from its own stream of ``seed``, so the report is
    identical for any ``workers``.  A point whose estimate fails (for example
    post-selection starvation) is reported as unclassified.
    ``shots=None`` uses exact noiseless overlap probabilities.
    """
    points = np.asarray(points, dtype=float)
    if model.trees is None:
        raise DimensionError(f"dimension {model.dimension} is not a power of 2; pad the data")
    if points.ndim != 2 or points.shape[1] != model.dimension:
        raise DimensionError(f"expected points of dimension {model.dimension}")
    if shots is not None and shots < 1:
        raise ValueError("shots must be >= 1")

    def one_point(i: int):
        tx = _tree_or_none(points[i])
        row: list[DistanceEstimate | None] = []
        for j, ty in enumerate(model.trees):
            if tx is None or ty is None:
                # A zero vector sits at distance |other| from anything.
                other = model.norms[j] if tx is None else np.linalg.norm(points[i])
                row.append(DistanceEstimate(0.0, float(other), 0.0, 0, mitigated))
                continue
            row.append(estimate_distance_trees(tx, ty, shots, noise, mitigated,
                                               rng=stream(seed, i, j)))
        return row

    workers = default_workers() if workers is None else workers
    estimates: list[list[DistanceEstimate | None]] = []
    failures: dict[int, str] = {}

    def guarded(i):
        try:
            return one_point(i), None
        except QncError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    indices = range(len(points))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(guarded, indices))
    else:
        results = [guarded(i) for i in indices]

    k = len(model.classes)
    distances = np.full((len(points), k), np.nan)
    labels: list[Hashable | None] = []
    for i, (row, failure) in enumerate(results):
        if row is None:
            failures[i] = failure
            estimates.append([None] * k)
            labels.append(None)
            continue
        estimates.append(row)
        distances[i] = [e.l_hat for e in row]
        labels.append(_argmin_label(model.classes, distances[i]))
    return PredictionReport(model.classes, labels, distances, estimates, failures)


def agreement(report: PredictionReport, reference: PredictionReport) -> float:
    """Fraction of classified points whose label matches another report's."""
    return report.accuracy(reference.labels)
