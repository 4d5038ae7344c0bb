"""Datasets: synthetic clusters, CSV/IDX ingestion, PCA and preprocessing."""
from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .angles import pad_to_power_of_two
from .errors import DatasetFormatError, DimensionError, InfeasibleSpecError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2:
            raise DimensionError(f"points must be 2-D, got shape {points.shape}")
        labels = np.asarray(self.labels)
        if len(labels) != len(points):
            raise DimensionError(f"{len(points)} points but {len(labels)} labels")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def with_step(self, step: dict, **changes) -> Dataset:
        chain = list(self.provenance.get("steps", [])) + [step]
        return replace(self, provenance={**self.provenance, "steps": chain}, **changes)

    def subset(self, indices) -> Dataset:
        indices = np.asarray(indices)
        return replace(self, points=self.points[indices], labels=self.labels[indices])


# ------------------------------------------------------------------ synthetic

@dataclass(frozen=True)
class SyntheticSpec:
    k: int
    d: int
    n_per: int = 10
    min_sep: float = 0.3
    variance: float = 0.05
    radius: float = 1.0
    seed: int = 0
    variance_is_std: bool = False
    ball_for_points: bool = True
    max_tries: int = 100_000

    def __post_init__(self):
        if self.k < 1 or self.d < 1 or self.n_per < 1:
            raise ValueError("k, d and n_per must be positive")
        if self.min_sep <= 0 or self.variance <= 0 or self.radius <= 0:
            raise ValueError("min_sep, variance and radius must be positive")

    @property
    def sigma(self) -> float:
        return self.variance if self.variance_is_std else math.sqrt(self.variance)


def _uniform_in_ball(rng: np.random.Generator, d: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    return direction * radius * rng.random() ** (1.0 / d)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """k well-separated centroids in the ball, ``n_per`` Gaussian points around each.

    Points outside the ball are redrawn (when ``ball_for_points``), not
    projected.  Labels are ``0..k-1`` in centroid order.
    """
    rng = np.random.default_rng(spec.seed)
    centroids: list[np.ndarray] = []
    tries = 0
    while len(centroids) < spec.k:
        tries += 1
        if tries > spec.max_tries:
            raise InfeasibleSpecError(
                f"placed {len(centroids)} of {spec.k} centroids at separation "
                f">= {spec.min_sep} within {spec.max_tries} draws")
        candidate = _uniform_in_ball(rng, spec.d, spec.radius)
        if all(np.linalg.norm(candidate - c) >= spec.min_sep for c in centroids):
            centroids.append(candidate)

    points = np.empty((spec.k * spec.n_per, spec.d))
    labels = np.repeat(np.arange(spec.k), spec.n_per)
    for row, label in enumerate(labels):
        for _ in range(spec.max_tries):
            point = centroids[label] + spec.sigma * rng.standard_normal(spec.d)
            if not spec.ball_for_points or np.linalg.norm(point) <= spec.radius:
                break
        else:
            raise InfeasibleSpecError(f"could not draw point {row} inside the ball")
        points[row] = point
    provenance = {"source": "synthetic",
                  "params": {"k": spec.k, "d": spec.d, "n_per": spec.n_per,
                             "min_sep": spec.min_sep, "variance": spec.variance,
                             "radius": spec.radius, "seed": spec.seed,
                             "variance_is_std": spec.variance_is_std,
                             "ball_for_points": spec.ball_for_points},
                  "centroids": np.array(centroids).tolist()}
    return Dataset(points, labels, provenance)


# ------------------------------------------------------------------------ PCA

@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    axes: np.ndarray  # (q, D), orthonormal rows
    variances: np.ndarray

    @property
    def q(self) -> int:
        return len(self.axes)


def fit_pca(points, q: int, rank_tol: float = 1e-12) -> PcaModel:
    """Top-q eigenvectors of the sample covariance.

    Axes whose variance is numerically zero are dropped, so ``model.q`` can be
    smaller than ``q`` for degenerate data.  Each axis is signed so its
    largest-magnitude component is positive.
    """
    points = np.asarray(points, dtype=float)
    n, dim = points.shape
    if q > dim:
        raise DimensionError(f"cannot keep {q} axes of {dim}-dimensional data")
    if n < q + 1:
        raise DimensionError(f"need at least {q + 1} points for {q} axes, got {n}")
    mean = points.mean(axis=0)
    centered = points - mean
    cov = centered.T @ centered / (n - 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1][:q]
    values, vectors = np.clip(values[order], 0.0, None), vectors[:, order].T
    keep = values > rank_tol * values[0] if len(values) else values > 0
    values, vectors = values[keep], vectors[keep]
    signs = np.sign(vectors[np.arange(len(vectors)), np.argmax(np.abs(vectors), axis=1)])
    return PcaModel(mean, vectors * signs[:, None], values)


def apply_pca(model: PcaModel, points) -> np.ndarray:
    return (np.asarray(points, dtype=float) - model.mean) @ model.axes.T


def reconstruct_pca(model: PcaModel, projected) -> np.ndarray:
    return np.asarray(projected) @ model.axes + model.mean


def pca_dataset(ds: Dataset, q: int) -> tuple[Dataset, PcaModel]:
    """Fit PCA on ``ds`` itself and project it to ``q`` dimensions."""
    model = fit_pca(ds.points, q)
    step = {"op": "pca", "q": q, "kept": model.q, "fit_on": "this dataset", "n_fit": len(ds)}
    return ds.with_step(step, points=apply_pca(model, ds.points)), model


# -------------------------------------------------------------- preprocessing

def nonnegativity_shift(ds: Dataset, shift=None) -> Dataset:
    """Translate so every coordinate's minimum is 0 (only negative minima move).

    Pass ``shift`` (e.g. from :func:`shift_for`) to apply one translation
    consistently to a training and a test set.
    """
    if shift is None:
        shift = shift_for(ds)
    shift = np.asarray(shift, dtype=float)
    return ds.with_step({"op": "nonnegativity_shift", "shift": shift.tolist()},
                        points=ds.points + shift)


def shift_for(*datasets: Dataset) -> np.ndarray:
    """Per-coordinate translation making every point of every dataset nonnegative."""
    lows = np.min([ds.points.min(axis=0) for ds in datasets], axis=0)
    return np.maximum(-lows, 0.0)


def pad_dataset(ds: Dataset) -> Dataset:
    """Zero-pad features to the next power of 2 (no-op if already one)."""
    padded = pad_to_power_of_two(ds.points)
    if padded.shape[1] == ds.dimension:
        return ds
    return ds.with_step({"op": "pad", "from": ds.dimension, "to": padded.shape[1]},
                        points=padded)


def sample_per_class(ds: Dataset, per_class: int, seed: int) -> Dataset:
    """Stratified sample of ``per_class`` points from every class, without replacement."""
    rng = np.random.default_rng(seed)
    chosen = []
    for label in np.unique(ds.labels):
        members = np.flatnonzero(ds.labels == label)
        if len(members) < per_class:
            raise DatasetFormatError(f"class {label!r} has only {len(members)} points")
        chosen.append(rng.choice(members, per_class, replace=False))
    indices = np.concatenate(chosen)
    sub = ds.subset(indices)
    return sub.with_step({"op": "sample_per_class", "per_class": per_class, "seed": seed})


# ---------------------------------------------------------------------- files

def _parse_label(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def load_csv(path, label_column: str = "label", pad: bool = True) -> Dataset:
    """Header row, numeric feature columns and one label column."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        if label_column not in header:
            raise DatasetFormatError(f"{path}: no column named {label_column!r} in header")
        label_at = header.index(label_column)
        features = [name for i, name in enumerate(header) if i != label_at]
        points, labels = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: row {line} has {len(row)} fields, header has {len(header)}")
            values = []
            for i, cell in enumerate(row):
                if i == label_at:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: row {line}, column {header[i]!r}: "
                        f"non-numeric value {cell!r}") from None
            points.append(values)
            labels.append(_parse_label(row[label_at]))
    if not points:
        raise DatasetFormatError(f"{path}: no data rows")
    label_array = np.array(labels, dtype=object)
    if all(isinstance(v, int) for v in labels):
        label_array = np.array(labels, dtype=int)
    ds = Dataset(np.array(points), label_array,
                 {"source": str(path), "features": features, "label_column": label_column})
    return pad_dataset(ds) if pad else ds


def _format_float(v: float) -> str:
    return repr(float(v))


def write_csv(ds: Dataset, path_or_file, label_column: str = "label") -> None:
    """Inverse of :func:`load_csv`; floats are written with ``repr`` so they round-trip."""
    names = [f"x{i}" for i in range(ds.dimension)]
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + [label_column])
        for point, label in zip(ds.points, ds.labels):
            writer.writerow([_format_float(v) for v in point] + [label])
    finally:
        if own:
            fh.close()


def _read_maybe_gzip(path) -> bytes:
    raw = Path(path).read_bytes()
    return gzip.decompress(raw) if raw[:2] == b"\x1f\x8b" else raw


def _idx_header(raw: bytes, magic: int, ndim: int, path) -> tuple[int, ...]:
    head = 4 + 4 * ndim
    if len(raw) < 4:
        raise DatasetFormatError(f"{path}: truncated IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise DatasetFormatError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < head:
        raise DatasetFormatError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    if len(raw) - head != math.prod(dims):
        raise DatasetFormatError(
            f"{path}: {len(raw) - head} data bytes, header declares {math.prod(dims)}")
    return dims


def load_idx(images_path, labels_path) -> Dataset:
    """MNIST-style IDX pair (optionally gzipped); pixels scaled to [0, 1]."""
    images_raw = _read_maybe_gzip(images_path)
    labels_raw = _read_maybe_gzip(labels_path)
    count, rows, cols = _idx_header(images_raw, IDX_IMAGES_MAGIC, 3, images_path)
    (label_count,) = _idx_header(labels_raw, IDX_LABELS_MAGIC, 1, labels_path)
    if count != label_count:
        raise DatasetFormatError(f"{count} images but {label_count} labels")
    pixels = np.frombuffer(images_raw, dtype=np.uint8, offset=16).reshape(count, rows * cols)
    labels = np.frombuffer(labels_raw, dtype=np.uint8, offset=8).astype(int)
    return Dataset(pixels / 255.0, labels,
                   {"source": [str(images_path), str(labels_path)], "image_shape": [rows, cols]})


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path,
              compress: bool = False) -> None:
    """Write uint8 images ``(count, rows, cols)`` and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    blobs = [(images_path, struct.pack(">4I", IDX_IMAGES_MAGIC, count, rows, cols) + images.tobytes()),
             (labels_path, struct.pack(">2I", IDX_LABELS_MAGIC, len(labels)) + labels.tobytes())]
    for path, blob in blobs:
        if compress:
            blob = gzip.compress(blob, mtime=0)
        Path(path).write_bytes(blob)


# ------------------------------------------------------------ bundled samples

def _bundled(name: str):
    return resources.files("qnc") / "datasets" / name


def bundled_iris() -> Dataset:
    """Fisher's IRIS data, 150 points, features in centimetres."""
    with resources.as_file(_bundled("iris.csv")) as path:
        ds = load_csv(path, label_column="species")
    return replace(ds, provenance={**ds.provenance, "source": "bundled:iris.csv"})


def bundled_mnist() -> Dataset:
    """5000 MNIST training images (500 per digit) as 784-dimensional points."""
    with resources.as_file(_bundled("mnist5k-images-idx3-ubyte.gz")) as images, \
            resources.as_file(_bundled("mnist5k-labels-idx1-ubyte.gz")) as labels:
        ds = load_idx(images, labels)
    return replace(ds, provenance={**ds.provenance, "source": "bundled:mnist5k"})


def mnist_benchmark(samples_per_class: int = 20, q: int = 8, seed: int = 0) -> Dataset:
    """Seeded stratified MNIST sample projected by PCA fitted on that sample."""
    ds = sample_per_class(bundled_mnist(), samples_per_class, seed)
    projected, _ = pca_dataset(ds, q)
    return pad_dataset(projected)


__all__ = [
    "Dataset", "SyntheticSpec", "PcaModel", "generate_synthetic", "fit_pca", "apply_pca",
    "reconstruct_pca", "pca_dataset", "nonnegativity_shift", "pad_dataset", "sample_per_class",
    "load_csv", "write_csv", "load_idx", "write_idx", "bundled_iris", "bundled_mnist",
    "mnist_benchmark", "IDX_IMAGES_MAGIC", "IDX_LABELS_MAGIC",
]
