"""Classical preprocessing of a vector into the loader's angle tree.

The tree is stored in heap order: node ``k`` (1-based, root ``k = 1``) has
children ``2k`` and ``2k + 1``.  Nodes ``d/2 .. d-1`` sit directly above the
leaves and node ``d/2 + j - 1`` covers coordinates ``2j - 1`` and ``2j``.
Arrays ``r`` and ``theta`` have length ``d - 1`` with ``r[k - 1]`` holding node
``k``, so the loader's layer ``l`` reads the slice ``[2**l - 1, 2**(l+1) - 1)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ZeroVectorError

TWO_PI = 2.0 * math.pi


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AngleTree:
    """Internal-node norms ``r`` and gate angles ``theta`` of a loaded vector."""

    dimension: int
    r: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        d = self.dimension
        if d < 2 or not is_power_of_two(d):
            raise DimensionError(f"dimension must be a power of 2 >= 2, got {d}")
        object.__setattr__(self, "r", _frozen(self.r))
        object.__setattr__(self, "theta", _frozen(self.theta))
        if self.r.shape != (d - 1,) or self.theta.shape != (d - 1,):
            raise DimensionError(f"expected {d - 1} nodes for dimension {d}")

    @property
    def norm(self) -> float:
        """Euclidean norm of the source vector (the root of the norm tree)."""
        return float(self.r[0])

    @property
    def levels(self) -> int:
        return self.dimension.bit_length() - 1

    def level_angles(self, level: int) -> np.ndarray:
        """Angles for the ``2**level`` gates of loader layer ``level``."""
        return self.theta[(1 << level) - 1:(1 << (level + 1)) - 1]

    def __eq__(self, other):
        if not isinstance(other, AngleTree):
            return NotImplemented
        return (self.dimension == other.dimension
                and np.array_equal(self.r, other.r)
                and np.array_equal(self.theta, other.theta))

    def to_dict(self) -> dict:
        return {"dimension": self.dimension,
                "r": self.r.tolist(),
                "theta": self.theta.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> AngleTree:
        return cls(int(data["dimension"]), data["r"], data["theta"])

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {x.shape}")
    if not is_power_of_two(x.size) or x.size < 2:
        raise DimensionError(
            f"vector length {x.size} is not a power of 2 >= 2; pad it first")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector contains non-finite entries")
    return x


def _leaf_angle(left: float | np.ndarray, right: float | np.ndarray):
    # arctan2(|b|, a) == arccos(a / hypot(a, b)) on [0, pi], and gives 0 for a
    # zero pair; negative right entries take the 2*pi - arccos branch.
    theta = np.arctan2(np.abs(right), left)
    wrapped = TWO_PI - theta
    # 2*pi - tiny rounds to 2*pi; RBS has period 2*pi, so keep [0, 2*pi).
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    return np.where(right < 0, wrapped, theta)


def compile_angles(x) -> AngleTree:
    """Compile ``x`` into the angle tree of its parallel loader.

    Runs in O(d) with one pass over ``x``.  Zero-norm subtrees get angle 0.
    """
    x = _as_vector(x)
    d = x.size
    heap = np.empty(2 * d)
    heap[d:] = np.abs(x)
    level_start = d // 2
    while level_start >= 1:
        k = np.arange(level_start, 2 * level_start)
        heap[k] = np.hypot(heap[2 * k], heap[2 * k + 1])
        level_start //= 2
    if heap[1] == 0.0:
        raise ZeroVectorError("cannot load the zero vector")

    theta = np.empty(d)
    half = d // 2
    if half > 1:
        k = np.arange(1, half)
        theta[k] = np.arctan2(heap[2 * k + 1], heap[2 * k])
    theta[half:d] = _leaf_angle(x[0::2], x[1::2])
    return AngleTree(d, heap[1:d], theta[1:d])


def update_angle_path(tree: AngleTree, x, i: int, value: float) -> AngleTree:
    """Return the tree for ``x`` with coordinate ``i`` (0-based) set to ``value``.

    Only the ``log d`` nodes on the path from that leaf to the root are
    recomputed; ``x`` itself is not modified.
    """
    x = _as_vector(x)
    d = tree.dimension
    if x.size != d:
        raise DimensionError(f"vector has length {x.size}, tree has dimension {d}")
    if not 0 <= i < d:
        raise IndexError(f"coordinate index {i} out of range for dimension {d}")

    r = np.concatenate(([0.0], tree.r))
    theta = np.concatenate(([0.0], tree.theta))
    pair = x[(i // 2) * 2:(i // 2) * 2 + 2].copy()
    pair[i % 2] = value

    k = (d + i) // 2
    r[k] = np.hypot(pair[0], pair[1])
    theta[k] = _leaf_angle(pair[0], pair[1])
    k //= 2
    while k >= 1:
        r[k] = np.hypot(r[2 * k], r[2 * k + 1])
        theta[k] = np.arctan2(r[2 * k + 1], r[2 * k])
        k //= 2
    if r[1] == 0.0:
        raise ZeroVectorError("update would produce the zero vector")
    return AngleTree(d, r[1:], theta[1:])


def zero_tree(d: int) -> AngleTree:
    """All-zero angles: a loader that leaves its 1 on the first qubit."""
    return AngleTree(d, np.zeros(d - 1), np.zeros(d - 1))


def pad_to_power_of_two(x) -> np.ndarray:
    """Append trailing zeros so the last axis has power-of-2 length (>= 2)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    target = max(2, 1 << max(0, (n - 1).bit_length()))
    if target == n:
        return x
    pad = [(0, 0)] * (x.ndim - 1) + [(0, target - n)]
    return np.pad(x, pad)
