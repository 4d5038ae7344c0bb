"""Depolarizing-model analysis: post-selected overlaps, fidelity fits, corrections."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .angles import compile_angles
from .distance import build_distance_circuit, ideal_overlap_probability
from .rng import stream
from .simulator import FULL_READOUT, NoiseSpec, estimate_overlap, sample_shots

TQG_PER_QUBIT = 4.5


@dataclass(frozen=True)
class OverlapPair:
    c_sim: float
    c_exp: float
    n: int
    m: int
    mitigated: bool = False


@dataclass(frozen=True)
class FidelityFit:
    slope: float
    intercept: float
    fidelity: float
    m: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "fidelity": self.fidelity, "m": self.m}


def predict_postselected_overlap(a1_sq: float, n: int, p: float) -> float:
    """Expected post-selected P(e_0) when a fraction ``1 - p`` of shots is uniform noise."""
    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    floor = (1 - p) / (2 ** n * p)
    return (a1_sq + floor) / (1 + n * floor)


def predict_raw_overlap(a1_sq: float, p: float) -> float:
    """Expected first-qubit P(1): the uniform part reads 1 half the time."""
    return p * a1_sq + (1 - p) / 2


def estimate_fidelity(pairs: Sequence[OverlapPair], m: int | None = None) -> FidelityFit:
    """Least-squares line through (c_sim, c_exp); fidelity = slope ** (1/m).

    The intercept is fitted freely and reported, only the slope is used.
    """
    if len(pairs) < 2:
        raise ValueError("need at least two overlap pairs")
    ms = {pair.m for pair in pairs}
    if m is None:
        if len(ms) != 1:
            raise ValueError(f"pairs mix TQG counts {sorted(ms)}")
        m = ms.pop()
    elif ms - {m}:
        raise ValueError(f"pairs have TQG counts {sorted(ms)}, expected {m}")
    if m < 1:
        raise ValueError("TQG count m must be >= 1")
    x = np.array([pair.c_sim for pair in pairs])
    y = np.array([pair.c_exp for pair in pairs])
    spread = np.sum((x - x.mean()) ** 2)
    if spread <= 1e-12 * len(x):
        raise ValueError("c_sim values have no spread; slope is undefined")
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / spread)
    intercept = float(y.mean() - slope * x.mean())
    fidelity = slope ** (1.0 / m) if slope > 0 else float("nan")
    return FidelityFit(slope, intercept, fidelity, m)


def mitigation_threshold(tqg_per_qubit: float = TQG_PER_QUBIT) -> float:
    """Gate fidelity above which 2**n * f**(4.5 n - 6) grows with n."""
    return 2.0 ** (-1.0 / tqg_per_qubit)


def surviving_signal(n: int, f: float, tqg_per_qubit: float = TQG_PER_QUBIT,
                     offset: float = 6.0) -> float:
    """``2**n * p`` for the distance circuit on n qubits; large means mitigation works."""
    return 2.0 ** n * f ** (tqg_per_qubit * n - offset)


def correct_overlap(c_exp_raw: float, m: int, f: float) -> float:
    """Undo the ``f**m`` contraction of a raw overlap, clamped to [0, 1]."""
    if not 0 < f <= 1:
        raise ValueError(f"fidelity must be in (0, 1], got {f}")
    return min(max(c_exp_raw / f ** m, 0.0), 1.0)


def pair_with_overlap(d: int, c: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random unit vectors x, y with <x, y> = c, 0 <= c <= 1."""
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    w = rng.standard_normal(d)
    w -= (w @ x) * x
    w /= np.linalg.norm(w)
    return x, c * x + math.sqrt(max(1 - c * c, 0.0)) * w


RAW_E0 = "e0"
RAW_FIRST_QUBIT = "first-qubit"


def simulate_overlap_pairs(d: int, count: int, shots: int, noise: NoiseSpec,
                           seed: int | None = 0, mitigated: bool = False,
                           raw: str = RAW_E0) -> list[OverlapPair]:
    """Overlap pairs from the simulator, with ideal overlaps spread evenly over [0, 1].

    Unmitigated ``c_exp`` is the unfiltered frequency of e_0 (``raw="e0"``,
    slope ``p`` and intercept ``(1-p)/2**n``) or the first-qubit frequency
    (``raw="first-qubit"``, same slope, intercept ``(1-p)/2``).  With
    ``mitigated`` it is the post-selected estimate.  Pair ``i`` uses stream
    ``(seed, i)``.
    """
    targets = np.linspace(0.0, 1.0, count)
    pairs = []
    for i, target in enumerate(targets):
        rng = stream(seed, i)
        x, y = pair_with_overlap(d, math.sqrt(target), rng)
        tx, ty = compile_angles(x), compile_angles(y)
        circuit = build_distance_circuit(tx, ty)
        record = sample_shots(circuit, shots, noise, rng, mode=FULL_READOUT)
        est = estimate_overlap(record)
        if mitigated:
            c_exp = est.p_mitigated
        elif raw == RAW_E0:
            c_exp = est.p_e0_raw
        elif raw == RAW_FIRST_QUBIT:
            c_exp = est.p_raw
        else:
            raise ValueError(f"unknown raw estimator {raw!r}")
        pairs.append(OverlapPair(ideal_overlap_probability(tx, ty), c_exp, d,
                                 circuit.native_tqg_count, mitigated))
    return pairs
