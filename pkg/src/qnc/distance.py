"""Inner-product and Euclidean-distance estimation with the merged circuit."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .angles import AngleTree, compile_angles
from .circuit import RBS, Circuit, Gate, adjoint, build_parallel_loader
from .errors import DimensionError
from .simulator import (FIRST_QUBIT, FULL_READOUT, NoiseSpec, ShotRecord,
                        estimate_overlap, run_unary, sample_shots)


@dataclass(frozen=True)
class DistanceEstimate:
    c_hat: float
    l_hat: float
    p_hat: float
    shots_used: int | None
    mitigated: bool

    def to_dict(self) -> dict:
        return asdict(self)


def unmerged_distance_circuit(tx: AngleTree, ty: AngleTree) -> Circuit:
    """loader(x) then adjoint(loader(y)) without its X gate."""
    _check_same_dimension(tx, ty)
    second = adjoint(build_parallel_loader(ty))
    return Circuit(tx.dimension, build_parallel_loader(tx).layers + second.layers[:-1])


def build_distance_circuit(tx: AngleTree, ty: AngleTree) -> Circuit:
    """Distance circuit with the two middle layers fused: 3d/2 - 2 RBS gates.

    The fused gate on each leaf pair carries ``theta_x - theta_y``, the signed
    sum of the two adjacent angles, which keeps the unitary unchanged.
    """
    _check_same_dimension(tx, ty)
    load_x = build_parallel_loader(tx).layers
    unload_y = adjoint(build_parallel_loader(ty)).layers[:-1]
    last, first = load_x[-1], unload_y[0]
    fused = tuple(Gate(RBS, gx.qubits, gx.angle + gy.angle) for gx, gy in zip(last, first))
    return Circuit(tx.dimension, load_x[:-1] + (fused,) + unload_y[1:])


def _check_same_dimension(tx: AngleTree, ty: AngleTree):
    if tx.dimension != ty.dimension:
        raise DimensionError(f"dimension mismatch: {tx.dimension} vs {ty.dimension}")


def ideal_overlap_probability(tx: AngleTree, ty: AngleTree) -> float:
    """Noiseless probability of reading e_0, i.e. the squared normalized inner product."""
    return float(run_unary(build_distance_circuit(tx, ty))[0] ** 2)


def distance_from_overlap(norm_x: float, norm_y: float, c: float) -> float:
    radicand = norm_x ** 2 + norm_y ** 2 - 2.0 * norm_x * norm_y * c
    return math.sqrt(max(radicand, 0.0))


def estimate_overlap_probability(tx: AngleTree, ty: AngleTree, shots: int | None,
                                 noise: NoiseSpec | None = None, mitigated: bool = True,
                                 rng=None) -> tuple[float, ShotRecord | None]:
    """Shot estimate of P(e_0) for the pair, or the exact value when ``shots`` is None."""
    circuit = build_distance_circuit(tx, ty)
    if shots is None:
        if noise is not None and (noise.gamma > 0 or noise.fidelity < 1):
            raise ValueError("exact mode is noiseless; give a shot count to simulate noise")
        return float(run_unary(circuit)[0] ** 2), None
    mode = FULL_READOUT if mitigated else FIRST_QUBIT
    record = sample_shots(circuit, shots, noise, rng, mode=mode)
    est = estimate_overlap(record)
    return (est.p_mitigated if mitigated else est.p_raw), record


def estimate_distance_trees(tx: AngleTree, ty: AngleTree, shots: int | None,
                            noise: NoiseSpec | None = None, mitigated: bool = True,
                            rng=None) -> DistanceEstimate:
    p_hat, _ = estimate_overlap_probability(tx, ty, shots, noise, mitigated, rng)
    return distance_estimate_from_probability(tx, ty, p_hat, shots, mitigated)


def distance_estimate_from_probability(tx: AngleTree, ty: AngleTree, p_hat: float,
                                       shots: int | None, mitigated: bool) -> DistanceEstimate:
    c_hat = math.sqrt(max(p_hat, 0.0))
    l_hat = distance_from_overlap(tx.norm, ty.norm, c_hat)
    return DistanceEstimate(c_hat, l_hat, p_hat, shots, mitigated)


def estimate_distance(x, y, shots: int | None, noise: NoiseSpec | None = None,
                      mitigated: bool = True, rng=None) -> DistanceEstimate:
    """Estimate ``|x - y|`` from shots on the distance circuit.

    Norms come from classical preprocessing; only the normalized overlap is
    estimated.  ``c_hat = sqrt(p_hat)`` assumes a nonnegative inner product.
    Pass ``shots=None`` for the exact noiseless value.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return estimate_distance_trees(compile_angles(x), compile_angles(y), shots, noise,
                                   mitigated, rng)
