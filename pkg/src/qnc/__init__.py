"""Quantum Nearest Centroid in simulation: loaders, distance circuits and classification."""
from .angles import AngleTree, compile_angles, pad_to_power_of_two, update_angle_path
from .circuit import (Circuit, Gate, adjoint, build_optimized_loader, build_parallel_loader,
                      compile_matrix_angles, lower_to_native, to_irbs)
from .classifier import CentroidModel, PredictionReport, agreement, fit, predict_classical, predict_quantum
from .distance import (DistanceEstimate, build_distance_circuit, estimate_distance,
                       ideal_overlap_probability)
from .errors import (CircuitError, DatasetFormatError, DimensionError, InfeasibleSpecError,
                     MitigationStarvationError, QncError, ZeroVectorError)
from .noise import (FidelityFit, OverlapPair, correct_overlap, estimate_fidelity,
                    mitigation_threshold, predict_postselected_overlap, simulate_overlap_pairs)
from .simulator import (NOISELESS, NoiseSpec, OverlapEstimate, ShotRecord, estimate_overlap,
                        run_full, run_unary, sample_shots)

__version__ = "0.1.0"
