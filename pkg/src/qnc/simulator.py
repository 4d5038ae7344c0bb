"""Circuit execution, noise channels and shot sampling.

Two engines share one gate convention:

* ``run_unary`` tracks only the d amplitudes of the single-excitation
  subspace, which is all a loader or distance circuit ever touches.  It is
  batched so thousands of independently-noised shots run as one array op.
* ``run_full`` applies gate matrices to the full ``2**n`` statevector and
  serves as the oracle (and as the only engine for controlled-RBS circuits).

Qubit 0 is the most significant bit of a basis index and the first character
of a measured bitstring, so unary state ``e_i`` is the bitstring with a single
1 at position ``i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import CNOT, CRBS, IRBS, RBS, RY, RZ, X, Circuit, Gate
from .errors import CircuitError, MitigationStarvationError

FULL_READOUT = "full-readout"
FIRST_QUBIT = "first-qubit"
DEFAULT_MAX_QUBITS = 14
DEFAULT_BATCH = 1 << 15


@dataclass(frozen=True)
class NoiseSpec:
    """Coherent angle noise ``gamma`` and two-qubit gate fidelity.

    With ``systematic`` set, one angle-noise draw is shared by every shot of
    a circuit (a fixed calibration offset) instead of a fresh draw per shot.
    """

    gamma: float = 0.0
    fidelity: float = 1.0
    systematic: bool = False

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 < self.fidelity <= 1:
            raise ValueError(f"fidelity must be in (0, 1], got {self.fidelity}")

    def depolarizing_weight(self, m_tqg: int) -> float:
        """Probability ``p = f**m`` that a shot escapes depolarization."""
        return self.fidelity ** m_tqg

    @classmethod
    def parse(cls, text: str) -> NoiseSpec:
        """Parse ``"gamma,fidelity"`` as used on the command line."""
        try:
            gamma, fidelity = (float(v) for v in text.split(","))
        except ValueError:
            raise ValueError(f"noise must look like 'gamma,fidelity', got {text!r}") from None
        return cls(gamma, fidelity)


NOISELESS = NoiseSpec()


@dataclass(frozen=True)
class ShotRecord:
    counts: dict[str, int]
    total: int
    mode: str = FULL_READOUT
    num_qubits: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in (FULL_READOUT, FIRST_QUBIT):
            raise ValueError(f"unknown readout mode {self.mode!r}")
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts do not sum to total")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "total": self.total,
                "counts": dict(sorted(self.counts.items()))}

    @classmethod
    def from_dict(cls, data: dict) -> ShotRecord:
        return cls({k: int(v) for k, v in data["counts"].items()},
                   int(data["total"]), data["mode"])

    def merge(self, other: ShotRecord) -> ShotRecord:
        if other.mode != self.mode:
            raise ValueError("cannot merge records with different readout modes")
        counts = dict(self.counts)
        for k, v in other.counts.items():
            counts[k] = counts.get(k, 0) + v
        return ShotRecord(counts, self.total + other.total, self.mode, self.num_qubits)


@dataclass(frozen=True)
class OverlapEstimate:
    """``p_raw``: first qubit read 1.  ``p_mitigated``: e_0 among unary outcomes.

    ``p_e0_raw`` is the unfiltered frequency of exactly e_0 (full readout only).
    """

    p_raw: float
    p_mitigated: float | None
    valid_fraction: float | None
    p_e0_raw: float | None = None


# ---------------------------------------------------------------- unary engine

def _unary_program(c: Circuit):
    """Split a circuit into (initial qubit, [(i, j, angles) per layer])."""
    start = None
    program = []
    for layer in c.layers:
        pairs = []
        for gate in layer:
            if gate.kind == X:
                if start is not None or program:
                    raise CircuitError("X is only allowed once, before any RBS gate")
                start = gate.qubits[0]
            elif gate.kind == RBS:
                pairs.append((gate.qubits[0], gate.qubits[1], gate.angle))
            else:
                raise CircuitError(f"{gate.kind} does not preserve the unary subspace")
        if pairs:
            i, j, theta = (np.array(v) for v in zip(*pairs))
            program.append((i.astype(int), j.astype(int), theta.astype(float)))
    return start, program


def run_unary_batch(c: Circuit, batch: int = 1, noise: NoiseSpec | None = None,
                    rng=None, initial=None) -> np.ndarray:
    """Amplitudes after ``c`` for ``batch`` independent noise realisations.

    Returns an array of shape ``(batch, num_qubits)``.  Each RBS angle becomes
    ``theta * (1 + gamma * r)`` with ``r`` standard normal, drawn per gate per
    row (or once per gate when ``noise.systematic``).
    """
    start, program = _unary_program(c)
    n = c.num_qubits
    amps = np.zeros((batch, n))
    if initial is not None:
        if start is not None:
            raise CircuitError("circuit has an X gate and an explicit initial state")
        amps[:] = np.asarray(initial, dtype=float)
    elif start is None:
        raise CircuitError("circuit needs a leading X gate or an initial state")
    else:
        amps[:, start] = 1.0

    gamma = 0.0 if noise is None else noise.gamma
    if gamma > 0:
        rng = np.random.default_rng(rng)
    rows = 1 if noise is not None and noise.systematic else batch
    for i, j, theta in program:
        if gamma > 0:
            theta = theta * (1.0 + gamma * rng.standard_normal((rows, theta.size)))
        cos, sin = np.cos(theta), np.sin(theta)
        ai, aj = amps[:, i], amps[:, j]
        amps[:, i] = cos * ai - sin * aj
        amps[:, j] = sin * ai + cos * aj
    return amps


def run_unary(c: Circuit, noise: NoiseSpec | None = None, rng=None, initial=None) -> np.ndarray:
    """Amplitudes on e_0 .. e_{d-1} after running ``c`` once."""
    return run_unary_batch(c, 1, noise, rng, initial)[0]


# ----------------------------------------------------------------- full engine

def _rbs_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1, 0, 0, 0], [0, c, s, 0], [0, -s, c, 0], [0, 0, 0, 1]], dtype=complex)


def _irbs_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, 1]])


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of ``gate`` over its own qubits, first listed qubit most significant."""
    kind, t = gate.kind, gate.angle
    if kind == X:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == RZ:
        return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
    if kind == RY:
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == CNOT:
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    if kind == RBS:
        return _rbs_matrix(t)
    if kind == IRBS:
        return _irbs_matrix(t)
    if kind == CRBS:
        u = np.eye(8, dtype=complex)
        u[4:, 4:] = _rbs_matrix(t)
        return u
    raise CircuitError(f"no matrix for {kind}")


def apply_gate(state: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    k = len(gate.qubits)
    tensor = np.moveaxis(state.reshape((2,) * n), gate.qubits, range(k))
    shape = tensor.shape
    tensor = (gate_matrix(gate) @ tensor.reshape(1 << k, -1)).reshape(shape)
    return np.moveaxis(tensor, range(k), gate.qubits).reshape(-1)


def run_full(c: Circuit, initial=None, max_qubits: int = DEFAULT_MAX_QUBITS) -> np.ndarray:
    """Exact ``2**n`` statevector after ``c``, starting from ``|0...0>``."""
    n = c.num_qubits
    if n > max_qubits:
        raise CircuitError(f"{n} qubits exceeds the full-statevector cap of {max_qubits}")
    if initial is None:
        state = np.zeros(1 << n, dtype=complex)
        state[0] = 1.0
    else:
        state = np.array(initial, dtype=complex)
    for gate in c.gates():
        state = apply_gate(state, gate, n)
    return state


def circuit_unitary(c: Circuit, max_qubits: int = 10) -> np.ndarray:
    """Full unitary, column ``k`` being the image of basis state ``k``."""
    n = c.num_qubits
    if n > max_qubits:
        raise CircuitError(f"{n} qubits exceeds the unitary cap of {max_qubits}")
    dim = 1 << n
    return np.stack([run_full(c, np.eye(dim)[k], max_qubits) for k in range(dim)], axis=1)


def unary_index(i: int, n: int) -> int:
    """Basis index of unary state e_i on n qubits."""
    return 1 << (n - 1 - i)


def unary_amplitudes(state: np.ndarray, n: int) -> np.ndarray:
    return np.array([state[unary_index(i, n)] for i in range(n)])


def unary_bitstring(i: int, n: int) -> str:
    return "0" * i + "1" + "0" * (n - i - 1)


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-10) -> bool:
    a, b = np.asarray(a).ravel(), np.asarray(b).ravel()
    k = int(np.argmax(np.abs(b)))
    if abs(b[k]) < atol:
        return bool(np.allclose(a, b, atol=atol))
    phase = a[k] / b[k]
    return bool(abs(abs(phase) - 1) < atol and np.allclose(a, phase * b, atol=atol))


# -------------------------------------------------------------------- sampling

def _unary_draws(c: Circuit, count: int, noise: NoiseSpec, rng, batch_size: int) -> np.ndarray:
    """Unary outcome index for ``count`` shots, each with its own noisy run."""
    if count == 0:
        return np.zeros(0, dtype=int)
    if noise.gamma == 0 or noise.systematic:
        probs = run_unary(c, noise, rng) ** 2
        return rng.choice(probs.size, size=count, p=probs / probs.sum())
    out = []
    for start in range(0, count, batch_size):
        rows = min(batch_size, count - start)
        probs = run_unary_batch(c, rows, noise, rng) ** 2
        cdf = np.cumsum(probs, axis=1)
        u = rng.random((rows, 1)) * cdf[:, -1:]
        out.append(np.minimum((u > cdf).sum(axis=1), probs.shape[1] - 1))
    return np.concatenate(out)


def sample_shots(c: Circuit, shots: int, noise: NoiseSpec | None = None, rng=None, *,
                 mode: str = FULL_READOUT, m_tqg: int | None = None,
                 batch_size: int = DEFAULT_BATCH) -> ShotRecord:
    """Measure ``c`` ``shots`` times under the mixed coherent/depolarizing model.

    Each shot escapes depolarization with probability ``p = fidelity**m_tqg``
    and then reads out ``e_i`` with probability ``|a_i|**2`` of its own noisy
    run; otherwise it reads a uniformly random bitstring of all ``2**n``.
    ``m_tqg`` defaults to the circuit's native two-qubit gate count.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    noise = NOISELESS if noise is None else noise
    rng = np.random.default_rng(rng)
    n = c.num_qubits
    if m_tqg is None:
        m_tqg = c.native_tqg_count
        if m_tqg is None:
            raise CircuitError("circuit has no native TQG count; pass m_tqg")
    p = noise.depolarizing_weight(m_tqg)

    if n > 62:
        raise CircuitError("sampling supports at most 62 qubits")

    depolarized = int((rng.random(shots) >= p).sum()) if p < 1 else 0
    unary = _unary_draws(c, shots - depolarized, noise, rng, batch_size)
    outcomes = np.left_shift(np.int64(1), (n - 1 - unary).astype(np.int64))
    if depolarized:
        uniform = rng.integers(0, 1 << n, size=depolarized, dtype=np.int64)
        outcomes = np.concatenate([outcomes, uniform])

    values, counts = np.unique(outcomes, return_counts=True)
    if mode == FIRST_QUBIT:
        ones = int(counts[values >> (n - 1) == 1].sum())
        table = {k: v for k, v in (("0", shots - ones), ("1", ones)) if v}
    elif mode == FULL_READOUT:
        table = {format(int(v), f"0{n}b"): int(k) for v, k in zip(values, counts)}
    else:
        raise ValueError(f"unknown readout mode {mode!r}")
    return ShotRecord(table, shots, mode, n)


def estimate_overlap(rec: ShotRecord) -> OverlapEstimate:
    """Raw first-qubit and post-selected estimates of P(e_0).

    Full-readout records yield all three numbers and raise
    :class:`MitigationStarvationError` when no shot landed in the unary
    subspace.  First-qubit records only carry ``p_raw``.
    """
    if rec.total < 1:
        raise ValueError("empty shot record")
    if rec.mode == FIRST_QUBIT:
        return OverlapEstimate(rec.counts.get("1", 0) / rec.total, None, None)
    first = sum(v for k, v in rec.counts.items() if k[0] == "1")
    unary = {k: v for k, v in rec.counts.items() if k.count("1") == 1}
    valid = sum(unary.values())
    if valid == 0:
        raise MitigationStarvationError("no shot survived post-selection")
    n = len(next(iter(rec.counts)))
    hit = unary.get(unary_bitstring(0, n), 0)
    return OverlapEstimate(first / rec.total, hit / valid, valid / rec.total, hit / rec.total)
