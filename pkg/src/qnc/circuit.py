"""Layered gate lists for RBS-based circuits.

Qubits are 0-based.  For two-qubit gates the first listed qubit is the
high-order bit of the 4x4 matrix, i.e. ``|10>`` means the first listed qubit
holds the 1.  Loaders always list the lower-indexed qubit first.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .angles import AngleTree, compile_angles, is_power_of_two, zero_tree
from .errors import CircuitError, DimensionError, ZeroVectorError

X = "X"
RBS = "RBS"
IRBS = "iRBS"
CRBS = "ControlledRBS"
CNOT = "CNOT"
RZ = "RZ"
RY = "RY"

ARITY = {X: 1, RZ: 1, RY: 1, RBS: 2, IRBS: 2, CNOT: 2, CRBS: 3}
PARAMETRIZED = {RBS, IRBS, CRBS, RZ, RY}
RBS_FAMILY = {RBS, IRBS, CRBS}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind not in ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != ARITY[self.kind]:
            raise CircuitError(
                f"{self.kind} acts on {ARITY[self.kind]} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"repeated qubit in {self.kind}{self.qubits}")
        if self.kind in PARAMETRIZED:
            if self.angle is None:
                raise CircuitError(f"{self.kind} needs an angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise CircuitError(f"{self.kind} takes no angle")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "qubits": list(self.qubits)}
        if self.angle is not None:
            out["angle"] = self.angle
        return out

    @classmethod
    def from_dict(cls, data: dict) -> Gate:
        return cls(data["kind"], tuple(data["qubits"]), data.get("angle"))


@dataclass(frozen=True)
class Circuit:
    """Gates grouped into layers; gates within a layer touch disjoint qubits."""

    num_qubits: int
    layers: tuple[tuple[Gate, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise CircuitError("a circuit needs at least one qubit")
        layers = tuple(tuple(layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        for depth, layer in enumerate(layers):
            seen: set[int] = set()
            for gate in layer:
                for q in gate.qubits:
                    if not 0 <= q < self.num_qubits:
                        raise CircuitError(f"qubit {q} outside register of {self.num_qubits}")
                    if q in seen:
                        raise CircuitError(f"qubit {q} used twice in layer {depth}")
                    seen.add(q)

    def gates(self) -> Iterator[Gate]:
        for layer in self.layers:
            yield from layer

    def count(self, *kinds: str) -> int:
        return sum(1 for g in self.gates() if g.kind in kinds)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def rbs_count(self) -> int:
        """Parametrized two- and three-qubit gates (RBS, iRBS, controlled RBS)."""
        return self.count(*RBS_FAMILY)

    @property
    def rbs_depth(self) -> int:
        return sum(1 for layer in self.layers if any(g.kind in RBS_FAMILY for g in layer))

    @property
    def native_tqg_count(self) -> int | None:
        """Two-qubit gates after lowering; None if a controlled RBS is present."""
        if self.count(CRBS):
            return None
        return self.count(CNOT) + 3 * self.count(RBS, IRBS)

    def metadata(self) -> dict:
        return {"rbs_count": self.rbs_count,
                "native_tqg_count": self.native_tqg_count,
                "depth": self.depth}

    def to_dict(self) -> dict:
        return {"qubits": self.num_qubits,
                "layers": [[g.to_dict() for g in layer] for layer in self.layers],
                "metadata": self.metadata()}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> Circuit:
        layers = tuple(tuple(Gate.from_dict(g) for g in layer) for layer in data["layers"])
        circuit = cls(int(data["qubits"]), layers)
        meta = data.get("metadata")
        if meta is not None and meta != circuit.metadata():
            raise CircuitError(f"metadata {meta} does not match gates {circuit.metadata()}")
        return circuit


def schedule(num_qubits: int, gates: Iterable[Gate]) -> Circuit:
    """Pack a gate sequence into layers as early as qubit dependencies allow."""
    frontier = [0] * num_qubits
    layers: list[list[Gate]] = []
    for gate in gates:
        slot = max(frontier[q] for q in gate.qubits)
        if slot == len(layers):
            layers.append([])
        layers[slot].append(gate)
        for q in gate.qubits:
            frontier[q] = slot + 1
    return Circuit(num_qubits, tuple(tuple(layer) for layer in layers))


def loader_pairs(d: int, level: int) -> list[tuple[int, int]]:
    """Qubit pairs for layer ``level`` of the d-qubit parallel loader."""
    span = d >> level
    return [(q, q + span // 2) for q in range(0, d, span)]


def _loader_layers(tree: AngleTree, offset: int = 0, control: int | None = None):
    layers = []
    for level in range(tree.levels):
        layer = []
        for (a, b), angle in zip(loader_pairs(tree.dimension, level), tree.level_angles(level)):
            if control is None:
                layer.append(Gate(RBS, (a + offset, b + offset), angle))
            else:
                layer.append(Gate(CRBS, (control, a + offset, b + offset), angle))
        layers.append(tuple(layer))
    return layers


def build_parallel_loader(tree: AngleTree) -> Circuit:
    """X on qubit 0 followed by ``log d`` layers of RBS gates (d - 1 in total)."""
    layers = [(Gate(X, (0,)),)] + _loader_layers(tree)
    return Circuit(tree.dimension, tuple(layers))


@dataclass(frozen=True)
class MatrixAngles:
    """A length-d vector viewed as a sqrt(d) x sqrt(d) matrix, row-major.

    ``row_norms`` loads the vector of row norms; ``rows[i]`` loads row ``i``
    (all-zero angles for an all-zero row, whose amplitude is zero anyway).
    """

    row_norms: AngleTree
    rows: tuple[AngleTree, ...]

    @property
    def dimension(self) -> int:
        return self.row_norms.dimension ** 2


def compile_matrix_angles(x) -> MatrixAngles:
    x = np.asarray(x, dtype=float)
    d = x.size
    side = math.isqrt(d)
    if side * side != d or not is_power_of_two(side) or side < 2:
        raise DimensionError(f"optimized loader needs d a power of 4 >= 4, got {d}")
    matrix = x.reshape(side, side)
    rows = []
    for row in matrix:
        try:
            rows.append(compile_angles(row))
        except ZeroVectorError:
            rows.append(zero_tree(side))
    return MatrixAngles(compile_angles(np.linalg.norm(matrix, axis=1)), tuple(rows))


def _list_schedule(num_qubits: int, gates: Sequence[Gate], commute) -> Circuit:
    """Resource-constrained list scheduling.

    Gate ``h`` must precede a later gate ``g`` when they share a qubit and
    ``commute(h, g)`` is false.  Ready gates are packed longest-tail first.
    """
    count = len(gates)
    preds: list[set[int]] = [set() for _ in range(count)]
    for g in range(count):
        for h in range(g):
            if set(gates[h].qubits) & set(gates[g].qubits) and not commute(gates[h], gates[g]):
                preds[g].add(h)
    succs: list[list[int]] = [[] for _ in range(count)]
    for g, ps in enumerate(preds):
        for h in ps:
            succs[h].append(g)
    tail = [1] * count
    for g in reversed(range(count)):
        if succs[g]:
            tail[g] = 1 + max(tail[s] for s in succs[g])

    done: set[int] = set()
    layers = []
    while len(done) < count:
        ready = [g for g in range(count) if g not in done and preds[g] <= done]
        ready.sort(key=lambda g: (-tail[g], g))
        busy: set[int] = set()
        layer = []
        for g in ready:
            if busy.isdisjoint(gates[g].qubits):
                layer.append(g)
                busy.update(gates[g].qubits)
        done.update(layer)
        layers.append(tuple(gates[g] for g in layer))
    return Circuit(num_qubits, tuple(layers))


def _controlled_commute(a: Gate, b: Gate) -> bool:
    # On a unary control register at most one control is set per branch, so
    # controlled gates with different controls commute there; gates sharing a
    # control commute when their targets are disjoint.
    if a.kind != CRBS or b.kind != CRBS:
        return False
    return a.qubits[0] != b.qubits[0] or set(a.qubits[1:]).isdisjoint(b.qubits[1:])


def build_optimized_loader(m: MatrixAngles) -> Circuit:
    """Loader on 2*sqrt(d) qubits: row register first, then column register.

    Prepares sum_ij x_ij |e_i>|e_j> / |x|.  Every branch of the row register
    holds exactly one 1, so the column register's initial X is unconditional
    and only the RBS gates of each row loader are controlled.  Row loaders
    with different controls are interleaved.
    """
    side = m.row_norms.dimension
    gates = [Gate(X, (0,)), Gate(X, (side,))]
    for layer in _loader_layers(m.row_norms):
        gates.extend(layer)
    for i, row in enumerate(m.rows):
        for layer in _loader_layers(row, offset=side, control=i):
            gates.extend(layer)
    return _list_schedule(2 * side, gates, _controlled_commute)


def adjoint(c: Circuit) -> Circuit:
    """Reverse the layers and negate every angle."""
    for gate in c.gates():
        if gate.kind not in (X, RBS, IRBS):
            raise CircuitError(f"adjoint supports X/RBS/iRBS only, found {gate.kind}")
    layers = tuple(
        tuple(Gate(g.kind, g.qubits, None if g.angle is None else -g.angle) for g in layer)
        for layer in reversed(c.layers))
    return Circuit(c.num_qubits, layers)


def irbs_decomposition(a: int, b: int, theta: float) -> list[Gate]:
    """Three-CNOT circuit equal to iRBS(theta) on (a, b) up to global phase."""
    half = math.pi / 2
    return [
        Gate(RZ, (b,), -half),
        Gate(CNOT, (b, a)),
        Gate(RZ, (a,), -half),
        Gate(RY, (b,), half - theta),
        Gate(CNOT, (a, b)),
        Gate(RY, (b,), theta - half),
        Gate(CNOT, (b, a)),
        Gate(RZ, (a,), half),
    ]


def rbs_decomposition(a: int, b: int, theta: float) -> list[Gate]:
    """RBS(theta) = RZ_a(-pi/2) iRBS(theta) RZ_a(pi/2), up to global phase."""
    half = math.pi / 2
    return [Gate(RZ, (a,), half), *irbs_decomposition(a, b, theta), Gate(RZ, (a,), -half)]


def lower_to_native(c: Circuit) -> Circuit:
    """Replace every RBS/iRBS by its CNOT + RZ/RY decomposition (3 CNOTs each)."""
    out: list[Gate] = []
    for gate in c.gates():
        if gate.kind == RBS:
            out.extend(rbs_decomposition(*gate.qubits, gate.angle))
        elif gate.kind == IRBS:
            out.extend(irbs_decomposition(*gate.qubits, gate.angle))
        elif gate.kind in (X, CNOT, RZ, RY):
            out.append(gate)
        else:
            raise CircuitError(f"no native decomposition for {gate.kind}")
    return schedule(c.num_qubits, out)


def to_irbs(c: Circuit) -> Circuit:
    """Same circuit with every RBS swapped for iRBS at the same angle."""
    layers = tuple(
        tuple(Gate(IRBS, g.qubits, g.angle) if g.kind == RBS else g for g in layer)
        for layer in c.layers)
    return Circuit(c.num_qubits, layers)


def concatenate(num_qubits: int, parts: Sequence[Circuit]) -> Circuit:
    layers = tuple(layer for part in parts for layer in part.layers)
    return Circuit(num_qubits, layers)
