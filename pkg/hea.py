"""
================================================================================
HEA - ONE-DIMENSIONAL ALTERNATING-LAYERED HARDWARE EFFICIENT ANSATZ
================================================================================

PURPOSE:
    Build, apply and inspect the brick-layout HEA:
        - build_hea        deterministic circuit structure
        - apply_hea        U(theta)|psi>, optionally in 2-design mode
        - lightcone        geometric backward light-cone of a Pauli string
        - evolved_support  numerical support of U^dag P U (small n oracle)

LAYOUT:
    Layer 0:  one general single-qubit unitary per qubit,
              W(x, y, z) = Rz(z) Ry(y) Rx(x)   (Rx applied first)
    Layer t (1..D), brick pairs
        t odd:   (0,1), (2,3), ...
        t even:  (1,2), (3,4), ...  plus (n-1, 0) iff periodic and n even
    Each brick is CNOT(j -> j+1) followed by W on j and W on j+1.

    Parameters are numbered in application order, 3 per W block, x/y/z.
    num_params = 3n + 6 * (total brick count)

ANGLE CONVENTIONS:
    half   R_P(theta) = exp(-i theta P / 2)   shift +-pi/2, factor 1/2
    full   R_P(theta) = exp(-i theta P)       shift +-pi/4, factor 1

2-DESIGN MODE:
    A TwoDesignDressing holds one Haar unitary per block (2x2 after each
    initial W, 4x4 after each brick). Each dressed block is Haar-distributed
    on its qubits while every parameter keeps its own rotation.

================================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from qstate import (
    CNOT, PAULI_I, PAULI_X, PAULI_Y, PAULI_Z,
    QubitSet, StateVector, apply_matrix,
)
from randmat import haar_unitary

# =============================================================================
# CONFIGURATION
# =============================================================================

BOUNDARIES = ("open", "periodic")
ANGLE_CONVENTIONS = ("half", "full")
DEFAULT_BOUNDARY = "open"
DEFAULT_CONVENTION = "half"

ROTATION_AXES = ("X", "Y", "Z")
SUPPORT_TOL = 1e-9
MAX_UNITARY_QUBITS = 10

_AXIS_MATRIX = {"X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class GateSpec:
    """
    One gate of the circuit. kind is "cnot" (fixed, targets = (control,
    target)) or "rotation" (one parameter, axis in X/Y/Z, one target).
    """

    kind: str
    targets: tuple[int, ...]
    layer: int
    axis: str | None = None
    param_index: int | None = None

    def __post_init__(self):
        if self.kind == "rotation":
            if self.axis not in ROTATION_AXES or self.param_index is None or len(self.targets) != 1:
                raise ValueError(f"Malformed rotation gate {self}")
        elif self.kind == "cnot":
            if self.axis is not None or self.param_index is not None or len(self.targets) != 2:
                raise ValueError(f"Malformed CNOT gate {self}")
        else:
            raise ValueError(f"Unknown gate kind {self.kind!r}")

    @property
    def support(self) -> QubitSet:
        return QubitSet.of(self.targets)


@dataclass(frozen=True)
class Block:
    """An initial W (one qubit) or a brick (CNOT + two W's) in application order."""

    layer: int
    qubits: tuple[int, ...]
    gates: tuple[GateSpec, ...]

    @property
    def is_brick(self) -> bool:
        return len(self.qubits) == 2

    @property
    def param_indices(self) -> tuple[int, ...]:
        return tuple(g.param_index for g in self.gates if g.param_index is not None)


@dataclass(frozen=True)
class HEACircuit:
    num_qubits: int
    depth: int
    boundary: str
    angle_convention: str
    blocks: tuple[Block, ...] = field(repr=False)

    @cached_property
    def gates(self) -> tuple[GateSpec, ...]:
        return tuple(g for b in self.blocks for g in b.gates)

    @cached_property
    def num_params(self) -> int:
        return sum(len(b.param_indices) for b in self.blocks)

    @property
    def shift(self) -> float:
        return np.pi / 2 if self.angle_convention == "half" else np.pi / 4

    @property
    def shift_factor(self) -> float:
        return 0.5 if self.angle_convention == "half" else 1.0

    def layer_pairs(self, layer: int) -> tuple[tuple[int, int], ...]:
        return tuple(b.qubits for b in self.blocks if b.layer == layer and b.is_brick)


@dataclass(frozen=True)
class TwoDesignDressing:
    """One Haar unitary per block of the circuit it was sampled for."""

    unitaries: tuple[np.ndarray, ...] = field(repr=False)


# =============================================================================
# CONSTRUCTION
# =============================================================================

def brick_pairs(n: int, layer: int, boundary: str = DEFAULT_BOUNDARY) -> list[tuple[int, int]]:
    """Qubit pairs of brick layer `layer` (1-based)."""
    start = 0 if layer % 2 == 1 else 1
    pairs = [(j, j + 1) for j in range(start, n - 1, 2)]
    if boundary == "periodic" and n % 2 == 0 and layer % 2 == 0 and n >= 2:
        pairs.append((n - 1, 0))
    return pairs


def _w_gates(qubit: int, layer: int, first_param: int) -> list[GateSpec]:
    return [
        GateSpec("rotation", (qubit,), layer, axis, first_param + k)
        for k, axis in enumerate(ROTATION_AXES)
    ]


def build_hea(n: int, depth: int, boundary: str = DEFAULT_BOUNDARY,
              angle_convention: str = DEFAULT_CONVENTION) -> HEACircuit:
    """Brick-layout HEA with an initial W layer and `depth` brick layers."""
    if n <= 0:
        raise ValueError(f"n must be >= 1, got {n}")
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    if boundary not in BOUNDARIES:
        raise ValueError(f"Unknown boundary {boundary!r}; expected one of {BOUNDARIES}")
    if angle_convention not in ANGLE_CONVENTIONS:
        raise ValueError(
            f"Unknown angle convention {angle_convention!r}; expected one of {ANGLE_CONVENTIONS}"
        )
    if n == 1:
        print("Warning: single-qubit HEA has no brick layers; only the initial rotations are built")

    blocks: list[Block] = []
    p = 0
    for q in range(n):
        blocks.append(Block(0, (q,), tuple(_w_gates(q, 0, p))))
        p += 3

    for layer in range(1, depth + 1):
        for a, b in brick_pairs(n, layer, boundary):
            gates = [GateSpec("cnot", (a, b), layer)]
            gates += _w_gates(a, layer, p)
            gates += _w_gates(b, layer, p + 3)
            p += 6
            blocks.append(Block(layer, (a, b), tuple(gates)))

    return HEACircuit(n, depth, boundary, angle_convention, tuple(blocks))


def sample_two_design_dressing(circuit: HEACircuit, rng) -> TwoDesignDressing:
    rng = np.random.default_rng(rng)
    return TwoDesignDressing(tuple(
        haar_unitary(2 ** len(b.qubits), rng) for b in circuit.blocks
    ))


# =============================================================================
# APPLICATION
# =============================================================================

def rotation_matrix(axis: str, angle: float, convention: str = DEFAULT_CONVENTION) -> np.ndarray:
    a = angle / 2 if convention == "half" else angle
    return np.cos(a) * PAULI_I - 1j * np.sin(a) * _AXIS_MATRIX[axis]


def _w_matrix(gates: Sequence[GateSpec], theta: np.ndarray, convention: str) -> np.ndarray:
    m = PAULI_I
    for g in gates:
        m = rotation_matrix(g.axis, theta[g.param_index], convention) @ m
    return m


def block_matrix(circuit: HEACircuit, block: Block, theta: np.ndarray,
                 dressing_unitary: np.ndarray | None = None) -> np.ndarray:
    """Local matrix of a block, qubits[0] as least significant bit."""
    conv = circuit.angle_convention
    if block.is_brick:
        a, b = block.qubits
        w_a = _w_matrix([g for g in block.gates if g.kind == "rotation" and g.targets == (a,)], theta, conv)
        w_b = _w_matrix([g for g in block.gates if g.kind == "rotation" and g.targets == (b,)], theta, conv)
        m = np.kron(w_b, w_a) @ CNOT
    else:
        m = _w_matrix(block.gates, theta, conv)
    if dressing_unitary is not None:
        m = dressing_unitary @ m
    return m


def _check_theta(circuit: HEACircuit, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != circuit.num_params:
        raise ValueError(f"Expected {circuit.num_params} parameters, got {theta.shape[0]}")
    return theta


def _check_dressing(circuit: HEACircuit, dressing: TwoDesignDressing | None):
    if dressing is not None and len(dressing.unitaries) != len(circuit.blocks):
        raise ValueError(
            f"Dressing has {len(dressing.unitaries)} unitaries for {len(circuit.blocks)} blocks"
        )


def run_circuit(circuit: HEACircuit, theta, amps: np.ndarray,
                dressing: TwoDesignDressing | None = None) -> np.ndarray:
    """U(theta) applied to raw amplitudes; a trailing axis is a batch of states."""
    theta = _check_theta(circuit, theta)
    _check_dressing(circuit, dressing)
    if amps.shape[0] != 2 ** circuit.num_qubits:
        raise ValueError(f"Amplitude length {amps.shape[0]} does not match {circuit.num_qubits} qubits")
    out = amps
    for i, block in enumerate(circuit.blocks):
        u = dressing.unitaries[i] if dressing is not None else None
        out = apply_matrix(out, block_matrix(circuit, block, theta, u), block.qubits, circuit.num_qubits)
    return out


def apply_hea(circuit: HEACircuit, theta, state: StateVector,
              dressing: TwoDesignDressing | None = None) -> StateVector:
    if state.num_qubits != circuit.num_qubits:
        raise ValueError(f"State has {state.num_qubits} qubits, circuit has {circuit.num_qubits}")
    return StateVector(state.num_qubits, run_circuit(circuit, theta, state.amplitudes, dressing))


def circuit_unitary(circuit: HEACircuit, theta,
                    dressing: TwoDesignDressing | None = None) -> np.ndarray:
    if circuit.num_qubits > MAX_UNITARY_QUBITS:
        raise ValueError(f"Dense unitary budget is {MAX_UNITARY_QUBITS} qubits")
    eye = np.eye(2 ** circuit.num_qubits, dtype=complex)
    return run_circuit(circuit, theta, eye, dressing)


# =============================================================================
# LIGHT-CONE AND SUPPORT
# =============================================================================

def lightcone(circuit: HEACircuit, string) -> QubitSet:
    """
    Qubits causally connected to supp(string) through the brick layout,
    walking the layers backwards. Independent of theta and of dressing.
    """
    support = string.support if hasattr(string, "support") else QubitSet.of(string)
    if len(support) == 0:
        raise ValueError("lightcone of the identity string is undefined")
    support.check(circuit.num_qubits)
    cone = set(support)
    for layer in range(circuit.depth, 0, -1):
        grown = set(cone)
        for a, b in circuit.layer_pairs(layer):
            if a in cone or b in cone:
                grown.update((a, b))
        cone = grown
    return QubitSet.of(cone)


def lightcone_bound(circuit: HEACircuit, support_size: int) -> int:
    """max(2D, 1) * |supp|; at D = 0 the cone is the support itself."""
    return max(2 * circuit.depth, 1) * support_size


def evolved_support(circuit: HEACircuit, theta, string,
                    dressing: TwoDesignDressing | None = None,
                    tol: float = SUPPORT_TOL) -> QubitSet:
    """Qubits on which U^dag P U acts non-trivially (commutator test with X_q, Z_q)."""
    u = circuit_unitary(circuit, theta, dressing)
    p = string.matrix()
    op = u.conj().T @ p @ u
    idx = np.arange(op.shape[0])
    acting = []
    for q in range(circuit.num_qubits):
        bit = 1 << q
        sign = 1 - 2 * ((idx >> q) & 1)
        x_comm = op[idx ^ bit, :] - op[:, idx ^ bit]
        z_comm = sign[:, None] * op - op * sign[None, :]
        if max(np.max(np.abs(x_comm)), np.max(np.abs(z_comm))) > tol:
            acting.append(q)
    return QubitSet(tuple(acting))


def last_parameter_before(circuit: HEACircuit, support) -> int:
    """
    X-rotation parameter of the last block touching `support`, taken on the
    lowest qubit of the block that lies in the support.
    """
    support = support if isinstance(support, QubitSet) else QubitSet.of(support)
    for block in reversed(circuit.blocks):
        hit = [q for q in block.qubits if q in support]
        if not hit:
            continue
        q = min(hit)
        for g in block.gates:
            if g.kind == "rotation" and g.axis == "X" and g.targets == (q,):
                return g.param_index
    raise ValueError(f"No block acts on support {support}")


# =============================================================================
# LAYOUT DUMP
# =============================================================================

def circuit_layout(circuit: HEACircuit) -> dict:
    """JSON-serializable gate list."""
    return {
        "num_qubits": circuit.num_qubits,
        "depth": circuit.depth,
        "boundary": circuit.boundary,
        "angle_convention": circuit.angle_convention,
        "num_params": circuit.num_params,
        "gates": [
            {
                "kind": g.kind,
                "axis": g.axis,
                "targets": list(g.targets),
                "param_index": g.param_index,
                "layer": g.layer,
            }
            for g in circuit.gates
        ],
    }
