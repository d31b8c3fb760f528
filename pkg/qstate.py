"""
================================================================================
QSTATE - DENSE STATEVECTOR KERNEL
================================================================================

PURPOSE:
    Pure-state simulation kernel used by every other module: state
    preparation, local gate application, Pauli action, partial traces and
    expectation values.

CONVENTIONS:
    Qubit ordering is LITTLE-ENDIAN. Qubit q is bit q of the amplitude index,
    so for n = 2 the amplitude index 1 is the ket |01> (qubit 0 set).
    Basis bitstrings are read like kets: the rightmost character is qubit 0.

    A gate acting on targets (t0, t1, ...) uses the same convention locally:
    t0 is the least significant bit of the gate's row/column index. CNOT with
    control c and target t is therefore applied with targets (c, t).

    Gates are applied by contracting the gate tensor against the reshaped
    amplitude tensor; the full 2^n x 2^n operator is never materialized.
    All kernels accept a trailing batch axis (one state per column).

================================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from pauli import Observable, PauliString

# =============================================================================
# CONFIGURATION
# =============================================================================

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
IMAG_TOL = 1e-10

MAX_REDUCED_QUBITS = 12      # dense reduced density matrix budget
MAX_TOTAL_QUBITS = 24        # tensor_copies budget

STATE_KINDS = ("zero", "basis", "product_random", "haar", "bell_paved")

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Local index = control bit + 2 * target bit (targets passed as (control, target))
CNOT = np.array([
    [1, 0, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
    [0, 1, 0, 0],
], dtype=complex)


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class QubitSet:
    """Strictly increasing tuple of qubit indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(q) for q in self.indices)
        if any(q < 0 for q in idx):
            raise ValueError(f"Negative qubit index in {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"Qubit indices must be strictly increasing: {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, qubits: Iterable[int]) -> "QubitSet":
        """Build from any iterable; duplicates are rejected, order is not."""
        qubits = [int(q) for q in qubits]
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"Duplicate qubit indices in {qubits}")
        return cls(tuple(sorted(qubits)))

    def check(self, num_qubits: int) -> "QubitSet":
        if self.indices and self.indices[-1] >= num_qubits:
            raise ValueError(
                f"Qubit index {self.indices[-1]} out of range for {num_qubits} qubits"
            )
        return self

    def complement(self, num_qubits: int) -> "QubitSet":
        self.check(num_qubits)
        return QubitSet(tuple(q for q in range(num_qubits) if q not in self.indices))

    def union(self, other: Iterable[int]) -> "QubitSet":
        return QubitSet.of(set(self.indices) | set(other))

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def __contains__(self, q):
        return q in self.indices

    def __repr__(self):
        return "{" + ",".join(str(q) for q in self.indices) + "}"


@dataclass(frozen=True)
class StateVector:
    """n-qubit pure state (unit-norm, 2^n complex128 amplitudes)."""

    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError(f"num_qubits must be >= 1, got {self.num_qubits}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 2 ** self.num_qubits:
            raise ValueError(
                f"Expected {2 ** self.num_qubits} amplitudes, got {amps.shape[0]}"
            )
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"State is not normalized (norm^2 = {norm:.3e})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        num_qubits = int(round(np.log2(amps.shape[0])))
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(num_qubits, amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True)
class DensityMatrix:
    """Reduced (or full) density matrix on num_qubits qubits."""

    num_qubits: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=np.complex128)
        d = 2 ** self.num_qubits
        if rho.shape != (d, d):
            raise ValueError(f"Expected a {d}x{d} matrix, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise ValueError("Density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > HERMITIAN_TOL:
            raise ValueError(f"Density matrix trace is {np.trace(rho).real:.3e}, expected 1")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues clamped to [0, 1] after the PSD tolerance check."""
        vals = np.linalg.eigvalsh(self.entries)
        if vals.min() < -PSD_TOL:
            raise ValueError(f"Density matrix has negative eigenvalue {vals.min():.3e}")
        return np.clip(vals, 0.0, 1.0)


# =============================================================================
# LOW-LEVEL KERNELS (raw arrays, optional trailing batch axis)
# =============================================================================

def _state_axes(targets: Sequence[int], num_qubits: int) -> list[int]:
    """Tensor axes of `targets`, most significant local bit first."""
    return [num_qubits - 1 - q for q in reversed(targets)]


def apply_matrix(amps: np.ndarray, gate: np.ndarray, targets: Sequence[int],
                 num_qubits: int) -> np.ndarray:
    """Contract a 2^k x 2^k gate into the amplitude tensor. No validation."""
    k = len(targets)
    batch = amps.shape[1:]
    psi = amps.reshape((2,) * num_qubits + batch)
    axes = _state_axes(targets, num_qubits)
    g = gate.reshape((2,) * (2 * k))
    out = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(amps.shape)


def _parity(values: np.ndarray) -> np.ndarray:
    v = values.copy()
    p = np.zeros_like(v)
    while v.any():
        p ^= v & 1
        v >>= 1
    return p


def pauli_masks(letters: Sequence[str]) -> tuple[int, int, int]:
    """(x_mask, z_mask, num_y) of a Pauli string, letters[q] acting on qubit q."""
    x_mask = z_mask = num_y = 0
    for q, letter in enumerate(letters):
        if letter in ("X", "Y"):
            x_mask |= 1 << q
        if letter in ("Z", "Y"):
            z_mask |= 1 << q
        if letter == "Y":
            num_y += 1
    return x_mask, z_mask, num_y


def apply_pauli_masks(amps: np.ndarray, x_mask: int, z_mask: int, num_y: int) -> np.ndarray:
    """P|i> = i^{num_y} (-1)^{|i & z_mask|} |i ^ x_mask>."""
    idx = np.arange(amps.shape[0])
    sign = 1 - 2 * _parity(idx & z_mask)
    phase = (1j) ** (num_y % 4) * sign
    if amps.ndim > 1:
        phase = phase.reshape((-1,) + (1,) * (amps.ndim - 1))
    out = np.empty_like(amps)
    out[idx ^ x_mask] = phase * amps
    return out


def expectation_batch(amps: np.ndarray, obs: "Observable") -> np.ndarray:
    """Real expectation values of `obs` for each column of `amps`."""
    total = np.zeros(amps.shape[1:], dtype=complex)
    for coeff, string in obs.terms:
        if string.is_identity:
            # columns are unit-norm states
            total = total + coeff
            continue
        p_amps = apply_pauli_masks(amps, string.x_mask, string.z_mask, string.num_y)
        total = total + coeff * np.sum(amps.conj() * p_amps, axis=0)
    scale = max(1.0, sum(abs(c) for c, _ in obs.terms))
    if np.max(np.abs(np.imag(total)), initial=0.0) > IMAG_TOL * scale:
        raise ValueError("Expectation value has a non-negligible imaginary part")
    return np.real(total)


def permute_rows(matrix: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """
    Relabel qubits along axis 0: virtual qubit j becomes real qubit order[j].
    Works on state vectors and on matrices (acting on their row index).
    """
    n = len(order)
    inverse = [0] * n
    for j, q in enumerate(order):
        inverse[q] = j
    rest = matrix.shape[1:]
    tensor = matrix.reshape((2,) * n + rest)
    axes = [n - 1 - inverse[n - 1 - a] for a in range(n)]
    axes += list(range(n, n + len(rest)))
    return np.transpose(tensor, axes).reshape(matrix.shape)


# =============================================================================
# STATE PREPARATION
# =============================================================================

def _single_qubit_haar(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return v / np.linalg.norm(v)


def product_state(single_qubit_states: Sequence[np.ndarray]) -> StateVector:
    """Tensor product; element q is the state of qubit q."""
    amps = np.array([1.0 + 0j])
    for v in single_qubit_states:
        amps = np.kron(v, amps)
    return StateVector(len(single_qubit_states), amps)


def prepare_state(kind: str, n: int, seed=None, bitstring: str | None = None) -> StateVector:
    """
    Prepare an n-qubit state.

    kind: zero | basis | product_random | haar | bell_paved
    seed: int or numpy Generator (random kinds are deterministic given seed).
    """
    if n <= 0:
        raise ValueError(f"n must be >= 1, got {n}")
    if kind not in STATE_KINDS:
        raise ValueError(f"Unknown state kind {kind!r}; expected one of {STATE_KINDS}")
    dim = 2 ** n

    if kind == "zero":
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
        return StateVector(n, amps)

    if kind == "basis":
        if bitstring is None or len(bitstring) != n or set(bitstring) - {"0", "1"}:
            raise ValueError(f"basis state needs a {n}-character 0/1 bitstring, got {bitstring!r}")
        amps = np.zeros(dim, dtype=complex)
        amps[int(bitstring, 2)] = 1.0
        return StateVector(n, amps)

    if kind == "bell_paved":
        if n % 2:
            raise ValueError(f"bell_paved needs an even number of qubits, got {n}")
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        amps = np.array([1.0 + 0j])
        for _ in range(n // 2):
            amps = np.kron(bell, amps)
        return StateVector(n, amps)

    rng = np.random.default_rng(seed)
    if kind == "product_random":
        return product_state([_single_qubit_haar(rng) for _ in range(n)])

    amps = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(n, amps / np.linalg.norm(amps))


# =============================================================================
# OPERATIONS
# =============================================================================

def _check_targets(targets: Sequence[int], num_qubits: int):
    if len(targets) == 0:
        raise ValueError("Gate needs at least one target qubit")
    if len(set(targets)) != len(targets):
        raise ValueError(f"Duplicate gate targets {tuple(targets)}")
    for q in targets:
        if not 0 <= q < num_qubits:
            raise ValueError(f"Target qubit {q} out of range for {num_qubits} qubits")


def apply_unitary(state: StateVector, gate: np.ndarray, targets: Sequence[int]) -> StateVector:
    """Apply a unitary on `targets` (targets[0] = least significant local bit)."""
    targets = tuple(targets.indices if isinstance(targets, QubitSet) else targets)
    _check_targets(targets, state.num_qubits)
    gate = np.asarray(gate, dtype=complex)
    side = 2 ** len(targets)
    if gate.shape != (side, side):
        raise ValueError(f"Gate of shape {gate.shape} does not act on {len(targets)} qubits")
    if np.max(np.abs(gate.conj().T @ gate - np.eye(side))) > UNITARY_TOL:
        raise ValueError("Gate is not unitary")
    out = apply_matrix(state.amplitudes, gate, targets, state.num_qubits)
    return StateVector(state.num_qubits, out)


def apply_pauli(state: StateVector, string: "PauliString") -> StateVector:
    if len(string.letters) != state.num_qubits:
        raise ValueError("Pauli string and state have different qubit counts")
    out = apply_pauli_masks(state.amplitudes, string.x_mask, string.z_mask, string.num_y)
    return StateVector(state.num_qubits, out)


def reduced_density(state: StateVector, subsystem) -> DensityMatrix:
    """psi_L = Tr_{complement}[|psi><psi|], little-endian over the kept qubits."""
    keep = subsystem if isinstance(subsystem, QubitSet) else QubitSet.of(subsystem)
    keep.check(state.num_qubits)
    if len(keep) == 0:
        raise ValueError("Subsystem must be nonempty")
    if len(keep) > MAX_REDUCED_QUBITS:
        raise ValueError(
            f"Subsystem of {len(keep)} qubits exceeds the dense budget of {MAX_REDUCED_QUBITS}"
        )
    n = state.num_qubits
    rest = keep.complement(n)
    psi = state.amplitudes.reshape((2,) * n)
    order = _state_axes(keep.indices, n) + _state_axes(rest.indices, n)
    mat = np.transpose(psi, order).reshape(2 ** len(keep), -1)
    rho = mat @ mat.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(len(keep), rho)


def expectation(state: StateVector, obs: "Observable") -> float:
    """sum_i c_i <psi|P_i|psi>."""
    if obs.num_qubits != state.num_qubits:
        raise ValueError(
            f"Observable acts on {obs.num_qubits} qubits, state has {state.num_qubits}"
        )
    return float(expectation_batch(state.amplitudes, obs))


def tensor_copies(state: StateVector, k: int) -> StateVector:
    """|psi>^{(x)k}; copy c occupies qubits c*n .. (c+1)*n - 1."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k * state.num_qubits > MAX_TOTAL_QUBITS:
        raise ValueError(
            f"{k} copies of {state.num_qubits} qubits exceed the {MAX_TOTAL_QUBITS}-qubit budget"
        )
    amps = state.amplitudes
    for _ in range(k - 1):
        amps = np.kron(state.amplitudes, amps)
    return StateVector(k * state.num_qubits, amps)


def embed_operator(matrix: np.ndarray, targets: Sequence[int], num_qubits: int) -> np.ndarray:
    """Dense 2^n operator acting as `matrix` on `targets` and identity elsewhere."""
    targets = list(targets)
    _check_targets(targets, num_qubits)
    rest = [q for q in range(num_qubits) if q not in targets]
    virtual = np.kron(np.eye(2 ** len(rest)), np.asarray(matrix, dtype=complex))
    order = targets + rest
    rows = permute_rows(virtual, order)
    return permute_rows(rows.conj().T, order).conj().T
