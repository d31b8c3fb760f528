"""
================================================================================
PAULI - PAULI-STRING OBSERVABLES
================================================================================

PURPOSE:
    Observables written as weighted sums of Pauli strings, O = sum_i c_i P_i,
    together with the support/cluster bookkeeping used by the light-cone
    bounds, the trivial value f_trv = Tr[O]/2^n and the eta measure.

TEXT GRAMMAR (whitespace-insensitive):
    observable := term ("+" term)*
    term       := float ("*" pauli)+ | float
    pauli      := [XYZ][0-9]+

    "1.0*Z0*Z1 + -0.5*X3"  ->  Z on qubits 0,1 with weight 1, X on 3 with -0.5
    A bare float is a multiple of the identity.

CLUSTERS:
    A support q_1 < q_2 < ... is cut greedily left to right. q_{k+1} joins the
    current cluster iff q_{k+1} - q_k <= threshold (inclusive, the default) or
    q_{k+1} - q_k < threshold when inclusive=False.

================================================================================
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from qstate import QubitSet, apply_pauli_masks, pauli_masks

# =============================================================================
# CONFIGURATION
# =============================================================================

LETTERS = ("I", "X", "Y", "Z")
ETA_HERMITIAN_TOL = 1e-8
MAX_DENSE_QUBITS = 12
CLUSTER_INCLUSIVE = True

_FLOAT_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_PAULI_RE = re.compile(r"([XYZ])(\d+)")


class ObservableSyntaxError(ValueError):
    """Parse failure in the observable text grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class PauliString:
    """letters[q] acts on qubit q."""

    letters: tuple[str, ...]

    def __post_init__(self):
        letters = tuple(self.letters)
        bad = [l for l in letters if l not in LETTERS]
        if bad:
            raise ValueError(f"Invalid Pauli letters {bad}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def from_sparse(cls, ops: Mapping[int, str], num_qubits: int) -> "PauliString":
        letters = ["I"] * num_qubits
        for q, letter in ops.items():
            if not 0 <= q < num_qubits:
                raise ValueError(f"Qubit index {q} out of range for {num_qubits} qubits")
            letters[q] = letter
        return cls(tuple(letters))

    @classmethod
    def identity(cls, num_qubits: int) -> "PauliString":
        return cls(("I",) * num_qubits)

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @cached_property
    def support(self) -> QubitSet:
        return QubitSet(tuple(q for q, l in enumerate(self.letters) if l != "I"))

    @property
    def is_identity(self) -> bool:
        return len(self.support) == 0

    @cached_property
    def _masks(self) -> tuple[int, int, int]:
        return pauli_masks(self.letters)

    @property
    def x_mask(self) -> int:
        return self._masks[0]

    @property
    def z_mask(self) -> int:
        return self._masks[1]

    @property
    def num_y(self) -> int:
        return self._masks[2]

    def matrix(self) -> np.ndarray:
        if self.num_qubits > MAX_DENSE_QUBITS:
            raise ValueError(f"Dense matrix budget is {MAX_DENSE_QUBITS} qubits")
        eye = np.eye(2 ** self.num_qubits, dtype=complex)
        return apply_pauli_masks(eye, self.x_mask, self.z_mask, self.num_y)

    def label(self) -> str:
        if self.is_identity:
            return "I"
        return "*".join(f"{self.letters[q]}{q}" for q in self.support)

    def __str__(self):
        return self.label()


@dataclass(frozen=True)
class Observable:
    """Real-weighted sum of distinct Pauli strings on num_qubits qubits."""

    num_qubits: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        merged: dict[PauliString, float] = {}
        for coeff, string in self.terms:
            if string.num_qubits != self.num_qubits:
                raise ValueError(
                    f"Term {string} acts on {string.num_qubits} qubits, expected {self.num_qubits}"
                )
            merged[string] = merged.get(string, 0.0) + float(coeff)
        terms = tuple((c, s) for s, c in merged.items() if c != 0.0)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, PauliString]], num_qubits: int) -> "Observable":
        return cls(num_qubits, tuple(terms))

    @property
    def is_traceless(self) -> bool:
        return not any(s.is_identity for _, s in self.terms)

    @property
    def support(self) -> QubitSet:
        qubits: set[int] = set()
        for _, s in self.terms:
            qubits.update(s.support)
        return QubitSet.of(qubits)

    def scaled(self, factor: float) -> "Observable":
        return Observable(self.num_qubits, tuple((factor * c, s) for c, s in self.terms))

    def traceless_part(self) -> "Observable":
        return Observable(self.num_qubits, tuple((c, s) for c, s in self.terms if not s.is_identity))

    def matrix(self) -> np.ndarray:
        """Dense 2^n matrix, accumulated column-wise without Kronecker chains."""
        if self.num_qubits > MAX_DENSE_QUBITS:
            raise ValueError(f"Dense matrix budget is {MAX_DENSE_QUBITS} qubits")
        dim = 2 ** self.num_qubits
        out = np.zeros((dim, dim), dtype=complex)
        idx = np.arange(dim)
        for coeff, s in self.terms:
            # phase of P|i> for every basis state i, scattered to row i ^ x_mask
            basis_phase = apply_pauli_masks(np.ones(dim, dtype=complex), 0, s.z_mask, s.num_y)
            out[idx ^ s.x_mask, idx] += coeff * basis_phase
        return out

    def label(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(
            f"{c!r}" if s.is_identity else f"{c!r}*{s.label()}" for c, s in self.terms
        )


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple[QubitSet, ...]
    threshold: int

    def __iter__(self):
        return iter(self.clusters)

    def __len__(self):
        return len(self.clusters)


# =============================================================================
# CONSTRUCTION HELPERS
# =============================================================================

def single_term(ops: Mapping[int, str], num_qubits: int, coeff: float = 1.0) -> Observable:
    return Observable(num_qubits, ((coeff, PauliString.from_sparse(ops, num_qubits)),))


def sum_z(num_qubits: int, coeff: float = 1.0) -> Observable:
    """coeff * sum_i Z_i."""
    return Observable(num_qubits, tuple(
        (coeff, PauliString.from_sparse({q: "Z"}, num_qubits)) for q in range(num_qubits)
    ))


def identity_observable(num_qubits: int, coeff: float = 1.0) -> Observable:
    return Observable(num_qubits, ((coeff, PauliString.identity(num_qubits)),))


# =============================================================================
# OPERATIONS
# =============================================================================

def parse_observable(text: str, n: int) -> Observable:
    """Parse the observable grammar; duplicate strings are merged."""
    pos = 0
    length = len(text)
    terms: list[tuple[float, PauliString]] = []

    def skip_ws(p: int) -> int:
        while p < length and text[p].isspace():
            p += 1
        return p

    while True:
        pos = skip_ws(pos)
        match = _FLOAT_RE.match(text, pos)
        if not match:
            raise ObservableSyntaxError("Expected a coefficient", pos)
        coeff = float(match.group())
        pos = skip_ws(match.end())

        ops: dict[int, str] = {}
        while pos < length and text[pos] == "*":
            pos = skip_ws(pos + 1)
            pmatch = _PAULI_RE.match(text, pos)
            if not pmatch:
                raise ObservableSyntaxError("Expected a Pauli factor like Z3", pos)
            letter, index = pmatch.group(1), int(pmatch.group(2))
            if index >= n:
                raise ObservableSyntaxError(
                    f"Qubit index {index} out of range for {n} qubits", pos
                )
            if index in ops:
                raise ObservableSyntaxError(f"Qubit {index} repeated in one term", pos)
            ops[index] = letter
            pos = skip_ws(pmatch.end())

        terms.append((coeff, PauliString.from_sparse(ops, n)))
        if pos >= length:
            break
        if text[pos] != "+":
            raise ObservableSyntaxError(f"Unexpected character {text[pos]!r}", pos)
        pos += 1

    return Observable(n, tuple(terms))


def clusterize(support, threshold: int, inclusive: bool = CLUSTER_INCLUSIVE) -> ClusterSet:
    """Greedy left-to-right cut of a support into clusters of nearby qubits."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    qubits = support.indices if isinstance(support, QubitSet) else QubitSet(tuple(support)).indices
    clusters: list[list[int]] = []
    for q in qubits:
        if clusters:
            gap = q - clusters[-1][-1]
            joins = gap <= threshold if inclusive else gap < threshold
            if joins:
                clusters[-1].append(q)
                continue
        clusters.append([q])
    return ClusterSet(tuple(QubitSet(tuple(c)) for c in clusters), threshold)


def trivial_value(obs: Observable) -> float:
    """f_trv = Tr[O] / 2^n."""
    return float(sum(c for c, s in obs.terms if s.is_identity))


def _deviation(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"eta needs a square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > ETA_HERMITIAN_TOL:
        raise ValueError("eta needs a Hermitian matrix")
    d = m.shape[0]
    return m - np.trace(m) * np.eye(d) / d


def eta(matrix) -> float:
    """Squared Hilbert-Schmidt deviation Tr[(M - Tr[M] I/d)^2]."""
    dev = _deviation(matrix)
    return float(np.real(np.vdot(dev, dev)))


def eta_norm(matrix) -> float:
    """Non-squared variant ||M - Tr[M] I/d||_2."""
    return float(np.sqrt(eta(matrix)))


def coefficient_l1(obs: Observable) -> float:
    return float(sum(abs(c) for c, _ in obs.terms))
