"""
================================================================================
RANDMAT - HAAR SAMPLING, GDE HAMILTONIANS AND CLOSED-FORM PREDICTIONS
================================================================================

PURPOSE:
    Random-matrix side of the lab:
        - Haar unitaries (QR of a Ginibre matrix, phase-fixed R diagonal)
        - Gaussian Diagonal Ensemble (GDE) Hamiltonians: 2^n iid Normal(0, 1/2)
          eigenvalues with Haar-random eigenvectors, sampled directly
        - time evolution through the eigenbasis
        - normalized 2k-spectral form factors
        - closed-form GDE / Haar predictions used as Monte-Carlo oracles

NOTES:
    All closed forms drop their O(2^-n) corrections; test tolerances
    absorb them.
    Dense Hermitian matrices passed to evolve() are diagonalized once and
    cached by content hash.

================================================================================
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from qstate import StateVector

# =============================================================================
# CONFIGURATION
# =============================================================================

MAX_HAAR_DIM = 4096
MAX_GDE_QUBITS = 12
GDE_SIGMA = 0.5
UNITARY_TOL = 1e-8
HERMITIAN_TOL = 1e-10
EIGEN_CACHE_SIZE = 8

_EIGEN_CACHE: dict[str, "SpectralHamiltonian"] = {}
_EIGEN_CACHE_LOCK = threading.Lock()


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class SpectralHamiltonian:
    """H = sum_k E_k |v_k><v_k| with the v_k as eigenvector columns."""

    num_qubits: int
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = 2 ** self.num_qubits
        vals = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        vecs = np.asarray(self.eigenvectors, dtype=complex)
        if vals.shape != (d,) or vecs.shape != (d, d):
            raise ValueError(f"Expected {d} eigenvalues and a {d}x{d} eigenvector matrix")
        if not np.all(np.isfinite(vals)):
            raise ValueError("Eigenvalues must be finite")
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", vecs)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        v = self.eigenvectors
        return bool(np.max(np.abs(v.conj().T @ v - np.eye(self.dim))) <= tol)

    def unitary(self, t: float) -> np.ndarray:
        """W(t) = exp(-iHt)."""
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ v.conj().T

    def dense(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True)
class GDEHamiltonian(SpectralHamiltonian):
    """A sample of the Gaussian Diagonal Ensemble."""


# =============================================================================
# HAAR AND GDE SAMPLING
# =============================================================================

def haar_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-random dim x dim unitary (Ginibre + QR with phase-normalized R)."""
    if not 1 <= dim <= MAX_HAAR_DIM:
        raise ValueError(f"dim must be in [1, {MAX_HAAR_DIM}], got {dim}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def sample_gde(n: int, seed=None, sigma: float = GDE_SIGMA) -> GDEHamiltonian:
    """2^n iid Normal(0, sigma) eigenvalues and a Haar eigenbasis."""
    if not 1 <= n <= MAX_GDE_QUBITS:
        raise ValueError(f"GDE sampling supports 1 <= n <= {MAX_GDE_QUBITS}, got {n}")
    rng = np.random.default_rng(seed)
    eigenvalues = rng.normal(0.0, sigma, size=2 ** n)
    eigenvectors = haar_unitary(2 ** n, rng)
    return GDEHamiltonian(n, eigenvalues, eigenvectors)


def diagonalize(matrix: np.ndarray) -> SpectralHamiltonian:
    """Eigendecomposition of a dense Hermitian matrix, cached by content."""
    m = np.ascontiguousarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {m.shape}")
    key = hashlib.sha1(m.tobytes()).hexdigest() + str(m.shape)
    with _EIGEN_CACHE_LOCK:
        cached = _EIGEN_CACHE.get(key)
    if cached is not None:
        return cached
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ValueError("Hamiltonian is not Hermitian")
    num_qubits = int(round(math.log2(m.shape[0])))
    if 2 ** num_qubits != m.shape[0]:
        raise ValueError(f"Matrix side {m.shape[0]} is not a power of two")
    vals, vecs = np.linalg.eigh(m)
    result = SpectralHamiltonian(num_qubits, vals, vecs)
    with _EIGEN_CACHE_LOCK:
        if key not in _EIGEN_CACHE and len(_EIGEN_CACHE) >= EIGEN_CACHE_SIZE:
            _EIGEN_CACHE.pop(next(iter(_EIGEN_CACHE)))
        _EIGEN_CACHE[key] = result
    return result


def _as_spectral(h) -> SpectralHamiltonian:
    return h if isinstance(h, SpectralHamiltonian) else diagonalize(h)


# =============================================================================
# TIME EVOLUTION AND FORM FACTORS
# =============================================================================

def evolve(h, state: StateVector, t: float) -> StateVector:
    """exp(-iHt)|psi> through the eigenbasis."""
    spec = _as_spectral(h)
    if spec.dim != state.dim:
        raise ValueError(f"Hamiltonian dimension {spec.dim} != state dimension {state.dim}")
    v = spec.eigenvectors
    coeffs = v.conj().T @ state.amplitudes
    out = v @ (np.exp(-1j * spec.eigenvalues * t) * coeffs)
    return StateVector(state.num_qubits, out)


def evolve_times(h, state: StateVector, times) -> np.ndarray:
    """Columns are exp(-iHt)|psi> for each t in `times`."""
    spec = _as_spectral(h)
    if spec.dim != state.dim:
        raise ValueError(f"Hamiltonian dimension {spec.dim} != state dimension {state.dim}")
    times = np.asarray(times, dtype=float)
    v = spec.eigenvectors
    coeffs = v.conj().T @ state.amplitudes
    phases = np.exp(-1j * np.outer(spec.eigenvalues, times))
    return v @ (coeffs[:, None] * phases)


def spectral_form_factor(h, t: float, k: int) -> float:
    """Normalized c_2k(t) = |sum_j exp(-i E_j t)|^{2k} / d^{2k}."""
    if k not in (1, 2):
        raise ValueError(f"Only k in {{1, 2}} is supported, got {k}")
    vals = h.eigenvalues if isinstance(h, SpectralHamiltonian) else np.linalg.eigvalsh(h)
    d = vals.shape[0]
    trace = np.abs(np.sum(np.exp(-1j * vals * t))) / d
    return float(trace ** (2 * k))


# =============================================================================
# CLOSED-FORM PREDICTIONS
# =============================================================================

def _check_t(t):
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")


def _check_dim(d):
    if d < 2:
        raise ValueError(f"subsystem dimension must be >= 2, got {d}")


def _gde_sff(k, t):
    _check_t(t)
    return math.exp(-k * t * t / 4)


def _gde_loss(t):
    _check_t(t)
    return math.exp(-t * t / 4)


def _gde_loss_second(t, value=1.0):
    _check_t(t)
    return math.exp(-t * t / 2) * value ** 2


def _gde_purity_mean(d_lambda, t):
    _check_t(t)
    _check_dim(d_lambda)
    return 1 / d_lambda + math.exp(-t * t / 2) * (1 - 1 / d_lambda)


def _gde_purity_second(d_lambda, t):
    _check_t(t)
    _check_dim(d_lambda)
    dm1 = d_lambda - 1
    return (1 + 2 * math.exp(-t * t / 2) * dm1 + math.exp(-t * t) * dm1 ** 2) / d_lambda ** 2


def _gde_concentration_prob(t, epsilon):
    _check_t(t)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    return max(0.0, 1 - math.exp(-t * t / 4) / epsilon)


def _scrambling_threshold(lambda_size, t):
    _check_t(t)
    return math.exp(-t * t / 8) / 2 * math.sqrt(1 - 2.0 ** -lambda_size)


def _scrambling_threshold_quartic(lambda_size, t):
    _check_t(t)
    return math.exp(-t * t / 8) / 2 * (1 - 2.0 ** -lambda_size) ** 0.25


def _haar_purity_mean(n, lambda_size):
    d_l, d_r = 2 ** lambda_size, 2 ** (n - lambda_size)
    return (d_l + d_r) / (d_l * d_r + 1)


def _haar_element_moment(dim, k):
    """E|u_00|^{2k} = k! (d-1)! / (d+k-1)!"""
    return math.factorial(k) * math.factorial(dim - 1) / math.factorial(dim + k - 1)


def _cantelli_purity_prob(theta):
    return theta ** 2 / (1 + theta ** 2)


PREDICTIONS = {
    "gde_sff": _gde_sff,
    "gde_loss": _gde_loss,
    "gde_loss_second": _gde_loss_second,
    "gde_purity_mean": _gde_purity_mean,
    "gde_purity_second": _gde_purity_second,
    "gde_concentration_prob": _gde_concentration_prob,
    "scrambling_threshold": _scrambling_threshold,
    "scrambling_threshold_quartic": _scrambling_threshold_quartic,
    "haar_purity_mean": _haar_purity_mean,
    "haar_element_moment": _haar_element_moment,
    "cantelli_purity_prob": _cantelli_purity_prob,
}

PREDICTION_ALIASES = {
    "thm5_threshold": "scrambling_threshold",
    "thm5_threshold_appendix": "scrambling_threshold_quartic",
}


def analytic_prediction(kind: str, **params) -> float:
    """
    Closed-form value of `kind` at `params`.

        gde_sff(k, t)                   exp(-k t^2 / 4)
        gde_loss(t)                     exp(-t^2 / 4)
        gde_loss_second(t, value)       exp(-t^2 / 2) value^2
        gde_purity_mean(d_lambda, t)    1/d + exp(-t^2/2)(1 - 1/d)
        gde_purity_second(d_lambda, t)  (1 + 2e^{-t^2/2}(d-1) + e^{-t^2}(d-1)^2) / d^2
        gde_concentration_prob(t, epsilon)  max(0, 1 - exp(-t^2/4)/epsilon)
        scrambling_threshold(lambda_size, t)  exp(-t^2/8)/2 sqrt(1 - 2^-|L|)
        scrambling_threshold_quartic(lambda_size, t)  same with exponent 1/4
        haar_purity_mean(n, lambda_size)         (d_L + d_R) / (d + 1)
        haar_element_moment(dim, k)              E|u_00|^{2k}
        cantelli_purity_prob(theta)              theta^2 / (1 + theta^2)

    Names in PREDICTION_ALIASES resolve to their canonical kind.
    """
    func = PREDICTIONS.get(PREDICTION_ALIASES.get(kind, kind))
    if func is None:
        raise ValueError(f"Unknown prediction kind {kind!r}; expected one of {sorted(PREDICTIONS)}")
    return float(func(**params))
