"""
================================================================================
GRADIENTS - LOSSES, SHIFT-RULE GRADIENTS AND MONTE-CARLO VARIANCES
================================================================================

PURPOSE:
    Evaluate f(theta) = <psi| U^dag(theta) O U(theta) |psi>, its exact
    parameter-shift gradient and a finite-difference oracle, Monte-Carlo
    variance estimators over theta / input states, and the G_n variance
    lower bound for a two-qubit observable at the middle of the chain.

SHIFT RULE:
    half convention   d_nu f = [f(theta + pi/2 e_nu) - f(theta - pi/2 e_nu)] / 2
    full convention   d_nu f =  f(theta + pi/4 e_nu) - f(theta - pi/4 e_nu)

MONTE CARLO:
    Sample i draws everything (input state, theta, 2-design dressing) from
    sample_rng(seed, i). Samples are evaluated through parallel_map, which
    keeps input order, and then accumulated in index order, so a report
    does not depend on HEA_LAB_THREADS.

G_n LOWER BOUND:
    G_n = c^{2D} (2/225) eta(O) sum_{k<k'} eta(psi_{k,k'}),
    k, k' in [n/2 - D, n/2 + D], psi_{k,k'} the marginal on qubits k..k'.
    c = 2/5 ("standard") or 1/5 ("conservative").

================================================================================
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from tqdm import tqdm

from hea import (
    ANGLE_CONVENTIONS, BOUNDARIES, HEACircuit, TwoDesignDressing,
    build_hea, last_parameter_before, run_circuit, sample_two_design_dressing,
)
from pauli import Observable, eta, parse_observable
from qstate import (
    PAULI_I, PAULI_X, PAULI_Y, PAULI_Z,
    StateVector, expectation_batch, prepare_state, reduced_density,
)
from randmat import evolve, sample_gde

# =============================================================================
# CONFIGURATION
# =============================================================================

THREADS_ENV = "HEA_LAB_THREADS"
DEFAULT_FD_STEP = 1e-5

INPUT_FAMILIES = ("zero", "product_random", "haar", "bell_paved", "gde_evolved")
THETA_MODES = ("uniform", "two_design")
ESTIMATORS = ("loss_value", "gradient_component", "loss_difference")
GN_VARIANTS = {"standard": 2 / 5, "conservative": 1 / 5}
GN_VARIANT_ALIASES = {"main": "standard", "appendix": "conservative"}
GN_PREFACTOR = 2 / 225

_LOCAL_PAULI = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class GradientReport:
    values: np.ndarray = field(repr=False)
    inf_norm: float

    @classmethod
    def from_values(cls, values) -> "GradientReport":
        values = np.asarray(values, dtype=float).reshape(-1)
        inf_norm = float(np.max(np.abs(values))) if values.size else 0.0
        return cls(values, inf_norm)


@dataclass(frozen=True)
class VarianceReport:
    estimator_kind: str
    samples: int
    mean: float
    variance: float
    std_error_of_mean: float
    parameter: int | None = None
    shift: float | None = None

    @property
    def abs_mean(self) -> float:
        return abs(self.mean)

    def to_dict(self) -> dict:
        return asdict(self)


class RunningStats:
    """Welford accumulator; merge() combines partial accumulators (Chan et al.)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def extend(self, values: Iterable[float]) -> "RunningStats":
        for x in values:
            self.push(float(x))
        return self

    def merge(self, other: "RunningStats") -> "RunningStats":
        out = RunningStats()
        out.count = self.count + other.count
        if out.count == 0:
            return out
        delta = other.mean - self.mean
        out.mean = self.mean + delta * other.count / out.count
        out.m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / out.count
        return out

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std_error(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count else 0.0


@dataclass(frozen=True)
class SamplerSpec:
    """Declarative Monte-Carlo setup; serializable to JSON for CLI configs."""

    n: int
    depth: int
    observable: str
    input_family: str = "product_random"
    gde_time: float = 1.0
    theta_mode: str = "uniform"
    estimator: str = "loss_value"
    parameter: int | None = None
    shift: float = np.pi
    boundary: str = "open"
    angle_convention: str = "half"
    fixed_input: bool = False

    def __post_init__(self):
        if self.input_family not in INPUT_FAMILIES:
            raise ValueError(f"Unknown input family {self.input_family!r}; expected one of {INPUT_FAMILIES}")
        if self.theta_mode not in THETA_MODES:
            raise ValueError(f"Unknown theta mode {self.theta_mode!r}; expected one of {THETA_MODES}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"Unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"Unknown boundary {self.boundary!r}")
        if self.angle_convention not in ANGLE_CONVENTIONS:
            raise ValueError(f"Unknown angle convention {self.angle_convention!r}")

    def circuit(self) -> HEACircuit:
        return build_hea(self.n, self.depth, self.boundary, self.angle_convention)

    def parsed_observable(self) -> Observable:
        return parse_observable(self.observable, self.n)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SamplerSpec":
        data = json.loads(text)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"Unknown sampler keys {sorted(unknown)}")
        return cls(**data)


# =============================================================================
# PARALLEL HELPERS
# =============================================================================

def sample_rng(seed: int, *index: int) -> np.random.Generator:
    """Generator for work item `index` under master `seed`."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, index)]))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def parallel_map(fn: Callable, items: Sequence, progress: bool = False, desc: str | None = None) -> list:
    """Ordered map over a thread pool (numpy releases the GIL in its kernels)."""
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in tqdm(items, desc=desc, disable=not progress)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, disable=not progress))


# =============================================================================
# LOSS AND GRADIENTS
# =============================================================================

def loss_batch(circuit: HEACircuit, theta, amps: np.ndarray, obs: Observable,
               dressing: TwoDesignDressing | None = None) -> np.ndarray:
    return expectation_batch(run_circuit(circuit, theta, amps, dressing), obs)


def loss_value(circuit: HEACircuit, theta, state: StateVector, obs: Observable,
               dressing: TwoDesignDressing | None = None) -> float:
    """Tr[U(theta)|psi><psi|U^dag(theta) O]."""
    if obs.num_qubits != circuit.num_qubits or state.num_qubits != circuit.num_qubits:
        raise ValueError("Circuit, state and observable must act on the same number of qubits")
    return float(loss_batch(circuit, theta, state.amplitudes, obs, dressing))


def _indices(circuit: HEACircuit, which) -> list[int]:
    if isinstance(which, str):
        if which != "all":
            raise ValueError(f"which must be 'all' or a parameter index, got {which!r}")
        return list(range(circuit.num_params))
    idx = [int(which)] if np.isscalar(which) else [int(w) for w in which]
    for i in idx:
        if not 0 <= i < circuit.num_params:
            raise ValueError(f"Parameter index {i} out of range [0, {circuit.num_params})")
    return idx


def shift_gradient_batch(circuit: HEACircuit, theta, amps: np.ndarray, obs: Observable,
                         which="all", dressing: TwoDesignDressing | None = None) -> np.ndarray:
    """Rows are d_nu f for the selected nu, columns follow the batch axis of amps."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    s, factor = circuit.shift, circuit.shift_factor
    rows = []
    for nu in _indices(circuit, which):
        plus = theta.copy()
        plus[nu] += s
        minus = theta.copy()
        minus[nu] -= s
        rows.append(factor * (loss_batch(circuit, plus, amps, obs, dressing)
                              - loss_batch(circuit, minus, amps, obs, dressing)))
    return np.array(rows)


def parameter_shift_grad(circuit: HEACircuit, theta, state: StateVector, obs: Observable,
                         which="all", dressing: TwoDesignDressing | None = None) -> GradientReport:
    values = shift_gradient_batch(circuit, theta, state.amplitudes, obs, which, dressing)
    return GradientReport.from_values(values)


def finite_diff_grad(circuit: HEACircuit, theta, state: StateVector, obs: Observable,
                     h: float = DEFAULT_FD_STEP, which="all",
                     dressing: TwoDesignDressing | None = None) -> GradientReport:
    """Central differences [f(theta + h e) - f(theta - h e)] / 2h."""
    if h <= 0:
        raise ValueError(f"h must be > 0, got {h}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    values = []
    for nu in _indices(circuit, which):
        plus = theta.copy()
        plus[nu] += h
        minus = theta.copy()
        minus[nu] -= h
        values.append((loss_value(circuit, plus, state, obs, dressing)
                       - loss_value(circuit, minus, state, obs, dressing)) / (2 * h))
    return GradientReport.from_values(values)


# =============================================================================
# MONTE-CARLO VARIANCE
# =============================================================================

def draw_input(family: str, n: int, rng: np.random.Generator, gde_time: float = 1.0) -> StateVector:
    if family == "gde_evolved":
        start = prepare_state("product_random", n, rng)
        return evolve(sample_gde(n, rng), start, gde_time)
    return prepare_state(family, n, rng)


def _sample_value(sampler: SamplerSpec, circuit: HEACircuit, obs: Observable,
                  parameter: int | None, fixed_state: StateVector | None,
                  rng: np.random.Generator) -> float:
    state = fixed_state if fixed_state is not None else draw_input(
        sampler.input_family, sampler.n, rng, sampler.gde_time
    )
    theta = rng.uniform(0.0, 2 * np.pi, size=circuit.num_params)
    dressing = sample_two_design_dressing(circuit, rng) if sampler.theta_mode == "two_design" else None

    if sampler.estimator == "loss_value":
        return loss_value(circuit, theta, state, obs, dressing)
    if sampler.estimator == "gradient_component":
        return float(shift_gradient_batch(circuit, theta, state.amplitudes, obs, parameter, dressing)[0])
    shifted = theta.copy()
    shifted[parameter] += sampler.shift
    return loss_value(circuit, shifted, state, obs, dressing) - loss_value(circuit, theta, state, obs, dressing)


def variance_report(sampler: SamplerSpec, samples: int, seed: int,
                    progress: bool = False) -> VarianceReport:
    """Monte-Carlo mean and variance of the sampler's estimator."""
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    circuit = sampler.circuit()
    obs = sampler.parsed_observable()

    parameter = None
    if sampler.estimator != "loss_value":
        parameter = sampler.parameter
        if parameter is None:
            parameter = last_parameter_before(circuit, obs.traceless_part().support)
        _indices(circuit, parameter)

    fixed_state = None
    if sampler.fixed_input:
        fixed_state = draw_input(sampler.input_family, sampler.n, sample_rng(seed), sampler.gde_time)

    values = parallel_map(
        lambda i: _sample_value(sampler, circuit, obs, parameter, fixed_state, sample_rng(seed, i)),
        range(samples), progress=progress, desc=sampler.estimator,
    )
    stats = RunningStats().extend(values)
    return VarianceReport(
        estimator_kind=sampler.estimator,
        samples=stats.count,
        mean=stats.mean,
        variance=stats.variance,
        std_error_of_mean=stats.std_error,
        parameter=parameter,
        shift=sampler.shift if sampler.estimator == "loss_difference" else None,
    )


# =============================================================================
# G_n LOWER BOUND
# =============================================================================

def _local_matrix(obs: Observable, qubits: Sequence[int]) -> np.ndarray:
    """Observable restricted to `qubits` (qubits[0] least significant)."""
    dim = 2 ** len(qubits)
    out = np.zeros((dim, dim), dtype=complex)
    for coeff, string in obs.terms:
        m = np.array([[1.0 + 0j]])
        for q in qubits:
            m = np.kron(_LOCAL_PAULI[string.letters[q]], m)
        out += coeff * m
    return out


def gn_lower_bound(n: int, depth: int, state: StateVector, obs: Observable,
                   variant: str = "standard") -> float:
    """Variance lower bound for a two-qubit observable next to qubit n//2."""
    variant = GN_VARIANT_ALIASES.get(variant, variant)
    if variant not in GN_VARIANTS:
        raise ValueError(f"Unknown variant {variant!r}; expected one of {sorted(GN_VARIANTS)}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if state.num_qubits != n or obs.num_qubits != n:
        raise ValueError(f"State and observable must act on {n} qubits")

    m = n // 2
    support = obs.support.indices
    if support not in ((m, m + 1), (m - 1, m)):
        raise ValueError(
            f"Observable support {obs.support} is not a pair of adjacent qubits containing qubit {m}"
        )

    eta_obs = eta(_local_matrix(obs, support))
    lo, hi = max(0, m - depth), min(n - 1, m + depth)
    total = 0.0
    for k in range(lo, hi + 1):
        for k2 in range(k + 1, hi + 1):
            rho = reduced_density(state, range(k, k2 + 1))
            total += eta(rho.entries)

    base = GN_VARIANTS[variant]
    return float(base ** (2 * depth) * GN_PREFACTOR * eta_obs * total)
