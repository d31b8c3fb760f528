"""
================================================================================
TASKS - HAMILTONIAN DISCRIMINATION AND GRADIENT-VS-TIME EXPERIMENTS
================================================================================

PURPOSE:
    1. Hamiltonian discrimination
        Class 1 states evolve under H_S = I_A (x) H_B, which commutes with the
        symmetry P_A (x) I_B; class 0 states evolve under a GDE Hamiltonian
        H_G on all qubits. Both start from the same |z_s> in the +1
        eigenspace of the symmetry. An HEA is trained by gradient descent on
        L(theta) = (1/N) sum_s (y_s - L_s)^2,  L_s = <psi_s|U^dag O U|psi_s>.

    2. Gradient norm versus evolution time
        Random product states evolve under the periodic Heisenberg chain
            H = sum_i X_i X_{i+1} + Y_i Y_{i+1} + 2 Z_i Z_{i+1} + X_i
        and the loss L = 1 - <sum_i Z_i> is differentiated on the evolved
        states. Records the mean ||grad L||_inf and the rescaled two-qubit
        entropy S(rho_{0,1})/2 per (n, t).

DATASET ORDER:
    (1, e^{-i H_S t}|z_0>), (0, e^{-i H_G t}|z_0>), (1, ...|z_1>), ...

EXPERIMENT OUTPUT (one row per n and t):
    n, t, mean_grad_inf_norm, std_error, mean_entropy_2q, samples

    Summary per n: G_sat (mean gradient norm over the last 20% of the t
    grid), t = 0 gradient norm and the entropy at the largest t; across n:
    the log-log slope of G_sat and its correlation with 1 - S.

================================================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import linregress, pearsonr
from tqdm import tqdm

from gradients import (
    RunningStats, loss_batch, loss_value, parallel_map, sample_rng, shift_gradient_batch,
)
from hea import HEACircuit, build_hea
from pauli import Observable, PauliString, identity_observable, sum_z
from qstate import (
    QubitSet, StateVector, apply_pauli_masks, expectation_batch, permute_rows,
    prepare_state, reduced_density,
)
from randmat import (
    GDEHamiltonian, SpectralHamiltonian, analytic_prediction, diagonalize,
    evolve, evolve_times, sample_gde,
)

# =============================================================================
# CONFIGURATION
# =============================================================================

MIN_SYMMETRY_QUBITS = 2
HEISENBERG_MIN_QUBITS = 2
HEISENBERG_MAX_QUBITS = 12
ACCURACY_THRESHOLD = 0.5
SATURATION_FRACTION = 0.2
MAX_BACKTRACKS = 12

EXPERIMENT_COLUMNS = ["n", "t", "mean_grad_inf_norm", "std_error", "mean_entropy_2q", "samples"]


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class DiscriminationSetup:
    n: int
    subsystem: QubitSet
    symmetry: PauliString
    h_s: SpectralHamiltonian = field(repr=False)
    h_b: GDEHamiltonian = field(repr=False)
    h_g: GDEHamiltonian = field(repr=False)
    seed: int | None = None

    @property
    def complement(self) -> QubitSet:
        return self.subsystem.complement(self.n)

    def symmetry_observable(self) -> Observable:
        return Observable(self.n, ((1.0, self.symmetry),))


@dataclass(frozen=True)
class Sample:
    label: int
    state: StateVector


@dataclass(frozen=True)
class Dataset:
    entries: tuple[Sample, ...]
    t: float

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=float)

    @property
    def amplitudes(self) -> np.ndarray:
        """States as columns."""
        return np.stack([e.state.amplitudes for e in self.entries], axis=1)


@dataclass(frozen=True)
class TrainConfig:
    """
    Fixed-step gradient descent. Optional backtracking halves a step that
    raises the loss (up to MAX_BACKTRACKS times) and drops it if it never helps.
    Without init_theta the angles are drawn uniformly from sample_rng(seed, 0).
    """

    step_size: float = 0.05
    iterations: int = 200
    seed: int = 0
    init_theta: tuple[float, ...] | None = None
    backtracking: bool = False

    def __post_init__(self):
        if self.step_size < 0:
            raise ValueError(f"step_size must be >= 0, got {self.step_size}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")


@dataclass(frozen=True)
class TrainResult:
    loss_trajectory: np.ndarray = field(repr=False)
    final_params: np.ndarray = field(repr=False)
    train_accuracy: float


@dataclass(frozen=True)
class DiscriminationResult:
    setup: DiscriminationSetup
    dataset: Dataset
    training: TrainResult
    class_means: dict[str, float]


@dataclass(frozen=True)
class GradientTimeConfig:
    n_values: tuple[int, ...] = (4, 6, 8, 10)
    depth: int = 1
    t_max: float = 4.0
    t_steps: int = 20
    num_states: int = 100
    num_theta_draws: int = 2
    seed: int = 0
    boundary: str = "open"

    def __post_init__(self):
        if not self.n_values:
            raise ValueError("n_values must be nonempty")
        if self.t_max < 0 or self.t_steps < 1:
            raise ValueError(f"Invalid t grid: t_max={self.t_max}, t_steps={self.t_steps}")
        if self.num_states < 1 or self.num_theta_draws < 1:
            raise ValueError("num_states and num_theta_draws must be >= 1")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.t_steps)


@dataclass(frozen=True)
class GradientTimeResult:
    rows: list[dict] = field(repr=False)
    summary: dict

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=EXPERIMENT_COLUMNS)


# =============================================================================
# DISCRIMINATION SETUP AND DATASET
# =============================================================================

def _structured_hamiltonian(n: int, subsystem: QubitSet, h_b: GDEHamiltonian) -> SpectralHamiltonian:
    """I_A (x) H_B: B occupies the low virtual qubits, then the rows are relabelled."""
    rest = subsystem.complement(n)
    d_a = 2 ** len(subsystem)
    virtual = np.kron(np.eye(d_a), h_b.eigenvectors)
    vectors = permute_rows(virtual, list(rest) + list(subsystem))
    return SpectralHamiltonian(n, np.tile(h_b.eigenvalues, d_a), vectors)


def build_setup(n: int, subsystem, seed: int | None = None,
                symmetry: PauliString | None = None) -> DiscriminationSetup:
    subsystem = subsystem if isinstance(subsystem, QubitSet) else QubitSet.of(subsystem)
    subsystem.check(n)
    if len(subsystem) < MIN_SYMMETRY_QUBITS:
        raise ValueError(f"|A| must be >= {MIN_SYMMETRY_QUBITS}, got {len(subsystem)}")
    if len(subsystem) >= n:
        raise ValueError(f"A must leave a nonempty complement, got |A| = {len(subsystem)} of {n}")
    if len(subsystem) > n / 2:
        print(f"Warning: |A| = {len(subsystem)} exceeds n/2 = {n / 2}; the symmetry is not local")

    if symmetry is None:
        symmetry = PauliString.from_sparse({q: "Z" for q in subsystem}, n)
    elif not set(symmetry.support) <= set(subsystem) or symmetry.is_identity:
        raise ValueError(f"Symmetry {symmetry} must be a non-identity string supported on {subsystem}")

    rng = np.random.default_rng(seed)
    h_b = sample_gde(n - len(subsystem), rng)
    h_g = sample_gde(n, rng)
    h_s = _structured_hamiltonian(n, subsystem, h_b)
    return DiscriminationSetup(n, subsystem, symmetry, h_s, h_b, h_g, seed)


def symmetric_state(setup: DiscriminationSetup, rng: np.random.Generator) -> StateVector:
    """Haar-random state of the +1 eigenspace of the symmetry."""
    dim = 2 ** setup.n
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    s = setup.symmetry
    z = (z + apply_pauli_masks(z, s.x_mask, s.z_mask, s.num_y)) / 2
    return StateVector(setup.n, z / np.linalg.norm(z))


def build_dataset(setup: DiscriminationSetup, t: float, size: int, seed: int | None = None) -> Dataset:
    if size < 2 or size % 2:
        raise ValueError(f"Dataset size must be even and >= 2, got {size}")
    rng = np.random.default_rng(seed)
    entries = []
    for _ in range(size // 2):
        z = symmetric_state(setup, rng)
        entries.append(Sample(1, evolve(setup.h_s, z, t)))
        entries.append(Sample(0, evolve(setup.h_g, z, t)))
    return Dataset(tuple(entries), float(t))


def symmetry_readout(setup: DiscriminationSetup, dataset: Dataset) -> np.ndarray:
    """<psi_s| P_A (x) I |psi_s> per entry (L_s when U^dag O U is the symmetry)."""
    return expectation_batch(dataset.amplitudes, setup.symmetry_observable())


# =============================================================================
# LOSSES AND TRAINING
# =============================================================================

def loss_s(circuit: HEACircuit, theta, entry: Sample, obs: Observable) -> float:
    return loss_value(circuit, theta, entry.state, obs)


def empirical_loss(circuit: HEACircuit, theta, dataset: Dataset, obs: Observable) -> float:
    """(1/N) sum_s (y_s - L_s)^2."""
    if dataset.size == 0:
        raise ValueError("Dataset is empty")
    predictions = loss_batch(circuit, theta, dataset.amplitudes, obs)
    return float(np.mean((dataset.labels - predictions) ** 2))


def _loss_and_predictions(circuit, theta, amps, labels, obs):
    predictions = loss_batch(circuit, theta, amps, obs)
    return float(np.mean((labels - predictions) ** 2)), predictions


def train(circuit: HEACircuit, dataset: Dataset, obs: Observable, config: TrainConfig,
          progress: bool = False) -> TrainResult:
    """Gradient descent with parameter-shift gradients of the empirical loss."""
    if dataset.size == 0:
        raise ValueError("Dataset is empty")
    if config.init_theta is not None:
        theta = np.asarray(config.init_theta, dtype=float).copy()
        if theta.shape != (circuit.num_params,):
            raise ValueError(f"init_theta has {theta.shape[0]} entries, expected {circuit.num_params}")
    else:
        theta = sample_rng(config.seed, 0).uniform(0.0, 2 * np.pi, size=circuit.num_params)

    amps, labels = dataset.amplitudes, dataset.labels
    loss, predictions = _loss_and_predictions(circuit, theta, amps, labels, obs)
    trajectory = [loss]

    for _ in tqdm(range(config.iterations), desc="train", disable=not progress):
        d_pred = shift_gradient_batch(circuit, theta, amps, obs)
        grad = (2.0 / dataset.size) * d_pred @ (predictions - labels)
        step = config.step_size
        for _ in range(MAX_BACKTRACKS + 1):
            candidate = theta - step * grad
            new_loss, new_predictions = _loss_and_predictions(circuit, candidate, amps, labels, obs)
            if new_loss <= loss or not config.backtracking:
                theta, loss, predictions = candidate, new_loss, new_predictions
                break
            step /= 2
        trajectory.append(loss)

    accuracy = float(np.mean((predictions > ACCURACY_THRESHOLD) == (labels == 1)))
    return TrainResult(np.array(trajectory), theta, accuracy)


def run_discrimination(n: int, subsystem_size: int, t: float, size: int, depth: int,
                       config: TrainConfig, seed: int, progress: bool = False) -> DiscriminationResult:
    """Setup, dataset and training in one call; A is the first block of qubits."""
    setup = build_setup(n, range(subsystem_size), seed)
    dataset = build_dataset(setup, t, size, seed + 1)
    circuit = build_hea(n, depth)
    obs = setup.symmetry_observable()
    result = train(circuit, dataset, obs, config, progress)

    labels = dataset.labels
    predictions = loss_batch(circuit, result.final_params, dataset.amplitudes, obs)
    readout = symmetry_readout(setup, dataset)
    class_means = {
        "trained_symmetric": float(np.mean(predictions[labels == 1])),
        "trained_gde": float(np.mean(predictions[labels == 0])),
        "readout_symmetric": float(np.mean(readout[labels == 1])),
        "readout_gde": float(np.mean(readout[labels == 0])),
        "predicted_gde": analytic_prediction("gde_loss", t=t),
    }
    return DiscriminationResult(setup, dataset, result, class_means)


# =============================================================================
# HEISENBERG CHAIN
# =============================================================================

def heisenberg_observable(n: int) -> Observable:
    """Periodic chain; for n = 2 both bonds are the pair (0, 1) and add up."""
    if not HEISENBERG_MIN_QUBITS <= n <= HEISENBERG_MAX_QUBITS:
        raise ValueError(
            f"Heisenberg chain supports {HEISENBERG_MIN_QUBITS} <= n <= {HEISENBERG_MAX_QUBITS}, got {n}"
        )
    terms = []
    for i in range(n):
        j = (i + 1) % n
        terms.append((1.0, PauliString.from_sparse({i: "X", j: "X"}, n)))
        terms.append((1.0, PauliString.from_sparse({i: "Y", j: "Y"}, n)))
        terms.append((2.0, PauliString.from_sparse({i: "Z", j: "Z"}, n)))
        terms.append((1.0, PauliString.from_sparse({i: "X"}, n)))
    return Observable(n, tuple(terms))


def heisenberg_hamiltonian(n: int) -> np.ndarray:
    return heisenberg_observable(n).matrix()


def magnetization_loss(n: int) -> Observable:
    """L = 1 - sum_i Z_i."""
    return Observable(n, identity_observable(n).terms + sum_z(n, -1.0).terms)


# =============================================================================
# GRADIENT VERSUS TIME
# =============================================================================

def _entropy_2q(amps: np.ndarray, n: int) -> np.ndarray:
    """S(rho_{0,1}) / 2 in bits for every column."""
    out = np.empty(amps.shape[1])
    for c in range(amps.shape[1]):
        vals = reduced_density(StateVector(n, amps[:, c]), (0, 1)).eigenvalues
        vals = vals[vals > 1e-12]
        out[c] = -np.sum(vals * np.log2(vals)) / 2
    return out


def _experiment_for_n(n: int, config: GradientTimeConfig, progress: bool) -> tuple[list[dict], dict]:
    times = config.times
    spectral = diagonalize(heisenberg_hamiltonian(n))
    circuit = build_hea(n, config.depth, config.boundary)
    obs = magnetization_loss(n)

    evolved = [
        evolve_times(spectral, prepare_state("product_random", n, sample_rng(config.seed, n, 0, i)), times)
        for i in range(config.num_states)
    ]
    amps = np.concatenate(evolved, axis=1)
    shape = (config.num_states, len(times))

    norms = []
    for j in range(config.num_theta_draws):
        theta = sample_rng(config.seed, n, 1, j).uniform(0.0, 2 * np.pi, size=circuit.num_params)
        rows = parallel_map(
            lambda nu: shift_gradient_batch(circuit, theta, amps, obs, nu)[0],
            range(circuit.num_params), progress=progress, desc=f"n={n} draw {j + 1}",
        )
        norms.append(np.max(np.abs(np.array(rows)), axis=0).reshape(shape))
    norms = np.stack(norms)
    entropy = _entropy_2q(amps, n).reshape(shape)

    records = []
    for k, t in enumerate(times):
        stats = RunningStats().extend(norms[:, :, k].reshape(-1))
        records.append({
            "n": n,
            "t": float(t),
            "mean_grad_inf_norm": stats.mean,
            "std_error": stats.std_error,
            "mean_entropy_2q": float(np.mean(entropy[:, k])),
            "samples": stats.count,
        })

    window = max(1, int(math.ceil(SATURATION_FRACTION * len(times))))
    summary = {
        "g_sat": float(np.mean([r["mean_grad_inf_norm"] for r in records[-window:]])),
        "g_t0": records[0]["mean_grad_inf_norm"],
        "entropy_final": records[-1]["mean_entropy_2q"],
    }
    return records, summary


def gradient_vs_time_experiment(config: GradientTimeConfig, progress: bool = False) -> GradientTimeResult:
    rows: list[dict] = []
    per_n: dict[int, dict] = {}
    for idx, n in enumerate(config.n_values, start=1):
        print(f"  [{idx}/{len(config.n_values)}] n = {n}: {config.num_states} states x "
              f"{config.num_theta_draws} angle draws x {config.t_steps} times")
        records, summary = _experiment_for_n(n, config, progress)
        rows.extend(records)
        per_n[n] = summary

    ns = list(per_n)
    g_sat = np.array([per_n[n]["g_sat"] for n in ns])
    one_minus_s = np.array([1.0 - per_n[n]["entropy_final"] for n in ns])
    slope = float("nan")
    correlation = float("nan")
    if len(ns) >= 2 and np.all(g_sat > 0):
        slope = float(linregress(np.log(ns), np.log(g_sat)).slope)
    if len(ns) >= 3 and np.std(g_sat) > 0 and np.std(one_minus_s) > 0:
        correlation = float(pearsonr(g_sat, one_minus_s)[0])

    summary = {
        "per_n": {str(n): per_n[n] for n in ns},
        "log_log_slope": slope,
        "correlation_gsat_one_minus_entropy": correlation,
    }
    return GradientTimeResult(rows, summary)
