"""
================================================================================
SCRAMBLING - ENTANGLEMENT AND INFORMATION-SCRAMBLING MEASURES
================================================================================

PURPOSE:
    Measures on a marginal psi_L of a pure state:
        S(psi_L)   entanglement entropy in bits
        I_L(psi)   ||psi_L - I/d_L||_1, distance from maximally mixed
        P(psi_L)   purity Tr[psi_L^2]
    plus the loss concentration bound built from light-cones, the area/volume
    law probe over state families and a bound-domination sweep.

BOUNDS CHECKED BY THE TESTS:
    I_L <= sqrt(2 ln2 (|L| - S_bits))          (Pinsker, base converted)
    I_L >= ||psi_L - I/d_L||_2                  (always)
    |f(theta) - f_trv| <= sum_i |c_i| I_{lightcone(P_i)}(psi)

LAW PROBE OUTPUT (one row per n and |L|):
    n, lambda_size, t, mean_entropy, mean_I, std_error, mean_deficit,
    min_I, max_I
    L is always the contiguous block 0 .. |L|-1.

================================================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress

from gradients import RunningStats, draw_input, loss_value, parallel_map, sample_rng
from hea import build_hea, lightcone
from pauli import Observable, PauliString, trivial_value
from qstate import QubitSet, StateVector, reduced_density

# =============================================================================
# CONFIGURATION
# =============================================================================

EIGEN_FLOOR = 1e-10
DOMINATION_TOL = 1e-9
STATE_FAMILIES = ("zero", "product_random", "haar", "bell_paved", "gde_evolved")
LAW_COLUMNS = ["n", "lambda_size", "t", "mean_entropy", "mean_I", "std_error",
               "mean_deficit", "min_I", "max_I"]
CONCENTRATION_COLUMNS = ["family", "n", "depth", "locality", "instances",
                         "violations", "worst_ratio"]


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class ScramblingReport:
    subsystem: QubitSet
    entropy_bits: float
    entropy_deficit: float
    purity: float
    i_measure: float

    @property
    def pinsker_bound(self) -> float:
        return math.sqrt(2 * math.log(2) * max(self.entropy_deficit, 0.0))


@dataclass(frozen=True)
class LawProbeReport:
    family: str
    rows: list[dict] = field(repr=False)
    slopes: dict[int, float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=LAW_COLUMNS)


@dataclass(frozen=True)
class ConcentrationCheck:
    rows: list[dict] = field(repr=False)
    instances: int
    violations: int
    worst_ratio: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=CONCENTRATION_COLUMNS)


# =============================================================================
# MEASURES
# =============================================================================

def _marginal_eigenvalues(state: StateVector, subsystem) -> tuple[QubitSet, np.ndarray]:
    keep = subsystem if isinstance(subsystem, QubitSet) else QubitSet.of(subsystem)
    return keep, reduced_density(state, keep).eigenvalues


def _entropy_bits(vals: np.ndarray) -> float:
    vals = vals[vals > EIGEN_FLOOR]
    return float(max(0.0, -np.sum(vals * np.log2(vals))))


def entanglement_entropy(state: StateVector, subsystem) -> float:
    """S(psi_L) = -sum lambda log2 lambda, 0 log 0 = 0."""
    _, vals = _marginal_eigenvalues(state, subsystem)
    return _entropy_bits(vals)


def scrambling_measure(state: StateVector, subsystem) -> float:
    """I_L = trace norm of psi_L - I/d_L."""
    _, vals = _marginal_eigenvalues(state, subsystem)
    return float(np.sum(np.abs(vals - 1.0 / vals.shape[0])))


def purity(state: StateVector, subsystem) -> float:
    rho = reduced_density(state, subsystem if isinstance(subsystem, QubitSet) else QubitSet.of(subsystem))
    return float(np.real(np.vdot(rho.entries, rho.entries)))


def hilbert_schmidt_deviation(state: StateVector, subsystem) -> float:
    """||psi_L - I/d_L||_2 = sqrt(P - 1/d_L)."""
    rho = reduced_density(state, subsystem if isinstance(subsystem, QubitSet) else QubitSet.of(subsystem))
    p = float(np.real(np.vdot(rho.entries, rho.entries)))
    return math.sqrt(max(p - 1.0 / rho.dim, 0.0))


def scrambling_report(state: StateVector, subsystem) -> ScramblingReport:
    keep, vals = _marginal_eigenvalues(state, subsystem)
    entropy = _entropy_bits(vals)
    return ScramblingReport(
        subsystem=keep,
        entropy_bits=entropy,
        entropy_deficit=len(keep) - entropy,
        purity=float(np.sum(vals ** 2)),
        i_measure=float(np.sum(np.abs(vals - 1.0 / vals.shape[0]))),
    )


def concentration_bound(circuit, state: StateVector, obs: Observable) -> float:
    """sum_i |c_i| I_{lightcone(P_i)}(psi) over the non-identity terms."""
    cache: dict[QubitSet, float] = {}
    total = 0.0
    for coeff, string in obs.terms:
        if string.is_identity:
            continue
        cone = lightcone(circuit, string)
        if cone not in cache:
            cache[cone] = scrambling_measure(state, cone)
        total += abs(coeff) * cache[cone]
    return total


# =============================================================================
# STATE FAMILIES AND LAW PROBE
# =============================================================================

def state_family(kind: str, t: float = 1.0) -> Callable[[int, np.random.Generator], StateVector]:
    """Named generator (n, rng) -> state; gde_evolved evolves a product state for time t."""
    if kind not in STATE_FAMILIES:
        raise ValueError(f"Unknown state family {kind!r}; expected one of {STATE_FAMILIES}")
    return lambda n, rng: draw_input(kind, n, rng, t)


def _slope(ns: Sequence[int], means: Sequence[float]) -> float:
    if len(ns) < 2 or min(means) <= 0:
        return float("nan")
    return float(linregress(np.asarray(ns, dtype=float), np.log2(means)).slope)


def law_probe(family: str, n_values: Sequence[int], lambda_sizes: Sequence[int],
              samples: int, seed: int, t: float = 1.0, progress: bool = False) -> LawProbeReport:
    """
    Mean entropy deficit and mean I_L versus |L| and n for one state family,
    with the slope of log2(mean I_L) against n per |L|.
    """
    if not n_values or not lambda_sizes:
        raise ValueError("law_probe needs at least one n and one subsystem size")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    make = state_family(family, t)

    rows = []
    for n in n_values:
        sizes = [s for s in lambda_sizes if 1 <= s <= n]

        def one(i, n=n, sizes=sizes):
            state = make(n, sample_rng(seed, n, i))
            return [scrambling_report(state, range(s)) for s in sizes]

        reports = parallel_map(one, range(samples), progress=progress, desc=f"{family} n={n}")
        for j, s in enumerate(sizes):
            i_stats = RunningStats().extend(r[j].i_measure for r in reports)
            entropies = [r[j].entropy_bits for r in reports]
            i_values = [r[j].i_measure for r in reports]
            rows.append({
                "n": n,
                "lambda_size": s,
                "t": t if family == "gde_evolved" else 0.0,
                "mean_entropy": float(np.mean(entropies)),
                "mean_I": i_stats.mean,
                "std_error": i_stats.std_error,
                "mean_deficit": float(s - np.mean(entropies)),
                "min_I": float(np.min(i_values)),
                "max_I": float(np.max(i_values)),
            })

    slopes = {}
    for s in lambda_sizes:
        sel = [r for r in rows if r["lambda_size"] == s]
        slopes[s] = _slope([r["n"] for r in sel], [r["mean_I"] for r in sel])
    return LawProbeReport(family, rows, slopes)


# =============================================================================
# CONCENTRATION SWEEP
# =============================================================================

def random_local_observable(n: int, locality: int, rng: np.random.Generator) -> Observable:
    """One Pauli string with random letters on a random window of `locality` qubits."""
    if not 1 <= locality <= n:
        raise ValueError(f"locality must be in [1, {n}], got {locality}")
    start = int(rng.integers(0, n - locality + 1))
    letters = rng.choice(["X", "Y", "Z"], size=locality)
    ops = {start + k: str(l) for k, l in enumerate(letters)}
    return Observable(n, ((1.0, PauliString.from_sparse(ops, n)),))


def concentration_check(families: Sequence[str], n_values: Sequence[int],
                        depths: Sequence[int], localities: Sequence[int],
                        instances: int, seed: int, t: float = 1.0,
                        progress: bool = False) -> ConcentrationCheck:
    """
    Instance i lands in cell i mod (#cells) of the families x n x depth x
    locality grid and draws state, observable and theta from sample_rng(seed, i).
    """
    cells = [(f, n, d, k) for f in families for n in n_values for d in depths for k in localities]
    if not cells or instances < 1:
        raise ValueError("concentration_check needs a nonempty grid and instances >= 1")

    def one(i):
        family, n, depth, locality = cells[i % len(cells)]
        rng = sample_rng(seed, i)
        circuit = build_hea(n, depth)
        state = draw_input(family, n, rng, t)
        obs = random_local_observable(n, locality, rng)
        theta = rng.uniform(0.0, 2 * np.pi, size=circuit.num_params)
        deviation = abs(loss_value(circuit, theta, state, obs) - trivial_value(obs))
        bound = concentration_bound(circuit, state, obs)
        return i % len(cells), deviation, bound

    results = parallel_map(one, range(instances), progress=progress, desc="concentration")

    rows = []
    total_violations = 0
    worst = 0.0
    for c, (family, n, depth, locality) in enumerate(cells):
        hits = [(dev, b) for cell, dev, b in results if cell == c]
        if not hits:
            continue
        violations = sum(dev > b + DOMINATION_TOL for dev, b in hits)
        ratio = max((dev / b if b > 0 else (0.0 if dev <= DOMINATION_TOL else math.inf)) for dev, b in hits)
        total_violations += violations
        worst = max(worst, ratio)
        rows.append({
            "family": family, "n": n, "depth": depth, "locality": locality,
            "instances": len(hits), "violations": int(violations), "worst_ratio": float(ratio),
        })
    return ConcentrationCheck(rows, instances, int(total_violations), float(worst))
