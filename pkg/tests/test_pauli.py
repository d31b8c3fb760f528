import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pauli import (
    LETTERS, Observable, ObservableSyntaxError, PauliString, clusterize, coefficient_l1, eta, eta_norm,
    identity_observable, parse_observable, single_term, sum_z, trivial_value,
)
from qstate import PAULI_X, PAULI_Y, PAULI_Z, QubitSet, expectation, prepare_state


def test_parse_observable_terms():
    obs = parse_observable("1.0*Z0*Z1 + -0.5*X3", 4)
    assert len(obs.terms) == 2
    assert obs.support.indices == (0, 1, 3)
    assert obs.is_traceless
    labels = sorted(s.label() for _, s in obs.terms)
    assert labels == ["X3", "Z0*Z1"]
    assert coefficient_l1(obs) == pytest.approx(1.5)


def test_parse_whitespace_and_identity():
    obs = parse_observable("  2.5 + 1e-1 * Y2 ", 3)
    assert trivial_value(obs) == pytest.approx(2.5)
    assert not obs.is_traceless
    assert obs.traceless_part().support.indices == (2,)


def test_parse_merges_duplicates():
    merged = parse_observable("1*Z0 + 1*Z0", 2)
    assert merged.terms[0][0] == pytest.approx(2.0)
    cancelled = parse_observable("1*Z0 + -1*Z0", 2)
    assert cancelled.terms == ()


@pytest.mark.parametrize("text,position", [
    ("1.0*Z5", 4),
    ("1.0*Z0*X0", 7),
    ("1.0*Z0 - 2*X1", 7),
    ("*Z0", 0),
    ("1.0*Q0", 4),
])
def test_parse_errors_report_position(text, position):
    with pytest.raises(ObservableSyntaxError) as info:
        parse_observable(text, 3)
    assert info.value.position == position


def test_single_qubit_matrices():
    for letter, expected in (("X", PAULI_X), ("Y", PAULI_Y), ("Z", PAULI_Z)):
        assert np.allclose(PauliString((letter,)).matrix(), expected)


def test_string_matrix_is_little_endian():
    string = PauliString.from_sparse({0: "X", 1: "Z"}, 2)
    assert np.allclose(string.matrix(), np.kron(PAULI_Z, PAULI_X))
    assert string.support.indices == (0, 1)
    assert string.label() == "X0*Z1"


def test_observable_matrix_is_hermitian_sum():
    obs = parse_observable("0.3*X0*Y1 + -1.2*Z2 + 0.7", 3)
    m = obs.matrix()
    assert np.allclose(m, m.conj().T)
    expected = sum(c * s.matrix() for c, s in obs.terms)
    assert np.allclose(m, expected)
    assert np.trace(m).real / 8 == pytest.approx(trivial_value(obs))


@settings(max_examples=40, deadline=None)
@given(letters=st.lists(st.sampled_from("IXYZ"), min_size=3, max_size=3), seed=st.integers(0, 5000))
def test_mask_expectation_matches_dense(letters, seed):
    string = PauliString(tuple(letters))
    state = prepare_state("haar", 3, seed=seed)
    obs = single_term({q: l for q, l in enumerate(letters) if l != "I"}, 3, 0.8)
    dense = np.vdot(state.amplitudes, 0.8 * string.matrix() @ state.amplitudes).real
    assert expectation(state, obs) == pytest.approx(dense, abs=1e-10)


def test_helpers():
    state = prepare_state("zero", 4)
    assert expectation(state, sum_z(4)) == pytest.approx(4.0)
    assert expectation(state, identity_observable(4, 3.0)) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        PauliString.from_sparse({5: "Z"}, 3)
    with pytest.raises(ValueError):
        PauliString(("A",))


def test_clusterize_inclusive_and_exclusive():
    clusters = clusterize(QubitSet((0, 1, 5, 6)), 2)
    assert [c.indices for c in clusters] == [(0, 1), (5, 6)]
    assert len(clusterize([0, 2], 2)) == 1
    assert len(clusterize([0, 2], 2, inclusive=False)) == 2
    assert len(clusterize([], 1)) == 0
    with pytest.raises(ValueError):
        clusterize([0], -1)


def test_clusterize_examples():
    assert [c.indices for c in clusterize([1, 2, 9], 4)] == [(1, 2), (9,)]
    assert [c.indices for c in clusterize([3], 0)] == [(3,)]
    assert [c.indices for c in clusterize([0, 2, 4, 6], 2)] == [(0, 2, 4, 6)]


def test_clusterize_every_support_up_to_eight_qubits():
    for size in range(1, 9):
        for support in itertools.combinations(range(8), size):
            for threshold in range(5):
                clusters = [c.indices for c in clusterize(support, threshold)]
                assert tuple(q for c in clusters for q in c) == support
                for c in clusters:
                    assert all(b - a <= threshold for a, b in zip(c, c[1:]))
                    assert len(clusterize(c, threshold)) == 1
                for left, right in zip(clusters, clusters[1:]):
                    assert right[0] - left[-1] > threshold


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 10_000))
def test_trivial_value_is_the_basis_average(n, seed):
    rng = np.random.default_rng(seed)
    terms = [
        (float(rng.normal()), PauliString(tuple(str(l) for l in rng.choice(LETTERS, size=n))))
        for _ in range(5)
    ]
    obs = Observable(n, tuple(terms))
    average = np.mean([
        expectation(prepare_state("basis", n, bitstring=format(b, f"0{n}b")), obs) for b in range(2 ** n)
    ])
    assert average == pytest.approx(trivial_value(obs), abs=1e-12)


def test_eta_values():
    zz = np.kron(PAULI_Z, PAULI_Z)
    assert eta(zz) == pytest.approx(4.0)
    assert eta_norm(zz) == pytest.approx(2.0)
    pure = np.zeros((4, 4))
    pure[0, 0] = 1.0
    assert eta(pure) == pytest.approx(0.75)
    assert eta(np.eye(4) / 4) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        eta(np.array([[0, 1], [0, 0]]))
