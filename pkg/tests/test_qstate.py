import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qstate import (
    CNOT, PAULI_X, PAULI_Z, DensityMatrix, QubitSet, StateVector,
    apply_unitary, embed_operator, expectation, permute_rows, prepare_state,
    reduced_density, tensor_copies,
)
from pauli import Observable, parse_observable
from randmat import haar_unitary


def test_basis_bitstring_is_little_endian():
    state = prepare_state("basis", 2, bitstring="01")
    assert state.amplitudes[1] == 1.0
    assert expectation(state, parse_observable("1.0*Z0", 2)) == pytest.approx(-1.0)
    assert expectation(state, parse_observable("1.0*Z1", 2)) == pytest.approx(1.0)


def test_prepare_state_rejects_bad_inputs():
    with pytest.raises(ValueError):
        prepare_state("zero", 0)
    with pytest.raises(ValueError):
        prepare_state("ghz", 3)
    with pytest.raises(ValueError):
        prepare_state("basis", 2, bitstring="012")
    with pytest.raises(ValueError):
        prepare_state("bell_paved", 3)


def test_random_kinds_are_seeded():
    a = prepare_state("haar", 5, seed=11)
    b = prepare_state("haar", 5, seed=11)
    c = prepare_state("product_random", 5, seed=11)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    assert np.isclose(np.vdot(c.amplitudes, c.amplitudes).real, 1.0)


def test_state_vector_validation():
    with pytest.raises(ValueError):
        StateVector(2, np.ones(4))
    with pytest.raises(ValueError):
        StateVector(2, np.ones(3) / np.sqrt(3))
    state = StateVector.from_amplitudes([1, 1], normalize=True)
    assert state.num_qubits == 1
    with pytest.raises(ValueError):
        state.amplitudes[0] = 0


def test_x_and_cnot_follow_target_order():
    state = prepare_state("zero", 2)
    flipped = apply_unitary(state, PAULI_X, [0])
    assert abs(flipped.amplitudes[1]) == pytest.approx(1.0)
    both = apply_unitary(flipped, CNOT, [0, 1])
    assert abs(both.amplitudes[3]) == pytest.approx(1.0)
    # control on qubit 1 is unset, nothing happens
    same = apply_unitary(flipped, CNOT, [1, 0])
    assert abs(same.amplitudes[1]) == pytest.approx(1.0)


def test_apply_unitary_rejects_bad_gates():
    state = prepare_state("zero", 2)
    with pytest.raises(ValueError):
        apply_unitary(state, 2 * PAULI_X, [0])
    with pytest.raises(ValueError):
        apply_unitary(state, CNOT, [0, 0])
    with pytest.raises(ValueError):
        apply_unitary(state, PAULI_X, [2])
    with pytest.raises(ValueError):
        apply_unitary(state, CNOT, [0])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 5), seed=st.integers(0, 10_000), data=st.data())
def test_local_gate_matches_dense_embedding(n, seed, data):
    k = data.draw(st.integers(1, min(3, n)))
    targets = data.draw(st.permutations(range(n)))[:k]
    gate = haar_unitary(2 ** k, seed)
    state = prepare_state("haar", n, seed=seed + 1)
    out = apply_unitary(state, gate, targets)
    dense = embed_operator(gate, targets, n) @ state.amplitudes
    assert np.allclose(out.amplitudes, dense, atol=1e-10)
    assert np.vdot(out.amplitudes, out.amplitudes).real == pytest.approx(1.0, abs=1e-10)


def test_embed_operator_places_qubit_one():
    assert np.allclose(embed_operator(PAULI_X, [1], 2), np.kron(PAULI_X, np.eye(2)))
    assert np.allclose(embed_operator(PAULI_Z, [0], 2), np.kron(np.eye(2), PAULI_Z))


def test_permute_rows_relabels_qubits():
    state = prepare_state("basis", 3, bitstring="001")
    # virtual qubit 0 becomes real qubit 2
    moved = permute_rows(state.amplitudes, [2, 0, 1])
    assert moved[0b100] == 1.0


def test_reduced_density_of_bell_pair_is_maximally_mixed():
    bell = prepare_state("bell_paved", 2)
    rho = reduced_density(bell, [1])
    assert np.allclose(rho.entries, np.eye(2) / 2)
    assert np.allclose(rho.eigenvalues, [0.5, 0.5])
    with pytest.raises(ValueError):
        reduced_density(bell, [])
    with pytest.raises(ValueError):
        reduced_density(bell, [2])


def test_reduced_density_keeps_little_endian_order():
    state = prepare_state("basis", 3, bitstring="100")
    rho = reduced_density(state, [0, 2])
    # qubit 2 set, qubit 0 clear -> local index 2
    assert rho.entries[2, 2] == pytest.approx(1.0)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(1, np.array([[1, 1], [0, 0]]))
    with pytest.raises(ValueError):
        DensityMatrix(1, np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(1, np.array([[1.5, 0], [0, -0.5]])).eigenvalues


def test_tensor_copies():
    state = prepare_state("product_random", 3, seed=2)
    two = tensor_copies(state, 2)
    assert two.num_qubits == 6
    assert np.allclose(reduced_density(two, range(3)).entries, reduced_density(two, range(3, 6)).entries)
    with pytest.raises(ValueError):
        tensor_copies(state, 9)
    with pytest.raises(ValueError):
        tensor_copies(state, 0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 10_000), data=st.data())
def test_schmidt_spectra_match_across_the_cut(n, seed, data):
    keep = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n - 1))
    state = prepare_state("haar", n, seed=seed)
    inside = reduced_density(state, keep).eigenvalues
    outside = reduced_density(state, QubitSet.of(keep).complement(n)).eigenvalues
    inside = np.sort(inside[inside > 1e-10])
    outside = np.sort(outside[outside > 1e-10])
    assert inside.shape == outside.shape
    assert np.allclose(inside, outside, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 10_000))
def test_expectation_is_linear_in_coefficients(a, b, seed):
    state = prepare_state("haar", 4, seed=seed)
    first = parse_observable("1.0*Z0*X1 + 0.5*Y3", 4)
    second = parse_observable("-2.0*X0 + 0.3*Z1*Z2*Z3 + 0.7*Y3", 4)
    combined = Observable(4, first.scaled(a).terms + second.scaled(b).terms)
    expected = a * expectation(state, first) + b * expectation(state, second)
    assert expectation(state, combined) == pytest.approx(expected, abs=1e-9)


def test_haar_single_qubit_marginals_are_nearly_mixed():
    purities = []
    for seed in range(500):
        rho = reduced_density(prepare_state("haar", 8, seed=seed), [0]).entries
        purities.append(np.real(np.trace(rho @ rho)))
    assert 0.5 <= np.mean(purities) <= 0.52


def test_qubit_set():
    s = QubitSet.of([3, 1])
    assert s.indices == (1, 3)
    assert s.complement(4).indices == (0, 2)
    assert 3 in s and len(s) == 2
    with pytest.raises(ValueError):
        QubitSet((2, 1))
    with pytest.raises(ValueError):
        QubitSet.of([1, 1])
    with pytest.raises(ValueError):
        s.check(3)
