import math

import numpy as np
import pytest

from gradients import sample_rng
from hea import build_hea
from pauli import Observable, PauliString
from qstate import embed_operator, expectation, permute_rows, prepare_state
from randmat import analytic_prediction, diagonalize, evolve
from tasks import (
    EXPERIMENT_COLUMNS, GradientTimeConfig, TrainConfig, build_dataset, build_setup,
    empirical_loss, gradient_vs_time_experiment, heisenberg_hamiltonian,
    heisenberg_observable, loss_s, magnetization_loss, run_discrimination,
    symmetric_state, symmetry_readout, train,
)


@pytest.fixture
def setup4():
    return build_setup(4, [0, 1], seed=3)


def commutator_norm(a, b):
    return np.linalg.norm(a @ b - b @ a)


def test_setup_symmetry_and_hamiltonians(setup4):
    assert setup4.symmetry.label() == "Z0*Z1"
    assert setup4.complement.indices == (2, 3)
    p = setup4.symmetry.matrix()
    h_s = setup4.h_s.dense()
    assert commutator_norm(h_s, p) < 1e-10
    assert commutator_norm(setup4.h_g.dense(), p) > 1e-3
    assert np.allclose(h_s, embed_operator(setup4.h_b.dense(), [2, 3], 4), atol=1e-10)


def test_symmetric_states_span_the_plus_one_eigenspace(setup4):
    rng = np.random.default_rng(0)
    states = [symmetric_state(setup4, rng) for _ in range(20)]
    obs = setup4.symmetry_observable()
    assert all(expectation(s, obs) == pytest.approx(1.0) for s in states)
    stacked = np.stack([s.amplitudes for s in states], axis=1)
    assert np.linalg.matrix_rank(stacked, tol=1e-8) == 8


def test_setup_warnings_and_errors(capsys):
    build_setup(6, [0, 1, 2, 3], seed=0)
    assert "Warning" in capsys.readouterr().out
    with pytest.raises(ValueError):
        build_setup(4, [0], seed=0)
    with pytest.raises(ValueError):
        build_setup(4, [0, 1, 2, 3], seed=0)
    with pytest.raises(ValueError):
        build_setup(4, [0, 1], seed=0, symmetry=PauliString.from_sparse({2: "Z"}, 4))


def test_custom_symmetry():
    setup = build_setup(4, [1, 2], seed=1, symmetry=PauliString.from_sparse({1: "X", 2: "X"}, 4))
    dataset = build_dataset(setup, 1.0, 4, seed=2)
    assert symmetry_readout(setup, dataset)[0] == pytest.approx(1.0)


def test_dataset_order_and_time_zero(setup4):
    dataset = build_dataset(setup4, 0.0, 4, seed=5)
    assert list(dataset.labels) == [1, 0, 1, 0]
    assert dataset.amplitudes.shape == (16, 4)
    for k in (0, 2):
        assert np.allclose(dataset.entries[k].state.amplitudes, dataset.entries[k + 1].state.amplitudes)
    with pytest.raises(ValueError):
        build_dataset(setup4, 0.0, 3)
    with pytest.raises(ValueError):
        build_dataset(setup4, 0.0, 0)


def test_symmetric_class_keeps_its_symmetry(setup4):
    dataset = build_dataset(setup4, 2.5, 6, seed=1)
    readout = symmetry_readout(setup4, dataset)
    assert np.allclose(readout[dataset.labels == 1], 1.0, atol=1e-8)


def test_dataset_is_seeded(setup4):
    a = build_dataset(setup4, 1.0, 4, seed=9)
    b = build_dataset(setup4, 1.0, 4, seed=9)
    assert np.array_equal(a.amplitudes, b.amplitudes)


def test_indistinguishable_pairs_bound_the_loss(setup4):
    dataset = build_dataset(setup4, 0.0, 6, seed=2)
    circuit = build_hea(4, 2)
    obs = setup4.symmetry_observable()
    rng = np.random.default_rng(1)
    for _ in range(5):
        theta = rng.uniform(0, 2 * np.pi, circuit.num_params)
        assert empirical_loss(circuit, theta, dataset, obs) >= 0.25 - 1e-12
    empty = Observable(4, ())
    assert empirical_loss(circuit, theta, dataset, empty) == pytest.approx(0.5)


def test_loss_s_matches_batch(setup4):
    dataset = build_dataset(setup4, 1.0, 4, seed=0)
    circuit = build_hea(4, 1)
    obs = setup4.symmetry_observable()
    theta = np.random.default_rng(2).uniform(0, 2 * np.pi, circuit.num_params)
    by_entry = [(e.label - loss_s(circuit, theta, e, obs)) ** 2 for e in dataset.entries]
    assert empirical_loss(circuit, theta, dataset, obs) == pytest.approx(np.mean(by_entry))


def test_zero_step_keeps_the_loss(setup4):
    dataset = build_dataset(setup4, 1.0, 4, seed=0)
    circuit = build_hea(4, 1)
    result = train(circuit, dataset, setup4.symmetry_observable(), TrainConfig(step_size=0.0, iterations=5))
    assert len(result.loss_trajectory) == 6
    assert np.all(result.loss_trajectory == result.loss_trajectory[0])


def test_backtracking_training_is_monotone(setup4):
    dataset = build_dataset(setup4, 1.0, 6, seed=0)
    circuit = build_hea(4, 2)
    config = TrainConfig(step_size=0.3, iterations=15, backtracking=True)
    result = train(circuit, dataset, setup4.symmetry_observable(), config)
    assert np.all(np.diff(result.loss_trajectory) <= 0)
    assert result.final_params.shape == (circuit.num_params,)
    assert 0.0 <= result.train_accuracy <= 1.0


def test_default_training_is_fixed_step(setup4):
    config = TrainConfig()
    assert not config.backtracking
    assert (config.step_size, config.iterations) == (0.05, 200)
    dataset = build_dataset(setup4, 1.0, 4, seed=0)
    circuit = build_hea(4, 1)
    obs = setup4.symmetry_observable()
    result = train(circuit, dataset, obs, TrainConfig(iterations=1, seed=3))
    start = sample_rng(3, 0).uniform(0.0, 2 * np.pi, size=circuit.num_params)
    assert result.loss_trajectory[0] == pytest.approx(empirical_loss(circuit, start, dataset, obs))


def test_train_config_validation(setup4):
    with pytest.raises(ValueError):
        TrainConfig(step_size=-0.1)
    with pytest.raises(ValueError):
        TrainConfig(iterations=0)
    dataset = build_dataset(setup4, 1.0, 2, seed=0)
    with pytest.raises(ValueError):
        train(build_hea(4, 1), dataset, setup4.symmetry_observable(), TrainConfig(init_theta=(0.0, 1.0)))


def test_heisenberg_chain():
    h = heisenberg_hamiltonian(4)
    assert np.allclose(h, h.conj().T)
    assert abs(np.trace(h)) < 1e-12
    assert h[0, 0].real == pytest.approx(8.0)
    assert heisenberg_hamiltonian(2)[0, 0].real == pytest.approx(4.0)
    shift = permute_rows(np.eye(16), [1, 2, 3, 0])
    assert np.allclose(shift @ h @ shift.T, h)
    with pytest.raises(ValueError):
        heisenberg_observable(1)
    with pytest.raises(ValueError):
        heisenberg_observable(13)


def test_heisenberg_evolution_conserves_energy():
    obs = heisenberg_observable(4)
    spectral = diagonalize(heisenberg_hamiltonian(4))
    state = prepare_state("product_random", 4, seed=7)
    energy = expectation(state, obs)
    for t in (0.3, 1.0, 4.0):
        assert expectation(evolve(spectral, state, t), obs) == pytest.approx(energy, abs=1e-9)


def test_magnetization_loss():
    assert expectation(prepare_state("zero", 3), magnetization_loss(3)) == pytest.approx(-2.0)
    assert expectation(prepare_state("basis", 3, bitstring="111"), magnetization_loss(3)) == pytest.approx(4.0)


def test_small_gradient_time_experiment(capsys, monkeypatch):
    config = GradientTimeConfig(n_values=(4, 6), t_max=2.0, t_steps=3, num_states=3, num_theta_draws=1, seed=4)
    monkeypatch.setenv("HEA_LAB_THREADS", "1")
    result = gradient_vs_time_experiment(config)
    assert "[1/2] n = 4" in capsys.readouterr().out
    frame = result.to_frame()
    assert list(frame.columns) == EXPERIMENT_COLUMNS
    assert len(frame) == 6
    assert (frame["samples"] == 3).all()
    at_zero = frame[frame["t"] == 0.0]
    assert np.allclose(at_zero["mean_entropy_2q"], 0.0, atol=1e-9)
    assert set(result.summary["per_n"]) == {"4", "6"}
    assert math.isnan(result.summary["correlation_gsat_one_minus_entropy"])

    monkeypatch.setenv("HEA_LAB_THREADS", "3")
    again = gradient_vs_time_experiment(config)
    assert again.rows == result.rows


def test_gradient_time_config_validation():
    with pytest.raises(ValueError):
        GradientTimeConfig(n_values=())
    with pytest.raises(ValueError):
        GradientTimeConfig(t_steps=0)
    assert len(GradientTimeConfig().times) == 20


@pytest.mark.slow
def test_gde_class_loss_decays_on_average():
    for t in (0.0, 1.0, 2.0):
        gde_values = []
        for i in range(100):
            setup = build_setup(8, [0, 1], seed=i)
            dataset = build_dataset(setup, t, 2, seed=1000 + i)
            symmetric, gde = symmetry_readout(setup, dataset)
            assert symmetric == pytest.approx(1.0, abs=1e-8)
            gde_values.append(gde)
        gde_values = np.array(gde_values)
        se = gde_values.std(ddof=1) / math.sqrt(gde_values.size)
        assert abs(gde_values.mean() - analytic_prediction("gde_loss", t=t)) <= max(3 * se, 0.05)


@pytest.mark.slow
@pytest.mark.parametrize("t, epsilon, slack", [(2.0, 0.5, 0.0), (4.0, 0.1, 0.1)])
def test_gde_class_loss_concentrates(t, epsilon, slack):
    values = []
    for i in range(100):
        setup = build_setup(8, [0, 1], seed=sample_rng(7, i).integers(2 ** 31))
        values.append(symmetry_readout(setup, build_dataset(setup, t, 2, seed=i))[1])
    frequency = np.mean(np.abs(values) <= epsilon)
    assert frequency >= analytic_prediction("gde_concentration_prob", t=t, epsilon=epsilon) - slack


@pytest.mark.slow
def test_discrimination_training_smoke():
    result = run_discrimination(6, 2, 0.5, 8, 2, TrainConfig(iterations=200), seed=0)
    trajectory = result.training.loss_trajectory
    assert np.all(np.isfinite(trajectory)) and np.all(trajectory >= 0)
    assert trajectory[-1] <= 0.5 * trajectory[0]
    smoothed = np.convolve(trajectory, np.ones(10) / 10, mode="valid")
    assert np.all(np.diff(smoothed) <= 1e-12)
    assert result.class_means["readout_symmetric"] == pytest.approx(1.0, abs=1e-8)
    assert result.class_means["predicted_gde"] == pytest.approx(math.exp(-0.25 / 4))


@pytest.mark.slow
def test_gradient_norm_saturation_shrinks_with_size():
    result = gradient_vs_time_experiment(GradientTimeConfig())
    per_n = result.summary["per_n"]
    g_t0 = [per_n[str(n)]["g_t0"] for n in (4, 6, 8, 10)]
    g_sat = [per_n[str(n)]["g_sat"] for n in (4, 6, 8, 10)]
    assert max(g_t0) < 2 * min(g_t0)
    assert all(a > b for a, b in zip(g_sat, g_sat[1:]))
    assert result.summary["correlation_gsat_one_minus_entropy"] >= 0.7
    assert result.summary["log_log_slope"] < 0
