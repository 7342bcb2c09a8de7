"""Beamsplitter measurements, quantum tables, operators, states, noise."""

import io

import numpy as np
import pytest

from bellbench import (
    DomainError,
    ProbabilityTable,
    ResourceError,
    Scenario,
    bell_expression,
    bell_value,
)
from bellbench.quantum import (
    BellOperator,
    PhaseConfiguration,
    StateVector,
    beamsplitter_unitary,
    bell_operator,
    ghz_max,
    ghz_qubit,
    ghz_qutrit,
    joint_probabilities,
    max_eigenpair,
    noise_threshold,
    noisy_table,
    quantum_bell_value,
    table_to_csv,
    w_state,
)

PI = np.pi
ROOT8 = 2 * np.sqrt(2)

GHZ3_PHASES = [[0, -PI / 12], [0, PI / 4], [0, -PI / 6], [0, PI / 3], [0, 0], [0, PI / 6]]
GHZ4_PHASES = [
    [0, PI / 24], [0, PI / 12], [0, -PI / 6], [0, PI / 3],
    [0, -PI / 8], [0, PI / 3], [0, 0], [0, 0],
]
GHZ5_PHASES = [
    [0, -PI / 12], [0, PI / 3], [0, -PI / 6], [0, PI / 3],
    [0, 0], [0, PI / 12], [0, 0], [0, 0], [0, 0], [0, 0],
]
QUTRIT_PHASES = [
    [0, -PI / 5, PI / 24], [0, PI / 24, -5 * PI / 12],
    [0, 0, PI / 12], [0, PI / 3, -PI / 4],
    [0, PI / 30, PI / 20], [0, PI / 8, PI / 6],
]


def random_state(scenario, rng):
    amps = rng.normal(size=scenario.dimension) + 1j * rng.normal(size=scenario.dimension)
    return StateVector(scenario, amps / np.linalg.norm(amps))


def random_config(scenario, rng):
    return PhaseConfiguration(
        scenario,
        rng.uniform(-PI, PI, size=(2 * scenario.parties, scenario.outcomes)),
    )


class TestBeamsplitter:
    def test_qubit_zero_phases(self):
        u = beamsplitter_unitary([0, 0], 2)
        assert np.allclose(u, np.array([[1, 1], [1, -1]]) / np.sqrt(2))

    def test_qutrit_entry(self):
        u = beamsplitter_unitary([0, 0, 0], 3)
        assert abs(u[1, 1] - np.exp(2j * PI / 3) / np.sqrt(3)) < 1e-14

    @pytest.mark.parametrize("d", range(2, 8))
    def test_unitarity(self, d):
        rng = np.random.default_rng(d)
        for _ in range(5):
            u = beamsplitter_unitary(rng.uniform(-PI, PI, d), d)
            assert np.abs(u.conj().T @ u - np.eye(d)).max() < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            beamsplitter_unitary([0, 0, 0], 2)


class TestStateVector:
    def test_truncated_decimals_renormalized(self):
        amps = np.zeros(8)
        amps[0], amps[7] = 0.70710, 0.70711  # printed to 5 digits
        state = StateVector(Scenario(3, 2), amps)
        assert abs(np.linalg.norm(state.amplitudes) - 1) < 1e-10

    def test_far_from_normalized_rejected(self):
        amps = np.zeros(8)
        amps[0] = 0.9
        with pytest.raises(DomainError):
            StateVector(Scenario(3, 2), amps)

    def test_wrong_length(self):
        with pytest.raises(DomainError):
            StateVector(Scenario(3, 2), np.ones(4) / 2.0)

    def test_json_round_trip(self):
        state = ghz_qutrit(0.9066, 0.6663)
        again = StateVector.from_json_dict(state.to_json_dict())
        assert np.allclose(state.amplitudes, again.amplitudes)


class TestPhaseConfiguration:
    def test_gauge_shift(self):
        cfg = PhaseConfiguration(Scenario(2, 2), [[0.5, 1.0]] * 4)
        for vec in cfg.vectors:
            assert vec[0] == 0.0
            assert abs(vec[1] - 0.5) < 1e-15

    def test_vector_count(self):
        with pytest.raises(DomainError):
            PhaseConfiguration(Scenario(3, 2), [[0, 0]] * 4)

    def test_json_round_trip(self):
        sc = Scenario(3, 3)
        cfg = PhaseConfiguration(sc, QUTRIT_PHASES)
        again = PhaseConfiguration.from_json_dict(cfg.to_json_dict())
        for a, b in zip(cfg.vectors, again.vectors):
            assert np.allclose(a, b)

    def test_gauge_does_not_change_probabilities(self):
        rng = np.random.default_rng(0)
        sc = Scenario(3, 3)
        state = random_state(sc, rng)
        cfg = random_config(sc, rng)
        shifted_vectors = [v.copy() for v in cfg.vectors]
        shifted_vectors[2] = shifted_vectors[2] + 1.234  # whole-vector shift
        shifted = PhaseConfiguration(sc, shifted_vectors)
        t1 = joint_probabilities(state, cfg)
        t2 = joint_probabilities(state, shifted)
        for settings in sc.settings_tuples():
            assert np.abs(t1.blocks[settings] - t2.blocks[settings]).max() < 1e-12


class TestJointProbabilities:
    @pytest.mark.parametrize("n,d", [(2, 2), (2, 3), (3, 2), (3, 3)])
    def test_ground_state_zero_phases_uniform(self, n, d):
        sc = Scenario(n, d)
        amps = np.zeros(sc.dimension)
        amps[0] = 1.0
        table = joint_probabilities(StateVector(sc, amps), PhaseConfiguration.zeros(sc))
        for settings in sc.settings_tuples():
            assert np.abs(table.blocks[settings] - 1.0 / sc.dimension).max() < 1e-12

    def test_blocks_normalized_random(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(2, 5))
            d = int(rng.integers(2, 5))
            sc = Scenario(n, d)
            table = joint_probabilities(random_state(sc, rng), random_config(sc, rng))
            for settings in sc.settings_tuples():
                assert abs(float(table.blocks[settings].sum()) - 1.0) < 1e-10

    def test_scenario_mismatch(self):
        with pytest.raises(DomainError):
            joint_probabilities(ghz_qubit(0.3), PhaseConfiguration.zeros(Scenario(3, 3)))

    def test_party_swap_symmetry(self):
        # swapping parties 1 and 3 everywhere fixes every term of the expression
        rng = np.random.default_rng(2)
        sc = Scenario(3, 2)
        e = bell_expression(3, 2)
        state = random_state(sc, rng)
        cfg = random_config(sc, rng)
        swapped_state = StateVector(sc, np.transpose(state.as_tensor(), (2, 1, 0)).ravel())
        v = cfg.vectors
        swapped_cfg = PhaseConfiguration(sc, [v[4], v[5], v[2], v[3], v[0], v[1]])
        assert abs(
            quantum_bell_value(state, cfg, e)
            - quantum_bell_value(swapped_state, swapped_cfg, e)
        ) < 1e-10


class TestReportedSettings:
    def test_three_qubit_value(self):
        cfg = PhaseConfiguration(Scenario(3, 2), GHZ3_PHASES)
        value = quantum_bell_value(ghz_qubit(PI / 4), cfg, bell_expression(3, 2))
        assert abs(value - ROOT8) < 1e-3
        assert abs(value - ROOT8) < 1e-10  # the settings are in fact exact

    def test_three_qutrit_value(self):
        cfg = PhaseConfiguration(Scenario(3, 3), QUTRIT_PHASES)
        value = quantum_bell_value(ghz_qutrit(0.9066, 0.6663), cfg, bell_expression(3, 3))
        assert abs(value - 2.915) < 2e-3

    def test_four_qubit_value(self):
        cfg = PhaseConfiguration(Scenario(4, 2), GHZ4_PHASES)
        value = quantum_bell_value(ghz_max(4, 2), cfg, bell_expression(4, 2))
        assert abs(value - ROOT8) < 1e-3

    def test_five_qubit_value(self):
        cfg = PhaseConfiguration(Scenario(5, 2), GHZ5_PHASES)
        value = quantum_bell_value(ghz_max(5, 2), cfg, bell_expression(5, 2))
        assert abs(value - ROOT8) < 1e-3


class TestBellOperator:
    def test_hermitian(self):
        rng = np.random.default_rng(3)
        sc = Scenario(3, 2)
        op = bell_operator(random_config(sc, rng), bell_expression(3, 2))
        assert np.abs(op.matrix - op.matrix.conj().T).max() < 1e-12

    def test_expectation_matches_table_route(self):
        rng = np.random.default_rng(4)
        sc = Scenario(3, 2)
        e = bell_expression(3, 2)
        cfg = random_config(sc, rng)
        op = bell_operator(cfg, e)
        for _ in range(100):
            state = random_state(sc, rng)
            direct = quantum_bell_value(state, cfg, e)
            assert abs(op.expectation(state) - direct) < 1e-10

    def test_reported_phases_witness(self):
        cfg = PhaseConfiguration(Scenario(3, 2), GHZ3_PHASES)
        op = bell_operator(cfg, bell_expression(3, 2))
        lam, _ = max_eigenpair(op)
        assert lam >= ROOT8 - 1e-6
        assert abs(op.expectation(ghz_qubit(PI / 4)) - ROOT8) < 1e-10

    def test_qutrit_operator_consistency(self):
        rng = np.random.default_rng(5)
        sc = Scenario(3, 3)
        e = bell_expression(3, 3)
        cfg = random_config(sc, rng)
        op = bell_operator(cfg, e)
        for _ in range(20):
            state = random_state(sc, rng)
            assert abs(op.expectation(state) - quantum_bell_value(state, cfg, e)) < 1e-10


class TestMaxEigenpair:
    def test_scaled_identity(self):
        sc = Scenario(2, 2)
        cfg = PhaseConfiguration.zeros(sc)
        e = bell_expression(2, 2)
        op = BellOperator(sc, 2.5 * np.eye(4, dtype=complex), e, cfg)
        lam, state = max_eigenpair(op)
        assert abs(lam - 2.5) < 1e-12
        assert abs(np.linalg.norm(state.amplitudes) - 1) < 1e-12

    def test_rayleigh_bound(self):
        rng = np.random.default_rng(6)
        sc = Scenario(3, 2)
        op = bell_operator(random_config(sc, rng), bell_expression(3, 2))
        lam, vec = max_eigenpair(op)
        assert abs(float(np.linalg.norm(op.matrix @ vec.amplitudes - lam * vec.amplitudes))) < 1e-9 * abs(lam) + 1e-30
        for _ in range(100):
            assert lam >= op.expectation(random_state(sc, rng)) - 1e-12

    def test_most_negative_spectrum(self):
        sc = Scenario(2, 2)
        cfg = PhaseConfiguration.zeros(sc)
        e = bell_expression(2, 2)
        mat = np.diag([-10.0, 0.5, 0.1, -3.0]).astype(complex)
        lam, _ = max_eigenpair(BellOperator(sc, mat, e, cfg))
        assert abs(lam - 0.5) < 1e-12


class TestStateFactories:
    def test_ghz_qubit(self):
        state = ghz_qubit(PI / 4)
        expected = np.zeros(8)
        expected[0] = expected[7] = 1 / np.sqrt(2)
        assert np.allclose(state.amplitudes, expected)

    def test_ghz_qutrit_balanced(self):
        state = ghz_qutrit(np.arccos(1 / np.sqrt(3)), PI / 4)
        for idx in (0, 13, 26):
            assert abs(state.amplitudes[idx] - 1 / np.sqrt(3)) < 1e-12

    def test_ghz_max(self):
        state = ghz_max(2, 5)
        tensor = state.as_tensor()
        for x in range(5):
            assert abs(tensor[x, x] - 1 / np.sqrt(5)) < 1e-12
        assert abs(np.abs(state.amplitudes).sum() - 5 / np.sqrt(5)) < 1e-12

    def test_w_state_norm(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            beta, xi = rng.uniform(-PI, PI, 2)
            assert abs(np.linalg.norm(w_state(beta, xi).amplitudes) - 1) < 1e-12

    def test_w_state_support(self):
        state = w_state(0.4, 1.1)
        support = {i for i, a in enumerate(state.amplitudes) if abs(a) > 0}
        assert support == {1, 2, 4}

    def test_ghz_max_budget(self):
        with pytest.raises(ResourceError):
            ghz_max(21, 2)


class TestNoise:
    def test_threshold_values(self):
        assert abs(noise_threshold(ROOT8) - 0.292893) < 1e-5
        assert noise_threshold(2.0) == 0.0
        assert noise_threshold(4.0) == 0.5

    def test_threshold_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            noise_threshold(0.0)

    def test_mixed_table_crossing(self):
        # the noisy Bell value crosses the classical bound at the threshold
        cfg = PhaseConfiguration(Scenario(3, 2), GHZ3_PHASES)
        e = bell_expression(3, 2)
        table = joint_probabilities(ghz_qubit(PI / 4), cfg)
        violation = bell_value(e, table)
        f_thr = noise_threshold(violation)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = (lo + hi) / 2
            if bell_value(e, noisy_table(table, mid)) > 2.0:
                lo = mid
            else:
                hi = mid
        assert abs(lo - f_thr) < 1e-8

    def test_noisy_fraction_range(self):
        table = ProbabilityTable.uniform(Scenario(2, 2))
        with pytest.raises(DomainError):
            noisy_table(table, 1.5)


class TestCsvExport:
    def test_header_and_rows(self):
        sc = Scenario(2, 2)
        table = ProbabilityTable.uniform(sc)
        buffer = io.StringIO()
        table_to_csv(table, buffer)
        lines = buffer.getvalue().strip().split("\n")
        assert lines[0] == "settings,outcomes,probability"
        assert len(lines) == 1 + 4 * 4
        assert lines[1] == "1-1,0-0,0.25"
