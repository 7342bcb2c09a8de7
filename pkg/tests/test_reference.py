"""Mermin benchmark, general-observable checks, and the two-party reduction."""

import itertools

import numpy as np
import pytest

from bellbench import (
    MULTIPARTITE,
    DomainError,
    ProbabilityTable,
    Scenario,
    bell_expression,
    bell_value,
    weight_multipartite,
)
from bellbench.optimize import OptimizerConfig, seesaw
from bellbench.polytope import classical_maximum, enumerate_strategies, strategy_table
from bellbench.quantum import StateVector, ghz_qubit
from bellbench.reference import (
    BlochSettings,
    mermin3_max,
    mermin3_value,
    qubit_general_family_max,
    qubit_general_max,
    reduce_to_bipartite,
)

PI = np.pi
ROOT8 = 2 * np.sqrt(2)


def relevance_state():
    amps = np.zeros(8, dtype=complex)
    amps[0] = 0.169414
    amps[4] = 0.0461131
    amps[5] = 0.161369
    amps[6] = 0.193624
    amps[7] = 0.951652
    return StateVector(Scenario(3, 2), amps)


def projector_table(state, settings):
    """Definitional route: measurement projectors -> probability table."""
    sc = Scenario(3, 2)
    blocks = {}
    for joint in sc.settings_tuples():
        block = np.zeros((2, 2, 2))
        for outs in sc.outcome_tuples():
            op = np.ones((1, 1), dtype=complex)
            for party, (i, m) in enumerate(zip(joint, outs), start=1):
                obs = settings.observable(party, i)
                proj = (np.eye(2) + (-1) ** m * obs) / 2
                op = np.kron(op, proj)
            block[outs] = float(np.vdot(state.amplitudes, op @ state.amplitudes).real)
        blocks[joint] = block
    return ProbabilityTable(sc, blocks)


class TestBlochSettings:
    def test_from_angles_units(self):
        settings = BlochSettings.from_angles(np.linspace(0, 1, 12))
        for pair in settings.vectors:
            for v in pair:
                assert abs(np.linalg.norm(v) - 1) < 1e-12

    def test_angle_count(self):
        with pytest.raises(DomainError):
            BlochSettings.from_angles(np.zeros(10))

    def test_observable_is_involution(self):
        settings = BlochSettings.from_angles(np.arange(12) * 0.37)
        for party in (1, 2, 3):
            for s in (1, 2):
                obs = settings.observable(party, s)
                assert np.abs(obs @ obs - np.eye(2)).max() < 1e-12


class TestMerminValue:
    def test_product_state_z_settings(self):
        state = ghz_qubit(0.0)  # |000>
        settings = BlochSettings.from_angles(np.zeros(12))
        assert abs(mermin3_value(state, settings) - 2.0) < 1e-14

    def test_algebraic_cap(self):
        rng = np.random.default_rng(0)
        state = ghz_qubit(PI / 4)
        for _ in range(200):
            settings = BlochSettings.from_angles(rng.uniform(-PI, PI, 12))
            assert mermin3_value(state, settings) <= 4 + 1e-12

    def test_party_flip_negates_value(self):
        rng = np.random.default_rng(1)
        state = ghz_qubit(0.9)
        for _ in range(20):
            settings = BlochSettings.from_angles(rng.uniform(-PI, PI, 12))
            flipped = settings.flip_party(1)
            assert abs(mermin3_value(state, flipped) + mermin3_value(state, settings)) < 1e-12

    def test_needs_three_qubits(self):
        sc = Scenario(2, 2)
        state = StateVector(sc, [1, 0, 0, 0])
        with pytest.raises(DomainError):
            mermin3_value(state, BlochSettings.from_angles(np.zeros(12)))


class TestMerminMax:
    def test_ghz_reaches_four(self):
        value = mermin3_max(ghz_qubit(PI / 4), OptimizerConfig(starts=16, seed=2))
        assert abs(value - 4.0) < 1e-6

    def test_product_state_classical(self):
        value = mermin3_max(ghz_qubit(0.0), OptimizerConfig(starts=16, seed=2))
        assert abs(value - 2.0) < 1e-8

    def test_relevance_state_no_violation(self):
        value = mermin3_max(relevance_state(), OptimizerConfig(starts=64, seed=2))
        assert value <= 2 + 1e-4

    def test_flip_invariance(self):
        # the search space is closed under flipping one party's settings
        state = ghz_qubit(0.8)
        cfg = OptimizerConfig(starts=12, seed=3)
        assert abs(mermin3_max(state, cfg) - mermin3_max(state, cfg)) < 1e-8


class TestQubitGeneralMax:
    def test_consistent_with_projector_tables(self):
        rng = np.random.default_rng(4)
        e = bell_expression(3, 2)
        state = relevance_state()
        from bellbench.reference import _bloch_rows, _correlation_tensor, _tensor_functional

        tensor = _correlation_tensor(state)
        terms = tuple((s, sign) for s, sign in e.terms)
        for _ in range(10):
            angles = rng.uniform(-PI, PI, 12)
            fast = _tensor_functional(tensor, _bloch_rows(angles), terms)
            table = projector_table(state, BlochSettings.from_angles(angles))
            assert abs(fast - bell_value(e, table)) < 1e-12

    def test_ghz_value(self):
        value = qubit_general_max(
            ghz_qubit(PI / 4), bell_expression(3, 2), OptimizerConfig(starts=16, seed=5)
        )
        assert abs(value - ROOT8) < 1e-6

    def test_relevance_state_violates(self):
        value = qubit_general_max(
            relevance_state(), bell_expression(3, 2), OptimizerConfig(starts=64, seed=5)
        )
        assert value >= 2.0028

    def test_w_family_reaches_chsh_maximum(self):
        value = qubit_general_family_max(
            "w_state", bell_expression(3, 2), OptimizerConfig(starts=48, seed=6)
        )
        assert abs(value - ROOT8) < 1e-2

    def test_rejects_qutrits(self):
        with pytest.raises(DomainError):
            qubit_general_max(relevance_state(), bell_expression(3, 3))


class TestReduction:
    def test_reduces_to_two_party_form(self):
        reduced = reduce_to_bipartite(bell_expression(3, 4))
        assert reduced.scenario == Scenario(2, 4)
        assert reduced.family == MULTIPARTITE
        assert reduced.terms == (
            ((1, 1), 1), ((1, 2), 1), ((2, 1), 1), ((2, 2), -1)
        )

    @pytest.mark.parametrize("d", range(2, 6))
    def test_weight_identity_under_clamping(self, d):
        # clamping party 3 to outcome 0 in each three-party term reproduces
        # the two-party weights term by term
        sc3, sc2 = Scenario(3, d), Scenario(2, d)
        e3 = bell_expression(3, d)
        e2 = reduce_to_bipartite(e3)
        mapping = dict(zip([s for s, _ in e3.terms], [s for s, _ in e2.terms]))
        for (s3, sign3), (s2, sign2) in zip(e3.terms, e2.terms):
            assert sign3 == sign2
            for m, n in itertools.product(range(d), repeat=2):
                assert weight_multipartite(s3, (m, n, 0), sc3) == weight_multipartite(
                    s2, (m, n), sc2
                )

    @pytest.mark.parametrize("d", range(2, 7))
    def test_classical_maximum_two(self, d):
        reduced = reduce_to_bipartite(bell_expression(3, d))
        assert classical_maximum(reduced).max_value == 2

    def test_value_lattice(self):
        reduced = reduce_to_bipartite(bell_expression(3, 4))
        for s in enumerate_strategies(reduced.scenario):
            value = bell_value(reduced, strategy_table(s))
            assert (3 * value).denominator == 1  # d - 1 = 3

    def test_quantum_optima(self):
        d2 = seesaw(reduce_to_bipartite(bell_expression(3, 2)), OptimizerConfig(starts=4, seed=1))
        assert abs(d2.best_value - ROOT8) < 1e-4
        d3 = seesaw(reduce_to_bipartite(bell_expression(3, 3)), OptimizerConfig(starts=4, seed=1))
        assert abs(d3.best_value - 2.9149) < 1e-3

    def test_rejects_other_shapes(self):
        with pytest.raises(DomainError):
            reduce_to_bipartite(bell_expression(4, 2))
        with pytest.raises(DomainError):
            reduce_to_bipartite(bell_expression(2, 2))
