"""Multiport-beamsplitter measurements and quantum Bell values.

The measurement on each party is the symmetric unbiased d-port splitter with
tunable phase shifters: U[k, l] = alpha**(k*l) * exp(i*phi_l) / sqrt(d) with
alpha = exp(2*pi*i/d), row k the detected outcome and column l the input
basis state.  Everything runs in complex double precision on dense arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DomainError, NumericError, ResourceError
from .scenario import (
    BellExpression,
    ProbabilityTable,
    Scenario,
    SettingsTuple,
    weight_numerators,
)

OPERATOR_DIMENSION_CAP = 10**4
STATE_DIMENSION_CAP = 10**6


def beamsplitter_unitary(phases: Sequence[float], d: int) -> np.ndarray:
    """d x d splitter matrix for one phase vector; unitary by construction."""
    phi = np.asarray(phases, dtype=float)
    if phi.shape != (d,):
        raise DomainError(f"phase vector must have length {d}, got shape {phi.shape}")
    k = np.arange(d)
    fourier = np.exp(2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)
    return fourier * np.exp(1j * phi)[None, :]


class StateVector:
    """Pure state on the joint d**N space, party 1 most significant.

    Inputs within 1e-4 of unit norm are renormalized (printed amplitudes are
    routinely truncated); anything further off is rejected.
    """

    __slots__ = ("scenario", "amplitudes")

    def __init__(self, scenario: Scenario, amplitudes: Iterable[complex]) -> None:
        amps = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes,
                          dtype=np.complex128).reshape(-1)
        if amps.size != scenario.dimension:
            raise DomainError(
                f"state needs {scenario.dimension} amplitudes, got {amps.size}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > 1e-4:
            raise DomainError(f"state norm {norm} deviates from 1 by more than 1e-4")
        amps = amps / norm
        amps.setflags(write=False)
        self.scenario = scenario
        self.amplitudes = amps

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.scenario.outcomes,) * self.scenario.parties)

    def to_json_dict(self) -> dict:
        return {
            "n": self.scenario.parties,
            "d": self.scenario.outcomes,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "StateVector":
        sc = Scenario(int(data["n"]), int(data["d"]))
        amps = [complex(re, im) for re, im in data["amplitudes"]]
        return cls(sc, amps)


class PhaseConfiguration:
    """One length-d phase vector per (party, setting).

    Vectors are stored in the canonical gauge phi[0] = 0; shifting a whole
    vector by a constant only multiplies the splitter by a global phase, so
    probabilities are unchanged by the shift.
    """

    __slots__ = ("scenario", "vectors")

    def __init__(
        self,
        scenario: Scenario,
        vectors: Sequence[Sequence[float]],
    ) -> None:
        if len(vectors) != 2 * scenario.parties:
            raise DomainError(
                f"need {2 * scenario.parties} phase vectors, got {len(vectors)}"
            )
        stored = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=float).reshape(-1)
            if arr.size != scenario.outcomes:
                raise DomainError(
                    f"phase vector length {arr.size}, expected {scenario.outcomes}"
                )
            if not np.all(np.isfinite(arr)):
                raise DomainError("phase vectors must be finite")
            arr = arr - arr[0]
            arr.setflags(write=False)
            stored.append(arr)
        self.scenario = scenario
        self.vectors = tuple(stored)

    def vector(self, party: int, setting: int) -> np.ndarray:
        """Phase vector of 1-based (party, setting)."""
        if not (1 <= party <= self.scenario.parties and setting in (1, 2)):
            raise DomainError(f"no phase vector for party {party}, setting {setting}")
        return self.vectors[2 * (party - 1) + (setting - 1)]

    def unitaries(self) -> list[np.ndarray]:
        """Splitter matrices in the same party-major order as vectors."""
        d = self.scenario.outcomes
        return [beamsplitter_unitary(v, d) for v in self.vectors]

    @classmethod
    def zeros(cls, scenario: Scenario) -> "PhaseConfiguration":
        return cls(scenario, [np.zeros(scenario.outcomes)] * (2 * scenario.parties))

    def to_json_dict(self) -> dict:
        return {
            "n": self.scenario.parties,
            "d": self.scenario.outcomes,
            "phases": [[float(x) for x in vec] for vec in self.vectors],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PhaseConfiguration":
        sc = Scenario(int(data["n"]), int(data["d"]))
        return cls(sc, data["phases"])


def _apply_party_unitaries(
    tensor: np.ndarray, unitaries: Sequence[np.ndarray]
) -> np.ndarray:
    """Apply one unitary per party axis, preserving axis order."""
    out = tensor
    for j, u in enumerate(unitaries):
        out = np.moveaxis(np.tensordot(u, out, axes=(1, j)), 0, j)
    return out


def _term_block(
    state_tensor: np.ndarray,
    unitaries: Sequence[np.ndarray],
    settings: SettingsTuple,
) -> np.ndarray:
    chosen = [unitaries[2 * j + (s - 1)] for j, s in enumerate(settings)]
    amp = _apply_party_unitaries(state_tensor, chosen)
    return np.abs(amp) ** 2


def joint_probabilities(
    state: StateVector, config: PhaseConfiguration
) -> ProbabilityTable:
    """Outcome distribution of the splitter measurements for every settings."""
    if state.scenario != config.scenario:
        raise DomainError("state and phase configuration use different scenarios")
    sc = state.scenario
    tensor = state.as_tensor()
    us = config.unitaries()
    blocks = {
        settings: _term_block(tensor, us, settings)
        for settings in sc.settings_tuples()
    }
    return ProbabilityTable(sc, blocks, validate=False)


def _expression_value_fast(
    state_tensor: np.ndarray,
    unitaries: Sequence[np.ndarray],
    expression: BellExpression,
) -> float:
    """Bell value touching only the four term blocks (optimizer hot path)."""
    sc = expression.scenario
    total = 0.0
    for settings, sign in expression.terms:
        w = weight_numerators(sc.parties, sc.outcomes, expression.family, settings)
        block = _term_block(state_tensor, unitaries, settings)
        total += sign * float(np.dot(w.ravel(), block.ravel()))
    return total / (sc.outcomes - 1)


def quantum_bell_value(
    state: StateVector,
    config: PhaseConfiguration,
    expression: BellExpression,
) -> float:
    """Bell value of the full quantum probability table."""
    if expression.scenario != state.scenario:
        raise DomainError("expression scenario does not match the state")
    from .scenario import bell_value

    return float(bell_value(expression, joint_probabilities(state, config)))


@dataclass(frozen=True)
class BellOperator:
    """Hermitian operator whose expectation equals the Bell value."""

    scenario: Scenario
    matrix: np.ndarray
    expression: BellExpression
    config: PhaseConfiguration

    def __post_init__(self) -> None:
        m = self.matrix
        if m.shape != (self.scenario.dimension,) * 2:
            raise DomainError("operator dimension does not match the scenario")
        if float(np.abs(m - m.conj().T).max()) > 1e-12:
            raise DomainError("operator is not Hermitian within 1e-12")

    def expectation(self, state: StateVector) -> float:
        v = state.amplitudes
        return float(np.vdot(v, self.matrix @ v).real)


def bell_operator(
    config: PhaseConfiguration, expression: BellExpression
) -> BellOperator:
    """Assemble the Bell operator for fixed splitter settings."""
    sc = expression.scenario
    if config.scenario != sc:
        raise DomainError("phase configuration scenario does not match")
    if sc.dimension > OPERATOR_DIMENSION_CAP:
        raise ResourceError(
            f"operator dimension {sc.dimension} exceeds cap {OPERATOR_DIMENSION_CAP}"
        )
    us = config.unitaries()
    d = sc.outcomes
    matrix = np.zeros((sc.dimension, sc.dimension), dtype=np.complex128)
    for settings, sign in expression.terms:
        u_total = np.ones((1, 1), dtype=np.complex128)
        for j, s in enumerate(settings):
            u_total = np.kron(u_total, us[2 * j + (s - 1)])
        w = weight_numerators(sc.parties, d, expression.family, settings).ravel()
        matrix += sign * (u_total.conj().T * (w / (d - 1))[None, :]) @ u_total
    matrix = (matrix + matrix.conj().T) / 2.0
    matrix.setflags(write=False)
    return BellOperator(sc, matrix, expression, config)


def max_eigenpair(
    operator: BellOperator, tol: float = 1e-9
) -> tuple[float, StateVector]:
    """Largest eigenvalue and a matching eigenvector of the Bell operator.

    Bell operators at near-optimal settings routinely have (near-)degenerate
    top eigenvalues, where shifted power iteration stalls far above the
    residual contract and can even settle on a non-dominant pair, so this
    uses the dense LAPACK Hermitian solver and verifies the residual.
    """
    b = operator.matrix
    dim = b.shape[0]
    if dim > OPERATOR_DIMENSION_CAP:
        raise ResourceError(f"dimension {dim} exceeds cap {OPERATOR_DIMENSION_CAP}")
    values, vectors = np.linalg.eigh(b)
    lam = float(values[-1])
    vec = np.ascontiguousarray(vectors[:, -1])
    residual = float(np.linalg.norm(b @ vec - lam * vec))
    if residual > tol * abs(lam) + 1e-30:
        raise NumericError(
            f"eigenpair residual {residual:.3e} exceeds {tol:.1e} * |{lam:.6f}|"
        )
    return lam, StateVector(operator.scenario, vec)


def ghz_qubit(theta: float) -> StateVector:
    """cos(theta)|000> + sin(theta)|111> on three qubits."""
    sc = Scenario(3, 2)
    amps = np.zeros(8, dtype=np.complex128)
    amps[0] = np.cos(theta)
    amps[7] = np.sin(theta)
    return StateVector(sc, amps)


def ghz_qutrit(theta_1: float, theta_2: float) -> StateVector:
    """sin(t1)sin(t2)|000> + sin(t1)cos(t2)|111> + cos(t1)|222>."""
    sc = Scenario(3, 3)
    amps = np.zeros(27, dtype=np.complex128)
    amps[0] = np.sin(theta_1) * np.sin(theta_2)
    amps[13] = np.sin(theta_1) * np.cos(theta_2)
    amps[26] = np.cos(theta_1)
    return StateVector(sc, amps)


def ghz_max(parties: int, outcomes: int) -> StateVector:
    """Maximally entangled (1/sqrt(d)) sum_x |x...x> on N qudits."""
    sc = Scenario(parties, outcomes)
    if sc.dimension > STATE_DIMENSION_CAP:
        raise ResourceError(f"state dimension {sc.dimension} exceeds the budget")
    amps = np.zeros(sc.dimension, dtype=np.complex128)
    step = sum(outcomes**k for k in range(parties))
    amps[::step] = 1.0 / np.sqrt(outcomes)
    return StateVector(sc, amps)


def w_state(beta: float, xi: float) -> StateVector:
    """sin(b)sin(x)|001> + sin(b)cos(x)|010> + cos(b)|100> on three qubits."""
    sc = Scenario(3, 2)
    amps = np.zeros(8, dtype=np.complex128)
    amps[1] = np.sin(beta) * np.sin(xi)
    amps[2] = np.sin(beta) * np.cos(xi)
    amps[4] = np.cos(beta)
    return StateVector(sc, amps)


def noise_threshold(violation: float) -> float:
    """Largest white-noise fraction at which the value still exceeds 2.

    Mixing with white noise scales the Bell value by (1 - F) because the
    uniform table contributes 0, so the crossing is at 1 - 2/violation,
    clamped at 0 for non-violations.
    """
    if violation <= 0:
        raise DomainError(f"violation must be positive, got {violation}")
    return max(0.0, 1.0 - 2.0 / violation)


def noisy_table(table: ProbabilityTable, noise_fraction: float) -> ProbabilityTable:
    """(1 - F) * table + F * uniform."""
    if not 0.0 <= noise_fraction <= 1.0:
        raise DomainError(f"noise fraction {noise_fraction} outside [0, 1]")
    uniform = ProbabilityTable.uniform(table.scenario)
    return ProbabilityTable.mix(table, uniform, 1.0 - noise_fraction)


def table_to_csv(table: ProbabilityTable, stream: IO[str]) -> None:
    """Write (settings-tuple, outcome-tuple, probability) rows."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["settings", "outcomes", "probability"])
    sc = table.scenario
    for settings in sc.settings_tuples():
        block = table.blocks[settings]
        for outcomes in sc.outcome_tuples():
            writer.writerow(
                [
                    "-".join(map(str, settings)),
                    "-".join(map(str, outcomes)),
                    repr(float(block[outcomes])),
                ]
            )
