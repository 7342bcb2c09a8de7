"""Comparison inequalities: three-qubit Mermin (MABK) and the two-party
reduction of the three-party expression.

The Mermin functional is evaluated with general dichotomic qubit
observables (full Bloch sphere), which is the strongest measurement class
and therefore the meaningful benchmark for non-violation claims.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .optimize import OptimizerConfig, _map_starts, _nelder_mead_max, _pick_best, _start_point
from .quantum import StateVector
from .scenario import MULTIPARTITE, BellExpression, Scenario, bell_expression

_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
_SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)

# terms of the three-qubit Mermin functional: E(112)+E(121)+E(211)-E(222) <= 2
_MERMIN_TERMS = (((1, 1, 2), 1), ((1, 2, 1), 1), ((2, 1, 1), 1), ((2, 2, 2), -1))


def _unit_vector(polar: float, azimuth: float) -> np.ndarray:
    return np.array(
        [
            np.sin(polar) * np.cos(azimuth),
            np.sin(polar) * np.sin(azimuth),
            np.cos(polar),
        ]
    )


@dataclass(frozen=True)
class BlochSettings:
    """A unit Bloch vector for each of the 3 parties and 2 settings."""

    vectors: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self) -> None:
        if len(self.vectors) != 3 or any(len(pair) != 2 for pair in self.vectors):
            raise DomainError("need exactly 3 parties x 2 settings")
        for pair in self.vectors:
            for v in pair:
                if v.shape != (3,) or abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
                    raise DomainError("Bloch vectors must be unit 3-vectors")

    @classmethod
    def from_angles(cls, angles: Sequence[float]) -> "BlochSettings":
        """12 angles, party-major: (polar, azimuth) per (party, setting)."""
        a = np.asarray(angles, dtype=float).reshape(-1)
        if a.size != 12:
            raise DomainError(f"need 12 angles, got {a.size}")
        vectors = []
        for j in range(3):
            base = 4 * j
            vectors.append(
                (
                    _unit_vector(a[base], a[base + 1]),
                    _unit_vector(a[base + 2], a[base + 3]),
                )
            )
        return cls(tuple(vectors))

    def observable(self, party: int, setting: int) -> np.ndarray:
        """n . sigma for 1-based (party, setting)."""
        n = self.vectors[party - 1][setting - 1]
        return n[0] * _SIGMA_X + n[1] * _SIGMA_Y + n[2] * _SIGMA_Z

    def flip_party(self, party: int) -> "BlochSettings":
        """Negate both Bloch vectors of one party."""
        vectors = list(self.vectors)
        a, b = vectors[party - 1]
        vectors[party - 1] = (-a, -b)
        return BlochSettings(tuple(vectors))


def _check_three_qubits(state: StateVector) -> None:
    if state.scenario != Scenario(3, 2):
        raise DomainError("Mermin functional is defined for three qubits only")


def mermin3_value(state: StateVector, settings: BlochSettings) -> float:
    """E(112) + E(121) + E(211) - E(222) with +-1-valued observables."""
    _check_three_qubits(state)
    psi = state.amplitudes
    total = 0.0
    for term, sign in _MERMIN_TERMS:
        op = settings.observable(1, term[0])
        for party, s in ((2, term[1]), (3, term[2])):
            op = np.kron(op, settings.observable(party, s))
        total += sign * float(np.vdot(psi, op @ psi).real)
    return total


_PAULIS = np.stack([_SIGMA_X, _SIGMA_Y, _SIGMA_Z])


def _correlation_tensor(state: StateVector) -> np.ndarray:
    """T[a,b,c] = <sigma_a x sigma_b x sigma_c>, so every product-observable
    expectation is the trilinear form of T with the three Bloch vectors."""
    p = state.amplitudes.reshape(2, 2, 2)
    tmp = np.einsum("axi,ijk->axjk", _PAULIS, p)
    tmp = np.einsum("byj,axjk->abxyk", _PAULIS, tmp)
    tmp = np.einsum("czk,abxyk->abcxyz", _PAULIS, tmp)
    return np.real(np.einsum("xyz,abcxyz->abc", np.conj(p), tmp))


def _bloch_rows(angles: np.ndarray) -> np.ndarray:
    """Six unit vectors from 12 angles; rows ordered (p1,s1), (p1,s2), ..."""
    sin_p = np.sin(angles[0::2])
    return np.stack(
        [sin_p * np.cos(angles[1::2]), sin_p * np.sin(angles[1::2]),
         np.cos(angles[0::2])],
        axis=1,
    )


def _tensor_functional(
    t: np.ndarray, vecs: np.ndarray, terms: tuple[tuple[tuple[int, int, int], int], ...]
) -> float:
    total = 0.0
    for (i, j, k), sign in terms:
        e = vecs[i - 1] @ (t @ vecs[4 + k - 1]) @ vecs[2 + j - 1]
        total += sign * float(e)
    return total


def _product_objective(state: StateVector, terms):
    t = _correlation_tensor(state)

    def objective(angles: np.ndarray) -> float:
        return _tensor_functional(t, _bloch_rows(angles), terms)

    return objective


def _multistart_max(objective, n_params: int, config: OptimizerConfig, threads: int) -> float:
    zeros = np.zeros(n_params)

    def one_start(k: int):
        x0 = _start_point(k, n_params, config, zeros)
        x, val, ok, nfev = _nelder_mead_max(objective, x0, config)
        return x, val, ok, nfev

    per_start = _map_starts(threads, one_start, config.starts)
    return float(per_start[_pick_best(per_start)][1])


def mermin3_max(
    state: StateVector,
    config: Optional[OptimizerConfig] = None,
    threads: int = 1,
) -> float:
    """Multistart maximization of the Mermin value over the 12 Bloch angles."""
    _check_three_qubits(state)
    config = config or OptimizerConfig()
    return _multistart_max(_product_objective(state, _MERMIN_TERMS), 12, config, threads)


def _check_qubit_product_form(expression: BellExpression) -> None:
    if expression.scenario != Scenario(3, 2) or expression.family != MULTIPARTITE:
        raise DomainError(
            "general-observable maximization is implemented for the "
            "three-qubit multipartite expression"
        )


def qubit_general_max(
    state: StateVector,
    expression: BellExpression,
    config: Optional[OptimizerConfig] = None,
    threads: int = 1,
) -> float:
    """Maximum of the three-qubit expression over general +-1 observables.

    For d=2 the normalized weight is the parity (-1)**(m+n+l), so each
    correlation is the expectation of a product of dichotomic observables
    and the full Bloch sphere is searchable.  Splitter phases only reach the
    equator, where amplitude pairs must disagree at every party to
    contribute; states without such pairs (e.g. the single-excitation
    family) score 0 there yet can violate the bound with general
    observables, which is what this routine quantifies.
    """
    _check_three_qubits(state)
    _check_qubit_product_form(expression)
    config = config or OptimizerConfig()
    terms = tuple((settings, sign) for settings, sign in expression.terms)
    return _multistart_max(_product_objective(state, terms), 12, config, threads)


def qubit_general_family_max(
    family,
    expression: BellExpression,
    config: Optional[OptimizerConfig] = None,
    threads: int = 1,
) -> float:
    """Joint maximization over family angles and general qubit observables."""
    from .optimize import _resolve_family

    _check_qubit_product_form(expression)
    fam = _resolve_family(family)
    if fam.scenario != Scenario(3, 2):
        raise DomainError(f"family {fam.name} is not a three-qubit family")
    config = config or OptimizerConfig()
    terms = tuple((settings, sign) for settings, sign in expression.terms)
    n_angles = len(fam.param_names)

    def objective(x: np.ndarray) -> float:
        t = _correlation_tensor(fam.build(x[:n_angles]))
        return _tensor_functional(t, _bloch_rows(x[n_angles:]), terms)

    return _multistart_max(objective, n_angles + 12, config, threads)


def reduce_to_bipartite(expression: BellExpression) -> BellExpression:
    """Two-party functional obtained by clamping party 3's outcome to 0.

    Fixing the third outcome to 0 removes it from every modular sum while
    each term keeps the parity of its full settings product, which is
    exactly the two-party member of the multipartite family (the CGLMP-
    equivalent form); its deterministic-strategy maximum is again 2.
    """
    if expression.scenario.parties != 3 or expression.family != MULTIPARTITE:
        raise DomainError("reduction is defined for the three-party multipartite form")
    return bell_expression(2, expression.scenario.outcomes, MULTIPARTITE)
