"""Violation search: multistart phase optimization, see-saw, state families.

All searches are deterministic: start k of a run draws from a generator
seeded by (seed, k), so results are independent of thread count and the
start-stream is a prefix of any longer run with the same seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError
from .scenario import BellExpression, Scenario
from .quantum import (
    PhaseConfiguration,
    StateVector,
    _expression_value_fast,
    beamsplitter_unitary,
    bell_operator,
    ghz_qubit,
    ghz_qutrit,
    max_eigenpair,
    w_state,
)

MAX_SEESAW_SWEEPS = 100


@dataclass(frozen=True)
class OptimizerConfig:
    """Multistart search knobs; identical configs give bit-identical runs."""

    starts: int = 64
    seed: int = 0
    tol: float = 1e-9
    max_iterations: int = 5000
    initial_step: float = 0.3

    def __post_init__(self) -> None:
        if self.starts < 1:
            raise DomainError("need at least one start")
        if self.tol <= 0 or self.initial_step <= 0 or self.max_iterations < 1:
            raise DomainError("tolerance, step, and iteration cap must be positive")


@dataclass(frozen=True)
class StateFamily:
    """Named parametric family of pure states for family-level optimization."""

    name: str
    param_names: tuple[str, ...]
    scenario: Scenario
    build: Callable[[Sequence[float]], StateVector]


STATE_FAMILIES: dict[str, StateFamily] = {
    "ghz_qubit": StateFamily(
        "ghz_qubit", ("theta",), Scenario(3, 2), lambda a: ghz_qubit(a[0])
    ),
    "ghz_qutrit": StateFamily(
        "ghz_qutrit",
        ("theta_1", "theta_2"),
        Scenario(3, 3),
        lambda a: ghz_qutrit(a[0], a[1]),
    ),
    "w_state": StateFamily(
        "w_state", ("beta", "xi"), Scenario(3, 2), lambda a: w_state(a[0], a[1])
    ),
}


@dataclass(frozen=True)
class OptimizationResult:
    """Best point found by a multistart search plus per-start summaries."""

    best_value: float
    best_phases: PhaseConfiguration
    best_state: Optional[StateVector]
    start_values: tuple[tuple[int, float], ...]
    converged: bool
    evaluations: int = 0
    family_angles: Optional[dict[str, float]] = None
    trajectories: Optional[tuple[tuple[float, ...], ...]] = None

    def to_json_dict(self) -> dict:
        out = {
            "best_value": self.best_value,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "best_phases": self.best_phases.to_json_dict(),
            "best_state": self.best_state.to_json_dict() if self.best_state else None,
            "start_values": [[k, v] for k, v in self.start_values],
        }
        if self.family_angles is not None:
            out["family_angles"] = dict(self.family_angles)
        return out


def wrap_angle(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Reduce modulo 2*pi into (-pi, pi]."""
    return np.pi - np.mod(np.pi - x, 2.0 * np.pi)


def _phase_vectors(x: np.ndarray, scenario: Scenario) -> list[np.ndarray]:
    """Unpack the free phases (gauge phi[0] = 0) into 2N full vectors."""
    d = scenario.outcomes
    free = d - 1
    vectors = []
    for v in range(2 * scenario.parties):
        vec = np.zeros(d)
        vec[1:] = x[v * free : (v + 1) * free]
        vectors.append(vec)
    return vectors


def _phase_param_count(scenario: Scenario) -> int:
    return 2 * scenario.parties * (scenario.outcomes - 1)


def _config_from_params(x: np.ndarray, scenario: Scenario) -> PhaseConfiguration:
    return PhaseConfiguration(scenario, _phase_vectors(wrap_angle(x), scenario))


def _fast_unitaries(x: np.ndarray, scenario: Scenario) -> list[np.ndarray]:
    d = scenario.outcomes
    return [beamsplitter_unitary(v, d) for v in _phase_vectors(x, scenario)]


def _nelder_mead_max(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    config: OptimizerConfig,
) -> tuple[np.ndarray, float, bool, int]:
    """Simplex local search, maximizing; returns (x, value, success, nfev)."""
    x0 = np.asarray(x0, dtype=float)
    if x0.size == 0:
        return x0, objective(x0), True, 1
    simplex = np.vstack([x0] + [x0 + config.initial_step * e for e in np.eye(x0.size)])
    res = minimize(
        lambda x: -objective(x),
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": 1e-6,
            "fatol": config.tol,
            "maxiter": config.max_iterations,
            "maxfev": config.max_iterations,
        },
    )
    return np.asarray(res.x, dtype=float), -float(res.fun), bool(res.success), int(res.nfev)


def _start_point(
    k: int, size: int, config: OptimizerConfig, deterministic_first: np.ndarray
) -> np.ndarray:
    """Start 0 is the deterministic point; others are seeded uniform draws."""
    if k == 0:
        return deterministic_first.copy()
    rng = np.random.default_rng([config.seed, k])
    return rng.uniform(-np.pi, np.pi, size)


def _map_starts(threads: int, fn: Callable[[int], tuple], count: int) -> list[tuple]:
    if threads <= 1 or count <= 1:
        return [fn(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _pick_best(per_start: list[tuple]) -> int:
    """Index of the maximal value; ties go to the lowest start index."""
    best = 0
    for k in range(1, len(per_start)):
        if per_start[k][1] > per_start[best][1]:
            best = k
    return best


def optimize_phases(
    state: StateVector,
    expression: BellExpression,
    config: Optional[OptimizerConfig] = None,
    threads: int = 1,
) -> OptimizationResult:
    """Maximize the Bell value over all 2N(d-1) free phases, state fixed."""
    config = config or OptimizerConfig()
    sc = expression.scenario
    if state.scenario != sc:
        raise DomainError("state scenario does not match the expression")
    tensor = state.as_tensor()
    n_params = _phase_param_count(sc)

    def objective(x: np.ndarray) -> float:
        return _expression_value_fast(tensor, _fast_unitaries(x, sc), expression)

    zeros = np.zeros(n_params)

    def one_start(k: int):
        x0 = _start_point(k, n_params, config, zeros)
        x, val, ok, nfev = _nelder_mead_max(objective, x0, config)
        return x, val, ok, nfev

    per_start = _map_starts(threads, one_start, config.starts)
    best = _pick_best(per_start)
    x, val, ok, _ = per_start[best]
    return OptimizationResult(
        best_value=val,
        best_phases=_config_from_params(x, sc),
        best_state=None,
        start_values=tuple((k, r[1]) for k, r in enumerate(per_start)),
        converged=ok,
        evaluations=sum(r[3] for r in per_start),
    )


def seesaw(
    expression: BellExpression,
    config: Optional[OptimizerConfig] = None,
    threads: int = 1,
) -> OptimizationResult:
    """Alternate the eigenvector step and the phase step until stationary.

    Each sweep first replaces the state by the dominant eigenvector of the
    Bell operator at the current phases (the maximum eigenvalue dominates
    every Rayleigh quotient, so this step cannot decrease the objective),
    then locally re-optimizes the phases at the new state.
    """
    config = config or OptimizerConfig()
    sc = expression.scenario
    n_params = _phase_param_count(sc)
    inner = replace(config, starts=1)
    zeros = np.zeros(n_params)

    def one_start(k: int):
        x = _start_point(k, n_params, config, zeros)
        state: Optional[StateVector] = None
        trajectory: list[float] = []
        prev = -np.inf
        converged = False
        evaluations = 0
        for _ in range(MAX_SEESAW_SWEEPS):
            operator = bell_operator(_config_from_params(x, sc), expression)
            lam, state = max_eigenpair(operator)
            trajectory.append(lam)
            tensor = state.as_tensor()

            def objective(p: np.ndarray) -> float:
                return _expression_value_fast(tensor, _fast_unitaries(p, sc), expression)

            x, val, _, nfev = _nelder_mead_max(objective, x, config)
            evaluations += nfev
            trajectory.append(val)
            if val - prev <= config.tol:
                converged = True
                break
            prev = val
        return x, trajectory[-1], converged, evaluations, state, tuple(trajectory)

    per_start = _map_starts(threads, one_start, config.starts)
    best = _pick_best(per_start)
    x, val, ok, _, state, _ = per_start[best]
    return OptimizationResult(
        best_value=val,
        best_phases=_config_from_params(x, sc),
        best_state=state,
        start_values=tuple((k, r[1]) for k, r in enumerate(per_start)),
        converged=ok,
        evaluations=sum(r[3] for r in per_start),
        trajectories=tuple(r[5] for r in per_start),
    )


def _resolve_family(family: Union[str, StateFamily]) -> StateFamily:
    if isinstance(family, StateFamily):
        return family
    try:
        return STATE_FAMILIES[family]
    except KeyError:
        raise DomainError(
            f"unknown state family {family!r}; known: {sorted(STATE_FAMILIES)}"
        ) from None


def optimize_state_family(
    family: Union[str, StateFamily],
    expression: BellExpression,
    config: Optional[OptimizerConfig] = None,
    phases: Union[str, PhaseConfiguration] = "free",
    threads: int = 1,
) -> OptimizationResult:
    """Optimize the family angles, jointly with the phases unless fixed."""
    config = config or OptimizerConfig()
    fam = _resolve_family(family)
    sc = expression.scenario
    if fam.scenario != sc:
        raise DomainError(
            f"family {fam.name} lives on {fam.scenario}, expression on {sc}"
        )
    n_angles = len(fam.param_names)
    free_phases = isinstance(phases, str)
    if free_phases:
        if phases != "free":
            raise DomainError(f"phases must be 'free' or a PhaseConfiguration")
        n_params = n_angles + _phase_param_count(sc)
        fixed_unitaries = None
    else:
        if phases.scenario != sc:
            raise DomainError("fixed phases do not match the expression scenario")
        n_params = n_angles
        fixed_unitaries = phases.unitaries()

    def objective(x: np.ndarray) -> float:
        tensor = fam.build(x[:n_angles]).as_tensor()
        us = (
            _fast_unitaries(x[n_angles:], sc) if free_phases else fixed_unitaries
        )
        return _expression_value_fast(tensor, us, expression)

    first = np.zeros(n_params)
    first[:n_angles] = np.pi / 4

    def one_start(k: int):
        x0 = _start_point(k, n_params, config, first)
        x, val, ok, nfev = _nelder_mead_max(objective, x0, config)
        return x, val, ok, nfev

    per_start = _map_starts(threads, one_start, config.starts)
    best = _pick_best(per_start)
    x, val, ok, _ = per_start[best]
    angles = wrap_angle(x[:n_angles])
    best_phases = (
        _config_from_params(x[n_angles:], sc) if free_phases else phases
    )
    return OptimizationResult(
        best_value=val,
        best_phases=best_phases,
        best_state=fam.build(angles),
        start_values=tuple((k, r[1]) for k, r in enumerate(per_start)),
        converged=ok,
        evaluations=sum(r[3] for r in per_start),
        family_angles={name: float(a) for name, a in zip(fam.param_names, angles)},
    )


@dataclass(frozen=True)
class SweepRow:
    parameters: tuple[float, ...]
    best_value: float
    converged: bool


def derived_seed(seed: int, index: int) -> int:
    """Deterministic per-task seed from (run seed, task index)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def sweep(
    family: Union[str, StateFamily],
    grid: Sequence[Sequence[float]],
    expression: BellExpression,
    config: Optional[OptimizerConfig] = None,
    threads: int = 1,
) -> list[SweepRow]:
    """Independent phase optimization at each grid point, rows in grid order."""
    config = config or OptimizerConfig()
    fam = _resolve_family(family)
    points = [tuple(float(v) for v in np.atleast_1d(p)) for p in grid]
    if not points:
        raise DomainError("sweep grid must not be empty")
    for p in points:
        if len(p) != len(fam.param_names):
            raise DomainError(
                f"grid point {p} has {len(p)} values, family {fam.name} "
                f"needs {len(fam.param_names)}"
            )

    def one_point(i: int) -> SweepRow:
        point_config = replace(config, seed=derived_seed(config.seed, i))
        result = optimize_phases(fam.build(points[i]), expression, point_config)
        return SweepRow(points[i], result.best_value, result.converged)

    if threads <= 1 or len(points) <= 1:
        return [one_point(i) for i in range(len(points))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one_point, range(len(points))))
