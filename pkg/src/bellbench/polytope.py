"""Deterministic local strategies, exact classical maxima, and facet checks.

Strategies are enumerated in mixed-radix index order (party 1 / setting 1
least significant) so the work can be partitioned into contiguous index
ranges whose partial results merge deterministically.  All classical values
are exact rationals; the facet rank is computed over the integers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .errors import DomainError, ResourceError
from .scenario import (
    BellExpression,
    ProbabilityTable,
    Scenario,
    SettingsTuple,
    modular_sign,
)

DEFAULT_BUDGET = 10**8
_CHUNK = 1 << 16


@dataclass(frozen=True)
class DeterministicStrategy:
    """One fixed outcome per (party, setting); a local-polytope vertex.

    assignment[j][i] is the outcome party j+1 produces on setting i+1.
    """

    scenario: Scenario
    assignment: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.assignment) != self.scenario.parties:
            raise DomainError("assignment must cover every party")
        for pair in self.assignment:
            if len(pair) != 2 or any(
                not 0 <= x < self.scenario.outcomes for x in pair
            ):
                raise DomainError(f"outcome pair {pair} out of range")

    @property
    def index(self) -> int:
        d = self.scenario.outcomes
        idx = 0
        for j in reversed(range(self.scenario.parties)):
            for i in (1, 0):
                idx = idx * d + self.assignment[j][i]
        return idx

    @classmethod
    def from_index(cls, scenario: Scenario, index: int) -> "DeterministicStrategy":
        d = scenario.outcomes
        if not 0 <= index < d ** (2 * scenario.parties):
            raise DomainError(f"strategy index {index} out of range")
        rest = index
        pairs = []
        for _ in range(scenario.parties):
            a = rest % d
            rest //= d
            b = rest % d
            rest //= d
            pairs.append((a, b))
        return cls(scenario, tuple(pairs))

    def outcomes_at(self, settings: SettingsTuple) -> tuple[int, ...]:
        return tuple(self.assignment[j][s - 1] for j, s in enumerate(settings))


def strategy_count(scenario: Scenario) -> int:
    return scenario.outcomes ** (2 * scenario.parties)


def _check_budget(scenario: Scenario, budget: int) -> int:
    total = strategy_count(scenario)
    if total > budget:
        raise ResourceError(
            f"enumeration of {total} strategies exceeds the budget {budget}"
        )
    return total


def enumerate_strategies(
    scenario: Scenario,
    start: int = 0,
    stop: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
) -> Iterator[DeterministicStrategy]:
    """Yield strategies in index order; restartable from any index."""
    total = _check_budget(scenario, budget)
    if stop is None:
        stop = total
    if not 0 <= start <= stop <= total:
        raise DomainError(f"bad enumeration range [{start}, {stop})")
    for idx in range(start, stop):
        yield DeterministicStrategy.from_index(scenario, idx)


def strategy_table(strategy: DeterministicStrategy) -> ProbabilityTable:
    """Exact table with unit mass on the strategy's outcome per settings."""
    sc = strategy.scenario
    shape = (sc.outcomes,) * sc.parties
    blocks = {}
    for settings in sc.settings_tuples():
        arr = np.full(shape, Fraction(0), dtype=object)
        arr[strategy.outcomes_at(settings)] = Fraction(1)
        blocks[settings] = arr
    return ProbabilityTable(sc, blocks, validate=False)


def _digit_arrays(idx: np.ndarray, parties: int, d: int) -> list[np.ndarray]:
    """Mixed-radix digits of each index; slot 2*j + i is (party j, setting i)."""
    digits = []
    rest = idx.copy()
    for _ in range(2 * parties):
        digits.append(rest % d)
        rest //= d
    return digits


def _value_numerators(expression: BellExpression, lo: int, hi: int) -> np.ndarray:
    """(d-1) * Bell value for every strategy index in [lo, hi)."""
    sc = expression.scenario
    d = sc.outcomes
    idx = np.arange(lo, hi, dtype=np.int64)
    digits = _digit_arrays(idx, sc.parties, d)
    nums = np.zeros(hi - lo, dtype=np.int64)
    for settings, sign in expression.terms:
        total = np.zeros(hi - lo, dtype=np.int64)
        for j, s in enumerate(settings):
            total += digits[2 * j + (s - 1)]
        m = np.mod(modular_sign(settings, expression.family) * total, d)
        nums += sign * ((d - 1) - 2 * m)
    return nums


@dataclass(frozen=True)
class ClassicalMaximum:
    """Exact maximum over deterministic strategies plus the value spectrum."""

    expression: BellExpression
    max_value: Fraction
    argmax: DeterministicStrategy
    histogram: dict[Fraction, int]

    @property
    def strategy_total(self) -> int:
        return strategy_count(self.expression.scenario)


def _scan_chunks(total: int, threads: int, work):
    """Apply work(lo, hi) to contiguous chunks, results in chunk order."""
    ranges = [(lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)]
    if threads <= 1 or len(ranges) <= 1:
        return [work(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: work(*r), ranges))


def classical_maximum(
    expression: BellExpression,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> ClassicalMaximum:
    """Exhaustive exact maximum of the expression over local strategies.

    Partial results over index ranges merge associatively (max with
    lowest-index tie break, histogram addition), so the output does not
    depend on chunking or thread count.
    """
    sc = expression.scenario
    total = _check_budget(sc, budget)
    d = sc.outcomes

    def work(lo: int, hi: int):
        nums = _value_numerators(expression, lo, hi)
        k = int(np.argmax(nums))
        values, counts = np.unique(nums, return_counts=True)
        return int(nums[k]), lo + k, values, counts

    best_num = None
    best_idx = None
    hist: dict[int, int] = {}
    for num, idx, values, counts in _scan_chunks(total, threads, work):
        if best_num is None or num > best_num:
            best_num, best_idx = num, idx
        for v, c in zip(values.tolist(), counts.tolist()):
            hist[v] = hist.get(v, 0) + c
    histogram = {Fraction(v, d - 1): c for v, c in sorted(hist.items())}
    return ClassicalMaximum(
        expression,
        Fraction(best_num, d - 1),
        DeterministicStrategy.from_index(sc, best_idx),
        histogram,
    )


def cg_vector(strategy: DeterministicStrategy) -> np.ndarray:
    """Collins-Gisin embedding: tensor product of per-party 0/1 vectors.

    Per party the vector is [1, P(0|s1), .., P(d-2|s1), P(0|s2), .., P(d-2|s2)],
    so the outcome d-1 is the dropped coordinate and the full joint
    distribution is recoverable.  Length (2d-1)**N, first entry always 1.
    """
    d = strategy.scenario.outcomes
    vec = np.ones(1, dtype=np.int64)
    for a, b in strategy.assignment:
        party = np.zeros(2 * d - 1, dtype=np.int64)
        party[0] = 1
        if a < d - 1:
            party[1 + a] = 1
        if b < d - 1:
            party[d + b] = 1
        vec = np.kron(vec, party)
    return vec


def _party_cg_blocks(scenario: Scenario, digits: list[np.ndarray]) -> list[np.ndarray]:
    """Per-party CG vectors for a batch of strategies given digit arrays."""
    d = scenario.outcomes
    n_rows = digits[0].shape[0]
    blocks = []
    for j in range(scenario.parties):
        block = np.zeros((n_rows, 2 * d - 1), dtype=np.int64)
        block[:, 0] = 1
        rows = np.arange(n_rows)
        a, b = digits[2 * j], digits[2 * j + 1]
        mask_a = a < d - 1
        block[rows[mask_a], 1 + a[mask_a]] = 1
        mask_b = b < d - 1
        block[rows[mask_b], d + b[mask_b]] = 1
        blocks.append(block)
    return blocks


def _cg_matrix(scenario: Scenario, indices: np.ndarray) -> np.ndarray:
    """CG vectors, one row per strategy index; vectorized tensor product."""
    digits = _digit_arrays(indices.astype(np.int64), scenario.parties, scenario.outcomes)
    blocks = _party_cg_blocks(scenario, digits)
    out = blocks[0]
    for block in blocks[1:]:
        out = (out[:, :, None] * block[:, None, :]).reshape(out.shape[0], -1)
    return out


class IntegerRankAccumulator:
    """Streaming exact rank of integer rows via fraction-free elimination.

    Pivot rows are kept gcd-reduced; combinations stay in int64 when safe and
    are promoted to Python integers if a combination could overflow, so the
    computed rank is exact regardless of entry growth.
    """

    _INT64_SAFE = 2**62

    def __init__(self, length: int) -> None:
        self.length = length
        self.pivots: list[int] = []
        self.rows: list[np.ndarray] = []

    @property
    def rank(self) -> int:
        return len(self.rows)

    @staticmethod
    def _gcd_reduce(row: np.ndarray) -> np.ndarray:
        if row.dtype == object:
            g = 0
            for v in row:
                g = math.gcd(g, abs(int(v)))
                if g == 1:
                    break
            if g > 1:
                row = row // g
            if max(abs(int(v)) for v in row) < 2**40:
                row = row.astype(np.int64)
            return row
        g = int(np.gcd.reduce(np.abs(row)))
        if g > 1:
            row = row // g
        return row

    def _combine(self, row: np.ndarray, pivot_row: np.ndarray, col: int) -> np.ndarray:
        a = int(row[col])
        b = int(pivot_row[col])
        promote = row.dtype == object or pivot_row.dtype == object
        if not promote:
            bound = abs(b) * int(np.abs(row).max()) + abs(a) * int(
                np.abs(pivot_row).max()
            )
            promote = bound >= self._INT64_SAFE
        if promote:
            row = row.astype(object)
            pivot_row = pivot_row.astype(object)
        new = b * row - a * pivot_row
        if new.dtype != object and int(np.abs(new).max()) > 2**20:
            new = self._gcd_reduce(new)
        return new

    def add(self, row: np.ndarray) -> bool:
        """Reduce a row against the basis; True if it increased the rank."""
        row = np.asarray(row)
        for col, pivot_row in zip(self.pivots, self.rows):
            if row[col] != 0:
                row = self._combine(row, pivot_row, col)
        nz = np.nonzero(row)[0]
        if nz.size == 0:
            return False
        row = self._gcd_reduce(row)
        if row[nz[0]] < 0:
            row = -row
        col = int(nz[0])
        pos = int(np.searchsorted(np.asarray(self.pivots), col))
        self.pivots.insert(pos, col)
        self.rows.insert(pos, row)
        return True


@dataclass(frozen=True)
class FacetReport:
    """Tightness certificate for one expression against the local polytope."""

    expression: BellExpression
    dimension: int
    classical_max: Fraction
    saturating_count: int
    affine_rank: int
    is_facet: bool

    def to_json_dict(self) -> dict:
        return {
            "n": self.expression.scenario.parties,
            "d": self.expression.scenario.outcomes,
            "family": self.expression.family,
            "dimension": self.dimension,
            "classical_max": str(self.classical_max),
            "saturating_count": self.saturating_count,
            "affine_rank": self.affine_rank,
            "is_facet": self.is_facet,
        }


def polytope_dimension(scenario: Scenario) -> int:
    """Full dimension of the local polytope in CG coordinates."""
    return (2 * scenario.outcomes - 1) ** scenario.parties - 1


def facet_check(
    expression: BellExpression,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> FacetReport:
    """Certify tightness: exact classical max plus exact affine rank.

    The saturating vertices (Bell value equal to the bound) are streamed in
    index order through the integer rank accumulator, stopping early once
    the rank reaches D - 1.  A bound that is never attained yields rank 0
    and is_facet False rather than an error.
    """
    sc = expression.scenario
    total = _check_budget(sc, budget)
    dim = polytope_dimension(sc)
    cm = classical_maximum(expression, budget=budget, threads=threads)

    target = expression.bound * (sc.outcomes - 1)
    saturating = (
        cm.histogram.get(expression.bound, 0) if target.denominator == 1 else 0
    )
    attained = cm.max_value == expression.bound

    rank = 0
    if saturating > 0:
        target_num = int(target)
        acc = IntegerRankAccumulator((2 * sc.outcomes - 1) ** sc.parties)
        base_row: Optional[np.ndarray] = None
        for lo in range(0, total, _CHUNK):
            hi = min(lo + _CHUNK, total)
            nums = _value_numerators(expression, lo, hi)
            hits = np.nonzero(nums == target_num)[0]
            if hits.size == 0:
                continue
            mat = _cg_matrix(sc, hits + lo)
            row0 = 0
            if base_row is None:
                base_row = mat[0]
                row0 = 1
            for k in range(row0, mat.shape[0]):
                acc.add(mat[k] - base_row)
                if acc.rank >= dim - 1:
                    break
            if acc.rank >= dim - 1:
                break
        rank = acc.rank

    return FacetReport(
        expression=expression,
        dimension=dim,
        classical_max=cm.max_value,
        saturating_count=saturating,
        affine_rank=rank,
        is_facet=attained and rank == dim - 1,
    )
