"""Closed-form snapshot probabilities for the chain, tower, lattice and race families.

Each family has a *literal* evaluator that computes the stated closed-form sum term by
term. The lattice families also have a *corrected* evaluator that counts
every interleaving of the completed moves and weights the move still in
flight; the oracle module decides which of the two describes the process.

Conventions shared by every evaluator:

* probabilities are exact ``Fraction`` values and ``0 ** 0 == 1``;
* a chain position ``k`` is the tower sitting between c_k and c_{k+1};
* tower level ``r`` is reached with probability p_1 * ... * p_r and each
  level holds the walker for one time unit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

from .exact_arith import binomial, multinomial, to_probability
from .model import BarrierSpec, ChainSpec, LatticePoint, ModelError, Walk2DSpec

__all__ = [
    "CoefficientMode",
    "DelayComposition",
    "GosperParams",
    "enumerate_solutions",
    "delay_compositions",
    "chain_position_prob",
    "chain_absorbed_cdf",
    "multilevel_level_prob",
    "multilevel_position_prob",
    "multilevel_absorbed_cdf",
    "chain_identity_terms",
    "walk2d_point_prob",
    "walk2d_distribution",
    "walk2d_identity_total",
    "simple1d_point_prob",
    "simple1d_identity_total",
    "chain2d_point_prob",
    "chain2d_barrier_prob",
    "chain2d_distribution",
    "chain2d_identity_terms",
    "gosper_terms",
    "gosper_total",
]

ONE = Fraction(1)
ZERO = Fraction(0)


class CoefficientMode(enum.Enum):
    LITERAL = "literal"
    CORRECTED = "corrected"

    @classmethod
    def parse(cls, value) -> CoefficientMode:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown coefficient mode {value!r} (literal|corrected)") from None


@dataclass(frozen=True)
class DelayComposition:
    """How the completed transitions split by duration, plus the pending tower level.

    ``counts[d - 1]`` is the number of completed transitions that took d time
    units; ``pending_level`` is 0 for an absorbed walker.
    """

    counts: tuple[int, ...]
    pending_level: int = 0

    @property
    def elapsed(self) -> int:
        return sum(d * a for d, a in enumerate(self.counts, start=1)) + max(self.pending_level - 1, 0)

    @property
    def delayed(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class GosperParams:
    p: Fraction
    n: int

    def __post_init__(self):
        object.__setattr__(self, "p", to_probability(self.p))
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"Gosper race length must be >= 1, got {self.n}")


# ---------------------------------------------------------------------------
# constrained tuple enumeration


def enumerate_solutions(coeff_rows, targets, dims: int, bound: int) -> list[tuple[int, ...]]:
    """All x in [0, bound]^dims with row . x == target for every row, in lexicographic order."""
    rows = [tuple(r) for r in coeff_rows]
    targets = list(targets)
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if len(rows) != len(targets):
        raise ValueError("one target per coefficient row is required")
    for r in rows:
        if len(r) != dims:
            raise ValueError(f"coefficient row {r} does not have {dims} entries")
    if bound < 0:
        return []

    # reachable range of sum_{j >= i} row[j] * x[j], per row
    lo = [[0] * (dims + 1) for _ in rows]
    hi = [[0] * (dims + 1) for _ in rows]
    for ri, r in enumerate(rows):
        for i in range(dims - 1, -1, -1):
            lo[ri][i] = lo[ri][i + 1] + min(0, r[i]) * bound
            hi[ri][i] = hi[ri][i + 1] + max(0, r[i]) * bound

    out: list[tuple[int, ...]] = []
    x = [0] * dims
    nrows = len(rows)

    def feasible(i: int, residual: list[int]) -> bool:
        return all(lo[ri][i] <= residual[ri] <= hi[ri][i] for ri in range(nrows))

    def rec(i: int, residual: list[int]) -> None:
        if i == dims:
            if all(res == 0 for res in residual):
                out.append(tuple(x))
            return
        for val in range(bound + 1):
            nxt = [residual[ri] - rows[ri][i] * val for ri in range(nrows)]
            if feasible(i + 1, nxt):
                x[i] = val
                rec(i + 1, nxt)

    if feasible(0, targets):
        rec(0, targets)
    return out


@lru_cache(maxsize=None)
def delay_compositions(levels: int, elapsed: int, max_delayed: int) -> tuple[tuple[int, ...], ...]:
    """Count tuples (a_1..a_L) with sum d*a_d == elapsed and sum a_d <= max_delayed."""
    if elapsed < 0 or max_delayed < 0:
        return ()
    # trailing slack variable turns the count inequality into an equation
    time_row = list(range(1, levels + 1)) + [0]
    count_row = [1] * levels + [1]
    sols = enumerate_solutions(
        [time_row, count_row], [elapsed, max_delayed], levels + 1, max(elapsed, max_delayed)
    )
    return tuple(s[:levels] for s in sols)


# ---------------------------------------------------------------------------
# chains with delay towers


def _check_position(spec: ChainSpec, k: int, m: int) -> None:
    if not 1 <= k <= spec.n_states - 1:
        raise ValueError(f"position k={k} outside [1, {spec.n_states - 1}]")
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")


def chain_position_prob(spec: ChainSpec, k: int, m: int) -> Fraction:
    if spec.levels != 1:
        raise ModelError("chain_position_prob needs a single-level chain")
    _check_position(spec, k, m)
    if m > k - 1:
        return ZERO
    p = spec.p
    return p * binomial(k - 1, m) * p**m * (1 - p) ** (k - 1 - m)


def chain_absorbed_cdf(spec: ChainSpec, m: int) -> Fraction:
    if spec.levels != 1:
        raise ModelError("chain_absorbed_cdf needs a single-level chain")
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    p = spec.p
    n1 = spec.n_states - 1
    return sum(
        (binomial(n1, w) * p**w * (1 - p) ** (n1 - w) for w in range(min(m, n1) + 1)), ZERO
    )


@lru_cache(maxsize=1024)
def _tower_weights(spec: ChainSpec):
    """Integer numerators over a common denominator D for the per-transition weights.

    Returns ``(D, instant, by_duration, reach)``: the instant hop has weight
    instant / D, a transition held d units has weight by_duration[d-1] / D^(d+1)
    (the top level is padded by one factor of D to keep that shape), and
    reaching level r has probability reach[r] / D^r.
    """
    levels = spec.levels
    den = math.lcm(*(p.denominator for p in spec.level_probs))
    nums = [p.numerator * (den // p.denominator) for p in spec.level_probs]
    reach = [1]
    for n in nums:
        reach.append(reach[-1] * n)
    by_duration = tuple(
        reach[d] * (den - nums[d]) if d < levels else reach[d] * den for d in range(1, levels + 1)
    )
    return den, den - nums[0], by_duration, tuple(reach)


def _composition_numerator(counts, slots: int, instant: int, by_duration) -> int:
    # nested binomials, longest duration first: C(s, a_L) C(s - a_L, a_{L-1}) ...
    out = 1
    left = slots
    for d in range(len(counts), 0, -1):
        a = counts[d - 1]
        if a:
            w = by_duration[d - 1]
            if not w:
                return 0
            out *= binomial(left, a) * w**a
            left -= a
    if left:
        out *= instant**left
    return out


def _composition_sum(spec: ChainSpec, elapsed: int, slots: int, weights) -> int:
    """Numerator of the sum over compositions; the denominator is D^(slots + elapsed)."""
    _, instant, by_duration, _ = weights
    return sum(
        _composition_numerator(counts, slots, instant, by_duration)
        for counts in delay_compositions(spec.levels, elapsed, slots)
    )


@lru_cache(maxsize=1 << 16)
def multilevel_level_prob(spec: ChainSpec, k: int, level: int, m: int) -> Fraction:
    """Mass sitting on tower level ``level`` of position k at time m (entered exactly at m)."""
    _check_position(spec, k, m)
    if not 1 <= level <= spec.levels:
        raise ValueError(f"level {level} outside [1, {spec.levels}]")
    weights = _tower_weights(spec)
    den, reach = weights[0], weights[3]
    elapsed = m - (level - 1)
    if elapsed < 0 or not reach[level]:
        return ZERO
    num = _composition_sum(spec, elapsed, k - 1, weights)
    return Fraction(num * reach[level], den ** (k - 1 + elapsed + level))


def multilevel_position_prob(spec: ChainSpec, k: int, m: int) -> Fraction:
    return sum(
        (multilevel_level_prob(spec, k, r, m) for r in range(1, spec.levels + 1)), ZERO
    )


def multilevel_absorbed_cdf(spec: ChainSpec, m: int) -> Fraction:
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    weights = _tower_weights(spec)
    den = weights[0]
    slots = spec.n_states - 1
    # bring every completion time w onto the common denominator D^(slots + m)
    num = sum(_composition_sum(spec, w, slots, weights) * den ** (m - w) for w in range(m + 1))
    return Fraction(num, den ** (slots + m))


def first_reachable_position(levels: int, m: int) -> int:
    """Smallest k with nonzero tower mass at time m: each transition holds at most L units."""
    return 1 + m // levels


def chain_identity_terms(spec: ChainSpec, m: int, full_range: bool = False) -> tuple[Fraction, Fraction]:
    """(tower mass A, absorbed mass B) at time m; A + B should be exactly one.

    The tower sum starts at 1 + floor(m / L) (m + 1 for a single level);
    ``full_range`` sums over every position instead.
    """
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    lower = 1 if full_range else first_reachable_position(spec.levels, m)
    positions = range(lower, spec.n_states)
    if spec.levels == 1:
        first = sum((chain_position_prob(spec, k, m) for k in positions), ZERO)
        second = chain_absorbed_cdf(spec, m)
    else:
        first = sum((multilevel_position_prob(spec, k, m) for k in positions), ZERO)
        second = multilevel_absorbed_cdf(spec, m)
    return first, second


# ---------------------------------------------------------------------------
# lattice walks


def _four_way_pattern(spec: Walk2DSpec) -> tuple[int, int, int, int]:
    """Signed jumps (J_1, J_2, J_3, J_4) for a right/left/up/down move set."""
    if spec.barrier is not None:
        raise ModelError("the free-walk evaluators take a walk without barrier")
    if len(spec.moves) != 4:
        raise ModelError("literal mode needs exactly four moves (right, left, up, down)")
    right, left, up, down = spec.moves
    ok = (
        right.dy == 0 and right.dx >= 0
        and left.dy == 0 and left.dx <= 0
        and up.dx == 0 and up.dy >= 0
        and down.dx == 0 and down.dy <= 0
    )
    if not ok:
        raise ModelError("literal mode needs moves ordered right, left, up, down")
    if any(mv.duration == 0 for mv in spec.moves):
        raise ModelError("literal mode does not accept instantaneous moves")
    return right.dx, left.dx, up.dy, down.dy


def _require_timed(spec: Walk2DSpec) -> None:
    if spec.barrier is not None:
        raise ModelError("the free-walk evaluators take a walk without barrier")
    if any(mv.duration == 0 for mv in spec.moves):
        raise ModelError("corrected mode needs every move duration >= 1")


def _literal_term(counts, probs) -> Fraction:
    a, b, c, d = counts
    p1, p2, p3, p4 = probs
    return binomial(a + b, a) * binomial(c + d, c) * p1**a * p2**b * p3**c * p4**d


def _counts_weight(counts, probs) -> Fraction:
    w = Fraction(multinomial(counts))
    for n, p in zip(counts, probs):
        if n:
            w *= p**n
    return w


def _in_flight(spec: Walk2DSpec, completed_at: int, m: int) -> Fraction:
    return sum((mv.prob for mv in spec.moves if completed_at + mv.duration > m), ZERO)


def walk2d_point_prob(spec: Walk2DSpec, point, m: int, mode=CoefficientMode.LITERAL) -> Fraction:
    mode = CoefficientMode.parse(mode)
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    h, v = point
    if mode is CoefficientMode.LITERAL:
        j1, j2, j3, j4 = _four_way_pattern(spec)
        t = [mv.duration for mv in spec.moves]
        sols = enumerate_solutions([[j1, j2, 0, 0], [0, 0, j3, j4], t], [h, v, m], 4, m)
        return sum((_literal_term(s, spec.probs) for s in sols), ZERO)

    _require_timed(spec)
    dx = [mv.dx for mv in spec.moves]
    dy = [mv.dy for mv in spec.moves]
    t = [mv.duration for mv in spec.moves]
    total = ZERO
    for tau in range(m + 1):
        pending = _in_flight(spec, tau, m)
        if not pending:
            continue
        for s in enumerate_solutions([dx, dy, t], [h, v, tau], len(t), tau):
            total += _counts_weight(s, spec.probs) * pending
    return total


def _timed_count_tuples(durations, total_time: int):
    return enumerate_solutions([durations], [total_time], len(durations), total_time)


def walk2d_distribution(spec: Walk2DSpec, m: int, mode=CoefficientMode.LITERAL) -> dict[LatticePoint, Fraction]:
    """Closed-form mass per reachable lattice point (zero entries dropped)."""
    mode = CoefficientMode.parse(mode)
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    t = [mv.duration for mv in spec.moves]
    dist: dict[LatticePoint, Fraction] = {}
    if mode is CoefficientMode.LITERAL:
        _four_way_pattern(spec)
        for s in _timed_count_tuples(t, m):
            pt = LatticePoint(
                sum(n * mv.dx for n, mv in zip(s, spec.moves)),
                sum(n * mv.dy for n, mv in zip(s, spec.moves)),
            )
            dist[pt] = dist.get(pt, ZERO) + _literal_term(s, spec.probs)
    else:
        _require_timed(spec)
        for tau in range(m + 1):
            pending = _in_flight(spec, tau, m)
            if not pending:
                continue
            for s in _timed_count_tuples(t, tau):
                pt = LatticePoint(
                    sum(n * mv.dx for n, mv in zip(s, spec.moves)),
                    sum(n * mv.dy for n, mv in zip(s, spec.moves)),
                )
                dist[pt] = dist.get(pt, ZERO) + _counts_weight(s, spec.probs) * pending
    return {pt: q for pt, q in sorted(dist.items()) if q}


def walk2d_identity_total(spec: Walk2DSpec, m: int, mode=CoefficientMode.LITERAL) -> Fraction:
    """Sum of point probabilities: over [J_2 m, J_1 m] x [J_4 m, J_3 m] (literal) or every point."""
    mode = CoefficientMode.parse(mode)
    dist = walk2d_distribution(spec, m, mode)
    if mode is CoefficientMode.LITERAL:
        j1, j2, j3, j4 = _four_way_pattern(spec)
        return sum(
            (q for (h, v), q in dist.items() if j2 * m <= h <= j1 * m and j4 * m <= v <= j3 * m),
            ZERO,
        )
    return sum(dist.values(), ZERO)


def simple1d_point_prob(p, k: int, m: int) -> Fraction:
    p = to_probability(p)
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    if abs(k) > m or (m + k) % 2:
        return ZERO
    up = (m + k) // 2
    return binomial(m, up) * p**up * (1 - p) ** (m - up)


def simple1d_identity_total(p, m: int) -> Fraction:
    """Sum over k in [-m, m] with k of the same parity as m."""
    return sum((simple1d_point_prob(p, k, m) for k in range(-m, m + 1, 2)), ZERO)


# ---------------------------------------------------------------------------
# delayed 2D chain under the L-shaped barrier


def _four_probs(probs) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    ps = tuple(to_probability(p) for p in probs)
    if len(ps) != 4:
        raise ValueError("expected four probabilities p_1..p_4")
    if sum(ps) != 1:
        raise ValueError("p_1..p_4 must sum to 1")
    return ps


def _chain2d_layer(probs, h: int, v: int, s: int) -> Fraction:
    """The inner sum over a + c == s, a in [0, h], c in [0, v]."""
    p1, p2, p3, p4 = probs
    total = ZERO
    for a in range(max(0, s - v), min(h, s) + 1):
        c = s - a
        total += binomial(h, a) * binomial(v, c) * p1**a * p2 ** (h - a) * p3**c * p4 ** (v - c)
    return total


def chain2d_point_prob(probs, point, m: int, mode=CoefficientMode.LITERAL) -> Fraction:
    """Mass at a cell off the barrier.

    Corrected mode multiplies by the C(h+v, h) ways of interleaving the
    horizontal and vertical moves and by the chance p_1 + p_3 that the move
    leaving the cell is a delayed one.
    """
    mode = CoefficientMode.parse(mode)
    probs = _four_probs(probs)
    h, v = point
    if h < 0 or v < 0:
        raise ValueError(f"coordinates must be non-negative, got {tuple(point)}")
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    layer = _chain2d_layer(probs, h, v, m)
    if mode is CoefficientMode.LITERAL:
        return layer
    return layer * binomial(h + v, h) * (probs[0] + probs[2])


def chain2d_barrier_prob(barrier: BarrierSpec, probs, point, m: int, mode=CoefficientMode.LITERAL) -> Fraction:
    """Cumulative mass on a barrier cell by time m.

    Literal mode is the plain double sum over a + c from 0 to m. Corrected
    mode counts first arrivals only: the last move must step onto the wall
    from the neighbouring free cell, since an earlier wall cell would already
    have absorbed the walker.
    """
    mode = CoefficientMode.parse(mode)
    probs = _four_probs(probs)
    if not barrier.contains(point):
        raise ValueError(f"{tuple(point)} is not a barrier cell")
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    h, v = point
    if mode is CoefficientMode.LITERAL:
        return sum((_chain2d_layer(probs, h, v, s) for s in range(m + 1)), ZERO)

    p1, p2, p3, p4 = probs
    n = barrier.size
    if h == n:
        src_h, src_v, delayed, instant = h - 1, v, p1, p2
    else:
        src_h, src_v, delayed, instant = h, v - 1, p3, p4
    paths = binomial(src_h + src_v, src_h)
    total = ZERO
    for s in range(m + 1):
        layer = _chain2d_layer(probs, src_h, src_v, s)
        if not layer:
            continue
        # instant final step lands at time s, delayed one at s + 1
        last = instant + (delayed if s + 1 <= m else ZERO)
        total += layer * last
    return total * paths


def chain2d_distribution(barrier: BarrierSpec, probs, m: int, mode=CoefficientMode.LITERAL):
    """(free-cell masses, barrier-cell masses) exactly as summed by the identity.

    Free cells are [0, N-1]^2; literal mode keeps only cells with m <= h + v,
    on both sides.
    """
    mode = CoefficientMode.parse(mode)
    n = barrier.size
    free: dict[LatticePoint, Fraction] = {}
    for h, v in product(range(n), repeat=2):
        if m <= h + v:
            free[LatticePoint(h, v)] = chain2d_point_prob(probs, (h, v), m, mode)
    wall: dict[LatticePoint, Fraction] = {}
    for pt in barrier.points():
        if mode is CoefficientMode.LITERAL and m > pt.h + pt.v:
            continue
        wall[pt] = chain2d_barrier_prob(barrier, probs, pt, m, mode)
    return free, wall


def chain2d_identity_terms(barrier: BarrierSpec, probs, m: int, mode=CoefficientMode.LITERAL) -> tuple[Fraction, Fraction]:
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    free, wall = chain2d_distribution(barrier, probs, m, mode)
    return sum(free.values(), ZERO), sum(wall.values(), ZERO)


# ---------------------------------------------------------------------------
# first-to-N coin race


def gosper_terms(params: GosperParams) -> dict[tuple[int, int], Fraction]:
    """Probability of ending at (heads, tails) for each end state of the race."""
    p, n = params.p, params.n
    q = 1 - p
    terms: dict[tuple[int, int], Fraction] = {}
    for k in range(n):
        c = binomial(n + k - 1, k)
        terms[(n, k)] = c * p**n * q**k
        terms[(k, n)] = c * q**n * p**k
    return terms


def gosper_total(params: GosperParams) -> Fraction:
    p, n = params.p, params.n
    q = 1 - p
    return sum(
        (binomial(n + k - 1, k) * (p**n * q**k + q**n * p**k) for k in range(n)), ZERO
    )
