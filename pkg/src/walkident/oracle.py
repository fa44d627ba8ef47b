"""Ground truth by direct simulation of the stochastic process.

Three independent routes: exact distribution stepping in rational
arithmetic, exhaustive trajectory enumeration, and seeded Monte Carlo.
None of them touches the closed forms.

Time convention: the snapshot at time m is taken after every move due at
tick m has landed and every instantaneous transition has been resolved.
A walker on the lattice rests on the cell it left until its move lands.
"""

from __future__ import annotations

import heapq
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .exact_arith import format_rational
from .model import ChainSpec, LatticePoint, ModelError, Walk2DSpec

__all__ = [
    "TowerState",
    "LatticeState",
    "AbsorbedTerminal",
    "AbsorbedBarrier",
    "RaceState",
    "Snapshot",
    "Step",
    "Trajectory",
    "MCEstimate",
    "TrajectoryCapExceeded",
    "chain_snapshot",
    "chain_snapshots",
    "walk2d_snapshot",
    "walk2d_snapshots",
    "gosper_race_snapshot",
    "enumerate_trajectories",
    "aggregate_trajectories",
    "mc_estimate",
    "label_sort_key",
]

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class TowerState:
    position: int
    level: int

    def __str__(self) -> str:
        return f"tower({self.position},{self.level})"


@dataclass(frozen=True)
class LatticeState:
    point: LatticePoint
    pending: int | None = None

    def __str__(self) -> str:
        h, v = self.point
        if self.pending is None:
            return f"lattice({h},{v})"
        return f"lattice({h},{v};move{self.pending})"


@dataclass(frozen=True)
class AbsorbedTerminal:
    def __str__(self) -> str:
        return "terminal"


@dataclass(frozen=True)
class AbsorbedBarrier:
    point: LatticePoint

    def __str__(self) -> str:
        return f"barrier({self.point.h},{self.point.v})"


@dataclass(frozen=True)
class RaceState:
    heads: int
    tails: int

    def __str__(self) -> str:
        return f"race({self.heads},{self.tails})"


_LABEL_ORDER = {TowerState: 0, LatticeState: 1, RaceState: 2, AbsorbedBarrier: 3, AbsorbedTerminal: 4}


def label_sort_key(label):
    kind = _LABEL_ORDER[type(label)]
    if isinstance(label, TowerState):
        return (kind, label.position, label.level)
    if isinstance(label, LatticeState):
        pending = -1 if label.pending is None else label.pending
        return (kind, label.point.h, label.point.v, pending)
    if isinstance(label, RaceState):
        return (kind, label.heads, label.tails)
    if isinstance(label, AbsorbedBarrier):
        return (kind, label.point.h, label.point.v)
    return (kind,)


def _sorted_nonzero(masses) -> dict:
    return {lab: q for lab, q in sorted(masses.items(), key=lambda kv: label_sort_key(kv[0])) if q}


@dataclass(frozen=True)
class Snapshot:
    """Exact occupancy at one time. ``mass`` holds live states, ``absorbed_mass`` absorbing ones."""

    time: int
    mass: dict = field(default_factory=dict)
    absorbed_mass: dict = field(default_factory=dict)

    @property
    def absorbed(self) -> Fraction:
        return sum(self.absorbed_mass.values(), ZERO)

    @property
    def total(self) -> Fraction:
        return sum(self.mass.values(), ZERO) + self.absorbed

    def get(self, label) -> Fraction:
        if label in self.mass:
            return self.mass[label]
        return self.absorbed_mass.get(label, ZERO)

    def to_dict(self) -> dict:
        return {
            "m": self.time,
            "states": [{"label": str(k), "mass": format_rational(q)} for k, q in self.mass.items()],
            "absorbed_states": [
                {"label": str(k), "mass": format_rational(q)} for k, q in self.absorbed_mass.items()
            ],
            "absorbed": format_rational(self.absorbed),
        }


# ---------------------------------------------------------------------------
# chain with delay towers


def _chain_close(spec: ChainSpec, arrivals: dict[int, Fraction], towers, absorbed: list) -> None:
    """Resolve instantaneous hops: mass arriving on c_i either climbs into tower i or moves on."""
    p1 = spec.level_probs[0]
    carry = ZERO
    for i in range(1, spec.n_states + 1):
        q = arrivals.get(i, ZERO) + carry
        carry = ZERO
        if not q:
            continue
        if i == spec.n_states:
            absorbed[0] += q
            continue
        if p1:
            towers[(i, 1)] += q * p1
        if p1 != 1:
            carry = q * (1 - p1)


def _chain_snapshot_of(spec, t, towers, absorbed) -> Snapshot:
    return Snapshot(
        t,
        _sorted_nonzero({TowerState(k, r): q for (k, r), q in towers.items()}),
        {AbsorbedTerminal(): absorbed} if absorbed else {},
    )


def chain_snapshots(spec: ChainSpec, m_max: int) -> list[Snapshot]:
    """Snapshots for every time 0..m_max from one stepping pass."""
    if m_max < 0:
        raise ValueError(f"time m must be >= 0, got {m_max}")
    levels = spec.levels
    towers: dict = defaultdict(Fraction)
    absorbed = [ZERO]
    _chain_close(spec, {1: ONE}, towers, absorbed)
    out = [_chain_snapshot_of(spec, 0, towers, absorbed[0])]
    for t in range(1, m_max + 1):
        nxt: dict = defaultdict(Fraction)
        arrivals: dict[int, Fraction] = defaultdict(Fraction)
        for (k, r), q in towers.items():
            if not q:
                continue
            climb = spec.level_probs[r] if r < levels else ZERO
            if climb:
                nxt[(k, r + 1)] += q * climb
            if climb != 1:
                arrivals[k + 1] += q * (1 - climb)
        _chain_close(spec, arrivals, nxt, absorbed)
        towers = nxt
        out.append(_chain_snapshot_of(spec, t, towers, absorbed[0]))
    return out


def chain_snapshot(spec: ChainSpec, m: int) -> Snapshot:
    return chain_snapshots(spec, m)[-1]


# ---------------------------------------------------------------------------
# lattice walks


def _walk_close(spec: Walk2DSpec, arrivals: dict, in_flight: dict, wall: dict, t: int) -> None:
    """Start the next move for every walker that just landed.

    Instantaneous moves strictly increase h + v, so processing landing cells
    in increasing h + v settles the closure in one sweep.
    """
    barrier = spec.barrier
    heap = [(pt[0] + pt[1], pt) for pt in arrivals]
    heapq.heapify(heap)
    pending = dict(arrivals)
    while heap:
        _, pt = heapq.heappop(heap)
        q = pending.pop(pt, ZERO)
        if not q:
            continue
        if barrier is not None and barrier.contains(pt):
            wall[pt] = wall.get(pt, ZERO) + q
            continue
        for i, mv in enumerate(spec.moves):
            if not mv.prob:
                continue
            share = q * mv.prob
            if mv.duration == 0:
                if barrier.escaped(pt):
                    raise ModelError(f"instantaneous moves from {pt} never reach the barrier")
                dest = LatticePoint(pt[0] + mv.dx, pt[1] + mv.dy)
                if dest not in pending:
                    heapq.heappush(heap, (dest[0] + dest[1], dest))
                    pending[dest] = ZERO
                pending[dest] += share
            else:
                key = (pt, i, t + mv.duration)
                in_flight[key] = in_flight.get(key, ZERO) + share


def _walk_snapshot_of(spec, t, in_flight, wall, by_move: bool) -> Snapshot:
    live: dict = defaultdict(Fraction)
    for (pt, i, _), q in in_flight.items():
        live[LatticeState(pt, i if by_move else None)] += q
    return Snapshot(
        t,
        _sorted_nonzero(live),
        _sorted_nonzero({AbsorbedBarrier(pt): q for pt, q in wall.items()}),
    )


def walk2d_snapshots(spec: Walk2DSpec, m_max: int, by_move: bool = False) -> list[Snapshot]:
    """Snapshots for times 0..m_max. Live labels are cells, or (cell, move) with ``by_move``."""
    if m_max < 0:
        raise ValueError(f"time m must be >= 0, got {m_max}")
    if spec.has_instant_moves and spec.barrier is None:
        raise ModelError("instantaneous moves need a barrier")
    in_flight: dict = {}  # (source cell, move index, landing tick) -> mass
    wall: dict = {}
    _walk_close(spec, {LatticePoint(0, 0): ONE}, in_flight, wall, 0)
    out = [_walk_snapshot_of(spec, 0, in_flight, wall, by_move)]
    for t in range(1, m_max + 1):
        arrivals: dict = defaultdict(Fraction)
        still: dict = {}
        for (pt, i, due), q in in_flight.items():
            if due == t:
                mv = spec.moves[i]
                arrivals[LatticePoint(pt[0] + mv.dx, pt[1] + mv.dy)] += q
            else:
                still[(pt, i, due)] = q
        in_flight = still
        _walk_close(spec, dict(arrivals), in_flight, wall, t)
        out.append(_walk_snapshot_of(spec, t, in_flight, wall, by_move))
    return out


def walk2d_snapshot(spec: Walk2DSpec, m: int, by_move: bool = False) -> Snapshot:
    return walk2d_snapshots(spec, m, by_move)[-1]


# ---------------------------------------------------------------------------
# coin race


def gosper_race_snapshot(p, n: int, max_flips: int) -> Snapshot:
    """Flip until one side has come up n times, or until ``max_flips`` flips."""
    p = Fraction(p)
    if n < 1:
        raise ValueError(f"race length must be >= 1, got {n}")
    if max_flips < 0:
        raise ValueError("max_flips must be >= 0")
    live = {(0, 0): ONE}
    done: dict = {}
    for _ in range(max_flips):
        nxt: dict = defaultdict(Fraction)
        for (hd, tl), q in live.items():
            for state, w in (((hd + 1, tl), p), ((hd, tl + 1), 1 - p)):
                if not w:
                    continue
                if state[0] == n or state[1] == n:
                    done[state] = done.get(state, ZERO) + q * w
                else:
                    nxt[state] += q * w
        live = nxt
        if not live:
            break
    return Snapshot(
        max_flips,
        _sorted_nonzero({RaceState(*s): q for s, q in live.items()}),
        _sorted_nonzero({RaceState(*s): q for s, q in done.items()}),
    )


# ---------------------------------------------------------------------------
# trajectory enumeration


@dataclass(frozen=True)
class Step:
    choice: str
    prob: Fraction
    duration: int


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    end_state: object

    @property
    def total_time(self) -> int:
        return sum(s.duration for s in self.steps)

    @property
    def probability(self) -> Fraction:
        out = ONE
        for s in self.steps:
            out *= s.prob
        return out


class TrajectoryCapExceeded(RuntimeError):
    pass


def _chain_trajectories(spec: ChainSpec, m: int, cap: int) -> list[Trajectory]:
    # A tower step is charged its one time unit when the walker leaves the level.
    out: list[Trajectory] = []
    levels = spec.level_probs

    def emit(steps, end):
        if len(out) >= cap:
            raise TrajectoryCapExceeded(f"more than {cap} trajectories")
        out.append(Trajectory(tuple(steps), end))

    def at_node(i, t, steps):
        if i == spec.n_states:
            emit(steps, AbsorbedTerminal())
            return
        p1 = levels[0]
        if p1:
            in_tower(i, 1, t, steps + [Step(f"climb c{i}->1", p1, 0)])
        if p1 != 1:
            at_node(i + 1, t, steps + [Step(f"skip c{i}->c{i + 1}", 1 - p1, 0)])

    def in_tower(i, r, t, steps):
        if t == m:
            emit(steps, TowerState(i, r))
            return
        climb = levels[r] if r < len(levels) else ZERO
        if climb:
            in_tower(i, r + 1, t + 1, steps + [Step(f"climb {r}->{r + 1}", climb, 1)])
        if climb != 1:
            at_node(i + 1, t + 1, steps + [Step(f"exit {r}->c{i + 1}", 1 - climb, 1)])

    at_node(1, 0, [])
    return out


def _walk_trajectories(spec: Walk2DSpec, m: int, cap: int) -> list[Trajectory]:
    # The move still in flight at time m is folded into one closing step whose
    # probability is the total weight of moves that cannot land by m.
    out: list[Trajectory] = []
    barrier = spec.barrier

    def emit(steps, end):
        if len(out) >= cap:
            raise TrajectoryCapExceeded(f"more than {cap} trajectories")
        out.append(Trajectory(tuple(steps), end))

    def at_cell(pt, t, steps):
        if barrier is not None and barrier.contains(pt):
            emit(steps, AbsorbedBarrier(pt))
            return
        resting = ZERO
        for i, mv in enumerate(spec.moves):
            if not mv.prob:
                continue
            if mv.duration == 0 and barrier.escaped(pt):
                raise ModelError(f"instantaneous moves from {pt} never reach the barrier")
            if t + mv.duration > m:
                resting += mv.prob
                continue
            dest = LatticePoint(pt[0] + mv.dx, pt[1] + mv.dy)
            at_cell(dest, t + mv.duration, steps + [Step(f"move{i}", mv.prob, mv.duration)])
        if resting:
            emit(steps + [Step("in flight", resting, 0)], LatticeState(pt))

    at_cell(LatticePoint(0, 0), 0, [])
    return out


def enumerate_trajectories(spec, m: int, cap: int = 100_000) -> list[Trajectory]:
    """Every positive-probability history observable at time m, in depth-first order."""
    if m < 0:
        raise ValueError(f"time m must be >= 0, got {m}")
    if isinstance(spec, ChainSpec):
        return _chain_trajectories(spec, m, cap)
    if isinstance(spec, Walk2DSpec):
        if spec.has_instant_moves and spec.barrier is None:
            raise ModelError("instantaneous moves need a barrier")
        return _walk_trajectories(spec, m, cap)
    raise TypeError(f"unsupported model {type(spec).__name__}")


def aggregate_trajectories(trajectories, m: int) -> Snapshot:
    live: dict = defaultdict(Fraction)
    dead: dict = defaultdict(Fraction)
    for tr in trajectories:
        target = dead if isinstance(tr.end_state, (AbsorbedTerminal, AbsorbedBarrier)) else live
        target[tr.end_state] += tr.probability
    return Snapshot(m, _sorted_nonzero(live), _sorted_nonzero(dead))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MCEstimate:
    time: int
    samples: int
    freq: dict

    def get(self, label) -> float:
        return self.freq.get(label, 0.0)

    @property
    def absorbed(self) -> float:
        return sum(f for lab, f in self.freq.items() if isinstance(lab, (AbsorbedTerminal, AbsorbedBarrier)))


def _pick(rng: random.Random, weights) -> int:
    u = rng.random()
    acc = 0.0
    last = 0
    for i, w in enumerate(weights):
        if w <= 0:
            continue
        last = i
        acc += w
        if u < acc:
            return i
    return last


def _sample_chain(spec: ChainSpec, m: int, rng: random.Random):
    probs = [float(p) for p in spec.level_probs]
    i, t = 1, 0
    while True:
        if i == spec.n_states:
            return AbsorbedTerminal()
        if probs[0] < 1 and rng.random() >= probs[0]:
            i += 1
            continue
        r = 1
        while True:
            if t == m:
                return TowerState(i, r)
            t += 1
            climb = probs[r] if r < spec.levels else 0.0
            if climb > 0 and rng.random() < climb:
                r += 1
            else:
                break
        i += 1


def _sample_walk(spec: Walk2DSpec, m: int, rng: random.Random):
    weights = [float(mv.prob) for mv in spec.moves]
    barrier = spec.barrier
    pt, t = LatticePoint(0, 0), 0
    while True:
        if barrier is not None and barrier.contains(pt):
            return AbsorbedBarrier(pt)
        mv = spec.moves[_pick(rng, weights)]
        if t + mv.duration > m:
            return LatticeState(pt)
        t += mv.duration
        pt = LatticePoint(pt[0] + mv.dx, pt[1] + mv.dy)


def mc_estimate(spec, m: int, samples: int, seed: int) -> MCEstimate:
    """Empirical label frequencies over ``samples`` seeded runs."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if isinstance(spec, ChainSpec):
        sampler = _sample_chain
    elif isinstance(spec, Walk2DSpec):
        sampler = _sample_walk
    else:
        raise TypeError(f"unsupported model {type(spec).__name__}")
    rng = random.Random(seed)
    counts: dict = defaultdict(int)
    for _ in range(samples):
        counts[sampler(spec, m, rng)] += 1
    freq = {lab: c / samples for lab, c in sorted(counts.items(), key=lambda kv: label_sort_key(kv[0]))}
    return MCEstimate(m, samples, freq)
