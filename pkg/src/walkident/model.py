"""Declarative walk models: delay-tower chains and lattice walks.

All specs are frozen dataclasses that coerce their probabilities to exact
rationals and validate themselves on construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

from .exact_arith import format_rational, to_probability as _to_probability

__all__ = [
    "ModelError",
    "ChainSpec",
    "MoveRule",
    "BarrierSpec",
    "LatticePoint",
    "Walk2DSpec",
    "validate_chain",
    "validate_walk",
    "barrier_contains",
    "uniform_walk",
    "simple1d_walk",
    "barrier_walk",
    "delayed_line_walk",
    "load_model",
    "model_from_dict",
]


class ModelError(ValueError):
    """A model violates one of its structural invariants."""


def to_probability(value) -> Fraction:
    try:
        return _to_probability(value)
    except (TypeError, ValueError) as exc:
        raise ModelError(str(exc)) from None


class LatticePoint(NamedTuple):
    h: int
    v: int

    def __str__(self) -> str:
        return f"({self.h},{self.v})"


@dataclass(frozen=True)
class ChainSpec:
    """N chain states c_1..c_N with an L-level delay tower on every transition.

    ``level_probs[r - 1]`` is the probability of climbing into level r; the
    complement of ``level_probs[0]`` is the instantaneous hop to the next
    c-state. c_N absorbs.
    """

    n_states: int
    levels: int
    level_probs: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "level_probs", tuple(to_probability(p) for p in self.level_probs))
        validate_chain(self)
        # specs key the evaluator caches; hashing Fractions on every lookup is costly
        object.__setattr__(self, "_hash", hash((self.n_states, self.levels, self.level_probs)))

    def __hash__(self) -> int:
        return self._hash

    @classmethod
    def from_probs(cls, n_states: int, probs) -> ChainSpec:
        probs = tuple(probs)
        return cls(n_states, len(probs), probs)

    @property
    def p(self) -> Fraction:
        """Single-level shorthand."""
        return self.level_probs[0]

    def truncated(self) -> ChainSpec:
        """The same chain with the top tower level removed."""
        if self.levels == 1:
            raise ModelError("cannot truncate a single-level chain")
        return ChainSpec(self.n_states, self.levels - 1, self.level_probs[:-1])

    def to_dict(self) -> dict:
        return {"n": self.n_states, "probs": [format_rational(p) for p in self.level_probs]}


def validate_chain(spec: ChainSpec) -> ChainSpec:
    if not isinstance(spec.n_states, int) or spec.n_states < 2:
        raise ModelError(f"n_states < 2 (got {spec.n_states})")
    if not isinstance(spec.levels, int) or spec.levels < 1:
        raise ModelError(f"levels < 1 (got {spec.levels})")
    if len(spec.level_probs) != spec.levels:
        raise ModelError(
            f"length mismatch: {len(spec.level_probs)} level probabilities for {spec.levels} levels"
        )
    for r, p in enumerate(spec.level_probs, start=1):
        if not 0 <= p <= 1:
            raise ModelError(f"level {r} probability {p} outside [0, 1]")
    return spec


@dataclass(frozen=True)
class MoveRule:
    dx: int
    dy: int
    duration: int
    prob: Fraction

    def __post_init__(self):
        object.__setattr__(self, "prob", to_probability(self.prob))
        if self.duration < 0:
            raise ModelError(f"move duration must be >= 0, got {self.duration}")

    @property
    def displacement(self) -> tuple[int, int]:
        return (self.dx, self.dy)

    def to_dict(self) -> dict:
        return {"dx": self.dx, "dy": self.dy, "t": self.duration, "p": format_rational(self.prob)}


@dataclass(frozen=True)
class BarrierSpec:
    """The absorbing L-shaped wall {(N, v): 0 <= v < N} U {(h, N): 0 <= h < N}."""

    size: int

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 1:
            raise ModelError(f"barrier size must be >= 1, got {self.size}")

    def contains(self, point) -> bool:
        h, v = point
        n = self.size
        return (h == n and 0 <= v <= n - 1) or (v == n and 0 <= h <= n - 1)

    def points(self) -> list[LatticePoint]:
        """Barrier cells in lexicographic order."""
        n = self.size
        cells = [LatticePoint(n, v) for v in range(n)] + [LatticePoint(h, n) for h in range(n)]
        return sorted(cells)

    def escaped(self, point) -> bool:
        # monotone moves from here can never land on a barrier cell
        h, v = point
        n = self.size
        return h > n or v > n or (h == n and v == n)


def barrier_contains(barrier: BarrierSpec, point) -> bool:
    return barrier.contains(point)


@dataclass(frozen=True)
class Walk2DSpec:
    moves: tuple[MoveRule, ...]
    barrier: BarrierSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "moves", tuple(self.moves))
        validate_walk(self)

    @property
    def probs(self) -> tuple[Fraction, ...]:
        return tuple(mv.prob for mv in self.moves)

    @property
    def has_instant_moves(self) -> bool:
        return any(mv.duration == 0 for mv in self.moves)

    def to_dict(self) -> dict:
        return {
            "moves": [mv.to_dict() for mv in self.moves],
            "barrier": self.barrier.size if self.barrier else None,
        }


def validate_walk(spec: Walk2DSpec) -> Walk2DSpec:
    if not spec.moves:
        raise ModelError("walk needs at least one move")
    total = sum((mv.prob for mv in spec.moves), Fraction(0))
    if total != 1:
        raise ModelError(f"move probabilities sum to {format_rational(total)}, not 1")
    for i, mv in enumerate(spec.moves):
        if mv.duration != 0:
            continue
        if spec.barrier is None:
            raise ModelError(f"move {i} is instantaneous but the walk has no barrier")
        if mv.dx < 0 or mv.dy < 0 or (mv.dx == 0 and mv.dy == 0):
            raise ModelError(
                f"instantaneous move {i} must have non-negative components, one positive"
            )
    return spec


def uniform_walk(jumps=(1, 1, 1, 1), durations=(1, 1, 1, 1), probs=None) -> Walk2DSpec:
    """Right/left/up/down walk; ``jumps`` are magnitudes, signs are applied here."""
    if probs is None:
        probs = (Fraction(1, 4),) * 4
    j1, j2, j3, j4 = jumps
    dirs = ((j1, 0), (-j2, 0), (0, j3), (0, -j4))
    return Walk2DSpec(
        tuple(MoveRule(dx, dy, t, p) for (dx, dy), t, p in zip(dirs, durations, probs))
    )


def simple1d_walk(p) -> Walk2DSpec:
    p = to_probability(p)
    return Walk2DSpec((MoveRule(1, 0, 1, p), MoveRule(-1, 0, 1, 1 - p)))


def barrier_walk(size: int, probs) -> Walk2DSpec:
    """Delayed/instant right and up moves with probabilities p_1..p_4 under an N-barrier."""
    p1, p2, p3, p4 = probs
    return Walk2DSpec(
        (MoveRule(1, 0, 1, p1), MoveRule(1, 0, 0, p2), MoveRule(0, 1, 1, p3), MoveRule(0, 1, 0, p4)),
        BarrierSpec(size),
    )


def delayed_line_walk(n_states: int, p) -> Walk2DSpec:
    """Single-level chain recast as a rightward lattice walk absorbed at h = N - 1."""
    p = to_probability(p)
    return Walk2DSpec((MoveRule(1, 0, 1, p), MoveRule(1, 0, 0, 1 - p)), BarrierSpec(n_states - 1))


def model_from_dict(data: dict) -> ChainSpec | Walk2DSpec:
    if not isinstance(data, dict) or len(data) != 1:
        raise ModelError('model must have exactly one top-level key, "chain" or "walk2d"')
    if "chain" in data:
        body = data["chain"]
        try:
            return ChainSpec.from_probs(body["n"], body["probs"])
        except (KeyError, TypeError) as exc:
            raise ModelError(f"bad chain model: {exc}") from None
    if "walk2d" in data:
        body = data["walk2d"]
        try:
            moves = tuple(
                MoveRule(int(mv["dx"]), int(mv["dy"]), int(mv["t"]), mv["p"]) for mv in body["moves"]
            )
            barrier = body.get("barrier")
        except (KeyError, TypeError) as exc:
            raise ModelError(f"bad walk2d model: {exc}") from None
        return Walk2DSpec(moves, BarrierSpec(barrier) if barrier is not None else None)
    raise ModelError(f"unknown model kind {next(iter(data))!r}")


def load_model(path) -> ChainSpec | Walk2DSpec:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
