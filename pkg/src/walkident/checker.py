"""Identity residuals, oracle adjudication and grid sweeps."""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from . import closed_form as cf
from .closed_form import CoefficientMode, GosperParams
from .exact_arith import format_rational, to_probability
from .model import (
    BarrierSpec,
    ChainSpec,
    LatticePoint,
    Walk2DSpec,
    barrier_walk,
    simple1d_walk,
)
from .oracle import (
    AbsorbedBarrier,
    AbsorbedTerminal,
    LatticeState,
    RaceState,
    TowerState,
    chain_snapshots,
    gosper_race_snapshot,
    label_sort_key,
    walk2d_snapshot,
)

__all__ = [
    "IdentityKind",
    "IdentityId",
    "ChainParams",
    "WalkParams",
    "Simple1DParams",
    "BarrierParams",
    "GosperParams",
    "OracleDiff",
    "IdentityReport",
    "Adjudication",
    "SweepResult",
    "check_identity",
    "state_tables",
    "adjudicate",
    "sweep",
    "chain_grid",
    "walk_grid",
    "simple1d_grid",
    "barrier_grid",
    "gosper_grid",
]

ZERO = Fraction(0)
ONE = Fraction(1)


class IdentityKind(enum.Enum):
    EQ1_CHAIN = "eq1"
    EQ2_TWO_NODE = "eq2"
    THREE_NODE = "three"
    MULTILEVEL = "multilevel"
    EQ3_WALK2D = "eq3"
    EQ4_SIMPLE1D = "eq4"
    EQ5_BARRIER2D = "eq5"
    GOSPER = "gosper"


_FIXED_LEVELS = {IdentityKind.EQ1_CHAIN: 1, IdentityKind.EQ2_TWO_NODE: 2, IdentityKind.THREE_NODE: 3}
_TWO_MODES = {IdentityKind.EQ3_WALK2D, IdentityKind.EQ5_BARRIER2D}


@dataclass(frozen=True)
class IdentityId:
    kind: IdentityKind
    levels: int | None = None

    def __post_init__(self):
        if self.kind is IdentityKind.MULTILEVEL:
            if not isinstance(self.levels, int) or self.levels < 1:
                raise ValueError("the multilevel identity needs levels >= 1")
        elif self.kind in _FIXED_LEVELS:
            object.__setattr__(self, "levels", _FIXED_LEVELS[self.kind])
        elif self.levels is not None:
            raise ValueError(f"{self.kind.value} takes no level count")

    @classmethod
    def parse(cls, text: str, levels: int | None = None) -> IdentityId:
        """``eq1``..``eq5``, ``three``, ``gosper``, ``multilevel`` (with levels) or ``multilevel:L``."""
        name, _, suffix = text.strip().lower().partition(":")
        try:
            kind = IdentityKind(name)
        except ValueError:
            known = ", ".join(k.value for k in IdentityKind)
            raise ValueError(f"unknown identity {text!r} (known: {known})") from None
        if suffix:
            levels = int(suffix)
        if kind is not IdentityKind.MULTILEVEL:
            levels = None
        return cls(kind, levels)

    @property
    def has_modes(self) -> bool:
        return self.kind in _TWO_MODES

    def __str__(self) -> str:
        if self.kind is IdentityKind.MULTILEVEL:
            return f"multilevel:{self.levels}"
        return self.kind.value


# ---------------------------------------------------------------------------
# parameter bundles


@dataclass(frozen=True)
class ChainParams:
    spec: ChainSpec
    m: int

    def to_dict(self) -> dict:
        return {"chain": self.spec.to_dict(), "m": self.m}


@dataclass(frozen=True)
class WalkParams:
    spec: Walk2DSpec
    m: int

    def to_dict(self) -> dict:
        return {"walk2d": self.spec.to_dict(), "m": self.m}


@dataclass(frozen=True)
class Simple1DParams:
    p: Fraction
    m: int

    def __post_init__(self):
        object.__setattr__(self, "p", to_probability(self.p))

    def to_dict(self) -> dict:
        return {"p": format_rational(self.p), "m": self.m}


@dataclass(frozen=True)
class BarrierParams:
    size: int
    probs: tuple[Fraction, Fraction, Fraction, Fraction]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(to_probability(p) for p in self.probs))
        if len(self.probs) != 4 or sum(self.probs) != 1:
            raise ValueError("barrier walk needs four probabilities summing to 1")
        BarrierSpec(self.size)

    @property
    def barrier(self) -> BarrierSpec:
        return BarrierSpec(self.size)

    def to_dict(self) -> dict:
        return {"n": self.size, "probs": [format_rational(p) for p in self.probs], "m": self.m}


def _params_dict(params) -> dict:
    if isinstance(params, GosperParams):
        return {"p": format_rational(params.p), "n": params.n}
    return params.to_dict()


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class OracleDiff:
    label: object
    closed_form: Fraction
    oracle: Fraction

    def to_dict(self) -> dict:
        return {
            "label": str(self.label),
            "closed_form": format_rational(self.closed_form),
            "oracle": format_rational(self.oracle),
        }


@dataclass(frozen=True)
class IdentityReport:
    identity: IdentityId
    params: object
    mode: CoefficientMode
    total: Fraction
    parts: tuple[Fraction, ...]
    oracle_diffs: tuple[OracleDiff, ...] = ()
    range_independent: bool | None = None

    @property
    def residual(self) -> Fraction:
        return 1 - self.total

    @property
    def holds(self) -> bool:
        return self.residual == 0

    @property
    def matches_oracle(self) -> bool:
        return not self.oracle_diffs

    def to_dict(self) -> dict:
        return {
            "identity": str(self.identity),
            "params": _params_dict(self.params),
            "mode": self.mode.value,
            "parts": [format_rational(q) for q in self.parts],
            "total": format_rational(self.total),
            "residual": format_rational(self.residual),
            "holds": self.holds,
            "matches_oracle": self.matches_oracle,
            "oracle_diffs": [d.to_dict() for d in self.oracle_diffs],
            "range_independent": self.range_independent,
        }


def _diffs(closed: dict, oracle: dict) -> tuple[OracleDiff, ...]:
    out = []
    for label in sorted(set(closed) | set(oracle), key=label_sort_key):
        a, b = closed.get(label, ZERO), oracle.get(label, ZERO)
        if a != b:
            out.append(OracleDiff(label, a, b))
    return tuple(out)


def _horizon(m: int) -> int:
    return (m // 16 + 1) * 16


@lru_cache(maxsize=256)
def _chain_series(spec: ChainSpec, horizon: int):
    return tuple(chain_snapshots(spec, horizon))


def _chain_oracle(spec: ChainSpec, m: int):
    return _chain_series(spec, _horizon(m))[m]


def _chain_states(identity: IdentityId, params: ChainParams):
    spec, m = params.spec, params.m
    if spec.levels != identity.levels:
        raise ValueError(f"{identity} needs a {identity.levels}-level chain, got {spec.levels} levels")
    closed: dict = {}
    if spec.levels == 1:
        for k in range(1, spec.n_states):
            closed[TowerState(k, 1)] = cf.chain_position_prob(spec, k, m)
        closed[AbsorbedTerminal()] = cf.chain_absorbed_cdf(spec, m)
    else:
        for k in range(1, spec.n_states):
            for r in range(1, spec.levels + 1):
                closed[TowerState(k, r)] = cf.multilevel_level_prob(spec, k, r, m)
        closed[AbsorbedTerminal()] = cf.multilevel_absorbed_cdf(spec, m)
    return closed, _chain_oracle(spec, m)


def _walk_states(params: WalkParams, mode):
    dist = cf.walk2d_distribution(params.spec, params.m, mode)
    return {LatticeState(pt): q for pt, q in dist.items()}, walk2d_snapshot(params.spec, params.m)


def _simple1d_states(params: Simple1DParams):
    p, m = params.p, params.m
    closed = {
        LatticeState(LatticePoint(k, 0)): cf.simple1d_point_prob(p, k, m) for k in range(-m, m + 1)
    }
    return closed, walk2d_snapshot(simple1d_walk(p), m)


def _barrier_states(params: BarrierParams, mode):
    free, wall = cf.chain2d_distribution(params.barrier, params.probs, params.m, mode)
    closed: dict = {LatticeState(pt): q for pt, q in free.items()}
    closed.update({AbsorbedBarrier(pt): q for pt, q in wall.items()})
    return closed, walk2d_snapshot(barrier_walk(params.size, params.probs), params.m)


def _gosper_states(params: GosperParams):
    closed = {RaceState(h, t): q for (h, t), q in cf.gosper_terms(params).items()}
    return closed, gosper_race_snapshot(params.p, params.n, 2 * params.n - 1)


def state_tables(identity, params, mode=CoefficientMode.LITERAL):
    """Closed-form value per oracle state label, and the oracle snapshot itself.

    Closed-form labels cover exactly the terms the identity sums; labels
    present only in the snapshot count as closed-form zero.
    """
    if isinstance(identity, str):
        identity = IdentityId.parse(identity)
    mode = CoefficientMode.parse(mode)
    _check_params(identity, params)
    kind = identity.kind
    if kind in _FIXED_LEVELS or kind is IdentityKind.MULTILEVEL:
        return _chain_states(identity, params)
    if kind is IdentityKind.EQ3_WALK2D:
        return _walk_states(params, mode)
    if kind is IdentityKind.EQ4_SIMPLE1D:
        return _simple1d_states(params)
    if kind is IdentityKind.EQ5_BARRIER2D:
        return _barrier_states(params, mode)
    return _gosper_states(params)


def _identity_parts(identity: IdentityId, params, mode) -> tuple[Fraction, ...]:
    kind = identity.kind
    if kind in _FIXED_LEVELS or kind is IdentityKind.MULTILEVEL:
        return cf.chain_identity_terms(params.spec, params.m)
    if kind is IdentityKind.EQ3_WALK2D:
        return (cf.walk2d_identity_total(params.spec, params.m, mode),)
    if kind is IdentityKind.EQ4_SIMPLE1D:
        return (cf.simple1d_identity_total(params.p, params.m),)
    if kind is IdentityKind.EQ5_BARRIER2D:
        return cf.chain2d_identity_terms(params.barrier, params.probs, params.m, mode)
    return (cf.gosper_total(params),)


_PARAM_TYPES = {
    IdentityKind.EQ1_CHAIN: ChainParams,
    IdentityKind.EQ2_TWO_NODE: ChainParams,
    IdentityKind.THREE_NODE: ChainParams,
    IdentityKind.MULTILEVEL: ChainParams,
    IdentityKind.EQ3_WALK2D: WalkParams,
    IdentityKind.EQ4_SIMPLE1D: Simple1DParams,
    IdentityKind.EQ5_BARRIER2D: BarrierParams,
    IdentityKind.GOSPER: GosperParams,
}


def _check_params(identity: IdentityId, params) -> None:
    expected = _PARAM_TYPES[identity.kind]
    if not isinstance(params, expected):
        raise TypeError(f"{identity} takes {expected.__name__}, got {type(params).__name__}")
    if getattr(params, "m", 0) < 0:
        raise ValueError(f"time m must be >= 0, got {params.m}")


def check_identity(identity, params, mode=CoefficientMode.LITERAL) -> IdentityReport:
    """Evaluate one identity instance and compare it with the oracle state by state.

    ``mode`` only matters for eq3 and eq5; the other identities have a single
    coefficient convention and always report ``literal``.
    """
    if isinstance(identity, str):
        identity = IdentityId.parse(identity)
    mode = CoefficientMode.parse(mode) if identity.has_modes else CoefficientMode.LITERAL
    closed, snap = state_tables(identity, params, mode)
    parts = tuple(_identity_parts(identity, params, mode))
    range_independent = None
    if isinstance(params, ChainParams):
        # every position, not just the summed range starting at 1 + floor(m / L)
        full_first = sum((q for lab, q in closed.items() if isinstance(lab, TowerState)), ZERO)
        range_independent = full_first == parts[0]
    oracle = {**snap.mass, **snap.absorbed_mass}
    return IdentityReport(
        identity, params, mode, sum(parts, ZERO), parts, _diffs(closed, oracle), range_independent
    )


@dataclass(frozen=True)
class Adjudication:
    literal: IdentityReport
    corrected: IdentityReport | None

    @property
    def verdict(self) -> str:
        """Which coefficient convention reproduces the oracle: literal, corrected, both or neither."""
        lit = self.literal.matches_oracle
        if self.corrected is None:
            return "literal" if lit else "neither"
        cor = self.corrected.matches_oracle
        return {(True, True): "both", (True, False): "literal", (False, True): "corrected"}.get(
            (lit, cor), "neither"
        )

    def to_dict(self) -> dict:
        return {
            "literal": self.literal.to_dict(),
            "corrected": self.corrected.to_dict() if self.corrected else None,
            "verdict": self.verdict,
        }


def adjudicate(identity, params) -> Adjudication:
    if isinstance(identity, str):
        identity = IdentityId.parse(identity)
    literal = check_identity(identity, params, CoefficientMode.LITERAL)
    corrected = (
        check_identity(identity, params, CoefficientMode.CORRECTED) if identity.has_modes else None
    )
    return Adjudication(literal, corrected)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepResult:
    identity: IdentityId
    mode: CoefficientMode
    reports: tuple[IdentityReport, ...] = field(repr=False)

    @property
    def holds(self) -> int:
        return sum(r.holds for r in self.reports)

    @property
    def fails(self) -> int:
        return len(self.reports) - self.holds

    @property
    def oracle_mismatches(self) -> int:
        return sum(not r.matches_oracle for r in self.reports)

    @property
    def first_failure(self) -> IdentityReport | None:
        """Earliest failing point in grid order: the reported minimal counterexample."""
        return next((r for r in self.reports if not r.holds), None)

    def to_dict(self) -> dict:
        first = self.first_failure
        return {
            "identity": str(self.identity),
            "mode": self.mode.value,
            "points": len(self.reports),
            "holds": self.holds,
            "fails": self.fails,
            "oracle_mismatches": self.oracle_mismatches,
            "first_failure": first.to_dict() if first else None,
            "reports": [r.to_dict() for r in self.reports],
        }


def _check_star(args):
    return check_identity(*args)


def sweep(identity, grid, mode=CoefficientMode.LITERAL, workers: int = 1) -> SweepResult:
    """Check every grid point; the report order is the grid order regardless of ``workers``."""
    if isinstance(identity, str):
        identity = IdentityId.parse(identity)
    mode = CoefficientMode.parse(mode)
    points = list(grid)
    if not points:
        raise ValueError("empty parameter grid")
    jobs = [(identity, p, mode) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = tuple(pool.map(_check_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        reports = tuple(_check_star(j) for j in jobs)
    return SweepResult(identity, mode, reports)


def _ms(ms, n):
    return ms(n) if callable(ms) else ms


def chain_grid(ns, prob_vectors, ms):
    """ChainParams over N x probability vectors x m; ``ms`` may be a function of N."""
    for n, probs in itertools.product(ns, prob_vectors):
        spec = ChainSpec.from_probs(n, probs)
        for m in _ms(ms, n):
            yield ChainParams(spec, m)


def walk_grid(specs, ms):
    for spec in specs:
        for m in ms:
            yield WalkParams(spec, m)


def simple1d_grid(ps, ms):
    for p in ps:
        for m in ms:
            yield Simple1DParams(p, m)


def barrier_grid(sizes, prob_vectors, ms):
    for n, probs in itertools.product(sizes, prob_vectors):
        for m in _ms(ms, n):
            yield BarrierParams(n, tuple(probs), m)


def gosper_grid(ns, ps):
    for n in ns:
        for p in ps:
            yield GosperParams(p, n)
