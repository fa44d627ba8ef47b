from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from brute import chain_by_durations, race_by_sequences, timed_walk_by_sequences, unit_walk_by_sequences
from walkident.closed_form import (
    CoefficientMode,
    DelayComposition,
    GosperParams,
    chain2d_barrier_prob,
    chain2d_identity_terms,
    chain2d_point_prob,
    chain_absorbed_cdf,
    chain_identity_terms,
    chain_position_prob,
    delay_compositions,
    enumerate_solutions,
    gosper_terms,
    gosper_total,
    multilevel_absorbed_cdf,
    multilevel_level_prob,
    multilevel_position_prob,
    simple1d_identity_total,
    simple1d_point_prob,
    walk2d_distribution,
    walk2d_identity_total,
    walk2d_point_prob,
)
from walkident.model import BarrierSpec, ChainSpec, ModelError, MoveRule, Walk2DSpec, uniform_walk

F = Fraction
HALF = F(1, 2)
QUARTER = F(1, 4)
LIT = CoefficientMode.LITERAL
COR = CoefficientMode.CORRECTED
PGRID = [F(1, 10), F(1, 4), F(1, 2), F(3, 4), F(9, 10)]


def brute_solutions(rows, targets, dims, bound):
    return [
        x
        for x in product(range(bound + 1), repeat=dims)
        if all(sum(c * xi for c, xi in zip(r, x)) == t for r, t in zip(rows, targets))
    ]


# -- enumeration ------------------------------------------------------------


def test_enumerate_examples():
    assert enumerate_solutions([[2, 1]], [2], 2, 2) == [(0, 2), (1, 0)]
    assert enumerate_solutions([[1, -1], [1, 1]], [0, 2], 2, 2) == [(1, 1)]
    four = enumerate_solutions([[1, 1, 1, 1]], [2], 4, 2)
    assert four == brute_solutions([[1, 1, 1, 1]], [2], 4, 2)
    assert len(four) == 10


def test_enumerate_unsolvable_and_negative_bound():
    assert enumerate_solutions([[2, 2]], [3], 2, 5) == []
    assert enumerate_solutions([[1]], [0], 1, -1) == []


def test_enumerate_rejects_bad_shapes():
    with pytest.raises(ValueError):
        enumerate_solutions([[1, 2]], [1], 3, 2)
    with pytest.raises(ValueError):
        enumerate_solutions([[1]], [1, 2], 1, 2)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 4).flatmap(
        lambda dims: st.tuples(
            st.just(dims),
            st.lists(st.lists(st.integers(-3, 3), min_size=dims, max_size=dims), min_size=1, max_size=3),
            st.integers(0, 3),
        )
    ),
    st.data(),
)
def test_enumerate_matches_brute_force(case, data):
    dims, rows, bound = case
    targets = data.draw(st.lists(st.integers(-6, 6), min_size=len(rows), max_size=len(rows)))
    assert enumerate_solutions(rows, targets, dims, bound) == brute_solutions(rows, targets, dims, bound)


def test_delay_compositions_respect_both_constraints():
    for levels, elapsed, cap in [(2, 4, 3), (3, 5, 2), (4, 7, 6)]:
        comps = delay_compositions(levels, elapsed, cap)
        assert comps
        for counts in comps:
            comp = DelayComposition(counts)
            assert comp.elapsed == elapsed
            assert comp.delayed <= cap
    assert DelayComposition((1, 1), pending_level=2).elapsed == 4
    assert DelayComposition((0, 0, 0), pending_level=3).elapsed == 2


# -- single-level chain -----------------------------------------------------


def test_chain_position_examples():
    half3 = ChainSpec.from_probs(3, [HALF])
    assert chain_position_prob(ChainSpec.from_probs(2, [HALF]), 1, 0) == HALF
    # (p, 1-p, p) and (1-p, p, p)
    assert chain_position_prob(ChainSpec.from_probs(4, [HALF]), 3, 1) == 2 * HALF * HALF * HALF
    assert chain_position_prob(ChainSpec.from_probs(5, [1]), 4, 3) == 1
    assert chain_position_prob(half3, 1, 1) == 0


def test_chain_position_errors():
    spec = ChainSpec.from_probs(4, [HALF])
    for k, m in [(0, 0), (4, 0), (1, -1)]:
        with pytest.raises(ValueError):
            chain_position_prob(spec, k, m)
    with pytest.raises(ModelError):
        chain_position_prob(ChainSpec.from_probs(4, [HALF, HALF]), 1, 0)


def test_chain_absorbed_examples():
    assert chain_absorbed_cdf(ChainSpec.from_probs(2, [F(1, 3)]), 0) == F(2, 3)
    towers, absorbed = chain_by_durations(3, [HALF], 1)
    assert absorbed == F(3, 4)
    assert chain_absorbed_cdf(ChainSpec.from_probs(3, [HALF]), 1) == absorbed
    for n in (2, 5, 9):
        for p in PGRID:
            assert chain_absorbed_cdf(ChainSpec.from_probs(n, [p]), n - 1) == 1
            assert chain_absorbed_cdf(ChainSpec.from_probs(n, [p]), n + 3) == 1
    with pytest.raises(ValueError):
        chain_absorbed_cdf(ChainSpec.from_probs(3, [HALF]), -1)


def test_chain_identity_terms_examples():
    assert chain_identity_terms(ChainSpec.from_probs(3, [HALF]), 1) == (F(1, 4), F(3, 4))
    a, b = chain_identity_terms(ChainSpec.from_probs(28, [F(1, 10)]), 5)
    assert a + b == 1
    for n in (2, 6, 11):
        for p in PGRID:
            a, b = chain_identity_terms(ChainSpec.from_probs(n, [p]), 0)
            assert b == (1 - p) ** (n - 1)
            assert a == 1 - (1 - p) ** (n - 1)


def test_chain_identity_holds_on_grid():
    for n in range(2, 13):
        for p in PGRID:
            spec = ChainSpec.from_probs(n, [p])
            for m in range(2 * n + 1):
                a, b = chain_identity_terms(spec, m)
                assert a + b == 1, (n, p, m)


def test_single_level_chain_matches_duration_enumeration():
    for n in range(2, 8):
        for p in [F(0), F(1, 3), F(1)]:
            spec = ChainSpec.from_probs(n, [p])
            for m in range(n + 1):
                towers, absorbed = chain_by_durations(n, [p], m)
                assert chain_absorbed_cdf(spec, m) == absorbed
                for k in range(1, n):
                    assert chain_position_prob(spec, k, m) == towers.get((k, 1), 0)


# -- multi-level towers -----------------------------------------------------


def test_two_level_examples():
    p1, p2 = F(2, 5), F(1, 3)
    spec = ChainSpec.from_probs(2, [p1, p2])
    assert multilevel_position_prob(spec, 1, 1) == p1 * p2
    assert multilevel_absorbed_cdf(spec, 1) == (1 - p1) + p1 * (1 - p2)
    for n in (3, 6):
        spec = ChainSpec.from_probs(n, [p1, p2])
        for k in range(1, n):
            assert multilevel_position_prob(spec, k, 0) == p1 * (1 - p1) ** (k - 1)


def test_three_level_absorbs_within_three_units():
    spec = ChainSpec.from_probs(2, [F(1, 3), F(1, 2), F(4, 5)])
    for m in (3, 4, 9):
        assert multilevel_absorbed_cdf(spec, m) == 1


def test_multilevel_reduces_to_single_level():
    for n in range(2, 11):
        for p in PGRID:
            spec = ChainSpec.from_probs(n, [p])
            for m in range(13):
                cdf = multilevel_absorbed_cdf(spec, m)
                assert cdf == chain_absorbed_cdf(spec, m)
                for k in range(1, n):
                    assert multilevel_position_prob(spec, k, m) == chain_position_prob(spec, k, m)


@pytest.mark.parametrize("levels", [2, 3, 4])
def test_zero_top_level_degenerates(levels):
    lower = [F(1, 3), F(3, 4), F(1, 2)][: levels - 1]
    for n in (2, 4, 6):
        full = ChainSpec.from_probs(n, lower + [F(0)])
        short = full.truncated()
        for m in range(10):
            assert multilevel_absorbed_cdf(full, m) == multilevel_absorbed_cdf(short, m)
            for k in range(1, n):
                assert multilevel_position_prob(full, k, m) == multilevel_position_prob(short, k, m)
                assert multilevel_level_prob(full, k, levels, m) == 0


def test_second_level_unreachable_matches_single_level():
    p1 = F(2, 7)
    for n in (3, 5):
        two = ChainSpec.from_probs(n, [p1, F(0)])
        one = ChainSpec.from_probs(n, [p1])
        for m in range(8):
            for k in range(1, n):
                assert multilevel_position_prob(two, k, m) == chain_position_prob(one, k, m)


@pytest.mark.parametrize("levels", [2, 3, 4])
def test_multilevel_matches_duration_enumeration(levels):
    probs_options = [[F(1, 2)] * levels, [F(1, 3), F(3, 4), F(1, 5), F(2, 3)][:levels], [F(1)] * levels]
    for probs in probs_options:
        for n in range(2, 6):
            spec = ChainSpec.from_probs(n, probs)
            for m in range(0, levels * n + 1):
                towers, absorbed = chain_by_durations(n, probs, m)
                assert multilevel_absorbed_cdf(spec, m) == absorbed
                for k in range(1, n):
                    for r in range(1, levels + 1):
                        assert multilevel_level_prob(spec, k, r, m) == towers.get((k, r), 0)


def test_multilevel_summed_range_loses_nothing():
    for probs in ([F(1, 2), F(1, 3)], [F(1, 4), F(1, 2), F(3, 4)], [F(1, 2)] * 4):
        for n in range(2, 8):
            spec = ChainSpec.from_probs(n, probs)
            for m in range(3 * n):
                first, second = chain_identity_terms(spec, m)
                assert chain_identity_terms(spec, m, full_range=True)[0] == first
                assert first + second == 1


def test_multilevel_level_errors():
    spec = ChainSpec.from_probs(3, [HALF, HALF])
    with pytest.raises(ValueError):
        multilevel_level_prob(spec, 1, 3, 0)
    with pytest.raises(ValueError):
        multilevel_absorbed_cdf(spec, -2)


# -- 2D free walk -------------------------------------------------------------


def test_walk2d_examples():
    walk = uniform_walk()
    assert walk2d_point_prob(walk, (1, 1), 2, LIT) == F(1, 16)
    brute = unit_walk_by_sequences([(1, 0, QUARTER), (-1, 0, QUARTER), (0, 1, QUARTER), (0, -1, QUARTER)], 2)
    assert brute[(1, 1)] == F(2, 16)
    assert walk2d_point_prob(walk, (1, 1), 2, COR) == brute[(1, 1)]
    for mode in (LIT, COR):
        assert walk2d_point_prob(walk, (3, 0), 2, mode) == 0
        assert walk2d_identity_total(walk, 1, mode) == 1
    assert walk2d_identity_total(walk, 2, LIT) == F(3, 4)
    assert walk2d_identity_total(walk, 2, COR) == sum(brute.values()) == 1


def test_literal_undercount_is_the_mixed_mass():
    # every mixed horizontal/vertical pair of steps is counted once instead of twice
    for probs in ([F(1, 10), F(2, 10), F(3, 10), F(4, 10)], [QUARTER] * 4):
        walk = uniform_walk(probs=probs)
        p1, p2, p3, p4 = probs
        assert 1 - walk2d_identity_total(walk, 2, LIT) == (p1 + p2) * (p3 + p4)


def test_literal_mode_rejects_other_shapes():
    spec = Walk2DSpec((MoveRule(1, 1, 1, HALF), MoveRule(-1, -1, 1, HALF)))
    with pytest.raises(ModelError):
        walk2d_point_prob(spec, (0, 0), 1, LIT)
    # corrected mode takes any timed move set
    assert walk2d_point_prob(spec, (1, 1), 1, COR) == HALF


def sampled_vectors():
    return [
        [QUARTER] * 4,
        [F(1, 10), F(2, 10), F(3, 10), F(4, 10)],
        [F(1, 2), F(1, 6), F(1, 6), F(1, 6)],
        [F(0), F(1, 3), F(1, 3), F(1, 3)],
        [F(7, 11), F(1, 11), F(2, 11), F(1, 11)],
    ]


def test_corrected_unit_walk_matches_sequences():
    for probs in sampled_vectors():
        walk = uniform_walk(probs=probs)
        moves = [(1, 0, probs[0]), (-1, 0, probs[1]), (0, 1, probs[2]), (0, -1, probs[3])]
        for m in range(0, 6):
            brute = unit_walk_by_sequences(moves, m)
            dist = walk2d_distribution(walk, m, COR)
            assert dist == brute
            assert walk2d_identity_total(walk, m, COR) == 1


def test_corrected_timed_walk_matches_sequences():
    probs = [F(1, 5), F(3, 10), F(1, 4), F(1, 4)]
    walk = uniform_walk(jumps=(2, 1, 1, 3), durations=(1, 2, 3, 1), probs=probs)
    moves = [(mv.dx, mv.dy, mv.duration, mv.prob) for mv in walk.moves]
    for m in range(7):
        assert walk2d_distribution(walk, m, COR) == timed_walk_by_sequences(moves, m)
        assert walk2d_identity_total(walk, m, COR) == 1
    assert walk2d_point_prob(walk, (2, 0), 3, COR) == timed_walk_by_sequences(moves, 3)[(2, 0)]


def test_literal_with_long_moves_drops_in_flight_mass():
    walk = uniform_walk(durations=(2, 1, 1, 1))
    assert walk2d_identity_total(walk, 1, LIT) == F(3, 4)


# -- 1D walk ------------------------------------------------------------------


def test_simple1d_examples():
    assert simple1d_point_prob(HALF, 0, 2) == HALF
    assert simple1d_point_prob(HALF, 1, 2) == 0
    # paths LL only
    assert simple1d_point_prob(F(1, 3), -2, 2) == F(2, 3) ** 2 == F(4, 9)
    assert simple1d_point_prob(HALF, 4, 2) == 0
    with pytest.raises(ValueError):
        simple1d_point_prob(HALF, 0, -1)


def test_simple1d_matches_sequences():
    for p in (F(1, 3), F(4, 5)):
        for m in range(7):
            brute = unit_walk_by_sequences([(1, 0, p), (-1, 0, 1 - p)], m)
            for k in range(-m - 1, m + 2):
                assert simple1d_point_prob(p, k, m) == brute.get((k, 0), 0)


@given(st.integers(0, 40), st.fractions(0, 1, max_denominator=50))
def test_simple1d_sums_to_one(m, p):
    assert simple1d_identity_total(p, m) == 1


# -- delayed 2D chain with barrier -------------------------------------------


P4 = (F(1, 10), F(2, 10), F(3, 10), F(4, 10))


def test_chain2d_point_examples():
    p1, p2, p3, p4 = P4
    assert chain2d_point_prob(P4, (1, 0), 0, LIT) == p2
    assert chain2d_point_prob(P4, (0, 0), 0, LIT) == 1
    assert chain2d_point_prob(P4, (0, 0), 0, COR) == p1 + p3
    # (1,1) at m=1: one delayed move among two, two orders
    assert chain2d_point_prob(P4, (1, 1), 1, LIT) == p1 * p4 + p2 * p3
    assert chain2d_point_prob(P4, (1, 1), 1, COR) == 2 * (p1 * p4 + p2 * p3) * (p1 + p3)


def test_chain2d_errors():
    with pytest.raises(ValueError):
        chain2d_point_prob(P4, (-1, 0), 0)
    with pytest.raises(ValueError):
        chain2d_point_prob((HALF, HALF, HALF, HALF), (0, 0), 0)
    with pytest.raises(ValueError):
        chain2d_barrier_prob(BarrierSpec(2), P4, (1, 1), 0)


def test_chain2d_identity_n1_m0():
    p1, p2, p3, p4 = P4
    first, second = chain2d_identity_terms(BarrierSpec(1), P4, 0, LIT)
    assert first + second == 1 + p2 + p4
    first, second = chain2d_identity_terms(BarrierSpec(1), P4, 0, COR)
    assert (first, second) == (p1 + p3, p2 + p4)


def test_chain2d_free_part_vanishes_late():
    for n in range(1, 5):
        for mode in (LIT, COR):
            first, _ = chain2d_identity_terms(BarrierSpec(n), P4, 2 * n - 1, mode)
            assert first == 0
            first, second = chain2d_identity_terms(BarrierSpec(n), P4, 2 * n + 3, mode)
            assert first == 0
    # once everything is absorbed the corrected barrier mass is all of it
    assert chain2d_identity_terms(BarrierSpec(3), P4, 20, COR)[1] == 1


def test_chain2d_corrected_totals_one():
    for n in range(1, 5):
        for probs in (P4, (QUARTER,) * 4, (HALF, 0, HALF, 0), (0, HALF, 0, HALF)):
            for m in range(2 * n + 2):
                first, second = chain2d_identity_terms(BarrierSpec(n), probs, m, COR)
                assert first + second == 1, (n, probs, m)


# -- coin race ----------------------------------------------------------------


def test_gosper_examples():
    assert gosper_total(GosperParams(F(2, 7), 1)) == 1
    assert gosper_total(GosperParams(HALF, 2)) == 1
    assert gosper_total(GosperParams(F(1, 3), 5)) == 1
    with pytest.raises(ValueError):
        GosperParams(HALF, 0)


def test_gosper_terms_match_flip_sequences():
    for n in range(1, 6):
        for p in (F(1, 3), HALF, F(6, 7), F(1), F(0)):
            terms = {s: q for s, q in gosper_terms(GosperParams(p, n)).items() if q}
            assert terms == race_by_sequences(p, n)


@given(st.integers(1, 20), st.fractions(0, 1, max_denominator=30))
@settings(max_examples=40)
def test_gosper_sums_to_one(n, p):
    assert gosper_total(GosperParams(p, n)) == 1


# -- ranges -------------------------------------------------------------------


def test_outputs_are_probabilities():
    for probs in ([F(1, 3)], [F(1, 2), F(1, 4)], [F(3, 4), F(1, 2), F(1, 5)]):
        for n in range(2, 6):
            spec = ChainSpec.from_probs(n, probs)
            for m in range(8):
                assert 0 <= multilevel_absorbed_cdf(spec, m) <= 1
                for k in range(1, n):
                    assert 0 <= multilevel_position_prob(spec, k, m) <= 1
    for pt in product(range(3), repeat=2):
        assert 0 <= chain2d_point_prob(P4, pt, 2, COR) <= 1
