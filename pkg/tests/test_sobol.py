import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sobolim import reference
from sobolim.diffusion import DiffusionConfig, exact_ic_spread
from sobolim.graph import complete_graph, path_graph, star_graph
from sobolim.sobol import (DegenerateVarianceError, SubsetSpreadTable, build_exact_table, build_subset_table,
                           first_order_index, full_decomposition, higher_order_index, moments,
                           subset_first_order, table_from_function, total_index)

AND = [0.0, 0.0, 0.0, 1.0]
ADDITIVE = [0.0, 2.0, 1.0, 3.0]  # Y = 2*x0 + x1
AND3 = [0.0] * 7 + [1.0]


def full_mask(m):
    return (1 << m) - 1


# --------------------------------------------------------------------------- moments and indices


def test_moments_examples():
    assert moments([0.0, 1.0]) == (0.5, 0.25)
    assert moments([2.0] * 8)[1] == 0.0
    assert moments(AND) == (0.25, 3 / 16)


def test_and_indices():
    assert first_order_index(AND, 0) == pytest.approx(1 / 3, abs=1e-15)
    assert first_order_index(AND, 1) == pytest.approx(1 / 3, abs=1e-15)
    assert total_index(AND, 0) == pytest.approx(2 / 3, abs=1e-15)
    assert subset_first_order(AND, 0b11) == pytest.approx(1.0)
    assert higher_order_index(AND, 0b11) == pytest.approx(1 / 3, abs=1e-15)


def test_and_first_order_by_exact_arithmetic():
    # (sum of deltas)^2 / (4^m var) with exact fractions
    var = Fraction(3, 16)
    assert Fraction(1) ** 2 / (4 ** 2 * var) == Fraction(1, 3)
    assert Fraction(1) / (2 ** 3 * var) == Fraction(2, 3)


def test_additive_indices():
    assert first_order_index(ADDITIVE, 0) == pytest.approx(0.8, abs=1e-15)
    assert first_order_index(ADDITIVE, 1) == pytest.approx(0.2, abs=1e-15)
    for i in range(2):
        assert total_index(ADDITIVE, i) == pytest.approx(first_order_index(ADDITIVE, i), abs=1e-15)
    assert higher_order_index(ADDITIVE, 0b11) == pytest.approx(0.0, abs=1e-12)


def test_irrelevant_variable_scores_zero():
    y = [0.0, 1.0, 0.0, 1.0]  # only x0 matters
    assert first_order_index(y, 1) == 0.0
    assert total_index(y, 1) == 0.0


def test_singleton_subset_matches_first_order():
    rng = np.random.default_rng(0)
    y = reference.random_exact_table(4, rng)
    for i in range(4):
        assert subset_first_order(y, 1 << i) == pytest.approx(first_order_index(y, i), abs=1e-12)
    assert subset_first_order(y, full_mask(4)) == pytest.approx(1.0, abs=1e-12)


def test_three_way_and_matches_oracle():
    oracle = reference.anova_oracle(AND3)
    assert higher_order_index(AND3, 0b111) == pytest.approx(oracle[(0, 1, 2)], abs=1e-12)
    for combo in ((0, 1), (0, 2), (1, 2)):
        mask = sum(1 << i for i in combo)
        assert higher_order_index(AND3, mask) == pytest.approx(oracle[combo], abs=1e-12)


def test_degenerate_variance_raises():
    for fn in (lambda y: first_order_index(y, 0), lambda y: total_index(y, 0),
               lambda y: subset_first_order(y, 1), lambda y: higher_order_index(y, 3)):
        with pytest.raises(DegenerateVarianceError):
            fn([0.0, 0.0, 0.0, 0.0])


def test_higher_order_needs_two_variables():
    with pytest.raises(ValueError):
        higher_order_index(AND, 0b01)


def test_signed_vs_absolute_differ_on_non_monotone():
    y = [0.0, 1.0, 1.0, 0.0]  # XOR
    assert first_order_index(y, 0) == pytest.approx(0.0)
    assert first_order_index(y, 0, absolute=True) > 0.0


# --------------------------------------------------------------------------- decomposition


def test_single_variable_owns_variance():
    dec = full_decomposition(SubsetSpreadTable.from_values([0.0, 3.5]), max_order=1)
    assert dec.first_order[0] == pytest.approx(1.0)
    assert dec.total[0] == pytest.approx(1.0)
    assert dec.residual == pytest.approx(0.0)


def test_and_full_decomposition():
    dec = full_decomposition(SubsetSpreadTable.from_values(AND, [10, 20]), max_order=2)
    assert dec.first_order == pytest.approx({10: 1 / 3, 20: 1 / 3})
    assert dec.higher_order == pytest.approx({(10, 20): 1 / 3})
    assert dec.total == pytest.approx({10: 2 / 3, 20: 2 / 3})
    assert dec.residual == pytest.approx(0.0, abs=1e-15)
    contrib = dec.variance_contributions()
    assert contrib["higher_order"][(10, 20)] == pytest.approx(1 / 16)
    d = dec.to_dict()
    assert d["higher_order"][0]["nodes"] == [10, 20]


def test_default_max_order_is_pairs():
    rng = np.random.default_rng(1)
    dec = full_decomposition(SubsetSpreadTable.from_values(reference.random_exact_table(4, rng)))
    assert dec.max_order == 2 and dec.residual is None
    assert len(dec.higher_order) == 6


def test_max_order_bounds():
    with pytest.raises(ValueError):
        full_decomposition(SubsetSpreadTable.from_values(AND), max_order=3)


def test_random_three_variable_table_matches_oracle():
    rng = np.random.default_rng(2)
    for _ in range(10):
        y = reference.random_exact_table(3, rng)
        dec = full_decomposition(SubsetSpreadTable.from_values(y), max_order=3)
        oracle = reference.anova_oracle(y)
        for i in range(3):
            assert dec.first_order[i] == pytest.approx(oracle[(i,)], abs=1e-9)
        for key, value in dec.higher_order.items():
            assert value == pytest.approx(oracle[key], abs=1e-9)


def test_oracle_examples():
    assert reference.anova_oracle(ADDITIVE)[(0, 1)] == pytest.approx(0.0, abs=1e-15)
    assert reference.anova_oracle(AND) == pytest.approx({(0,): 1 / 3, (1,): 1 / 3, (0, 1): 1 / 3})
    with pytest.raises(ValueError):
        reference.anova_oracle([0.0] * (1 << 11))


# --------------------------------------------------------------------------- properties on exact tables


tables = st.tuples(st.integers(1, 6), st.integers(0, 2 ** 32 - 1), st.booleans())


def draw(spec):
    m, seed, monotone = spec
    y = reference.random_exact_table(m, np.random.default_rng(seed), monotone=monotone)
    if reference._var(list(y)) < 1e-9:
        y[-1] += 1.0
    return y


@settings(max_examples=60, deadline=None)
@given(tables)
def test_closed_forms_match_definitions(spec):
    y = draw(spec)
    m = spec[0]
    oracle = reference.anova_oracle(y)
    for i in range(m):
        assert first_order_index(y, i) == pytest.approx(reference.first_order(y, i), abs=1e-9)
        assert total_index(y, i) == pytest.approx(reference.total_effect(y, i), abs=1e-9)
    for mask in range(1, 1 << m):
        group = [i for i in range(m) if mask >> i & 1]
        assert subset_first_order(y, mask) == pytest.approx(reference.closed_index(y, group), abs=1e-9)
        if len(group) >= 2:
            assert higher_order_index(y, mask) == pytest.approx(oracle[tuple(group)], abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(tables)
def test_completeness_and_total_identity(spec):
    y = draw(spec)
    m = spec[0]
    dec = full_decomposition(SubsetSpreadTable.from_values(y), max_order=m)
    assert dec.residual == pytest.approx(0.0, abs=1e-9)
    for i in range(m):
        through_i = dec.first_order[i] + sum(v for k, v in dec.higher_order.items() if i in k)
        assert dec.total[i] == pytest.approx(through_i, abs=1e-9)
        assert dec.total[i] >= dec.first_order[i] - 1e-9


@settings(max_examples=40, deadline=None)
@given(tables, st.randoms(use_true_random=False))
def test_permutation_equivariance(spec, rnd):
    y = draw(spec)
    m = spec[0]
    table = SubsetSpreadTable.from_values(y, [100 + i for i in range(m)])
    order = list(table.candidates)
    rnd.shuffle(order)
    permuted = table.restrict(order)
    a = full_decomposition(table, max_order=min(m, 3))
    b = full_decomposition(permuted, max_order=min(m, 3))
    assert a.first_order == pytest.approx(b.first_order, abs=1e-12)
    assert a.total == pytest.approx(b.total, abs=1e-12)
    for key, value in a.higher_order.items():
        assert b.higher_order[tuple(sorted(key, key=order.index))] == pytest.approx(value, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_absolute_equals_signed_on_monotone_tables(m, seed):
    y = draw((m, seed, True))
    for i in range(m):
        assert first_order_index(y, i, absolute=True) == first_order_index(y, i)


# --------------------------------------------------------------------------- tables


def test_build_table_zero_weights():
    g = complete_graph(6, 0.0)
    table = build_subset_table(g, [0, 2, 4], DiffusionConfig(rounds=10))
    assert table.mean.tolist() == [bin(mask).count("1") for mask in range(8)]
    assert not table.std.any()
    assert table.simulated_rounds == 7 * 10
    assert table.rounds[0] == 0


def test_build_table_single_candidate():
    table = build_subset_table(star_graph(3, 0.5), [0], DiffusionConfig(rounds=50))
    assert len(table.mean) == 2 and table.mean[0] == 0.0 and table.mean[1] >= 1.0


def test_build_table_cells_within_bounds():
    g = path_graph(7, 0.6)
    table = build_subset_table(g, [0, 3, 6, 2], DiffusionConfig(rounds=40, master_seed=9))
    for mask in range(1, 16):
        assert bin(mask).count("1") <= table.mean[mask] <= g.n


def test_build_table_cache_reuses_cells():
    g = path_graph(8, 0.5)
    cfg = DiffusionConfig(rounds=30, master_seed=2)
    cache = {}
    big = build_subset_table(g, [1, 4, 6], cfg, cache)
    small = build_subset_table(g, [6, 1], cfg, cache)
    assert small.simulated_rounds == 0
    fresh = build_subset_table(g, [6, 1], cfg)
    assert np.array_equal(small.mean, fresh.mean)
    assert np.array_equal(big.restrict([6, 1]).mean, fresh.mean)


def test_build_table_rejects_bad_candidates():
    g = path_graph(4)
    with pytest.raises(ValueError):
        build_subset_table(g, [], DiffusionConfig())
    with pytest.raises(ValueError):
        build_subset_table(g, [1, 1], DiffusionConfig())
    with pytest.raises(ValueError):
        SubsetSpreadTable.from_values([0.0, 1.0, 2.0])


def test_exact_table_matches_direct_spreads():
    g = star_graph(4, 0.5)
    table = build_exact_table(g, [0, 1])
    assert table.mean[1] == pytest.approx(exact_ic_spread(g, [0]))
    assert table.mean[3] == pytest.approx(exact_ic_spread(g, [0, 1]))


def test_table_from_function():
    table = table_from_function([5, 7], lambda s: float(len(s) ** 2))
    assert table.mean.tolist() == [0.0, 1.0, 1.0, 4.0]


def test_csv_round_trip():
    table = build_subset_table(path_graph(6, 0.4), [5, 0, 2], DiffusionConfig(rounds=25, master_seed=1))
    text = table.to_csv()
    assert text.splitlines()[0] == "# candidates: 5 0 2"
    assert text.splitlines()[3].startswith("100,")  # mask 1 means candidate 0 (node 5)
    back = SubsetSpreadTable.from_csv(text)
    assert back.candidates == table.candidates
    assert np.array_equal(back.mean, table.mean)
    assert np.array_equal(back.std, table.std)
    assert np.array_equal(back.rounds, table.rounds)


@pytest.mark.parametrize("text", [
    "mask,mean\n0,0\n1,1\n1,2\n",
    "mask,mean\n00,0\n1,1\n",
    "mask,mean\n00,0\n10,1\n01,1\n",
    "mask,mean\n",
])
def test_csv_rejects_malformed(text):
    with pytest.raises(ValueError):
        SubsetSpreadTable.from_csv(text)


def test_restrict_reorders():
    table = SubsetSpreadTable.from_values([0.0, 1.0, 10.0, 11.0, 100.0, 101.0, 110.0, 111.0], [7, 8, 9])
    sub = table.restrict([9, 7])
    assert sub.candidates == (9, 7)
    assert sub.mean.tolist() == [0.0, 100.0, 1.0, 101.0]
    assert table.members(0b101) == (7, 9)
    assert table.mask_of([9, 7]) == 0b101


def test_exhaustive_small_enumeration_of_masks():
    # every mask appears once and members/mask_of are inverses
    table = SubsetSpreadTable.from_values(np.arange(16.0), [3, 1, 4, 1 + 4])
    for r in range(5):
        for combo in itertools.combinations(table.candidates, r):
            assert set(table.members(table.mask_of(combo))) == set(combo)
