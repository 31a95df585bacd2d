import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costfl.errors import ConfigError, SelectionError
from costfl.selection import (
    ClientStats,
    SelectionConfig,
    exploration_slots,
    select,
    select_lowest_cost,
    select_random,
    select_utility,
    select_utility_cost,
    utility,
    utility_per_cost,
)


def test_utility_examples():
    assert utility([1, 1, 1, 1], 4) == 4.0
    assert utility([3, 4], 2) == pytest.approx(2 * math.sqrt(12.5), rel=1e-12)
    assert utility([0, 0], 2) == 0.0
    assert utility_per_cost([3, 4], 2, 369.74) == pytest.approx(0.019124, abs=5e-7)


def test_utility_homogeneous():
    assert utility_per_cost([0.6, 0.8], 2, 3.0) * 2 == pytest.approx(utility_per_cost([1.2, 1.6], 2, 3.0))


@pytest.mark.parametrize("losses,n", [([], 0), ([1.0], 2), ([-1.0], 1), ([float("nan")], 1)])
def test_utility_rejects_bad_input(losses, n):
    with pytest.raises(ValueError):
        utility(losses, n)


def test_utility_per_cost_rejects_zero_cost():
    with pytest.raises(ValueError):
        utility_per_cost([1.0], 1, 0.0)


def _pool(costs, utils=None):
    utils = utils or [None] * len(costs)
    return [ClientStats(i, c, 10, u) for i, (c, u) in enumerate(zip(costs, utils))]


def test_random_whole_pool_and_repeatable():
    pool = _pool([1.0] * 6)
    assert select_random(pool, 6, None, 0, 1) == list(range(6))
    assert select_random(pool, 3, None, 4, 9) == select_random(pool, 3, None, 4, 9)


def test_random_is_uniform():
    pool = _pool([1.0] * 10)
    counts = np.zeros(10)
    for r in range(10_000):
        counts[select_random(pool, 1, None, 123, r)[0]] += 1
    assert np.all(np.abs(counts / 10_000 - 0.1) <= 0.02)


def test_lowest_cost_and_ties():
    assert select_lowest_cost(_pool([10.0, 20.0, 30.0]), 2, None) == [0, 1]
    assert select_lowest_cost(_pool([5.0] * 4), 2, None) == [0, 1]


def test_cap_enumerated_trajectory():
    pool = _pool([3.0, 1.0, 2.0])
    picks = []
    for _ in range(3):
        (cid,) = select_lowest_cost(pool, 1, 1)
        pool[cid].times_selected += 1
        picks.append(cid)
    assert picks == [1, 2, 0]
    with pytest.raises(SelectionError) as err:
        select_lowest_cost(pool, 1, 1)
    assert err.value.shortfall == 1


def test_cap_rounding():
    assert SelectionConfig(cap_fraction=0.1).cap(300) == 30
    assert SelectionConfig(cap_fraction=0.1).cap(25) == 3
    assert SelectionConfig(cap_fraction=None).cap(300) is None


def test_utility_e_zero_is_top_k():
    pool = _pool([1.0] * 5, [3.0, 9.0, 1.0, 7.0, 7.0])
    assert select_utility(pool, 3, 0.0, None, 0, 2) == [1, 3, 4]


def test_utility_round_one_matches_random():
    pool = _pool([1.0] * 20)
    assert select_utility(pool, 5, 0.1, None, 8, 1) == select_random(pool, 5, None, 8, 1)


def test_utility_enumerated_split():
    pool = _pool([1.0] * 4, [9.0, 7.0, 5.0, None])
    assert select_utility(pool, 2, 0.5, None, 0, 2) == [0, 3]


def test_utility_exploration_falls_back_to_explored():
    pool = _pool([1.0] * 4, [9.0, 7.0, 5.0, 1.0])
    chosen = select_utility(pool, 2, 0.5, None, 0, 2)
    assert 0 in chosen and len(set(chosen)) == 2


def test_utility_cost_examples():
    pool = [ClientStats(0, 100.0, 5, 10.0), ClientStats(1, 10.0, 5, 9.0)]
    assert select_utility_cost(pool, 1, 0.0, None, 0, 2) == [1]
    fresh = _pool([30.0, 10.0, 20.0])
    assert select_utility_cost(fresh, 2, 0.1, None, 0, 1) == select_lowest_cost(fresh, 2, None) == [1, 2]


def test_equal_costs_match_utility():
    utils = [None if i % 4 == 0 else float(i % 7) for i in range(30)]
    pool = _pool([50.0] * 30, utils)
    for r in range(2, 6):
        assert select_utility_cost(pool, 10, 0.2, None, 3, r) == select_utility(pool, 10, 0.2, None, 3, r)


def test_config_validation():
    with pytest.raises(ConfigError):
        SelectionConfig(policy="best")
    with pytest.raises(ConfigError):
        SelectionConfig(exploration_factor=1.0)
    with pytest.raises(ConfigError):
        select(SelectionConfig(), _pool([1.0]), 0, None, 0, 1)


pool_strategy = st.lists(
    st.tuples(
        st.floats(1.0, 1000.0),
        st.one_of(st.none(), st.floats(0.0, 100.0)),
        st.integers(0, 3),
    ),
    min_size=3,
    max_size=25,
)


@settings(max_examples=80, deadline=None)
@given(
    raw=pool_strategy,
    policy=st.sampled_from(["random", "cost", "utility", "utility_cost"]),
    k=st.integers(1, 10),
    e=st.floats(0.0, 0.9),
    cap=st.one_of(st.none(), st.integers(1, 4)),
    seed=st.integers(0, 1000),
    round_idx=st.integers(2, 50),
)
def test_selection_invariants(raw, policy, k, e, cap, seed, round_idx):
    pool = [ClientStats(i, c, 5, u, t) for i, (c, u, t) in enumerate(raw)]
    eligible = [c for c in pool if cap is None or c.times_selected < cap]
    cfg = SelectionConfig(policy=policy, exploration_factor=e)
    if k > len(eligible):
        with pytest.raises(SelectionError):
            select(cfg, pool, k, cap, seed, round_idx)
        return
    chosen = select(cfg, pool, k, cap, seed, round_idx)
    assert len(chosen) == len(set(chosen)) == k
    assert set(chosen) <= {c.client_id for c in eligible}
    if policy in ("utility", "utility_cost") and any(c.explored for c in pool):
        key = (lambda c: c.last_utility) if policy == "utility" else (lambda c: c.last_utility / c.cost)
        ranked = sorted((c for c in eligible if c.explored), key=lambda c: (-key(c), c.client_id))
        n_exploit = min(k - exploration_slots(k, e), len(ranked))
        assert {c.client_id for c in ranked[:n_exploit]} <= set(chosen)
        new = [cid for cid in chosen if not pool[cid].explored]
        assert len(new) <= k - n_exploit

    # uniform cost scaling leaves cost-aware selections unchanged
    if policy in ("cost", "utility_cost"):
        scaled = [ClientStats(c.client_id, 3.5 * c.cost, 5, c.last_utility, c.times_selected) for c in pool]
        assert select(cfg, scaled, k, cap, seed, round_idx) == chosen
