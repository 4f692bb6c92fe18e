import itertools

import numpy as np
import pytest

from wtile import layer34 as K
from wtile import solver as S
from wtile.core import CapacityError, GridTiling, TileRuleSet, evaluate_tiling
from wtile.tm import BORDER


def random_rules(rng, d, squares=True, low=-2, high=4):
    names = [f"t{i}" for i in range(d)]
    h = {k: int(rng.integers(low, high)) for k in itertools.product(names, repeat=2)}
    v = {k: int(rng.integers(low, high)) for k in itertools.product(names, repeat=2)}
    sq = {}
    if squares:
        sq = {k: int(rng.integers(low, high)) for k in itertools.product(names, repeat=4) if rng.random() < 0.4}
    return TileRuleSet(names, h, v, sq)


def test_all_zero_rules():
    r = TileRuleSet(["a", "b"])
    assert S.solve_dp(r, 4, 4).min_cost == 0


def test_constant_tiling_wins():
    r = TileRuleSet(["a", "b"], horizontal={("a", "b"): 1, ("b", "a"): 1})
    res = S.solve_dp(r, 3, 3)
    assert res.min_cost == 0
    assert len({c for row in res.witness.cells for c in row}) == 1


def test_single_cell():
    r = TileRuleSet(["a", "b"], horizontal={("a", "b"): 1})
    assert S.solve_exhaustive(r, 1, 1).min_cost == 0
    assert S.solve_dp(r, 1, 1).min_cost == 0


@pytest.mark.parametrize("seed", range(25))
def test_dp_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    h, w = int(rng.integers(1, 4)), int(rng.integers(1, 5))
    r = random_rules(rng, d)
    dp, ex = S.solve_dp(r, h, w), S.solve_exhaustive(r, h, w)
    assert dp.min_cost == ex.min_cost
    if h > 1 and w > 1:
        assert evaluate_tiling(r, dp.witness) == dp.min_cost
        assert evaluate_tiling(r, ex.witness) == ex.min_cost


@pytest.mark.parametrize("seed", range(10))
def test_flip_symmetry(seed):
    rng = np.random.default_rng(100 + seed)
    r = random_rules(rng, 3)
    assert S.solve_dp(r, 3, 3).min_cost == S.solve_dp(S.flip_rules(r), 3, 3).min_cost


def test_flip_rules_evaluates_flipped_grids():
    rng = np.random.default_rng(9)
    r = random_rules(rng, 3)
    g = GridTiling.of(rng.integers(0, 3, size=(3, 4)).tolist())
    flipped = GridTiling.of(list(reversed(g.cells)))
    assert evaluate_tiling(S.flip_rules(r), flipped) == evaluate_tiling(r, g)


def test_ties_break_lexicographically():
    r = TileRuleSet(["a", "b", "c"])
    res = S.solve_dp(r, 2, 3)
    assert res.witness.cells == ((0, 0, 0), (0, 0, 0))


def test_monotone_under_added_cost():
    rng = np.random.default_rng(4)
    for _ in range(10):
        r = random_rules(rng, 2, low=0)
        base = S.solve_exhaustive(r, 2, 3).min_cost
        doc = r.to_json()
        doc["horizontal"][0][2] += 1
        assert S.solve_exhaustive(TileRuleSet.from_json(doc), 2, 3).min_cost >= base


def test_streamed_transfer_matches_dense(monkeypatch):
    rng = np.random.default_rng(12)
    r = random_rules(rng, 3)
    dense = S.solve_dp(r, 3, 4)
    monkeypatch.setattr(S, "DENSE_LIMIT", 8)
    streamed = S.solve_dp(r, 3, 4)
    assert dense.min_cost == streamed.min_cost
    assert dense.witness == streamed.witness


def test_capacity_limits(monkeypatch):
    r = TileRuleSet(["a", "b", "c"])
    with pytest.raises(CapacityError, match="budget of 10"):
        S.solve_dp(r, 2, 3, budget=10)
    with pytest.raises(CapacityError):
        S.solve_exhaustive(r, 3, 3, budget=1000)
    monkeypatch.setenv("TI_TILE_BUDGET", "5")
    with pytest.raises(CapacityError):
        S.solve_dp(r, 2, 2)


def test_threshold_boundary():
    rng = np.random.default_rng(7)
    r = random_rules(rng, 2)
    lam = S.solve_dp(r, 3, 3).min_cost
    assert S.threshold_decide(r, 3, lam) is S.Decision.BELOW
    assert S.threshold_decide(r, 3, lam - 1) is S.Decision.AT_OR_ABOVE


def test_binary_search_call_count():
    rng = np.random.default_rng(8)
    for _ in range(20):
        r = random_rules(rng, int(rng.integers(2, 4)))
        lo, hi = S.cost_range(r, 3, 3)
        oracle = S.CountingOracle(r, 3)
        assert S.binary_search_min(oracle, lo, hi) == S.solve_dp(r, 3, 3).min_cost
        assert oracle.calls <= int(np.ceil(np.log2(hi - lo + 1)))


def test_cost_range_brackets_minimum():
    rng = np.random.default_rng(10)
    for _ in range(10):
        r = random_rules(rng, 3)
        lo, hi = S.cost_range(r, 3, 3)
        assert lo <= S.solve_dp(r, 3, 3).min_cost <= hi


@pytest.mark.parametrize("seed", range(6))
def test_border_gadget_witness_has_border_on_perimeter(seed):
    rng = np.random.default_rng(seed)
    names = ["a", "b", BORDER]
    base = TileRuleSet(names, squares={k: int(rng.integers(0, 6)) for k in itertools.product(names, repeat=4)})
    g = K.border_cost_gadget(base)
    for n in (3, 4):
        res = S.solve_dp(g, n, n)
        for r in range(n):
            for c in range(n):
                on_frame = r in (0, n - 1) or c in (0, n - 1)
                assert g.name(res.witness.cells[r][c]).startswith(BORDER) == on_frame
