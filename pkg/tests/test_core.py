import itertools

import numpy as np
import pytest

from wtile.core import (
    AlphabetError, CompileError, DimensionError, GridTiling, Tile, TileRuleSet,
    compile_squares_to_pairs, evaluate_tiling, relabel,
)
from wtile.solver import solve_exhaustive


def two_tile_rules(**extra):
    return TileRuleSet(["a", "b"], horizontal={("a", "b"): 1}, vertical={("a", "b"): 2}, **extra)


def test_ids_and_names():
    r = two_tile_rules()
    assert r.d == 2
    assert r.id("b") == 1 and r.name(1) == "b"
    with pytest.raises(AlphabetError):
        r.id("c")
    with pytest.raises(AlphabetError):
        TileRuleSet(["a", "a"])
    with pytest.raises(AlphabetError):
        TileRuleSet([])


def test_layer_ids_must_match_layer_count():
    with pytest.raises(AlphabetError):
        TileRuleSet([Tile("a", ("x", "y")), Tile("b", ("x",))])
    with pytest.raises(AlphabetError):
        Tile("□", ("x",), border=True)


def test_evaluate_by_hand():
    r = two_tile_rules()
    # rows bottom-up: bottom row "a b", top row "a a"
    g = GridTiling.from_names(r, [["a", "b"], ["a", "a"]])
    # horizontal (a,b) once; vertical upper a over lower b once
    assert evaluate_tiling(r, g) == 1 + 2


def test_square_and_corner_costs():
    r = two_tile_rules(squares={("a", "a", "a", "b"): 5}, corners={("nw", "a"): 10})
    g = GridTiling.from_names(r, [["a", "b"], ["a", "a"]])
    assert evaluate_tiling(r, g) == 3 + 5 + 10
    assert r.square_cost(0, 0, 0, 1) == 15


def test_evaluate_rejects_bad_grids():
    r = two_tile_rules()
    with pytest.raises(DimensionError):
        evaluate_tiling(r, GridTiling.of([[0]]))
    with pytest.raises(AlphabetError):
        evaluate_tiling(r, GridTiling.of([[0, 5], [0, 0]]))
    with pytest.raises(DimensionError):
        GridTiling.of([[0, 1], [0]])


def test_json_round_trip():
    r = two_tile_rules(squares={("a", "b", "b", "a"): -3}, corners={("se", "b"): 4})
    back = TileRuleSet.from_json(r.to_json())
    assert back.to_json() == r.to_json()
    g = GridTiling.of([[0, 1, 1], [1, 0, 0], [0, 0, 1]])
    assert GridTiling.from_json(r, g.to_json(r)) == g
    assert evaluate_tiling(back, g) == evaluate_tiling(r, g)


def test_relabel_preserves_costs():
    rng = np.random.default_rng(5)
    names = ["a", "b", "c"]
    r = TileRuleSet(names, horizontal={k: int(rng.integers(0, 4)) for k in itertools.product(names, repeat=2)},
                    vertical={k: int(rng.integers(0, 4)) for k in itertools.product(names, repeat=2)})
    perm = [2, 0, 1]
    r2 = relabel(r, perm)
    g = GridTiling.of(rng.integers(0, 3, size=(3, 3)).tolist())
    g2 = GridTiling.of([[perm[c] for c in row] for row in g.cells])
    assert evaluate_tiling(r2, g2) == evaluate_tiling(r, g)


def test_compile_pair_rules_unchanged():
    r = two_tile_rules()
    assert compile_squares_to_pairs(r) is r


def test_compile_rejects_mixed_rules():
    r = two_tile_rules(squares={("a", "a", "a", "a"): 1})
    with pytest.raises(CompileError):
        compile_squares_to_pairs(r)


def test_compiled_encoding_round_trip():
    r = TileRuleSet(["a", "b"], squares={("a", "b", "b", "a"): 2, ("b", "b", "b", "b"): 1})
    c = compile_squares_to_pairs(r, 3, 3)
    g = GridTiling.of([[0, 1, 1], [1, 1, 0], [0, 0, 1]])
    enc = c.encode(g)
    assert c.decode(enc) == g
    assert evaluate_tiling(c.rules, enc) == evaluate_tiling(r, g)
    bad = enc.replace(0, 0, c.combined_id(0, 0))
    assert c.decode(bad) is None


def test_compiled_minimum_matches():
    r = TileRuleSet(["a", "b"], squares={("a", "a", "a", "a"): 3, ("a", "b", "a", "b"): 1,
                                         ("b", "a", "b", "a"): 1, ("b", "b", "b", "b"): 2})
    c = compile_squares_to_pairs(r, 3, 3)
    assert solve_exhaustive(c.rules, 3, 2).min_cost == solve_exhaustive(r, 3, 3).min_cost
