import itertools
import random

import pytest

from wtile.core import GridTiling, evaluate_tiling
from wtile.tm import (
    BORDER, Halt, NormalizationError, TmConfiguration, TuringMachine, compile_tm_to_squares,
    framed_row, normalize_direction_uniqueness, run, square_legal, tm_step, tm_to_rule_set,
)


def flipper():
    # walks right flipping bits, stops on blank
    rules = {
        ("q", "0"): ("q", "1", "R"),
        ("q", "1"): ("q", "0", "R"),
        ("q", "#"): ("h", "#", "S"),
    }
    return TuringMachine(("q", "h"), ("0", "1", "#"), rules, blank="#", start="q")


def random_normalized(seed, n_states=3, symbols=("0", "1", "#")):
    rng = random.Random(seed)
    states = [f"s{i}" for i in range(n_states)]
    arrive = {q: rng.choice("LRS") for q in states}
    rules = {}
    for q in states:
        for a in symbols:
            if rng.random() < 0.7:
                p = rng.choice(states)
                rules[(q, a)] = (p, rng.choice(symbols), arrive[p])
    return TuringMachine(states, symbols, rules, blank="#", start=states[0])


def test_step_and_halt():
    tm = flipper()
    cfg = TmConfiguration(("0", "1"), 0, "q")
    trace = run(tm, cfg, 10)
    assert trace[2].tape == ("1", "0", "#")
    assert trace[-1].state == "h"
    assert isinstance(tm_step(tm, TmConfiguration(("0",), 0, "x")), Halt)


def test_off_tape_is_a_halt():
    tm = TuringMachine(("q",), ("0", "#"), {("q", "0"): ("q", "0", "L")})
    out = tm_step(tm, TmConfiguration(("0",), 0, "q"))
    assert isinstance(out, Halt) and out.reason == "off-tape"


def test_row_round_trip():
    cfg = TmConfiguration(("0", "1", "#"), 1, "q")
    assert TmConfiguration.from_row(cfg.row()) == cfg
    with pytest.raises(ValueError):
        TmConfiguration.from_row(("0", "1"))


def test_bad_machines_rejected():
    with pytest.raises(ValueError):
        TuringMachine(("q",), ("0",), {("q", "1"): ("q", "0", "R")}, blank="0")
    with pytest.raises(ValueError):
        TuringMachine(("q",), ("0",), {("q", "0"): ("q", "0", "X")}, blank="0")
    with pytest.raises(ValueError):
        TuringMachine(("q",), ("0",), {}, blank="#")


@pytest.mark.parametrize("seed", range(12))
def test_generator_matches_case_analysis(seed):
    tm = random_normalized(seed)
    legal = compile_tm_to_squares(tm)
    tiles = list(tm.alphabet) + [(q, a) for q in tm.states for a in tm.alphabet] + [BORDER]
    for sq in itertools.product(tiles, repeat=4):
        assert (sq in legal) == square_legal(tm, sq), sq


def test_unnormalized_machine_needs_opt_in():
    tm = TuringMachine(("q", "p"), ("0", "#"), {("q", "0"): ("p", "0", "R"), ("p", "0"): ("p", "0", "L")})
    assert not tm.is_normalized()
    with pytest.raises(NormalizationError):
        compile_tm_to_squares(tm)
    norm = normalize_direction_uniqueness(tm)
    assert norm.is_normalized()
    compile_tm_to_squares(norm)


@pytest.mark.parametrize("seed", range(8))
def test_normalization_preserves_runs(seed):
    rng = random.Random(100 + seed)
    states = ["a", "b", "c"]
    syms = ("0", "1", "#")
    rules = {(q, s): (rng.choice(states), rng.choice(syms), rng.choice("LRS")) for q in states for s in syms}
    tm = TuringMachine(states, syms, rules, start="a")
    norm = normalize_direction_uniqueness(tm)
    tape = tuple(rng.choice("01") for _ in range(4))
    t1 = run(tm, TmConfiguration(tape, 1, "a"), 30)
    t2 = run(norm, TmConfiguration(tape, 1, "a"), 30)
    assert [(c.tape, c.head, c.state) for c in t1] == [(c.tape, c.head, c.state.split("~")[0]) for c in t2]


def test_trace_rows_only_use_legal_squares():
    tm = flipper()
    trace = run(tm, TmConfiguration(("0", "1", "1"), 0, "q"), 6)
    legal = compile_tm_to_squares(tm)
    rows = [framed_row(c, 5) for c in trace]
    for lower, upper in zip(rows, rows[1:]):
        for i in range(len(lower) - 1):
            assert (upper[i], upper[i + 1], lower[i], lower[i + 1]) in legal


def test_down_machines_flip_squares():
    up = flipper()
    down = TuringMachine(up.states, up.alphabet, up.rules, up.blank, direction="down", start="q")
    a, b = compile_tm_to_squares(up), compile_tm_to_squares(down)
    assert {(sw, se, nw, ne) for nw, ne, sw, se in a} == b


def test_json_round_trip(tmp_path):
    tm = flipper()
    p = tmp_path / "tm.json"
    import json
    p.write_text(json.dumps(tm.to_json()))
    back = TuringMachine.load(p)
    assert back.rules == tm.rules and back.states == tm.states and back.start == "q"


def test_rule_set_scores_traces_zero():
    tm = flipper()
    rules = tm_to_rule_set(tm)
    trace = run(tm, TmConfiguration(("0", "1", "#"), 0, "q"), 3)
    name = lambda t: f"{t[0]}/{t[1]}" if isinstance(t, tuple) else t
    rows = [[name(t) for t in framed_row(c, 3)] for c in trace]
    g = GridTiling.from_names(rules, rows)
    assert evaluate_tiling(rules, g) == 0
    broken = g.replace(1, 2, rules.id("0") if rows[1][2] != "0" else rules.id("1"))
    assert evaluate_tiling(rules, broken) > 0
