import itertools

import pytest

from wtile import layer1 as L1
from wtile import layer2 as L2
from wtile.tm import TmConfiguration, run


def test_counter_counts_lsb_first():
    cfg = TmConfiguration((L2.S,) + (L2.B,) * 6 + (L2.T,), 0, "q_l")
    trace = run(L2.TM, cfg, 200)
    values = []
    for c in trace:
        if c.state == "q_l" and c.head == 0:
            digits = "".join(c.tape[1:]).split(L2.B)[0].rstrip(L2.T)
            values.append(int(digits[::-1] or "0", 2))
    assert values[:10] == list(range(10))


def test_formula_small_cases():
    assert L2.bctm_steps("") == 2
    assert L2.bctm_steps("0") == 6
    assert L2.bctm_steps("1") == 8
    assert L2.reduce_input("1") == 11
    with pytest.raises(ValueError):
        L2.bctm_steps("2")


def test_formula_matches_trace():
    trace = L2.counter_trace(8)
    assert len(trace) == 2 ** 9 - 1
    for x, steps in trace.items():
        assert L2.bctm_steps(x) == steps


def test_translation_of_fault_free_rows():
    for n in (11, 40, 300):
        l1 = L1.simulate_layer1(n)
        row = L1.padded(l1.row(n - 2), n - 2)
        l2 = L2.translate_l1_to_l2(row, n - 2)
        assert len(l2) == n - 2
        assert L2.translation_violations(row, l2, n - 2) == []


def test_bad_translation_is_seen():
    n = 40
    row = L1.padded(L1.simulate_layer1(n).row(n - 2), n - 2)
    l2 = list(L2.translate_l1_to_l2(row, n - 2))
    l2[0] = L2.B
    assert L2.translation_violations(row, l2, n - 2)


def test_census_at_known_sizes():
    run11 = L2.layer2_from_layer1(11)
    assert [c["size"] for c in run11.census] == [3, 2]
    run1000 = L2.layer2_from_layer1(1000)
    assert [c["size"] for c in run1000.census] == [11, 10, 9, 8, 7, 5, 4, 2, 2]
    assert all(c["form"] == "short" for c in run1000.census)


@pytest.mark.parametrize("n", [11, 40, 300])
def test_fault_free_layer2_is_legal(n):
    r = L2.layer2_from_layer1(n)
    rows = r.rows_top_down()
    for upper, lower in zip(rows, rows[1:]):
        assert L2.illegal_l2_squares(upper, lower) == []


def test_wide_strip_round_trip():
    # a strip wider than the fault-free rows produce reads "1 1" at n = 11
    n = L2.reduce_input("1")
    first = L2.parse_row("X q_l/S B B B T X") + (L2.HASH,) * (n - 2 - 7)
    r = L2.simulate_layer2(first, n)
    assert r.strips[0].tape() == "11"
    assert r.strips[0].form == "long"
    assert r.last_row()[1] == ("q_l", L2.S)


@pytest.mark.parametrize("x", ["0", "1", "01", "10", "110"])
def test_every_input_is_written_at_its_grid(x):
    n = L2.reduce_input(x)
    width = min(len(x) + 5, n - 4)
    first = (L2.X,) + tuple(L2._fill(width)) + (L2.X,)
    first += (L2.HASH,) * (n - 2 - len(first))
    strip = L2.simulate_layer2(first, n).strips[0]
    assert strip.tape() == x + "1"


def test_short_strips_idle():
    hist, stuck = L2._run_strip(L2.parse_row("q_l/S T"), 20)
    assert stuck is None
    assert hist[-1] == L2.parse_row("S q_r/T")


def test_digit_runs_are_short_on_fault_free_rows():
    n = 1000
    r = L2.layer2_from_layer1(n)
    for t in (1, n // 2, n - 2):
        assert L2.long_digit_runs(r.row(t), n) == []


def test_tile_text_round_trip():
    row = L2.parse_row("X q_l/S 0 1 B T X #")
    assert L2.row_text(row) == "X q_l/S 0 1 B T X #"
    assert L2.is_head(row[1]) and not L2.is_head(row[2])


def test_width_mismatch():
    with pytest.raises(ValueError):
        L2.simulate_layer2(L2.parse_row("X X"), 11)
    with pytest.raises(ValueError):
        L2.simulate_layer2(L2.parse_row("X"), 4)
