import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wtile import layer1 as L1


@pytest.fixture(scope="module")
def run400():
    return L1.simulate_layer1(400)


def test_start_row_text():
    assert L1.row_text(L1.start_row()) == "⊲ q_e2/#"


def test_row_text_round_trip(run400):
    for t in (1, 17, 200, 398):
        row = run400.row(t)
        assert L1.parse_row(L1.row_text(row)) == L1.canonical(row)


def test_small_grid_rejected():
    with pytest.raises(ValueError):
        L1.simulate_layer1(4)


def test_fault_free_rows_cost_nothing(run400):
    h, v = L1.row_costs(run400)
    assert h.sum() == 0 and v.sum() == 0


def test_fault_free_rows_are_valid(run400):
    for row in run400.rows:
        assert L1.is_valid_row(row, run400.width)[0]
        assert L1.valid_by_properties(L1.padded(row, run400.width))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=L1.NT - 1), min_size=2, max_size=9))
def test_pair_graph_matches_properties(row):
    assert L1.is_valid_row(tuple(row))[0] == L1.valid_by_properties(tuple(row))


def test_end_rows_follow_closed_form(run400):
    ends = L1.end_row_indices(run400)
    assert ends == [L1.end_row_index(m) for m in range(1, len(ends) + 1)]
    for m, t in enumerate(ends, start=1):
        sz = L1.sizes(run400.row(t))
        assert sz == list(range(m + 1, 1, -1))
        assert L1.is_end_row(run400.row(t))


def test_mu_matches_simulation():
    for n in range(5, 400):
        t = L1.simulate_layer1(n)
        assert L1.mu(n) == len(L1.sizes(t.row(n - 2))), n


def test_known_values():
    assert L1.mu(16) == 2
    assert L1.sizes(L1.simulate_layer1(16).row(14)) == [4, 2]
    assert L1.end_row_index(1) == 1 and L1.end_row_index(2) == 5 and L1.end_row_index(3) == 16


def test_ideal_x_and_potential():
    for m in range(1, 12):
        ideal = list(range(m + 1, 1, -1))
        assert L1.x_value(ideal) == L1.ideal_x(m)
        assert L1.a_value(ideal) == 0
    assert L1.a_value([5, 3, 2]) == 1 + 0 + 0


def test_cadence_is_x_plus_one(run400):
    ends = L1.end_row_indices(run400)
    for a, b in zip(ends, ends[1:]):
        assert b - a == L1.row_x(run400.row(a)) + 1


def test_weight_two_head_makes_unit_interval():
    # the heavy head on a heavy symbol is an interval of size 1
    row = L1.parse_row("⊲ X:b q_wX/X B:r ⊳")
    assert 1 in L1.sizes(row)


def test_row_distance():
    a = L1.parse_row("⊲ B:b q_IS/⊳")
    assert L1.row_distance(a, a) == 0
    assert L1.row_distance(a, L1.parse_row("⊲ X:b q_IS/⊳")) == 1


def test_injected_tile_is_counted(run400):
    t, col = 100, 2
    old = run400.cell(t, col)
    bad = run400.replace(t, col, L1.HASH if old != L1.HASH else L1.LFT)
    h, v = L1.row_costs(bad)
    assert h.sum() + v.sum() > 0


def test_tags_persist_on_clean_runs(run400):
    ann = L1.tag_clean_corrupt(run400)
    final = ann[-1]
    assert len(final.clean_sizes()) == L1.mu(400)
    assert all(tag for tag in final.tags)
