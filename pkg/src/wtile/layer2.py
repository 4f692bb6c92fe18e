"""Layer 2: strips between X columns, each running a binary counter.

Layer 2 runs top-down.  Its first row is ``r_{n-2}`` (the last Layer 1 row)
and its last row is ``r_1``, so every strip performs ``n - 3`` counter steps.
Layer 2 tiles use the tm module convention: a tape tile is a bare symbol and a
head tile is ``(state, symbol)``.  The counter is written least significant
bit first, so after enough steps a strip reads ``S x 1 B ... T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from . import layer1 as L1
from .tm import BORDER, Halt, TmConfiguration, TuringMachine, compile_tm_to_squares, tm_step

X, HASH, S, B, T = "X", "#", "S", "B", "T"
DIGITS = ("0", "1")
STRIP_SYMBOLS = (S, "0", "1", B, T)
SYMBOLS = (X, HASH) + STRIP_SYMBOLS
STATES = ("q_l", "q_r")
START = ("q_l", S)


def binary_counter_machine() -> TuringMachine:
    rules = {
        ("q_l", S): ("q_r", S, "R"),
        ("q_r", "1"): ("q_r", "0", "R"),
        ("q_r", "0"): ("q_l", "1", "L"),
        ("q_r", B): ("q_l", "1", "L"),
        ("q_l", "0"): ("q_l", "0", "L"),
        ("q_l", "1"): ("q_l", "1", "L"),
    }
    for q in STATES:
        rules[(q, T)] = (q, T, "S")
    return TuringMachine(STATES, SYMBOLS, rules, blank=B, direction="down", start="q_l")


TM = binary_counter_machine()
# q_r is entered by R and S moves and q_l by L and S moves; the Stay rules only
# idle on T, so the schemas are still exact without splitting states.
LEGAL_SQUARES = compile_tm_to_squares(TM, require_normalized=False)

TILES = (BORDER,) + SYMBOLS + tuple((q, s) for q in STATES for s in STRIP_SYMBOLS)


def is_head(t) -> bool:
    return isinstance(t, tuple)


def tile_text(t) -> str:
    return f"{t[0]}/{t[1]}" if is_head(t) else t


def row_text(row) -> str:
    return " ".join(tile_text(t) for t in row)


def parse_tile(text: str):
    if "/" in text:
        q, s = text.split("/", 1)
        return (q, s)
    return text


def parse_row(text: str) -> tuple:
    return tuple(parse_tile(t) for t in text.split())


# ---------------------------------------------------------------------------
# the reduction from x to n


def bctm_steps(x: str) -> int:
    """Counter steps until the tape reads ``x1`` with the head on S in q_l."""
    if any(c not in "01" for c in x):
        raise ValueError(f"not a bit string: {x!r}")
    return 4 * int("1" + x[::-1], 2) - 2 * (x.count("1") + 1)


def reduce_input(x: str) -> int:
    return bctm_steps(x) + 3


def counter_trace(max_len: int) -> dict[str, int]:
    """Simulate one counter from ``(q_l/S) B B ...`` and record, for every
    string ``x`` with ``|x| <= max_len``, the first step at which the tape is
    ``x1`` with the head on S in q_l."""
    want = 2 ** (max_len + 1) - 1  # all strings of length <= max_len
    tape = [S] + [B] * (max_len + 3)
    cfg = TmConfiguration(tuple(tape), 0, "q_l")
    found: dict[str, int] = {}
    step = 0
    while len(found) < want:
        if cfg.state == "q_l" and cfg.head == 0:
            digits = "".join(cfg.tape[1:]).rstrip(B)
            if digits and digits not in found:
                if len(digits) > max_len + 1:
                    break
                found[digits] = step
        nxt = tm_step(TM, cfg)
        if isinstance(nxt, Halt):
            raise RuntimeError(f"counter halted at step {step}: {nxt.reason}")
        cfg = nxt
        step += 1
    return {d[:-1]: s for d, s in found.items()}


# ---------------------------------------------------------------------------
# translation from the last Layer 1 row and the initialization graph

INIT_EDGES = frozenset({
    (BORDER, X), (X, X), (X, T), (T, X), (X, START), (START, B), (START, T),
    (B, B), (B, T), (X, HASH), (HASH, HASH), (HASH, BORDER), (X, BORDER),
})


def translation_choices(l1_code: int) -> tuple:
    """Layer 2 tiles allowed under a Layer 1 tile in row ``r_{n-2}``."""
    t = L1.TILES[l1_code]
    if t.symbol == BORDER:
        return (BORDER,)
    if l1_code == L1.HASH:
        return (HASH,)
    if L1._WEIGHT[l1_code] > 0:
        return (X,)
    return (B, START, T)


def _fill(k: int) -> list:
    """Canonical contents of ``k`` weight-0 cells between two X tiles."""
    if k == 0:
        return []
    if k == 1:
        return [T]
    return [START] + [B] * (k - 2) + [T]


def translate_l1_to_l2(l1_row, width: int) -> tuple:
    """The correct translation of a Layer 1 row of ``width`` interior cells.

    Every Layer 1 interval of size at least 2 becomes ``X X``, ``X T X`` or
    ``X (q_l/S) B* T X``; a weight-2 tile becomes a single X, so size-1
    intervals vanish.
    """
    row = L1.padded(l1_row, width)
    out: list = []
    run = 0
    for c in row:
        choice = translation_choices(c)
        if choice == (B, START, T):
            run += 1
            continue
        out += _fill(run)
        run = 0
        out.append(choice[0])
    out += _fill(run)
    return tuple(out)


def translation_violations(l1_row, l2_row, width: int) -> list[int]:
    """Columns ``i`` (framed indexing) whose top-row square over columns
    ``i, i+1`` is an illegal translation or initialization square."""
    a = (L1.BOR,) + L1.padded(l1_row, width) + (L1.BOR,)
    b = (BORDER,) + tuple(l2_row) + (BORDER,)
    if len(b) != len(a):
        raise ValueError("Layer 1 and Layer 2 rows differ in width")
    ok = [t in translation_choices(c) for c, t in zip(a, b)]
    return [i for i in range(len(a) - 1) if not (ok[i] and ok[i + 1] and (b[i], b[i + 1]) in INIT_EDGES)]


# ---------------------------------------------------------------------------
# strips and simulation


def strip_spans(row) -> list[tuple[int, int]]:
    """Layer 2 intervals: from an X to the next X, both inclusive."""
    xs = [i for i, t in enumerate(row) if t == X]
    return [(a, b) for a, b in zip(xs, xs[1:]) if b > a]


@dataclass
class Strip:
    start: int
    end: int
    tag: int | None
    history: list = field(default_factory=list)  # strip contents per step
    stuck_at: int | None = None  # step at which no rule applied

    @property
    def size(self) -> int:
        return self.end - self.start + 1

    def contents(self, k: int) -> tuple:
        return self.history[min(k, len(self.history) - 1)]

    @property
    def final(self) -> tuple:
        return self.history[-1]

    @property
    def form(self) -> str:
        if self.size < 4 or any(is_head(t) and t[1] == T for t in self.final):
            return "short"
        return "long"

    def tape(self) -> str:
        """Counter digits of the final row, read left to right after S."""
        syms = [t[1] if is_head(t) else t for t in self.final]
        if not syms or syms[0] != S:
            return ""
        out = []
        for s in syms[1:]:
            if s not in DIGITS:
                break
            out.append(s)
        return "".join(out)


def _run_strip(contents: tuple, steps: int) -> tuple[list, int | None]:
    history = [contents]
    heads = [i for i, t in enumerate(contents) if is_head(t)]
    if len(heads) != 1:
        return history, None
    cfg = TmConfiguration.from_row(contents)
    for k in range(steps):
        nxt = tm_step(TM, cfg)
        if isinstance(nxt, Halt) or len(nxt.tape) > len(contents):
            return history, k
        cfg = nxt
        history.append(cfg.row())
    return history, None


@dataclass
class Layer2Run:
    n: int
    first: tuple
    strips: list
    census: list

    def row(self, t: int) -> tuple:
        """Layer 2 contents of grid row ``r_t`` for 1 <= t <= n-2."""
        if not 1 <= t <= self.n - 2:
            raise IndexError(t)
        k = self.n - 2 - t
        out = list(self.first)
        for s in self.strips:
            out[s.start + 1:s.end] = s.contents(k)
        return tuple(out)

    def last_row(self) -> tuple:
        return self.row(1)

    def rows_top_down(self) -> list:
        return [self.row(t) for t in range(self.n - 2, 0, -1)]


def simulate_layer2(first_l2_row, n: int, tags=None) -> Layer2Run:
    """Run every strip of the first Layer 2 row for ``n - 3`` steps.

    ``tags`` optionally gives one tag per strip (left to right); by default
    strips are numbered from 1.
    """
    if n < 5:
        raise ValueError("Layer 2 needs n >= 5")
    first = tuple(first_l2_row)
    if len(first) != n - 2:
        raise ValueError(f"first Layer 2 row must have {n - 2} cells")
    spans = strip_spans(first)
    strips = []
    for j, (a, b) in enumerate(spans):
        hist, stuck = _run_strip(first[a + 1:b], n - 3)
        tag = tags[j] if tags is not None else j + 1
        strips.append(Strip(a, b, tag, hist, stuck))
    census = [
        {"tag": s.tag, "start": s.start, "size": s.size, "form": s.form, "tape": s.tape(),
         "row": row_text(s.final)}
        for s in strips
    ]
    return Layer2Run(n, first, strips, census)


def layer2_from_layer1(n: int) -> Layer2Run:
    """Fault-free Layer 2 run on top of the fault-free Layer 1 tiling."""
    l1 = L1.simulate_layer1(n)
    return simulate_layer2(translate_l1_to_l2(l1.row(n - 2), n - 2), n)


def illegal_l2_squares(upper, lower) -> list[int]:
    """Columns of illegal Layer 2 squares between row ``upper`` (earlier step)
    and ``lower`` (the row below it), both framed by borders."""
    u = (BORDER,) + tuple(upper) + (BORDER,)
    d = (BORDER,) + tuple(lower) + (BORDER,)
    return [i for i in range(len(u) - 1) if (u[i], u[i + 1], d[i], d[i + 1]) not in LEGAL_SQUARES]


def digit_run_bound(n: int) -> float:
    return math.log2(n) + 3


def long_digit_runs(row, n: int) -> list[tuple[int, int]]:
    """Maximal runs of 0/1 tiles (heads included) longer than log2(n) + 3."""
    bound = digit_run_bound(n)
    runs, start = [], None
    for i, t in enumerate(tuple(row) + (None,)):
        s = t[1] if is_head(t) else t
        if s in DIGITS:
            if start is None:
                start = i
        elif start is not None:
            if i - start > bound:
                runs.append((start, i - 1))
            start = None
    return runs
