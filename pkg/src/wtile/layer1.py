"""The interval-building Layer 1 machine and its analysis quantities.

A Layer 1 tiling of an ``n x n`` grid is stored as its interior rows
``r_1 .. r_{n-2}``.  Each row is a tuple of tile codes of the ``n-2`` interior
columns with trailing plain ``#`` tiles trimmed; the border columns and the
all-border rows ``r_0`` and ``r_{n-1}`` are implicit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .tm import BORDER, TmConfiguration, TuringMachine, square_legal, tm_step, Halt

LEFT, RIGHT, BLANK = "⊲", "⊳", "#"
XBAR = "X̄"
SYMBOLS = (LEFT, "X", "B", XBAR, RIGHT, BLANK)
COLORED = ("X", XBAR, "B")
STATES = ("q_OS", "q_left", "q_IS", "q_wX̄", "q_wX", "q_wB", "q_w⊳", "q_e1", "q_e2")
END_STATES = ("q_e1", "q_e2", "q_w⊳")
HEAVY_SYMBOLS = {LEFT: 1, RIGHT: 1, "X": 1, XBAR: 1}
HEAVY_STATES = {"q_wX": 1, "q_w⊳": 1, "q_wX̄": 1, "q_e1": 1, "q_e2": 1}


class PreconditionError(ValueError):
    pass


def layer1_machine() -> TuringMachine:
    rules = {}
    for q in ("q_OS", "q_left"):
        rules[(q, LEFT)] = ("q_IS", LEFT, "R")
        for c in ("X", "B", RIGHT):
            rules[(q, c)] = (q, c, "L")
    rules[("q_OS", XBAR)] = ("q_OS", "X", "L")
    rules[("q_left", XBAR)] = ("q_IS", "X", "R")
    rules[("q_IS", LEFT)] = ("q_IS", LEFT, "R")
    rules[("q_IS", "X")] = ("q_wX̄", "B", "R")
    rules[("q_IS", "B")] = ("q_IS", "B", "R")
    rules[("q_IS", XBAR)] = ("q_IS", XBAR, "R")
    rules[("q_IS", RIGHT)] = ("q_e1", "B", "R")
    for t in (XBAR, "X", "B"):
        q = f"q_w{t}"
        rules[(q, LEFT)] = (q, LEFT, "R")
        for c in ("X", "B", XBAR, RIGHT):
            rules[(q, c)] = (f"q_w{c}", t, "R")
    rules[("q_w⊳", BLANK)] = ("q_left", RIGHT, "L")
    rules[("q_e1", BLANK)] = ("q_e2", "X", "R")
    rules[("q_e2", BLANK)] = ("q_OS", RIGHT, "L")
    weights = dict(HEAVY_SYMBOLS)
    weights.update(HEAVY_STATES)
    return TuringMachine(STATES, SYMBOLS, rules, blank=BLANK, direction="up", weights=weights, start="q_e2")


TM = layer1_machine()


# ---------------------------------------------------------------------------
# tile alphabet: code 0 is the border, then plain tape tiles, colored tiles,
# and head tiles (state, symbol)


@dataclass(frozen=True)
class Layer1Tile:
    symbol: str
    state: str | None = None
    color: str | None = None  # "r", "b" or None

    @property
    def is_head(self) -> bool:
        return self.state is not None

    def text(self) -> str:
        if self.symbol == BORDER:
            return BORDER
        if self.state:
            return f"{self.state}/{self.symbol}"
        return f"{self.symbol}:{self.color}" if self.color else self.symbol


def _alphabet():
    tiles = [Layer1Tile(BORDER), Layer1Tile(LEFT), Layer1Tile(RIGHT), Layer1Tile(BLANK)]
    for s in COLORED:
        for c in ("r", "b"):
            tiles.append(Layer1Tile(s, color=c))
    for q in STATES:
        for s in SYMBOLS:
            tiles.append(Layer1Tile(s, state=q))
    return tuple(tiles)


TILES = _alphabet()
NT = len(TILES)
CODE = {t: i for i, t in enumerate(TILES)}
TEXT = {t.text(): i for i, t in enumerate(TILES)}
BOR, LFT, RGT, HASH = 0, 1, 2, 3


def code(text: str) -> int:
    try:
        return TEXT[text]
    except KeyError:
        raise ValueError(f"unknown Layer 1 tile {text!r}") from None


def head_code(state: str, symbol: str) -> int:
    return CODE[Layer1Tile(symbol, state=state)]


def tape_code(symbol: str, color: str | None = None) -> int:
    return CODE[Layer1Tile(symbol, color=color if symbol in COLORED else None)]


IS_HEAD = np.array([t.is_head for t in TILES])
WEIGHT = np.array(
    [HEAVY_SYMBOLS.get(t.symbol, 0) + HEAVY_STATES.get(t.state, 0) if t.symbol != BORDER else 0 for t in TILES],
    dtype=np.int64,
)
_WEIGHT = WEIGHT.tolist()
_IS_HEAD = IS_HEAD.tolist()


def row_text(row) -> str:
    return " ".join(TILES[c].text() for c in row)


def parse_row(text: str) -> tuple[int, ...]:
    return canonical(tuple(code(tok) for tok in text.split()))


def canonical(row) -> tuple[int, ...]:
    row = tuple(row)
    end = len(row)
    while end and row[end - 1] == HASH:
        end -= 1
    return row[:end]


def padded(row, width: int) -> tuple[int, ...]:
    if len(row) > width:
        raise ValueError("row wider than the grid")
    return tuple(row) + (HASH,) * (width - len(row))


# ---------------------------------------------------------------------------
# legal pairs: the valid-row graph, with epsilon vertices expanded


def _vertex_sets():
    other = [q for q in STATES if q not in END_STATES]
    v = {
        "src": [BOR],
        1: [head_code(q, LEFT) for q in other],
        2: [LFT],
        3: [tape_code(s, "b") for s in COLORED],
        4: [head_code(q, s) for q in other for s in COLORED],
        5: [tape_code(s, "r") for s in COLORED],
        6: [RGT],
        7: [HASH],
        8: [head_code(q, RIGHT) for q in other],
        9: [head_code(q, BLANK) for q in END_STATES],
        "sink": [BOR],
    }
    edges = {
        "src": [1, 2], 1: [5], 2: [3], 3: [3, 4, 8, 9], 4: [5], 5: [5, 6],
        6: [7, "sink"], 7: [7, "sink"], 8: [7, "sink"], 9: [7, "sink"],
    }
    eps = {3, 5}
    return v, edges, eps


def _legal_pairs():
    v, edges, eps = _vertex_sets()
    reach = set()
    for a, outs in edges.items():
        for b in outs:
            reach.add((a, b))
            if b in eps:
                for c in edges.get(b, []):
                    reach.add((a, c))
    table = np.zeros((NT, NT), dtype=bool)
    for a, b in reach:
        for x in v[a]:
            for y in v[b]:
                table[x, y] = True
    return table


PAIR_OK = _legal_pairs()
_INIT_EDGES = {
    (BOR, LFT), (LFT, head_code("q_e2", BLANK)), (head_code("q_e2", BLANK), HASH),
    (head_code("q_e2", BLANK), BOR), (HASH, HASH), (HASH, BOR),
}


def illegal_pairs(framed) -> int:
    a = np.asarray(framed)
    return int((~PAIR_OK[a[:-1], a[1:]]).sum())


def is_valid_row(row, width: int | None = None) -> tuple[bool, tuple[int, int] | None]:
    """Validity of an interior row (border columns implicit) and the first bad pair."""
    w = len(row) if width is None else width
    framed = (BOR,) + padded(row, w) + (BOR,)
    for i in range(len(framed) - 1):
        if not PAIR_OK[framed[i], framed[i + 1]]:
            return False, (i - 1, i)
    return True, None


def valid_by_properties(row) -> bool:
    """Validity by the five structural properties of a valid row."""
    tiles = [TILES[c] for c in row]
    if any(t.symbol == BORDER for t in tiles):
        return False
    tape = [t.symbol for t in tiles]
    i = 0
    if not tape or tape[0] != LEFT:
        return False
    i = 1
    while i < len(tape) and tape[i] in COLORED:
        i += 1
    has_right = i < len(tape) and tape[i] == RIGHT
    if has_right:
        i += 1
    if any(s != BLANK for s in tape[i:]):
        return False
    heads = [j for j, t in enumerate(tiles) if t.is_head]
    if len(heads) != 1:
        return False
    h = heads[0]
    for j, t in enumerate(tiles):
        if t.symbol in COLORED and not t.is_head:
            if (j < h and t.color != "b") or (j > h and t.color != "r"):
                return False
    rpos = tape.index(RIGHT) if has_right else None
    if has_right:
        return tiles[h].state not in END_STATES and h <= rpos
    first_blank = tape.index(BLANK) if BLANK in tape else len(tape)
    return h == first_blank and tiles[h].state in END_STATES


# ---------------------------------------------------------------------------
# computation squares


def _strip(c):
    t = TILES[c]
    if t.symbol == BORDER:
        return BORDER
    return (t.state, t.symbol) if t.is_head else t.symbol


@lru_cache(maxsize=None)
def square_ok(nw: int, ne: int, sw: int, se: int) -> bool:
    """Layer 1 computation square: machine legality plus the color rules."""
    if not square_legal(TM, (_strip(nw), _strip(ne), _strip(sw), _strip(se))):
        return False
    tiles = [TILES[c] for c in (nw, ne, sw, se)]
    for top, bottom in ((tiles[0], tiles[2]), (tiles[1], tiles[3])):
        if top.color and bottom.color and top.color != bottom.color:
            return False
    for left, right in ((tiles[0], tiles[1]), (tiles[2], tiles[3])):
        if left.is_head and right.color and right.color != "r":
            return False
        if right.is_head and left.color and left.color != "b":
            return False
    return True


def _copy_ok_mask(nw, ne, sw, se):
    return (nw == sw) & (ne == se) & ~IS_HEAD[nw] & ~IS_HEAD[ne]


def illegal_squares_between(lower: np.ndarray, upper: np.ndarray) -> int:
    """Illegal computation squares spanning two framed rows of equal width."""
    nw, ne, sw, se = upper[:-1], upper[1:], lower[:-1], lower[1:]
    easy = _copy_ok_mask(nw, ne, sw, se)
    bad = 0
    for i in np.flatnonzero(~easy).tolist():
        if not square_ok(int(nw[i]), int(ne[i]), int(sw[i]), int(se[i])):
            bad += 1
    return bad


def illegal_init_squares(r1_framed) -> int:
    return sum((a, b) not in _INIT_EDGES for a, b in zip(r1_framed[:-1], r1_framed[1:]))


# ---------------------------------------------------------------------------
# fault-free dynamics


def start_row() -> tuple[int, ...]:
    return (LFT, head_code("q_e2", BLANK))


def to_config(row) -> TmConfiguration:
    tiles = [TILES[c] for c in row]
    heads = [i for i, t in enumerate(tiles) if t.is_head]
    if len(heads) != 1:
        raise PreconditionError("row must have exactly one head")
    h = heads[0]
    return TmConfiguration(tuple(t.symbol for t in tiles), h, tiles[h].state)


def from_config(cfg: TmConfiguration) -> tuple[int, ...]:
    out = []
    for i, s in enumerate(cfg.tape):
        if i == cfg.head:
            out.append(head_code(cfg.state, s))
        else:
            out.append(tape_code(s, ("b" if i < cfg.head else "r") if s in COLORED else None))
    return canonical(out)


@lru_cache(maxsize=65536)
def _next_cached(row):
    cfg = tm_step(TM, to_config(row))
    if isinstance(cfg, Halt):
        raise PreconditionError(f"no transition from row {row_text(row)}")
    return from_config(cfg)


def next_row(row, width: int | None = None) -> tuple[int, ...]:
    """The unique fault-free successor of a valid row."""
    row = canonical(row)
    ok, _ = is_valid_row(row, width)
    if not ok:
        raise PreconditionError("next_row needs a valid row")
    nxt = _next_cached(row)
    if width is not None and len(nxt) > width:
        raise PreconditionError("successor does not fit in the grid")
    return nxt


def is_end_row(row) -> bool:
    row = canonical(row)
    return bool(row) and row[-1] == head_code("q_e2", BLANK) and is_valid_row(row)[0]


@dataclass
class Layer1Tiling:
    n: int
    rows: list  # rows[t-1] is r_t, t = 1 .. n-2

    @property
    def width(self) -> int:
        return self.n - 2

    def row(self, t: int) -> tuple[int, ...]:
        return self.rows[t - 1]

    def replace(self, t: int, col: int, c: int) -> "Layer1Tiling":
        r = list(padded(self.rows[t - 1], self.width))
        r[col] = c
        rows = list(self.rows)
        rows[t - 1] = canonical(r)
        return Layer1Tiling(self.n, rows)

    def cell(self, t: int, col: int) -> int:
        r = self.rows[t - 1]
        return r[col] if col < len(r) else HASH

    def text_rows(self) -> list[str]:
        return [row_text(padded(r, self.width)) for r in self.rows]


def simulate_layer1(n: int) -> Layer1Tiling:
    """Fault-free Layer 1 rows r_1 .. r_{n-2}."""
    if n < 5:
        raise ValueError("Layer 1 needs n >= 5")
    row = start_row()
    rows = [row]
    for _ in range(n - 3):
        row = _next_cached(row)
        if len(row) > n - 2:
            raise ValueError(f"tape outgrew the {n}x{n} grid")
        rows.append(row)
    return Layer1Tiling(n, rows)


# ---------------------------------------------------------------------------
# intervals and the size functions


@dataclass(frozen=True)
class Interval:
    start: int
    end: int
    clean: bool = True
    tag: int | None = None

    @property
    def size(self) -> int:
        return self.end - self.start + 1


def interval_spans(row) -> list[tuple[int, int]]:
    spans = []
    prev = None
    for i, c in enumerate(row):
        w = _WEIGHT[c]
        if not w:
            continue
        if prev is not None:
            spans.append((prev, i))
        if w == 2:
            spans.append((i, i))
        prev = i
    return spans


def intervals(row) -> list[Interval]:
    return [Interval(a, b) for a, b in interval_spans(row)]


def sizes(row) -> list[int]:
    return [b - a + 1 for a, b in interval_spans(row)]


def row_weight(row) -> int:
    return sum(_WEIGHT[c] for c in row)


def row_length(row) -> int:
    return sum(1 for c in row if c not in (HASH, BOR))


def x_value(sz) -> int:
    """Outer Loop step count for interval sizes ``sz`` (left to right)."""
    return sum(2 * j * (s - 1) + 1 for j, s in enumerate(sz, start=1))


def row_x(row) -> int:
    return x_value(sizes(row))


def a_value(sz) -> int:
    sz = list(sz)
    if not sz:
        return 0
    return sum(abs(a - b - 1) for a, b in zip(sz, sz[1:])) + abs(sz[-1] - 2)


def ideal_x(m: int) -> int:
    """X at the end row holding m intervals of sizes (m+1, ..., 2)."""
    return m + m * (m + 1) * (m + 2) // 3


def end_row_index(m: int) -> int:
    """Row index of the m-th end row of a fault-free run (the first is r_1)."""
    k = m - 1
    return 1 + k + k * m // 2 + k * m * (m + 1) * (m + 2) // 12


def mu(n: int) -> int:
    """Interval count in the last row r_{n-2} of a fault-free tiling."""
    if n < 5:
        raise ValueError("mu needs n >= 5")
    lo, hi = 1, 2
    while end_row_index(hi) <= n - 2:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if end_row_index(mid) <= n - 2:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# costs and the clean/corrupt tagging


class _Framer:
    def __init__(self, tiling: Layer1Tiling):
        self.tiling = tiling
        self.active = min(tiling.width, max((len(r) for r in tiling.rows), default=0) + 1)
        self.full = self.active == tiling.width

    def framed(self, row) -> np.ndarray:
        core = padded(row, self.active)
        return np.array((BOR,) + core + ((BOR,) if self.full else (HASH,)), dtype=np.int64)

    def block(self, rows) -> np.ndarray:
        g = np.full((len(rows), self.active + 2), HASH, dtype=np.int64)
        g[:, 0] = BOR
        if self.full:
            g[:, -1] = BOR
        for i, r in enumerate(rows):
            g[i, 1:1 + len(r)] = r
        return g


def row_costs(tiling: Layer1Tiling, rows=None) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``h`` and ``v`` indexed by row 0 .. n-1."""
    n = tiling.n
    fr = _Framer(tiling)
    g = fr.block(tiling.rows)
    h = np.zeros(n, dtype=np.int64)
    v = np.zeros(n, dtype=np.int64)
    h[1:n - 1] = (~PAIR_OK[g[:, :-1], g[:, 1:]]).sum(axis=1)
    v[0] = illegal_init_squares(g[0].tolist())
    lower, upper = g[:-1], g[1:]
    nw, ne, sw, se = upper[:, :-1], upper[:, 1:], lower[:, :-1], lower[:, 1:]
    hard = ~_copy_ok_mask(nw, ne, sw, se)
    rr, cc = np.nonzero(hard)
    for r, c in zip(rr.tolist(), cc.tolist()):
        if not square_ok(int(nw[r, c]), int(ne[r, c]), int(sw[r, c]), int(se[r, c])):
            v[r + 1] += 1
    return h, v


def row_cost(tiling: Layer1Tiling, t: int) -> tuple[int, int]:
    h, v = row_costs(tiling)
    return int(h[t]), int(v[t])


def row_distance(a, b) -> int:
    w = max(len(a), len(b))
    pa, pb = padded(a, w), padded(b, w)
    return sum(x != y for x, y in zip(pa, pb))


@dataclass
class IntervalAnnotation:
    t: int
    spans: list
    tags: list  # tag per interval, 0 when corrupt

    def intervals(self) -> list[Interval]:
        return [Interval(a, b, tag > 0, tag or None) for (a, b), tag in zip(self.spans, self.tags)]

    def clean_sizes(self) -> list[int]:
        return [b - a + 1 for (a, b), tag in zip(self.spans, self.tags) if tag]

    def clean_tags(self) -> set:
        return {tag for tag in self.tags if tag}


def _compare(row, spans, ref, ref_tags_by_span) -> list[int]:
    tags = []
    for a, b in spans:
        tag = ref_tags_by_span.get((a, b), 0)
        if tag and row[a:b + 1] != _slice(ref, a, b):
            tag = 0
        tags.append(tag)
    return tags


def _slice(row, a, b):
    part = row[a:b + 1]
    if len(part) < b - a + 1:
        part = part + (HASH,) * (b - a + 1 - len(part))
    return part


def _ext(row, b):
    return row if len(row) > b else row + (HASH,) * (b + 1 - len(row))


def tag_clean_corrupt(tiling: Layer1Tiling, valid=None, start: int = 1, seed=None) -> list[IntervalAnnotation]:
    """Clean/corrupt designations and tags for rows r_1 .. r_{n-2}.

    ``valid[t]`` may be passed to avoid recomputing row validity.  ``seed``
    (an annotation for row ``start-1``) lets a caller resume part way up.
    """
    rows = tiling.rows
    width = tiling.width
    if valid is None:
        valid = [False] + [is_valid_row(r, width)[0] for r in rows]
    out = []
    prev = seed
    for t in range(start, len(rows) + 1):
        row = rows[t - 1]
        spans = interval_spans(row)
        if t == 1:
            ref = start_row()
            ref_spans, ref_tags = [(0, 1)], [1]
        elif not valid[t - 1]:
            ref = rows[t - 2]
            ref_spans, ref_tags = prev.spans, prev.tags
        else:
            ref = None
            try:
                ref = next_row(rows[t - 2], width)
            except Exception:
                ref = None
            if ref is None:
                ref = rows[t - 2]
                ref_spans, ref_tags = prev.spans, prev.tags
            else:
                ref_spans = interval_spans(ref)
                ref_tags = list(prev.tags)
                if len(ref_spans) == len(ref_tags) + 1:
                    ref_tags.append(t)
        row_e = _ext(row, max((b for _, b in spans), default=0))
        if ref == row:
            tags = list(ref_tags) if ref_spans == spans else _compare(row_e, spans, ref, dict(zip(ref_spans, ref_tags)))
        else:
            tags = _compare(row_e, spans, ref, dict(zip(ref_spans, ref_tags)))
        prev = IntervalAnnotation(t, spans, tags)
        out.append(prev)
    return out


@dataclass
class Segment:
    first_row: int
    last_row: int
    complete: bool


def segment_decomposition(tiling: Layer1Tiling, costs=None, end_rows=None) -> list[Segment]:
    n = tiling.n
    h, v = costs if costs is not None else row_costs(tiling)
    c = (h + v).tolist()
    if end_rows is None:
        end_rows = [False] + [is_end_row(r) for r in tiling.rows] + [False]
    return _segments(c, end_rows, n)


def _segments(c, end_rows, n) -> list[Segment]:
    # the first segment has no predecessor; it counts as complete when r_0 and r_1 are clean
    segs = [Segment(0, 1, c[0] == 0 and c[1] == 0)]
    start = 2
    prev_last = 1
    for t in range(2, n - 1):
        if c[t] > 0 or end_rows[t]:
            segs.append(Segment(start, t, c[t] == 0 and c[prev_last] == 0))
            prev_last = t
            start = t + 1
    if start <= n - 2:
        segs.append(Segment(start, n - 2, False))
    return segs


def end_row_indices(tiling: Layer1Tiling) -> list[int]:
    return [t for t, r in enumerate(tiling.rows, start=1) if is_end_row(r)]
