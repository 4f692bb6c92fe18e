"""Problem-specific top layers and their cost accounting.

Three constructions share the lower two layers:

* GWT: each strip translated from Layer 2 runs a verifier on its input
  ``x`` and a guessed witness; rejecting steps cost 1.
* FWT: a global Layer 3 machine checks that every long-form strip guessed the
  same oracle responses, and Layer 4 strips check one response bit each or pay
  a fixed rejection so the minimum cost encodes ``f(x)``.
* PWT: as FWT with every weight doubled except for the leftmost strip, whose
  single rejection fixes the parity of the total.

Strip-level accounting treats each strip of a fault-free final row as one
unit whose cost is fixed by its role.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import layer1 as L1
from . import layer2 as L2
from .core import Tile, TileRuleSet
from .tm import BORDER, Halt, TmConfiguration, TuringMachine, compile_tm_to_squares, tm_step

# ---------------------------------------------------------------------------
# border gadget

C_BORDER = 21
BORDER_TYPES = ("NW", "NE", "SE", "SW")
ADJUST = {
    "NW": {"nw": -C_BORDER, "se": 2 * C_BORDER},
    "NE": {"ne": -C_BORDER, "sw": 2 * C_BORDER},
    "SE": {"se": -C_BORDER, "nw": 2 * C_BORDER},
    "SW": {"sw": -C_BORDER, "ne": 2 * C_BORDER},
}
_POS = ("nw", "ne", "sw", "se")


def border_name(kind: str, base: str = BORDER) -> str:
    return f"{base}{kind}"


def border_cost_gadget(rules: TileRuleSet, border: str = BORDER) -> TileRuleSet:
    """Split the border tile into four typed copies with corner adjustments.

    Every pair or square cost that involves the border tile is copied to each
    combination of typed copies, so legality never depends on the type.
    """
    b = rules.id(border)
    kinds = [border_name(k, rules.name(b)) for k in BORDER_TYPES]
    tiles = [t for i, t in enumerate(rules.tiles) if i != b] + [Tile(k, border=True) for k in kinds]
    name = rules.name

    def expand(key):
        opts = [kinds if i == b else [name(i)] for i in key]
        return itertools.product(*opts)

    def copy(table):
        out = {}
        for key, cost in table.items():
            for k in expand(key):
                out[k] = cost
        return out

    corners = {(pos, name(t)): c for (pos, t), c in rules.corners.items() if t != b}
    for kind, kname in zip(BORDER_TYPES, kinds):
        for pos, c in ADJUST[kind].items():
            corners[(pos, kname)] = corners.get((pos, kname), 0) + c
    return TileRuleSet(
        tiles, horizontal=copy(rules.horizontal), vertical=copy(rules.vertical),
        squares=copy(rules.squares), corners=corners, layer_count=rules.layer_count,
    )


def perimeter_type(r: int, c: int, n: int) -> str | None:
    """Border type of cell (r, c) in the canonical perimeter, None inside."""
    if r == n - 1 and c <= n - 2:
        return "NW"
    if c == n - 1 and r >= 1:
        return "NE"
    if r == 0 and c >= 1:
        return "SE"
    if c == 0 and r <= n - 2:
        return "SW"
    return None


def border_adjustment(kinds: Sequence[str | None]) -> int:
    """Corner adjustment of one square given the border type at each corner."""
    return sum(ADJUST[k].get(pos, 0) for pos, k in zip(_POS, kinds) if k)


# ---------------------------------------------------------------------------
# GWT Layer 3: a verifier in every strip

W0, W1 = "w0", "w1"
GWT_SYMBOLS = (L2.X, L2.HASH, L2.S, "0", "1", L2.B, L2.T, W0, W1)
GWT_HEAD_SYMBOLS = (L2.S, "0", "1", L2.B, L2.T, W0, W1)
Q_ACC, Q_REJ = "q_acc", "q_rej"


def ends_in_one_verifier() -> TuringMachine:
    """Toy verifier on ``S x 1 w.. B.. T``: accepts iff ``x`` ends in 1.

    The witness cells are read over but ignored.  Every state idles on T and
    the halting states idle everywhere.
    """
    states = ("q_s1", "q_s2", "q_scan", "q_back1", "q_back2", Q_ACC, Q_REJ)
    rules = {("q_s2", L2.S): ("q_scan", L2.S, "R")}
    for d in ("0", "1"):
        rules[("q_scan", d)] = ("q_scan", d, "R")
        rules[("q_back1", d)] = ("q_back2", d, "L")
    for c in (L2.B, W0, W1):
        rules[("q_scan", c)] = ("q_back1", c, "L")
    rules[("q_back1", L2.S)] = (Q_REJ, L2.S, "S")
    rules[("q_back2", "1")] = (Q_ACC, "1", "S")
    rules[("q_back2", "0")] = (Q_REJ, "0", "S")
    rules[("q_back2", L2.S)] = (Q_REJ, L2.S, "S")
    for q in states:
        rules[(q, L2.T)] = (q, L2.T, "S")
    for q in (Q_ACC, Q_REJ):
        for c in GWT_HEAD_SYMBOLS:
            rules[(q, c)] = (q, c, "S")
    return TuringMachine(states, GWT_SYMBOLS, rules, blank=L2.B, direction="up", start="q_s2")


def rejection_square(nw, ne, sw, se, reject: str = Q_REJ) -> bool:
    """The square in which a head enters the rejecting state.

    The top row holds the rejecting head and the bottom row the head it came
    from; for a Stay step both sit in one column and only the square with
    them on its left side counts, so each rejecting step costs once.
    """
    top = [i for i, t in enumerate((nw, ne)) if isinstance(t, tuple) and t[0] == reject]
    bottom = [i for i, t in enumerate((sw, se)) if isinstance(t, tuple) and t[0] != reject]
    return any(a != b or a == 0 for a in top for b in bottom)


class GwtLayer3:
    """Tile rules of the GWT verifier layer."""

    def __init__(self, verifier: TuringMachine):
        for q in verifier.states:
            if (q, L2.T) not in verifier.rules:
                raise ValueError(f"verifier state {q} must idle on T")
        if Q_REJ not in verifier.states or Q_ACC not in verifier.states:
            raise ValueError("verifier needs q_acc and q_rej")
        self.verifier = verifier
        # only Stay rules enter a state from a second direction, and those
        # squares do not depend on the arrival move
        self.legal = compile_tm_to_squares(verifier, require_normalized=False)

    @staticmethod
    def translation_choices(l2_tile) -> tuple:
        """Layer 3 tiles allowed above a Layer 2 tile of row r_1.

        Tape tiles are copied; a B may also become a witness cell.  A head on
        T starts the idle machine, any other head starts the verifier.
        """
        if l2_tile == BORDER:
            return (BORDER,)
        if L2.is_head(l2_tile):
            return (("q_s1", L2.T),) if l2_tile[1] == L2.T else (("q_s2", l2_tile[1]),)
        if l2_tile == L2.B:
            return (L2.B, W0, W1)
        return (l2_tile,)

    def square_ok(self, nw, ne, sw, se) -> bool:
        return (nw, ne, sw, se) in self.legal

    def run_strip(self, contents: tuple, steps: int) -> tuple[list, int]:
        """Rows of one strip for ``steps`` steps and its rejection count."""
        history = [tuple(contents)]
        heads = [i for i, t in enumerate(contents) if L2.is_head(t)]
        if len(heads) != 1:
            return history, 0
        cfg = TmConfiguration.from_row(tuple(contents))
        rejections = 0
        for _ in range(steps):
            nxt = tm_step(self.verifier, cfg)
            if isinstance(nxt, Halt) or len(nxt.tape) > len(contents):
                break
            if nxt.state == Q_REJ and cfg.state != Q_REJ:
                rejections += 1
            cfg = nxt
            history.append(cfg.row())
        return history, rejections


def gwt_layer3_rules(verifier: TuringMachine | None = None) -> GwtLayer3:
    return GwtLayer3(verifier or ends_in_one_verifier())


def gwt_translate(l2_final: Sequence, witness: Mapping[int, str] | None = None) -> tuple:
    """First Layer 3 row from the last Layer 2 row.

    ``witness`` maps a strip start column to witness bits written into that
    strip's B cells from the left.
    """
    out = [GwtLayer3.translation_choices(t)[0] for t in l2_final]
    for start, bits in (witness or {}).items():
        cells = [i for i in range(start + 1, len(out)) if out[i] == L2.B]
        for i, b in zip(cells, bits):
            out[i] = W1 if b == "1" else W0
    return tuple(out)


def gwt_strip_min_cost(layer3: GwtLayer3, l2_strip: Sequence, steps: int, max_cells: int = 8) -> tuple[int, str]:
    """Least rejection count of one strip over every witness translation.

    ``l2_strip`` is the strip contents at the end of Layer 2 (without its X
    ends).  Each B cell may become B, w0 or w1; returns the minimum and one
    minimising witness pattern.
    """
    base = [GwtLayer3.translation_choices(t)[0] for t in l2_strip]
    cells = [i for i, t in enumerate(l2_strip) if t == L2.B][:max_cells]
    best = None
    for combo in itertools.product((L2.B, W0, W1), repeat=len(cells)):
        row = list(base)
        for i, c in zip(cells, combo):
            row[i] = c
        _, cost = layer3.run_strip(tuple(row), steps)
        if best is None or cost < best[0]:
            best = (cost, " ".join(combo))
            if cost == 0:
                break
    return best


def gwt_wide_strip(x: str, width: int, layer3: GwtLayer3 | None = None, witness: str = "") -> dict:
    """One strip of ``width`` interior cells run through Layers 2 and 3 at
    ``n = reduce_input(x)``, with ``witness`` written into its B cells.

    Returns the final Layer 2 tape, the cost with this witness, and the
    least cost over all witnesses.
    """
    layer3 = layer3 or gwt_layer3_rules()
    if width < 2:
        raise ValueError("strip needs at least two interior cells")
    n = L2.reduce_input(x)
    hist, _ = L2._run_strip(tuple(L2._fill(width)), n - 3)
    final = hist[-1]
    row = gwt_translate((L2.X,) + tuple(final) + (L2.X,), {0: witness})[1:-1]
    _, cost = layer3.run_strip(row, n - 3)
    best = gwt_strip_min_cost(layer3, final, n - 3)
    return {"n": n, "l2": L2.row_text(final), "tape": L2.Strip(0, width + 1, None, [final]).tape(),
            "cost": cost, "min_cost": best[0], "witness": best[1]}


@dataclass(frozen=True)
class CompositeTiling:
    """Cells are a border type string or a (layer1 code, layer2, layer3) triple."""

    cells: tuple

    @property
    def n(self) -> int:
        return len(self.cells)

    def replace(self, r: int, c: int, tile) -> "CompositeTiling":
        rows = [list(row) for row in self.cells]
        rows[r][c] = tile
        return CompositeTiling(tuple(tuple(row) for row in rows))


def _is_border(t) -> bool:
    return isinstance(t, str)


class GwtModel:
    """Square cost p + f1 + f2 + f3 + r plus the border corner adjustments."""

    def __init__(self, layer3: GwtLayer3 | None = None):
        self.layer3 = layer3 or gwt_layer3_rules()

    def _proj(self, t, k):
        if _is_border(t):
            return L1.BOR if k == 0 else BORDER
        return t[k]

    def square_terms(self, nw, ne, sw, se) -> dict:
        sq = (nw, ne, sw, se)
        b = [_is_border(t) for t in sq]
        kinds = [t[len(BORDER):] if _is_border(t) else None for t in sq]
        terms = {"p": 0, "f1": 0, "f2": 0, "f3": 0, "r": 0, "border": border_adjustment(kinds)}
        if all(b):
            return terms
        l1 = [self._proj(t, 0) for t in sq]
        l2 = [self._proj(t, 1) for t in sq]
        l3 = [self._proj(t, 2) for t in sq]
        if b[2] and b[3]:
            terms["f1"] = int((l1[0], l1[1]) not in L1._INIT_EDGES)
            terms["f3"] = int(not all(l3[i] in GwtLayer3.translation_choices(l2[i]) for i in (0, 1)))
            return terms
        terms["p"] = int(not L1.PAIR_OK[l1[2], l1[3]])
        if b[0] and b[1]:
            ok = all(l2[i] in L2.translation_choices(l1[i]) for i in (2, 3))
            terms["f2"] = int(not (ok and (l2[2], l2[3]) in L2.INIT_EDGES))
            return terms
        if b == [False] * 4 or b in ([True, False, True, False], [False, True, False, True]):
            terms["f1"] = int(not L1.square_ok(*l1))
            terms["f2"] = int(tuple(l2) not in L2.LEGAL_SQUARES)
            terms["f3"] = int(not self.layer3.square_ok(*l3))
            terms["r"] = int(rejection_square(*l3))
            return terms
        terms.update(f1=1, f2=1, f3=1)
        return terms

    def breakdown(self, tiling: CompositeTiling) -> dict:
        n = tiling.n
        g = tiling.cells
        total = {"p": 0, "f1": 0, "f2": 0, "f3": 0, "r": 0, "border": 0}
        for r in range(n - 1):
            for c in range(n - 1):
                for k, v in self.square_terms(g[r + 1][c], g[r + 1][c + 1], g[r][c], g[r][c + 1]).items():
                    total[k] += v
        total["total"] = sum(total.values())
        return total

    def evaluate(self, tiling: CompositeTiling) -> int:
        return self.breakdown(tiling)["total"]


def gwt_canonical_tiling(n: int, layer3: GwtLayer3 | None = None, witness: Mapping[int, str] | None = None) -> CompositeTiling:
    """The fault-free composite tiling of the ``n x n`` grid."""
    layer3 = layer3 or gwt_layer3_rules()
    w = n - 2
    l1 = L1.simulate_layer1(n)
    l2 = L2.simulate_layer2(L2.translate_l1_to_l2(l1.row(n - 2), w), n)
    first3 = gwt_translate(l2.row(1), witness)
    l3_rows = {1: first3}
    strips = []
    for a, b in L2.strip_spans(first3):
        hist, _ = layer3.run_strip(first3[a + 1:b], n - 3)
        strips.append((a, b, hist))
    for t in range(2, n - 1):
        row = list(first3)
        for a, b, hist in strips:
            row[a + 1:b] = hist[min(t - 1, len(hist) - 1)]
        l3_rows[t] = tuple(row)
    cells = []
    for r in range(n):
        row = []
        for c in range(n):
            kind = perimeter_type(r, c, n)
            if kind:
                row.append(border_name(kind))
            else:
                row.append((L1.padded(l1.row(r), w)[c - 1], l2.row(r)[c - 1], l3_rows[r][c - 1]))
        cells.append(tuple(row))
    return CompositeTiling(tuple(cells))


# ---------------------------------------------------------------------------
# FWT / PWT Layer 3: the consensus machine

DIGITS4 = ("0", "1", "2", "3")
MARK = "̄"  # combining macron
MARKED = tuple(d + MARK for d in DIGITS4)
LEFT, RIGHT = L1.LEFT, L1.RIGHT
PLUS = "+"
OTHER = ("X", PLUS, "B", "T")  # the table's c
CONSENSUS_SYMBOLS = (LEFT, RIGHT, "X") + DIGITS4 + MARKED + ("B", "S", "T", PLUS, "#")


def mark(d: str) -> str:
    return d + MARK


def unmark(s: str) -> str:
    return s[:-1] if s.endswith(MARK) else s


def f1(y: str) -> str:
    """First bits of the base-4 digits of ``y`` (marks ignored)."""
    return "".join("0" if unmark(c) in "01" else "1" for c in _digits(y))


def f2(y: str) -> str:
    """Second bits of the base-4 digits of ``y`` (marks ignored)."""
    return "".join("0" if unmark(c) in "02" else "1" for c in _digits(y))


def encode_y(x1: str, z: str) -> str:
    """Digit string with first bits ``x1`` and second bits ``z``."""
    if len(x1) != len(z):
        raise ValueError("x1 and z must have equal length")
    return "".join(str(2 * int(a) + int(b)) for a, b in zip(x1, z))


def _digits(y):
    return list(y) if isinstance(y, (list, tuple)) else _split(y)


def _split(s: str) -> list[str]:
    out = []
    for ch in s:
        if ch == MARK and out:
            out[-1] += MARK
        else:
            out.append(ch)
    return out


def consensus_machine() -> TuringMachine:
    """The global Layer 3 machine of the FWT and PWT constructions."""
    q1 = {j: f"q_1{j}" for j in DIGITS4}
    q2 = {j: f"q_2{j}" for j in DIGITS4}
    states = ("q_findS", "q_read", *q1.values(), *q2.values(), "q_ret", "q_sweep", "q_clear")
    R = lambda q, c: (q, c, "R")
    L = lambda q, c: (q, c, "L")
    rules = {}
    for c in DIGITS4 + MARKED + OTHER + (LEFT,):
        rules[("q_findS", c)] = R("q_findS", c)
    rules[("q_findS", "S")] = R("q_read", "S")
    rules[("q_findS", RIGHT)] = L("q_clear", RIGHT)

    for k in DIGITS4:
        rules[("q_read", k)] = R(q1[k], mark(k))
    for c in MARKED + (LEFT,):
        rules[("q_read", c)] = R("q_read", c)
    for c in OTHER + ("S",):
        rules[("q_read", c)] = R("q_sweep", c)
    rules[("q_read", RIGHT)] = L("q_clear", RIGHT)

    for j in DIGITS4:
        for c in DIGITS4 + MARKED + OTHER:
            rules[(q1[j], c)] = R(q1[j], c)
        rules[(q1[j], "S")] = R(q2[j], "S")
        rules[(q1[j], LEFT)] = R(q2[j], LEFT)
        rules[(q1[j], RIGHT)] = L("q_ret", RIGHT)

        for k in DIGITS4:
            rules[(q2[j], k)] = R(q1[j], mark(k))  # costs when j != k
        for c in MARKED:
            rules[(q2[j], c)] = R(q2[j], c)
        rules[(q2[j], "S")] = R(q2[j], "S")  # costs
        rules[(q2[j], LEFT)] = R(q1[j], LEFT)
        rules[(q2[j], RIGHT)] = L("q_ret", RIGHT)  # costs
        for c in OTHER:
            rules[(q2[j], c)] = R(q1[j], c)  # costs

    for c in DIGITS4 + MARKED + OTHER + ("S", RIGHT):
        rules[("q_ret", c)] = L("q_ret", c)
    rules[("q_ret", LEFT)] = R("q_findS", LEFT)

    for c in DIGITS4 + MARKED + OTHER + ("S",):
        rules[("q_sweep", c)] = R("q_sweep", c)  # costs on an unmarked digit
    rules[("q_sweep", LEFT)] = R("q_sweep", LEFT)
    rules[("q_sweep", RIGHT)] = L("q_clear", RIGHT)

    for c in DIGITS4 + OTHER + ("S", RIGHT):
        rules[("q_clear", c)] = L("q_clear", c)
    for k in DIGITS4:
        rules[("q_clear", mark(k))] = L("q_clear", k)
    rules[("q_clear", LEFT)] = R("q_findS", LEFT)
    return TuringMachine(states, CONSENSUS_SYMBOLS, rules, blank="#", direction="up", start="q_clear")


CONSENSUS = consensus_machine()


def verification_illegal(tile) -> bool:
    """Head tiles whose squares are illegal verification squares."""
    if not isinstance(tile, tuple):
        return False
    q, c = tile
    if q.startswith("q_2"):
        j = q[3:]
        return c != j and c not in MARKED and c != LEFT
    if q == "q_sweep":
        return c in DIGITS4
    return False


def consensus_tape(ys: Sequence[str], pad: int = 1) -> tuple:
    """A first Layer 3 tape with one long-form strip per string in ``ys``.

    Strips read ``S y B.. T`` and are separated by X; the row starts with
    the left end marker and ends with the right end marker.
    """
    tape = [LEFT]
    for i, y in enumerate(ys):
        if i:
            tape.append("X")
        tape += ["S", *_split(y), *["B"] * pad, "T"]
    tape.append(RIGHT)
    return tuple(tape)


@dataclass
class ConsensusRun:
    steps: int
    loops: int
    events: list  # (step, head tile) for every verification-cost head

    @property
    def cost(self) -> int:
        return len(self.events)


def run_consensus(tape: Sequence[str], loops: int = 1, max_steps: int = 1_000_000) -> ConsensusRun:
    """Run the consensus machine from ``q_clear`` on the right end marker for
    ``loops`` complete Outer Loop iterations."""
    tape = tuple(tape)
    cfg = TmConfiguration(tape, len(tape) - 1, "q_clear")
    events = []
    done = 0
    started = False
    for step in range(max_steps):
        tile = (cfg.state, cfg.tape[cfg.head])
        if verification_illegal(tile):
            events.append((step, f"{tile[0]}/{tile[1]}"))
        nxt = tm_step(CONSENSUS, cfg)
        if isinstance(nxt, Halt):
            raise RuntimeError(f"consensus machine halted: {nxt.reason}")
        if cfg.state != "q_clear" and nxt.state == "q_clear":
            if started:
                done += 1
                if done == loops:
                    return ConsensusRun(step + 1, done, events)
        if nxt.state == "q_findS":
            started = True
        cfg = nxt
    raise RuntimeError("consensus run did not finish")


def fwt_translation_choices(l2_tile) -> tuple:
    """Layer 3 tiles allowed above a Layer 2 tile of row r_1 (FWT/PWT).

    The head tile on the right end marker starts the consensus machine.
    """
    if l2_tile == BORDER:
        return (BORDER,)
    if L2.is_head(l2_tile):
        s = l2_tile[1]
        return {"0": ("0", "1"), "1": ("2", "3"), "S": ("S",), "B": ("B",), "T": (PLUS,)}[s]
    return {
        "X": (LEFT, ("q_clear", RIGHT), "X"),
        "0": ("0", "1", PLUS),
        "1": ("2", "3"),
        "S": ("S", PLUS),
        "B": ("B",),
        "T": ("T",),
        "#": ("#",),
    }[l2_tile]


# ---------------------------------------------------------------------------
# oracle problems and Krentel accounting


def check_k(z: str, nbar: int, k: int) -> int:
    """Number of strips that check bit ``k`` of ``z`` (1-based)."""
    if not 1 <= k <= nbar:
        raise ValueError(f"k must be in 1..{nbar}")
    zk = int(z[k - 1]) if k <= len(z) else 0
    return 2 ** (nbar + 5) * ((1 - zk) * 2 ** (nbar - k) + zk * 2 ** nbar)


def sum_checks(z: str, nbar: int) -> int:
    return sum(check_k(z, nbar, k) for k in range(1, nbar + 1))


# -- toy oracle machines -----------------------------------------------------
# M works on the tape ``< x | z $`` and appends ``o_1 | o_2 | ... | o_nbar | f``
# after the ``$``; it halts in q_acc or q_rej.  Queries may only read the
# responses to earlier queries.

M_BLANK = "_"
M_SYMBOLS = ("<", "0", "1", "a", "b", "|", "$", M_BLANK)


def compile_oracle_program(program: Sequence[tuple], accept: Callable[[str], bool], nbar: int) -> TuringMachine:
    """Turn a list of copy instructions into a deterministic machine.

    Instructions: ``("x", neg)`` copies x (bitwise negated if ``neg``),
    ``("z", p, neg)`` copies response bit ``p``, ``("lit", "0"|"1"|"|")``
    writes one symbol.  ``accept`` decides acceptance from the responses;
    it is compiled into a finite scan over the nbar response bits.
    """
    rules: dict = {}
    states: list = []

    def st(name):
        if name not in states:
            states.append(name)
        return name

    def carry(prefix, v, ret):
        c = st(f"{prefix}_carry{v}")
        for s in M_SYMBOLS:
            if s != M_BLANK:
                rules[(c, s)] = (c, s, "R")
        rules[(c, M_BLANK)] = (st(ret), v, "L")
        return c

    def returner(name, on_left):
        for s in M_SYMBOLS:
            if s not in ("<", M_BLANK):
                rules[(name, s)] = (name, s, "L")
        rules[(name, "<")] = on_left

    n_ins = len(program)
    for i, ins in enumerate(program):
        p = f"m{i}"
        go, nxt = st(f"{p}_go"), f"m{i + 1}_go" if i + 1 < n_ins else "d_go"
        if ins[0] == "x":
            neg = int(ins[1])
            seek, ret, clean = st(f"{p}_seek"), st(f"{p}_ret"), st(f"{p}_clean")
            rules[(go, "<")] = (seek, "<", "R")
            for s in ("a", "b"):
                rules[(seek, s)] = (seek, s, "R")
            rules[(seek, "0")] = (carry(p, str(0 ^ neg), ret), "a", "R")
            rules[(seek, "1")] = (carry(p, str(1 ^ neg), ret), "b", "R")
            rules[(seek, "|")] = (clean, "|", "L")
            returner(ret, (seek, "<", "R"))
            rules[(clean, "a")] = (clean, "0", "L")
            rules[(clean, "b")] = (clean, "1", "L")
            rules[(clean, "<")] = (st(nxt), "<", "S")
        elif ins[0] == "z":
            pos, neg = int(ins[1]), int(ins[2])
            if not 1 <= pos <= nbar:
                raise ValueError(f"response index {pos} out of range")
            tobar, ret = st(f"{p}_tobar"), st(f"{p}_ret")
            rules[(go, "<")] = (tobar, "<", "R")
            for s in ("0", "1"):
                rules[(tobar, s)] = (tobar, s, "R")
            prev = tobar
            cur_sym = ("|",)
            for step in range(1, pos):
                s_i = st(f"{p}_skip{step}")
                for s in cur_sym:
                    rules[(prev, s)] = (s_i, s, "R")
                prev, cur_sym = s_i, ("0", "1")
            read = st(f"{p}_read")
            for s in cur_sym:
                rules[(prev, s)] = (read, s, "R")
            for s in ("0", "1"):
                rules[(read, s)] = (carry(p, str(int(s) ^ neg), ret), s, "R")
            returner(ret, (st(nxt), "<", "S"))
        elif ins[0] == "lit":
            ret = st(f"{p}_ret")
            rules[(go, "<")] = (carry(p, ins[1], ret), "<", "R")
            returner(ret, (st(nxt), "<", "S"))
        else:
            raise ValueError(f"unknown instruction {ins!r}")
    # decision: scan the responses with their prefix as the scan state
    go, tobar = st("d_go"), st("d_tobar")
    rules[(go, "<")] = (tobar, "<", "R")
    for s in ("0", "1"):
        rules[(tobar, s)] = (tobar, s, "R")
    rules[(tobar, "|")] = (st("d_"), "|", "R")
    for length in range(nbar + 1):
        for bits in itertools.product("01", repeat=length):
            pre = "".join(bits)
            q = st(f"d_{pre}")
            if length < nbar:
                for s in "01":
                    rules[(q, s)] = (st(f"d_{pre}{s}"), s, "R")
            else:
                rules[(q, "$")] = ("q_acc" if accept(pre) else "q_rej", "$", "S")
    for q in ("q_acc", "q_rej"):
        st(q)
        for s in M_SYMBOLS:
            rules[(q, s)] = (q, s, "S")
    return TuringMachine(states, M_SYMBOLS, rules, blank=M_BLANK, direction="up", start="m0_go" if n_ins else "d_go")


def run_halting(tm: TuringMachine, tape: Sequence[str], max_steps: int = 200_000) -> tuple[str, tuple] | None:
    """Run from the left end until q_acc or q_rej; None if it never halts."""
    cfg = TmConfiguration(tuple(tape), 0, tm.start)
    for _ in range(max_steps):
        if cfg.state in ("q_acc", "q_rej"):
            return cfg.state, cfg.tape
        nxt = tm_step(tm, cfg)
        if isinstance(nxt, Halt):
            return None
        cfg = nxt
    return None


def pointer_verifier() -> TuringMachine:
    """Verifier on ``< o ; w``: accepts iff w = 1^i with i >= 1 and o_i = 1.

    Its language is the set of strings containing a 1.
    """
    syms = ("<", "0", "1", "a", "b", ";", "x", "_")
    rules = {}
    for s in ("<", "0", "1", "a", "b"):
        rules[("v_seekw", s)] = ("v_seekw", s, "R")
    rules[("v_seekw", ";")] = ("v_w", ";", "R")
    rules[("v_w", "x")] = ("v_w", "x", "R")
    rules[("v_w", "1")] = ("v_back", "x", "L")
    rules[("v_w", "0")] = ("q_rej", "0", "S")
    rules[("v_w", "_")] = ("v_fin", "_", "L")
    rules[("v_back", "x")] = ("v_back", "x", "L")
    rules[("v_back", ";")] = ("v_findo", ";", "L")
    for s in ("0", "1"):
        rules[("v_findo", s)] = ("v_findo", s, "L")
    for s in ("a", "b", "<"):
        rules[("v_findo", s)] = ("v_marko", s, "R")
    rules[("v_marko", "0")] = ("v_seekw", "a", "R")
    rules[("v_marko", "1")] = ("v_seekw", "b", "R")
    rules[("v_marko", ";")] = ("q_rej", ";", "S")
    rules[("v_fin", "x")] = ("v_fin", "x", "L")
    rules[("v_fin", ";")] = ("v_fin2", ";", "L")
    for s in ("0", "1"):
        rules[("v_fin2", s)] = ("v_fin2", s, "L")
    rules[("v_fin2", "a")] = ("q_rej", "a", "S")
    rules[("v_fin2", "b")] = ("q_acc", "b", "S")
    rules[("v_fin2", "<")] = ("q_rej", "<", "S")
    states = ("v_seekw", "v_w", "v_back", "v_findo", "v_marko", "v_fin", "v_fin2", "q_acc", "q_rej")
    for q in ("q_acc", "q_rej"):
        for s in syms:
            rules[(q, s)] = (q, s, "S")
    return TuringMachine(states, syms, rules, blank="_", direction="up", start="v_seekw")


def suffix_verifier() -> TuringMachine:
    """Verifier on ``< o ; w`` that ignores w and accepts iff o ends in 1."""
    syms = ("<", "0", "1", ";", "_")
    rules = {}
    for s in ("<", "0", "1"):
        rules[("v_scan", s)] = ("v_scan", s, "R")
    rules[("v_scan", ";")] = ("v_chk", ";", "L")
    rules[("v_chk", "1")] = ("q_acc", "1", "S")
    rules[("v_chk", "0")] = ("q_rej", "0", "S")
    rules[("v_chk", "<")] = ("q_rej", "<", "S")
    for q in ("q_acc", "q_rej"):
        for s in syms:
            rules[(q, s)] = (q, s, "S")
    return TuringMachine(("v_scan", "v_chk", "q_acc", "q_rej"), syms, rules, blank="_", direction="up", start="v_scan")


WITNESS_LEN = 4


@dataclass
class OracleProblem:
    name: str
    nbar: int
    machine_m: TuringMachine
    verifier_v: TuringMachine
    membership: dict = field(default_factory=dict)  # ground truth for audits
    f_table: dict = field(default_factory=dict)  # ground truth for audits

    # -- running M and V -------------------------------------------------
    def run_m(self, x: str, z: str) -> tuple[list[str], int, bool]:
        """Queries, output value and decision of M on x with responses z."""
        z = (z + "0" * self.nbar)[: self.nbar]
        tape = ["<", *x, "|", *z, "$"]
        out = run_halting(self.machine_m, tape)
        if out is None:
            raise RuntimeError(f"M did not halt on x={x!r}, z={z!r}")
        state, final = out
        text = "".join(final).split("$", 1)[1].rstrip(M_BLANK)
        fields = text.split("|")
        if len(fields) != self.nbar + 1:
            raise RuntimeError(f"M wrote {len(fields)} fields, expected {self.nbar + 1}")
        return fields[:-1], int(fields[-1] or "0", 2), state == "q_acc"

    def queries(self, x: str, z: str) -> list[str]:
        return self.run_m(x, z)[0]

    def f(self, x: str, z: str) -> int:
        return self.run_m(x, z)[1]

    def accepts(self, x: str, z: str) -> bool:
        return self.run_m(x, z)[2]

    def verify(self, o: str, w: str) -> bool | None:
        out = run_halting(self.verifier_v, ["<", *o, ";", *w])
        return None if out is None else out[0] == "q_acc"

    @lru_cache(maxsize=None)
    def in_oracle(self, o: str) -> bool:
        """Whether some witness of length <= WITNESS_LEN makes V accept."""
        for length in range(WITNESS_LEN + 1):
            for w in itertools.product("01", repeat=length):
                if self.verify(o, "".join(w)):
                    return True
        return False

    def __hash__(self):
        return id(self)

    def correct_z(self, x: str) -> str:
        z = ""
        for j in range(self.nbar):
            o = self.queries(x, z + "0" * (self.nbar - j))[j]
            z += "1" if self.in_oracle(o) else "0"
        return z

    def value(self, x: str) -> int:
        return self.f(x, self.correct_z(x))

    def in_language(self, x: str) -> bool:
        return self.accepts(x, self.correct_z(x))

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "name": self.name, "nbar": self.nbar,
            "machine_m": self.machine_m.to_json(), "verifier_v": self.verifier_v.to_json(),
            "membership": self.membership, "f_table": self.f_table,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "OracleProblem":
        return cls(doc.get("name", "problem"), int(doc["nbar"]), TuringMachine.from_json(doc["machine_m"]),
                   TuringMachine.from_json(doc["verifier_v"]), dict(doc.get("membership", {})),
                   dict(doc.get("f_table", {})))

    @classmethod
    def load(cls, path) -> "OracleProblem":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _bits(n: int):
    for length in range(n + 1):
        for b in itertools.product("01", repeat=length):
            yield "".join(b)


def _with_tables(p: OracleProblem, max_x: int = 2) -> OracleProblem:
    """Fill the audit tables from reference definitions of M and V."""
    for o in _bits(max_x + p.nbar):
        p.membership[o] = p.in_oracle(o)
    for x in _bits(max_x):
        for z in itertools.product("01", repeat=p.nbar):
            z = "".join(z)
            p.f_table[f"{x}|{z}"] = p.f(x, z)
    return p


def toy_problems() -> list[OracleProblem]:
    """Four small oracle problems with nbar in {1, 2, 3}."""
    x, lit = ("x", 0), lambda c: ("lit", c)
    z = lambda p, neg=0: ("z", p, neg)
    sep = lit("|")
    specs = [
        ("echo", 1, [x, sep, z(1)], lambda r: r[0] == "1", suffix_verifier()),
        ("chain", 2, [x, sep, x, z(1), sep, z(1), z(2)], lambda r: r[1] == "1", pointer_verifier()),
        ("negate", 2, [("x", 1), sep, z(1), x, sep, z(2), z(1)], lambda r: r[0] != r[1], suffix_verifier()),
        ("three", 3, [x, sep, z(1), x, sep, z(2), z(1), x, sep, z(1), z(2), z(3)], lambda r: r[2] == "1",
         pointer_verifier()),
    ]
    out = []
    for name, nbar, prog, acc, v in specs:
        m = compile_oracle_program(prog, acc, nbar)
        out.append(_with_tables(OracleProblem(name, nbar, m, v)))
    return out


def krentel_cost(problem: OracleProblem, x: str, z: str) -> tuple[int, int]:
    """C(x, z) and the ideal minimum total 2^(nbar+5) C + 8 f(x, z)."""
    nb = problem.nbar
    if len(z) < nb:
        raise ValueError(f"z needs at least {nb} bits")
    qs, fval, _ = problem.run_m(x, z)
    c = 0
    for j in range(1, nb + 1):
        zj = int(z[j - 1])
        c += (1 - zj) * 2 ** (nb - j) + zj * (0 if problem.in_oracle(qs[j - 1]) else 1) * 2 ** nb
    return c, 2 ** (nb + 5) * c + 8 * fval


# -- roles -----------------------------------------------------------------


@dataclass(frozen=True)
class Role:
    kind: str  # "accept", "reject" or "check"
    k: int | None = None

    def __str__(self):
        return f"CheckBit({self.k})" if self.kind == "check" else self.kind.capitalize()


ACCEPT, REJECT = Role("accept"), Role("reject")


def interval_role(size_r: int, mu_n: int, x: str, z: str, problem: OracleProblem) -> Role:
    if size_r < 2:
        raise ValueError("strips have size at least 2")
    return _role_of(mu_n + 2 - size_r, z, problem.nbar, problem.f(x, z))


def _role_of(i: int, z: str, nbar: int, fval: int) -> Role:
    if i <= 0:
        return ACCEPT
    acc = 0
    for k in range(1, nbar + 1):
        acc += check_k(z, nbar, k)
        if i <= acc:
            return Role("check", k)
    if i <= acc + 8 * fval:
        return REJECT
    return ACCEPT


class RoleCosts:
    """FWT cost of a strip by I = mu + 2 - r, for one (x, z)."""

    def __init__(self, problem: OracleProblem, x: str, z: str):
        nb = problem.nbar
        self.problem, self.x, self.z = problem, x, z
        qs, self.fval, self.m_accepts = problem.run_m(x, z)
        self.bounds = np.cumsum([check_k(z, nb, k) for k in range(1, nb + 1)])
        self.check_cost = np.array(
            [1 if z[k] == "0" else (0 if problem.in_oracle(qs[k]) else 1) for k in range(nb)], dtype=np.int64)
        self.reject_end = int(self.bounds[-1]) + 8 * self.fval

    def costs(self, i: np.ndarray) -> np.ndarray:
        i = np.asarray(i, dtype=np.int64)
        k = np.searchsorted(self.bounds, i, side="left")
        out = np.zeros(i.shape, dtype=np.int64)
        check = (i >= 1) & (k < len(self.bounds))
        out[check] = self.check_cost[k[check]]
        out[(i > self.bounds[-1]) & (i <= self.reject_end)] = 1
        return out


def fwt_total(problem: OracleProblem, x: str, z: str, sizes: Sequence[int], mu_n: int) -> int:
    """Strip-level FWT cost of a fault-free final row with interval ``sizes``."""
    s = np.asarray([r for r in sizes if r >= 2], dtype=np.int64)
    return int(RoleCosts(problem, x, z).costs(mu_n + 2 - s).sum())


def pwt_total(problem: OracleProblem, x: str, z: str, sizes: Sequence[int], mu_n: int) -> int:
    """Strip-level PWT cost: doubled weights except the leftmost strip, which
    pays 1 exactly when M accepts on (x, z)."""
    s = np.asarray([r for r in sizes if r >= 2], dtype=np.int64)
    rc = RoleCosts(problem, x, z)
    rest = 2 * int(rc.costs(mu_n + 2 - s[1:]).sum())
    return rest + int(rc.m_accepts)


def recover_f(total: int, nbar: int) -> int:
    return int(np.floor(total / 8 + 0.5)) % 2 ** nbar


def mu_for(problem: OracleProblem) -> int:
    """Smallest interval count whose ideal row covers every role range."""
    nb = problem.nbar
    return nb * 2 ** (2 * nb + 5) + 8 * 2 ** nb + 2


# -- fault-free interval sizes across one Outer Loop -------------------------


def size_state(m: int, j: int, blip: int | None = None) -> list[int]:
    """Final-row interval sizes during the Outer Loop that starts from the
    end row with ``m`` intervals (m+1, ..., 2).

    ``j`` intervals have grown by one (0 <= j <= m); ``blip`` is the index
    (j+1 .. m, 1-based) of the single interval that is temporarily one
    smaller while the marker moves right.
    """
    if not 0 <= j <= m:
        raise ValueError("j out of range")
    s = [m + 2 - i + (1 if i <= j else 0) for i in range(1, m + 1)]
    if blip is not None:
        if not (j < blip <= m and 1 <= j <= m - 1):
            raise ValueError("blip out of range")
        s[blip - 1] -= 1
    return s


def iteration_states(m: int) -> list[list[int]]:
    """Every distinct size list of one Outer Loop, in order, ending with the
    next end row (m+2, ..., 2)."""
    out = [size_state(m, 0)]
    for j in range(1, m):
        for b in range(j + 1, m + 1):
            out.append(size_state(m, j, b))
        out.append(size_state(m, j))
    out.append(size_state(m, m))
    out.append(size_state(m + 1, 0))
    return out


def sample_states(m: int, count: int, seed: int = 0) -> list[list[int]]:
    """End rows, phase boundaries and blips spread over one Outer Loop."""
    rng = np.random.default_rng(seed)
    out = [size_state(m, 0), size_state(m, m), size_state(m, 1, 2), size_state(m, m - 1, m), size_state(m, m - 1)]
    while len(out) < count:
        j = int(rng.integers(1, m))
        b = int(rng.integers(j, m + 1))
        out.append(size_state(m, j, None if b == j else b))
    return out


# ---------------------------------------------------------------------------
# Layer 4 strip machine


def _cell(o: str, bit: str = "_", mark_: str = "0") -> str:
    return o if (bit, mark_) == ("_", "0") else f"{o}.{bit}{mark_}"


STAGE1_ORIG = ("S",) + DIGITS4 + ("B",)
STAGE1_SYMBOLS = tuple(dict.fromkeys(
    [_cell(o, b, m) for o in STAGE1_ORIG for b in "_01" for m in "01"] + ["T"]))


def _parse_cell(s: str) -> tuple[str, str, str]:
    if "." in s:
        o, rest = s.split(".")
        return o, rest[0], rest[1]
    return s, "_", "0"


def stage1_machine() -> TuringMachine:
    """Shuttle counter measuring the strip it runs in.

    Each cell carries (original symbol, counter bit, unary mark).  From S the
    head increments a binary counter stored least significant bit first in
    the cells right of S, returns to S, marks the first unmarked cell and
    returns to S again.  When no unmarked cell is left before T the counter
    holds size - 3; three more increments give the strip size.  A carry that
    runs into T leaves the head idling there.
    """
    rules = {}
    states = ["q_s", "inc", "tos", "seek", "back", "fin", "q_size"]
    for k in range(3):
        states += [f"add{k}", f"addback{k}"]
    rules[("q_s", "S")] = ("inc", "S", "R")
    incs = [("inc", "tos")] + [(f"add{k}", f"addback{k}") for k in range(3)]
    for s in STAGE1_SYMBOLS:
        if s == "T":
            continue
        o, b, m = _parse_cell(s)
        if o == "S":
            continue
        for inc, after in incs:
            if b == "1":
                rules[(inc, s)] = (inc, _cell(o, "0", m), "R")
            else:
                rules[(inc, s)] = (after, _cell(o, "1", m), "L")
        if m == "1":
            rules[("seek", s)] = ("seek", s, "R")
        else:
            rules[("seek", s)] = ("back", _cell(o, b, "1"), "L")
        for q in ("tos", "back", "fin") + tuple(f"addback{k}" for k in range(3)):
            rules[(q, s)] = (q, s, "L")
    rules[("tos", "S")] = ("seek", "S", "R")
    rules[("back", "S")] = ("inc", "S", "R")
    rules[("seek", "T")] = ("fin", "T", "L")
    rules[("fin", "S")] = ("add0", "S", "R")
    for k in range(3):
        rules[(f"addback{k}", "S")] = (f"add{k + 1}", "S", "R") if k < 2 else ("q_size", "S", "S")
    rules[("q_size", "S")] = ("q_size", "S", "S")
    for q in states:
        rules.setdefault((q, "T"), (q, "T", "S"))
    return TuringMachine(states, STAGE1_SYMBOLS, rules, blank="B", direction="up", start="q_s")


STAGE1 = stage1_machine()


def stage1_size(contents: Sequence[str], max_steps: int = 1_000_000) -> int | None:
    """Run Stage 1 on strip contents ``S y B.. T``; the measured size, or
    None if the counter ran into T."""
    cfg = TmConfiguration(tuple(contents), 0, "q_s")
    for _ in range(max_steps):
        if cfg.state == "q_size":
            bits = [_parse_cell(s)[1] for s in cfg.tape[1:]]
            val = 0
            for i, b in enumerate(bits):
                if b == "1":
                    val |= 1 << i
            return val
        if cfg.tape[cfg.head] == "T" and cfg.state != "seek":
            return None
        nxt = tm_step(STAGE1, cfg)
        if isinstance(nxt, Halt):
            return None
        cfg = nxt
    return None


@dataclass
class StripOutcome:
    size: int | None
    role: Role | None
    cost: int
    detail: str


class StripMachine:
    """Stages 1-3 of a Layer 4 strip.

    Stage 1 is the Turing machine ``tm``; Stages 2 and 3 are evaluated from
    its output: the role comes from ``interval_role`` and a CheckBit strip
    runs M up to the k-th query and V with the best witness.
    """

    def __init__(self, problem: OracleProblem, rejection_weight: int = 1):
        self.problem = problem
        self.tm = STAGE1
        self.rejection_weight = rejection_weight

    def run(self, contents: Sequence[str], mu_n: int) -> StripOutcome:
        contents = tuple(contents)
        if not contents or contents[0] != "S":
            return StripOutcome(None, None, 0, "short-form strip idles")
        size = stage1_size(contents)
        if size is None:
            return StripOutcome(None, None, 0, "counter reached T; strip idles")
        y = []
        for s in contents[1:]:
            if s not in DIGITS4:
                break
            y.append(s)
        y = "".join(y)
        x = f1(y)[:-1]
        z = (f2(y) + "0" * self.problem.nbar)[: self.problem.nbar]
        role = interval_role(size, mu_n, x, z, self.problem)
        w = self.rejection_weight
        if role.kind == "accept":
            return StripOutcome(size, role, 0, "accept")
        if role.kind == "reject":
            return StripOutcome(size, role, w, "reject")
        k = role.k
        if z[k - 1] == "0":
            return StripOutcome(size, role, w, f"z_{k} = 0")
        o = self.problem.queries(x, z)[k - 1]
        ok = self.problem.in_oracle(o)
        return StripOutcome(size, role, 0 if ok else w, f"V on {o!r}: {'accept' if ok else 'reject'}")


def layer4_strip_machine(problem: OracleProblem) -> StripMachine:
    return StripMachine(problem)


def strip_tape(y: str, size: int) -> tuple:
    """Layer 4 strip contents ``S y B.. T`` of an interval of ``size``."""
    inner = size - 2
    pad = inner - 2 - len(y)
    if pad < 0:
        raise ValueError("strip too small for y")
    return ("S", *y, *["B"] * pad, "T")


# ---------------------------------------------------------------------------
# cost models


@dataclass(frozen=True)
class CostModel:
    variant: str
    weights: Mapping[str, int]
    border_c: int = C_BORDER

    def square_cost(self, **flags) -> int:
        return sum(self.weights[k] * int(v) for k, v in flags.items())

    @property
    def rejection_weight(self) -> int:
        return self.weights["r"]

    @property
    def fault_weight(self) -> int:
        return min(v for k, v in self.weights.items() if k != "r")


def cost_model(variant: str) -> CostModel:
    if variant == "GWT":
        return CostModel("GWT", {"p": 1, "f1": 1, "f2": 1, "f3": 1, "r": 1})
    if variant == "FWT":
        return CostModel("FWT", {"r": 1, "f1": 48, "p1": 48, "f2": 5, "p3": 5, "f3": 5, "f4": 5})
    if variant == "PWT":
        base = cost_model("FWT").weights
        w = {k: 2 * v for k, v in base.items()}
        return CostModel("PWT", w)
    raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class PwtVariant:
    """Changes from FWT: the S of the leftmost strip starts the M-simulating
    machine, every other weight is doubled."""

    problem: OracleProblem
    translation: tuple = ((LEFT + " S", LEFT + " (q_s1/S)"), ("X S", "X (q_s2/S)"))
    leftmost_rejection: int = 1
    other_rejection: int = 2
    fault_factor: int = 2

    def leftmost_cost(self, x: str, z: str) -> int:
        return self.leftmost_rejection * int(self.problem.accepts(x, z))


def pwt_variant(problem: OracleProblem) -> PwtVariant:
    return PwtVariant(problem)
