"""Turing machines, a reference stepper, and the compiler from transition
rules to legal 2x2 computation squares.

Rules are a dict ``(state, read) -> (next_state, write, move)`` with move in
``"L"``, ``"R"``, ``"S"``.  A head tile is the tuple ``(state, symbol)``; a
tape tile is the bare symbol.  ``BORDER`` is the frame tile: it behaves as a
read-only tape symbol that a head can never sit on.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

BORDER = "□"
MOVES = ("L", "R", "S")
SEP = "~"


class NormalizationError(ValueError):
    pass


class Halt:
    """Returned by ``tm_step`` when no rule applies."""

    def __init__(self, cfg, reason):
        self.cfg = cfg
        self.reason = reason

    def __repr__(self):
        return f"Halt({self.reason})"


HALT_UNDEFINED = "undefined"
HALT_OFF_TAPE = "off-tape"


class TuringMachine:
    def __init__(
        self,
        states: Iterable[str],
        alphabet: Iterable[str],
        rules: Mapping[tuple[str, str], tuple[str, str, str]],
        blank: str = "#",
        direction: str = "up",
        weights: Mapping[str, int] | None = None,
        start: str | None = None,
    ):
        self.states = tuple(states)
        self.alphabet = tuple(alphabet)
        self.blank = blank
        self.rules = dict(rules)
        self.direction = direction
        self.weights = dict(weights or {})
        self.start = start
        if direction not in ("up", "down"):
            raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
        if blank not in self.alphabet:
            raise ValueError(f"blank {blank!r} not in alphabet")
        sset, aset = set(self.states), set(self.alphabet)
        for (q, a), (p, b, m) in self.rules.items():
            if q not in sset or p not in sset:
                raise ValueError(f"rule {(q, a)} uses an undeclared state")
            if a not in aset or b not in aset:
                raise ValueError(f"rule {(q, a)} uses an undeclared symbol")
            if m not in MOVES:
                raise ValueError(f"rule {(q, a)} has bad move {m!r}")

    def __repr__(self):
        return f"TuringMachine({len(self.states)} states, {len(self.alphabet)} symbols, {len(self.rules)} rules)"

    def arrival_moves(self) -> dict[str, set[str]]:
        """For each state, the set of moves by which rules enter it."""
        seen = {q: set() for q in self.states}
        for p, _, m in self.rules.values():
            seen[p].add(m)
        return seen

    def is_normalized(self) -> bool:
        return all(len(ms) <= 1 for ms in self.arrival_moves().values())

    def head_tiles(self):
        return [(q, a) for q in self.states for a in self.alphabet]

    def to_json(self) -> dict:
        return {
            "states": list(self.states),
            "alphabet": list(self.alphabet),
            "blank": self.blank,
            "direction": self.direction,
            "start": self.start,
            "rules": [
                {"state": q, "read": a, "write": b, "next": p, "move": m}
                for (q, a), (p, b, m) in sorted(self.rules.items())
            ],
            "weights": self.weights,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "TuringMachine":
        rules = {(r["state"], r["read"]): (r["next"], r["write"], r["move"]) for r in doc.get("rules", [])}
        return cls(
            doc["states"],
            doc["alphabet"],
            rules,
            blank=doc.get("blank", "#"),
            direction=doc.get("direction", "up"),
            weights=doc.get("weights"),
            start=doc.get("start"),
        )

    @classmethod
    def load(cls, path) -> "TuringMachine":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class TmConfiguration:
    tape: tuple[str, ...]
    head: int
    state: str

    def row(self) -> tuple:
        """Tiles of the configuration, head tile as ``(state, symbol)``."""
        return tuple((self.state, s) if i == self.head else s for i, s in enumerate(self.tape))

    @classmethod
    def from_row(cls, row) -> "TmConfiguration":
        heads = [i for i, t in enumerate(row) if isinstance(t, tuple)]
        if len(heads) != 1:
            raise ValueError(f"row has {len(heads)} heads")
        h = heads[0]
        tape = tuple(t[1] if isinstance(t, tuple) else t for t in row)
        return cls(tape, h, row[h][0])


def tm_step(tm: TuringMachine, cfg: TmConfiguration) -> TmConfiguration | Halt:
    sym = cfg.tape[cfg.head]
    rule = tm.rules.get((cfg.state, sym))
    if rule is None:
        return Halt(cfg, HALT_UNDEFINED)
    nxt, write, move = rule
    tape = list(cfg.tape)
    tape[cfg.head] = write
    head = cfg.head + {"L": -1, "R": 1, "S": 0}[move]
    if head < 0:
        return Halt(cfg, HALT_OFF_TAPE)
    if head == len(tape):
        tape.append(tm.blank)
    return TmConfiguration(tuple(tape), head, nxt)


def run(tm: TuringMachine, cfg: TmConfiguration, steps: int) -> list:
    """Configurations after 0..steps steps; stops early at a Halt."""
    out = [cfg]
    for _ in range(steps):
        cfg = tm_step(tm, cfg)
        if isinstance(cfg, Halt):
            break
        out.append(cfg)
    return out


def normalize_direction_uniqueness(tm: TuringMachine) -> TuringMachine:
    """Split every state entered by several moves into one copy per move.

    Rules entering ``q`` with move ``m`` are redirected to ``q~m``; each copy
    inherits all of ``q``'s outgoing rules.  The start state keeps its
    original name as an extra copy when it is split.
    """
    arrivals = tm.arrival_moves()
    split = {q: sorted(ms) for q, ms in arrivals.items() if len(ms) > 1}
    if not split:
        return tm

    def target(p, m):
        return f"{p}{SEP}{m}" if p in split else p

    copies = {}
    for q in tm.states:
        if q in split:
            names = [f"{q}{SEP}{m}" for m in split[q]]
            if q == tm.start:
                names.insert(0, q)
            copies[q] = names
        else:
            copies[q] = [q]
    rules = {}
    for (q, a), (p, b, m) in tm.rules.items():
        for c in copies[q]:
            rules[(c, a)] = (target(p, m), b, m)
    states = [c for q in tm.states for c in copies[q]]
    return TuringMachine(states, tm.alphabet, rules, tm.blank, tm.direction, tm.weights, tm.start)


# ---------------------------------------------------------------------------
# computation squares; a square is (nw, ne, sw, se)


def _flip(sq):
    nw, ne, sw, se = sq
    return (sw, se, nw, ne)


def compile_tm_to_squares(tm: TuringMachine, require_normalized: bool = True) -> frozenset:
    """All legal computation squares for ``tm``; every other square is illegal.

    For a top-down machine the rows of each square are swapped.
    """
    if require_normalized and not tm.is_normalized():
        raise NormalizationError("machine has a state entered from more than one direction")
    gamma = tm.alphabet
    framed = gamma + (BORDER,)
    legal = set()
    for y1, y2 in itertools.product(framed, repeat=2):
        legal.add((y1, y2, y1, y2))
    for (q0, a), (q1, b, m) in tm.rules.items():
        h0 = (q0, a)
        if m == "L":
            for x in gamma:
                legal.add(((q1, x), b, x, h0))
            for y in framed:
                legal.add((b, y, h0, y))
                for x in gamma:
                    legal.add((y, (q1, x), y, x))
        elif m == "R":
            for x in gamma:
                legal.add((b, (q1, x), h0, x))
            for y in framed:
                legal.add((y, b, y, h0))
                for x in gamma:
                    legal.add(((q1, x), y, x, y))
        else:
            for x in framed:
                legal.add(((q1, b), x, h0, x))
                legal.add((x, (q1, b), x, h0))
    if tm.direction == "down":
        legal = {_flip(s) for s in legal}
    return frozenset(legal)


def _is_head(t):
    return isinstance(t, tuple)


def square_legal(tm: TuringMachine, square) -> bool:
    """Case-analysis legality test, written independently of the generator."""
    if tm.direction == "down":
        square = _flip(square)
    nw, ne, sw, se = square
    top_heads = _is_head(nw) + _is_head(ne)
    bottom_heads = _is_head(sw) + _is_head(se)
    if top_heads > 1 or bottom_heads > 1:
        return False
    tape = set(tm.alphabet)
    for t in square:
        if _is_head(t):
            if t[1] not in tape:
                return False
        elif t != BORDER and t not in tape:
            return False

    if bottom_heads:
        head_left = _is_head(sw)
        q0, a = sw if head_left else se
        rule = tm.rules.get((q0, a))
        if rule is None:
            return False
        q1, b, m = rule
        if head_left:
            other = se
            if _is_head(other):
                return False
            if m == "L":
                return nw == b and ne == other
            if m == "R":
                return nw == b and other != BORDER and ne == (q1, other)
            return nw == (q1, b) and ne == other
        other = sw
        if m == "L":
            return other != BORDER and nw == (q1, other) and ne == b
        if m == "R":
            return nw == other and ne == b
        return nw == other and ne == (q1, b)

    arrivals = tm.arrival_moves()
    if _is_head(nw):
        q, x = nw
        return "R" in arrivals.get(q, ()) and sw == x and ne == se
    if _is_head(ne):
        q, x = ne
        return "L" in arrivals.get(q, ()) and se == x and nw == sw
    return nw == sw and ne == se


def illegal_squares(legal: frozenset, lower, upper) -> list[int]:
    """Columns ``i`` whose square over columns (i, i+1) is not legal."""
    return [
        i for i in range(len(lower) - 1)
        if (upper[i], upper[i + 1], lower[i], lower[i + 1]) not in legal
    ]


def framed_row(cfg: TmConfiguration, width: int, blank: str = "#") -> tuple:
    """Configuration padded with blanks to ``width`` tape cells and framed by borders."""
    row = list(cfg.row())
    if len(row) > width:
        raise ValueError("configuration wider than frame")
    row += [blank] * (width - len(row))
    return (BORDER, *row, BORDER)


def head_name(tile) -> str:
    return f"{tile[0]}/{tile[1]}" if _is_head(tile) else tile


def tm_to_rule_set(tm: TuringMachine, illegal_cost: int = 1, require_normalized: bool = True):
    """Tile rules whose zero-cost squares are exactly the legal computation squares.

    Tiles are the tape symbols, the head tiles ``q/a`` and the border; every
    other square costs ``illegal_cost``.
    """
    from .core import CapacityError, Tile, TileRuleSet

    legal = compile_tm_to_squares(tm, require_normalized)
    tiles = list(tm.alphabet) + [(q, a) for q in tm.states for a in tm.alphabet] + [BORDER]
    if len(tiles) ** 4 > 1 << 22:
        raise CapacityError(f"{len(tiles)} tiles give too many squares to list")
    squares = {
        tuple(head_name(t) for t in sq): illegal_cost
        for sq in itertools.product(tiles, repeat=4) if sq not in legal
    }
    names = [Tile(head_name(t), border=t == BORDER) for t in tiles]
    return TileRuleSet(names, squares=squares)
