"""Weighted tiling substrate: alphabets, grids, cost evaluation and the
square-to-pair compiler.

Rows are indexed bottom-up (row 0 is the bottom row).  Vertical costs are
keyed ``(upper, lower)``; square costs are keyed ``(nw, ne, sw, se)``.
Missing entries cost 0.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

CORNERS = ("nw", "ne", "sw", "se")
_DENSE_SQUARE_LIMIT = 1 << 22


class TilingError(Exception):
    pass


class AlphabetError(TilingError):
    pass


class DimensionError(TilingError):
    pass


class CompileError(TilingError):
    pass


class CapacityError(TilingError):
    """Raised when a search would exceed its configured state budget."""


@dataclass(frozen=True)
class Tile:
    name: str
    layers: tuple[str, ...] = ()
    border: bool = False

    def __post_init__(self):
        if self.border and self.layers:
            raise AlphabetError(f"border tile {self.name!r} cannot carry layer ids")


class TileRuleSet:
    """Tile alphabet plus pair, square and corner costs.

    ``corners`` is a decomposable square term: a tile at a given corner of a
    2x2 square adds a fixed amount to that square, whatever else is in it.
    """

    def __init__(
        self,
        tiles: Sequence[Tile | str],
        horizontal: Mapping[tuple[str, str], int] | None = None,
        vertical: Mapping[tuple[str, str], int] | None = None,
        squares: Mapping[tuple[str, str, str, str], int] | None = None,
        corners: Mapping[tuple[str, str], int] | None = None,
        layer_count: int | None = None,
    ):
        self.tiles = tuple(t if isinstance(t, Tile) else Tile(t) for t in tiles)
        if not self.tiles:
            raise AlphabetError("empty tile alphabet")
        self.index = {t.name: i for i, t in enumerate(self.tiles)}
        if len(self.index) != len(self.tiles):
            raise AlphabetError("duplicate tile names")
        if layer_count is None:
            layer_count = max((len(t.layers) for t in self.tiles), default=0) or 1
        self.layer_count = layer_count
        for t in self.tiles:
            if not t.border and t.layers and len(t.layers) != layer_count:
                raise AlphabetError(f"tile {t.name!r} has {len(t.layers)} layer ids, expected {layer_count}")

        self.horizontal = self._ids(horizontal, 2)
        self.vertical = self._ids(vertical, 2)
        self.squares = self._ids(squares, 4)
        self.corners: dict[tuple[str, int], int] = {}
        for (pos, name), cost in (corners or {}).items():
            if pos not in CORNERS:
                raise AlphabetError(f"unknown corner {pos!r}")
            if cost:
                self.corners[(pos, self.id(name))] = int(cost)
        self._dense = None

    def _ids(self, table, arity):
        out = {}
        for key, cost in (table or {}).items():
            if len(key) != arity:
                raise AlphabetError(f"cost key {key!r} should have {arity} tiles")
            if cost:
                out[tuple(self.id(k) for k in key)] = int(cost)
        return out

    @property
    def d(self) -> int:
        return len(self.tiles)

    def id(self, tile: str | int) -> int:
        if isinstance(tile, (int, np.integer)):
            if 0 <= tile < self.d:
                return int(tile)
            raise AlphabetError(f"tile id {tile} outside alphabet of size {self.d}")
        try:
            return self.index[tile]
        except KeyError:
            raise AlphabetError(f"unknown tile {tile!r}") from None

    def name(self, i: int) -> str:
        return self.tiles[i].name

    def has_squares(self) -> bool:
        return bool(self.squares or self.corners)

    def has_pairs(self) -> bool:
        return bool(self.horizontal or self.vertical)

    def max_abs_cost(self) -> int:
        vals = [abs(v) for v in itertools.chain(self.horizontal.values(), self.vertical.values())]
        vals.append(self.max_abs_square())
        return max(vals, default=0)

    def max_abs_square(self) -> int:
        """Largest |square cost| once corner terms are folded in."""
        dense = self.dense()
        if dense["S"] is not None:
            return int(np.abs(dense["S"]).max())
        cmax = sum(max((abs(v) for (p, _), v in self.corners.items() if p == pos), default=0) for pos in CORNERS)
        return max((abs(v) for v in self.squares.values()), default=0) + cmax

    def dense(self) -> dict:
        """Numpy views of the cost tables (square table only when small enough)."""
        if self._dense is None:
            d = self.d
            H = np.zeros((d, d), dtype=np.int64)
            V = np.zeros((d, d), dtype=np.int64)
            for (a, b), c in self.horizontal.items():
                H[a, b] = c
            for (a, b), c in self.vertical.items():
                V[a, b] = c
            C = np.zeros((4, d), dtype=np.int64)
            for (pos, t), c in self.corners.items():
                C[CORNERS.index(pos), t] = c
            S = None
            if d**4 <= _DENSE_SQUARE_LIMIT:
                S = np.zeros((d, d, d, d), dtype=np.int64)
                for key, c in self.squares.items():
                    S[key] = c
                S += C[0][:, None, None, None] + C[1][None, :, None, None]
                S += C[2][None, None, :, None] + C[3][None, None, None, :]
            self._dense = {"H": H, "V": V, "S": S, "C": C}
        return self._dense

    def square_cost(self, nw: int, ne: int, sw: int, se: int) -> int:
        c = self.squares.get((nw, ne, sw, se), 0)
        if self.corners:
            for pos, t in zip(CORNERS, (nw, ne, sw, se)):
                c += self.corners.get((pos, t), 0)
        return c

    # -- serialization --------------------------------------------------
    def to_json(self) -> dict:
        n = self.name
        return {
            "tiles": [{"name": t.name, "layers": list(t.layers), "border": t.border} for t in self.tiles],
            "horizontal": [[n(a), n(b), c] for (a, b), c in sorted(self.horizontal.items())],
            "vertical": [[n(a), n(b), c] for (a, b), c in sorted(self.vertical.items())],
            "squares": [[[n(k) for k in key], c] for key, c in sorted(self.squares.items())],
            "corners": [[pos, n(t), c] for (pos, t), c in sorted(self.corners.items())],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "TileRuleSet":
        tiles = [
            Tile(t["name"], tuple(t.get("layers", ())), bool(t.get("border", False))) if isinstance(t, Mapping) else Tile(t)
            for t in doc["tiles"]
        ]
        return cls(
            tiles,
            horizontal={(a, b): c for a, b, c in doc.get("horizontal", [])},
            vertical={(a, b): c for a, b, c in doc.get("vertical", [])},
            squares={tuple(k): c for k, c in doc.get("squares", [])},
            corners={(p, t): c for p, t, c in doc.get("corners", [])},
        )


@dataclass(frozen=True)
class GridTiling:
    """An assignment of tile ids to a ``height x width`` grid, rows bottom-up."""

    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        widths = {len(r) for r in self.cells}
        if len(widths) > 1:
            raise DimensionError("ragged grid")

    @classmethod
    def of(cls, rows: Iterable[Iterable[int]]) -> "GridTiling":
        return cls(tuple(tuple(int(c) for c in r) for r in rows))

    @classmethod
    def from_names(cls, rules: TileRuleSet, rows: Iterable[Iterable[str]]) -> "GridTiling":
        return cls(tuple(tuple(rules.id(c) for c in r) for r in rows))

    @property
    def height(self) -> int:
        return len(self.cells)

    @property
    def width(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    @property
    def n(self) -> int:
        if self.height != self.width:
            raise DimensionError("grid is not square")
        return self.height

    def array(self) -> np.ndarray:
        return np.asarray(self.cells, dtype=np.int64).reshape(self.height, self.width)

    def replace(self, row: int, col: int, tile: int) -> "GridTiling":
        cells = [list(r) for r in self.cells]
        cells[row][col] = tile
        return GridTiling.of(cells)

    def to_json(self, rules: TileRuleSet) -> dict:
        return {"n": self.height, "width": self.width, "rows": [[rules.name(c) for c in r] for r in self.cells]}

    @classmethod
    def from_json(cls, rules: TileRuleSet, doc: Mapping) -> "GridTiling":
        return cls.from_names(rules, doc["rows"])


def _check(rules: TileRuleSet, tiling: GridTiling) -> np.ndarray:
    if tiling.height < 2 or tiling.width < 2:
        raise DimensionError(f"tiling is {tiling.height}x{tiling.width}; need at least 2x2")
    g = tiling.array()
    if g.min() < 0 or g.max() >= rules.d:
        raise AlphabetError("tiling uses a tile id outside the alphabet")
    return g


def evaluate_tiling(rules, tiling: GridTiling) -> int:
    """Total cost of ``tiling``: all horizontal pairs, vertical pairs and squares.

    Rule objects that carry their own ``evaluate`` (the layered cost models)
    are dispatched to it.
    """
    if not isinstance(rules, TileRuleSet):
        return rules.evaluate(tiling)
    g = _check(rules, tiling)
    dense = rules.dense()
    total = int(dense["H"][g[:, :-1], g[:, 1:]].sum())
    total += int(dense["V"][g[1:, :], g[:-1, :]].sum())
    nw, ne, sw, se = g[1:, :-1], g[1:, 1:], g[:-1, :-1], g[:-1, 1:]
    if dense["S"] is not None:
        total += int(dense["S"][nw, ne, sw, se].sum())
    else:
        C = dense["C"]
        total += int(C[0][nw].sum() + C[1][ne].sum() + C[2][sw].sum() + C[3][se].sum())
        sq = rules.squares
        if sq:
            for key in zip(nw.ravel().tolist(), ne.ravel().tolist(), sw.ravel().tolist(), se.ravel().tolist()):
                total += sq.get(key, 0)
    return total


def relabel(rules: TileRuleSet, perm: Sequence[int]) -> TileRuleSet:
    """Rename tile ``i`` to position ``perm[i]``; costs follow their tiles."""
    d = rules.d
    inv = [0] * d
    for i, p in enumerate(perm):
        inv[p] = i
    tiles = [rules.tiles[inv[j]] for j in range(d)]
    nm = rules.name
    return TileRuleSet(
        tiles,
        horizontal={(nm(a), nm(b)): c for (a, b), c in rules.horizontal.items()},
        vertical={(nm(a), nm(b)): c for (a, b), c in rules.vertical.items()},
        squares={tuple(nm(k) for k in key): c for key, c in rules.squares.items()},
        corners={(p, nm(t)): c for (p, t), c in rules.corners.items()},
        layer_count=rules.layer_count,
    )


# ---------------------------------------------------------------------------
# square -> pair compiler


class CompiledRules:
    """Pair-only rules over combined tiles ``[a,b]`` (a left of b).

    An original ``height x width`` tiling corresponds to a compiled
    ``height x (width-1)`` tiling whose cell ``(r, c)`` holds
    ``[t(r,c), t(r,c+1)]``.  A vertical pair of combined tiles carries the cost
    of the square it spans; a horizontal pair whose shared component
    disagrees costs ``penalty``.
    """

    def __init__(self, base: TileRuleSet, rules: TileRuleSet, penalty: int, height: int, width: int):
        self.base = base
        self.rules = rules
        self.penalty = penalty
        self.height = height
        self.width = width

    def combined_id(self, a: int, b: int) -> int:
        return a * self.base.d + b

    def split(self, c: int) -> tuple[int, int]:
        return divmod(c, self.base.d)

    def encode(self, tiling: GridTiling) -> GridTiling:
        return GridTiling.of(
            [[self.combined_id(r[c], r[c + 1]) for c in range(len(r) - 1)] for r in tiling.cells]
        )

    def decode(self, tiling: GridTiling) -> GridTiling | None:
        """The original tiling, or None when the compiled tiling is inconsistent."""
        rows = []
        for r in tiling.cells:
            parts = [self.split(c) for c in r]
            if any(parts[i][1] != parts[i + 1][0] for i in range(len(parts) - 1)):
                return None
            rows.append([p[0] for p in parts] + [parts[-1][1]])
        return GridTiling.of(rows)


def compile_squares_to_pairs(rules: TileRuleSet, height: int = 3, width: int = 3) -> TileRuleSet | CompiledRules:
    """Rewrite square constraints as vertical pair constraints on combined tiles.

    A pair-only input is already in the target form and is returned unchanged.
    ``height x width`` is the original grid the penalty is sized for.
    """
    if not rules.has_squares():
        return rules
    if rules.has_pairs():
        raise CompileError(
            "inputs mixing pair and square costs have no exact pair-only form on a free-boundary grid; "
            "fold the pair costs into square costs first"
        )
    if width < 2 or height < 1:
        raise DimensionError("compiled grid needs width >= 2")
    d = rules.d
    S = rules.dense()["S"]
    if S is None:
        raise CapacityError(f"alphabet of {d} tiles is too large to compile")
    cw = width - 1
    n_constraints = max(1, (height - 1) * cw + height * max(cw - 1, 0))
    m = int(np.abs(S).max())
    penalty = 1 + m * n_constraints if S.min() >= 0 else 1 + 2 * m * n_constraints

    names = [rules.name(i) for i in range(d)]
    tiles = [Tile(f"[{a},{b}]") for a in names for b in names]
    comb = lambda a, b: tiles[a * d + b].name
    vertical = {}
    horizontal = {}
    for a, b, c, e in itertools.product(range(d), repeat=4):
        cost = int(S[a, b, c, e])
        if cost:
            vertical[(comb(a, b), comb(c, e))] = cost
    for a, b, c, e in itertools.product(range(d), repeat=4):
        if b != c:
            horizontal[(comb(a, b), comb(c, e))] = penalty
    out = TileRuleSet(tiles, horizontal=horizontal, vertical=vertical)
    return CompiledRules(rules, out, penalty, height, width)


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
