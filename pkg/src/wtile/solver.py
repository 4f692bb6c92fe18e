"""Exact minimum-cost tiling of small grids.

``solve_dp`` is the transfer method: a row is a state, adjacent rows are
connected by the vertical pair and square costs between them.  Row states
are packed integers with the leftmost column as the most significant digit,
so index order is lexicographic order.  ``solve_exhaustive`` enumerates every
tiling and serves as the oracle.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np

from .core import CapacityError, DimensionError, GridTiling, TileRuleSet

DEFAULT_BUDGET = 20_000_000
DENSE_LIMIT = 4096  # row states up to which the transfer matrix is stored
_BATCH = 1 << 16


def budget_from_env(default: int = DEFAULT_BUDGET) -> int:
    raw = os.environ.get("TI_TILE_BUDGET")
    return int(raw) if raw else default


@dataclass
class SolverResult:
    min_cost: int
    witness: GridTiling | None
    explored_states: int

    def to_json(self, rules: TileRuleSet) -> dict:
        return {
            "min_cost": self.min_cost,
            "witness": self.witness.to_json(rules) if self.witness is not None else None,
            "explored_states": self.explored_states,
        }


def _dims(height: int, width: int):
    if height < 1 or width < 1:
        raise DimensionError(f"grid must be at least 1x1, got {height}x{width}")


def _row_states(d: int, width: int) -> np.ndarray:
    """All rows as an (d**width, width) array in lexicographic order."""
    idx = np.arange(d**width, dtype=np.int64)
    cols = [(idx // d ** (width - 1 - c)) % d for c in range(width)]
    return np.stack(cols, axis=1)


def _row_costs(rules: TileRuleSet, rows: np.ndarray) -> np.ndarray:
    H = rules.dense()["H"]
    if rows.shape[1] < 2:
        return np.zeros(len(rows), dtype=np.int64)
    return H[rows[:, :-1], rows[:, 1:]].sum(axis=1)


def _transfer(rules: TileRuleSet, upper: np.ndarray, lower: np.ndarray) -> np.ndarray:
    """Cost matrix [u, l] of placing row ``upper[u]`` directly above ``lower[l]``."""
    dense = rules.dense()
    V, S, C = dense["V"], dense["S"], dense["C"]
    out = np.zeros((len(upper), len(lower)), dtype=np.int64)
    w = upper.shape[1]
    for c in range(w):
        out += V[upper[:, c][:, None], lower[:, c][None, :]]
    for c in range(w - 1):
        nw, ne = upper[:, c][:, None], upper[:, c + 1][:, None]
        sw, se = lower[:, c][None, :], lower[:, c + 1][None, :]
        if S is not None:
            out += S[nw, ne, sw, se]
        else:
            out += C[0][nw] + C[1][ne] + C[2][sw] + C[3][se]
            for (a, b, e, f), cost in rules.squares.items():
                out += cost * (((nw == a) & (ne == b)) & ((sw == e) & (se == f)))
    return out


def solve_dp(rules: TileRuleSet, height: int, width: int, budget: int | None = None,
             witness: bool = True) -> SolverResult:
    """Exact minimum over all ``height x width`` tilings by row transfer."""
    _dims(height, width)
    budget = budget_from_env() if budget is None else budget
    d = rules.d
    if d**width > budget:
        raise CapacityError(f"{d}^{width} row states exceed the state budget of {budget}")
    rows = _row_states(d, width)
    ns = len(rows)
    rc = _row_costs(rules, rows)
    dense = ns <= DENSE_LIMIT
    T = _transfer(rules, rows, rows) if dense else None
    best = rc.copy()
    back = []
    explored = ns
    for _ in range(1, height):
        if dense:
            tot = T + best[None, :]
            arg = tot.argmin(axis=1)
            new = tot[np.arange(ns), arg] + rc
        else:
            arg = np.empty(ns, dtype=np.int64)
            new = np.empty(ns, dtype=np.int64)
            step = max(1, DENSE_LIMIT * DENSE_LIMIT // ns)
            for u0 in range(0, ns, step):
                tot = _transfer(rules, rows[u0:u0 + step], rows) + best[None, :]
                a = tot.argmin(axis=1)
                arg[u0:u0 + step] = a
                new[u0:u0 + step] = tot[np.arange(len(a)), a] + rc[u0:u0 + step]
        explored += ns * ns
        if witness:
            back.append(arg)
        best = new
    top = int(best.argmin())
    cost = int(best[top])
    if not witness:
        return SolverResult(cost, None, explored)
    chosen = [top]
    for arg in reversed(back):
        chosen.append(int(arg[chosen[-1]]))
    chosen.reverse()
    grid = GridTiling.of(rows[i].tolist() for i in chosen)
    return SolverResult(cost, grid, explored)


def _grid_costs(rules: TileRuleSet, g: np.ndarray) -> np.ndarray:
    """Costs of a batch of grids shaped (batch, height, width)."""
    dense = rules.dense()
    H, V, S, C = dense["H"], dense["V"], dense["S"], dense["C"]
    total = H[g[:, :, :-1], g[:, :, 1:]].sum(axis=(1, 2))
    total = total + V[g[:, 1:, :], g[:, :-1, :]].sum(axis=(1, 2))
    if g.shape[1] > 1 and g.shape[2] > 1:
        nw, ne, sw, se = g[:, 1:, :-1], g[:, 1:, 1:], g[:, :-1, :-1], g[:, :-1, 1:]
        if S is not None:
            total = total + S[nw, ne, sw, se].sum(axis=(1, 2))
        else:
            total = total + (C[0][nw] + C[1][ne] + C[2][sw] + C[3][se]).sum(axis=(1, 2))
            for (a, b, e, f), cost in rules.squares.items():
                total = total + cost * (((nw == a) & (ne == b) & (sw == e) & (se == f)).sum(axis=(1, 2)))
    return total


def solve_exhaustive(rules: TileRuleSet, height: int, width: int, budget: int | None = None) -> SolverResult:
    """Exact minimum by enumerating every tiling (first minimiser is returned)."""
    _dims(height, width)
    budget = budget_from_env() if budget is None else budget
    d, cells = rules.d, height * width
    if d**cells > budget:
        raise CapacityError(f"{d}^{cells} tilings exceed the enumeration budget of {budget}")
    count = d**cells
    best, best_idx = None, None
    for start in range(0, count, _BATCH):
        idx = np.arange(start, min(count, start + _BATCH), dtype=np.int64)
        flat = np.stack([(idx // d ** (cells - 1 - k)) % d for k in range(cells)], axis=1)
        costs = _grid_costs(rules, flat.reshape(-1, height, width))
        i = int(costs.argmin())
        if best is None or costs[i] < best:
            best, best_idx = int(costs[i]), flat[i]
    grid = GridTiling.of(best_idx.reshape(height, width).tolist())
    return SolverResult(best, grid, count)


def flip_rules(rules: TileRuleSet) -> TileRuleSet:
    """The same constraints seen with the grid upside down."""
    n = rules.name
    swap = {"nw": "sw", "ne": "se", "sw": "nw", "se": "ne"}
    return TileRuleSet(
        rules.tiles,
        horizontal={(n(a), n(b)): c for (a, b), c in rules.horizontal.items()},
        vertical={(n(b), n(a)): c for (a, b), c in rules.vertical.items()},
        squares={(n(sw), n(se), n(nw), n(ne)): c for (nw, ne, sw, se), c in rules.squares.items()},
        corners={(swap[p], n(t)): c for (p, t), c in rules.corners.items()},
        layer_count=rules.layer_count,
    )


# ---------------------------------------------------------------------------
# threshold decisions


class Decision(enum.Enum):
    BELOW = "Below"
    AT_OR_ABOVE = "AtOrAbove"


def threshold_decide(rules: TileRuleSet, n: int, tau: int) -> Decision:
    """Below iff the minimum cost of the ``n x n`` grid is at most ``tau``."""
    return Decision.BELOW if solve_dp(rules, n, n, witness=False).min_cost <= tau else Decision.AT_OR_ABOVE


def cost_range(rules: TileRuleSet, height: int, width: int) -> tuple[int, int]:
    """Bounds on any tiling's cost from the smallest and largest table entries."""
    dense = rules.dense()
    H, V = dense["H"], dense["V"]
    if dense["S"] is not None:
        smin, smax = int(dense["S"].min()), int(dense["S"].max())
    else:
        C = dense["C"]
        vals = list(rules.squares.values()) + [0]
        smin = min(vals) + int(C.min(axis=1).sum())
        smax = max(vals) + int(C.max(axis=1).sum())
    nh, nv, ns = height * (width - 1), (height - 1) * width, (height - 1) * (width - 1)
    lo = nh * int(H.min()) + nv * int(V.min()) + ns * smin
    hi = nh * int(H.max()) + nv * int(V.max()) + ns * smax
    return lo, hi


class CountingOracle:
    """Threshold oracle for one instance that counts its calls."""

    def __init__(self, rules: TileRuleSet, n: int):
        self.rules, self.n = rules, n
        self.calls = 0
        self._value = None

    def __call__(self, tau: int) -> Decision:
        self.calls += 1
        if self._value is None:
            self._value = solve_dp(self.rules, self.n, self.n, witness=False).min_cost
        return Decision.BELOW if self._value <= tau else Decision.AT_OR_ABOVE


def binary_search_min(oracle, lo: int, hi: int) -> int:
    """Smallest ``tau`` in ``[lo, hi]`` answered Below; the minimum must lie in range."""
    while lo < hi:
        mid = (lo + hi) // 2
        if oracle(mid) is Decision.BELOW:
            hi = mid
        else:
            lo = mid + 1
    return lo
