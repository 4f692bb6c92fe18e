"""Fault injection and bound audits for Layer 1 tilings.

Faults are single-cell tile substitutions on the stored tiling.  The audit
recounts illegal pairs and squares, re-derives segments, clean tags and the
potential A, and checks each fault-tolerance inequality on the instance.

An audit of a perturbed tiling can reuse the analysis of the tiling it was
derived from; only rows at or next to a changed row are recomputed, and above
the last changed row the designations are carried forward by index.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import layer1 as L1

UNIFORM, ROW, INTERVAL = "uniform", "row-targeted", "interval-targeted"


@dataclass(frozen=True)
class FaultPlan:
    seed: int
    count: int = 1
    placement: str = UNIFORM
    kind: str = "tile-substitution"
    row: int | None = None  # for row-targeted plans

    def __post_init__(self):
        if self.placement not in (UNIFORM, ROW, INTERVAL):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.kind != "tile-substitution":
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.count < 0:
            raise ValueError("fault count must be non-negative")


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed & (2**64 - 1))))


def _pick_cells(tiling: L1.Layer1Tiling, plan: FaultPlan, rng) -> list[tuple[int, int]]:
    n, w = tiling.n, tiling.width
    cells = set()
    guard = 0
    while len(cells) < plan.count:
        guard += 1
        if guard > 100 * (plan.count + 10):
            raise ValueError("could not place the requested number of faults")
        if plan.placement == UNIFORM:
            cell = (int(rng.integers(1, n - 1)), int(rng.integers(0, w)))
        elif plan.placement == ROW:
            t = plan.row if plan.row is not None else int(rng.integers(1, n - 1))
            active = min(w, len(tiling.row(t)) + 1)
            cell = (t, int(rng.integers(0, active)))
        else:
            t = int(rng.integers(1, n - 1))
            spans = L1.interval_spans(tiling.row(t))
            if not spans:
                continue
            a, b = spans[int(rng.integers(0, len(spans)))]
            cell = (t, int(rng.integers(a, b + 1)))
        cells.add(cell)
    return sorted(cells)


def inject(tiling: L1.Layer1Tiling, plan: FaultPlan) -> L1.Layer1Tiling:
    """Substitute ``plan.count`` cells, each with a different interior tile."""
    rng = rng_for(plan.seed)
    out = tiling
    for t, col in _pick_cells(tiling, plan, rng):
        old = tiling.cell(t, col)
        new = int(rng.integers(1, L1.NT - 1))
        if new >= old:
            new += 1
        out = out.replace(t, col, new)
    return out


def repair_upward(tiling: L1.Layer1Tiling, t0: int) -> L1.Layer1Tiling:
    """Re-derive rows above ``r_t0`` as a locally fault-free continuation.

    A valid row is followed by its successor.  An invalid row is followed by
    the row in which every head with an applicable rule takes its step, all
    other tape tiles are copied, and colored tiles next to a head take the
    color of their side.
    """
    rows = list(tiling.rows)
    w = tiling.width
    for t in range(t0 + 1, tiling.n - 1):
        prev = rows[t - 2]
        ok, _ = L1.is_valid_row(prev, w)
        try:
            rows[t - 1] = L1.next_row(prev, w) if ok else _local_step(prev, w)
        except L1.PreconditionError:
            rows[t - 1] = _local_step(prev, w)
    return L1.Layer1Tiling(tiling.n, rows)


def _local_step(row, w):
    cur = list(L1.padded(row, w))
    out = list(cur)
    tiles = [L1.TILES[c] for c in cur]
    for i, t in enumerate(tiles):
        if not t.is_head:
            continue
        rule = L1.TM.rules.get((t.state, t.symbol))
        if rule is None:
            out[i] = L1.tape_code(t.symbol, "b")
            continue
        q, b, m = rule
        j = i + {"L": -1, "R": 1, "S": 0}[m]
        if not 0 <= j < w:
            out[i] = L1.tape_code(b, "b" if m == "R" else "r")
            continue
        out[i] = L1.tape_code(b, "b" if j > i else "r")
        under = L1.TILES[out[j]] if L1.TILES[out[j]].symbol != L1.BORDER else None
        sym = under.symbol if under else L1.BLANK
        out[j] = L1.head_code(q, sym)
    return L1.canonical(out)


# ---------------------------------------------------------------------------
# analysis


@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    passed: bool
    gated: bool = False
    skipped: bool = False
    row: int | None = None


@dataclass
class AuditReport:
    n: int
    seed: int | None
    F: dict
    h: list
    v: list
    mu: int
    segments: list
    segment_count: int
    complete_count: int
    clean_tags: list
    clean_sizes: list
    missing_sizes: list
    a_final: int
    final_length: int
    bound_checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.bound_checks if not c.skipped)

    def failures(self) -> list[BoundCheck]:
        return [c for c in self.bound_checks if not c.skipped and not c.passed]

    def to_json(self, full: bool = False) -> dict:
        doc = asdict(self)
        doc["passed"] = self.passed
        if not full:
            doc["h"] = {str(t): x for t, x in enumerate(self.h) if x}
            doc["v"] = {str(t): x for t, x in enumerate(self.v) if x}
        return doc


class Layer1Analysis:
    """Per-row costs, validity, end rows and tags of one Layer 1 tiling."""

    def __init__(self, tiling: L1.Layer1Tiling, base: "Layer1Analysis | None" = None):
        self.tiling = tiling
        n = tiling.n
        if base is None or base.tiling.n != n:
            self._full()
        else:
            self._incremental(base)
        self.c = self.h + self.v

    def _full(self):
        t = self.tiling
        self.h, self.v = L1.row_costs(t)
        self.valid = [False] + [bool(x == 0) for x in self.h[1:t.n - 1]] + [False]
        self.end = [False] + [v and L1.is_end_row(r) for v, r in zip(self.valid[1:], t.rows)] + [False]
        self.spans = [None] + [L1.interval_spans(r) for r in t.rows]
        ann = L1.tag_clean_corrupt(t, valid=self.valid)
        self.tags = [None] + [a.tags for a in ann]
        self.follows = [False] * (t.n - 1)
        for i in range(2, t.n - 1):
            if self.valid[i - 1]:
                try:
                    self.follows[i] = L1.next_row(t.rows[i - 2], t.width) == t.rows[i - 1]
                except L1.PreconditionError:
                    pass
        self.carry_from = t.n - 1

    def _incremental(self, base: "Layer1Analysis"):
        t = self.tiling
        n = t.n
        changed = [i for i in range(1, n - 1) if t.rows[i - 1] is not base.tiling.rows[i - 1]
                   and t.rows[i - 1] != base.tiling.rows[i - 1]]
        self.h, self.v = base.h.copy(), base.v.copy()
        self.valid = list(base.valid)
        self.end = list(base.end)
        self.spans = list(base.spans)
        self.follows = list(base.follows)
        if not changed:
            self.tags = list(base.tags)
            self.carry_from = base.carry_from
            self._base = base
            return
        fr = L1._Framer(t)
        for i in changed:
            row = t.rows[i - 1]
            g = fr.framed(row)
            self.h[i] = L1.illegal_pairs(g)
            self.valid[i] = self.h[i] == 0
            self.end[i] = self.valid[i] and L1.is_end_row(row)
            self.spans[i] = L1.interval_spans(row)
        for i in sorted({j for i in changed for j in (i - 1, i) if 0 <= j <= n - 3}):
            if i == 0:
                self.v[0] = L1.illegal_init_squares(fr.framed(t.rows[0]).tolist())
            else:
                self.v[i] = L1.illegal_squares_between(fr.framed(t.rows[i - 1]), fr.framed(t.rows[i]))
        for i in sorted({j for i in changed for j in (i, i + 1) if 2 <= j <= n - 2}):
            self.follows[i] = False
            if self.valid[i - 1]:
                try:
                    self.follows[i] = L1.next_row(t.rows[i - 2], t.width) == t.rows[i - 1]
                except L1.PreconditionError:
                    pass
        lo, hi = min(changed), max(changed) + 1
        seed = None
        if lo > 1:
            seed = L1.IntervalAnnotation(lo - 1, base.spans[lo - 1], base.tags[lo - 1])
        hi = min(hi, n - 2)
        part = L1.Layer1Tiling(n, t.rows[:hi])
        ann = L1.tag_clean_corrupt(part, valid=self.valid, start=lo, seed=seed)
        self.tags = list(base.tags[:lo]) + [a.tags for a in ann]
        self._base = base
        # above row hi every row equals the base row and follows its predecessor
        top = self.tags[hi]
        for i in range(hi + 1, n - 1):
            if not (self.valid[i - 1] and self.follows[i]):
                rest = L1.tag_clean_corrupt(
                    L1.Layer1Tiling(n, t.rows), valid=self.valid, start=i,
                    seed=L1.IntervalAnnotation(i - 1, self.spans[i - 1], self.tags[i - 1]),
                )
                self.tags += [a.tags for a in rest]
                break
            if len(self.spans[i]) == len(top) + 1:
                top = top + [i]
            self.tags.append(top)
        self.carry_from = hi

    # -- derived quantities --------------------------------------------
    def clean_sizes(self, t: int) -> list[int]:
        return [b - a + 1 for (a, b), tag in zip(self.spans[t], self.tags[t]) if tag]

    def a_values(self) -> np.ndarray:
        n = self.tiling.n
        return np.array([0] + [L1.a_value(self.clean_sizes(t)) for t in range(1, n - 1)], dtype=np.int64)

    def segments(self) -> list[L1.Segment]:
        return L1._segments(self.c.tolist(), self.end, self.tiling.n)


def _potential_rhs(c: np.ndarray) -> np.ndarray:
    """3 + 12 c(r_{t-1}) + sum_{j=2}^{t-2} 18 c(r_j) for t = 0 .. n-1."""
    n = len(c)
    rhs = np.full(n, 3, dtype=np.int64)
    cs = np.concatenate([[0], np.cumsum(c)])  # cs[k] = sum c[0..k-1]
    for_t = np.arange(n)
    prev = np.where(for_t >= 1, c[np.maximum(for_t - 1, 0)], 0)
    lo, hi = 2, for_t - 2
    tail = np.where(hi >= lo, cs[np.clip(hi + 1, 0, n)] - cs[lo], 0)
    return rhs + 12 * prev + 18 * tail


def _fast_a_values(an: Layer1Analysis) -> np.ndarray:
    """A(r_t) for every row, vectorised above the last recomputed row."""
    n = an.tiling.n
    hi = an.carry_from
    base = getattr(an, "_base", None)
    a = np.zeros(n, dtype=np.int64)
    for t in range(1, min(hi, n - 2) + 1):
        a[t] = L1.a_value(an.clean_sizes(t))
    if hi >= n - 2 or base is None:
        for t in range(hi + 1, n - 1):
            a[t] = L1.a_value(an.clean_sizes(t))
        return a
    rows = range(hi + 1, n - 1)
    counts = np.array([len(an.spans[t]) for t in rows])
    width = int(counts.max())
    sz = np.zeros((len(counts), width), dtype=np.int64)
    for k, t in enumerate(rows):
        s = an.spans[t]
        sz[k, :len(s)] = [b - x + 1 for x, b in s]
    ref_tags = an.tags[hi]
    drop = [j for j, tag in enumerate(ref_tags) if not tag]
    consistent = all(an.tags[t][: len(ref_tags)] == ref_tags for t in (hi + 1, n - 2))
    if not consistent:
        for t in rows:
            a[t] = L1.a_value(an.clean_sizes(t))
        return a
    comp = np.delete(sz, drop, axis=1) if drop else sz
    cnt = counts - len(drop)
    if comp.shape[1] >= 2:
        d = np.abs(comp[:, :-1] - comp[:, 1:] - 1)
        mask = np.arange(comp.shape[1] - 1)[None, :] < (cnt - 1)[:, None]
        inner = (d * mask).sum(axis=1)
    else:
        inner = np.zeros(len(cnt), dtype=np.int64)
    last = np.where(cnt > 0, np.abs(comp[np.arange(len(cnt)), np.maximum(cnt - 1, 0)] - 2), 0)
    a[hi + 1:n - 1] = np.where(cnt > 0, inner + last, 0)
    return a


def audit(tiling: L1.Layer1Tiling, base: Layer1Analysis | None = None, seed: int | None = None,
          analysis: Layer1Analysis | None = None) -> AuditReport:
    """Recount every Layer 1 quantity and check the fault-tolerance bounds."""
    an = analysis or Layer1Analysis(tiling, base)
    n = tiling.n
    F = int(an.c.sum())
    m = L1.mu(n)
    last = n - 2
    segs = an.segments()
    complete = sum(s.complete for s in segs)
    sizes = an.clean_sizes(last)
    tags = sorted(tag for tag in an.tags[last] if tag)
    missing = sorted(set(range(2, m + 2)) - set(sizes))
    a = _fast_a_values(an)
    rhs = _potential_rhs(an.c)
    length = L1.row_length(tiling.row(last))
    gate = n ** 0.25 / 40
    checks = [
        BoundCheck("complete segments", complete, m - 14 * F, complete >= m - 14 * F),
        BoundCheck("clean intervals", len(sizes), m - 26 * F, len(sizes) >= m - 26 * F),
        BoundCheck("missing sizes", len(missing), 44 * F + 3, len(missing) <= 44 * F + 3),
    ]
    worst = int(np.argmax(a[1:n - 1] - rhs[1:n - 1])) + 1
    checks.append(BoundCheck("potential A", int(a[worst]), int(rhs[worst]),
                             bool((a[1:n - 1] <= rhs[1:n - 1]).all()), row=worst))
    dist_ok, dist_worst = True, None
    lost_ok, lost_worst = True, None
    for t in range(1, n - 2):
        if not an.valid[t]:
            d = L1.row_distance(tiling.row(t), tiling.row(t + 1))
            bound = 4 * int(an.h[t]) + 2 * int(an.v[t])
            if d > bound or dist_worst is None:
                dist_worst = (d, bound, t)
            dist_ok &= d <= bound
    for t in range(1, min(an.carry_from, n - 3) + 1):
        lost = len({x for x in an.tags[t] if x} - {x for x in an.tags[t + 1] if x})
        bound = 12 * int(an.h[t]) + 6 * int(an.v[t])
        if lost > bound or (lost_worst is None and lost):
            lost_worst = (lost, bound, t)
        lost_ok &= lost <= bound
    d, b, r = dist_worst or (0, 0, None)
    checks.append(BoundCheck("row distance", d, b, dist_ok, row=r))
    lo, b, r = lost_worst or (0, 0, None)
    checks.append(BoundCheck("clean intervals lost per row", lo, b, lost_ok, row=r))
    gated = F <= gate
    rhs_seg = 4 * n ** 0.25 + 2 * F
    checks.append(BoundCheck("segment count", len(segs), rhs_seg, len(segs) <= rhs_seg,
                             gated=True, skipped=not gated))
    rhs_len = 9 * n ** 0.5 + 2 * n ** 0.25 + 1
    checks.append(BoundCheck("final row length", length, rhs_len, length <= rhs_len,
                             gated=True, skipped=not gated))
    cad_ok, cad = True, (0, 0, None)
    ends = [t for t in range(1, n - 1) if an.end[t]]
    for s, e in zip(ends, ends[1:]):
        if an.c[s:e + 1].sum() == 0:
            x = L1.x_value([b - a_ + 1 for a_, b in an.spans[s]])
            if e - s != x + 1:
                cad_ok, cad = False, (e - s, x + 1, s)
    checks.append(BoundCheck("end-row cadence b-a = X(r_a)+1", cad[0], cad[1], cad_ok, row=cad[2]))
    return AuditReport(
        n=n, seed=seed, F={"1": F}, h=an.h.tolist(), v=an.v.tolist(), mu=m,
        segments=[(s.first_row, s.last_row, s.complete) for s in segs],
        segment_count=len(segs), complete_count=complete, clean_tags=tags, clean_sizes=sizes,
        missing_sizes=missing, a_final=int(a[last]), final_length=length, bound_checks=checks,
    )


_BASES: dict[int, Layer1Analysis] = {}


def base_analysis(n: int) -> Layer1Analysis:
    if n not in _BASES:
        _BASES[n] = Layer1Analysis(L1.simulate_layer1(n))
    return _BASES[n]


def campaign(n: int, seeds, count: int = 1, placement: str = UNIFORM, repair: bool = False):
    """Audit one injected tiling per seed; yields (seed, report)."""
    base = base_analysis(n)
    for seed in seeds:
        plan = FaultPlan(seed=seed, count=count, placement=placement)
        tiling = inject(base.tiling, plan)
        if repair:
            t0 = min(i for i in range(1, n - 1) if tiling.rows[i - 1] != base.tiling.rows[i - 1]) if count else n
            tiling = repair_upward(tiling, t0)
        yield seed, audit(tiling, base=base, seed=seed)
