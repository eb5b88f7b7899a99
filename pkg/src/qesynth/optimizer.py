"""Worst-case optimization over one scalar parameter, exactly.

Instantiated candidate minimizers become intervals over the cycle-start
volume v0 carrying univariate quadratic costs.  The pointwise minimum of
those costs is assembled as an exact partition: splits occur at region
endpoints and at real intersection points of competing quadratics
(irrational splits are kept as exact quadratic surds), so every cell has
a single dominating cost.  The supremum of the partitioned minimum over
[L, U] is computed in closed form: endpoint values plus the vertex of a
concave piece.  Attainment is tracked through half-open cells, which is
what distinguishes a reachable optimum (z >= c) from a strict bound
(z > c).

The outer search discretizes (L, U) on an exact rational grid, keeps
the minimum with a lexicographic tie-break, and reports every optimal
pair.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .formula import (
    AffineExpr,
    Atom,
    Formula,
    Polyhedron,
    QuadExpr,
    Rel,
    VarId,
    evaluate,
)
from .kkt import KktCandidate
from .rationals import (
    Rat,
    Surd,
    Value,
    cmp_values,
    quad_eval,
    quad_roots,
    rational_between,
    sign_of,
    value_max,
)


class CoverageError(RuntimeError):
    """The candidate regions fail to cover the stable interval."""


class IrrationalOptimumError(RuntimeError):
    """The exact optimum is a quadratic surd, outside the rational result type."""


@dataclass(frozen=True)
class GridSpec:
    """Exact rational lattice lower + k*step, k >= 0, up to upper."""

    lower: Rat
    upper: Rat
    step: Rat

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError("grid step must be positive")

    def points(self) -> list[Rat]:
        out = []
        x = self.lower
        while x <= self.upper:
            out.append(x)
            x += self.step
        return out


@dataclass(frozen=True)
class V0Candidate:
    """A candidate restricted to v0: closed interval, cost, controller."""

    lo: Rat
    hi: Rat
    lo_open: bool
    hi_open: bool
    cost: tuple[Rat, Rat, Rat]
    controller: tuple[tuple[VarId, AffineExpr], ...]
    index: int

    def contains(self, x: Value) -> bool:
        c_lo = cmp_values(x, self.lo)
        c_hi = cmp_values(x, self.hi)
        if c_lo < 0 or (c_lo == 0 and self.lo_open):
            return False
        if c_hi > 0 or (c_hi == 0 and self.hi_open):
            return False
        return True

    def cost_at(self, x: Value) -> Value:
        a, b, c = self.cost
        return quad_eval(a, b, c, x)

    def tie_key(self) -> tuple:
        return tuple(
            (v, e.coeffs, e.const.numerator, e.const.denominator)
            for v, e in self.controller
        )


@dataclass(frozen=True)
class PartitionCell:
    """One interval of the partition with its dominating cost/controller."""

    lo: Value
    hi: Value
    lo_open: bool
    hi_open: bool
    cost: QuadExpr
    controller: tuple[tuple[VarId, AffineExpr], ...]
    candidate_index: int = -1

    def cost_coeffs(self, v0: VarId = "v0") -> tuple[Rat, Rat, Rat]:
        return self.cost.univariate(v0)


def _univariate_quad(cost: tuple[Rat, Rat, Rat], v0: VarId) -> QuadExpr:
    a, b, c = cost
    return QuadExpr(
        ((v0, v0, a),) if a != 0 else (),
        AffineExpr(((v0, b),) if b != 0 else (), c),
    )


# ---------------------------------------------------------------------------
# Candidate instantiation at numeric (L, U)
# ---------------------------------------------------------------------------


def instantiate_candidates(
    candidates: Sequence[KktCandidate],
    L: Rat,
    U: Rat,
    *,
    v0: VarId = "v0",
    lname: VarId = "L",
    uname: VarId = "U",
) -> list[V0Candidate]:
    """Substitute numeric (L, U) and reduce each region to a v0-interval."""
    point = {lname: L, uname: U}
    out: list[V0Candidate] = []
    for idx, cand in enumerate(candidates):
        lo: Rat | None = None
        hi: Rat | None = None
        lo_open = hi_open = False
        ok = True
        for atom in cand.region.atoms:
            expr = atom.expr
            coeff = expr.coeff(v0)
            rest = expr - AffineExpr(((v0, coeff),) if coeff else ())
            val = rest.evaluate(point)
            if coeff == 0:
                if not atom.rel.holds(val):
                    ok = False
                    break
                continue
            # coeff*v0 + val REL 0
            bound = -val / coeff
            rel = atom.rel
            if coeff < 0:
                rel = rel.flipped()
            if rel is Rel.EQ:
                if (lo is None or bound >= lo) and (hi is None or bound <= hi):
                    lo = hi = bound
                    lo_open = hi_open = False
                else:
                    ok = False
                    break
            elif rel in (Rel.LE, Rel.LT):
                strict = rel is Rel.LT
                if hi is None or bound < hi or (bound == hi and strict):
                    hi, hi_open = bound, strict
            else:
                strict = rel is Rel.GT
                if lo is None or bound > lo or (bound == lo and strict):
                    lo, lo_open = bound, strict
        if not ok:
            continue
        if lo is None or lo < L:
            lo, lo_open = L, False
        if hi is None or hi > U:
            hi, hi_open = U, False
        if lo > hi or (lo == hi and (lo_open or hi_open)):
            continue
        cost_q = cand.cost.substitute(
            {lname: AffineExpr((), L), uname: AffineExpr((), U)}
        )
        controller = tuple(
            (v, e.substitute({lname: AffineExpr((), L), uname: AffineExpr((), U)}))
            for v, e in cand.assignment
        )
        out.append(
            V0Candidate(
                lo=lo,
                hi=hi,
                lo_open=lo_open,
                hi_open=hi_open,
                cost=cost_q.univariate(v0),
                controller=controller,
                index=idx,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Exact envelope partition
# ---------------------------------------------------------------------------


def partition_regions(
    candidates: Sequence[V0Candidate], interval: tuple[Rat, Rat], v0: VarId = "v0"
) -> list[PartitionCell]:
    """Disjoint cover of [L, U] by cells with a single dominating cost.

    Every point of the interval must lie in some candidate's region; a
    gap is a hard coverage error.  Cells are split at all region
    endpoints and at intersection points of competing costs, then runs
    with the same dominating candidate are merged back.  Ties pick the
    candidate with the lexicographically smallest controller
    coefficients, so the partition is deterministic.
    """
    L, U = interval
    if L > U:
        raise ValueError("empty interval")
    cands = [c for c in candidates if c.lo <= U and c.hi >= L]
    _check_coverage(cands, L, U)

    cuts: list[Value] = [L, U]
    for c in cands:
        for x in (c.lo, c.hi):
            if L < x < U:
                cuts.append(x)
    for i in range(len(cands)):
        for j in range(i + 1, len(cands)):
            a, b = cands[i], cands[j]
            olo = max(a.lo, b.lo)
            ohi = min(a.hi, b.hi)
            if olo > ohi:
                continue
            da = tuple(x - y for x, y in zip(a.cost, b.cost))
            if all(x == 0 for x in da):
                continue
            for root in quad_roots(*da):
                if cmp_values(root, max(olo, L)) > 0 and cmp_values(root, min(ohi, U)) < 0:
                    cuts.append(root)
    cuts = _sorted_unique(cuts)

    # Alternating point / open-interval atoms, each assigned a dominator.
    entries: list[tuple[Value, Value, bool, bool, V0Candidate]] = []
    prev_dom: Optional[V0Candidate] = None
    for k, x in enumerate(cuts):
        dom_point = _dominator_at(cands, x, prefer=prev_dom)
        entries.append((x, x, False, False, dom_point))
        if k + 1 < len(cuts):
            y = cuts[k + 1]
            sample = rational_between(x, y)
            dom_iv = _dominator_at(cands, sample, prefer=None)
            entries.append((x, y, True, True, dom_iv))
            prev_dom = dom_iv

    cells: list[PartitionCell] = []
    for lo, hi, lo_open, hi_open, dom in entries:
        if cells and cells[-1].candidate_index == dom.index:
            last = cells[-1]
            cells[-1] = PartitionCell(
                last.lo, hi, last.lo_open, hi_open, last.cost, last.controller, dom.index
            )
        else:
            cells.append(
                PartitionCell(
                    lo,
                    hi,
                    lo_open,
                    hi_open,
                    _univariate_quad(dom.cost, v0),
                    dom.controller,
                    dom.index,
                )
            )
    return cells


def _check_coverage(cands: Sequence[V0Candidate], L: Rat, U: Rat) -> None:
    ivs = sorted((c.lo, c.hi) for c in cands)
    reach: Optional[Rat] = None
    for lo, hi in ivs:
        if reach is None:
            if lo > L:
                raise CoverageError(f"no candidate region covers v0 = {L}")
            reach = hi
        else:
            if lo > reach:
                raise CoverageError(
                    f"candidate regions leave a gap in ({reach}, {lo})"
                )
            reach = max(reach, hi)
        if reach >= U:
            return
    if reach is None or reach < U:
        raise CoverageError(f"candidate regions stop short of v0 = {U}")


def _sorted_unique(vals: list[Value]) -> list[Value]:
    out: list[Value] = []
    for x in sorted(vals, key=_SortKey):
        if not out or cmp_values(out[-1], x) != 0:
            out.append(x)
    return out


class _SortKey:
    __slots__ = ("v",)

    def __init__(self, v: Value):
        self.v = v

    def __lt__(self, other: "_SortKey") -> bool:
        return cmp_values(self.v, other.v) < 0


def _dominator_at(
    cands: Sequence[V0Candidate], x: Value, prefer: Optional[V0Candidate]
) -> V0Candidate:
    best: Optional[V0Candidate] = None
    best_val: Optional[Value] = None
    for c in cands:
        if not c.contains(x):
            continue
        v = c.cost_at(x)
        if best_val is None or cmp_values(v, best_val) < 0:
            best, best_val = c, v
        elif cmp_values(v, best_val) == 0:
            assert best is not None
            if prefer is not None and c.index == prefer.index:
                best = c
            elif (prefer is None or best.index != prefer.index) and c.tie_key() < best.tie_key():
                best = c
    if best is None:
        raise CoverageError(f"no candidate region contains v0 = {x}")
    return best


# ---------------------------------------------------------------------------
# Exact suprema
# ---------------------------------------------------------------------------


def sup_quadratic_on_interval(q: QuadExpr, lo: Rat, hi: Rat) -> tuple[Rat, Rat]:
    """Exact maximum of a univariate quadratic on [lo, hi] with its argmax.

    The maximum is the larger of the endpoint values and, when the
    parabola is concave with an interior vertex, the vertex value.  Ties
    return the smallest argmax.
    """
    if lo > hi:
        raise ValueError("empty interval")
    vs = list(q.vars())
    if len(vs) > 1:
        raise ValueError("quadratic must be univariate")
    v = vs[0] if vs else "v0"
    a, b, c = q.univariate(v)
    best_val, best_arg = quad_eval(a, b, c, lo), lo
    hi_val = quad_eval(a, b, c, hi)
    if hi_val > best_val:
        best_val, best_arg = hi_val, hi
    if a < 0:
        vertex = -b / (2 * a)
        if lo < vertex < hi:
            vv = quad_eval(a, b, c, vertex)
            if vv > best_val or (vv == best_val and vertex < best_arg):
                best_val, best_arg = vv, vertex
    return best_val, best_arg


def _sup_on_cell(cell: PartitionCell, v0: VarId) -> list[tuple[Value, Value, bool]]:
    """Candidate (value, argpoint, attained) triples of one cell's supremum.

    Values at open cell ends still bound the supremum (as limits) but
    are flagged unattained.
    """
    a, b, c = cell.cost.univariate(v0)
    out: list[tuple[Value, Value, bool]] = [
        (quad_eval(a, b, c, cell.lo), cell.lo, not cell.lo_open),
        (quad_eval(a, b, c, cell.hi), cell.hi, not cell.hi_open),
    ]
    if a < 0:
        vertex = -b / (2 * a)
        if cmp_values(vertex, cell.lo) > 0 and cmp_values(vertex, cell.hi) < 0:
            out.append((quad_eval(a, b, c, vertex), vertex, True))
    return out


def envelope_sup(cells: Sequence[PartitionCell], v0: VarId = "v0") -> tuple[Value, bool]:
    """Supremum of the partitioned pointwise-minimum cost, with attainment."""
    best: Optional[Value] = None
    attained = False
    for cell in cells:
        for val, _, att in _sup_on_cell(cell, v0):
            if best is None or cmp_values(val, best) > 0:
                best, attained = val, att
            elif cmp_values(val, best) == 0 and att:
                attained = True
    assert best is not None
    return best, attained


# ---------------------------------------------------------------------------
# Worst case per pair and the outer grid search
# ---------------------------------------------------------------------------


def worst_case_value(
    L: Rat,
    U: Rat,
    candidates: Sequence[KktCandidate],
    *,
    admissible: Optional[Formula] = None,
    v0: VarId = "v0",
    with_pieces: bool = False,
):
    """Exact sup over v0 in [L, U] of the partitioned pointwise-min cost.

    Returns (value, attained) or (value, attained, pieces).  The value
    is rational; a surd-valued supremum (possible only when the maximum
    sits exactly on an irrational crossing) is reported as an error
    rather than rounded.
    """
    if admissible is not None and not evaluate(admissible, {"L": L, "U": U}):
        raise ValueError(f"(L, U) = ({L}, {U}) is not admissible")
    v0cands = instantiate_candidates(candidates, L, U, v0=v0)
    cells = partition_regions(v0cands, (L, U), v0=v0)
    value, attained = envelope_sup(cells, v0)
    if isinstance(value, Surd):
        raise IrrationalOptimumError(f"supremum is irrational: {value!r}")
    if with_pieces:
        return value, attained, cells
    return value, attained


def _pair_lower_bound(
    v0cands: Sequence[V0Candidate], L: Rat, U: Rat
) -> Optional[Rat]:
    """Cheap exact lower bound on the pair's worst case (sample maximum)."""
    points: set[Rat] = {L, U}
    for c in v0cands:
        if L <= c.lo <= U:
            points.add(c.lo)
        if L <= c.hi <= U:
            points.add(c.hi)
    best: Optional[Rat] = None
    for x in points:
        applicable = [c.cost_at(x) for c in v0cands if c.contains(x)]
        if not applicable:
            return None  # coverage problem; let the full path raise
        m = min(applicable)
        if best is None or m > best:
            best = m
    return best


@dataclass
class GridLogEntry:
    L: Rat
    U: Rat
    value: Optional[Rat]
    attained: Optional[bool]
    seconds: float
    skipped: bool = False


@dataclass
class SynthesisResult:
    """Outcome of the outer grid search."""

    L: Rat
    U: Rat
    value: Rat
    attained: bool
    pieces: list[PartitionCell]
    optimal_pairs: list[tuple[Rat, Rat]]
    grid_step: Rat
    pairs_examined: int
    log: list[GridLogEntry] = field(default_factory=list)


def admissible_pairs(
    admissible: Formula, grid: GridSpec, lname: VarId = "L", uname: VarId = "U"
) -> list[tuple[Rat, Rat]]:
    """Grid pairs satisfying the admissibility formula, L-major order."""
    pts = grid.points()
    out = []
    for L in pts:
        for U in pts:
            if U <= L:
                continue
            if evaluate(admissible, {lname: L, uname: U}):
                out.append((L, U))
    return out


def synthesize(
    candidates: Sequence[KktCandidate],
    admissible: Formula,
    grid: GridSpec,
    *,
    v0: VarId = "v0",
    start: Optional[tuple[Rat, Rat]] = None,
    workers: int = 1,
    progress: Optional[Callable[[int, int], None]] = None,
) -> SynthesisResult:
    """Exhaustive exact search over admissible grid pairs.

    Iterates L ascending then U ascending, evaluates each pair's worst
    case, and returns the minimum with the lexicographically smallest
    (L, U) as the representative; every pair achieving the minimum is
    reported.  ``start`` restricts the search to that single pair (a
    fast smoke path).  The result is independent of ``workers``.
    """
    if start is not None:
        pairs = [start]
        if not evaluate(admissible, {"L": start[0], "U": start[1]}):
            raise ValueError(f"start pair {start} is not admissible")
    else:
        pairs = admissible_pairs(admissible, grid)
    if not pairs:
        raise ValueError("no admissible grid pair")

    log: list[GridLogEntry] = []
    best_val: Optional[Rat] = None
    best_att = False
    best_pair: Optional[tuple[Rat, Rat]] = None
    winners: list[tuple[Rat, Rat]] = []

    if workers > 1 and len(pairs) > 1:
        values = _evaluate_pairs_parallel(candidates, pairs, v0, workers)
    else:
        values = _evaluate_pairs_serial(candidates, pairs, v0, progress)

    for (L, U), (value, attained, seconds, skipped) in zip(pairs, values):
        log.append(GridLogEntry(L, U, value, attained, seconds, skipped))
        if value is None:
            continue
        if best_val is None or value < best_val:
            best_val, best_att, best_pair = value, bool(attained), (L, U)
            winners = [(L, U)]
        elif value == best_val:
            winners.append((L, U))

    assert best_pair is not None and best_val is not None
    Lb, Ub = best_pair
    _, att, pieces = worst_case_value(
        Lb, Ub, candidates, v0=v0, with_pieces=True
    )
    return SynthesisResult(
        L=Lb,
        U=Ub,
        value=best_val,
        attained=att,
        pieces=pieces,
        optimal_pairs=winners,
        grid_step=grid.step,
        pairs_examined=len(pairs),
        log=log,
    )


def _evaluate_pairs_serial(candidates, pairs, v0, progress):
    out = []
    best: Optional[Rat] = None
    for i, (L, U) in enumerate(pairs):
        t0 = time.perf_counter()
        v0cands = instantiate_candidates(candidates, L, U, v0=v0)
        lb = _pair_lower_bound(v0cands, L, U)
        if best is not None and lb is not None and lb > best:
            out.append((None, None, time.perf_counter() - t0, True))
        else:
            cells = partition_regions(v0cands, (L, U), v0=v0)
            value, attained = envelope_sup(cells, v0)
            if isinstance(value, Surd):
                raise IrrationalOptimumError(f"supremum is irrational: {value!r}")
            if best is None or value < best:
                best = value
            out.append((value, attained, time.perf_counter() - t0, False))
        if progress is not None:
            progress(i + 1, len(pairs))
    return out


_worker_state: dict = {}


def _worker_init(candidates, v0):
    _worker_state["candidates"] = candidates
    _worker_state["v0"] = v0


def _worker_eval(args):
    L, U, best_hint = args
    candidates = _worker_state["candidates"]
    v0 = _worker_state["v0"]
    t0 = time.perf_counter()
    v0cands = instantiate_candidates(candidates, L, U, v0=v0)
    lb = _pair_lower_bound(v0cands, L, U)
    if best_hint is not None and lb is not None and lb > best_hint:
        return None, None, time.perf_counter() - t0, True
    cells = partition_regions(v0cands, (L, U), v0=v0)
    value, attained = envelope_sup(cells, v0)
    if isinstance(value, Surd):
        raise IrrationalOptimumError(f"supremum is irrational: {value!r}")
    return value, attained, time.perf_counter() - t0, False


def _evaluate_pairs_parallel(candidates, pairs, v0, workers):
    import multiprocessing as mp

    # The first pair is evaluated up front: its value seeds the pruning
    # bound for every worker (the search order makes it a good incumbent).
    first = _evaluate_pairs_serial(candidates, pairs[:1], v0, None)[0]
    hint = first[0]
    ctx = mp.get_context("spawn")
    with ctx.Pool(workers, initializer=_worker_init, initargs=(list(candidates), v0)) as pool:
        rest = pool.map(
            _worker_eval, [(L, U, hint) for (L, U) in pairs[1:]], chunksize=64
        )
    return [first] + rest
