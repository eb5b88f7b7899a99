"""Exact rational linear programming over atom conjunctions.

Feasibility of conjunctions of (possibly strict) linear atoms and
maximization of linear objectives over their closures, decided exactly.
Equalities are substituted away first; single-variable systems are
solved by interval intersection; everything else goes to a two-phase
simplex whose tableau body uses integer (fraction-free) pivoting with a
shared denominator, with only the objective row kept rational.  Strict
inequalities are handled by maximizing a slack bounded by 1: the open
polyhedron is nonempty iff the optimum is positive.  Bland's rule
prevents cycling.  No floating point is involved anywhere.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Iterable, Mapping, Optional, Sequence

from .formula import AffineExpr, Atom, Rel, VarId

_ZERO = Fraction(0)
_ONE = Fraction(1)

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


def _int_pivot(rows: list[list[int]], den: int, r: int, c: int) -> int:
    """Fraction-free pivot on (r, c); returns the new shared denominator.

    Entries are the true tableau scaled by ``den``; after the pivot the
    scale is the pivot entry (all divisions are exact, a determinant
    identity).  A negative pivot flips every row's sign so the shared
    scale stays positive.
    """
    p = rows[r][c]
    prow = rows[r]
    for i, row in enumerate(rows):
        if i == r:
            continue
        f = row[c]
        if f:
            rows[i] = [(p * x - f * y) // den for x, y in zip(row, prow)]
        else:
            rows[i] = [(p * x) // den for x in row]
    if p < 0:
        for i in range(len(rows)):
            rows[i] = [-x for x in rows[i]]
        return -p
    return p


def _int_simplex(
    rows: list[list[int]],
    basis: list[int],
    obj: list[Fraction],
    den: int = 1,
    blocked=frozenset(),
):
    """Maximize obj over an integer tableau in canonical basis form.

    Body entries represent the true tableau times the shared positive
    denominator ``den``; the objective row is kept rational.  Mutates
    rows/basis in place; returns (status, value, den).
    """
    ncols = len(rows[0]) - 1
    inv_den = Fraction(1, den)
    zrow = list(obj) + [_ZERO]
    for i, b in enumerate(basis):
        if zrow[b] != 0:
            f = zrow[b] * inv_den
            zrow = [x - f * y for x, y in zip(zrow, rows[i])]
    while True:
        enter = -1
        for j in range(ncols):
            if j not in blocked and zrow[j] > 0:
                enter = j
                break
        if enter < 0:
            return OPTIMAL, -zrow[-1], den
        leave, bn, bd = -1, 0, 0
        for i, row in enumerate(rows):
            a = row[enter]
            if a > 0:
                if leave < 0 or row[-1] * bd < bn * a or (
                    row[-1] * bd == bn * a and basis[i] < basis[leave]
                ):
                    leave, bn, bd = i, row[-1], a
        if leave < 0:
            return UNBOUNDED, None, den
        fz = zrow[enter]
        p = rows[leave][enter]
        if fz != 0:
            f = fz * Fraction(1, p)
            zrow = [x - f * y for x, y in zip(zrow, rows[leave])]
        den = _int_pivot(rows, den, leave, enter)
        basis[leave] = enter


class _Problem:
    """Tableau builder: free variables split into nonnegative pairs.

    Constraint rows are stored integerized (scaling a row by a positive
    rational preserves it), so the basic slack/artificial entries are
    exactly 1 and integer pivoting applies from the start.
    """

    def __init__(self, variables: Sequence[VarId], with_eps: bool):
        self.vars = list(variables)
        self.with_eps = with_eps
        self.nstruct = 2 * len(self.vars) + (1 if with_eps else 0)
        self.col_of = {v: 2 * i for i, v in enumerate(self.vars)}
        self.eps_col = self.nstruct - 1 if with_eps else None
        self.rows: list[tuple[list[int], int, str]] = []  # (coeffs, rhs, kind)

    def add(self, expr: AffineExpr, rel: Rel, eps: bool = False) -> None:
        # expr rel 0  ->  sum a_i x_i (<=|=) -const, integerized
        scale = 1
        for _, c in expr.coeffs:
            scale = _lcm(scale, c.denominator)
        scale = _lcm(scale, expr.const.denominator)
        coeffs = [0] * self.nstruct
        for v, c in expr.coeffs:
            j = self.col_of[v]
            k = int(c * scale)
            coeffs[j] += k
            coeffs[j + 1] -= k
        if eps and self.with_eps:
            coeffs[self.eps_col] += scale
        rhs = int(-expr.const * scale)
        self.rows.append((coeffs, rhs, "eq" if rel is Rel.EQ else "le"))

    def add_eps_bound(self) -> None:
        coeffs = [0] * self.nstruct
        coeffs[self.eps_col] = 1
        self.rows.append((coeffs, 1, "le"))

    def solve(self, objective: Mapping[VarId, Fraction], eps_objective: bool):
        if not self.rows:
            if objective or eps_objective:
                return UNBOUNDED, None, None
            return OPTIMAL, _ZERO, {v: _ZERO for v in self.vars}
        nrows = len(self.rows)
        nslack = sum(1 for _, _, kind in self.rows if kind == "le")
        ncols = self.nstruct + nslack + nrows
        rows: list[list[int]] = []
        basis: list[int] = []
        art_cols: set[int] = set()
        si = 0
        for i, (coeffs, rhs, kind) in enumerate(self.rows):
            row = list(coeffs) + [0] * (nslack + nrows) + [rhs]
            if kind == "le":
                row[self.nstruct + si] = 1
                slack_col = self.nstruct + si
                si += 1
            else:
                slack_col = None
            if row[-1] < 0:
                row = [-x for x in row]
            if slack_col is not None and row[slack_col] == 1:
                basis.append(slack_col)
            else:
                ac = self.nstruct + nslack + i
                row[ac] = 1
                art_cols.add(ac)
                basis.append(ac)
            rows.append(row)
        den = 1
        if art_cols:
            obj1 = [_ZERO] * ncols
            for c in art_cols:
                obj1[c] = Fraction(-1)
            status, value, den = _int_simplex(rows, basis, obj1, den)
            assert status == OPTIMAL
            if value != 0:
                return INFEASIBLE, None, None
            # Drive residual artificials out of the basis where possible;
            # rows with no eligible column are redundant and stay put at 0.
            for i in range(len(rows)):
                if basis[i] in art_cols:
                    for j in range(self.nstruct + nslack):
                        if rows[i][j] != 0:
                            if rows[i][j] < 0:
                                rows[i] = [-x for x in rows[i]]
                            den = _int_pivot(rows, den, i, j)
                            basis[i] = j
                            break
        obj2 = [_ZERO] * ncols
        for v, c in objective.items():
            j = self.col_of[v]
            obj2[j] += c
            obj2[j + 1] -= c
        if eps_objective and self.with_eps:
            obj2[self.eps_col] += _ONE
        status, value, den = _int_simplex(rows, basis, obj2, den, frozenset(art_cols))
        if status == UNBOUNDED:
            return UNBOUNDED, None, None
        point: dict[VarId, Fraction] = {}
        vals = [_ZERO] * ncols
        for i, b in enumerate(basis):
            vals[b] = Fraction(rows[i][-1], den)
        for v in self.vars:
            j = self.col_of[v]
            point[v] = vals[j] - vals[j + 1]
        if self.with_eps:
            point["__eps__"] = vals[self.eps_col]
        return OPTIMAL, value, point


def _repivot(rows: list[list[int]], basis: list[int], r: int, c: int, den: int) -> None:
    """Force column c into the basis at row r (integer pivoting step)."""
    p = rows[r][c]
    sign = 1 if p > 0 else -1
    if sign < 0:
        rows[r] = [-x for x in rows[r]]
        p = -p
    prow = rows[r]
    for i, row in enumerate(rows):
        if i == r:
            continue
        f = row[c]
        if f:
            rows[i] = [(p * x - f * y) // den for x, y in zip(row, prow)]
        else:
            rows[i] = [(p * x) // den for x in row]
    basis[r] = c
    # rescale pivot row to the new shared denominator p
    rows[r] = [x * (p // den) if False else x for x in rows[r]]


def _int_simplex2(rows, basis, obj, den, blocked):
    """Continue integer simplex from an existing shared denominator."""
    ncols = len(rows[0]) - 1
    zrow = list(obj) + [_ZERO]
    inv = Fraction(1, den)
    for i, b in enumerate(basis):
        if zrow[b] != 0:
            f = zrow[b] * inv
            zrow = [x - f * y for x, y in zip(zrow, rows[i])]
    while True:
        enter = -1
        for j in range(ncols):
            if j not in blocked and zrow[j] > 0:
                enter = j
                break
        if enter < 0:
            return OPTIMAL, -zrow[-1], den
        leave, bn, bd = -1, 0, 0
        for i, row in enumerate(rows):
            a = row[enter]
            if a > 0:
                if leave < 0 or row[-1] * bd < bn * a or (
                    row[-1] * bd == bn * a and basis[i] < basis[leave]
                ):
                    leave, bn, bd = i, row[-1], a
        if leave < 0:
            return UNBOUNDED, None, den
        p = rows[leave][enter]
        prow = rows[leave]
        for i, row in enumerate(rows):
            if i == leave:
                continue
            f = row[enter]
            if f:
                rows[i] = [(p * x - f * y) // den for x, y in zip(row, prow)]
            else:
                rows[i] = [(p * x) // den for x in row]
        fz = zrow[enter]
        if fz != 0:
            finv = fz * Fraction(1, p)
            zrow = [x - finv * y for x, y in zip(zrow, prow)]
        basis[leave] = enter
        den = p


def _normalized(atoms: Iterable[Atom]) -> Optional[list[tuple[AffineExpr, Rel]]]:
    """Normalize relations to LE/LT/EQ; None means trivially infeasible."""
    out = []
    for a in atoms:
        if a.is_trivially_true():
            continue
        if a.is_trivially_false():
            return None
        e, r = a.expr, a.rel
        if r is Rel.GE:
            e, r = -e, Rel.LE
        elif r is Rel.GT:
            e, r = -e, Rel.LT
        out.append((e, r))
    return out


def _reduce_equalities(
    rows: list[tuple[AffineExpr, Rel]]
) -> Optional[tuple[list[tuple[AffineExpr, Rel]], list[tuple[VarId, AffineExpr]]]]:
    """Substitute equalities away; None on contradiction.

    Returns the remaining rows and the solved chain (reverse order for
    witness reconstruction).
    """
    chain: list[tuple[VarId, AffineExpr]] = []
    work = list(rows)
    while True:
        pick = None
        for i, (e, r) in enumerate(work):
            if r is Rel.EQ and e.coeffs:
                if pick is None or len(e.coeffs) < len(work[pick][0].coeffs):
                    pick = i
        if pick is None:
            return work, chain
        e, _ = work.pop(pick)
        v, c = e.coeffs[0]
        solved = (e - AffineExpr(((v, c),))).scale(Fraction(-1) / c)
        chain.append((v, solved))
        nxt: list[tuple[AffineExpr, Rel]] = []
        for e2, r2 in work:
            e3 = e2.substitute({v: solved})
            if e3.is_constant():
                ok = (
                    e3.const == 0
                    if r2 is Rel.EQ
                    else (e3.const <= 0 if r2 is Rel.LE else e3.const < 0)
                )
                if not ok:
                    return None
                continue
            nxt.append((e3, r2))
        work = nxt


def _interval_feasible(
    rows: list[tuple[AffineExpr, Rel]]
) -> Optional[dict[VarId, Fraction]]:
    """Exact witness for systems whose rows each touch one variable."""
    bounds: dict[VarId, list] = {}
    for e, r in rows:
        v, c = e.coeffs[0]
        b = -e.const / c
        rel = r if c > 0 else (Rel.GE if r is Rel.LE else Rel.GT)
        rec = bounds.setdefault(v, [None, False, None, False])
        if rel in (Rel.LE, Rel.LT):
            s = rel is Rel.LT
            if rec[2] is None or b < rec[2] or (b == rec[2] and s):
                rec[2], rec[3] = b, s
        else:
            s = rel is Rel.GT
            if rec[0] is None or b > rec[0] or (b == rec[0] and s):
                rec[0], rec[1] = b, s
    out: dict[VarId, Fraction] = {}
    for v, (lo, los, hi, his) in bounds.items():
        if lo is None and hi is None:
            out[v] = _ZERO
        elif lo is None:
            out[v] = hi - 1 if his else hi
        elif hi is None:
            out[v] = lo + 1 if los else lo
        else:
            if lo > hi or (lo == hi and (los or his)):
                return None
            out[v] = (lo + hi) / 2 if (los or his) else lo
    return out


_feas_cache: dict[frozenset[Atom], Optional[dict[VarId, Fraction]]] = {}


def feasible_with_witness(atoms: Iterable[Atom]) -> Optional[dict[VarId, Fraction]]:
    """A rational point satisfying all atoms (strictness included), or None."""
    key = frozenset(atoms)
    hit = _feas_cache.get(key, "MISS")
    if hit != "MISS":
        return hit
    result = _feasible_uncached(key)
    _feas_cache[key] = result
    return result


def _feasible_uncached(atoms: frozenset[Atom]) -> Optional[dict[VarId, Fraction]]:
    normd = _normalized(atoms)
    if normd is None:
        return None
    reduced = _reduce_equalities(normd)
    if reduced is None:
        return None
    rows, chain = reduced
    point: Optional[dict[VarId, Fraction]]
    if not rows:
        point = {}
    elif all(len(e.coeffs) == 1 for e, _ in rows):
        point = _interval_feasible(rows)
        if point is None:
            return None
    else:
        variables = sorted({v for e, _ in rows for v in e.vars()})
        has_strict = any(r is Rel.LT for _, r in rows)
        prob = _Problem(variables, with_eps=has_strict)
        for e, r in rows:
            prob.add(e, Rel.EQ if r is Rel.EQ else Rel.LE, eps=(r is Rel.LT))
        if has_strict:
            prob.add_eps_bound()  # eps <= 1 keeps the auxiliary objective bounded
        status, value, point = prob.solve({}, eps_objective=has_strict)
        if status != OPTIMAL:
            return None
        if has_strict:
            if value is None or value <= 0:
                return None
            assert point is not None
            point = dict(point)
            point.pop("__eps__", None)
    assert point is not None
    for v, solved in reversed(chain):
        for u in solved.vars():
            point.setdefault(u, _ZERO)
        point[v] = solved.evaluate(point)
    for a in atoms:
        for v in a.vars():
            point.setdefault(v, _ZERO)
    return point


def is_satisfiable(atoms: Iterable[Atom]) -> bool:
    return feasible_with_witness(atoms) is not None


_max_cache: dict[tuple[frozenset[Atom], tuple], tuple] = {}


def maximize(atoms: Iterable[Atom], objective: AffineExpr):
    """(status, value, witness) maximizing objective over the closure."""
    key = (frozenset(atoms), objective.coeffs)
    if key in _max_cache:
        status, value, point = _max_cache[key]
        return status, (value + objective.const) if value is not None else None, point
    normd = _normalized(key[0])
    if normd is None:
        result = (INFEASIBLE, None, None)
    else:
        variables = sorted(
            {v for e, _ in normd for v in e.vars()} | set(objective.vars())
        )
        prob = _Problem(variables, with_eps=False)
        for e, r in normd:
            prob.add(e, Rel.EQ if r is Rel.EQ else Rel.LE)
        status, value, point = prob.solve(dict(objective.coeffs), eps_objective=False)
        result = (status, value, point)
    _max_cache[key] = result
    status, value, point = result
    if status != OPTIMAL:
        return status, None, None
    return status, value + objective.const, point


def bounds_of(atoms: Iterable[Atom], v: VarId) -> tuple[Optional[Fraction], Optional[Fraction]]:
    """Exact [min, max] of v over the closure; None marks unbounded sides."""
    from .formula import var

    st_hi, hi, _ = maximize(atoms, var(v))
    st_lo, lo_neg, _ = maximize(atoms, -var(v))
    if st_hi == INFEASIBLE or st_lo == INFEASIBLE:
        raise ValueError("bounds_of requires a nonempty closure")
    hi_v = hi if st_hi == OPTIMAL else None
    lo_v = -lo_neg if st_lo == OPTIMAL else None
    return lo_v, hi_v


def solve_square(A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Optional[list[Fraction]]:
    """Unique solution of a square rational system, or None if singular."""
    n = len(A)
    M = [list(row) + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


def enumerate_vertices(atoms: Iterable[Atom], variables: Sequence[VarId]) -> list[dict[VarId, Fraction]]:
    """Vertices of the closure of a bounded polyhedron (small dimensions).

    Exhaustive: every subset of constraint hyperplanes of size dim is
    solved and feasibility-checked.  Intended for tests and fallbacks.
    """
    atoms = [a for a in atoms if not a.is_trivially_true()]
    n = len(variables)
    closure = [a.closure() for a in atoms]
    out: list[dict[VarId, Fraction]] = []
    seen: set[tuple] = set()
    for subset in combinations(range(len(atoms)), n):
        A = [[atoms[i].expr.coeff(v) for v in variables] for i in subset]
        b = [-atoms[i].expr.const for i in subset]
        sol = solve_square(A, b)
        if sol is None:
            continue
        point = dict(zip(variables, sol))
        if all(a.rel.holds(a.expr.evaluate(point)) for a in closure):
            key = tuple(sol)
            if key not in seen:
                seen.add(key)
                out.append(point)
    return out


def clear_caches() -> None:
    _feas_cache.clear()
    _max_cache.clear()
