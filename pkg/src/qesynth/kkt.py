"""Parametric quadratic programming over polyhedral cells.

For each conjunctive cell the first-order optimality system is
enumerated over active sets: active constraints are forced tight,
stationarity of the (possibly indefinite) quadratic objective plus
multiplier terms is solved exactly by Gaussian elimination with affine
right-hand sides in the parameters, and multiplier nonnegativity turns
into linear conditions on the parameters.  The union of the returned
candidates contains every local minimizer of the objective over the
instantiated cell for every feasible parameter point; minima exist by
compactness, so exact pointwise comparison downstream recovers the true
piecewise solution.  No convexity is assumed anywhere.

Degenerate (rank-deficient) active sets are skipped with a diagnostic;
when that happens all vertices of the cell are emitted as additional
candidates so no minimizer can be lost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence

from . import lp
from .formula import (
    AffineExpr,
    Atom,
    Polyhedron,
    QuadExpr,
    Rel,
    VarId,
    atom_sort_key,
    canonicalize,
    sorted_atoms,
)

_ZERO = Fraction(0)
_ONE = Fraction(1)


class UnboundedCellError(ValueError):
    """A cell is unbounded in the decision variables."""


@dataclass(frozen=True)
class ActiveSet:
    """Indices of a cell's atoms treated as equalities, with multipliers."""

    indices: tuple[int, ...]
    multipliers: tuple[tuple[int, AffineExpr], ...]


@dataclass(frozen=True)
class KktCandidate:
    """One candidate minimizer: parameter region, affine assignment, cost.

    ``equations`` is the defining equality system (full column rank in
    the decision variables for pipeline-produced candidates), and
    ``cost`` is the objective with the assignment substituted in.
    """

    region: Polyhedron
    assignment: tuple[tuple[VarId, AffineExpr], ...]
    cost: QuadExpr
    equations: tuple[Atom, ...]
    active: Optional[ActiveSet] = None
    cell_index: int = -1
    from_vertex: bool = False

    def assignment_map(self) -> dict[VarId, AffineExpr]:
        return dict(self.assignment)

    def sort_key(self) -> tuple:
        return (
            self.cell_index,
            self.from_vertex,
            self.active.indices if self.active else (),
            tuple(
                (v, e.coeffs, e.const.numerator, e.const.denominator)
                for v, e in self.assignment
            ),
        )


def _solve_parametric(
    matrix: list[list[Fraction]], rhs: list[AffineExpr]
) -> Optional[list[AffineExpr]]:
    """Solve M x = rhs with rational M and affine right-hand sides.

    Returns None when M is singular (including systems solvable only on
    a lower-dimensional parameter subset).
    """
    n = len(matrix)
    M = [list(row) for row in matrix]
    R = list(rhs)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            R[col], R[piv] = R[piv], R[col]
        inv = _ONE / M[col][col]
        M[col] = [x * inv for x in M[col]]
        R[col] = R[col].scale(inv)
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
                R[r] = R[r] - R[col].scale(f)
    return R


def _t_gradient(atom: Atom, tvars: Sequence[VarId]) -> tuple[Fraction, ...]:
    return tuple(atom.expr.coeff(v) for v in tvars)


def _le_oriented(atom: Atom) -> AffineExpr:
    """The atom's expression oriented as expr <= 0."""
    if atom.rel in (Rel.GE, Rel.GT):
        return -atom.expr
    return atom.expr


def _rank_extends(rows: list[tuple[Fraction, ...]], new: tuple[Fraction, ...]) -> bool:
    """Does ``new`` increase the rank of ``rows``?  (Small dense check.)"""
    basis = [list(r) for r in rows] + [list(new)]
    n = len(new)
    rank = 0
    for col in range(n):
        piv = next((r for r in range(rank, len(basis)) if basis[r][col] != 0), None)
        if piv is None:
            continue
        basis[rank], basis[piv] = basis[piv], basis[rank]
        inv = _ONE / basis[rank][col]
        basis[rank] = [x * inv for x in basis[rank]]
        for r in range(len(basis)):
            if r != rank and basis[r][col] != 0:
                f = basis[r][col]
                basis[r] = [x - f * y for x, y in zip(basis[r], basis[rank])]
        rank += 1
    return rank == len(rows) + 1


def kkt_candidates(
    g: QuadExpr,
    cell: Polyhedron,
    tvars: Sequence[VarId],
    params: Sequence[VarId],
    cell_index: int = -1,
) -> list[KktCandidate]:
    """All first-order candidate minimizers of g over one cell.

    The cell must be bounded in the decision variables jointly with the
    parameters (rejected otherwise).  Strict cell atoms are treated by
    their closure: minima of a continuous objective over the cell's
    closure are attained, and closure points stay inside the overall
    feasible union, so nothing spurious enters the pointwise minimum.
    """
    tset = set(tvars)
    extraneous = g.vars() - tset - set(params)
    if extraneous:
        raise ValueError(f"objective mentions unknown variables {sorted(extraneous)}")
    closed = sorted_atoms(cell.closure().atoms)
    for v in tvars:
        lo, hi = lp.bounds_of(closed, v)
        if lo is None or hi is None:
            raise UnboundedCellError(f"cell {cell_index} unbounded in {v}")

    t_eqs: list[int] = []
    t_ineqs: list[int] = []
    for i, a in enumerate(closed):
        if not (a.vars() & tset):
            continue
        (t_eqs if a.rel is Rel.EQ else t_ineqs).append(i)

    n = len(tvars)
    hessian = [
        [
            g.quad_coeff(ti, tj) * (2 if ti == tj else 1)
            for tj in tvars
        ]
        for ti in tvars
    ]
    grad_const = [g.gradient(ti) for ti in tvars]

    degenerate = False
    out: list[KktCandidate] = []
    seen: set[tuple] = set()

    forced = tuple(t_eqs)
    forced_grads = [_t_gradient(closed[i], tvars) for i in forced]

    def emit(active_idx: tuple[int, ...]) -> None:
        nonlocal degenerate
        m = len(active_idx)
        size = n + m
        matrix = [[_ZERO] * size for _ in range(size)]
        rhs: list[AffineExpr] = []
        active_exprs = [_le_oriented(closed[i]) for i in active_idx]
        for r in range(n):
            for c in range(n):
                matrix[r][c] = hessian[r][c]
            for k, e in enumerate(active_exprs):
                matrix[r][n + k] = e.coeff(tvars[r])
            # stationarity: H t + N mu = -(parameter part of the gradient)
            gpart = grad_const[r]
            rhs.append(-(gpart - AffineExpr(
                tuple((v, c) for v, c in gpart.coeffs if v in tset)
            )))
        for k, e in enumerate(active_exprs):
            for c in range(n):
                matrix[n + k][c] = e.coeff(tvars[c])
            rhs.append(-(e - AffineExpr(
                tuple((v, c) for v, c in e.coeffs if v in tset)
            )))
        sol = _solve_parametric(matrix, rhs)
        if sol is None:
            degenerate = True
            return
        assignment = tuple(zip(tvars, sol[:n]))
        mus = tuple(zip(active_idx, sol[n:]))
        region_atoms: set[Atom] = set()
        amap = dict(assignment)
        ok = True
        for a in closed:
            b = canonicalize(Atom(a.expr.substitute(amap), a.rel))
            if b.is_trivially_false():
                ok = False
                break
            if not b.is_trivially_true():
                region_atoms.add(b)
        if not ok:
            return
        for i, mu in mus:
            if closed[i].rel is Rel.EQ:
                continue
            b = canonicalize(Atom(mu, Rel.GE))
            if b.is_trivially_false():
                ok = False
                break
            if not b.is_trivially_true():
                region_atoms.add(b)
        if not ok:
            return
        if not lp.is_satisfiable(frozenset(region_atoms)):
            return
        key = (assignment, frozenset(region_atoms))
        if key in seen:
            return
        seen.add(key)
        equations = tuple(
            canonicalize(Atom(AffineExpr(((v, _ONE),)) - e, Rel.EQ))
            for v, e in assignment
        )
        out.append(
            KktCandidate(
                region=Polyhedron(frozenset(region_atoms)),
                assignment=assignment,
                cost=g.substitute(amap),
                equations=equations,
                active=ActiveSet(active_idx, mus),
                cell_index=cell_index,
            )
        )

    def dfs(start: int, chosen: list[int], grads: list[tuple[Fraction, ...]]) -> None:
        emit(tuple(forced) + tuple(chosen))
        if len(forced) + len(chosen) >= n:
            return
        for j in range(start, len(t_ineqs)):
            idx = t_ineqs[j]
            grad = _t_gradient(closed[idx], tvars)
            if not _rank_extends(list(forced_grads) + grads, grad):
                continue
            chosen.append(idx)
            grads.append(grad)
            dfs(j + 1, chosen, grads)
            chosen.pop()
            grads.pop()

    dfs(0, [], [])

    if degenerate:
        out.extend(
            _vertex_candidates(g, closed, tvars, tset, cell_index, seen)
        )
    out.sort(key=KktCandidate.sort_key)
    return out


def _vertex_candidates(
    g: QuadExpr,
    closed: list[Atom],
    tvars: Sequence[VarId],
    tset: set[VarId],
    cell_index: int,
    seen: set[tuple],
) -> list[KktCandidate]:
    """Parametric vertices of the cell: tightness-only square systems."""
    n = len(tvars)
    t_atoms = [i for i, a in enumerate(closed) if a.vars() & tset]
    out: list[KktCandidate] = []
    for subset in combinations(t_atoms, n):
        grads = [_t_gradient(closed[i], tvars) for i in subset]
        matrix = [list(gr) for gr in grads]
        rhs = [
            -(closed[i].expr - AffineExpr(
                tuple((v, c) for v, c in closed[i].expr.coeffs if v in tset)
            ))
            for i in subset
        ]
        sol = _solve_parametric(matrix, rhs)
        if sol is None:
            continue
        assignment = tuple(zip(tvars, sol))
        amap = dict(assignment)
        region_atoms: set[Atom] = set()
        ok = True
        for a in closed:
            b = canonicalize(Atom(a.expr.substitute(amap), a.rel))
            if b.is_trivially_false():
                ok = False
                break
            if not b.is_trivially_true():
                region_atoms.add(b)
        if not ok or not lp.is_satisfiable(frozenset(region_atoms)):
            continue
        key = (assignment, frozenset(region_atoms))
        if key in seen:
            continue
        seen.add(key)
        equations = tuple(
            canonicalize(Atom(AffineExpr(((v, _ONE),)) - e, Rel.EQ))
            for v, e in assignment
        )
        out.append(
            KktCandidate(
                region=Polyhedron(frozenset(region_atoms)),
                assignment=assignment,
                cost=g.substitute(amap),
                equations=equations,
                active=ActiveSet(tuple(subset), ()),
                cell_index=cell_index,
                from_vertex=True,
            )
        )
    return out


def verify_uniqueness(c: KktCandidate, tvars: Sequence[VarId]) -> bool:
    """Full t-column rank of the candidate's equality system."""
    eqs = [a for a in c.equations if a.rel is Rel.EQ]
    rows: list[tuple[Fraction, ...]] = []
    for a in eqs:
        grad = tuple(a.expr.coeff(v) for v in tvars)
        if any(x != 0 for x in grad):
            if _rank_extends(rows, grad):
                rows.append(grad)
    return len(rows) == len(tvars)


def instantiate_cost(g: QuadExpr, c: KktCandidate) -> QuadExpr:
    """Objective with the candidate's assignment substituted (params only)."""
    return g.substitute(c.assignment_map())


def candidates_for_cells(
    g: QuadExpr,
    cells: Sequence[Polyhedron],
    tvars: Sequence[VarId],
    params: Sequence[VarId],
) -> list[KktCandidate]:
    """Candidates across cells, deduplicated on (assignment, region)."""
    out: list[KktCandidate] = []
    seen: set[tuple] = set()
    for i, cell in enumerate(cells):
        for cand in kkt_candidates(g, cell, tvars, params, cell_index=i):
            key = (cand.assignment, cand.region.atoms)
            if key in seen:
                continue
            seen.add(key)
            out.append(cand)
    return out
