"""Quantifier elimination for linear real arithmetic.

Existential quantifiers are eliminated by distributing over a pruned
DNF and projecting each conjunctive cell: equalities first (Gaussian
substitution), remaining variables by Fourier-Motzkin combination of
lower and upper bounds, with the standard strictness rule (a combined
bound is strict iff either side is).  Universal quantifiers go through
the duality with negation.  Emptiness and redundancy questions reduce
to exact rational LP feasibility, never floating point.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Optional, Sequence

from . import lp
from .formula import (
    AffineExpr,
    And,
    Atom,
    FALSE,
    FALSE_ATOM,
    Formula,
    Not,
    Or,
    Polyhedron,
    Rel,
    TRUE,
    VarId,
    canonicalize,
    exists,
    fatom,
    fnot,
    forall,
    free_vars,
    is_quantifier_free,
    land,
    lor,
    nnf,
    sorted_atoms,
    to_dnf,
)


class EliminationError(ValueError):
    """The input is outside the linear fragment this engine handles."""


# ---------------------------------------------------------------------------
# Conjunctive projection
# ---------------------------------------------------------------------------


def _gauss_substitute(atoms: set[Atom], elim: set[VarId]) -> Optional[set[Atom]]:
    """Use equalities to eliminate variables by exact substitution.

    Returns None when a contradiction surfaces.  Prefers the equality
    whose expression is shortest, for smaller fill-in.
    """
    changed = True
    while changed:
        changed = False
        candidates = [
            (len(a.expr.coeffs), a, v)
            for a in atoms
            if a.rel is Rel.EQ
            for v in (a.expr.vars() & elim)
        ]
        if not candidates:
            break
        _, eq_atom, v = min(candidates, key=lambda t: (t[0], str(t[2])))
        c = eq_atom.expr.coeff(v)
        solved = (eq_atom.expr - AffineExpr(((v, c),))).scale(Fraction(-1) / c)
        out: set[Atom] = set()
        for a in atoms:
            if a == eq_atom:
                continue
            b = canonicalize(Atom(a.expr.substitute({v: solved}), a.rel))
            if b.is_trivially_false():
                return None
            if not b.is_trivially_true():
                out.add(b)
        atoms = out
        changed = True
    return atoms


def _fm_eliminate_var(atoms: set[Atom], v: VarId) -> Optional[set[Atom]]:
    lowers: list[tuple[AffineExpr, bool]] = []  # bound <= / < v
    uppers: list[tuple[AffineExpr, bool]] = []  # v <= / < bound
    rest: set[Atom] = set()
    for a in atoms:
        c = a.expr.coeff(v)
        if c == 0:
            rest.add(a)
            continue
        if a.rel is Rel.EQ:
            raise AssertionError("equalities must be substituted before FM")
        e, r = a.expr, a.rel
        if r in (Rel.GE, Rel.GT):
            e, r = -e, Rel.LE if r is Rel.GE else Rel.LT
            c = -c
        # now e (<=|<) 0 with coefficient c on v
        bound = (e - AffineExpr(((v, c),))).scale(Fraction(-1) / c)
        if c > 0:
            uppers.append((bound, r is Rel.LT))
        else:
            lowers.append((bound, r is Rel.LT))
    out = set(rest)
    for lo, lo_strict in lowers:
        for hi, hi_strict in uppers:
            rel = Rel.LT if (lo_strict or hi_strict) else Rel.LE
            b = canonicalize(Atom(lo - hi, rel))
            if b.is_trivially_false():
                return None
            if not b.is_trivially_true():
                out.add(b)
    return out


def _fm_order(atoms: set[Atom], elim: list[VarId]) -> list[VarId]:
    """Cheapest-product-first heuristic for the elimination order."""

    def cost(v: VarId) -> tuple[int, str]:
        nlo = nhi = 0
        for a in atoms:
            c = a.expr.coeff(v)
            if c == 0:
                continue
            positive = (c > 0) == (a.rel in (Rel.LE, Rel.LT, Rel.EQ))
            if positive:
                nhi += 1
            else:
                nlo += 1
        return (nlo * nhi, v)

    return sorted(elim, key=cost)


def project_atoms(atoms: Iterable[Atom], elim: Sequence[VarId]) -> Optional[frozenset[Atom]]:
    """Project a conjunction onto the complement of ``elim`` exactly.

    Returns the atom set of the projection, or None when the input cell
    is syntactically contradictory.  The projection of a nonempty cell
    is never None.
    """
    work = {canonicalize(a) for a in atoms}
    if any(a.is_trivially_false() for a in work):
        return None
    work = {a for a in work if not a.is_trivially_true()}
    remaining = set(elim)
    subst = _gauss_substitute(work, remaining)
    if subst is None:
        return None
    work = subst
    present = {v for a in work for v in a.expr.vars()}
    order = _fm_order(work, [v for v in remaining if v in present])
    for v in order:
        nxt = _fm_eliminate_var(work, v)
        if nxt is None:
            return None
        work = nxt
        if len(work) > 48:
            work = set(_prune_redundant(work))
    return frozenset(work)


def _prune_redundant(atoms: set[Atom]) -> frozenset[Atom]:
    """Drop atoms implied by the rest (exact LP feasibility checks)."""
    work = sorted_atoms(atoms)
    kept: list[Atom] = list(work)
    i = 0
    while i < len(kept):
        a = kept[i]
        others = kept[:i] + kept[i + 1 :]
        if _implied_by(others, a):
            kept = others
        else:
            i += 1
    return frozenset(kept)


def _implied_by(atoms: Sequence[Atom], a: Atom) -> bool:
    if a.rel is Rel.EQ:
        lt = Atom.make(a.expr, Rel.LT)
        gt = Atom.make(a.expr, Rel.GT)
        return not lp.is_satisfiable(set(atoms) | {lt}) and not lp.is_satisfiable(
            set(atoms) | {gt}
        )
    return not lp.is_satisfiable(set(atoms) | {a.negated()})


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def is_empty(p: Polyhedron) -> bool:
    """True iff the polyhedron has no rational (equivalently real) point."""
    return not lp.is_satisfiable(p.atoms)


def remove_redundant(p: Polyhedron) -> Polyhedron:
    """Same solution set with no atom implied by the conjunction of the rest."""
    if is_empty(p):
        raise ValueError("remove_redundant expects a nonempty polyhedron")
    return Polyhedron(_prune_redundant(set(p.atoms)))


def eliminate_exists(f: Formula, variables: Sequence[VarId]) -> Formula:
    """Exact projection: drop ``variables`` from an existential closure.

    The input must be quantifier-free and linear; the result's solution
    set over the remaining variables is exactly the shadow of f's.
    """
    if not is_quantifier_free(f):
        raise EliminationError("eliminate_exists expects a quantifier-free body")
    variables = [v for v in variables if v in free_vars(f)]
    if not variables:
        return f
    cells = to_dnf(f)
    out_cells: list[frozenset[Atom]] = []
    for cell in cells:
        proj = project_atoms(cell.atoms, variables)
        if proj is None:
            continue
        if not lp.is_satisfiable(proj):
            continue
        out_cells.append(frozenset(_prune_redundant(set(proj))))
    out_cells = _dedupe_cells(out_cells)
    return lor(*(Polyhedron(c).to_formula() for c in out_cells))


def _dedupe_cells(cells: list[frozenset[Atom]]) -> list[frozenset[Atom]]:
    uniq: list[frozenset[Atom]] = []
    seen: set[frozenset[Atom]] = set()
    for c in cells:
        if c in seen:
            continue
        seen.add(c)
        uniq.append(c)
    # subset-subsumption: a cell with fewer atoms covers a larger region
    out: list[frozenset[Atom]] = []
    for c in sorted(uniq, key=len):
        if any(k <= c for k in out):
            continue
        out.append(c)
    return out


def eliminate_forall(f: Formula, variables: Sequence[VarId]) -> Formula:
    """Universal elimination by duality, returned in negation normal form."""
    return nnf(fnot(eliminate_exists(nnf(fnot(f)), variables)))


def eliminate_all(f: Formula) -> Formula:
    """Eliminate every quantifier in a formula, innermost first."""
    from .formula import Exists, Forall, FAtom, FTrue, FFalse, Implies

    if isinstance(f, (FAtom, FTrue, FFalse)):
        return f
    if isinstance(f, And):
        return land(*(eliminate_all(g) for g in f.args))
    if isinstance(f, Or):
        return lor(*(eliminate_all(g) for g in f.args))
    if isinstance(f, Not):
        return fnot(eliminate_all(f.arg))
    if isinstance(f, Implies):
        return eliminate_all(lor(fnot(f.head), f.body))
    if isinstance(f, Exists):
        return eliminate_exists(eliminate_all(f.body), f.bound)
    assert isinstance(f, Forall)
    return eliminate_forall(eliminate_all(f.body), f.bound)


def satisfiable(f: Formula) -> bool:
    """Satisfiability of a quantifier-free formula (via pruned DNF)."""
    return bool(to_dnf(f))


def implies(f: Formula, g: Formula) -> bool:
    """f entails g (both quantifier-free)."""
    return not satisfiable(land(f, fnot(g)))


def semantically_equal(f: Formula, g: Formula) -> bool:
    """Exact equivalence: both difference directions are empty."""
    return implies(f, g) and implies(g, f)


def simplify_conjunction(f: Formula) -> Formula:
    """Drop conjuncts entailed by the remaining ones (exact checks).

    Works on arbitrary quantifier-free conjuncts (each may be a
    disjunction); useful to compress the products of universal
    elimination before further distribution.
    """
    if not isinstance(f, And):
        return f
    parts = list(f.args)
    i = 0
    while i < len(parts):
        rest = parts[:i] + parts[i + 1 :]
        if not satisfiable(land(land(*rest), fnot(parts[i]))):
            parts = rest
        else:
            i += 1
    return land(*parts)
