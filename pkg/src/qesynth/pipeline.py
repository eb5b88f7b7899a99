"""End-to-end symbolic pipeline from a model to synthesis inputs.

The safety implication is quantified over the cycle's time, volume and
flow variables; eliminating it standalone would have to consider every
ordering of the switch times, most of which the latency constraint
forbids.  The pipeline therefore works per latency disjunct: each
disjunct's atoms seed the elimination as ambient context, the projected
violation cells are negated into clauses, and the stable-interval
region, admissible (L, U) set, feasible cells, and candidate minimizers
are all assembled from those per-disjunct products.  Everything is
cached per model.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

from . import qe
from .formula import (
    Atom,
    Formula,
    Polyhedron,
    QuadExpr,
    Rel,
    atoms_of,
    fatom,
    fnot,
    land,
    lor,
    sorted_atoms,
    to_dnf,
)
from .kkt import KktCandidate, candidates_for_cells
from .models import (
    V0,
    ConstraintSystem,
    OilPumpModel,
    build_constraints,
    build_objective,
)


@dataclass(frozen=True)
class StableBranch:
    """One latency disjunct with its safety clauses.

    ``context & clauses`` is exactly the quantifier-free equivalent of
    the disjunct conjoined with the safety implication.
    """

    context: Polyhedron
    clauses: tuple[Formula, ...]


@dataclass
class Prepared:
    """Cached symbolic products of one model."""

    model: OilPumpModel
    constraints: ConstraintSystem
    objective: QuadExpr
    branches: list[StableBranch]
    stable_qf: Formula
    admissible: Formula
    cells: list[Polyhedron]
    candidates: list[KktCandidate]
    timings: dict[str, float]


def _negate_atom(a: Atom) -> Formula:
    if a.rel is Rel.EQ:
        return lor(fatom(Atom.make(a.expr, Rel.LT)), fatom(Atom.make(a.expr, Rel.GT)))
    return fatom(a.negated())


def _violation_clauses(
    cs: ConstraintSystem, context: Polyhedron, xvars: Sequence[str]
) -> Optional[tuple[Formula, ...]]:
    """Clauses over the free variables forbidding every safety violation.

    Returns None when a violation is unavoidable throughout the context
    (the branch contributes nothing to the stable region).
    """
    violate = land(cs.c1, cs.c3, cs.c4, fnot(land(cs.c5, cs.c6)))
    cells = to_dnf(violate, seed=context.atoms)
    reduced: list[frozenset[Atom]] = []
    for cell in cells:
        proj = qe.project_atoms(cell.atoms, xvars)
        if proj is None:
            continue
        rest = frozenset(a for a in proj if a not in context.atoms)
        rest = _context_prune(rest, context)
        if not rest:
            return None
        reduced.append(rest)
    reduced = _subsume(reduced)
    return tuple(
        lor(*(_negate_atom(a) for a in sorted_atoms(cell))) for cell in reduced
    )


def _context_prune(atoms: frozenset[Atom], context: Polyhedron) -> frozenset[Atom]:
    """Drop atoms implied by the context plus the remaining atoms."""
    from . import lp

    kept = list(sorted_atoms(atoms))
    i = 0
    while i < len(kept):
        others = kept[:i] + kept[i + 1 :]
        base = set(context.atoms) | set(others)
        a = kept[i]
        if a.rel is Rel.EQ:
            implied = not lp.is_satisfiable(
                base | {Atom.make(a.expr, Rel.LT)}
            ) and not lp.is_satisfiable(base | {Atom.make(a.expr, Rel.GT)})
        else:
            implied = not lp.is_satisfiable(base | {a.negated()})
        if implied:
            kept = others
        else:
            i += 1
    return frozenset(kept)


def _subsume(cells: list[frozenset[Atom]]) -> list[frozenset[Atom]]:
    out: list[frozenset[Atom]] = []
    for c in sorted(set(cells), key=lambda s: (len(s), tuple(map(str, sorted_atoms(s))))):
        if any(k <= c for k in out):
            continue
        out.append(c)
    return out


def stable_branches(cs: ConstraintSystem, tvars: Sequence[str]) -> list[StableBranch]:
    """Per latency disjunct: context atoms plus safety clauses."""
    xvars = list(cs.s.bound)
    out = []
    for d in to_dnf(cs.c2):
        clauses = _violation_clauses(cs, d, xvars)
        if clauses is None:
            continue
        out.append(StableBranch(d, clauses))
    return out


def stable_qf_formula(branches: Sequence[StableBranch]) -> Formula:
    """Quantifier-free equivalent of (latency & safety implication)."""
    return lor(
        *(land(b.context.to_formula(), *b.clauses) for b in branches)
    )


def derive_admissible_from_branches(
    cs: ConstraintSystem, branches: Sequence[StableBranch], tvars: Sequence[str]
) -> Formula:
    """Quantifier-free (L, U) region admitting a controller for every v0."""
    from . import lp
    from .formula import fimp

    projected: list[Polyhedron] = []
    for b in branches:
        cells = to_dnf(land(*b.clauses), seed=b.context.atoms)
        for cell in cells:
            proj = qe.project_atoms(cell.atoms, list(tvars))
            if proj is None or not lp.is_satisfiable(proj):
                continue
            projected.append(Polyhedron(frozenset(qe._prune_redundant(set(proj)))))
    reach = lor(*(p.to_formula() for p in _dedupe_polys(projected)))
    result = qe.eliminate_forall(fimp(cs.c7, reach), [V0])
    cells = to_dnf(result)
    return lor(*(qe.remove_redundant(c).to_formula() for c in cells))


def _dedupe_polys(ps: list[Polyhedron]) -> list[Polyhedron]:
    return [Polyhedron(c) for c in _subsume([p.atoms for p in ps])]


def feasible_cells_from_branches(
    cs: ConstraintSystem,
    branches: Sequence[StableBranch],
    admissible: Formula,
) -> list[Polyhedron]:
    """Nonempty irredundant cells of the full feasible switch-time region."""
    out: list[frozenset[Atom]] = []
    for b in branches:
        cells = to_dnf(
            land(cs.c7, admissible, *b.clauses), seed=b.context.atoms
        )
        for cell in cells:
            out.append(frozenset(qe._prune_redundant(set(cell.atoms))))
    return [Polyhedron(c) for c in _subsume(out)]


@lru_cache(maxsize=8)
def prepare(model: OilPumpModel) -> Prepared:
    """Run the whole symbolic stage once for a model, with timings."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    cs = build_constraints(model.profile, model.pump, model.safety)
    g = build_objective(model.profile, model.pump).g
    timings["build"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    branches = stable_branches(cs, model.tvars)
    timings["safety_elimination"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    admissible = derive_admissible_from_branches(cs, branches, model.tvars)
    timings["admissible"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cells = feasible_cells_from_branches(cs, branches, admissible)
    timings["cells"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    candidates = candidates_for_cells(
        g, cells, list(model.tvars), [V0, "L", "U"]
    )
    timings["kkt"] = time.perf_counter() - t0

    return Prepared(
        model=model,
        constraints=cs,
        objective=g,
        branches=branches,
        stable_qf=stable_qf_formula(branches),
        admissible=admissible,
        cells=cells,
        candidates=candidates,
        timings=timings,
    )
