"""Linear-arithmetic expressions, atoms, and first-order formula trees.

Expressions are affine or quadratic over named variables with exact
rational coefficients.  Atoms compare an affine expression against zero
with one of <, <=, =, >=, >; strictness is first-class so open and
closed half-spaces are both representable end to end.  Formulas are
immutable trees over atoms with and/or/not/implies and exists/forall
binders.  A conjunction of atoms is a (possibly open, possibly empty)
convex polyhedron.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .rationals import Rat, ZERO, format_rat

VarId = str


class UnboundVariableError(ValueError):
    """An evaluation met a variable with no assigned value."""


class BindingError(ValueError):
    """A substitution tried to rebind a quantified variable."""


# ---------------------------------------------------------------------------
# Affine and quadratic expressions
# ---------------------------------------------------------------------------


def _norm_coeffs(items: Iterable[tuple[VarId, Rat]]) -> tuple[tuple[VarId, Rat], ...]:
    acc: dict[VarId, Rat] = {}
    for v, c in items:
        if c == 0:
            continue
        nc = acc.get(v, ZERO) + c
        if nc == 0:
            acc.pop(v, None)
        else:
            acc[v] = nc
    return tuple(sorted(acc.items()))


@dataclass(frozen=True)
class AffineExpr:
    """Sum of rational-coefficient variable terms plus a rational constant."""

    coeffs: tuple[tuple[VarId, Rat], ...] = ()
    const: Rat = ZERO

    def coeff(self, v: VarId) -> Rat:
        for name, c in self.coeffs:
            if name == v:
                return c
        return ZERO

    def vars(self) -> set[VarId]:
        return {v for v, _ in self.coeffs}

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other: Union[AffineExpr, Rat, int]) -> AffineExpr:
        if isinstance(other, (Fraction, int)):
            return AffineExpr(self.coeffs, self.const + other)
        return AffineExpr(
            _norm_coeffs(list(self.coeffs) + list(other.coeffs)),
            self.const + other.const,
        )

    __radd__ = __add__

    def __sub__(self, other: Union[AffineExpr, Rat, int]) -> AffineExpr:
        if isinstance(other, (Fraction, int)):
            return AffineExpr(self.coeffs, self.const - other)
        return self + (-other)

    def __rsub__(self, other: Union[Rat, int]) -> AffineExpr:
        return (-self) + other

    def __neg__(self) -> AffineExpr:
        return self.scale(Fraction(-1))

    def scale(self, k: Rat) -> AffineExpr:
        if k == 0:
            return AffineExpr()
        return AffineExpr(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def __mul__(self, k: Union[Rat, int]) -> AffineExpr:
        return self.scale(Fraction(k))

    __rmul__ = __mul__

    def evaluate(self, point: Mapping[VarId, Rat]) -> Rat:
        total = self.const
        for v, c in self.coeffs:
            if v not in point:
                raise UnboundVariableError(v)
            total += c * point[v]
        return total

    def substitute(self, bindings: Mapping[VarId, "AffineExpr"]) -> AffineExpr:
        out = AffineExpr((), self.const)
        for v, c in self.coeffs:
            if v in bindings:
                out = out + bindings[v].scale(c)
            else:
                out = out + AffineExpr(((v, c),))
        return out

    def leading(self) -> Optional[tuple[VarId, Rat]]:
        return self.coeffs[0] if self.coeffs else None

    # Relation builders (named, to keep dataclass __eq__ intact).
    def le(self, other: Union[AffineExpr, Rat, int]) -> "Atom":
        return Atom.make(self - _as_affine(other), Rel.LE)

    def lt(self, other: Union[AffineExpr, Rat, int]) -> "Atom":
        return Atom.make(self - _as_affine(other), Rel.LT)

    def ge(self, other: Union[AffineExpr, Rat, int]) -> "Atom":
        return Atom.make(self - _as_affine(other), Rel.GE)

    def gt(self, other: Union[AffineExpr, Rat, int]) -> "Atom":
        return Atom.make(self - _as_affine(other), Rel.GT)

    def eq(self, other: Union[AffineExpr, Rat, int]) -> "Atom":
        return Atom.make(self - _as_affine(other), Rel.EQ)

    def __str__(self) -> str:
        parts = []
        for v, c in self.coeffs:
            if c == 1:
                parts.append(v)
            elif c == -1:
                parts.append(f"-{v}")
            else:
                parts.append(f"{format_rat(c)}*{v}")
        if self.const != 0 or not parts:
            parts.append(format_rat(self.const))
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out


def _as_affine(x: Union[AffineExpr, Rat, int]) -> AffineExpr:
    if isinstance(x, AffineExpr):
        return x
    return AffineExpr((), Fraction(x))


def var(name: VarId) -> AffineExpr:
    return AffineExpr(((name, Fraction(1)),))


def const(x: Union[Rat, int, str]) -> AffineExpr:
    if isinstance(x, str):
        return AffineExpr((), Fraction(x))
    return AffineExpr((), Fraction(x))


def _norm_quad(
    items: Iterable[tuple[VarId, VarId, Rat]]
) -> tuple[tuple[VarId, VarId, Rat], ...]:
    acc: dict[tuple[VarId, VarId], Rat] = {}
    for a, b, c in items:
        if c == 0:
            continue
        key = (a, b) if a <= b else (b, a)
        nc = acc.get(key, ZERO) + c
        if nc == 0:
            acc.pop(key, None)
        else:
            acc[key] = nc
    return tuple((a, b, c) for (a, b), c in sorted(acc.items()))


@dataclass(frozen=True)
class QuadExpr:
    """Quadratic expression: symmetric degree-2 part plus an affine part.

    The quadratic map stores each unordered pair once with the full
    coefficient of the monomial x*y (so ``quad_coeff(x, x)`` is the
    coefficient of x^2).  Substituting affine expressions for variables
    keeps the result quadratic.
    """

    quad: tuple[tuple[VarId, VarId, Rat], ...] = ()
    affine: AffineExpr = AffineExpr()

    @staticmethod
    def from_affine(a: AffineExpr) -> "QuadExpr":
        return QuadExpr((), a)

    def quad_coeff(self, a: VarId, b: VarId) -> Rat:
        key = (a, b) if a <= b else (b, a)
        for x, y, c in self.quad:
            if (x, y) == key:
                return c
        return ZERO

    def vars(self) -> set[VarId]:
        out = self.affine.vars()
        for a, b, _ in self.quad:
            out.add(a)
            out.add(b)
        return out

    def is_affine(self) -> bool:
        return not self.quad

    def __add__(self, other: Union["QuadExpr", AffineExpr, Rat, int]) -> "QuadExpr":
        o = _as_quad(other)
        return QuadExpr(
            _norm_quad(list(self.quad) + list(o.quad)), self.affine + o.affine
        )

    __radd__ = __add__

    def __sub__(self, other: Union["QuadExpr", AffineExpr, Rat, int]) -> "QuadExpr":
        return self + _as_quad(other).scale(Fraction(-1))

    def __neg__(self) -> "QuadExpr":
        return self.scale(Fraction(-1))

    def scale(self, k: Rat) -> "QuadExpr":
        return QuadExpr(
            tuple((a, b, c * k) for a, b, c in self.quad) if k != 0 else (),
            self.affine.scale(k),
        )

    def __mul__(self, k: Union[Rat, int]) -> "QuadExpr":
        return self.scale(Fraction(k))

    __rmul__ = __mul__

    def evaluate(self, point: Mapping[VarId, Rat]) -> Rat:
        total = self.affine.evaluate(point)
        for a, b, c in self.quad:
            if a not in point or b not in point:
                raise UnboundVariableError(a if a not in point else b)
            total += c * point[a] * point[b]
        return total

    def substitute(self, bindings: Mapping[VarId, AffineExpr]) -> "QuadExpr":
        out = QuadExpr.from_affine(self.affine.substitute(bindings))
        for a, b, c in self.quad:
            ea = bindings.get(a, var(a))
            eb = bindings.get(b, var(b))
            out = out + _affine_product(ea, eb).scale(c)
        return out

    def gradient(self, v: VarId) -> AffineExpr:
        """Partial derivative with respect to v (affine)."""
        out = AffineExpr((), self.affine.coeff(v))
        for a, b, c in self.quad:
            if a == b == v:
                out = out + AffineExpr(((v, 2 * c),))
            elif a == v:
                out = out + AffineExpr(((b, c),))
            elif b == v:
                out = out + AffineExpr(((a, c),))
        return out

    def univariate(self, v: VarId) -> tuple[Rat, Rat, Rat]:
        """Coefficients (a, b, c) of a*v^2 + b*v + c; requires single-var."""
        extra = self.vars() - {v}
        if extra:
            raise UnboundVariableError(sorted(extra)[0])
        return self.quad_coeff(v, v), self.affine.coeff(v), self.affine.const

    def __str__(self) -> str:
        parts = []
        for a, b, c in self.quad:
            mono = f"{a}^2" if a == b else f"{a}*{b}"
            parts.append(f"{format_rat(c)}*{mono}")
        s = " + ".join(parts) if parts else ""
        astr = str(self.affine)
        if s and astr != "0":
            return f"{s} + {astr}"
        return s or astr


def _as_quad(x: Union[QuadExpr, AffineExpr, Rat, int]) -> QuadExpr:
    if isinstance(x, QuadExpr):
        return x
    if isinstance(x, AffineExpr):
        return QuadExpr.from_affine(x)
    return QuadExpr.from_affine(_as_affine(x))


def affine_product(a: AffineExpr, b: AffineExpr) -> QuadExpr:
    """Exact product of two affine expressions (a quadratic)."""
    quad = []
    for va, ca in a.coeffs:
        for vb, cb in b.coeffs:
            quad.append((va, vb, ca * cb))
    lin = b.scale(a.const) + a.scale(b.const) - a.const * b.const
    return QuadExpr(_norm_quad(quad), lin)


_affine_product = affine_product


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------


class Rel(enum.Enum):
    LT = "<"
    LE = "<="
    EQ = "="
    GE = ">="
    GT = ">"

    def flipped(self) -> "Rel":
        return _FLIP[self]

    def negated(self) -> "Rel":
        return _NEG[self]

    def holds(self, x: Rat) -> bool:
        if self is Rel.LT:
            return x < 0
        if self is Rel.LE:
            return x <= 0
        if self is Rel.EQ:
            return x == 0
        if self is Rel.GE:
            return x >= 0
        return x > 0

    @property
    def is_strict(self) -> bool:
        return self in (Rel.LT, Rel.GT)


_FLIP = {Rel.LT: Rel.GT, Rel.LE: Rel.GE, Rel.EQ: Rel.EQ, Rel.GE: Rel.LE, Rel.GT: Rel.LT}
_NEG = {Rel.LT: Rel.GE, Rel.LE: Rel.GT, Rel.EQ: Rel.EQ, Rel.GE: Rel.LT, Rel.GT: Rel.LE}


@dataclass(frozen=True)
class Atom:
    """Canonicalized comparison ``expr rel 0`` over an affine expression.

    Canonical form scales coefficients to coprime integers with positive
    leading coefficient (flipping the relation when negating), so equal
    constraints compare equal.  Variable-free atoms collapse to the
    markers TRUE_ATOM (0 = 0) and FALSE_ATOM (1 = 0).
    """

    expr: AffineExpr
    rel: Rel

    @staticmethod
    def make(expr: AffineExpr, rel: Rel) -> "Atom":
        return canonicalize(Atom(expr, rel))

    def negated(self) -> "Atom":
        if self.rel is Rel.EQ:
            raise ValueError("negated equality is a disjunction, not an atom")
        return Atom.make(self.expr, self.rel.negated())

    def holds_at(self, point: Mapping[VarId, Rat]) -> bool:
        return self.rel.holds(self.expr.evaluate(point))

    def vars(self) -> set[VarId]:
        return self.expr.vars()

    def is_trivially_true(self) -> bool:
        return self.expr.is_constant() and self.rel.holds(self.expr.const)

    def is_trivially_false(self) -> bool:
        return self.expr.is_constant() and not self.rel.holds(self.expr.const)

    def closure(self) -> "Atom":
        if self.rel is Rel.LT:
            return Atom(self.expr, Rel.LE)
        if self.rel is Rel.GT:
            return Atom(self.expr, Rel.GE)
        return self

    def __str__(self) -> str:
        return f"{self.expr} {self.rel.value} 0"


TRUE_ATOM = Atom(AffineExpr(), Rel.EQ)
FALSE_ATOM = Atom(AffineExpr((), Fraction(1)), Rel.EQ)


def canonicalize(a: Atom) -> Atom:
    """Scale to coprime integer coefficients, positive leading coefficient.

    Idempotent; semantically equivalent to the input.  Variable-free
    atoms become TRUE_ATOM or FALSE_ATOM.
    """
    e, rel = a.expr, a.rel
    if e.is_constant():
        return TRUE_ATOM if rel.holds(e.const) else FALSE_ATOM
    nums = [c.numerator for _, c in e.coeffs] + [e.const.numerator]
    dens = [c.denominator for _, c in e.coeffs] + [e.const.denominator]
    scale = Fraction(reduce(_lcm, dens, 1), reduce(gcd, (abs(n) for n in nums if n), 0) or 1)
    lead = e.coeffs[0][1]
    if lead < 0:
        scale = -scale
        rel = rel.flipped()
    if scale != 1:
        e = e.scale(scale)
    return Atom(e, rel)


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


class Formula:
    """Base class; use the helper constructors land/lor/fnot/fimp."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return land(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return lor(self, other)

    def __invert__(self) -> "Formula":
        return fnot(self)


@dataclass(frozen=True)
class FTrue(Formula):
    pass


@dataclass(frozen=True)
class FFalse(Formula):
    pass


@dataclass(frozen=True)
class FAtom(Formula):
    atom: Atom


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class Implies(Formula):
    head: Formula
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    bound: tuple[VarId, ...]
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    bound: tuple[VarId, ...]
    body: Formula


TRUE = FTrue()
FALSE = FFalse()


def fatom(a: Atom) -> Formula:
    a = canonicalize(a)
    if a == TRUE_ATOM:
        return TRUE
    if a == FALSE_ATOM:
        return FALSE
    return FAtom(a)


def land(*fs: Formula) -> Formula:
    flat: list[Formula] = []
    seen: set[Formula] = set()
    for f in fs:
        if isinstance(f, FFalse):
            return FALSE
        if isinstance(f, FTrue):
            continue
        parts = f.args if isinstance(f, And) else (f,)
        for p in parts:
            if p not in seen:
                seen.add(p)
                flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def lor(*fs: Formula) -> Formula:
    flat: list[Formula] = []
    seen: set[Formula] = set()
    for f in fs:
        if isinstance(f, FTrue):
            return TRUE
        if isinstance(f, FFalse):
            continue
        parts = f.args if isinstance(f, Or) else (f,)
        for p in parts:
            if p not in seen:
                seen.add(p)
                flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def fnot(f: Formula) -> Formula:
    if isinstance(f, FTrue):
        return FALSE
    if isinstance(f, FFalse):
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def fimp(head: Formula, body: Formula) -> Formula:
    if isinstance(head, FFalse) or isinstance(body, FTrue):
        return TRUE
    if isinstance(head, FTrue):
        return body
    return Implies(head, body)


def exists(vs: Sequence[VarId], body: Formula) -> Formula:
    vs = tuple(vs)
    if not vs:
        return body
    return Exists(vs, body)


def forall(vs: Sequence[VarId], body: Formula) -> Formula:
    vs = tuple(vs)
    if not vs:
        return body
    return Forall(vs, body)


def iter_subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, (And, Or)):
        for g in f.args:
            yield from iter_subformulas(g)
    elif isinstance(f, Not):
        yield from iter_subformulas(f.arg)
    elif isinstance(f, Implies):
        yield from iter_subformulas(f.head)
        yield from iter_subformulas(f.body)
    elif isinstance(f, (Exists, Forall)):
        yield from iter_subformulas(f.body)


def atoms_of(f: Formula) -> set[Atom]:
    return {g.atom for g in iter_subformulas(f) if isinstance(g, FAtom)}


def free_vars(f: Formula) -> set[VarId]:
    if isinstance(f, (FTrue, FFalse)):
        return set()
    if isinstance(f, FAtom):
        return f.atom.vars()
    if isinstance(f, (And, Or)):
        out: set[VarId] = set()
        for g in f.args:
            out |= free_vars(g)
        return out
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, Implies):
        return free_vars(f.head) | free_vars(f.body)
    assert isinstance(f, (Exists, Forall))
    return free_vars(f.body) - set(f.bound)


def bound_vars(f: Formula) -> set[VarId]:
    out: set[VarId] = set()
    for g in iter_subformulas(f):
        if isinstance(g, (Exists, Forall)):
            out |= set(g.bound)
    return out


def is_quantifier_free(f: Formula) -> bool:
    return not any(isinstance(g, (Exists, Forall)) for g in iter_subformulas(f))


def check_bindings(f: Formula, outer: frozenset[VarId] = frozenset()) -> None:
    """Reject variables bound more than once on a root-to-leaf path."""
    if isinstance(f, (Exists, Forall)):
        clash = outer & set(f.bound)
        if clash:
            raise BindingError(f"rebinding of {sorted(clash)}")
        check_bindings(f.body, outer | set(f.bound))
    elif isinstance(f, (And, Or)):
        for g in f.args:
            check_bindings(g, outer)
    elif isinstance(f, Not):
        check_bindings(f.arg, outer)
    elif isinstance(f, Implies):
        check_bindings(f.head, outer)
        check_bindings(f.body, outer)


def substitute(f: Formula, bindings: Mapping[VarId, AffineExpr]) -> Formula:
    """Replace free variables by affine expressions.

    Binding a quantified variable is rejected; quantified names may not
    appear in the replacement expressions either (capture).
    """
    if not bindings:
        return f
    if isinstance(f, (FTrue, FFalse)):
        return f
    if isinstance(f, FAtom):
        return fatom(Atom.make(f.atom.expr.substitute(bindings), f.atom.rel))
    if isinstance(f, And):
        return land(*(substitute(g, bindings) for g in f.args))
    if isinstance(f, Or):
        return lor(*(substitute(g, bindings) for g in f.args))
    if isinstance(f, Not):
        return fnot(substitute(f.arg, bindings))
    if isinstance(f, Implies):
        return fimp(substitute(f.head, bindings), substitute(f.body, bindings))
    assert isinstance(f, (Exists, Forall))
    hit = set(f.bound) & set(bindings)
    if hit:
        raise BindingError(f"cannot substitute quantified variables {sorted(hit)}")
    for v, e in bindings.items():
        if set(f.bound) & e.vars():
            raise BindingError(f"substitution for {v} would capture {f.bound}")
    body = substitute(f.body, bindings)
    return exists(f.bound, body) if isinstance(f, Exists) else forall(f.bound, body)


def evaluate(f: Formula, point: Mapping[VarId, Rat]) -> bool:
    """Truth value of a quantifier-free formula at a rational point."""
    if isinstance(f, FTrue):
        return True
    if isinstance(f, FFalse):
        return False
    if isinstance(f, FAtom):
        return f.atom.holds_at(point)
    if isinstance(f, And):
        return all(evaluate(g, point) for g in f.args)
    if isinstance(f, Or):
        return any(evaluate(g, point) for g in f.args)
    if isinstance(f, Not):
        return not evaluate(f.arg, point)
    if isinstance(f, Implies):
        return (not evaluate(f.head, point)) or evaluate(f.body, point)
    raise ValueError("cannot evaluate a quantified formula at a point")


def nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form; implications expanded, negation at atoms only.

    Negated atoms are rewritten as atoms with the complementary
    relation (negated equalities become strict disjunctions).
    """
    if isinstance(f, FTrue):
        return FALSE if negate else TRUE
    if isinstance(f, FFalse):
        return TRUE if negate else FALSE
    if isinstance(f, FAtom):
        if not negate:
            return f
        a = f.atom
        if a.rel is Rel.EQ:
            return lor(fatom(Atom.make(a.expr, Rel.LT)), fatom(Atom.make(a.expr, Rel.GT)))
        return fatom(a.negated())
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, Implies):
        return nnf(lor(fnot(f.head), f.body), negate)
    if isinstance(f, And):
        parts = tuple(nnf(g, negate) for g in f.args)
        return lor(*parts) if negate else land(*parts)
    if isinstance(f, Or):
        parts = tuple(nnf(g, negate) for g in f.args)
        return land(*parts) if negate else lor(*parts)
    assert isinstance(f, (Exists, Forall))
    body = nnf(f.body, negate)
    if isinstance(f, Exists):
        return forall(f.bound, body) if negate else exists(f.bound, body)
    return exists(f.bound, body) if negate else forall(f.bound, body)


# ---------------------------------------------------------------------------
# Polyhedra and disjunctive normal form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Polyhedron:
    """Conjunction of atoms: a convex, possibly open, possibly empty set."""

    atoms: frozenset[Atom]

    @staticmethod
    def of(items: Iterable[Atom]) -> "Polyhedron":
        out = set()
        for a in items:
            a = canonicalize(a)
            if a == TRUE_ATOM:
                continue
            out.add(a)
        return Polyhedron(frozenset(out))

    def vars(self) -> set[VarId]:
        out: set[VarId] = set()
        for a in self.atoms:
            out |= a.vars()
        return out

    def to_formula(self) -> Formula:
        if FALSE_ATOM in self.atoms:
            return FALSE
        return land(*(FAtom(a) for a in sorted_atoms(self.atoms)))

    def contains(self, point: Mapping[VarId, Rat]) -> bool:
        return all(a.holds_at(point) for a in self.atoms)

    def closure(self) -> "Polyhedron":
        return Polyhedron(frozenset(a.closure() for a in self.atoms))


def atom_sort_key(a: Atom) -> tuple:
    return (
        tuple((v, c.numerator, c.denominator) for v, c in a.expr.coeffs),
        a.expr.const.numerator,
        a.expr.const.denominator,
        a.rel.value,
    )


def sorted_atoms(atoms: Iterable[Atom]) -> list[Atom]:
    return sorted(atoms, key=atom_sort_key)


def _form_of(expr: AffineExpr) -> tuple[tuple, Fraction]:
    """Canonical (variable-part key, scaled constant) of a linear form.

    The variable part is scaled to coprime integers with a positive
    leading coefficient; the returned constant is the atom's constant
    under the same scaling (negative scales flip relations, handled by
    the caller via the scale's sign embedded in the key construction).
    """
    nums = [c.numerator for _, c in expr.coeffs]
    dens = [c.denominator for _, c in expr.coeffs]
    scale = Fraction(
        reduce(_lcm, dens, 1), reduce(gcd, (abs(n) for n in nums if n), 0) or 1
    )
    if expr.coeffs[0][1] < 0:
        scale = -scale
    key = tuple((v, c * scale) for v, c in expr.coeffs)
    return key, expr.const * scale


class _Bounds:
    """Interval bounds per canonical linear form, plus per-variable bounds.

    A cheap incremental filter in front of the exact LP: clashing
    constraints on the same linear combination (single variables,
    differences like t - t1, any shared form) are caught in O(1).
    Entries are (lo, lo_strict, hi, hi_strict) with None for absent
    bounds.
    """

    __slots__ = ("forms",)

    def __init__(self, forms: Optional[dict] = None):
        self.forms = forms if forms is not None else {}

    def copy(self) -> "_Bounds":
        return _Bounds(dict(self.forms))

    def _var_range(self, v: VarId):
        return self.forms.get(((v, Fraction(1)),), (None, False, None, False))

    def _range_of(self, expr: AffineExpr):
        lo = hi = expr.const
        lo_ok = hi_ok = True
        for v, c in expr.coeffs:
            vlo, _, vhi, _ = self._var_range(v)
            a, b = (vlo, vhi) if c > 0 else (vhi, vlo)
            if a is None:
                lo_ok = False
            elif lo_ok:
                lo += c * a
            if b is None:
                hi_ok = False
            elif hi_ok:
                hi += c * b
        return (lo if lo_ok else None), (hi if hi_ok else None)

    @staticmethod
    def _against(lo, los, hi, his, bound: Fraction, rel: Rel) -> str:
        # status of "form rel bound" given form in (lo, hi)
        if rel in (Rel.LE, Rel.LT):
            if lo is not None and (lo > bound or (lo == bound and (rel is Rel.LT or los))):
                return "contradiction"
            if hi is not None and (hi < bound or (hi == bound and (rel is Rel.LE or his))):
                return "implied"
        elif rel in (Rel.GE, Rel.GT):
            if hi is not None and (hi < bound or (hi == bound and (rel is Rel.GT or his))):
                return "contradiction"
            if lo is not None and (lo > bound or (lo == bound and (rel is Rel.GE or los))):
                return "implied"
        else:
            if lo is not None and (lo > bound or (lo == bound and los)):
                return "contradiction"
            if hi is not None and (hi < bound or (hi == bound and his)):
                return "contradiction"
            if lo == bound == hi:
                return "implied"
        return "unknown"

    def check(self, atom: Atom) -> str:
        """'contradiction', 'implied', or 'unknown' under current bounds.

        Atoms are canonical (positive leading coefficient), so the form
        key never flips the relation.
        """
        key, k = _form_of(atom.expr)
        if key in self.forms:
            st = self._against(*self.forms[key], -k, atom.rel)
            if st != "unknown":
                return st
        lo, hi = self._range_of(atom.expr)
        if lo is None and hi is None:
            return "unknown"
        r = atom.rel
        if r in (Rel.LE, Rel.LT):
            if lo is not None and (lo > 0 or (lo == 0 and r is Rel.LT)):
                return "contradiction"
            if hi is not None and (hi < 0 or (hi == 0 and r is Rel.LE)):
                return "implied"
        elif r in (Rel.GE, Rel.GT):
            if hi is not None and (hi < 0 or (hi == 0 and r is Rel.GT)):
                return "contradiction"
            if lo is not None and (lo > 0 or (lo == 0 and r is Rel.GE)):
                return "implied"
        else:
            if (lo is not None and lo > 0) or (hi is not None and hi < 0):
                return "contradiction"
            if lo is not None and hi is not None and lo == hi == 0:
                return "implied"
        return "unknown"

    def record(self, atom: Atom) -> bool:
        """Tighten the atom's form bounds; False on an interval clash."""
        key, k = _form_of(atom.expr)
        rel = atom.rel
        bound = -k
        lo, los, hi, his = self.forms.get(key, (None, False, None, False))
        if rel in (Rel.LE, Rel.LT, Rel.EQ):
            s = rel is Rel.LT
            if hi is None or bound < hi or (bound == hi and s):
                hi, his = bound, s
        if rel in (Rel.GE, Rel.GT, Rel.EQ):
            s = rel is Rel.GT
            if lo is None or bound > lo or (bound == lo and s):
                lo, los = bound, s
        self.forms[key] = (lo, los, hi, his)
        if lo is not None and hi is not None:
            if lo > hi or (lo == hi and (los or his)):
                return False
        return True


def to_dnf(
    f: Formula, prune: bool = True, seed: Iterable[Atom] = ()
) -> list[Polyhedron]:
    """Disjunctive normal form of a quantifier-free formula.

    Returns polyhedral cells whose union equals the solution set (each
    cell conjoined with the ``seed`` atoms, which act as an ambient
    context and are included in the output cells).  Cells are expanded
    lazily conjunct by conjunct; with ``prune`` each partial cell is
    checked for emptiness (interval bounds, then witness reuse, then an
    exact LP) before any sibling work, which keeps large structured
    inputs from blowing up.  Empty cells never survive.
    """
    if not is_quantifier_free(f):
        raise ValueError("DNF requires a quantifier-free formula")
    g = nnf(f)
    if isinstance(g, FFalse):
        return []
    seed_atoms = frozenset(canonicalize(a) for a in seed)
    if isinstance(g, FTrue) and not seed_atoms:
        return [Polyhedron(frozenset())]

    from .lp import feasible_with_witness  # local import; lp builds on atoms only

    def extend(cell, atom: Atom):
        """Add one atom to (atoms, witness, bounds); None when infeasible."""
        atoms, w, bounds = cell
        if atom in atoms:
            return cell
        status = bounds.check(atom) if prune else "unknown"
        if status == "contradiction":
            return None
        if status == "implied":
            return cell
        nb = bounds.copy()
        if prune and not nb.record(atom):
            return None
        na = atoms | {atom}
        if not prune:
            return na, None, nb
        if w is not None:
            try:
                if atom.holds_at(w):
                    return na, w, nb
            except UnboundVariableError:
                pass
        w2 = feasible_with_witness(na)
        if w2 is None:
            return None
        return na, w2, nb

    def expand(node: Formula, cells: list):
        if isinstance(node, FAtom):
            out = []
            for cell in cells:
                nc = extend(cell, node.atom)
                if nc is not None:
                    out.append(nc)
            return out
        if isinstance(node, And):
            for child in sorted(node.args, key=_branching_width):
                cells = expand(child, cells)
                if not cells:
                    return []
            return cells
        if isinstance(node, Or):
            out = []
            seen: set[frozenset[Atom]] = set()
            for child in node.args:
                for cell in expand(child, cells):
                    if cell[0] not in seen:
                        seen.add(cell[0])
                        out.append(cell)
            return out
        if isinstance(node, FTrue):
            return cells
        if isinstance(node, FFalse):
            return []
        raise ValueError(f"unexpected node in NNF: {type(node).__name__}")

    root: list = [(frozenset(), None, _Bounds())]
    for a in sorted_atoms(seed_atoms):
        if a.is_trivially_false():
            return []
        if a.is_trivially_true():
            continue
        root = [c for c in (extend(root[0], a),) if c is not None] if root else []
        if not root:
            return []
    raw = expand(g, root)
    # Final exact emptiness filter (cheap paths may have skipped the LP).
    cells = []
    for atoms, w, _ in raw:
        if prune and w is None:
            w = feasible_with_witness(atoms)
            if w is None:
                continue
        cells.append(frozenset(atoms))
    # Drop cells subsumed by a syntactic subset (superset of atoms is a
    # subset region, so keep the smaller atom set).
    cells = _drop_subsumed(cells)
    return [Polyhedron(c) for c in cells]


def _branching_width(f: Formula) -> int:
    if isinstance(f, Or):
        return len(f.args)
    if isinstance(f, And):
        return max((_branching_width(g) for g in f.args), default=1)
    return 1


def _drop_subsumed(cells: list[frozenset[Atom]]) -> list[frozenset[Atom]]:
    order = sorted(range(len(cells)), key=lambda i: len(cells[i]))
    keep: list[frozenset[Atom]] = []
    for i in order:
        c = cells[i]
        if any(k <= c for k in keep):
            continue
        keep.append(c)
    index = {id(c): j for j, c in enumerate(cells)}
    keep.sort(key=lambda c: index[id(c)])
    return keep
