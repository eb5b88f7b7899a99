"""Exact rational scalars and quadratic surds.

All numeric computation in the core is exact.  Scalars are
``fractions.Fraction`` (aliased ``Rat``); decimal strings such as
``"1.1"`` parse to exact rationals (11/10).  ``Surd`` represents numbers
of the form r + s*sqrt(d) with rational r, s, d, which arise as
intersection points of univariate rational quadratics.  Comparisons
between surds are exact: algebraic equality is decided symbolically and
strict orderings by interval refinement of square-root enclosures.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Optional, Union

Rat = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


def rat(x: Union[Rat, int, str]) -> Rat:
    """Parse an exact rational from an int or a string like '3/4' or '1.1'.

    Floats are rejected: binary floating point never enters the core.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        raise TypeError("floats are not exact; pass a string or Fraction")
    return Fraction(str(x).strip())


def format_rat(x: Rat) -> str:
    """Render as 'p/q' (or bare integer when q == 1)."""
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def rational_sqrt(d: Rat) -> Optional[Rat]:
    """Exact square root of d if it is the square of a rational, else None."""
    if d < 0:
        return None
    if d == 0:
        return ZERO
    n, m = d.numerator, d.denominator
    rn, rm = isqrt(n), isqrt(m)
    if rn * rn == n and rm * rm == m:
        return Fraction(rn, rm)
    return None


def _sqrt_enclosure(d: Rat, k: int) -> tuple[Rat, Rat]:
    """Rational interval [lo, hi] containing sqrt(d), width <= 2**-k, d > 0."""
    lo, hi = ZERO, d if d >= 1 else ONE
    for _ in range(k + (hi - lo).numerator.bit_length() + 1):
        mid = (lo + hi) / 2
        if mid * mid <= d:
            lo = mid
        else:
            hi = mid
        if hi - lo <= Fraction(1, 2 ** k):
            break
    return lo, hi


@dataclass(frozen=True)
class Surd:
    """Exact value r + s*sqrt(d) with s != 0 and d > 0 not a rational square.

    Use :func:`surd` to construct; it folds degenerate cases back to Rat.
    """

    r: Rat
    s: Rat
    d: Rat

    def __post_init__(self) -> None:
        if self.s == 0:
            raise ValueError("degenerate surd; use surd() constructor")

    def enclosure(self, k: int) -> tuple[Rat, Rat]:
        lo, hi = _sqrt_enclosure(self.d, k)
        if self.s >= 0:
            return self.r + self.s * lo, self.r + self.s * hi
        return self.r + self.s * hi, self.r + self.s * lo

    def __float__(self) -> float:
        lo, hi = self.enclosure(60)
        return float((lo + hi) / 2)

    def __repr__(self) -> str:
        return f"({format_rat(self.r)} + {format_rat(self.s)}*sqrt({format_rat(self.d)}))"

    def __lt__(self, other: object) -> bool:
        return cmp_values(self, _as_value(other)) < 0

    def __le__(self, other: object) -> bool:
        return cmp_values(self, _as_value(other)) <= 0

    def __gt__(self, other: object) -> bool:
        return cmp_values(self, _as_value(other)) > 0

    def __ge__(self, other: object) -> bool:
        return cmp_values(self, _as_value(other)) >= 0

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (Surd, Fraction, int)):
            return cmp_values(self, _as_value(other)) == 0
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.r, self.s, self.d))


Value = Union[Rat, Surd]


def _as_value(x: object) -> Value:
    if isinstance(x, (Surd, Fraction)):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"not an exact value: {x!r}")


def surd(r: Rat, s: Rat, d: Rat) -> Value:
    """Construct r + s*sqrt(d), folding to a plain rational when possible."""
    if s == 0 or d == 0:
        return r
    if d < 0:
        raise ValueError("negative radicand")
    root = rational_sqrt(d)
    if root is not None:
        return r + s * root
    return Surd(r, s, d)


def _sign_rat(x: Rat) -> int:
    return (x > 0) - (x < 0)


def _sign_one_radical(w: Rat, v: Rat, b: Rat) -> int:
    """Sign of w + v*sqrt(b) with b > 0 not a square, v != 0."""
    if v > 0:
        if w >= 0:
            return 1
        return _sign_rat(v * v * b - w * w)
    if w <= 0:
        return -1
    return _sign_rat(w * w - v * v * b)


def sign_of(x: Value) -> int:
    if isinstance(x, Fraction):
        return _sign_rat(x)
    return _sign_one_radical(x.r, x.s, x.d)


def cmp_values(a: Value, b: Value) -> int:
    """Exact three-way comparison of rationals and quadratic surds."""
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return _sign_rat(a - b)
    if isinstance(a, Fraction):
        return -cmp_values(b, a)
    assert isinstance(a, Surd)
    if isinstance(b, Fraction):
        return _sign_one_radical(a.r - b, a.s, a.d)
    # Both surds.  If the radicands share a square ratio the radicals fold.
    ratio = rational_sqrt(a.d / b.d)
    if ratio is not None:
        # sqrt(a.d) == ratio * sqrt(b.d)
        return _sign_two_terms(a.r - b.r, a.s * ratio - b.s, b.d)
    # 1, sqrt(a.d), sqrt(b.d) are linearly independent over Q, so the
    # difference cannot be zero; refine enclosures until the sign shows.
    k = 8
    while True:
        alo, ahi = a.enclosure(k)
        blo, bhi = b.enclosure(k)
        if ahi < blo:
            return -1
        if bhi < alo:
            return 1
        k *= 2
        if k > 4096:  # pragma: no cover - independence guarantees termination
            raise RuntimeError("surd comparison failed to separate")


def _sign_two_terms(w: Rat, v: Rat, d: Rat) -> int:
    if v == 0:
        return _sign_rat(w)
    return _sign_one_radical(w, v, d)


def value_min(a: Value, b: Value) -> Value:
    return a if cmp_values(a, b) <= 0 else b


def value_max(a: Value, b: Value) -> Value:
    return a if cmp_values(a, b) >= 0 else b


def rational_between(a: Value, b: Value) -> Rat:
    """Some rational strictly between a and b (requires a < b)."""
    if cmp_values(a, b) >= 0:
        raise ValueError("need a < b")
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return (a + b) / 2
    k = 8
    while True:
        alo, ahi = (a, a) if isinstance(a, Fraction) else a.enclosure(k)
        blo, bhi = (b, b) if isinstance(b, Fraction) else b.enclosure(k)
        if ahi < blo:
            return (ahi + blo) / 2
        k *= 2


def quad_eval(a: Rat, b: Rat, c: Rat, x: Value) -> Value:
    """Evaluate a*x^2 + b*x + c exactly; closed over Q(sqrt(d))."""
    if isinstance(x, Fraction):
        return a * x * x + b * x + c
    # (r + s*sqrt(d))^2 = r^2 + s^2 d + 2 r s sqrt(d)
    rr = x.r * x.r + x.s * x.s * x.d
    rs = 2 * x.r * x.s
    return surd(a * rr + b * x.r + c, a * rs + b * x.s, x.d)


def quad_roots(a: Rat, b: Rat, c: Rat) -> list[Value]:
    """Real roots of a*x^2 + b*x + c, ascending; [] when there are none.

    A zero quadratic raises: the caller must not ask for roots of 0.
    """
    if a == 0:
        if b == 0:
            if c == 0:
                raise ValueError("zero polynomial has no root list")
            return []
        return [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    if disc == 0:
        return [-b / (2 * a)]
    half = Fraction(1, 2 * a)
    r1 = surd(-b * half, -abs(half), disc)
    r2 = surd(-b * half, abs(half), disc)
    return [r1, r2]
