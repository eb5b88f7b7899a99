"""Declarative switched accumulator models and their constraint systems.

A model describes one consumption cycle of an accumulator served by an
on/off pump: a piecewise-constant consumption band (lower/upper rate per
segment), the pump's rate, switching latency and allowed activation
count, volume safety limits, measurement error bounds, and the declared
rectification margin.  From that description this module constructs,
fully symbolically:

  * the cumulative-consumption band constraint over one cycle,
  * the switch-time latency constraint for n activations,
  * the pumped-volume curve and the volume balance,
  * rectified end-of-cycle and local safety constraints,
  * the per-cycle average-volume objective (exact symbolic integral of
    the nominal, fluctuation-free cycle),

and derives the admissible (L, U) region and the feasible
switch-time cells by linear quantifier elimination.

Model files are JSON with every number written as a decimal or
fraction string, parsed to exact rationals:

    {
      "name": "...",
      "period": "20",
      "consumption": [{"t0": "0", "t1": "2", "rate_lo": "0", "rate_hi": "0"}, ...],
      "pump": {"rate": "2.2", "latency": "2", "activations": 2},
      "safety": {"vmin": "4.9", "vmax": "25.1", "eps": "0.06", "delta": "0.015"},
      "rectify_margin": "0.2"
    }

The nominal (fluctuation-free) consumption used by the objective is the
midpoint of each segment's rate band; for the shipped fixtures this
reproduces the known closed-form objective exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

from . import qe
from .formula import (
    AffineExpr,
    Atom,
    Formula,
    Polyhedron,
    QuadExpr,
    Rel,
    VarId,
    affine_product,
    exists,
    fatom,
    fimp,
    forall,
    land,
    lor,
    to_dnf,
    var,
)
from .rationals import Rat, rat

V0, LNAME, UNAME, TIME, VOL, VIN, VOUT = "v0", "L", "U", "t", "v", "V_in", "V_out"


class ModelError(ValueError):
    """The model description is malformed or inconsistent."""


class MarginError(ModelError):
    """The exact deviation margin is not below the declared rectification."""


@dataclass(frozen=True)
class Segment:
    t0: Rat
    t1: Rat
    rate_lo: Rat
    rate_hi: Rat

    @property
    def rate_nom(self) -> Rat:
        return (self.rate_lo + self.rate_hi) / 2


@dataclass(frozen=True)
class ConsumptionProfile:
    """Piecewise-constant consumption band over one cycle.

    Cumulative envelopes integrate the band rates; the cumulative curve
    starts at zero and is continuous across segment boundaries.
    """

    segments: tuple[Segment, ...]
    period: Rat

    def __post_init__(self) -> None:
        if not self.segments:
            raise ModelError("consumption profile needs at least one segment")
        if self.segments[0].t0 != 0:
            raise ModelError("first consumption segment must start at 0")
        if self.segments[-1].t1 != self.period:
            raise ModelError("last consumption segment must end at the period")
        for a, b in zip(self.segments, self.segments[1:]):
            if a.t1 != b.t0:
                raise ModelError(f"consumption gap or overlap at t = {a.t1}")
        for s in self.segments:
            if s.t0 >= s.t1:
                raise ModelError(f"empty consumption segment at t = {s.t0}")
            if s.rate_lo > s.rate_hi or s.rate_lo < 0:
                raise ModelError(f"bad rate band on segment at t = {s.t0}")

    @property
    def fluctuation(self) -> Rat:
        return max(((s.rate_hi - s.rate_lo) / 2 for s in self.segments), default=rat(0))

    def _cum_starts(self, which: str) -> list[Rat]:
        starts = [rat(0)]
        for s in self.segments:
            r = getattr(s, f"rate_{which}") if which != "nom" else s.rate_nom
            starts.append(starts[-1] + r * (s.t1 - s.t0))
        return starts

    def cum_bounds(self) -> list[tuple[Segment, AffineExpr, AffineExpr]]:
        """Per segment: (segment, lower cumulative, upper cumulative) in t."""
        lo_starts = self._cum_starts("lo")
        hi_starts = self._cum_starts("hi")
        t = var(TIME)
        out = []
        for i, s in enumerate(self.segments):
            lo = (t - s.t0) * s.rate_lo + lo_starts[i]
            hi = (t - s.t0) * s.rate_hi + hi_starts[i]
            out.append((s, lo, hi))
        return out

    def cum_at(self, x: Rat, which: str = "nom") -> Rat:
        if not 0 <= x <= self.period:
            raise ValueError(f"time {x} outside the cycle")
        starts = self._cum_starts(which)
        for i, s in enumerate(self.segments):
            if x <= s.t1:
                r = getattr(s, f"rate_{which}") if which != "nom" else s.rate_nom
                return starts[i] + r * (x - s.t0)
        return starts[-1]

    def breakpoints(self) -> list[Rat]:
        return [self.segments[0].t0] + [s.t1 for s in self.segments]


@dataclass(frozen=True)
class PumpSpec:
    rate: Rat
    latency: Rat
    activations: int

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise ModelError("pump rate must be positive")
        if self.latency < 0:
            raise ModelError("pump latency must be nonnegative")
        if not 0 <= self.activations <= 3:
            raise ModelError("supported activation counts are 0..3")

    @property
    def switch_vars(self) -> tuple[VarId, ...]:
        return tuple(f"t{i}" for i in range(1, 2 * self.activations + 1))


@dataclass(frozen=True)
class SafetySpec:
    vmin: Rat
    vmax: Rat
    eps: Rat
    delta: Rat
    margin: Rat  # declared rectification bound

    def __post_init__(self) -> None:
        if self.vmin + 2 * self.margin >= self.vmax:
            raise ModelError("safety window closes under the declared margin")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Per-cycle average volume as an exact quadratic in (v0, switch times)."""

    g: QuadExpr


@dataclass(frozen=True)
class OilPumpModel:
    name: str
    profile: ConsumptionProfile
    pump: PumpSpec
    safety: SafetySpec

    @property
    def tvars(self) -> tuple[VarId, ...]:
        return self.pump.switch_vars


@dataclass(frozen=True)
class ConstraintSystem:
    """The full constraint stack of one model."""

    c1: Formula  # cumulative consumption band
    c2: Formula  # switch ordering and latency
    c3: Formula  # pumped volume curve
    c4: Formula  # volume balance
    c5: Formula  # rectified end-of-cycle window
    c6: Formula  # rectified local safety
    c7: Formula  # v0 within [L, U]
    s: Formula  # quantified safety implication
    c8: Formula  # quantified stable-interval condition


def load_model(source: Union[str, Path, dict]) -> OilPumpModel:
    """Load and validate a model from a JSON file, fixture name, or dict."""
    if isinstance(source, dict):
        doc = source
        name = doc.get("name", "unnamed")
    else:
        path = Path(source)
        if not path.exists():
            fp = fixture_path(str(source))
            if fp is not None:
                path = fp
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ModelError(f"model file not found: {source}")
        except json.JSONDecodeError as e:
            raise ModelError(f"model file is not valid JSON: {e}")
        name = doc.get("name", path.stem)
    try:
        period = rat(doc["period"])
        segments = tuple(
            Segment(rat(s["t0"]), rat(s["t1"]), rat(s["rate_lo"]), rat(s["rate_hi"]))
            for s in doc["consumption"]
        )
        profile = ConsumptionProfile(segments, period)
        p = doc["pump"]
        pump = PumpSpec(rat(p["rate"]), rat(p["latency"]), int(p["activations"]))
        sf = doc["safety"]
        safety = SafetySpec(
            rat(sf["vmin"]),
            rat(sf["vmax"]),
            rat(sf["eps"]),
            rat(sf["delta"]),
            rat(doc["rectify_margin"]),
        )
    except KeyError as e:
        raise ModelError(f"model is missing field {e.args[0]!r}")
    model = OilPumpModel(name, profile, pump, safety)
    deviation_margin(model.pump, model.safety, 2 * model.pump.activations)
    return model


def fixture_path(name: str) -> Optional[Path]:
    """Path of a packaged model fixture ('oilpump2', 'oilpump3')."""
    base = name if name.endswith(".json") else f"{name}.json"
    candidate = resources.files("qesynth").joinpath("fixtures", base)
    try:
        if candidate.is_file():
            return Path(str(candidate))
    except (OSError, TypeError):  # pragma: no cover
        pass
    return None


def deviation_margin(pump: PumpSpec, safety: SafetySpec, switch_points: int) -> Rat:
    """Exact worst-case deviation between predicted and actual volume.

    One volume measurement contributes eps; each switch point
    contributes rate*delta.  The exact value must be strictly below the
    declared rectification margin, otherwise rectified safety would not
    imply true safety.
    """
    if switch_points < 0:
        raise ValueError("switch_points must be nonnegative")
    exact = pump.rate * switch_points * safety.delta + safety.eps
    if switch_points > 0 or safety.eps > 0:
        if exact >= safety.margin:
            raise MarginError(
                f"deviation {exact} is not below the declared margin {safety.margin}"
            )
    return exact


# ---------------------------------------------------------------------------
# Constraint construction
# ---------------------------------------------------------------------------


def _band_formula(seg: Segment, lo: AffineExpr, hi: AffineExpr) -> Formula:
    t = var(TIME)
    head = land(fatom(t.ge(seg.t0)), fatom(t.le(seg.t1)))
    vout = var(VOUT)
    if lo == hi:
        body: Formula = fatom(vout.eq(lo))
    else:
        body = land(fatom(vout.ge(lo)), fatom(vout.le(hi)))
    return fimp(head, body)


def consumption_constraint(profile: ConsumptionProfile) -> Formula:
    return land(*(_band_formula(s, lo, hi) for s, lo, hi in profile.cum_bounds()))


def latency_constraint(pump: PumpSpec, period: Rat) -> Formula:
    """Ordering, latency, and parking of unused switch times at the period."""
    names = pump.switch_vars
    disjuncts = []
    for k in range(pump.activations, -1, -1):
        atoms = []
        used = 2 * k
        if used:
            atoms.append(fatom(var(names[0]).ge(pump.latency)))
            for i in range(1, used):
                atoms.append(
                    fatom((var(names[i]) - var(names[i - 1])).ge(pump.latency))
                )
            atoms.append(fatom(var(names[used - 1]).le(period)))
        for j in range(used, len(names)):
            atoms.append(fatom(var(names[j]).eq(period)))
        disjuncts.append(land(*atoms))
    return lor(*disjuncts)


def pumped_volume_constraint(pump: PumpSpec, period: Rat) -> Formula:
    names = pump.switch_vars
    t, vin = var(TIME), var(VIN)
    rate = pump.rate
    conjuncts = []
    pumped = AffineExpr()  # volume pumped by the start of the current phase
    if not names:
        return fimp(
            land(fatom(t.ge(0)), fatom(t.le(period))), fatom(vin.eq(0))
        )
    conjuncts.append(
        fimp(land(fatom(t.ge(0)), fatom(t.le(var(names[0])))), fatom(vin.eq(0)))
    )
    for k in range(pump.activations):
        on, off = var(names[2 * k]), var(names[2 * k + 1])
        during = pumped + (t - on) * rate
        conjuncts.append(
            fimp(land(fatom(t.ge(on)), fatom(t.le(off))), fatom(vin.eq(during)))
        )
        pumped = pumped + (off - on) * rate
        nxt = var(names[2 * k + 2]) if 2 * k + 2 < len(names) else AffineExpr((), period)
        conjuncts.append(
            fimp(land(fatom(t.ge(off)), fatom(t.le(nxt))), fatom(vin.eq(pumped)))
        )
    return land(*conjuncts)


def build_constraints(
    profile: ConsumptionProfile, pump: PumpSpec, safety: SafetySpec
) -> ConstraintSystem:
    """The complete constraint stack over the declared variable set."""
    period = profile.period
    t, v, vin, vout, v0 = var(TIME), var(VOL), var(VIN), var(VOUT), var(V0)
    L, U = var(LNAME), var(UNAME)
    m = safety.margin

    c1 = consumption_constraint(profile)
    c2 = latency_constraint(pump, period)
    c3 = pumped_volume_constraint(pump, period)
    c4 = fatom(v.eq(v0 + vin - vout))
    c5 = fimp(fatom(t.eq(period)), land(fatom(v.ge(L + m)), fatom(v.le(U - m))))
    c6 = fimp(
        land(fatom(t.ge(0)), fatom(t.le(period))),
        land(fatom(v.ge(safety.vmin + m)), fatom(v.le(safety.vmax - m))),
    )
    s = forall([TIME, VOL, VIN, VOUT], fimp(land(c1, c3, c4), land(c5, c6)))
    c7 = land(fatom(v0.ge(L)), fatom(v0.le(U)))
    c8 = forall([V0], fimp(c7, exists(list(pump.switch_vars), land(c2, s))))
    return ConstraintSystem(c1, c2, c3, c4, c5, c6, c7, s, c8)


def build_objective(profile: ConsumptionProfile, pump: PumpSpec) -> ObjectiveSpec:
    """Average volume over one nominal cycle, as an exact symbolic integral.

    v(t) = v0 + V_in(t) - V_out_nominal(t) is integrated in closed form:
    the pump contributes, per activation [a, b], the exact area
    rate * ((b - a)(T - b) + (b - a)^2 / 2), and the nominal consumption
    contributes a rational constant.
    """
    T = profile.period
    names = pump.switch_vars
    total = QuadExpr.from_affine(var(V0).scale(T))
    for k in range(pump.activations):
        on, off = var(names[2 * k]), var(names[2 * k + 1])
        d = off - on
        area = affine_product(d, (off.scale(rat(-1)) + T)) + affine_product(d, d).scale(
            Fraction(1, 2)
        )
        total = total + area.scale(pump.rate)
    consumed = rat(0)
    starts = profile._cum_starts("nom")
    for i, s in enumerate(profile.segments):
        dt = s.t1 - s.t0
        consumed += starts[i] * dt + s.rate_nom * dt * dt / 2
    total = total - consumed
    return ObjectiveSpec(total.scale(Fraction(1, 1) / T))


# ---------------------------------------------------------------------------
# Derived artifacts (quantifier elimination products)
# ---------------------------------------------------------------------------


def eliminate_safety(s: Formula) -> Formula:
    """Quantifier-free equivalent of the safety implication."""
    return qe.eliminate_all(s)


def derive_admissible(c8: Formula) -> Formula:
    """Quantifier-free constraint on (L, U): the stable-interval region."""
    return qe.eliminate_all(c8)


def derive_feasible_cells(
    c2: Formula, c7: Formula, c9: Formula, s: Formula
) -> list[Polyhedron]:
    """Nonempty cells of the feasible switch-time region.

    The returned cells jointly cover exactly the solution set of
    c2 & c7 & c9 & s with the safety quantifiers eliminated; each cell
    is reduced to an irredundant atom set.
    """
    from .formula import is_quantifier_free

    sqf = s if is_quantifier_free(s) else eliminate_safety(s)
    full = land(c2, c7, c9, sqf)
    cells = to_dnf(full)
    out = []
    for cell in cells:
        out.append(qe.remove_redundant(cell))
    return out
