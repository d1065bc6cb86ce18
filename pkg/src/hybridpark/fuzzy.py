"""Mamdani fuzzy inference over piecewise-linear membership functions.

AND is the minimum, implication clips the consequent, aggregation takes the
maximum and the crisp output is the centroid of the aggregated set.  Because
every membership function is piecewise linear the centroid is computed
exactly, piece by piece, instead of by sampling.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

SIGNED_LABELS = ("NL", "NS", "ZO", "PS", "PL")
MAGNITUDE_LABELS = ("ZO", "S", "M", "L")

SHAPES = {"tri": 3, "trap": 4, "shl": 2, "shr": 2}


class FuzzyError(Exception):
    pass


class MissingInput(FuzzyError, KeyError):
    def __str__(self) -> str:
        return f"missing crisp input for variable {self.args[0]!r}"


class EmptyActivation(FuzzyError):
    pass


@dataclass(frozen=True)
class MembershipFunction:
    """A trapezoid-family membership function.

    ``shape`` is one of ``tri(a, b, c)``, ``trap(a, b, c, d)``,
    ``shl(b, c)`` (1 left of ``b``, falling to 0 at ``c``) or ``shr(a, b)``
    (0 left of ``a``, rising to 1 at ``b``).
    """

    shape: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown membership shape {self.shape!r}")
        if len(self.params) != SHAPES[self.shape]:
            raise ValueError(
                f"{self.shape} takes {SHAPES[self.shape]} breakpoints, got {len(self.params)}"
            )
        params = tuple(float(p) for p in self.params)
        if not all(math.isfinite(p) for p in params):
            raise ValueError("breakpoints must be finite")
        if any(b < a for a, b in zip(params, params[1:])):
            raise ValueError(f"breakpoints must be non-decreasing: {params}")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "_corners", self._trapezoid(self.shape, params))

    @staticmethod
    def _trapezoid(shape: str, p: tuple[float, ...]) -> tuple[float, float, float, float]:
        if shape == "tri":
            return (p[0], p[1], p[1], p[2])
        if shape == "trap":
            return p  # type: ignore[return-value]
        if shape == "shl":
            return (-math.inf, -math.inf, p[0], p[1])
        return (p[0], p[1], math.inf, math.inf)

    @classmethod
    def tri(cls, a: float, b: float, c: float) -> MembershipFunction:
        return cls("tri", (a, b, c))

    @classmethod
    def trap(cls, a: float, b: float, c: float, d: float) -> MembershipFunction:
        return cls("trap", (a, b, c, d))

    @classmethod
    def shl(cls, b: float, c: float) -> MembershipFunction:
        return cls("shl", (b, c))

    @classmethod
    def shr(cls, a: float, b: float) -> MembershipFunction:
        return cls("shr", (a, b))

    @property
    def corners(self) -> tuple[float, float, float, float]:
        """The (a, b, c, d) trapezoid, with infinite feet for shoulders."""
        return self._corners

    @property
    def core(self) -> tuple[float, float]:
        _, b, c, _ = self.corners
        return (b, c)

    @property
    def support(self) -> tuple[float, float]:
        a, _, _, d = self.corners
        return (a, d)

    def __call__(self, x: float) -> float:
        a, b, c, d = self._corners
        if b <= x <= c:
            return 1.0
        if x <= a or x >= d:
            return 0.0
        if x < b:
            return (x - a) / (b - a)
        return (d - x) / (d - c)

    def vertices(self, lo: float, hi: float) -> list[float]:
        """Breakpoints of the function that fall strictly inside (lo, hi)."""
        return sorted({p for p in self.corners if lo < p < hi})


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    universe: tuple[float, float]
    terms: tuple[tuple[str, MembershipFunction], ...]
    unit: str = ""

    def __post_init__(self) -> None:
        lo, hi = (float(u) for u in self.universe)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"{self.name}: universe must be a finite interval with lo < hi")
        object.__setattr__(self, "universe", (lo, hi))
        object.__setattr__(self, "terms", tuple((str(k), mf) for k, mf in self.terms))
        labels = [label for label, _ in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError(f"{self.name}: duplicate term labels {labels}")
        if not self.terms:
            raise ValueError(f"{self.name}: no terms")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.terms)

    def term(self, label: str) -> MembershipFunction:
        for name, mf in self.terms:
            if name == label:
                return mf
        raise KeyError(f"{self.name} has no term {label!r}")

    def clamp(self, x: float) -> float:
        lo, hi = self.universe
        return min(max(x, lo), hi)

    def fuzzify(self, x: float) -> dict[str, float]:
        x = self.clamp(x)
        return {label: mf(x) for label, mf in self.terms}

    def coverage_gaps(self) -> list[float]:
        """Points of the universe where no term has positive membership."""
        lo, hi = self.universe
        pts = {lo, hi}
        for _, mf in self.terms:
            pts.update(mf.vertices(lo, hi))
        pts = sorted(pts)
        probes = pts + [(p + q) / 2 for p, q in zip(pts, pts[1:])]
        return sorted(x for x in probes if max(mf(x) for _, mf in self.terms) <= 0.0)


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[tuple[str, str], ...]
    consequent: tuple[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "antecedent", tuple(tuple(p) for p in self.antecedent))
        object.__setattr__(self, "consequent", tuple(self.consequent))


@dataclass(frozen=True)
class RuleBase:
    """Inputs, one output and IF-THEN rules.

    Construction checks references and duplicate antecedents; completeness of
    the table is reported by :meth:`missing` and enforced by the DSL parser.
    """

    inputs: tuple[LinguisticVariable, ...]
    output: LinguisticVariable
    rules: tuple[Rule, ...]
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        names = [v.name for v in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate input variables {names}")
        if self.output.name in names:
            raise ValueError(f"output {self.output.name!r} is also an input")
        by_name = {v.name: v for v in self.inputs}
        seen = set()
        for rule in self.rules:
            used = [name for name, _ in rule.antecedent]
            if len(set(used)) != len(used):
                raise ValueError(f"rule mentions a variable twice: {rule}")
            for name, label in rule.antecedent:
                if name not in by_name:
                    raise ValueError(f"rule references unknown input {name!r}")
                if label not in by_name[name].labels:
                    raise ValueError(f"rule references unknown term {name}.{label}")
            out_name, out_label = rule.consequent
            if out_name != self.output.name:
                raise ValueError(f"rule concludes on {out_name!r}, not the output")
            if out_label not in self.output.labels:
                raise ValueError(f"rule references unknown term {out_name}.{out_label}")
            key = frozenset(rule.antecedent)
            if key in seen:
                raise ValueError(f"duplicate antecedent {rule.antecedent}")
            seen.add(key)
        object.__setattr__(self, "_index", by_name)

    def missing(self) -> list[tuple[tuple[str, str], ...]]:
        """Input-term combinations (row-major) not covered by any full rule."""
        covered = {frozenset(r.antecedent) for r in self.rules}
        grid = itertools.product(*[[(v.name, t) for t in v.labels] for v in self.inputs])
        return [combo for combo in grid if frozenset(combo) not in covered]

    def lookup(self, *labels: str) -> str | None:
        """Consequent label for the full antecedent given in input order."""
        key = frozenset(zip((v.name for v in self.inputs), labels))
        for rule in self.rules:
            if frozenset(rule.antecedent) == key:
                return rule.consequent[1]
        return None


@dataclass(frozen=True)
class Inference:
    value: float
    term_activation: dict[str, float]
    empty: bool = False


def _clipped_pieces(
    mfs: Sequence[tuple[MembershipFunction, float]], lo: float, hi: float
) -> list[tuple[float, float, float, float]]:
    """Split max_i min(alpha_i, mf_i(x)) on [lo, hi] into linear pieces.

    Returns (x0, y0, x1, y1) segments on which the aggregate is linear.
    """
    pts = {lo, hi}
    for mf, alpha in mfs:
        a, b, c, d = mf.corners
        pts.update(p for p in (a, b, c, d) if lo < p < hi)
        # where the rising/falling flank crosses the clip level
        if a < b:
            p = a + alpha * (b - a)
            if lo < p < hi:
                pts.add(p)
        if c < d:
            p = d - alpha * (d - c)
            if lo < p < hi:
                pts.add(p)
    xs = sorted(pts)

    def piece(mf: MembershipFunction, alpha: float, x0: float, x1: float):
        # each clipped term is linear on the open interval (x0, x1); sample
        # inside it so vertical flanks at the ends are not picked up
        h = x1 - x0
        p0, p1 = x0 + h / 3.0, x1 - h / 3.0
        y0, y1 = min(alpha, mf(p0)), min(alpha, mf(p1))
        if p1 <= p0:
            return 0.0, y0
        m = (y1 - y0) / (p1 - p0)
        return m, y0 - m * p0

    out = []
    for x0, x1 in zip(xs, xs[1:]):
        if x1 <= x0:
            continue
        # crossings between clipped terms make the upper envelope bend
        lines = [piece(mf, alpha, x0, x1) for mf, alpha in mfs]
        cuts = {x0, x1}
        for (m1, q1), (m2, q2) in itertools.combinations(lines, 2):
            if m1 != m2:
                xc = (q2 - q1) / (m1 - m2)
                if x0 < xc < x1:
                    cuts.add(xc)
        cuts = sorted(cuts)
        for u0, u1 in zip(cuts, cuts[1:]):
            yl = max(m * u0 + q for m, q in lines)
            yr = max(m * u1 + q for m, q in lines)
            out.append((u0, yl, u1, yr))
    return out


def aggregate_centroid(
    mfs: Sequence[tuple[MembershipFunction, float]], universe: tuple[float, float]
) -> float:
    """Exact centroid of max_i min(alpha_i, mf_i) over the universe."""
    active = [(mf, a) for mf, a in mfs if a > 0.0]
    if not active:
        raise EmptyActivation("no rule fired")
    lo, hi = universe
    area = moment = 0.0
    for x0, y0, x1, y1 in _clipped_pieces(active, lo, hi):
        h = x1 - x0
        area += 0.5 * (y0 + y1) * h
        moment += h * (x0 * (2 * y0 + y1) + x1 * (y0 + 2 * y1)) / 6.0
    if area <= 0.0:
        raise EmptyActivation("aggregated set has zero area")
    return min(max(moment / area, lo), hi)


def centroid(xs: Sequence[float], mu: Sequence[float]) -> float:
    """Centroid of a sampled fuzzy set (trapezoidal integration)."""
    xs = np.asarray(xs, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if xs.shape != mu.shape or xs.ndim != 1:
        raise ValueError("samples and memberships must be 1-D arrays of equal length")
    if not np.any(mu > 0):
        raise EmptyActivation("all memberships are zero")
    area = np.trapezoid(mu, xs)
    if area <= 0:
        # a single positive sample has no width; fall back to the weighted mean
        return float(np.sum(xs * mu) / np.sum(mu))
    return float(np.trapezoid(xs * mu, xs) / area)


def membership(mf: MembershipFunction, x: float) -> float:
    return mf(x)


def evaluate(rb: RuleBase, crisp_inputs: Mapping[str, float]) -> Inference:
    degrees = {}
    for var in rb.inputs:
        if var.name not in crisp_inputs:
            raise MissingInput(var.name)
        degrees[var.name] = var.fuzzify(float(crisp_inputs[var.name]))
    activation = {label: 0.0 for label in rb.output.labels}
    for rule in rb.rules:
        strength = min(
            (degrees[name][label] for name, label in rule.antecedent), default=1.0
        )
        label = rule.consequent[1]
        if strength > activation[label]:
            activation[label] = strength
    lo, hi = rb.output.universe
    try:
        value = aggregate_centroid(
            [(rb.output.term(label), a) for label, a in activation.items()], (lo, hi)
        )
    except EmptyActivation:
        return Inference(0.5 * (lo + hi), activation, empty=True)
    return Inference(value, activation)


def infer(rb: RuleBase, crisp_inputs: Mapping[str, float]) -> float:
    return evaluate(rb, crisp_inputs).value


def uniform_partition(
    name: str,
    lo: float,
    hi: float,
    labels: Sequence[str] = SIGNED_LABELS,
    unit: str = "",
) -> LinguisticVariable:
    """Evenly spaced triangles with 50% overlap; the end terms are shoulders."""
    n = len(labels)
    if n == 1:
        return LinguisticVariable(name, (lo, hi), ((labels[0], MembershipFunction.trap(lo, lo, hi, hi)),), unit)
    step = (hi - lo) / (n - 1)
    cores = [lo + i * step for i in range(n)]
    cores[-1] = hi
    terms = []
    for i, label in enumerate(labels):
        if i == 0:
            mf = MembershipFunction.shl(cores[0], cores[1])
        elif i == n - 1:
            mf = MembershipFunction.shr(cores[-2], cores[-1])
        else:
            mf = MembershipFunction.tri(cores[i - 1], cores[i], cores[i + 1])
        terms.append((label, mf))
    return LinguisticVariable(name, (lo, hi), tuple(terms), unit)
