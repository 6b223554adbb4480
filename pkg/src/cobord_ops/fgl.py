"""Formal group laws, their arithmetic, Laurent series and residues.

The universal law is built in the Hurewicz model: over Z[b_1..b_N] the
exponential is ``e(x) = x + b_1 x^2 + ... + b_N x^(N+1)`` and
``F(x, y) = e(log(x) + log(y))``.  Laws are always stored truncated to
total degree ``D`` in ``x, y``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from math import factorial
from typing import Dict, Mapping, Optional

from .ringcore import (
    GeneratorSet,
    SparsePoly,
    TruncationBudget,
    substitute,
    truncate,
)

LAW_VARS = ("x", "y")


class IntegralityError(ArithmeticError):
    """A coefficient that must lie in Z[b] does not."""


@dataclass(frozen=True, eq=False)
class FormalGroupLaw:
    """A formal group law truncated to total degree ``D``.

    ``F`` lives over ``ring`` (coefficient generators plus ``x, y``);
    ``exp``/``log`` are univariate in ``x`` when known.
    """

    name: str
    ring: GeneratorSet
    F: SparsePoly
    D: int
    exp: Optional[SparsePoly] = None
    log: Optional[SparsePoly] = None
    hurewicz: bool = False
    exact: bool = False

    @cached_property
    def coefficient_ring(self) -> GeneratorSet:
        return self.ring.without(*LAW_VARS)

    @cached_property
    def omega(self) -> SparsePoly:
        return invariant_differential(self, self.D)

    @property
    def precision(self) -> float:
        """Highest total degree in which ``F`` is correct (inf for polynomial laws)."""
        return float("inf") if self.exact else self.D

    @cached_property
    def inverse_series(self) -> SparsePoly:
        """``i(x)`` with ``F(x, i(x)) = 0`` up to degree ``D``."""
        ring = self.ring
        x = ring.gen("x")
        budget = TruncationBudget(self.D)
        inv = -x
        for n in range(2, self.D + 1):
            r = substitute(self.F, {"x": x, "y": inv}, TruncationBudget(n), ring=ring)
            top = r.filter_terms(lambda e, n=n: _deg_in(ring, e, "x") == n)
            inv = inv - top
        return truncate(inv, budget)

    def coefficient(self, i: int, j: int) -> SparsePoly:
        """Coefficient of ``x^i y^j`` in ``F`` as a polynomial in the coefficients."""
        return self.F.coefficient({"x": i, "y": j}).lift(self.ring)

    def __repr__(self):
        return f"FormalGroupLaw({self.name!r}, D={self.D})"


def _deg_in(ring, e, name):
    return e[ring.index(name)]


def series_reversion(e: SparsePoly, D: int, var: str = "x") -> SparsePoly:
    """Compositional inverse of a univariate series ``e(var) = u*var + ...``.

    The linear coefficient ``u`` must be a unit (a nonzero rational constant).
    Coefficients are solved degree by degree.
    """
    ring = e.ring
    x = ring.gen(var)
    lin = e.coefficient({var: 1})
    if lin.is_zero() or not lin.is_constant():
        raise ValueError("series_reversion needs a unit linear coefficient")
    if e.constant_term() or not e.coefficient({var: 0}).is_zero():
        raise ValueError("series_reversion needs zero constant term")
    u = Fraction(lin.constant_term())
    ell = x.scale(1 / u)
    for n in range(2, D + 1):
        comp = substitute(e, {var: ell}, TruncationBudget(n), ring=ring)
        top = comp.filter_terms(lambda ex, n=n: ex[ring.index(var)] == n)
        ell = ell - top.scale(1 / u)
    return truncate(ell, TruncationBudget(D))


def _law_ring(coeff_specs) -> GeneratorSet:
    return GeneratorSet.of(*coeff_specs, "x", "y")


def _check_integral(p: SparsePoly, what: str):
    if not p.is_integral():
        bad = next(c for c in p.terms.values() if c.__class__ is not int)
        raise IntegralityError(f"{what} has non-integral coefficient {bad}")


@lru_cache(maxsize=None)
def make_universal(N: int, D: int) -> FormalGroupLaw:
    """Universal law over Z[b_1..b_N] truncated to degree ``D`` (needs N >= D)."""
    if N < D:
        raise ValueError(f"make_universal needs N >= D (got N={N}, D={D})")
    ring = _law_ring([(f"b{i}", -i) for i in range(1, N + 1)])
    x, y = ring.gens("x", "y")
    e = x
    for i in range(1, min(N, D - 1) + 1):
        e = e + ring.gen(f"b{i}") * x ** (i + 1)
    budget = TruncationBudget(D)
    ell = series_reversion(e, D)
    _check_integral(ell, "log")
    s = ell + substitute(ell, {"x": y}, budget, ring=ring)
    F = substitute(e, {"x": s}, budget, ring=ring)
    _check_integral(F, "universal F")
    return FormalGroupLaw("universal", ring, F, D, exp=e, log=ell, hurewicz=True)


@lru_cache(maxsize=None)
def make_additive(D: int = 8) -> FormalGroupLaw:
    ring = _law_ring([])
    x, y = ring.gens("x", "y")
    return FormalGroupLaw("additive", ring, x + y, D, exp=x, log=x, exact=True)


@lru_cache(maxsize=None)
def make_multiplicative(D: int = 8, beta: str = "beta") -> FormalGroupLaw:
    """``F = x + y - beta*x*y``; log and exp have rational coefficients."""
    ring = _law_ring([(beta, -1)])
    x, y, b = ring.gens("x", "y", beta)
    F = x + y - b * x * y
    log = ring.zero()
    exp = ring.zero()
    for k in range(1, D + 1):
        log = log + (b ** (k - 1) * x ** k).scale(Fraction(1, k))
        exp = exp + (b ** (k - 1) * x ** k).scale(Fraction((-1) ** (k + 1), factorial(k)))
    return FormalGroupLaw("multiplicative", ring, F, D, exp=exp, log=log, exact=True)


def law_by_name(name: str, D: int, N: Optional[int] = None) -> FormalGroupLaw:
    if name == "universal":
        return make_universal(max(N or D, D), D)
    if name == "additive":
        return make_additive(D)
    if name in ("mult", "multiplicative"):
        return make_multiplicative(D)
    raise ValueError(f"unknown law {name!r}")


def _common(F: FormalGroupLaw, *series: SparsePoly):
    ring = GeneratorSet.union(series[0].ring, *[s.ring for s in series[1:]], F.coefficient_ring)
    return ring, [s.lift(ring) for s in series]


def _require_nilpotent(s: SparsePoly):
    if s.constant_term():
        raise ValueError("formal group operations need arguments with zero constant term")


def _default_budget(F, budget):
    return budget if budget is not None else TruncationBudget(F.D)


def formal_sum(F: FormalGroupLaw, s1: SparsePoly, s2: SparsePoly,
               budget: Optional[TruncationBudget] = None) -> SparsePoly:
    """``F(s1, s2)`` truncated."""
    _require_nilpotent(s1)
    _require_nilpotent(s2)
    ring, (s1, s2) = _common(F, s1, s2)
    return substitute(F.F, {"x": s1, "y": s2}, _default_budget(F, budget), ring=ring)


def formal_inverse(F: FormalGroupLaw, s: SparsePoly,
                   budget: Optional[TruncationBudget] = None) -> SparsePoly:
    _require_nilpotent(s)
    ring, (s,) = _common(F, s)
    return substitute(F.inverse_series, {"x": s}, _default_budget(F, budget), ring=ring)


def formal_diff(F: FormalGroupLaw, s1: SparsePoly, s2: SparsePoly,
                budget: Optional[TruncationBudget] = None) -> SparsePoly:
    return formal_sum(F, s1, formal_inverse(F, s2, budget), budget)


def n_series(F: FormalGroupLaw, n: int, s: SparsePoly,
             budget: Optional[TruncationBudget] = None) -> SparsePoly:
    """``[n]_F(s)`` by binary splitting; negative ``n`` goes through the inverse."""
    _require_nilpotent(s)
    ring, (s,) = _common(F, s)
    if n < 0:
        return formal_inverse(F, n_series(F, -n, s, budget), budget)
    if n == 0:
        return ring.zero()
    result = None
    base = truncate(s, _default_budget(F, budget))
    while n:
        if n & 1:
            result = base if result is None else formal_sum(F, result, base, budget)
        n >>= 1
        if n:
            base = formal_sum(F, base, base, budget)
    return result


def series_inverse(u: SparsePoly, budget: TruncationBudget, max_terms: int = 10_000) -> SparsePoly:
    """``1/u`` for ``u = c*(1 + h)`` with ``c`` a nonzero rational and ``h``
    nilpotent modulo the budget."""
    c = u.constant_term()
    if not c:
        raise ZeroDivisionError("series_inverse needs a nonzero constant term")
    ring = u.ring
    h = u.scale(Fraction(1) / c) - 1
    h = truncate(h, budget)
    total = ring.one()
    power = ring.one()
    for _ in range(max_terms):
        power = (-power).mul(h, budget)
        if power.is_zero():
            return total.scale(Fraction(1) / c)
        total = total + power
    raise ArithmeticError("series_inverse did not terminate; is the budget bounding h?")


def invariant_differential(F: FormalGroupLaw, D: int, var: str = "t") -> SparsePoly:
    """``omega(t) = 1 / (dF/dy)(t, 0)`` up to degree ``D``.

    For a law known only through degree ``F.D`` the result stops at ``F.D - 1``.
    """
    if not F.exact:
        D = min(D, F.D - 1)
    ring = F.coefficient_ring.union(GeneratorSet.of(var))
    dF0 = substitute(F.F.derivative("y"), {"y": 0}, ring=F.ring)
    dF0 = strip_var(dF0, "y").rename({"x": var}).lift(ring)
    return series_inverse(dF0, TruncationBudget(D))


def log_derivative(F: FormalGroupLaw, D: int, var: str = "t") -> SparsePoly:
    """``log'(t)``; agrees with the invariant differential when log exists."""
    if F.log is None:
        raise ValueError(f"{F.name} law has no logarithm")
    d = F.log.derivative("x")
    ring = F.coefficient_ring.union(GeneratorSet.of(var))
    return truncate(d.rename({"x": var}).lift(ring), TruncationBudget(D))


class LaurentSeries:
    """Finitely-bounded-below series in ``t`` with coefficients in a base ring.

    ``coeffs`` maps an exponent of ``t`` to a polynomial over ``base`` (which
    does not contain ``t``).  Every coefficient is truncated to ``budget`` and
    exponents below ``-budget.laurent_floor`` (or above ``laurent_cap``) are
    dropped.
    """

    __slots__ = ("base", "coeffs", "budget", "var")

    def __init__(self, base: GeneratorSet, coeffs: Mapping[int, SparsePoly],
                 budget: TruncationBudget, var: str = "t"):
        if var in base:
            raise ValueError(f"base ring must not contain {var!r}")
        self.base = base
        self.budget = budget
        self.var = var
        lo = -budget.laurent_floor
        hi = budget.laurent_cap
        clean = {}
        for k, c in coeffs.items():
            if k < lo or (hi is not None and k > hi):
                continue
            if c.ring != base:
                c = c.lift(base)
            c = truncate(c, budget)
            if c:
                clean[k] = c
        self.coeffs = clean

    @classmethod
    def from_poly(cls, p: SparsePoly, budget: TruncationBudget, var: str = "t") -> "LaurentSeries":
        base = p.ring.without(var)
        if var not in p.ring:
            return cls(base, {0: p.lift(base)}, budget, var)
        parts = p.split_by(var)
        return cls(base, {k: c.lift(base) for k, c in parts.items()}, budget, var)

    def to_poly(self, ring: Optional[GeneratorSet] = None) -> SparsePoly:
        if ring is None:
            ring = self.base.union(GeneratorSet((self.var,), (1,), frozenset({self.var})))
        total = ring.zero()
        t = ring.gen(self.var)
        for k, c in self.coeffs.items():
            total = total + c.lift(ring) * t.pow(k)
        return total

    def zero(self) -> "LaurentSeries":
        return LaurentSeries(self.base, {}, self.budget, self.var)

    def coefficient(self, k: int) -> SparsePoly:
        return self.coeffs.get(k, self.base.zero())

    def is_zero(self) -> bool:
        return not self.coeffs

    def min_exponent(self) -> Optional[int]:
        return min(self.coeffs) if self.coeffs else None

    def max_exponent(self) -> Optional[int]:
        return max(self.coeffs) if self.coeffs else None

    def exponents(self):
        return sorted(self.coeffs)

    def _check(self, other: "LaurentSeries"):
        if other.base != self.base or other.var != self.var:
            raise ValueError("Laurent series over different bases")

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        self._check(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out[k] + c if k in out else c
        return LaurentSeries(self.base, out, self.budget, self.var)

    def __neg__(self):
        return LaurentSeries(self.base, {k: -c for k, c in self.coeffs.items()}, self.budget, self.var)

    def __sub__(self, other: "LaurentSeries") -> "LaurentSeries":
        return self + (-other)

    def scale(self, c) -> "LaurentSeries":
        return LaurentSeries(self.base, {k: v.scale(c) for k, v in self.coeffs.items()}, self.budget, self.var)

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        self._check(other)
        out: Dict[int, SparsePoly] = {}
        lo = -self.budget.laurent_floor
        hi = self.budget.laurent_cap
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                k = i + j
                if k < lo or (hi is not None and k > hi):
                    continue
                prod = a.mul(b, self.budget)
                out[k] = out[k] + prod if k in out else prod
        return LaurentSeries(self.base, out, self.budget, self.var)

    def shift(self, k: int) -> "LaurentSeries":
        return LaurentSeries(self.base, {e + k: c for e, c in self.coeffs.items()}, self.budget, self.var)

    def filter(self, pred) -> "LaurentSeries":
        return LaurentSeries(self.base, {k: c for k, c in self.coeffs.items() if pred(k)}, self.budget, self.var)

    def nonpositive_part(self) -> "LaurentSeries":
        return self.filter(lambda k: k <= 0)

    def positive_part(self) -> "LaurentSeries":
        return self.filter(lambda k: k >= 1)

    def __eq__(self, other):
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        return self.base == other.base and self.var == other.var and self.coeffs == other.coeffs

    def __repr__(self):
        if not self.coeffs:
            return "LaurentSeries(0)"
        body = " + ".join(f"({self.coeffs[k]})*{self.var}^{k}" for k in sorted(self.coeffs))
        return f"LaurentSeries({body})"

    def to_json(self):
        return [{"k": k, "c": self.coeffs[k].to_json()} for k in sorted(self.coeffs)]


def residue(h: LaurentSeries, F: FormalGroupLaw, omega: Optional[SparsePoly] = None) -> SparsePoly:
    """Coefficient of ``t^-1`` in ``h(t) * omega(t)``.

    ``omega`` defaults to the invariant differential of ``F`` and must be a
    power series in ``h.var`` over (a subring of) ``h.base`` plus that variable.
    """
    if omega is None:
        omega = F.omega
    parts = omega.split_by(h.var) if h.var in omega.ring else {0: omega}
    total = h.base.zero()
    for j, wj in parts.items():
        c = h.coeffs.get(-1 - j)
        if c is not None:
            total = total + c * strip_var(wj, h.var).lift(h.base)
    return truncate(total, h.budget)


def strip_var(p: SparsePoly, var: str) -> SparsePoly:
    """Drop ``var`` from the ring of ``p``; ``p`` must not involve it."""
    if var not in p.ring:
        return p
    i = p.ring.index(var)
    if any(e[i] for e in p.terms):
        raise ValueError(f"{var!r} still occurs in {p}")
    base = p.ring.without(var)
    return SparsePoly(base, {e[:i] + e[i + 1:]: c for e, c in p.terms.items()}, _trusted=True)
