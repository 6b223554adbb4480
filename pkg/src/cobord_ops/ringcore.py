"""Exact sparse multivariate polynomials over graded generator sets.

Generators carry an integer degree.  Degree-one generators are *series
variables* (z, x, y, t, lambda, mu, ...) and are what the degree cap of a
:class:`TruncationBudget` bounds.  Negative-degree generators (b_i, beta)
are coefficients; their *weight* is minus their degree.  A series variable
that is also declared invertible is a *Laurent variable*: it is exempt
from the series cap and is bounded instead by the Laurent floor (and an
optional Laurent cap).  In practice that is the ``t`` of Steenrod and
residue computations.

Coefficients are Python ints where possible and :class:`fractions.Fraction`
otherwise.
"""
from __future__ import annotations

import json
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple, Union

Coeff = Union[int, Fraction]
Exponents = Tuple[int, ...]

_add = operator.add


class RingMismatchError(ValueError):
    """Operands live over different generator sets."""


class NotDivisibleError(ArithmeticError):
    """An exact division was requested but the quotient is not integral."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


def _norm(c):
    if c.__class__ is Fraction and c.denominator == 1:
        return c.numerator
    return c


def as_coeff(c) -> Coeff:
    if isinstance(c, bool):
        raise TypeError("bool is not a coefficient")
    if isinstance(c, int):
        return c
    if isinstance(c, Fraction):
        return _norm(c)
    if isinstance(c, str):
        return _norm(Fraction(c))
    raise TypeError(f"unsupported coefficient {c!r}")


@dataclass(frozen=True)
class GeneratorSet:
    """Ordered generator names with degrees and the invertible subset."""

    names: Tuple[str, ...]
    degrees: Tuple[int, ...]
    inverted: frozenset = frozenset()

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate generator names in {self.names}")
        if len(self.names) != len(self.degrees):
            raise ValueError("names and degrees differ in length")
        missing = set(self.inverted) - set(self.names)
        if missing:
            raise ValueError(f"inverted generators {sorted(missing)} are not generators")
        object.__setattr__(self, "inverted", frozenset(self.inverted))

    @classmethod
    def of(cls, *specs, inverted=()) -> "GeneratorSet":
        """Build from ``(name, degree)`` pairs or ``"name:degree"`` strings.

        A bare name defaults to degree 1 (a series variable).
        """
        names, degrees = [], []
        for s in specs:
            if isinstance(s, tuple):
                n, d = s
            elif ":" in s:
                n, d = s.split(":")
            else:
                n, d = s, 1
            names.append(n)
            degrees.append(int(d))
        return cls(tuple(names), tuple(degrees), frozenset(inverted))

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._index

    @property
    def _index(self) -> Dict[str, int]:
        return _index_of(self)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"{name!r} is not a generator of {self.names}") from None

    def degree(self, name: str) -> int:
        return self.degrees[self.index(name)]

    def is_series(self, name: str) -> bool:
        return self.degree(name) > 0 and name not in self.inverted

    def is_laurent(self, name: str) -> bool:
        return self.degree(name) > 0 and name in self.inverted

    @property
    def series_names(self) -> Tuple[str, ...]:
        return tuple(n for n, d in zip(self.names, self.degrees) if d > 0 and n not in self.inverted)

    @property
    def coefficient_names(self) -> Tuple[str, ...]:
        return tuple(n for n, d in zip(self.names, self.degrees) if d <= 0)

    def union(self, *others: "GeneratorSet") -> "GeneratorSet":
        return _union(self, *others)

    def without(self, *names: str) -> "GeneratorSet":
        keep = [(n, d) for n, d in zip(self.names, self.degrees) if n not in names]
        return GeneratorSet(tuple(n for n, _ in keep), tuple(d for _, d in keep),
                            frozenset(self.inverted - set(names)))

    def with_inverted(self, *names: str) -> "GeneratorSet":
        return GeneratorSet(self.names, self.degrees, self.inverted | set(names))

    def zero(self) -> "SparsePoly":
        return SparsePoly(self, {})

    def one(self) -> "SparsePoly":
        return SparsePoly.constant(self, 1)

    def gen(self, name: str) -> "SparsePoly":
        e = [0] * len(self.names)
        e[self.index(name)] = 1
        return SparsePoly(self, {tuple(e): 1})

    def gens(self, *names: str):
        return tuple(self.gen(n) for n in names)

    def _layout(self):
        return _layout(self)


@lru_cache(maxsize=None)
def _index_of(ring: GeneratorSet) -> Dict[str, int]:
    return {n: i for i, n in enumerate(ring.names)}


@lru_cache(maxsize=None)
def _layout(ring: GeneratorSet):
    series = tuple(i for i, (n, d) in enumerate(zip(ring.names, ring.degrees))
                   if d > 0 and n not in ring.inverted)
    laurent = tuple(i for i, (n, d) in enumerate(zip(ring.names, ring.degrees))
                    if d > 0 and n in ring.inverted)
    weights = tuple((i, -d) for i, d in enumerate(ring.degrees) if d < 0)
    return series, laurent, weights


@lru_cache(maxsize=None)
def _union(*rings: GeneratorSet) -> GeneratorSet:
    names, degrees, inverted = [], [], set()
    seen = {}
    for r in rings:
        for n, d in zip(r.names, r.degrees):
            if n in seen:
                if seen[n] != d:
                    raise RingMismatchError(f"generator {n!r} has degrees {seen[n]} and {d}")
                continue
            seen[n] = d
            names.append(n)
            degrees.append(d)
        inverted |= r.inverted
    for r in rings:
        for n in r.names:
            if r.degree(n) > 0 and (n in inverted) != (n in r.inverted):
                raise RingMismatchError(f"{n!r} is Laurent in one ring and a plain series variable in another")
    return GeneratorSet(tuple(names), tuple(degrees), frozenset(inverted))


@dataclass(frozen=True)
class TruncationBudget:
    """Caps applied by :meth:`SparsePoly.truncate`.

    ``series_degree_cap`` bounds the total exponent in plain series variables;
    ``coefficient_degree_cap`` bounds the weight in coefficient generators;
    Laurent variables must have exponent in ``[-laurent_floor, laurent_cap]``
    (no upper bound when ``laurent_cap`` is None).
    """

    series_degree_cap: int
    coefficient_degree_cap: Optional[int] = None
    laurent_floor: int = 0
    laurent_cap: Optional[int] = None

    def __post_init__(self):
        for name in ("series_degree_cap", "laurent_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("coefficient_degree_cap", "laurent_cap"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def D(self):
        return self.series_degree_cap

    @property
    def K(self):
        return self.laurent_floor

    def replace(self, **kw) -> "TruncationBudget":
        d = dict(series_degree_cap=self.series_degree_cap,
                 coefficient_degree_cap=self.coefficient_degree_cap,
                 laurent_floor=self.laurent_floor, laurent_cap=self.laurent_cap)
        d.update(kw)
        return TruncationBudget(**d)


def _term_filter(ring: GeneratorSet, budget: Optional[TruncationBudget]):
    """Return a predicate on exponent tuples, or None if nothing is dropped."""
    if budget is None:
        return None
    series, laurent, weights = ring._layout()
    D = budget.series_degree_cap
    W = budget.coefficient_degree_cap
    lo = -budget.laurent_floor
    hi = budget.laurent_cap
    if W is None:
        weights = ()
    if not laurent:
        lo_check = False
    else:
        lo_check = True

    def keep(e):
        s = 0
        for i in series:
            s += e[i]
        if s > D:
            return False
        if lo_check:
            for i in laurent:
                k = e[i]
                if k < lo or (hi is not None and k > hi):
                    return False
        if weights:
            w = 0
            for i, wt in weights:
                w += e[i] * wt
            if w > W:
                return False
        return True

    return keep


class SparsePoly:
    """Immutable sparse polynomial: exponent tuple -> exact rational.

    Two polynomials over the same generator set are equal iff their term
    dictionaries are equal; zero coefficients are never stored.
    """

    __slots__ = ("ring", "terms", "_hash")

    def __init__(self, ring: GeneratorSet, terms: Mapping[Exponents, Coeff] = None, *, _trusted=False):
        self.ring = ring
        if _trusted:
            self.terms = terms
        else:
            clean = {}
            n = len(ring.names)
            inv = {ring.index(g) for g in ring.inverted}
            for e, c in (terms or {}).items():
                e = tuple(e)
                if len(e) != n:
                    raise ValueError(f"exponent vector {e} has wrong length for {ring.names}")
                for i, k in enumerate(e):
                    if k < 0 and i not in inv:
                        raise ValueError(f"negative exponent for non-invertible {ring.names[i]!r}")
                c = as_coeff(c)
                if c:
                    clean[e] = c
            self.terms = clean
        self._hash = None

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, ring: GeneratorSet, c) -> "SparsePoly":
        c = as_coeff(c)
        return cls(ring, {(0,) * len(ring.names): c} if c else {}, _trusted=True)

    @classmethod
    def monomial(cls, ring: GeneratorSet, exps: Mapping[str, int], c=1) -> "SparsePoly":
        e = [0] * len(ring.names)
        for name, k in exps.items():
            e[ring.index(name)] += k
        return cls(ring, {tuple(e): c})

    @classmethod
    def from_dict(cls, ring: GeneratorSet, terms: Iterable) -> "SparsePoly":
        """Build from ``[(mapping symbol->exponent, coeff), ...]``."""
        acc: Dict[Exponents, Coeff] = {}
        for exps, c in terms:
            e = [0] * len(ring.names)
            for name, k in exps.items():
                e[ring.index(name)] += k
            e = tuple(e)
            acc[e] = acc.get(e, 0) + as_coeff(c)
        return cls(ring, acc)

    # inspection -------------------------------------------------------
    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __iter__(self) -> Iterator[Tuple[Dict[str, int], Coeff]]:
        names = self.ring.names
        for e, c in self.sorted_terms():
            yield {names[i]: k for i, k in enumerate(e) if k}, c

    def items(self):
        return self.terms.items()

    def sorted_terms(self):
        """Terms in graded lexicographic order on symbol names (deterministic)."""
        names = self.ring.names
        order = sorted(range(len(names)), key=lambda i: names[i])

        def key(item):
            e = item[0]
            return (sum(e), tuple(-e[i] for i in order))

        return sorted(self.terms.items(), key=key)

    def constant_term(self) -> Coeff:
        return self.terms.get((0,) * len(self.ring.names), 0)

    def is_constant(self) -> bool:
        z = (0,) * len(self.ring.names)
        return all(e == z for e in self.terms)

    def symbols(self) -> frozenset:
        names = self.ring.names
        used = set()
        for e in self.terms:
            for i, k in enumerate(e):
                if k:
                    used.add(names[i])
        return frozenset(used)

    def series_degree(self, e: Exponents) -> int:
        series, _, _ = self.ring._layout()
        return sum(e[i] for i in series)

    def min_series_degree(self) -> float:
        if not self.terms:
            return float("-inf")
        return min(self.series_degree(e) for e in self.terms)

    def max_series_degree(self) -> float:
        """Total series degree; the zero polynomial has degree -inf."""
        if not self.terms:
            return float("-inf")
        return max(self.series_degree(e) for e in self.terms)

    def degree_in(self, name: str) -> int:
        i = self.ring.index(name)
        return max((e[i] for e in self.terms), default=0)

    def min_degree_in(self, name: str) -> int:
        i = self.ring.index(name)
        return min((e[i] for e in self.terms), default=0)

    def weight(self, e: Exponents) -> int:
        _, _, weights = self.ring._layout()
        return sum(e[i] * w for i, w in weights)

    def total_degree(self, e: Exponents) -> int:
        return sum(k * d for k, d in zip(e, self.ring.degrees))

    def is_integral(self) -> bool:
        return all(c.__class__ is int for c in self.terms.values())

    # equality ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, SparsePoly):
            if other.ring != self.ring:
                return False
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == SparsePoly.constant(self.ring, other).terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ring, frozenset(self.terms.items())))
        return self._hash

    # arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            if other.ring != self.ring:
                raise RingMismatchError(f"generator sets differ: {self.ring.names} vs {other.ring.names}")
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return SparsePoly.constant(self.ring, other)
        raise TypeError(f"cannot combine SparsePoly with {type(other).__name__}")

    def __add__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if len(other.terms) > len(self.terms):
            a, b = other.terms, self.terms
        else:
            a, b = self.terms, other.terms
        res = dict(a)
        for e, c in b.items():
            v = res.get(e, 0) + c
            if v:
                res[e] = _norm(v)
            else:
                res.pop(e, None)
        return SparsePoly(self.ring, res, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return SparsePoly(self.ring, {e: -c for e, c in self.terms.items()}, _trusted=True)

    def __sub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        res = dict(self.terms)
        for e, c in other.terms.items():
            v = res.get(e, 0) - c
            if v:
                res[e] = _norm(v)
            else:
                res.pop(e, None)
        return SparsePoly(self.ring, res, _trusted=True)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "SparsePoly":
        c = as_coeff(c)
        if not c:
            return self.ring.zero()
        return SparsePoly(self.ring, {e: _norm(v * c) for e, v in self.terms.items()}, _trusted=True)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.scale(other)
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self.mul(other)

    __rmul__ = __mul__

    def mul(self, other: "SparsePoly", budget: Optional[TruncationBudget] = None) -> "SparsePoly":
        """Product, optionally truncated on the fly."""
        other = self._coerce(other)
        a, b = self.terms, other.terms
        if not a or not b:
            return self.ring.zero()
        if len(a) < len(b):
            a, b = b, a
        res: Dict[Exponents, Coeff] = {}
        keep = _term_filter(self.ring, budget)
        if keep is None:
            for ea, ca in a.items():
                for eb, cb in b.items():
                    e = tuple(map(_add, ea, eb))
                    res[e] = res.get(e, 0) + ca * cb
        else:
            series, _, _ = self.ring._layout()
            D = budget.series_degree_cap
            b_items = [(sum(eb[i] for i in series), eb, cb) for eb, cb in b.items()]
            b_items.sort(key=lambda t: t[0])
            for ea, ca in a.items():
                da = 0
                for i in series:
                    da += ea[i]
                room = D - da
                for db, eb, cb in b_items:
                    if db > room:
                        break
                    e = tuple(map(_add, ea, eb))
                    if keep(e):
                        res[e] = res.get(e, 0) + ca * cb
        return SparsePoly(self.ring, {e: _norm(c) for e, c in res.items() if c}, _trusted=True)

    def __pow__(self, n: int):
        return self.pow(n)

    def pow(self, n: int, budget: Optional[TruncationBudget] = None) -> "SparsePoly":
        if n < 0:
            if len(self.terms) != 1:
                raise ValueError("negative powers need a single-term polynomial")
            (e, c), = self.terms.items()
            for i, k in enumerate(e):
                if k and self.ring.names[i] not in self.ring.inverted:
                    raise ValueError(f"{self.ring.names[i]!r} is not invertible")
            return SparsePoly(self.ring, {tuple(k * n for k in e): _norm(Fraction(c) ** n)})
        result = SparsePoly.constant(self.ring, 1)
        base = self
        while n:
            if n & 1:
                result = result.mul(base, budget)
            n >>= 1
            if n:
                base = base.mul(base, budget)
        return result

    def truncate(self, budget: Optional[TruncationBudget]) -> "SparsePoly":
        return truncate(self, budget)

    # ring changes -----------------------------------------------------
    def lift(self, ring: GeneratorSet) -> "SparsePoly":
        """Re-express over ``ring``, which must contain every used generator."""
        if ring == self.ring:
            return self
        idx = []
        for i, n in enumerate(self.ring.names):
            idx.append(ring.index(n) if n in ring else None)
        m = len(ring.names)
        res = {}
        for e, c in self.terms.items():
            new = [0] * m
            for i, k in enumerate(e):
                if k:
                    j = idx[i]
                    if j is None:
                        raise RingMismatchError(f"{self.ring.names[i]!r} missing from target ring")
                    new[j] = k
            res[tuple(new)] = c
        return SparsePoly(ring, res, _trusted=True)

    def rename(self, mapping: Mapping[str, str], ring: Optional[GeneratorSet] = None) -> "SparsePoly":
        """Rename symbols (a permutation or relabelling; images may collide)."""
        if ring is None:
            specs = []
            seen = set()
            for n, d in zip(self.ring.names, self.ring.degrees):
                m = mapping.get(n, n)
                if m not in seen:
                    seen.add(m)
                    specs.append((m, d))
            inv = {mapping.get(n, n) for n in self.ring.inverted}
            ring = GeneratorSet(tuple(s for s, _ in specs), tuple(d for _, d in specs), frozenset(inv))
        idx = [ring.index(mapping.get(n, n)) if (self._uses(i)) else None
               for i, n in enumerate(self.ring.names)]
        m = len(ring.names)
        res: Dict[Exponents, Coeff] = {}
        for e, c in self.terms.items():
            new = [0] * m
            for i, k in enumerate(e):
                if k:
                    new[idx[i]] += k
            t = tuple(new)
            res[t] = res.get(t, 0) + c
        return SparsePoly(ring, {e: c for e, c in res.items() if c}, _trusted=True)

    def _uses(self, i) -> bool:
        return any(e[i] for e in self.terms)

    # coefficient extraction ------------------------------------------
    def coefficient(self, exps: Mapping[str, int]) -> "SparsePoly":
        """Coefficient of the monomial ``exps`` in the listed variables.

        Returns a polynomial over the same ring with those variables absent.
        """
        idx = {self.ring.index(n): k for n, k in exps.items()}
        res = {}
        for e, c in self.terms.items():
            if all(e[i] == k for i, k in idx.items()):
                new = list(e)
                for i in idx:
                    new[i] = 0
                res[tuple(new)] = c
        return SparsePoly(self.ring, res, _trusted=True)

    def coefficient_of(self, exps: Mapping[str, int]) -> Coeff:
        """Scalar coefficient of an exact monomial."""
        e = [0] * len(self.ring.names)
        for n, k in exps.items():
            e[self.ring.index(n)] = k
        return self.terms.get(tuple(e), 0)

    def split_by(self, name: str) -> Dict[int, "SparsePoly"]:
        """Group by the exponent of ``name``; values have that variable removed."""
        i = self.ring.index(name)
        groups: Dict[int, Dict[Exponents, Coeff]] = {}
        for e, c in self.terms.items():
            k = e[i]
            new = e[:i] + (0,) + e[i + 1:]
            groups.setdefault(k, {})[new] = c
        return {k: SparsePoly(self.ring, v, _trusted=True) for k, v in groups.items()}

    def map_coefficients(self, fn) -> "SparsePoly":
        res = {}
        for e, c in self.terms.items():
            v = _norm(as_coeff(fn(c)))
            if v:
                res[e] = v
        return SparsePoly(self.ring, res, _trusted=True)

    def derivative(self, name: str) -> "SparsePoly":
        i = self.ring.index(name)
        res = {}
        for e, c in self.terms.items():
            k = e[i]
            if k:
                new = list(e)
                new[i] -= 1
                res[tuple(new)] = c * k
        return SparsePoly(self.ring, res, _trusted=True)

    def filter_terms(self, pred) -> "SparsePoly":
        return SparsePoly(self.ring, {e: c for e, c in self.terms.items() if pred(e)}, _trusted=True)

    def divides_monomial(self, exps: Mapping[str, int]) -> bool:
        """True if every term is divisible by the monomial ``exps``."""
        idx = [(self.ring.index(n), k) for n, k in exps.items()]
        return all(all(e[i] >= k for i, k in idx) for e in self.terms)

    def shift(self, exps: Mapping[str, int]) -> "SparsePoly":
        """Multiply by a monomial with coefficient one."""
        return self * SparsePoly.monomial(self.ring, exps)

    # display ----------------------------------------------------------
    def __repr__(self):
        return f"SparsePoly({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps, c in self:
            mono = "*".join(f"{n}^{k}" if k != 1 else n for n, k in sorted(exps.items()))
            if not mono:
                s = str(c)
            elif c == 1:
                s = mono
            elif c == -1:
                s = "-" + mono
            else:
                s = f"{c}*{mono}"
            parts.append(s)
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def to_json(self):
        return [{"m": dict(sorted(m.items())), "c": str(c)} for m, c in self]


def truncate(a: SparsePoly, budget: Optional[TruncationBudget]) -> SparsePoly:
    keep = _term_filter(a.ring, budget)
    if keep is None:
        return a
    return SparsePoly(a.ring, {e: c for e, c in a.terms.items() if keep(e)}, _trusted=True)


def poly_arith(a: SparsePoly, b: SparsePoly, op: str) -> SparsePoly:
    if not isinstance(b, SparsePoly) or a.ring != b.ring:
        raise RingMismatchError("poly_arith needs operands over the same generator set")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def substitute(a: SparsePoly, assignment: Mapping[str, SparsePoly],
               budget: Optional[TruncationBudget] = None,
               ring: Optional[GeneratorSet] = None) -> SparsePoly:
    """Simultaneous substitution followed by truncation.

    Every assigned value must live over one common ring (or pass ``ring``);
    unassigned symbols of ``a`` are carried over by name.
    """
    assignment = {k: v for k, v in assignment.items() if k in a.ring}
    if ring is None:
        rings = {v.ring for v in assignment.values() if isinstance(v, SparsePoly)}
        if len(rings) > 1:
            raise RingMismatchError("substituted values live over different rings")
        ring = rings.pop() if rings else a.ring
    vals = {}
    for k, v in assignment.items():
        if isinstance(v, SparsePoly):
            if v.ring != ring:
                v = v.lift(ring)
        else:
            v = SparsePoly.constant(ring, v)
        vals[k] = v

    src = a.ring
    assigned_idx = [src.index(k) for k in vals]
    assigned_set = set(assigned_idx)
    rest_map = []
    for i, n in enumerate(src.names):
        if i in assigned_set:
            continue
        rest_map.append((i, ring.index(n) if n in ring else None, n))

    groups: Dict[Exponents, Dict[Exponents, Coeff]] = {}
    m = len(ring.names)
    for e, c in a.terms.items():
        key = tuple(e[i] for i in assigned_idx)
        new = [0] * m
        for i, j, n in rest_map:
            k = e[i]
            if k:
                if j is None:
                    raise RingMismatchError(f"{n!r} is neither assigned nor present in the target ring")
                new[j] = k
        t = tuple(new)
        g = groups.setdefault(key, {})
        g[t] = g.get(t, 0) + c

    names = list(vals)
    powers: Dict[Tuple[int, int], SparsePoly] = {}

    def power(pos, k):
        hit = powers.get((pos, k))
        if hit is not None:
            return hit
        v = vals[names[pos]]
        if k < 0:
            if v.is_zero():
                raise ZeroDivisionError(f"substituting 0 into negative power of {names[pos]!r}")
            if len(v.terms) != 1:
                raise ValueError(f"cannot invert non-monomial value substituted for {names[pos]!r}")
            res = v.pow(k)
        elif k == 0:
            res = ring.one()
        elif k == 1:
            res = truncate(v, budget)
        else:
            half = power(pos, k // 2)
            res = half.mul(half, budget)
            if k % 2:
                res = res.mul(power(pos, 1), budget)
        powers[(pos, k)] = res
        return res

    prefix_cache: Dict[Exponents, SparsePoly] = {(): ring.one()}

    def product(key):
        hit = prefix_cache.get(key)
        if hit is not None:
            return hit
        head = product(key[:-1])
        k = key[-1]
        res = head if k == 0 else head.mul(power(len(key) - 1, k), budget)
        prefix_cache[key] = res
        return res

    total: Dict[Exponents, Coeff] = {}
    for key in sorted(groups):
        rest = SparsePoly(ring, {e: c for e, c in groups[key].items() if c}, _trusted=True)
        if rest.is_zero():
            continue
        term = rest.mul(product(key), budget)
        for e, c in term.terms.items():
            total[e] = total.get(e, 0) + c
    out = SparsePoly(ring, {e: _norm(c) for e, c in total.items() if c}, _trusted=True)
    return truncate(out, budget)


def exact_divide_integer(a: SparsePoly, n: int, allowed_denominators: Iterable[int] = ()) -> SparsePoly:
    """Return ``q`` with ``n*q == a``.

    ``q`` must have coefficients in Z[1/m : m in allowed_denominators];
    otherwise :class:`NotDivisibleError` is raised with
    the offending term as witness.
    """
    if n == 0:
        raise ZeroDivisionError("exact_divide_integer by 0")
    primes = set()
    for m in allowed_denominators:
        primes |= set(_prime_factors(abs(int(m))))
    res = {}
    for e, c in a.terms.items():
        q = Fraction(c) / n
        if not _denominator_ok(q.denominator, primes):
            names = a.ring.names
            mono = {names[i]: k for i, k in enumerate(e) if k}
            raise NotDivisibleError(f"coefficient {c} of {mono} is not divisible by {n}",
                                    witness={"monomial": mono, "coefficient": str(c), "divisor": n})
        res[e] = _norm(q)
    return SparsePoly(a.ring, res, _trusted=True)


def _denominator_ok(d: int, primes) -> bool:
    for p in primes:
        while d % p == 0:
            d //= p
    return d == 1


def _prime_factors(n: int):
    out = []
    p = 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def in_localization(c: Coeff, allowed_denominators: Iterable[int]) -> bool:
    primes = set()
    for m in allowed_denominators:
        primes |= set(_prime_factors(abs(int(m))))
    return _denominator_ok(Fraction(c).denominator, primes)


def poly_to_json(a: SparsePoly) -> str:
    return json.dumps(a.to_json(), separators=(",", ":"))


def poly_from_json(ring: GeneratorSet, data) -> SparsePoly:
    if isinstance(data, str):
        data = json.loads(data)
    return SparsePoly.from_dict(ring, [(t["m"], Fraction(t["c"])) for t in data])
