"""Discrete calculus for non-additive maps between abelian groups.

``derivative(f)(a1, a2, *rest) = f(a1 + a2, *rest) - f(a1, *rest) - f(a2, *rest)``.
Iterating it gives ``D^q f``, a symmetric map of ``q + 1`` arguments, and
the discrete Taylor expansion reconstructs ``f(sum x_J)`` from the values of
``D^(|J|-1) f`` on all nonempty subsets of summands.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from itertools import combinations
from typing import Any, Callable, Dict, FrozenSet, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple


def _identity(v):
    return v


@dataclass(frozen=True)
class MapBox:
    """A map of ``arity`` arguments between additive value spaces.

    ``zero`` is the neutral element of the *source* (used for sums of
    summands), ``target_zero`` that of the target.  ``reduce`` normalises
    target values, e.g. ``lambda v: v % 2`` for a map into Z/2.
    """

    arity: int
    eval: Callable[..., Any]
    label: str = "f"
    zero: Any = 0
    target_zero: Any = 0
    reduce: Callable[[Any], Any] = _identity

    def __call__(self, *args):
        if len(args) != self.arity:
            raise TypeError(f"{self.label} takes {self.arity} arguments, got {len(args)}")
        return self.reduce(self.eval(*args))


def _sum(values, zero):
    return reduce(lambda a, b: a + b, values, zero)


def derivative(f: MapBox) -> MapBox:
    """Discrete derivative in the first slot; arity grows by one."""

    def df(a1, a2, *rest):
        return f.reduce(f(a1 + a2, *rest) - f(a1, *rest) - f(a2, *rest))

    return MapBox(f.arity + 1, df, f"D({f.label})", f.zero, f.target_zero, f.reduce)


def iterated_derivative(f: MapBox, q: int) -> MapBox:
    """``D^q f`` for a unary ``f``.

    ``q = -1`` gives the zero map of no arguments.  Evaluation uses the
    inclusion-exclusion form ``sum over nonempty S of (-1)^(q+1-|S|) f(sum_S a)``,
    which is what unrolling the recursive definition produces.
    """
    if f.arity != 1:
        raise ValueError("iterated_derivative is defined for unary maps")
    if q < -1:
        raise ValueError("q must be >= -1")
    if q == -1:
        return MapBox(0, lambda: f.target_zero, f"D^-1({f.label})", f.zero, f.target_zero, f.reduce)
    if q == 0:
        return f
    n = q + 1

    def dq(*args):
        total = f.target_zero
        for size in range(1, n + 1):
            sign = -1 if (n - size) % 2 else 1
            for S in combinations(args, size):
                v = f(_sum(S[1:], S[0]))
                total = total + v if sign > 0 else total - v
        return f.reduce(total)

    return MapBox(n, dq, f"D^{q}({f.label})", f.zero, f.target_zero, f.reduce)


def iterated_derivative_recursive(f: MapBox, q: int) -> MapBox:
    """``D^q f`` built literally as ``derivative`` applied ``q`` times."""
    if q == -1:
        return iterated_derivative(f, -1)
    g = f
    for _ in range(q):
        g = derivative(g)
    return g


@lru_cache(maxsize=None)
def nonempty_subsets(keys: Tuple[Hashable, ...]) -> Tuple[FrozenSet, ...]:
    """``M_1``: nonempty subsets of ``keys``, smallest first."""
    out = []
    for size in range(1, len(keys) + 1):
        for c in combinations(keys, size):
            out.append(frozenset(c))
    return tuple(out)


def supp(J2: Iterable[FrozenSet]) -> FrozenSet:
    return frozenset().union(*J2)


@lru_cache(maxsize=None)
def covers(J1: FrozenSet) -> Tuple[FrozenSet, ...]:
    """All ``J2`` in ``M_2`` (sets of nonempty subsets of ``J1``) with ``Supp(J2) = J1``."""
    keys = tuple(sorted(J1, key=repr))
    level1 = nonempty_subsets(keys)
    out = []
    for J2 in nonempty_subsets(level1):
        if supp(J2) == J1:
            out.append(J2)
    return tuple(out)


class IndexFamily:
    """The sets ``M_0``, ``M_1`` (nonempty subsets) and ``M_2`` of a finite key set."""

    def __init__(self, keys: Iterable[Hashable]):
        self.M0 = tuple(sorted(set(keys), key=repr))

    @property
    def M1(self) -> Tuple[FrozenSet, ...]:
        return nonempty_subsets(self.M0)

    @property
    def M2(self) -> Tuple[FrozenSet, ...]:
        return nonempty_subsets(self.M1)

    def covers(self, J1) -> Tuple[FrozenSet, ...]:
        return covers(frozenset(J1))

    @staticmethod
    def supp(J2) -> FrozenSet:
        return supp(J2)


def _ordered(J: FrozenSet) -> List:
    return sorted(J, key=repr)


def taylor_terms(f: MapBox, summands: Mapping[Hashable, Any]) -> Dict[FrozenSet, Any]:
    """Each ``D^(|J1|-1) f(x_J0 | J0 in J1)`` keyed by ``J1``."""
    fam = IndexFamily(summands)
    cache: Dict[int, MapBox] = {}
    out = {}
    for J1 in fam.M1:
        q = len(J1) - 1
        if q not in cache:
            cache[q] = iterated_derivative(f, q)
        out[J1] = cache[q](*[summands[k] for k in _ordered(J1)])
    return out


def taylor_expand(f: MapBox, summands: Mapping[Hashable, Any]) -> Any:
    """Sum over ``J1 in M_1`` of ``D^(|J1|-1) f(x_J0 | J0 in J1)``; equals ``f(sum x)``."""
    return f.reduce(_sum(taylor_terms(f, summands).values(), f.target_zero))


def chain_rule_sides(f: MapBox, g: MapBox, J1: Iterable[Hashable],
                     inputs: Mapping[Hashable, Any]) -> Tuple[Any, Any]:
    """Both sides of the discrete chain rule for ``g o f`` at the summands ``J1``."""
    J1 = frozenset(J1)
    xs = [inputs[k] for k in _ordered(J1)]
    gf = MapBox(1, lambda a: g(f(a)), f"{g.label}o{f.label}", f.zero, g.target_zero, g.reduce)
    lhs = iterated_derivative(gf, len(J1) - 1)(*xs)

    inner: Dict[FrozenSet, Any] = {}
    for J in nonempty_subsets(tuple(_ordered(J1))):
        inner[J] = iterated_derivative(f, len(J) - 1)(*[inputs[k] for k in _ordered(J)])
    rhs = g.target_zero
    gders: Dict[int, MapBox] = {}
    for J2 in covers(J1):
        n = len(J2)
        if n not in gders:
            gders[n] = iterated_derivative(g, n - 1)
        args = [inner[J] for J in J2]
        rhs = rhs + gders[n](*args)
    return lhs, g.reduce(rhs)


def chain_rule_residual(f: MapBox, g: MapBox, J1: Iterable[Hashable],
                        inputs: Mapping[Hashable, Any]) -> Any:
    """LHS - RHS of the discrete chain rule; zero for every composable pair."""
    lhs, rhs = chain_rule_sides(f, g, J1, inputs)
    return g.reduce(lhs - rhs)


def lift_test(f: MapBox, subgroup_gens: Sequence[Any], sample_count: int = 50,
              samples: Optional[Sequence[Any]] = None, seed: int = 0,
              coefficient_range: int = 5) -> bool:
    """Sampled check of ``D f(A', A) = 0``, the condition for ``f`` to factor
    through ``A / A'``.

    Elements of ``A'`` are random integer combinations of ``subgroup_gens``;
    elements of ``A`` come from ``samples`` (integers in [-20, 20] by default).
    """
    rng = random.Random(seed)
    df = derivative(f)
    pool = list(samples) if samples is not None else list(range(-20, 21))
    for _ in range(sample_count):
        a_prime = f.zero
        for g in subgroup_gens:
            a_prime = a_prime + rng.randint(-coefficient_range, coefficient_range) * g
        a = rng.choice(pool)
        if df(a_prime, a) != f.target_zero:
            return False
    return True


def random_polynomial_map(rng: random.Random, degree: int, coeff_range: int = 5,
                          label: str = "p") -> MapBox:
    """A random integer polynomial map Z -> Z of degree at most ``degree``."""
    coeffs = [rng.randint(-coeff_range, coeff_range) for _ in range(degree + 1)]

    def ev(a):
        acc = 0
        for c in reversed(coeffs):
            acc = acc * a + c
        return acc

    return MapBox(1, ev, f"{label}{tuple(coeffs)}")
