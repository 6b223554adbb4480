"""Transformations of power series rings over formal group laws.

A :class:`Transformation` ``G`` sends a series ``alpha`` over the source law
``A`` (coefficients of ``A`` plus series variables ``z1, z2, ...``) to a
series over the target law ``B`` in the same-named variables.  Structured
representations are evaluated symbolically; :class:`BlackBox` is the escape
hatch.  The axiom checker verifies symmetry, point embeddings, Segre
embeddings and partial diagonals up to the truncation budget.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .fgl import FormalGroupLaw, formal_sum, residue, LaurentSeries, strip_var
from .ringcore import GeneratorSet, SparsePoly, TruncationBudget, substitute, truncate
from .taylor import MapBox, iterated_derivative

NO_FLOOR = 10 ** 6
EMPTY = GeneratorSet((), ())


# representations --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Multiplicative:
    """``z -> gamma(z)`` for every series variable, coefficients through ``phi``.

    ``gamma`` is a series in ``x``; ``phi`` maps source coefficient generators
    to polynomials over ``gamma.ring`` minus ``x``.  Generators missing from
    ``phi`` are embedded by name.
    """

    gamma: SparsePoly
    phi: Mapping[str, SparsePoly] = field(default_factory=dict)


@dataclass(frozen=True)
class Power:
    p: int


@dataclass(frozen=True, eq=False)
class Scaled:
    c: Any
    inner: "Transformation"


@dataclass(frozen=True, eq=False)
class Sum:
    parts: Tuple["Transformation", ...]


@dataclass(frozen=True, eq=False)
class Shifted:
    """``G(alpha) + constant``; breaks ``G(0) = 0`` on purpose."""

    inner: "Transformation"
    constant: Any


@dataclass(frozen=True, eq=False)
class BlackBox:
    fn: Callable[[SparsePoly, Optional[TruncationBudget]], SparsePoly]


@dataclass(frozen=True, eq=False)
class Transformation:
    source: FormalGroupLaw
    target: FormalGroupLaw
    repr: Any
    label: str = "G"
    extra: GeneratorSet = EMPTY

    def __call__(self, alpha: SparsePoly, budget: Optional[TruncationBudget] = None) -> SparsePoly:
        return eval_transformation(self, alpha, budget)

    def output_ring(self, alpha: SparsePoly) -> GeneratorSet:
        series = [(n, d) for n, d in zip(alpha.ring.names, alpha.ring.degrees) if d > 0]
        inv = alpha.ring.inverted & {n for n, _ in series}
        own = GeneratorSet(tuple(n for n, _ in series), tuple(d for _, d in series), frozenset(inv))
        return GeneratorSet.union(self.target.coefficient_ring, self.extra, own)


def identity(law: FormalGroupLaw, extra: GeneratorSet = EMPTY) -> Transformation:
    ring = law.coefficient_ring.union(extra, GeneratorSet.of("x"))
    return Transformation(law, law, Multiplicative(ring.gen("x")), "id", extra)


def power(law: FormalGroupLaw, p: int, extra: GeneratorSet = EMPTY) -> Transformation:
    return Transformation(law, law, Power(p), f"power{p}", extra)


def multiplicative(source: FormalGroupLaw, target: FormalGroupLaw, gamma: SparsePoly,
                   phi: Optional[Mapping[str, SparsePoly]] = None, label: str = "mult",
                   extra: GeneratorSet = EMPTY) -> Transformation:
    return Transformation(source, target, Multiplicative(gamma, dict(phi or {})), label, extra)


def scaled(G: Transformation, c) -> Transformation:
    return Transformation(G.source, G.target, Scaled(c, G), f"{c}*{G.label}", G.extra)


def summed(*Gs: Transformation) -> Transformation:
    G0 = Gs[0]
    extra = GeneratorSet.union(*[G.extra for G in Gs])
    return Transformation(G0.source, G0.target, Sum(tuple(Gs)), "+".join(G.label for G in Gs), extra)


def shifted(G: Transformation, c) -> Transformation:
    return Transformation(G.source, G.target, Shifted(G, c), f"{G.label}+{c}", G.extra)


def black_box(source, target, fn, label="bb", extra: GeneratorSet = EMPTY) -> Transformation:
    return Transformation(source, target, BlackBox(fn), label, extra)


def eval_transformation(G: Transformation, alpha: SparsePoly,
                        budget: Optional[TruncationBudget] = None) -> SparsePoly:
    """Apply ``G`` to ``alpha``; the result lives over ``G.output_ring(alpha)``."""
    r = G.repr
    if isinstance(r, BlackBox):
        return r.fn(alpha, budget)
    out = G.output_ring(alpha)
    if isinstance(r, Multiplicative):
        gring = r.gamma.ring
        assignment = {}
        for n, d in zip(alpha.ring.names, alpha.ring.degrees):
            if d > 0 and n not in alpha.ring.inverted:
                g = r.gamma.rename({"x": n}) if n != "x" else r.gamma
                assignment[n] = g.lift(GeneratorSet.union(out, g.ring))
            elif d <= 0 and n in r.phi:
                assignment[n] = r.phi[n]
        ring = GeneratorSet.union(out, *[v.ring for v in assignment.values()])
        assignment = {k: v.lift(ring) for k, v in assignment.items()}
        res = substitute(alpha, assignment, budget, ring=ring)
        return res.lift(out) if _fits(res, out) else res
    if isinstance(r, Power):
        a = truncate(alpha.lift(GeneratorSet.union(out, alpha.ring)), budget)
        return a.pow(r.p, budget)
    if isinstance(r, Scaled):
        return eval_transformation(r.inner, alpha, budget) * r.c
    if isinstance(r, Sum):
        vals = [eval_transformation(P, alpha, budget) for P in r.parts]
        ring = GeneratorSet.union(*[v.ring for v in vals])
        total = ring.zero()
        for v in vals:
            total = total + v.lift(ring)
        return total
    if isinstance(r, Shifted):
        return eval_transformation(r.inner, alpha, budget) + r.constant
    raise TypeError(f"unknown representation {r!r}")


def _fits(p: SparsePoly, ring: GeneratorSet) -> bool:
    return all(s in ring for s in p.symbols())


def _same_ring(a: SparsePoly, b: SparsePoly):
    ring = GeneratorSet.union(a.ring, b.ring)
    return a.lift(ring), b.lift(ring)


def value_at_zero(G: Transformation, ring: GeneratorSet, budget=None) -> SparsePoly:
    return eval_transformation(G, ring.zero(), budget)


def normalized(G: Transformation, ring: GeneratorSet, budget=None) -> Transformation:
    """``G - G(0)``."""
    g0 = value_at_zero(G, ring, budget)
    if g0.is_zero():
        return G
    return shifted(G, -g0)


# axiom checks -----------------------------------------------------------

@dataclass
class AxiomReport:
    """Pass/fail per axiom; failures carry a witness input."""

    results: Dict[str, bool] = field(default_factory=dict)
    witnesses: Dict[str, dict] = field(default_factory=dict)
    checked: int = 0

    def record(self, axiom: str, ok: bool, witness: Optional[dict] = None):
        self.results[axiom] = self.results.get(axiom, True) and ok
        if not ok and axiom not in self.witnesses:
            self.witnesses[axiom] = witness or {}

    @property
    def passed(self) -> bool:
        return all(self.results.values())

    def failed(self) -> List[str]:
        return [k for k, v in self.results.items() if not v]

    def to_json(self):
        return {"passed": self.passed, "results": dict(self.results),
                "witnesses": self.witnesses, "checked": self.checked}


def zvars(k: int) -> Tuple[str, ...]:
    return tuple(f"z{i}" for i in range(1, k + 1))


def series_ring(law: FormalGroupLaw, nvars: int = 4, names: Sequence[str] = ()) -> GeneratorSet:
    """Coefficients of ``law`` plus ``z1..z<nvars>`` (and any extra names)."""
    return law.coefficient_ring.union(GeneratorSet.of(*zvars(nvars), *names))


def sample_series(law: FormalGroupLaw, D: int, count: int = 20, seed: int = 0,
                  nvars: int = 4, used: int = 3) -> List[SparsePoly]:
    """A deterministic library of sample series in ``z1..z<used>``.

    The first few are hand-picked monomials; the rest are random sparse
    series with small integer coefficients and zero constant term.
    """
    ring = series_ring(law, nvars)
    rng = random.Random(seed)
    z = ring.gens(*zvars(used))
    coeffs = [ring.gen(n) for n in law.coefficient_ring.names][:3]
    fixed = [z[0], z[0] * z[0], z[0] * z[1], z[0] + z[1], z[0] * z[1] * z[2] if D >= 3 else z[2]]
    if coeffs:
        fixed.append(coeffs[0] * z[0])
    fixed.append(z[0] * 3 - z[1] * z[1] * 2)
    out = [truncate(f, TruncationBudget(D)) for f in fixed]
    while len(out) < count:
        p = ring.zero()
        for _ in range(rng.randint(1, 4)):
            mono = ring.one()
            deg = rng.randint(1, D)
            for _ in range(deg):
                mono = mono * rng.choice(z)
            if coeffs and rng.random() < 0.4:
                mono = mono * rng.choice(coeffs)
            p = p + mono * rng.choice([-3, -2, -1, 1, 2, 3])
        p = truncate(p, TruncationBudget(D))
        if p:
            out.append(p)
    return out


def _witness(axiom, alpha, lhs, rhs):
    diff = lhs - rhs
    return {"axiom": axiom, "input": str(alpha), "difference": str(diff)[:400]}


def _check_pair(report, axiom, alpha, lhs, rhs, cmp):
    lhs, rhs = _same_ring(lhs, rhs)
    ok = cmp(lhs, rhs)
    report.record(axiom, ok, None if ok else _witness(axiom, alpha, lhs, rhs))


def _exact_cmp(budget):
    def cmp(a, b):
        return truncate(a - b, budget).is_zero()
    return cmp


def _rename_ring(p: SparsePoly, mapping: Mapping[str, str]) -> SparsePoly:
    return p.rename(mapping, ring=p.ring)


def _highest_index(p: SparsePoly, prefix="z", suffix="") -> int:
    best = 0
    for s in p.symbols():
        if s.startswith(prefix) and s.endswith(suffix):
            core = s[len(prefix): len(s) - len(suffix) if suffix else None]
            if core.isdigit():
                best = max(best, int(core))
    return best


def check_axioms(G: Transformation, budget: TruncationBudget,
                 samples: Sequence[SparsePoly], nvars: int = 4) -> AxiomReport:
    """Symbolic check of symmetry, point embedding, Segre embedding, diagonal
    and the variable-count filtration on each sample (up to ``budget``)."""
    report = AxiomReport()
    cmp = _exact_cmp(budget)
    names = zvars(nvars)
    A, B = G.source, G.target
    # source-side data is exact; the weight cap applies to outputs only
    src = budget.replace(coefficient_degree_cap=None)
    for alpha in samples:
        report.checked += 1
        alpha = alpha.lift(alpha.ring.union(GeneratorSet.of(*names)))
        ring = alpha.ring
        Ga = eval_transformation(G, alpha, budget)
        out = Ga.ring
        used = _highest_index(alpha)

        # filtration: no new variables
        ok = _highest_index(Ga) <= used
        report.record("filtration", ok, None if ok else {"input": str(alpha), "output": str(Ga)[:400]})

        # (a_i) symmetry under adjacent transpositions
        for i in range(1, nvars):
            sw = {names[i - 1]: names[i], names[i]: names[i - 1]}
            lhs = _rename_ring(Ga, sw)
            rhs = eval_transformation(G, _rename_ring(alpha, sw), budget)
            _check_pair(report, "a_i", alpha, lhs, rhs, cmp)

        # (a_ii) point embedding z1 = 0
        lhs = substitute(Ga, {"z1": out.zero()}, budget, ring=out)
        rhs = eval_transformation(G, substitute(alpha, {"z1": ring.zero()}, src, ring=ring), budget)
        _check_pair(report, "a_ii", alpha, lhs, rhs, cmp)

        # (a_iii) Segre embedding: first argument z1 +_B z2, then z3, z4, ...
        if used + 1 <= nvars:
            shift_out = {names[k]: out.gen(names[k + 1]) for k in range(1, nvars - 1)}
            shift_out["z1"] = formal_sum(B, out.gen("z1"), out.gen("z2"), budget)
            lring = shift_out["z1"].ring
            lhs = substitute(Ga.lift(GeneratorSet.union(out, lring)),
                             {k: v.lift(GeneratorSet.union(out, lring)) for k, v in shift_out.items()},
                             budget)
            shift_in = {names[k]: ring.gen(names[k + 1]) for k in range(1, nvars - 1)}
            shift_in["z1"] = formal_sum(A, ring.gen("z1"), ring.gen("z2"), src).lift(ring)
            rhs = eval_transformation(G, substitute(alpha, shift_in, src, ring=ring), budget)
            _check_pair(report, "a_iii", alpha, lhs, rhs, cmp)

        # (a_iv) partial diagonal z1 = z2
        lhs = substitute(Ga, {"z1": out.gen("z2")}, budget, ring=out)
        rhs = eval_transformation(G, substitute(alpha, {"z1": ring.gen("z2")}, src, ring=ring), budget)
        _check_pair(report, "a_iv", alpha, lhs, rhs, cmp)
    return report


# poly-transformations ---------------------------------------------------

def block_name(name: str, i: int) -> str:
    return f"{name}_{i}"


def to_block(alpha: SparsePoly, i: int) -> SparsePoly:
    """Rename every series variable ``s`` of ``alpha`` to ``s_i``."""
    mapping = {n: block_name(n, i) for n, d in zip(alpha.ring.names, alpha.ring.degrees)
               if d > 0 and n not in alpha.ring.inverted}
    return alpha.rename(mapping)


def diagonal(p: SparsePoly) -> SparsePoly:
    """Collapse block variables ``s_i`` back to ``s`` (the diagonal pull-back)."""
    mapping = {}
    for n, d in zip(p.ring.names, p.ring.degrees):
        if d > 0 and "_" in n and n.rsplit("_", 1)[1].isdigit():
            mapping[n] = n.rsplit("_", 1)[0]
    return p.rename(mapping)


def _common_ring(*ps: SparsePoly):
    ring = GeneratorSet.union(*[p.ring for p in ps])
    return [p.lift(ring) for p in ps]


@dataclass(frozen=True, eq=False)
class PolyTransformation:
    """An external ``r``-ary poly-transformation.

    ``fn`` receives the inputs already renamed into disjoint blocks
    (slot ``i`` uses ``z<k>_<i>``, ``i`` counted from 1) and returns a series
    in the union of the blocks.
    """

    arity: int
    sources: Tuple[FormalGroupLaw, ...]
    target: FormalGroupLaw
    fn: Callable[[List[SparsePoly], Optional[TruncationBudget]], SparsePoly]
    label: str = "H"

    def __call__(self, alphas: Sequence[SparsePoly], budget=None) -> SparsePoly:
        if len(alphas) != self.arity:
            raise ValueError(f"{self.label} takes {self.arity} inputs")
        blocks = _common_ring(*[to_block(a, i + 1) for i, a in enumerate(alphas)])
        return self.fn(blocks, budget)


@dataclass(frozen=True, eq=False)
class InternalPolyTransformation:
    """An internal ``r``-ary poly-transformation: all inputs share one set of variables."""

    arity: int
    sources: Tuple[FormalGroupLaw, ...]
    target: FormalGroupLaw
    fn: Callable[[List[SparsePoly], Optional[TruncationBudget]], SparsePoly]
    label: str = "H^"

    def __call__(self, alphas: Sequence[SparsePoly], budget=None) -> SparsePoly:
        if len(alphas) != self.arity:
            raise ValueError(f"{self.label} takes {self.arity} inputs")
        return self.fn(_common_ring(*alphas), budget)


def external_product(*Gs: Transformation) -> PolyTransformation:
    """``H(a_1, ..., a_r) = prod G_i(a_i)`` over disjoint blocks."""

    def fn(blocks, budget):
        vals = [eval_transformation(G, a, budget) for G, a in zip(Gs, blocks)]
        vals = _common_ring(*vals)
        out = vals[0]
        for v in vals[1:]:
            out = out.mul(v, budget)
        return out

    return PolyTransformation(len(Gs), tuple(G.source for G in Gs), Gs[0].target, fn,
                              "x".join(G.label for G in Gs))


def external_to_internal(H: PolyTransformation) -> InternalPolyTransformation:
    def fn(alphas, budget):
        return diagonal(H(alphas, budget))

    return InternalPolyTransformation(H.arity, H.sources, H.target, fn, f"int({H.label})")


def internal_to_external(Hh: InternalPolyTransformation) -> PolyTransformation:
    def fn(blocks, budget):
        return Hh(blocks, budget)

    return PolyTransformation(Hh.arity, Hh.sources, Hh.target, fn, f"ext({Hh.label})")


def _mapbox(G: Transformation, budget) -> MapBox:
    def ev(a):
        return eval_transformation(G, a, budget)
    return MapBox(1, ev, G.label)


def _add_values(vals):
    vals = _common_ring(*vals)
    total = vals[0]
    for v in vals[1:]:
        total = total + v
    return total


def _derivative_value(G: Transformation, args: Sequence[SparsePoly], budget) -> SparsePoly:
    """``D^(n-1) G(args)`` for args over a common ring (inclusion-exclusion)."""
    args = _common_ring(*args)
    ring = args[0].ring
    zero_out = eval_transformation(G, ring.zero(), budget)
    box = MapBox(1, lambda a: eval_transformation(G, a, budget), G.label, ring.zero(), zero_out.ring.zero())
    dq = iterated_derivative(box, len(args) - 1)
    return dq(*args) if len(args) > 1 else box(args[0])


def derived_poly(G: Transformation, q: int) -> PolyTransformation:
    """``D^q G`` as an external poly-transformation of arity ``q + 1``."""
    if q < 0:
        raise ValueError("derived_poly needs q >= 0")

    def fn(blocks, budget):
        return _derivative_value(G, blocks, budget)

    return PolyTransformation(q + 1, (G.source,) * (q + 1), G.target, fn, f"D^{q}({G.label})")


def internal_derivative(G: Transformation, q: int) -> InternalPolyTransformation:
    def fn(alphas, budget):
        return _derivative_value(G, alphas, budget)

    return InternalPolyTransformation(q + 1, (G.source,) * (q + 1), G.target, fn, f"d^{q}({G.label})")


def check_axioms_poly(H: PolyTransformation, budget: TruncationBudget,
                      samples: Sequence[Sequence[SparsePoly]], nvars: int = 4) -> AxiomReport:
    """The single-variable checks applied block by block, other slots fixed."""
    report = AxiomReport()
    cmp = _exact_cmp(budget)
    names = zvars(nvars)
    src = budget.replace(coefficient_degree_cap=None)
    for tup in samples:
        report.checked += 1
        tup = [a.lift(a.ring.union(GeneratorSet.of(*names))) for a in tup]
        out_val = H(tup, budget)
        for i in range(H.arity):
            blk = i + 1
            alpha = tup[i]
            ring = alpha.ring
            out = out_val.ring
            bn = [block_name(n, blk) for n in names]
            out = GeneratorSet.union(out, GeneratorSet.of(*bn))
            Ha = out_val.lift(out)

            def with_slot(new):
                t = list(tup)
                t[i] = new
                return H(t, budget)

            # filtration within the block
            ok = _highest_index(Ha, "z", f"_{blk}") <= _highest_index(alpha)
            report.record("filtration", ok, None if ok else {"slot": blk, "input": str(alpha)})

            for k in range(1, nvars):
                sw_out = {bn[k - 1]: bn[k], bn[k]: bn[k - 1]}
                sw_in = {names[k - 1]: names[k], names[k]: names[k - 1]}
                lhs = _rename_ring(Ha, sw_out)
                rhs = with_slot(_rename_ring(alpha, sw_in))
                _check_pair(report, "a_i", alpha, lhs, rhs, cmp)

            lhs = substitute(Ha, {bn[0]: out.zero()}, budget, ring=out)
            rhs = with_slot(substitute(alpha, {"z1": ring.zero()}, src, ring=ring))
            _check_pair(report, "a_ii", alpha, lhs, rhs, cmp)

            if _highest_index(alpha) + 1 <= nvars:
                B = H.target
                A = H.sources[i]
                s = formal_sum(B, out.gen(bn[0]), out.gen(bn[1]), budget)
                lring = GeneratorSet.union(out, s.ring)
                assign = {bn[k]: lring.gen(bn[k + 1]) for k in range(1, nvars - 1)}
                assign[bn[0]] = s.lift(lring)
                lhs = substitute(Ha.lift(lring), assign, budget, ring=lring)
                shift_in = {names[k]: ring.gen(names[k + 1]) for k in range(1, nvars - 1)}
                shift_in["z1"] = formal_sum(A, ring.gen("z1"), ring.gen("z2"), src).lift(ring)
                rhs = with_slot(substitute(alpha, shift_in, src, ring=ring))
                _check_pair(report, "a_iii", alpha, lhs, rhs, cmp)

            lhs = substitute(Ha, {bn[0]: out.gen(bn[1])}, budget, ring=out)
            rhs = with_slot(substitute(alpha, {"z1": ring.gen("z2")}, src, ring=ring))
            _check_pair(report, "a_iv", alpha, lhs, rhs, cmp)
    return report


# continuity -------------------------------------------------------------

class PreconditionError(ValueError):
    pass


def continuity_check(G: Transformation, exponents: Mapping[str, int], budget: TruncationBudget,
                     samples: int = 100, seed: int = 0, ring: Optional[GeneratorSet] = None,
                     report: Optional[dict] = None) -> bool:
    """Images of the monomial ideal generated by ``prod z^d`` stay in that ideal,
    and congruent inputs have congruent images.

    Raises :class:`PreconditionError` if ``G(0) != 0``.
    """
    if ring is None:
        ring = series_ring(G.source, max(4, len(exponents)))
    if not value_at_zero(G, ring, budget).is_zero():
        raise PreconditionError(f"{G.label}(0) != 0; normalise before checking continuity")
    rng = random.Random(seed)
    gen = SparsePoly.monomial(ring, exponents)
    zs = [ring.gen(n) for n in ring.series_names]
    coeffs = [ring.gen(n) for n in ring.coefficient_names]

    def rand_series(min_deg=0):
        p = ring.zero()
        for _ in range(rng.randint(1, 3)):
            m = ring.one()
            for _ in range(rng.randint(min_deg, max(min_deg, budget.D // 2))):
                m = m * rng.choice(zs)
            if coeffs and rng.random() < 0.3:
                m = m * rng.choice(coeffs)
            p = p + m * rng.choice([-2, -1, 1, 2, 3])
        return p

    ok = True
    for n in range(samples):
        x = truncate(gen * rand_series(), budget)
        img = eval_transformation(G, x, budget)
        if not img.divides_monomial(exponents):
            ok = False
            if report is not None:
                report.setdefault("ideal", {"input": str(x), "image": str(img)[:400]})
            break
        base = truncate(rand_series(1), budget)
        a = eval_transformation(G, base, budget)
        b = eval_transformation(G, truncate(base + x, budget), budget)
        a, b = _same_ring(a, b)
        if not (b - a).divides_monomial(exponents):
            ok = False
            if report is not None:
                report.setdefault("congruence", {"base": str(base), "shift": str(x)})
            break
    return ok


def continuity_check_poly(H: PolyTransformation, exponents: Sequence[Mapping[str, int]],
                          budget: TruncationBudget, rings: Sequence[GeneratorSet],
                          samples: int = 100, seed: int = 0) -> bool:
    """Block-monomial ideals land in the product ideal, for ``H`` vanishing
    whenever one slot is zero."""
    rng = random.Random(seed)
    target = {}
    for i, ex in enumerate(exponents):
        for n, k in ex.items():
            target[block_name(n, i + 1)] = k
    for _ in range(samples):
        inputs = []
        for ring, ex in zip(rings, exponents):
            zs = [ring.gen(n) for n in ring.series_names]
            m = SparsePoly.monomial(ring, ex)
            extra = ring.one() * rng.choice([1, 2, -1])
            if rng.random() < 0.5:
                extra = extra + rng.choice(zs) * rng.choice([1, -3])
            inputs.append(truncate(m * extra, budget))
        img = H(inputs, budget)
        if not all(n in img.ring for n in target) and not img.is_zero():
            return False
        if img.is_zero():
            continue
        if not img.divides_monomial({n: k for n, k in target.items() if n in img.ring}) or \
                any(n not in img.ring for n in target):
            return False
    return True


# residue push-forward ----------------------------------------------------

def as_laurent(p: SparsePoly, var: str = "t") -> SparsePoly:
    """Re-declare ``var`` as a Laurent (invertible) variable."""
    if var not in p.ring or var in p.ring.inverted:
        return p
    return SparsePoly(p.ring.with_inverted(var), p.terms, _trusted=True)


def residue_budget(budget: TruncationBudget, law: FormalGroupLaw) -> TruncationBudget:
    """Budget for Laurent computations over ``law``: weight cap tied to the
    law's precision, no effective floor."""
    W = budget.coefficient_degree_cap
    if law.coefficient_ring.names and not law.exact:
        cap = law.D - 1
        W = cap if W is None else min(W, cap)
    elif law.coefficient_ring.names and W is None:
        W = law.D
    return budget.replace(coefficient_degree_cap=W, laurent_floor=NO_FLOOR, laurent_cap=None)


def inverse_formal_shift(B: FormalGroupLaw, mu: SparsePoly, budget: TruncationBudget,
                         var: str = "t") -> SparsePoly:
    """``1 / (t +_B mu)`` expanded in powers of ``mu``:
    ``sum_n (-R)^n t^(-n-1)`` with ``R = (t +_B mu) - t``."""
    ring = mu.ring
    t = ring.gen(var)
    s = formal_sum(B, t, mu, budget).lift(ring)
    R = s - t
    tinv = t.pow(-1)
    total = ring.zero()
    term = tinv
    while term:
        total = total + term
        term = (-term).mul(R, budget).mul(tinv, budget)
    return total


def residue_rhs(value: SparsePoly, roots: Sequence[str], B: FormalGroupLaw,
                budget: TruncationBudget, xs: Sequence[str], var: str = "t") -> SparsePoly:
    """``Res_t [value(x_i = t +_B mu_i) * omega / (prod (t +_B mu_i) * t)]``."""
    lb = residue_budget(budget, B)
    ring = GeneratorSet.union(value.ring.without(*xs), B.coefficient_ring,
                              GeneratorSet.of(*roots),
                              GeneratorSet((var,), (1,), frozenset({var})))
    t = ring.gen(var)
    assign = {}
    denom = ring.one()
    for x, mu in zip(xs, roots):
        s = formal_sum(B, t, ring.gen(mu), lb).lift(ring)
        assign[x] = s
        denom = denom.mul(inverse_formal_shift(B, ring.gen(mu), lb, var), lb)
    v = substitute(value, assign, lb, ring=ring)
    h = v.mul(denom, lb).mul(t.pow(-1), lb)
    base_budget = lb
    ls = LaurentSeries.from_poly(h, base_budget, var)
    omega = B.omega
    return residue(ls, B, omega)


def pushforward_rhs(G: Transformation, alpha: SparsePoly, roots: Sequence[str],
                    budget: TruncationBudget, var: str = "t") -> SparsePoly:
    """The residue expression to which the push-forward along a regular
    embedding with normal Chern roots ``roots`` is applied:
    ``Res_t G(x_1...x_k alpha)(x_i = t +_B mu_i) omega_t / (prod(t +_B mu_i) t)``."""
    k = len(roots)
    if k < 1:
        raise ValueError("pushforward_rhs needs at least one root")
    xs = [f"x{i}" for i in range(1, k + 1)]
    ring = alpha.ring.union(GeneratorSet.of(*xs))
    prod = ring.one()
    for x in xs:
        prod = prod * ring.gen(x)
    lb = residue_budget(budget, G.target)
    val = eval_transformation(G, truncate(prod * alpha.lift(ring), lb), lb)
    return residue_rhs(val, roots, G.target, budget, xs, var)


def check_fgl_compatibility(G: Transformation, budget: TruncationBudget) -> SparsePoly:
    """For a multiplicative ``G``: ``phi_*F_A(gamma x, gamma y) - gamma(F_B(x, y))``.

    This is the Segre axiom on the single input ``z1`` written in terms of
    the laws; it is the check that detects a wrong coefficient map.
    """
    r = G.repr
    if not isinstance(r, Multiplicative):
        raise TypeError("check_fgl_compatibility needs a multiplicative transformation")
    A, B = G.source, G.target
    ring = GeneratorSet.union(r.gamma.ring, B.ring, *[v.ring for v in r.phi.values()])
    g = r.gamma.lift(ring)
    gy = g.rename({"x": "y"}, ring=ring)
    FA = A.F.lift(GeneratorSet.union(A.ring, ring))
    ring = FA.ring
    assign = {n: v.lift(ring) for n, v in r.phi.items() if n in A.ring}
    assign.update({"x": g.lift(ring), "y": gy.lift(ring)})
    lhs = substitute(FA, assign, budget, ring=ring)
    rhs = substitute(g.lift(ring), {"x": B.F.lift(ring)}, budget, ring=ring)
    return truncate(lhs - rhs, budget)
