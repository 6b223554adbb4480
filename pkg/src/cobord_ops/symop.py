"""Total Steenrod operation, p-th power and the symmetric operation Phi.

``St`` is the multiplicative transformation with inverse Todd genus
``gamma(x) = x * prod_j (x +_F [i_j] t)``.  Its values live in
``Z[1/I][b][t, 1/t]`` where ``I`` is the product of the representatives.
``Phi`` is obtained by dividing the non-positive ``t``-part of
``power_p - St`` by the formal ``[p] = ([p] t) / t``.

Truncation: series variables are capped at total degree ``D``; ``t`` is a
Laurent variable bounded only through the coefficient weight cap ``W``
(homogeneity makes every graded piece finite).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from .fgl import (FormalGroupLaw, LaurentSeries, formal_sum, make_universal, n_series,
                  series_inverse)
from .projops import NO_FLOOR, Multiplicative, Power, Transformation
from .ringcore import (GeneratorSet, NotDivisibleError, SparsePoly, TruncationBudget,
                       exact_divide_integer, substitute, truncate)

T = "t"
T_RING = GeneratorSet((T,), (1,), frozenset({T}))


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SteenrodConfig:
    p: int
    reps: Tuple[int, ...] = ()

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ConfigError(f"p={self.p} is not prime")
        reps = self.reps or tuple(range(1, self.p))
        if len(reps) != self.p - 1:
            raise ConfigError(f"need {self.p - 1} representatives, got {len(reps)}")
        if any(i % self.p == 0 for i in reps):
            raise ConfigError("representatives must be nonzero mod p")
        if sorted(i % self.p for i in reps) != list(range(1, self.p)):
            raise ConfigError("representatives must cover the nonzero classes mod p")
        object.__setattr__(self, "reps", tuple(reps))

    @property
    def inverted(self) -> int:
        """``I``, the product of the representatives."""
        out = 1
        for i in self.reps:
            out *= i
        return abs(out)

    @property
    def sign(self) -> int:
        prod = 1
        for i in self.reps:
            prod *= i
        return 1 if prod > 0 else -1


# helpers -----------------------------------------------------------------

def laurent_budget(D: int, W: Optional[int]) -> TruncationBudget:
    return TruncationBudget(D, W, laurent_floor=NO_FLOOR)


def with_t(ring: GeneratorSet) -> GeneratorSet:
    return ring.union(T_RING)


def laurent_unit_inverse(c: SparsePoly, budget: TruncationBudget, var: str = T) -> SparsePoly:
    """Inverse of ``c = a t^k (1 + h)`` with ``a`` rational and ``h`` of positive
    ``t``-order (nilpotent under the weight cap)."""
    parts = c.split_by(var)
    k = min(parts)
    lead = parts[k]
    if not lead.is_constant() or not lead.constant_term():
        raise ArithmeticError(f"lowest t-part {lead} of {c} is not a rational unit")
    a = Fraction(lead.constant_term())
    ring = c.ring
    mono_inv = ring.gen(var).pow(-k) * (1 / a) if k else ring.one() * (1 / a)
    u = c.mul(mono_inv, budget)
    return series_inverse(u, budget).mul(mono_inv, budget)


def general_reversion(g: SparsePoly, D: int, budget: TruncationBudget, var: str = "x") -> SparsePoly:
    """Compositional inverse of ``g = c x + ...`` where ``c`` is a Laurent unit."""
    ring = g.ring
    x = ring.gen(var)
    c = g.coefficient({var: 1}).lift(ring)
    ci = laurent_unit_inverse(c, budget)
    ell = ci.mul(x, budget)
    for n in range(2, D + 1):
        b = budget.replace(series_degree_cap=n)
        comp = substitute(g, {var: ell}, b, ring=ring)
        top = comp.filter_terms(lambda e, n=n: e[ring.index(var)] == n)
        ell = ell - ci.mul(top, budget)
    return truncate(ell, budget)


# gamma, St, power ----------------------------------------------------------

def gamma_st(config: SteenrodConfig, F: FormalGroupLaw, budget: TruncationBudget) -> SparsePoly:
    """``x * prod_j (x +_F [i_j] t)`` over the law's coefficients plus ``x`` and Laurent ``t``."""
    ring = with_t(F.coefficient_ring.union(GeneratorSet.of("x")))
    x, t = ring.gen("x"), ring.gen(T)
    out = x
    for i in config.reps:
        it = n_series(F, i, t, budget).lift(ring)
        out = out.mul(formal_sum(F, x, it, budget).lift(ring), budget)
    return out


def linear_coefficient(gamma: SparsePoly) -> SparsePoly:
    return gamma.coefficient({"x": 1}).lift(gamma.ring)


def coefficient_twist(config: SteenrodConfig, F: FormalGroupLaw, budget: TruncationBudget,
                      gamma: Optional[SparsePoly] = None, normalize: bool = True) -> Dict[str, SparsePoly]:
    """``phi(b_i) = c^-(i+1) [x^(i+1)] gamma(e(x))`` with ``c = gamma'(0)``.

    ``normalize=False`` drops the ``c`` factor (kept for negative controls).
    """
    if F.exp is None:
        raise ValueError("coefficient twist needs the law's exponential")
    if gamma is None:
        gamma = gamma_st(config, F, budget)
    ring = gamma.ring
    e = F.exp.lift(F.ring.union(ring)).lift(GeneratorSet.union(F.ring, ring))
    big = GeneratorSet.union(F.ring, ring)
    gx = substitute(gamma.lift(big), {"x": e.lift(big)}, budget, ring=big)
    out_ring = ring.without("x")
    c_inv = laurent_unit_inverse(linear_coefficient(gamma), budget).lift(ring) if normalize else None
    out = {}
    nb = len([n for n in F.coefficient_ring.names if n.startswith("b")])
    for i in range(1, nb + 1):
        if i + 1 > budget.D:
            break
        coeff = gx.coefficient({"x": i + 1}).lift(big)
        coeff = _drop(coeff, big, out_ring)
        if normalize:
            coeff = coeff.mul(_drop(c_inv, ring, out_ring).pow(i + 1, budget), budget)
        out[f"b{i}"] = truncate(coeff, budget)
    return out


def _drop(p: SparsePoly, ring: GeneratorSet, out: GeneratorSet) -> SparsePoly:
    extra = [n for n in ring.names if n not in out]
    for n in extra:
        i = p.ring.index(n) if n in p.ring else None
        if i is not None and any(e[i] for e in p.terms):
            raise ValueError(f"{n} still occurs")
    return SparsePoly(out, {tuple(e[p.ring.index(n)] for n in out.names): c for e, c in p.terms.items()},
                      _trusted=True) if all(n in p.ring for n in out.names) else p.lift(out)


def twisted_law(F: FormalGroupLaw, gamma: SparsePoly, budget: TruncationBudget,
                name: Optional[str] = None) -> FormalGroupLaw:
    """``gamma^-1(F(gamma x, gamma y))``: the law making ``gamma`` (with identity
    coefficient map) compatible with ``F``."""
    ring = GeneratorSet.union(F.ring, gamma.ring)
    D = budget.D
    g = gamma.lift(ring)
    ginv = general_reversion(g, D, budget)
    gy = g.rename({"x": "y"}, ring=ring)
    inner = substitute(F.F.lift(ring), {"x": g, "y": gy}, budget, ring=ring)
    FB = substitute(ginv, {"x": inner}, budget, ring=ring)
    return FormalGroupLaw(name or f"{F.name}^gamma", ring, FB, D, exact=False)


def steenrod_total(config: SteenrodConfig, F: FormalGroupLaw, budget: TruncationBudget,
                   normalize: bool = True, gamma: Optional[SparsePoly] = None,
                   phi: Optional[Dict[str, SparsePoly]] = None) -> Transformation:
    """``St`` as a multiplicative transformation.

    Over the universal law the coefficients are twisted by ``phi`` and the
    target law is the universal law itself.  Over laws without
    coefficient-level twist the target is :func:`twisted_law`.
    """
    if gamma is None:
        gamma = gamma_st(config, F, budget)
    if F.hurewicz:
        if phi is None:
            phi = coefficient_twist(config, F, budget, gamma, normalize)
        return Transformation(F, F, Multiplicative(gamma, phi), f"St{config.reps}", T_RING)
    B = twisted_law(F, gamma, budget)
    return Transformation(F, B, Multiplicative(gamma, phi or {}), f"St{config.reps}", T_RING)


def power_op(p: int, F: FormalGroupLaw) -> Transformation:
    return Transformation(F, F, Power(p), f"power{p}", T_RING)


def formal_p(F: FormalGroupLaw, p: int, budget: TruncationBudget) -> SparsePoly:
    """``([p] t) / t`` with ``t`` Laurent; constant term ``p``."""
    ring = with_t(F.coefficient_ring)
    t = ring.gen(T)
    pt = n_series(F, p, t, budget).lift(ring)
    return pt.mul(t.pow(-1), budget)


def nonpositive_part(h: LaurentSeries) -> LaurentSeries:
    return h.nonpositive_part()


# division ----------------------------------------------------------------

class DivisionFailure(ArithmeticError):
    def __init__(self, exponent: int, coefficient: SparsePoly, cause: str = ""):
        super().__init__(f"division by p failed at t^{exponent}: {cause}")
        self.exponent = exponent
        self.coefficient = coefficient


def divide_by_formal_p(N: LaurentSeries, pf: SparsePoly, p: int,
                       allowed: Sequence[int] = ()) -> LaurentSeries:
    """Solve ``nonpositive_part(pf * Phi) = N`` for ``Phi`` with exponents <= 0.

    Back-substitution from the lowest exponent; every step divides by ``p``
    exactly over ``Z[1/allowed]``.
    """
    parts = pf.split_by(T) if T in pf.ring else {0: pf}
    parts = {k: _strip_t(v) for k, v in parts.items()}
    base = GeneratorSet.union(N.base, *[v.ring for v in parts.values()])
    c = {k: v.lift(base) for k, v in parts.items()}
    N = LaurentSeries(base, N.coeffs, N.budget, T)
    if c.get(0) is None or not c[0].is_constant() or c[0].constant_term() != p:
        raise ValueError("formal [p] must have constant term p")
    if N.is_zero():
        return N.zero()
    lo = N.min_exponent()
    phi: Dict[int, SparsePoly] = {}
    for k in range(lo, 1):
        acc = N.coefficient(k)
        for s, v in phi.items():
            cj = c.get(k - s)
            if cj is not None and k - s >= 1:
                acc = acc - cj.mul(v, N.budget)
        acc = truncate(acc, N.budget)
        try:
            phi[k] = exact_divide_integer(acc, p, allowed)
        except NotDivisibleError as exc:
            raise DivisionFailure(k, acc, str(exc)) from exc
    return LaurentSeries(base, phi, N.budget, T)


def _strip_t(v: SparsePoly) -> SparsePoly:
    if T not in v.ring:
        return v
    return SparsePoly(v.ring.without(T),
                      {e[:v.ring.index(T)] + e[v.ring.index(T) + 1:]: c for e, c in v.terms.items()},
                      _trusted=True)


# Phi -----------------------------------------------------------------------

@dataclass
class PhiResult:
    input: SparsePoly
    phi: Optional[LaurentSeries]
    residual: Optional[LaurentSeries]
    difference: LaurentSeries
    K: int
    weight_cap: int
    divisions_exact: bool
    failure: Optional[DivisionFailure] = None

    @property
    def residual_min_exponent(self) -> Optional[int]:
        if self.residual is None or self.residual.is_zero():
            return None
        return self.residual.min_exponent()

    @property
    def ok(self) -> bool:
        m = self.residual_min_exponent
        return self.divisions_exact and (m is None or m >= 1)

    def to_json(self):
        return {
            "input": self.input.to_json(),
            "phi": self.phi.to_json() if self.phi is not None else None,
            "residual_min_exponent": self.residual_min_exponent,
            "divisions_exact": self.divisions_exact,
        }


def _input_profile(alpha: SparsePoly) -> Tuple[int, int]:
    """(max b-index, min over terms of series degree minus weight)."""
    ring = alpha.ring
    bmax = 0
    for n in ring.coefficient_names:
        if n.startswith("b") and n[1:].isdigit() and alpha.degree_in(n):
            bmax = max(bmax, int(n[1:]))
    nmin = min((alpha.series_degree(e) - alpha.weight(e) for e in alpha.terms), default=0)
    return bmax, nmin


def phi_budget(config: SteenrodConfig, alpha: SparsePoly, D: int, T_report: int = 1):
    """Degree cap, weight cap and law size making exponents <= ``T_report`` exact.

    A term ``t^k`` with series degree ``m`` and weight ``w`` in a graded
    piece of degree ``n`` satisfies ``k = p n + w - m``; so ``k <= T_report``
    forces ``w <= D + T_report - p n_min``.
    """
    bmax, nmin = _input_profile(alpha)
    W = max(0, D + T_report - config.p * nmin)
    DF = max(W + 1, bmax + 1, D)
    N = max(DF, bmax)
    return laurent_budget(D, W), N, DF


class _Engine:
    """Shared data (law, St, [p]) for one configuration and budget."""

    def __init__(self, config: SteenrodConfig, budget: TruncationBudget, N: int, DF: int,
                 normalize: bool = True):
        self.config = config
        self.budget = budget
        self.law = make_universal(N, DF)
        self.gamma = gamma_st(config, self.law, budget)
        self.phi_map = coefficient_twist(config, self.law, budget, self.gamma, normalize)
        self.St = steenrod_total(config, self.law, budget, gamma=self.gamma, phi=self.phi_map)
        self.power = power_op(config.p, self.law)
        self.pf = formal_p(self.law, config.p, budget)


@lru_cache(maxsize=32)
def _engine(config: SteenrodConfig, budget: TruncationBudget, N: int, DF: int) -> _Engine:
    return _Engine(config, budget, N, DF)


def _lift_input(alpha: SparsePoly, law: FormalGroupLaw) -> SparsePoly:
    return alpha.lift(GeneratorSet.union(alpha.ring, law.coefficient_ring))


def difference_series(engine: _Engine, alpha: SparsePoly) -> LaurentSeries:
    """``power_p(alpha) - St(alpha)`` as a Laurent series in ``t``."""
    b = engine.budget
    a = _lift_input(alpha, engine.law)
    P = engine.power(a, b)
    S = engine.St(a, b)
    ring = GeneratorSet.union(P.ring, S.ring)
    L = truncate(P.lift(ring) - S.lift(ring), b)
    return LaurentSeries.from_poly(L, b, T)


def symmetric_phi(config: SteenrodConfig, alpha: SparsePoly, D: int, T_report: int = 1,
                  pf_override: Optional[SparsePoly] = None) -> PhiResult:
    """Divide the non-positive part of ``power_p - St`` by ``[p]``.

    The residual ``L - [p] Phi`` is reported on exponents ``<= T_report``,
    where the truncation is exact.  ``pf_override`` replaces the divisor
    (negative controls); the residual is always taken against the true ``[p]``.
    """
    budget, N, DF = phi_budget(config, alpha, D, T_report)
    eng = _engine(config, budget, N, DF)
    L = difference_series(eng, alpha)
    Npart = L.nonpositive_part()
    K = -(Npart.min_exponent() or 0) if not Npart.is_zero() else 0
    pf = pf_override if pf_override is not None else eng.pf
    try:
        Phi = divide_by_formal_p(Npart, pf, config.p, (config.inverted,))
    except DivisionFailure as exc:
        return PhiResult(alpha, None, None, L, K, budget.coefficient_degree_cap, False, exc)
    if Phi.base != L.base:
        L = LaurentSeries(Phi.base, L.coeffs, L.budget, T)
    residual = (L - _as_laurent(eng.pf, L) * Phi).filter(lambda k: k <= T_report)
    return PhiResult(alpha, Phi, residual, L, K, budget.coefficient_degree_cap, True)


def _as_laurent(pf: SparsePoly, like: LaurentSeries) -> LaurentSeries:
    ring = GeneratorSet.union(pf.ring, like.base.union(T_RING))
    return LaurentSeries.from_poly(pf.lift(ring), like.budget, T)


def perturbation_detected(config: SteenrodConfig, result: PhiResult) -> bool:
    """Uniqueness: bumping any single ``phi_k`` (k in [-K, 0]) by 1 must break the
    match with the non-positive part."""
    if result.phi is None:
        return False
    L = result.difference
    Npart = L.nonpositive_part()
    _, N, DF = phi_budget(config, result.input, result.phi.budget.D)
    pf = _as_laurent(formal_p(make_universal(N, DF), config.p, L.budget), L)
    lo = min(-result.K, 0)
    for k in range(lo, 1):
        bumped = result.phi + LaurentSeries(L.base, {k: L.base.one()}, L.budget, T)
        if (pf * bumped).nonpositive_part() == Npart:
            return False
    return True


@dataclass
class VerifyReport:
    rows: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rows)

    def to_json(self):
        return {"passed": self.passed, "inputs": self.rows}


def verify_phi(config: SteenrodConfig, inputs: Sequence[SparsePoly], D: int,
               pf_override=None) -> VerifyReport:
    """Division success, residual positivity and uniqueness per input."""
    rep = VerifyReport()
    for alpha in inputs:
        res = symmetric_phi(config, alpha, D, pf_override=pf_override)
        m = res.residual_min_exponent
        positive = res.divisions_exact and (m is None or m >= 1)
        unique = perturbation_detected(config, res) if res.divisions_exact else False
        row = {"input": str(alpha), "divisions_exact": res.divisions_exact,
               "residual_min_exponent": m, "residual_positive": positive,
               "unique": unique, "K": res.K, "passed": positive and unique}
        if res.failure is not None:
            row["failure"] = {"exponent": res.failure.exponent,
                              "coefficient": str(res.failure.coefficient)[:400]}
        rep.rows.append(row)
    return rep


def corrupt_formal_p(pf: SparsePoly) -> SparsePoly:
    """Drop the ``t^1`` coefficient of ``[p]``."""
    return pf.filter_terms(lambda e: e[pf.ring.index(T)] != 1)


def standard_ring(nvars: int = 2, N: int = 4) -> GeneratorSet:
    """``Z[b_1..b_N][z_1..z_nvars]`` for inputs."""
    return GeneratorSet.of(*[(f"b{i}", -i) for i in range(1, N + 1)],
                           *[f"z{i}" for i in range(1, nvars + 1)])


def conjugated_law(F: FormalGroupLaw, gamma: SparsePoly, budget: TruncationBudget) -> SparsePoly:
    """``gamma(F(gamma^-1 x, gamma^-1 y))``, the law pushed along the coefficient
    twist; its ``xy`` coefficient is ``2 phi(b1)``."""
    ring = GeneratorSet.union(F.ring, gamma.ring)
    g = gamma.lift(ring)
    ginv = general_reversion(g, budget.D, budget)
    inner = substitute(F.F.lift(ring), {"x": ginv, "y": ginv.rename({"x": "y"}, ring=ring)}, budget, ring=ring)
    return substitute(g, {"x": inner}, budget, ring=ring)

