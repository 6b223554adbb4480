"""Combinatorial model of strict normal crossing divisors.

All faces share one ambient polynomial ring: coefficients of the law plus
one degree-1 root per component (``lam<name>`` on the target divisor,
``mu<name>`` on the source divisor of a square).  Push-forward from a face
``I1`` to the ambient ring multiplies by the product of the roots in ``I1``.
A class on the divisor is stored as a face collection ``{I1: value}``
meaning ``sum (d_I1)_*(value)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .fgl import FormalGroupLaw, formal_sum, n_series
from .projops import (Transformation, _derivative_value, eval_transformation, residue_rhs)
from .ringcore import GeneratorSet, SparsePoly, TruncationBudget, substitute, truncate
from .taylor import covers, nonempty_subsets

STANDARD = "standard"
CONCENTRATED = "concentrated"
CONVENTIONS = (STANDARD, CONCENTRATED)

FaceCollection = Dict[FrozenSet[str], SparsePoly]


@dataclass(frozen=True)
class SNCModel:
    """Components with multiplicities; ``prefix`` names the Chern roots."""

    components: Tuple[str, ...]
    mult: Tuple[int, ...]
    prefix: str = "lam"

    def __post_init__(self):
        if len(self.components) != len(self.mult):
            raise ValueError("one multiplicity per component")
        if len(set(self.components)) != len(self.components):
            raise ValueError("component names must be distinct")
        if any(m < 1 for m in self.mult):
            raise ValueError("multiplicities must be >= 1")

    @classmethod
    def of(cls, mults: Mapping[str, int] | Sequence[int], prefix: str = "lam") -> "SNCModel":
        if isinstance(mults, Mapping):
            return cls(tuple(mults), tuple(mults.values()), prefix)
        return cls(tuple(str(i) for i in range(1, len(mults) + 1)), tuple(mults), prefix)

    def root(self, name: str) -> str:
        return f"{self.prefix}{name}"

    @property
    def roots(self) -> Tuple[str, ...]:
        return tuple(self.root(n) for n in self.components)

    def multiplicity(self, name: str) -> int:
        return self.mult[self.components.index(name)]

    def ring(self, F: FormalGroupLaw, *extra: str) -> GeneratorSet:
        return F.coefficient_ring.union(GeneratorSet.of(*self.roots, *extra))

    def faces(self) -> Tuple[FrozenSet[str], ...]:
        return nonempty_subsets(self.components)

    def face_root_product(self, face: Iterable[str], ring: GeneratorSet) -> SparsePoly:
        return SparsePoly.monomial(ring, {self.root(n): 1 for n in face})


@dataclass(frozen=True)
class FaceClass:
    face: FrozenSet[str]
    value: SparsePoly


@dataclass(frozen=True)
class SquareData:
    """A cartesian square: ``E`` over ``M`` (roots ``mu``) maps to ``D`` over ``L``
    (roots ``lam``) with ``f*(D_i) = sum_j p[i][j] E_j``."""

    target: SNCModel
    source: SNCModel
    incidence: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.incidence) != len(self.target.components):
            raise ValueError("one incidence row per target component")
        for row in self.incidence:
            if len(row) != len(self.source.components):
                raise ValueError("one incidence column per source component")
            if any(v < 0 for v in row):
                raise ValueError("incidence entries must be >= 0")

    @classmethod
    def build(cls, target_mults: Sequence[int], incidence: Sequence[Sequence[int]],
              source_mults: Optional[Sequence[int]] = None) -> "SquareData":
        target = SNCModel.of(target_mults, "lam")
        ncols = len(incidence[0]) if incidence else 0
        if source_mults is None:
            # multiplicities of f^{-1}(D) = sum_i l_i f*(D_i)
            source_mults = [sum(l * row[j] for l, row in zip(target_mults, incidence)) or 1
                            for j in range(ncols)]
        source = SNCModel.of(source_mults, "mu")
        return cls(target, source, tuple(tuple(r) for r in incidence))

    def row(self, i: str) -> Dict[str, int]:
        r = self.incidence[self.target.components.index(i)]
        return {j: p for j, p in zip(self.source.components, r)}

    def ring(self, F: FormalGroupLaw, *extra: str) -> GeneratorSet:
        return F.coefficient_ring.union(GeneratorSet.of(*self.target.roots, *self.source.roots, *extra))


def load_model(data) -> SNCModel | SquareData:
    """``{"components":[{"name","mult"}]}`` gives a model; adding
    ``"incidence"`` (rows per component) gives a square whose source
    components are ``"source_components"`` or default to the columns."""
    if isinstance(data, str):
        data = json.loads(data)
    comps = data["components"]
    names = tuple(str(c["name"]) for c in comps)
    mults = tuple(int(c.get("mult", 1)) for c in comps)
    if "incidence" not in data:
        return SNCModel(names, mults, "lam")
    inc = tuple(tuple(int(v) for v in row) for row in data["incidence"])
    target = SNCModel(names, mults, "lam")
    src = data.get("source_components")
    if src:
        source = SNCModel(tuple(str(c["name"]) for c in src), tuple(int(c.get("mult", 1)) for c in src), "mu")
        return SquareData(target, source, inc)
    base = SquareData.build(mults, inc)
    return base


# splitting series -------------------------------------------------------

def formal_multiple_sum(F: FormalGroupLaw, parts: Sequence[Tuple[int, SparsePoly]],
                        budget: TruncationBudget, ring: GeneratorSet) -> SparsePoly:
    """``sum^F [n_i] s_i``."""
    total = None
    for n, s in parts:
        if n == 0:
            continue
        term = n_series(F, n, s.lift(ring), budget).lift(ring)
        total = term if total is None else formal_sum(F, total, term, budget).lift(ring)
    return ring.zero() if total is None else total


def splitting_series(F: FormalGroupLaw, model: SNCModel, convention: str = STANDARD,
                     budget: Optional[TruncationBudget] = None,
                     mults: Optional[Mapping[str, int]] = None) -> FaceCollection:
    """Split ``sum^F [l_i] lam_i`` along faces: ``sum_I1 (prod_I1 lam) F_I1``.

    ``standard`` gives each face the monomials involving exactly its roots;
    ``concentrated`` sends each monomial to the first root it involves.
    ``mults`` overrides the model's multiplicities (zeros drop components).
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    budget = budget or TruncationBudget(F.D)
    ring = model.ring(F)
    m = dict(zip(model.components, model.mult)) if mults is None else dict(mults)
    total = formal_multiple_sum(F, [(m.get(n, 0), ring.gen(model.root(n))) for n in model.components],
                                budget, ring)
    root_of = {model.root(n): n for n in model.components}
    idx = [(ring.index(r), n) for r, n in root_of.items()]
    out: Dict[FrozenSet[str], Dict] = {}
    for e, c in total.terms.items():
        involved = [n for i, n in idx if e[i]]
        if convention == STANDARD:
            face = frozenset(involved)
            drop = involved
        else:
            first = min(involved, key=model.components.index)
            face = frozenset([first])
            drop = [first]
        e2 = list(e)
        for n in drop:
            e2[ring.index(model.root(n))] -= 1
        bucket = out.setdefault(face, {})
        key = tuple(e2)
        bucket[key] = bucket.get(key, 0) + c
    return {face: SparsePoly(ring, terms) for face, terms in out.items()}


def recombine(parts: FaceCollection, model: SNCModel, ring: Optional[GeneratorSet] = None) -> SparsePoly:
    """Ambient push-forward ``sum_I1 (prod_I1 lam) value_I1``."""
    vals = list(parts.values())
    if ring is None:
        ring = GeneratorSet.union(*[v.ring for v in vals]) if vals else GeneratorSet.of(*model.roots)
    total = ring.zero()
    for face, v in parts.items():
        total = total + model.face_root_product(face, ring) * v.lift(ring)
    return total


def divisor_class(model: SNCModel, F: FormalGroupLaw, convention: str = STANDARD,
                  budget: Optional[TruncationBudget] = None) -> FaceCollection:
    """``[D] = sum_I1 (d_I1)_*(F_I1)``; its ambient push-forward is ``sum^F [l] lam``."""
    return splitting_series(F, model, convention, budget)


def pullback_dstar(model: SNCModel, F: FormalGroupLaw, x: SparsePoly, convention: str = STANDARD,
                   budget: Optional[TruncationBudget] = None) -> FaceCollection:
    """``d^*(x) = sum_I1 (d_I1)_*(x * F_I1)``."""
    budget = budget or TruncationBudget(F.D)
    parts = splitting_series(F, model, convention, budget)
    out = {}
    for face, v in parts.items():
        ring = GeneratorSet.union(v.ring, x.ring)
        out[face] = v.lift(ring).mul(x.lift(ring), budget)
    return out


def fstar_roots(square: SquareData, B: FormalGroupLaw, budget: TruncationBudget,
                ring: GeneratorSet) -> Dict[str, SparsePoly]:
    """``f*(lam_i) = sum^B [p_ij] mu_j``."""
    out = {}
    for i in square.target.components:
        row = square.row(i)
        out[square.target.root(i)] = formal_multiple_sum(
            B, [(p, ring.gen(square.source.root(j))) for j, p in row.items()], budget, ring)
    return out


def fstar(square: SquareData, B: FormalGroupLaw, x: SparsePoly, budget: TruncationBudget) -> SparsePoly:
    """Pull back an ambient class of ``X`` to ``Y``."""
    ring = GeneratorSet.union(square.ring(B), x.ring)
    roots = fstar_roots(square, B, budget, ring)
    return substitute(x.lift(ring), roots, budget, ring=ring)


def pullback_fstar(square: SquareData, B: FormalGroupLaw, x: Mapping[str, SparsePoly],
                   convention: str = STANDARD, budget: Optional[TruncationBudget] = None) -> FaceCollection:
    """``fbar^*(sum_i (d_i)_* x_i) = sum_i sum_J1 (e_J1)_* f*(x_i) F^{p_i.}_J1(mu)``.

    Faces containing a component with ``p_ij = 0`` are omitted.
    """
    budget = budget or TruncationBudget(B.D)
    out: FaceCollection = {}
    for i, xi in x.items():
        row = square.row(i)
        if not any(row.values()):
            continue
        pulled = fstar(square, B, xi, budget)
        parts = splitting_series(B, square.source, convention, budget, mults=row)
        for face, v in parts.items():
            if any(row[j] == 0 for j in face):
                continue
            ring = GeneratorSet.union(pulled.ring, v.ring)
            val = pulled.lift(ring).mul(v.lift(ring), budget)
            out[face] = out[face].lift(ring) + val if face in out else val
    return out


def check_mpeif(square: SquareData, B: FormalGroupLaw, x: Mapping[str, SparsePoly],
                budget: Optional[TruncationBudget] = None, convention: str = STANDARD) -> SparsePoly:
    """``e_* fbar^*(x) - f^* d_*(x)``; zero for every square."""
    budget = budget or TruncationBudget(B.D)
    lhs_parts = pullback_fstar(square, B, x, convention, budget)
    ring = square.ring(B)
    for v in list(lhs_parts.values()) + list(x.values()):
        ring = ring.union(v.ring)
    lhs = truncate(recombine(lhs_parts, square.source, ring), budget)
    dx = ring.zero()
    for i, xi in x.items():
        dx = dx + ring.gen(square.target.root(i)) * xi.lift(ring)
    rhs = fstar(square, B, dx, budget).lift(ring)
    return truncate(lhs - rhs, budget)


def check_mpeif_push(x_faces: FaceCollection, fbar_push: Mapping[FrozenSet[str], SparsePoly],
                     f_push: SparsePoly, model_source: SNCModel, model_target: SNCModel,
                     budget: TruncationBudget) -> SparsePoly:
    """Push-forward direction with push-forwards given as multiplication operators.

    ``fbar_push[face]`` multiplies classes on that face, ``f_push``
    multiplies ambient classes; returns ``d_* fbar_* x - f_* e_* x``.
    """
    vals = list(x_faces.values()) + list(fbar_push.values()) + [f_push]
    ring = GeneratorSet.union(*[v.ring for v in vals],
                              GeneratorSet.of(*dict.fromkeys(model_source.roots + model_target.roots)))
    lhs = ring.zero()
    rhs = ring.zero()
    for face, v in x_faces.items():
        v = v.lift(ring)
        lhs = lhs + model_target.face_root_product(_rename_face(face, model_source, model_target), ring) \
            * fbar_push[face].lift(ring) * v
        rhs = rhs + f_push.lift(ring) * model_source.face_root_product(face, ring) * v
    return truncate(lhs - rhs, budget)


def _rename_face(face, source: SNCModel, target: SNCModel):
    return frozenset(target.components[source.components.index(n)] for n in face)


def check_excess_divisor(F: FormalGroupLaw, normal_roots: Sequence[str], excess_roots: Sequence[str],
                         v: SparsePoly, budget: Optional[TruncationBudget] = None) -> SparsePoly:
    """Excess intersection with Chern roots.

    ``f`` has normal bundle ``N_f' + E`` after pull-back (roots
    ``normal_roots`` then ``excess_roots``); push-forwards multiply by the top
    Chern class.  Returns ``g^* f_*(v) - f'_*(c_d(E) g'^*(v))``.
    """
    budget = budget or TruncationBudget(F.D)
    ring = GeneratorSet.union(F.coefficient_ring, GeneratorSet.of(*normal_roots, *excess_roots), v.ring)
    v = v.lift(ring)
    top_f = SparsePoly.monomial(ring, {r: 1 for r in list(normal_roots) + list(excess_roots)})
    top_fp = SparsePoly.monomial(ring, {r: 1 for r in normal_roots})
    c_d = SparsePoly.monomial(ring, {r: 1 for r in excess_roots})
    lhs = top_f.mul(v, budget)
    rhs = top_fp.mul(c_d.mul(v, budget), budget)
    return truncate(lhs - rhs, budget)


# G-tilde -----------------------------------------------------------------

def gtil(G: Transformation, gamma: Mapping[str, SparsePoly], model: SNCModel,
         budget: TruncationBudget, terms: Optional[Dict] = None) -> SparsePoly:
    """``sum_J1 (d_J1)_* Res_t D^{|J1|-1}G(y_j gamma_j)(y_j = t +_B lam_j) omega / (prod(t +_B lam_j) t)``.

    ``terms``, if given, receives the per-face contributions.
    """
    B = G.target
    out = None
    for J1 in model.faces():
        comps = sorted(J1, key=model.components.index)
        ys = [f"y{n}" for n in comps]
        args = []
        for n, y in zip(comps, ys):
            g = gamma[n]
            ring = g.ring.union(GeneratorSet.of(y))
            args.append(ring.gen(y) * g.lift(ring))
        val = _derivative_value(G, args, budget)
        res = residue_rhs(val, [model.root(n) for n in comps], B, budget, ys)
        ring = res.ring.union(GeneratorSet.of(*model.roots))
        contrib = truncate(model.face_root_product(J1, ring) * res.lift(ring), budget)
        if terms is not None:
            terms[J1] = contrib
        if out is None:
            out = contrib
        else:
            r = GeneratorSet.union(out.ring, contrib.ring)
            out = out.lift(r) + contrib.lift(r)
    return out


# subcentral Chain Rule identity -----------------------------------------

def check_subcentral_identity(G: Transformation, mults: Mapping[str, int], fgamma: SparsePoly,
                              J1: Iterable[str], budget: TruncationBudget,
                              prefix: str = "mu", var: str = "t") -> SparsePoly:
    """LHS - RHS of

    ``sum_{Supp J2 = J1} D^{|J2|-1}G(fgamma * N^A_J | J in J2)
    = sum_{I1 in J1} (-1)^{|J1|-|I1|} G(y fgamma)(y = mu~^B_I1)``

    with ``mu~_j = t + mu_j``, ``mu~_I = sum [m_j] mu~_j`` (formal, per law)
    and ``N_J = sum_{I in J} (-1)^{|J|-|I|} mu~_I``.  ``t`` and the roots are
    series variables.
    """
    A, B = G.source, G.target
    J1 = frozenset(J1)
    comps = sorted(J1)
    if len(comps) > 3:
        raise ValueError("subcentral identity is limited to |J1| <= 3")
    roots = {j: f"{prefix}{j}" for j in comps}
    ring = GeneratorSet.union(A.coefficient_ring, B.coefficient_ring,
                              GeneratorSet.of(var, *roots.values(), "ysub"), fgamma.ring)
    t = ring.gen(var)

    def tilde_sum(law, I):
        parts = []
        for j in I:
            s = formal_sum(law, t, ring.gen(roots[j]), budget).lift(ring)
            parts.append((mults[j], s))
        return formal_multiple_sum(law, parts, budget, ring)

    tilde_A = {I: tilde_sum(A, I) for I in nonempty_subsets(tuple(comps))}
    fg = fgamma.lift(ring)

    def numer(J):
        out = ring.zero()
        for I in nonempty_subsets(tuple(sorted(J))):
            sign = -1 if (len(J) - len(I)) % 2 else 1
            out = out + tilde_A[I] * sign
        return out

    lhs = None
    for J2 in covers(J1):
        args = [fg.mul(numer(J), budget) for J in sorted(J2, key=lambda s: (len(s), sorted(s)))]
        v = _derivative_value(G, args, budget)
        lhs = v if lhs is None else _add(lhs, v)

    y = ring.gen("ysub")
    Gy = eval_transformation(G, fg.mul(y, budget), budget)
    rhs = None
    for I in nonempty_subsets(tuple(comps)):
        sign = -1 if (len(J1) - len(I)) % 2 else 1
        sub = tilde_sum(B, I)
        r = GeneratorSet.union(Gy.ring, sub.ring)
        v = substitute(Gy.lift(r), {"ysub": sub.lift(r)}, budget, ring=r) * sign
        rhs = v if rhs is None else _add(rhs, v)
    return truncate(_add(lhs, -rhs), budget)


def _add(a: SparsePoly, b: SparsePoly) -> SparsePoly:
    r = GeneratorSet.union(a.ring, b.ring)
    return a.lift(r) + b.lift(r)
