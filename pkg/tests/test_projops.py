import pytest
from hypothesis import given, settings, strategies as st

from cobord_ops.fgl import law_by_name, make_additive, make_multiplicative, make_universal
from cobord_ops.projops import (PolyTransformation, PreconditionError, black_box, check_axioms,
                                check_axioms_poly, continuity_check, derived_poly, diagonal,
                                eval_transformation, external_product, external_to_internal,
                                identity, internal_derivative, internal_to_external, multiplicative,
                                power, pushforward_rhs, sample_series, series_ring, shifted, to_block)
from cobord_ops.ringcore import GeneratorSet, TruncationBudget, substitute
from helpers import P

LAWS = ["additive", "multiplicative", "universal"]


def zring(law, *extra):
    return series_ring(law, 4, extra)


def test_identity_relabels_nothing():
    U = make_universal(4, 4)
    R = zring(U)
    a = P(R, "b1*z1*z2 + 3*z3^2")
    assert identity(U)(a, TruncationBudget(4)) == a


def test_power_two_on_sum():
    A = make_additive(4)
    R = zring(A)
    assert power(A, 2)(P(R, "z1 + z2")) == P(R, "z1^2 + 2*z1*z2 + z2^2")


def test_multiplicative_genus_on_one_variable():
    A = make_additive(4)
    R = zring(A, "t")
    gamma = P(GeneratorSet.of("x", "t"), "x^2 + x*t")
    G = multiplicative(A, A, gamma, extra=GeneratorSet.of("t"))
    assert G(P(R, "z1")).lift(R) == P(R, "z1^2 + z1*t")


@pytest.mark.parametrize("law", LAWS)
@pytest.mark.parametrize("make", [identity, lambda F: power(F, 2), lambda F: power(F, 3)],
                         ids=["identity", "power2", "power3"])
def test_axioms_pass(law, make):
    F = law_by_name(law, 4)
    rep = check_axioms(make(F), TruncationBudget(4), sample_series(F, 4, count=8))
    assert rep.passed, rep.to_json()
    assert rep.checked == 8


def test_broken_gamma_fails_segre():
    A = make_additive(4)
    G = multiplicative(A, A, P(GeneratorSet.of("x"), "x + x^2"), label="broken")
    rep = check_axioms(G, TruncationBudget(4), sample_series(A, 4, count=6))
    assert "a_iii" in rep.failed()
    assert rep.witnesses["a_iii"]


def test_gamma_with_constant_fails_point_axiom():
    A = make_additive(4)
    G = multiplicative(A, A, P(GeneratorSet.of("x"), "x + 1"), label="const")
    rep = check_axioms(G, TruncationBudget(4), sample_series(A, 4, count=6))
    assert "a_ii" in rep.failed()


def test_wrong_target_law_fails():
    # power maps are compatible with F only when source and target agree
    G = power(make_multiplicative(4), 2)
    G = type(G)(G.source, make_additive(4), G.repr, "mismatch")
    rep = check_axioms(G, TruncationBudget(4), sample_series(make_multiplicative(4), 4, count=6))
    assert not rep.passed


def test_external_product_of_identities():
    A = make_additive(4)
    H = external_product(identity(A), identity(A))
    samples = [(P(zring(A), "z1"), P(zring(A), "z1*z2")), (P(zring(A), "z1 + z2^2"), P(zring(A), "z3"))]
    assert check_axioms_poly(H, TruncationBudget(4), samples).passed


def test_derived_square_is_valid_bioperation():
    U = make_universal(4, 4)
    H = derived_poly(power(U, 2), 1)
    R = zring(U)
    samples = [(P(R, "z1"), P(R, "z2")), (P(R, "b1*z1"), P(R, "z1 + z2"))]
    assert check_axioms_poly(H, TruncationBudget(4), samples).passed


def test_block_mixing_is_rejected():
    A = make_additive(4)

    def fn(blocks, budget):
        a, b = blocks
        moved = a.rename({"z1_1": "z1_2"}) if "z1_1" in a.ring else a
        ring = moved.ring.union(b.ring)
        return moved.lift(ring) * b.lift(ring)

    H = PolyTransformation(2, (A, A), A, fn, "mixer")
    R = zring(A)
    rep = check_axioms_poly(H, TruncationBudget(4), [(P(R, "z1"), P(R, "z3"))])
    assert not rep.passed
    assert rep.witnesses


def test_internal_external_unary_is_identity():
    A = make_additive(4)
    R = zring(A)
    a = P(R, "z1 + 2*z2*z3")
    H = external_product(identity(A))
    assert external_to_internal(H)([a]) == a


def test_multiplication_bioperation():
    A = make_additive(4)
    R = zring(A)
    Hh = external_to_internal(external_product(identity(A), identity(A)))
    a, b = P(R, "z1 + z2"), P(R, "z1 - z3")
    assert Hh([a, b]).lift(R) == a * b


def test_round_trip_derived_square():
    U = make_universal(4, 4)
    R = zring(U)
    H = derived_poly(power(U, 2), 1)
    back = internal_to_external(external_to_internal(H))
    a, b = P(R, "z1 + b1*z2"), P(R, "z2*z3")
    assert back([a, b]) == H([a, b])


def test_additive_black_box_has_zero_derivative():
    A = make_additive(4)
    G = black_box(A, A, lambda a, budget: a * 5, "five")
    R = zring(A)
    assert derived_poly(G, 1)([P(R, "z1"), P(R, "z2 + z1^2")]).is_zero()


def test_derivative_of_square_across_blocks():
    A = make_additive(4)
    R = zring(A)
    out = derived_poly(power(A, 2), 1)([P(R, "z1"), P(R, "z1")])
    assert out == P(out.ring, "2*z1_1*z1_2")


def test_second_derivative_of_cube():
    A = make_additive(4)
    R = zring(A)
    out = derived_poly(power(A, 3), 2)([P(R, "z1"), P(R, "z1"), P(R, "z1")])
    assert out == P(out.ring, "6*z1_1*z1_2*z1_3")
    inner = internal_derivative(power(A, 3), 2)([P(R, "z1"), P(R, "z2"), P(R, "z3")])
    assert inner.lift(R) == P(R, "6*z1*z2*z3")


def test_diagonal_and_blocks():
    R = GeneratorSet.of("z1", "z2")
    a = P(R, "z1*z2^2")
    assert diagonal(to_block(a, 3)) == a


def test_continuity_identity():
    U = make_universal(4, 4)
    assert continuity_check(identity(U), {"z1": 1, "z2": 1}, TruncationBudget(4), samples=100)


@pytest.mark.parametrize("p", [2, 3])
def test_continuity_power(p):
    U = make_universal(6, 6)
    assert continuity_check(power(U, p), {"z1": 1}, TruncationBudget(6), samples=100)


def test_continuity_rejects_shift():
    A = make_additive(4)
    G = shifted(identity(A), 1)
    with pytest.raises(PreconditionError):
        continuity_check(G, {"z1": 1}, TruncationBudget(4))


def test_shift_is_invisible_to_the_axioms():
    # every axiom is an equation of pull-backs, which a constant survives
    A = make_additive(4)
    rep = check_axioms(shifted(identity(A), 1), TruncationBudget(4), sample_series(A, 4, count=5))
    assert rep.passed


def test_continuity_detects_ideal_escape():
    A = make_additive(4)
    def leak(a, budget):
        return substitute(a, {"z1": a.ring.gen("z1") + a.ring.gen("z2")}, budget)

    G = black_box(A, A, leak, "leak")
    assert not continuity_check(G, {"z1": 1}, TruncationBudget(4), samples=20)


@pytest.mark.parametrize("law", LAWS)
def test_pushforward_identity_recovers_input(law):
    B = law_by_name(law, 5)
    R = B.coefficient_ring.union(GeneratorSet.of("z1", "z2"))
    alpha = P(R, "z1*z2 + 2*z1")
    out = pushforward_rhs(identity(B), alpha, ["mu1"], TruncationBudget(5))
    assert out.lift(out.ring.union(R)) == alpha.lift(out.ring.union(R))


def test_pushforward_two_roots_additive():
    A = make_additive(4)
    out = pushforward_rhs(identity(A), GeneratorSet.of("z1").one(), ["mu1", "mu2"], TruncationBudget(4))
    assert out == out.ring.one()


def test_pushforward_power_two_additive():
    A = make_additive(4)
    out = pushforward_rhs(power(A, 2), GeneratorSet.of("z1").one(), ["mu"], TruncationBudget(4))
    assert out == P(out.ring, "mu")


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(-3, 3), st.integers(-3, 3))
def test_power_is_multiplicative_on_monomials(p, c1, c2):
    U = make_universal(4, 4)
    R = zring(U)
    a = P(R, f"{c1}*z1 + {c2}*b1*z2^2")
    b = P(R, f"{c2}*z3 + z1*z2")
    G = power(U, p)
    budget = TruncationBudget(4)
    assert eval_transformation(G, a * b, budget) == eval_transformation(G, a, budget).mul(
        eval_transformation(G, b, budget), budget)
