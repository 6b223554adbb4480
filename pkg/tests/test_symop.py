import pytest
from hypothesis import given, settings, strategies as st

from cobord_ops.fgl import LaurentSeries, law_by_name, make_additive, make_multiplicative, make_universal
from cobord_ops.projops import check_axioms, check_fgl_compatibility, sample_series
from cobord_ops.ringcore import GeneratorSet, TruncationBudget, truncate
from cobord_ops.symop import (ConfigError, DivisionFailure, SteenrodConfig, coefficient_twist,
                              conjugated_law, corrupt_formal_p, divide_by_formal_p, formal_p,
                              gamma_st, laurent_budget, nonpositive_part, power_op, standard_ring,
                              steenrod_total, symmetric_phi, verify_phi, with_t)
from helpers import ORACLE_F4, P

# Frozen from tests/oracles/sympy_oracle.py.
ORACLE_PHI_B1 = ("t^-2 + 3*b1*t^-1 + 3*b2 - 2*b1^2 + 4*b3*t - 8*b1*b2*t + 4*b1^3*t + 5*b4*t^2"
                 " - 14*b1*b3*t^2 - 6*b2^2*t^2 + 25*b1^2*b2*t^2 - 10*b1^4*t^2")
ORACLE_PHI_B2 = ("2*b1*t^-3 + 4*b2*t^-2 + 2*b1^2*t^-2 + 6*b3*t^-1 - 2*b1^3*t^-1 + 10*b4"
                 " - 8*b1*b3 - 3*b2^2 - 2*b1^2*b2 + 4*b1^4")
ORACLE_PHI_2B1Z1 = {
    -2: "-z1^2",
    -1: "-z1 - 4*b1*z1^2 - 3*b2*z1^3 + 2*b1^2*z1^3 - 4*b3*z1^4 + 8*b1*b2*z1^4 - 4*b1^3*z1^4",
    0: ("-2*b1*z1 - 3*b2*z1^2 + 2*b1^2*z1^2 - 6*b3*z1^3 - 10*b4*z1^4 + 2*b1^3*z1^3"
        " + 8*b1*b3*z1^4 + 3*b2^2*z1^4 + 2*b1^2*b2*z1^4 - 4*b1^4*z1^4"),
}

P2 = SteenrodConfig(2)
P3 = SteenrodConfig(3)


def test_config_validation():
    assert P3.reps == (1, 2) and P3.inverted == 2
    assert SteenrodConfig(3, (1, -1)).sign == -1
    for bad in [(4, ()), (1, ()), (3, (1, 4)), (3, (1,)), (5, (1, 2, 3, 5))]:
        with pytest.raises(ConfigError):
            SteenrodConfig(*bad)


def test_gamma_generic_p2():
    # weight <= 3 terms of x*F(x, t) all come from the degree 4 law
    U = make_universal(4, 4)
    budget = laurent_budget(4, 3)
    g = gamma_st(P2, U, budget)
    ring = g.ring
    F4 = P(ring, ORACLE_F4.replace("y", "t"))
    assert g == truncate(P(ring, "x") * F4, budget)


def test_gamma_additive():
    A = make_additive(4)
    g = gamma_st(P2, A, laurent_budget(4, None))
    assert g == P(g.ring, "x^2 + x*t")
    g3 = gamma_st(P3, A, laurent_budget(4, None))
    assert g3 == P(g3.ring, "x*(x + t)*(x + 2*t)")


def test_steenrod_on_one_variable_additive():
    A = make_additive(4)
    St = steenrod_total(P2, A, laurent_budget(4, None))
    R = GeneratorSet.of("z1")
    out = St(R.gen("z1"), laurent_budget(4, None))
    assert out == P(out.ring, "z1^2 + z1*t")


def test_twist_matches_oracle():
    U = make_universal(6, 6)
    phi = coefficient_twist(P2, U, laurent_budget(6, 4))
    ring = with_t(U.coefficient_ring)
    assert phi["b1"].lift(ring) == P(ring, ORACLE_PHI_B1)
    assert phi["b2"].lift(ring) == P(ring, ORACLE_PHI_B2)


def test_twist_agrees_with_conjugated_law():
    U = make_universal(4, 4)
    budget = laurent_budget(4, 2)
    gamma = gamma_st(P2, U, budget)
    phi = coefficient_twist(P2, U, budget, gamma)
    conj = conjugated_law(U, gamma, budget)
    xy = conj.coefficient({"x": 1, "y": 1})
    ring = GeneratorSet.union(xy.ring, phi["b1"].ring)
    assert xy.lift(ring) == phi["b1"].lift(ring) * 2


def test_power_operation():
    U = make_universal(4, 4)
    R = standard_ring(2)
    G = power_op(2, U)
    assert G(P(R, "z1 + z2")).lift(R) == P(R, "z1^2 + 2*z1*z2 + z2^2")
    assert G(R.zero()).is_zero()


def test_formal_p_values():
    b = laurent_budget(4, 3)
    assert formal_p(make_additive(4), 3, b).constant_term() == 3
    pm = formal_p(make_multiplicative(4), 2, b)
    assert pm == P(pm.ring, "2 - beta*t")
    pu = formal_p(make_universal(4, 4), 2, b)
    assert pu.filter_terms(lambda e: e[pu.ring.index("t")] <= 1) == P(pu.ring, "2 + 2*b1*t")


def _ls(text, ring=None):
    ring = ring or GeneratorSet.of("t").with_inverted("t")
    return LaurentSeries.from_poly(P(ring, text), laurent_budget(4, None))


def test_nonpositive_part():
    assert nonpositive_part(_ls("t^-1 + 1 + t")) == _ls("t^-1 + 1")
    assert nonpositive_part(_ls("t + t^3")).is_zero()
    assert nonpositive_part(_ls("0")).is_zero()


def test_divide_by_constant():
    out = divide_by_formal_p(_ls("4 + 2*t^-1"), P(GeneratorSet.of("t"), "2"), 2)
    assert out == _ls("t^-1 + 2")
    assert divide_by_formal_p(_ls("0"), P(GeneratorSet.of("t"), "2"), 2).is_zero()


def test_division_failure_reports_exponent():
    with pytest.raises(DivisionFailure) as info:
        divide_by_formal_p(_ls("3*t^-1"), P(GeneratorSet.of("t"), "2"), 2)
    assert info.value.exponent == -1


def test_phi_of_zero():
    res = symmetric_phi(P2, standard_ring(1).zero(), 4)
    assert res.ok and res.phi.is_zero() and res.residual_min_exponent is None


@pytest.mark.parametrize("cfg", [P2, P3], ids=["p2", "p3"])
@pytest.mark.parametrize("text", ["z1", "z1^2", "z1*z2"])
def test_phi_divides_standard_inputs(cfg, text):
    R = standard_ring(2)
    res = symmetric_phi(cfg, P(R, text), 4)
    assert res.divisions_exact
    assert res.ok


def test_phi_of_2b1z1_matches_oracle():
    R = standard_ring(1)
    res = symmetric_phi(P2, P(R, "2*b1*z1"), 4)
    assert res.ok and res.K == 2
    assert res.phi.exponents() == [-2, -1, 0]
    for k, text in ORACLE_PHI_2B1Z1.items():
        c = res.phi.coefficient(k)
        assert c == P(c.ring, text)


def test_phi_of_b1z1_at_two_is_not_integral():
    R = standard_ring(1)
    res = symmetric_phi(P2, P(R, "b1*z1"), 4)
    assert not res.divisions_exact
    assert res.failure.exponent == -2


def test_phi_of_b1z1_at_three_uses_half():
    R = standard_ring(1)
    assert symmetric_phi(P3, P(R, "b1*z1"), 4).ok


def test_verify_rows():
    R = standard_ring(2)
    rep = verify_phi(P2, [P(R, "z1"), P(R, "z1^2"), P(R, "z1*z2")], 4)
    assert rep.passed
    assert all(r["unique"] for r in rep.rows)
    assert rep.to_json()["passed"]


def test_verify_detects_corrupted_formal_p():
    R = standard_ring(1)
    alpha = P(R, "2*b1*z1")
    res = symmetric_phi(P2, alpha, 4)
    pf = formal_p(make_universal(6, 6), 2, res.phi.budget)
    rep = verify_phi(P2, [alpha], 4, pf_override=corrupt_formal_p(pf))
    assert not rep.passed
    row = rep.rows[0]
    assert not row["divisions_exact"] or not row["residual_positive"]


@pytest.mark.parametrize("cfg", [P2, P3], ids=["p2", "p3"])
@pytest.mark.parametrize("law", ["additive", "multiplicative", "universal"])
def test_steenrod_axioms(cfg, law):
    F = law_by_name(law, 4)
    budget = laurent_budget(4, 3)
    St = steenrod_total(cfg, F, budget)
    rep = check_axioms(St, budget, sample_series(F, 4, count=6))
    assert rep.passed, rep.to_json()


def test_unnormalized_twist_fails_segre():
    U = make_universal(4, 4)
    budget = laurent_budget(4, 3)
    St = steenrod_total(P2, U, budget, normalize=False)
    rep = check_axioms(St, budget, sample_series(U, 4, count=6))
    assert "a_iii" in rep.failed()


def test_fgl_compatibility_detects_bad_twist():
    U = make_universal(4, 4)
    budget = laurent_budget(4, 3)
    assert check_fgl_compatibility(steenrod_total(P2, U, budget), budget).is_zero()
    phi = coefficient_twist(P2, U, budget)
    phi["b1"] = phi["b1"] + 1
    bad = steenrod_total(P2, U, budget, phi=phi)
    assert not check_fgl_compatibility(bad, budget).is_zero()


@settings(max_examples=10, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3))
def test_phi_divides_integral_inputs_at_three(a, b):
    # Phi(a z1 + b z1^2) needs only exact division for integral inputs at p=3
    R = standard_ring(1)
    alpha = P(R, f"{a}*z1 + {b}*z1^2")
    assert symmetric_phi(P3, alpha, 3).ok
