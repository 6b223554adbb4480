from fractions import Fraction

from cobord_ops.ringcore import GeneratorSet, SparsePoly


def P(ring: GeneratorSet, text: str) -> SparsePoly:
    """Build a polynomial over ``ring`` from a Python-style expression."""
    names = {n: ring.gen(n) for n in ring.names}
    names["F"] = Fraction
    return ring.zero() + eval(text.replace("^", "**"), {"__builtins__": {}}, names)


# Frozen from tests/oracles/sympy_oracle.py (universal law through degree 4).
ORACLE_F4 = ("x + y + 2*b1*x*y - 2*b1^2*x^2*y - 2*b1^2*x*y^2 + 3*b2*x^2*y + 3*b2*x*y^2"
             " + 4*b1^3*x^3*y + 2*b1^3*x^2*y^2 + 4*b1^3*x*y^3 - 8*b1*b2*x^3*y - 6*b1*b2*x^2*y^2"
             " - 8*b1*b2*x*y^3 + 4*b3*x^3*y + 6*b3*x^2*y^2 + 4*b3*x*y^3")
