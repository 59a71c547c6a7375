from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from chazylab.core import (Parameter, RationalSolutionSpec, SystemSpec, Triple,
                           admissible_residues, chazy_coefficient, rational_derivative,
                           rational_triple, residual, system_rhs)
from chazylab.errors import InadmissibleResidue, InvalidParameter, PoleAtSix, PoleHit

ALL_K = [2, 3, 4, 9, 18, Fraction(3, 2), Fraction(2, 3), None]


@pytest.mark.parametrize("k, expected", [
    (2, Fraction(1, 8)),
    (3, Fraction(1, 3)),
    (9, Fraction(-9, 5)),
    (18, Fraction(-9, 8)),
    (None, -1),
])
def test_chazy_coefficient(k, expected):
    c = chazy_coefficient(Parameter.parse(k))
    assert c == expected
    if k is not None:
        assert isinstance(c, Fraction)


def test_coefficient_large_k_tends_to_minus_one():
    assert abs(float(chazy_coefficient(Parameter(10**6))) + 1) < 1e-10


def test_pole_at_six():
    with pytest.raises(PoleAtSix):
        Parameter(6)
    with pytest.raises(PoleAtSix):
        Parameter.parse("6")
    with pytest.raises(PoleAtSix):
        Parameter.parse("12/2")


@pytest.mark.parametrize("text", ["0", "-1", "abc", "1/0", ""])
def test_bad_parameters(text):
    with pytest.raises(InvalidParameter):
        Parameter.parse(text)


@pytest.mark.parametrize("text, k", [
    ("3/2", Fraction(3, 2)), ("1.5", Fraction(3, 2)), (1.5, Fraction(3, 2)),
    ("2", Fraction(2)), (9, Fraction(9)),
])
def test_parse_exact(text, k):
    assert Parameter.parse(text).k == k


@pytest.mark.parametrize("text", ["inf", "Infinity", "oo", float("inf"), None])
def test_parse_infinite(text):
    p = Parameter.parse(text)
    assert p.is_infinite
    assert p == Parameter.infinite()


def test_parameter_equality_is_exact():
    assert Parameter.parse("0.5") == Parameter(Fraction(1, 2))
    assert Parameter(2) != Parameter.infinite()


def test_system_spec_coefficient_is_real_for_real_k():
    for k in ALL_K:
        c = SystemSpec.for_k(k).c
        assert complex(c).imag == 0


@pytest.mark.parametrize("k, t, expected", [
    (None, (0, 0, 0), (0, 0, 0)),
    (2, (-2, -8, -8), (2, 16, 24)),
    (None, (-6, 0, 0), (6, 0, 0)),
])
def test_system_rhs_examples(k, t, expected):
    out = system_rhs(SystemSpec.for_k(k), Triple(*t))
    assert isinstance(out, Triple)
    np.testing.assert_allclose(out.as_array(), expected, atol=1e-14)


def test_system_rhs_vectorised(rng):
    spec = SystemSpec.for_k(3)
    states = rng.normal(size=(7, 3)) + 1j * rng.normal(size=(7, 3))
    batch = system_rhs(spec, states)
    for s, b in zip(states, batch):
        np.testing.assert_allclose(system_rhs(spec, Triple(*s)).as_array(), b)


@pytest.mark.parametrize("t, dt, expected", [
    ((0, 0, 0), (0, 0, 0), 0.0),
    ((-6, 0, 0), (6, 0, 0), 0.0),
    ((-6, 0, 0), (0, 0, 0), 6 / 7),
])
def test_residual_examples(t, dt, expected):
    spec = SystemSpec.for_k(None)
    assert residual(spec, Triple(*t), Triple(*dt)) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(ALL_K),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.floats(min_value=0.1, max_value=10))
def test_rhs_weighted_homogeneity(k, P, Q, R, s):
    spec = SystemSpec.for_k(k)
    base = system_rhs(spec, np.array([P, Q, R]))
    scaled = system_rhs(spec, np.array([s * P, s**2 * Q, s**3 * R]))
    np.testing.assert_allclose(scaled, base * np.array([s**2, s**3, s**4]),
                               rtol=1e-12, atol=1e-12 * s**4)


@pytest.mark.parametrize("k, residues", [
    (2, [-6, -2, -4]),
    (3, [-6, Fraction(-3, 2), Fraction(-9, 2)]),
    (None, [-6]),
])
def test_admissible_residues(k, residues):
    assert sorted(admissible_residues(k)) == sorted(Fraction(a) for a in residues)


def test_residues_deduplicated():
    for k in ALL_K:
        res = admissible_residues(k)
        assert len(res) == len(set(res))


def test_residues_match_symbolic_plug_in():
    x, a, k = sp.symbols("x a k")
    y = a / x
    eq = (sp.diff(y, x, 3) - 2 * y * sp.diff(y, x, 2) + 3 * sp.diff(y, x) ** 2
          - 4 / (36 - k**2) * (6 * sp.diff(y, x) - y**2) ** 2)
    num = sp.factor(sp.numer(sp.together(eq * x**4)))
    for kv in [2, 3, 4, 9, 18, sp.Rational(3, 2), sp.Rational(2, 3)]:
        sols = set(sp.solve(num.subs(k, kv), a)) - {0}  # a = 0 is y = 0
        assert sols == {sp.Rational(str(r)) for r in admissible_residues(str(kv))}


@pytest.mark.parametrize("k, a, expected", [
    (2, -6, (-6, 0, 0)),
    (9, -6, (-6, 0, 0)),
    (2, -2, (-2, -8, -8)),
    (3, Fraction(-9, 2), (-4.5, -6.75, 10.125)),
])
def test_rational_triple_examples(k, a, expected):
    t = rational_triple(RationalSolutionSpec(Parameter.parse(k), a, 0), 1.0)
    np.testing.assert_allclose(t.as_array(), expected, atol=1e-14)


def test_inadmissible_residue():
    with pytest.raises(InadmissibleResidue):
        RationalSolutionSpec(Parameter(2), -1)


def test_pole_hit():
    rs = RationalSolutionSpec(Parameter(2), -2, 0.3)
    with pytest.raises(PoleHit):
        rational_triple(rs, 0.3 + 1e-10)


@pytest.mark.parametrize("k", ALL_K)
def test_rational_solutions_are_exact(k, rng):
    p = Parameter.parse(k)
    spec = SystemSpec(p)
    for a in admissible_residues(p):
        rs = RationalSolutionSpec(p, a, complex(rng.normal(), rng.normal()))
        xs = rng.uniform(-2, 2, size=20)
        assert residual(spec, rational_triple(rs, xs), rational_derivative(rs, xs)) <= 1e-12


def test_triple_rejects_non_finite():
    with pytest.raises(ValueError):
        Triple(np.nan, 0, 0)
