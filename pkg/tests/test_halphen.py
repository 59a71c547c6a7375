from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from chazylab.core import Parameter, SystemSpec, Triple, pointwise_residual, residual, system_rhs
from chazylab.halphen import (AngleTriple, CombinationRule, WState, admissible_rules,
                              halphen_rhs, infer_parameter, integrate_w, sample_wstates,
                              tau_squared, triple_from_w, triple_jet_from_w, w_taylor)

F = Fraction
HALF, THIRD = F(1, 2), F(1, 3)


@pytest.mark.parametrize("angles, w, expected", [
    ((HALF, HALF, THIRD), (5, 5, 5), 0),
    ((0, 0, 0), (1, 2 + 1j, -3), 0),
    ((HALF, HALF, THIRD), (1, 0, -1), F(-17, 36)),
])
def test_tau_squared(angles, w, expected):
    assert complex(tau_squared(AngleTriple(*angles), np.array(w, dtype=complex))) == \
        pytest.approx(complex(expected), abs=1e-15)


def test_tau_squared_exact_with_fractions():
    w = np.array([F(1), F(0), F(-1)], dtype=object)
    assert tau_squared(AngleTriple(HALF, HALF, THIRD), w) == F(-17, 36)


@pytest.mark.parametrize("angles, w, expected", [
    ((HALF, THIRD, F(2, 7)), (1, 1, 1), (-1, -1, -1)),
    ((HALF, THIRD, F(2, 7)), (0, 0, 0), (0, 0, 0)),
    ((0, 0, 0), (1, 0, -1), (1, -1, 1)),
])
def test_halphen_rhs_examples(angles, w, expected):
    out = halphen_rhs(AngleTriple(*angles), WState(*w))
    assert isinstance(out, WState)
    np.testing.assert_allclose(out.as_array(), expected, atol=1e-15)


def test_halphen_rhs_symbolic():
    w1, w2, w3, a, b, g = sp.symbols("w1 w2 w3 a b g")
    t2 = a**2 * (w1 - w2) * (w3 - w1) + b**2 * (w2 - w3) * (w1 - w2) + g**2 * (w3 - w1) * (w2 - w3)
    rhs = [w2 * w3 - w1 * (w2 + w3) + t2, w3 * w1 - w2 * (w3 + w1) + t2,
           w1 * w2 - w3 * (w1 + w2) + t2]
    vals = {w1: 0.3 + 0.2j, w2: -0.7, w3: 0.1 - 0.9j, a: 0.5, b: 1 / 3, g: 0.25}
    expected = [complex(r.subs(vals)) for r in rhs]
    got = halphen_rhs(AngleTriple(HALF, THIRD, F(1, 4)), [vals[w1], vals[w2], vals[w3]])
    np.testing.assert_allclose(got, expected, rtol=1e-14)


def test_angle_parse_and_validation():
    assert AngleTriple.parse("1/2, 1/3, 1/2") == AngleTriple(HALF, THIRD, HALF)
    with pytest.raises(ValueError):
        AngleTriple.parse("1/2,1/3")
    with pytest.raises(ValueError):
        AngleTriple(-1, 0, 0)


def contains(rules, weights, angles):
    return any(r.weights == weights and r.angles == AngleTriple(*angles) for r in rules)


@pytest.mark.parametrize("k, weights, angles", [
    (2, (1, 2, 3), (HALF, THIRD, HALF)),
    (3, (2, 2, 2), (F(2, 3), F(2, 3), F(2, 3))),
    (2, (1, 1, 4), (HALF, HALF, F(2, 3))),
])
def test_admissible_rules_examples(k, weights, angles):
    assert contains(admissible_rules(k), weights, angles)


def test_rules_are_unique():
    rules = admissible_rules(2)
    keys = {(r.weights, r.angles) for r in rules}
    assert len(keys) == len(rules)


def test_admissible_rules_reject_infinity():
    with pytest.raises(ValueError):
        admissible_rules(None)


def test_infer_parameter():
    rule = infer_parameter((1, 2, 3), AngleTriple(F(1, 4), THIRD, HALF))
    assert rule.parameter == Parameter(4)
    assert infer_parameter((1, 2, 3), AngleTriple(F(1, 5), F(1, 7), F(1, 11))) is None


def test_equal_w_gives_pole_solution():
    rule = CombinationRule((2, 2, 2), AngleTriple(*[F(2, 3)] * 3), Parameter(3))
    t = triple_from_w(rule, WState(1, 1, 1))
    np.testing.assert_allclose(t.as_array()[:2], [-6, 0], atol=1e-13)


@pytest.mark.parametrize("c", [0.5, 1.0, 2 - 1j])
def test_equal_w_weights_123(c):
    rule = next(r for r in admissible_rules(2) if r.weights == (1, 2, 3))
    t = triple_from_w(rule, np.full(3, c, dtype=complex))
    np.testing.assert_allclose(t.as_array(), [-6 * c, 0, 0], atol=1e-13)


def test_zero_w():
    rule = admissible_rules(3)[0]
    assert triple_from_w(rule, WState(0, 0, 0)) == Triple(0, 0, 0)


def test_taylor_matches_numerical_flow(rng):
    angles = AngleTriple(HALF, THIRD, F(1, 4))
    w0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    jet = w_taylor(angles, w0, order=4)
    np.testing.assert_allclose(jet[1], halphen_rhs(angles, w0), rtol=1e-14)
    h = 1e-3
    traj = integrate_w(angles, w0, 0.0, h, tol=1e-13)
    series = sum(jet[m] * h**m for m in range(5))
    np.testing.assert_allclose(traj.ys[-1], series, atol=1e-13)


def test_integrate_closed_form():
    angles = AngleTriple(HALF, THIRD, HALF)
    traj = integrate_w(angles, [1, 1, 1], 0.0, 0.5)
    np.testing.assert_allclose(traj.ys[-1], [2 / 3] * 3, rtol=1e-9)


def test_integrate_zero():
    traj = integrate_w(AngleTriple(HALF, THIRD, HALF), [0, 0, 0], 0.0, 0.5)
    assert np.all(traj.ys == 0)


def test_first_order_taylor():
    angles = AngleTriple(0, 0, 0)
    h = 1e-4
    traj = integrate_w(angles, [1, 0, -1], 0.0, h)
    np.testing.assert_allclose(traj.ys[-1], np.array([1, 0, -1]) + h * np.array([1, -1, 1]),
                               atol=1e-7)


@pytest.mark.parametrize("k", [2, 3, 4, 9, F(3, 2), F(2, 3)])
def test_every_rule_solves_its_system(k):
    rng = np.random.default_rng(7)
    spec = SystemSpec.for_k(k)
    ws = sample_wstates(rng, 5)
    for rule in admissible_rules(k):
        t, dt = triple_jet_from_w(rule, ws)
        assert residual(spec, t, dt) < 1e-10, str(rule)


def test_wrong_parameter_fails():
    rng = np.random.default_rng(3)
    ws = sample_wstates(rng, 5)
    rule = admissible_rules(2)[0]
    t, dt = triple_jet_from_w(rule, ws)
    assert residual(SystemSpec.for_k(3), t, dt) > 1e-3


def test_jet_matches_dense_derivative(rng):
    rule = next(r for r in admissible_rules(3) if r.weights == (1, 1, 4))
    traj = integrate_w(rule.angles, sample_wstates(rng, 1)[0], 0.0, 0.1, tol=1e-12)
    xs = np.linspace(0, 0.1, 21)
    t, dt = triple_jet_from_w(rule, traj.sample(xs))
    spec = SystemSpec.for_k(3)
    assert np.max(pointwise_residual(spec, t, dt)) < 1e-9
    np.testing.assert_allclose(t, np.stack([triple_from_w(rule, w).as_array()
                                            for w in traj.sample(xs)]), rtol=1e-12)


def test_system_rhs_agrees_with_jet(rng):
    rule = admissible_rules(F(3, 2))[0]
    w = sample_wstates(rng, 3)
    t, dt = triple_jet_from_w(rule, w)
    np.testing.assert_allclose(dt, system_rhs(SystemSpec.for_k(F(3, 2)), t), rtol=1e-9, atol=1e-9)


def test_sample_wstates_separation(rng):
    ws = sample_wstates(rng, 50)
    assert ws.shape == (50, 3)
    gaps = np.abs(ws[:, [0, 1, 2]] - ws[:, [1, 2, 0]])
    assert gaps.min() >= 0.05
    assert np.abs(ws).max() <= 1
