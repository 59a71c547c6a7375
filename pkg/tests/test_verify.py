import json
from fractions import Fraction

import numpy as np
import pytest

from chazylab import _kernels
from chazylab.core import Parameter, RationalSolutionSpec, SystemSpec, rational_trajectory
from chazylab.odeint import integrate
from chazylab.transforms import get
from chazylab.verify import (AuditReport, ResidualReport, aux_closure_check, audit,
                             commutation_check, inverse_pair_identity, exceptional_report,
                             fd_derivative, root_conservation, sample_source_ics,
                             transform_residual, verify_samples, verify_trajectory)


def rational(k, a, c=-1.0, x0=0.0, x1=0.5):
    return rational_trajectory(RationalSolutionSpec(Parameter.parse(k), a, c), x0, x1)


def flow(k, ic, x0=-0.125, x1=0.125, tol=1e-10):
    return integrate(_kernels.chazy_rhs, ic, x0, x1, tol,
                     params=SystemSpec.for_k(k).kernel_params)


def test_rational_trajectory_passes():
    rep = verify_trajectory(SystemSpec.for_k(2), flow(2, [-2, -8, -8], 0.0, 0.5))
    assert rep.passed
    assert rep.max_residual <= 1e-7
    assert rep.samples_checked == 200


def test_zero_trajectory():
    rep = verify_trajectory(SystemSpec.for_k(9), flow(9, [0, 0, 0]))
    assert rep.passed
    assert rep.max_residual == 0


def test_wrong_parameter_fails():
    traj = flow(2, [-2, -8, -8], 0.0, 0.5)
    rep = verify_trajectory(SystemSpec.for_k(3), traj)
    assert rep.status == "fail"
    # lower bound from the coefficient gap at the sample of largest residual
    assert rep.max_residual > 1e-2
    assert traj.x0 <= rep.argmax_x <= traj.x_end


def test_singular_trajectory_is_degenerate():
    traj = flow(None, [60, 0, 0], 0.0, 0.5)
    rep = verify_trajectory(SystemSpec.for_k(None), traj)
    assert rep.degenerate
    assert "singular" in rep.reason
    assert not rep.passed


def test_report_to_dict_round_trip():
    rep = verify_trajectory(SystemSpec.for_k(2), flow(2, [-2, -8, -8], 0.0, 0.5))
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["status"] == "pass"
    assert d["samples_checked"] == 200


def test_from_residuals():
    rep = ResidualReport.from_residuals(np.array([0.0, 1.0, 2.0]), np.array([0.1, 3.0, 0.2]),
                                        1.0)
    assert rep.status == "fail"
    assert rep.argmax_x == 1.0
    assert rep.max_residual == 3.0


def test_transform_residual_t9_rational():
    src = rational(3, Fraction(-9, 2))
    rep = transform_residual("T9", "statement", 0, src)
    assert rep.passed
    assert rep.max_residual < 1e-12


@pytest.mark.parametrize("variant, image, verdict", [
    ("proof", (0, 0, 0), "pass"),
    ("statement", (-4, 0, 0), "fail"),
])
def test_t3_rational_discrepancy(variant, image, verdict):
    from chazylab.transforms import apply
    src = rational(2, -2)
    got = apply("T3", variant, src.sample(0.0)).as_array()
    np.testing.assert_allclose(got, image, atol=1e-10)
    assert transform_residual("T3", variant, 0, src).status == verdict


@pytest.mark.parametrize("method", ["analytic", "fd"])
def test_transform_residual_methods(method):
    rng = np.random.default_rng(4)
    src = flow(3, sample_source_ics(rng, 1)[0])
    rep = transform_residual("T13", "statement", 1, src, method=method)
    assert rep.passed


def test_fd_and_analytic_derivatives_agree():
    from chazylab.transforms import AppliedTransform
    rng = np.random.default_rng(9)
    src = flow(9, sample_source_ics(rng, 1)[0])
    image = AppliedTransform("T17", "proof", 2, src)
    xs = image.xs
    exact = image.derivative(xs)
    approx = fd_derivative(image, xs)
    rel = np.abs(exact - approx) / np.maximum(1.0, np.abs(exact))
    assert rel.max() < 1e-4


def test_unknown_method():
    src = rational(3, Fraction(-9, 2))
    with pytest.raises(ValueError):
        transform_residual("T9", "statement", 0, src, method="spline")


def test_commutation_t9():
    rep = commutation_check("T9", "statement", 0, [-4.5, -6.75, 10.125], 0.0, 0.25)
    assert rep.passed
    assert rep.max_residual <= 1e-6


def test_commutation_identity_case():
    rep = commutation_check("T1", "statement", 1, [0.7, 0, 0], 0.0, 0.25)
    # Q = R = 0 makes every root 0 (a triple root)
    assert rep.degenerate


def test_commutation_degenerate_on_zero_denominator():
    rep = commutation_check("T9", "statement", 0, [0.5, 0, 0], 0.0, 0.25)
    assert rep.degenerate


@pytest.mark.parametrize("eid, branch", [("T13", 0), ("T6", 3), ("T13", 2)])
def test_commutation_random(eid, branch):
    rng = np.random.default_rng(21)
    ic = sample_source_ics(rng, 1)[0]
    rep = commutation_check(eid, "statement", branch, ic, 0.0, 0.25)
    assert rep.passed, rep.reason


@pytest.mark.parametrize("eid", ["T1", "T4", "T8", "T17"])
def test_root_conservation(eid):
    rng = np.random.default_rng(3)
    ic = sample_source_ics(rng, 1)[0]
    assert root_conservation(eid, 0, ic, -0.125, 0.125) < 1e-9


def test_root_conservation_needs_polynomial():
    with pytest.raises(ValueError):
        root_conservation("T9", 0, [1, 1, 1], 0, 0.1)


@pytest.mark.parametrize("eid", ["T4", "T10", "T15", "T17"])
def test_aux_closure(eid):
    rng = np.random.default_rng(6)
    e = get(eid)
    src = flow(e.source.k, sample_source_ics(rng, 1)[0])
    assert aux_closure_check(e, 1, src) < 1e-10


def test_inverse_pair_identity():
    rng = np.random.default_rng(8)
    src = flow(Fraction(2, 3), sample_source_ics(rng, 1)[0])
    assert inverse_pair_identity(src) < 1e-10


def test_sample_source_ics():
    rng = np.random.default_rng(0)
    ics = sample_source_ics(rng, 500)
    assert ics.shape == (500, 3)
    assert np.abs(ics).max() <= 1
    assert np.abs(ics[:, 1:]).min() >= 0.1


def test_audit_t9():
    rep = audit("T9", trials=100, seed=42)
    v = rep.variant("statement")
    assert v.verdict == "pass"
    assert v.worst_residual <= 1e-8
    assert rep.passing == ["statement"]


@pytest.mark.parametrize("eid, good", [("T3", "proof"), ("T18", "proof"), ("T19", "proof")])
def test_audit_discriminates(eid, good):
    rep = audit(eid, trials=30, seed=42)
    assert rep.passing == [good]


def test_audit_is_deterministic():
    a = audit("T13", trials=5, seed=7).to_dict()
    b = audit("T13", trials=5, seed=7).to_dict()
    assert a == b


def test_audit_json_round_trip():
    rep = audit("T5", trials=5, seed=1)
    again = AuditReport.from_dict(json.loads(rep.to_json()))
    assert again.to_dict() == rep.to_dict()


def test_audit_rejects_zero_trials():
    with pytest.raises(ValueError):
        audit("T9", trials=0)


def test_exceptional_report_separate():
    rows = exceptional_report("T5")
    assert {r["residue"] for r in rows} == {"-6", "-2", "-4"}
    assert all(r["status"] in ("pass", "fail", "degenerate") for r in rows)
    # the a = -2 solution makes the quadratic's roots coincide
    assert any(r["residue"] == "-2" and r["status"] == "degenerate" for r in rows)


def test_verify_samples():
    traj = flow(2, [-2, -8, -8], 0.0, 0.5)
    xs = np.linspace(0, 0.5, 11)
    assert verify_samples(SystemSpec.for_k(2), xs, traj.sample(xs)).passed
    assert not verify_samples(SystemSpec.for_k(3), xs, traj.sample(xs)).passed


def test_verify_samples_validation():
    with pytest.raises(ValueError):
        verify_samples(SystemSpec.for_k(2), [0.0], [[1, 1, 1]])
    with pytest.raises(ValueError):
        verify_samples(SystemSpec.for_k(2), [0.0, 0.0], [[1, 1, 1]] * 2)
