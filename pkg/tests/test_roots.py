import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from chazylab import _kernels
from chazylab.errors import BranchCollision
from chazylab.roots import (BranchState, PolySpec, evaluate, roots_many, solve_cubic,
                            solve_quartic, track_branch, track_path)

S3 = np.sqrt(3) / 2


def as_set(roots):
    return np.sort_complex(np.round(np.asarray(roots), 12))


@pytest.mark.parametrize("coeffs, expected", [
    ((-6, 11, -6), [1, 2, 3]),
    ((0, 0, 1), [-1, 0.5 + 1j * S3, 0.5 - 1j * S3]),
    ((0, 0, 0), [0, 0, 0]),
])
def test_cubic_examples(coeffs, expected):
    np.testing.assert_allclose(as_set(solve_cubic(PolySpec(coeffs))), as_set(expected),
                               atol=1e-12)


@pytest.mark.parametrize("coeffs, expected", [
    ((0, 0, 0, -1), [1, -1, 1j, -1j]),
    ((0, 0, 0, 0), [0, 0, 0, 0]),
    ((0, -5, 0, 4), [1, -1, 2, -2]),
])
def test_quartic_examples(coeffs, expected):
    np.testing.assert_allclose(as_set(solve_quartic(PolySpec(coeffs))), as_set(expected),
                               atol=1e-12)


def test_solve_sorted_lexicographically():
    r = solve_quartic(PolySpec((0, -5, 0, 4)))
    np.testing.assert_allclose(r, [-2, -1, 1, 2], atol=1e-13)


def test_wrong_degree():
    with pytest.raises(ValueError):
        solve_cubic(PolySpec((0, 0, 0, 1)))
    with pytest.raises(ValueError):
        PolySpec((1,))
    with pytest.raises(ValueError):
        PolySpec((np.inf, 0, 0))


def reconstruct(roots):
    return np.poly(roots)[1:]


def unit_disc(rng, shape):
    r = np.sqrt(rng.uniform(size=shape))
    return r * np.exp(2j * np.pi * rng.uniform(size=shape))


@pytest.mark.parametrize("backend", ["numba", "numpy"])
@pytest.mark.parametrize("degree", [2, 3, 4])
def test_reconstruction_random(backend, degree, rng):
    coeffs = unit_disc(rng, (1000, degree))
    roots = roots_many(coeffs, backend=backend)
    for c, r in zip(coeffs, roots):
        err = np.max(np.abs(reconstruct(r) - c)) / max(1.0, np.max(np.abs(c)))
        assert err <= 1e-11


@pytest.mark.parametrize("degree", [3, 4])
def test_polish_residual(degree, rng):
    coeffs = unit_disc(rng, (500, degree))
    roots = roots_many(coeffs)
    for c, r in zip(coeffs, roots):
        f = evaluate(c, r)
        assert np.max(np.abs(f)) <= 1e-13 * max(1.0, np.linalg.norm(c))


complex_pts = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(complex_pts, min_size=3, max_size=4))
def test_constructed_roots_recovered(true_roots):
    coeffs = np.poly(true_roots)[1:]
    got = roots_many(coeffs)[0]
    # an m-fold root is only determined to about (eps * |c|)^(1/m)
    m = len(true_roots)
    tol = 10 * (2.2e-16 * max(1.0, np.max(np.abs(coeffs)))) ** (1 / m)
    for z in true_roots:
        assert np.min(np.abs(got - z)) <= tol * (1 + abs(z))


@settings(max_examples=200, deadline=None)
@given(st.lists(complex_pts, min_size=3, max_size=4))
def test_separated_roots_reconstruct(true_roots):
    gaps = [abs(a - b) for i, a in enumerate(true_roots) for b in true_roots[i + 1:]]
    assume(min(gaps) >= 0.1)
    coeffs = np.poly(true_roots)[1:]
    got = roots_many(coeffs)[0]
    err = np.max(np.abs(reconstruct(got) - coeffs)) / max(1.0, np.max(np.abs(coeffs)))
    assert err <= 1e-11


def test_backends_agree(rng):
    coeffs = unit_disc(rng, (300, 4)) * 4
    a = np.sort_complex(roots_many(coeffs, backend="numba"))
    b = np.sort_complex(roots_many(coeffs, backend="numpy"))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        roots_many([[0, 0, 1]], backend="fortran")


def cubic_with_roots(*roots):
    return PolySpec(tuple(np.poly(roots)[1:]))


@pytest.mark.parametrize("current, roots, expected", [
    (1 + 0j, (0.9, -1, 1j), 0.9),
    (0j, (0, 0, 0), 0),
    (1j, (1, -1, 1.05j), 1.05j),
])
def test_track_branch_examples(current, roots, expected):
    state = BranchState(0, current, 0.0)
    out = track_branch(state, cubic_with_roots(*roots), 0.1)
    assert abs(out.current_root - expected) < 1e-7
    assert out.last_x == 0.1
    assert out.branch_index == 0


def test_track_branch_collision():
    state = BranchState(1, 1.0, 0.0)
    poly = cubic_with_roots(1, 1, 1)
    with pytest.raises(BranchCollision) as exc:
        track_branch(state, poly, 0.25, max_drift=1e-3)
    assert exc.value.x == 0.25


def test_track_branch_jump():
    state = BranchState(0, 0.0, 0.0)
    with pytest.raises(BranchCollision):
        track_branch(state, cubic_with_roots(1, 2, 3), 0.01, max_drift=1e-3)


def test_track_path_follows_crossing_paths():
    # two roots cross in modulus order but stay apart in the plane
    xs = np.linspace(0, 1, 101)
    r0 = np.exp(1j * np.pi * xs)
    r1 = -np.exp(1j * np.pi * xs)
    roots = np.stack([r1, r0], axis=1)
    rates = np.stack([-1j * np.pi * np.exp(1j * np.pi * xs),
                      1j * np.pi * np.exp(1j * np.pi * xs)], axis=1)
    idx, status, fail = track_path(roots, rates, xs, 1)
    assert status == _kernels.TRACK_OK
    assert np.all(idx == 1)


def test_double_root_reconstruction():
    for true in ([1, 1, 1j], [1, 1, 2], [0.3, 0.3, -1, 2], [1j, 1j, -1, -1]):
        c = np.poly(true)[1:]
        for backend in ("numba", "numpy"):
            got = roots_many(c, backend=backend)[0]
            assert np.max(np.abs(reconstruct(got) - c)) <= 1e-11


def test_track_path_collision_status():
    xs = np.linspace(0, 1, 5)
    roots = np.array([[0, 1], [0, 0.5], [0, 1e-11], [0, 0.5], [0, 1]], dtype=complex)
    rates = np.ones_like(roots) * 10
    idx, status, fail = track_path(roots, rates, xs, 1)
    assert status == _kernels.TRACK_COLLISION
    assert fail == 2


def test_track_path_detects_jump():
    xs = np.linspace(0, 1, 11)
    roots = np.stack([np.zeros(11), np.where(xs < 0.5, 1.0, 0.001)], axis=1).astype(complex)
    rates = np.zeros_like(roots)
    # branch 1 sits at 1 then teleports next to branch 0
    idx, status, fail = track_path(roots, rates, xs, 1)
    assert status != _kernels.TRACK_OK
    assert xs[fail] >= 0.5
