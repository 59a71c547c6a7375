"""Closed-form complex polynomial roots and branch tracking.

Quadratics, cubics (Cardano) and quartics (Ferrari) are solved in closed
form and then Newton-polished against the original polynomial. Polynomials
are monic; a :class:`PolySpec` stores only the non-leading coefficients,
highest degree first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._accel import NUMBA_ENABLED
from .errors import BranchCollision

POLISH_TOL = 1e-13


@dataclass(frozen=True)
class PolySpec:
    """Monic polynomial ``x^n + c[0] x^(n-1) + ... + c[n-1]``."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if len(coeffs) not in (2, 3, 4):
            raise ValueError(f"degree must be 2, 3 or 4, got {len(coeffs)}")
        if not all(np.isfinite(c.real) and np.isfinite(c.imag) for c in coeffs):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coefficients)

    def __call__(self, x):
        return evaluate(self.coefficients, x)

    def derivative_at(self, x):
        return evaluate_derivative(self.coefficients, x)

    def roots(self) -> np.ndarray:
        return solve(self)


def evaluate(coefficients, x):
    """Horner evaluation of a monic polynomial; broadcasts over arrays."""
    f = np.ones_like(np.asarray(x, dtype=complex))
    for c in coefficients:
        f = f * x + c
    return f


def evaluate_derivative(coefficients, x):
    n = len(coefficients)
    df = n * np.asarray(x, dtype=complex) ** (n - 1)
    for j, c in enumerate(coefficients[:-1]):
        power = n - 1 - j
        df = df + power * c * np.asarray(x, dtype=complex) ** (power - 1)
    return df


def _lexsort(roots: np.ndarray) -> np.ndarray:
    order = np.lexsort((roots.imag, roots.real), axis=-1)
    return np.take_along_axis(roots, order, axis=-1)


def solve(p: PolySpec) -> np.ndarray:
    """All roots of ``p`` with multiplicity, sorted by (real, imag)."""
    out = _kernels.roots_batch(np.array([p.coefficients], dtype=np.complex128))
    return _lexsort(out[0])


def solve_quadratic(p: PolySpec) -> np.ndarray:
    if p.degree != 2:
        raise ValueError("solve_quadratic needs a degree-2 PolySpec")
    return solve(p)


def solve_cubic(p: PolySpec) -> np.ndarray:
    if p.degree != 3:
        raise ValueError("solve_cubic needs a degree-3 PolySpec")
    return solve(p)


def solve_quartic(p: PolySpec) -> np.ndarray:
    if p.degree != 4:
        raise ValueError("solve_quartic needs a degree-4 PolySpec")
    return solve(p)


# ---------------------------------------------------------------------------
# batched solvers
# ---------------------------------------------------------------------------

_OMEGA = complex(-0.5, np.sqrt(3.0) / 2.0)


def _np_quadratic(b, c):
    disc = np.sqrt(b * b - 4.0 * c)
    s1, s2 = b + disc, b - disc
    s = np.where(np.abs(s1) >= np.abs(s2), s1, s2)
    zero = s == 0
    q = -0.5 * np.where(zero, 1.0, s)
    return np.where(zero, 0j, q), np.where(zero, 0j, c / q)


def _np_cbrt(z):
    safe = np.where(z == 0, 1.0, z)
    return np.where(z == 0, 0j, np.exp(np.log(safe) / 3.0))


def _np_polish(coeffs, x):
    n = x.shape[-1]
    gaps = np.abs(x[..., :, None] - x[..., None, :]) + np.where(np.eye(n, dtype=bool), np.inf, 0)
    isolated = gaps.min(axis=-1) > _kernels.CLUSTER_SEP * (1.0 + np.abs(x))
    for _ in range(3):
        f = evaluate(coeffs, x)
        df = evaluate_derivative(coeffs, x)
        ok = (f != 0) & (df != 0)
        step = np.where(ok, f / np.where(ok, df, 1.0), 0.0)
        xn = x - step
        better = np.abs(evaluate(coeffs, xn)) < np.abs(f)
        x = np.where(ok & better & isolated, xn, x)
    return x


def _np_cubic_depressed(p, q):
    disc = np.sqrt(q * q / 4.0 + p * p * p / 27.0)
    s1, s2 = -0.5 * q + disc, -0.5 * q - disc
    s = np.where(np.abs(s1) >= np.abs(s2), s1, s2)
    u = _np_cbrt(s)
    zero = u == 0
    v = np.where(zero, 0j, -p / (3.0 * np.where(zero, 1.0, u)))
    w, w2 = _OMEGA, np.conj(_OMEGA)
    return np.stack([u + v, w * u + w2 * v, w2 * u + w * v], axis=-1)


def _np_roots(coeffs: np.ndarray) -> np.ndarray:
    cols = [coeffs[:, j] for j in range(coeffs.shape[1])]
    deg = len(cols)
    if deg == 2:
        r0, r1 = _np_quadratic(*cols)
        raw = np.stack([r0, r1], axis=-1)
    elif deg == 3:
        a, b, c = cols
        raw = _np_cubic_depressed(b - a * a / 3.0,
                                  2.0 * a ** 3 / 27.0 - a * b / 3.0 + c)
        raw = raw - (a / 3.0)[:, None]
    else:
        a, b, c, d = cols
        p = b - 3.0 * a * a / 8.0
        q = c - a * b / 2.0 + a ** 3 / 8.0
        r = d - a * c / 4.0 + a * a * b / 16.0 - 3.0 * a ** 4 / 256.0
        res_a, res_b, res_c = p, p * p / 4.0 - r, -q * q / 8.0
        ms = _np_cubic_depressed(res_b - res_a * res_a / 3.0,
                                 2.0 * res_a ** 3 / 27.0 - res_a * res_b / 3.0
                                 + res_c) - (res_a / 3.0)[:, None]
        ms = _np_polish([res_a[:, None], res_b[:, None], res_c[:, None]], ms)
        m = np.take_along_axis(ms, np.argmax(np.abs(ms), axis=1)[:, None], 1)[:, 0]
        scale = np.maximum.reduce([np.abs(p), np.sqrt(np.abs(r)),
                                   np.abs(q) ** (2.0 / 3.0),
                                   np.full(p.shape, 1e-300)])
        biquad = np.abs(m) <= 1e-14 * scale
        s = np.sqrt(2.0 * np.where(biquad, 1.0, m))
        g = q / (2.0 * s)
        t0, t1 = _np_quadratic(-s, p / 2.0 + m + g)
        t2, t3 = _np_quadratic(s, p / 2.0 + m - g)
        z0, z1 = _np_quadratic(p, r)
        s0, s1 = np.sqrt(z0), np.sqrt(z1)
        ferrari = np.stack([t0, t1, t2, t3], axis=-1)
        biq = np.stack([s0, -s0, s1, -s1], axis=-1)
        raw = np.where(biquad[:, None], biq, ferrari) - (a / 4.0)[:, None]
    return _np_polish([c[:, None] for c in cols], raw)


def roots_many(coeffs, *, backend: str | None = None) -> np.ndarray:
    """Roots of many monic polynomials at once.

    Parameters
    ----------
    coeffs : array_like, shape (N, degree)
        Non-leading coefficients, highest degree first.
    backend : {"numba", "numpy"}, optional
        Force a code path. By default the compiled kernel is used when
        numba acceleration is on and the vectorised numpy path otherwise.

    Returns
    -------
    ndarray, shape (N, degree)
        Roots in solver order (not sorted).
    """
    coeffs = np.ascontiguousarray(np.atleast_2d(coeffs), dtype=np.complex128)
    if backend is None:
        backend = "numba" if NUMBA_ENABLED else "numpy"
    if backend == "numba":
        return _kernels.roots_batch(coeffs)
    if backend == "numpy":
        return _np_roots(coeffs)
    raise ValueError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# tracking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchState:
    branch_index: int
    current_root: complex
    last_x: float


def track_branch(state: BranchState, new_poly: PolySpec, new_x: float,
                 max_drift: float | None = None) -> BranchState:
    """Advance a tracked root to ``new_x``.

    Picks the root of ``new_poly`` nearest to ``state.current_root``. When
    ``max_drift`` (the predicted movement, step times derivative bound) is
    given, an ambiguous choice or a jump beyond ten times that bound raises
    :class:`BranchCollision`.
    """
    candidates = solve(new_poly)
    cur = complex(state.current_root)
    j1, j2 = _kernels.nearest_two(cur, candidates)
    chosen = candidates[j1]
    if max_drift is not None:
        allowed = _kernels.DRIFT_FACTOR * max_drift + 1e-10 * (1.0 + abs(cur))
        if j2 >= 0:
            gap = abs(chosen - candidates[j2])
            if gap < _kernels.COLLISION_GAP and abs(candidates[j2] - cur) <= allowed:
                raise BranchCollision(
                    f"roots {chosen:.6g} and {candidates[j2]:.6g} collide", x=new_x)
        if abs(chosen - cur) > allowed:
            raise BranchCollision(
                f"root jumped by {abs(chosen - cur):.3g} (allowed {allowed:.3g})",
                x=new_x)
    return BranchState(state.branch_index, complex(chosen), float(new_x))


def track_path(roots: np.ndarray, droots: np.ndarray, xs: np.ndarray,
               start: int, check: bool = True):
    """Run the tracker over precomputed root arrays.

    Returns ``(indices, status, failed_step)`` exactly as the kernel does;
    status codes are ``_kernels.TRACK_*``.
    """
    return _kernels.track_nearest(
        np.ascontiguousarray(roots, dtype=np.complex128),
        np.ascontiguousarray(droots, dtype=np.complex128),
        np.ascontiguousarray(xs, dtype=np.float64), int(start), bool(check))
