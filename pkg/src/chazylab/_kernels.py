"""Inner loops: system right-hand sides, the DOPRI5 stepper, scalar root
solvers and the nearest-root tracker.

Everything here is written in the subset of Python that numba compiles.
With acceleration disabled (see :mod:`chazylab._accel`) the functions run
unchanged as ordinary Python.
"""

import cmath
import math

import numpy as np

from ._accel import njit, python_version

# ---------------------------------------------------------------------------
# right-hand sides, signature rhs(y, params) -> dy
# ---------------------------------------------------------------------------


@njit
def chazy_rhs(y, params):
    # params[0] is the quadratic coefficient c of dR/dx
    P = y[0]
    Q = y[1]
    R = y[2]
    out = np.empty(3, dtype=np.complex128)
    out[0] = (P * P - Q) / 6.0
    out[1] = (2.0 / 3.0) * (P * Q - R)
    out[2] = P * R + params[0] * Q * Q
    return out


@njit
def halphen_rhs(y, params):
    # params = (alpha^2, beta^2, gamma^2)
    w1 = y[0]
    w2 = y[1]
    w3 = y[2]
    tau2 = (params[0] * (w1 - w2) * (w3 - w1)
            + params[1] * (w2 - w3) * (w1 - w2)
            + params[2] * (w3 - w1) * (w2 - w3))
    out = np.empty(3, dtype=np.complex128)
    out[0] = w2 * w3 - w1 * (w2 + w3) + tau2
    out[1] = w3 * w1 - w2 * (w3 + w1) + tau2
    out[2] = w1 * w2 - w3 * (w1 + w2) + tau2
    return out


SYSTEM_CHAZY = 0
SYSTEM_HALPHEN = 1


@njit
def _eval(system, y, params):
    if system == SYSTEM_CHAZY:
        return chazy_rhs(y, params)
    return halphen_rhs(y, params)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)
# ---------------------------------------------------------------------------

STATUS_COMPLETED = 0
STATUS_SINGULAR = 1
STATUS_UNDERFLOW = 2
STATUS_NONFINITE = 3
STATUS_MAXSTEPS = 4

BLOWUP = 1e8
MIN_STEP = 1e-13

_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_A71, _A73, _A74, _A75, _A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                                -2187.0 / 6784.0, 11.0 / 84.0)
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0,
                                71.0 / 1920.0, -17253.0 / 339200.0,
                                22.0 / 525.0, -1.0 / 40.0)
_D1, _D3, _D4, _D5, _D6, _D7 = (-12715105075.0 / 11282082432.0,
                                87487479700.0 / 32700410799.0,
                                -10690763975.0 / 1880347072.0,
                                701980252875.0 / 199316789632.0,
                                -1453857185.0 / 822651844.0,
                                69997945.0 / 29380423.0)


@njit
def _scaled_max(v, ya, yb, tol):
    m = 0.0
    for i in range(v.shape[0]):
        sk = tol * max(1.0, abs(ya[i]), abs(yb[i]))
        e = abs(v[i]) / sk
        if not (e <= m):
            m = e
    return m


@njit
def _all_finite(v):
    for i in range(v.shape[0]):
        if not (math.isfinite(v[i].real) and math.isfinite(v[i].imag)):
            return False
    return True


@njit
def _initial_guess(y0, f0, tol, hmax):
    d = y0.shape[0]
    dnf = 0.0
    dny = 0.0
    for i in range(d):
        sk = tol * max(1.0, abs(y0[i]))
        dnf = max(dnf, abs(f0[i]) / sk)
        dny = max(dny, abs(y0[i]) / sk)
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1e-6
    else:
        h = 0.01 * dny / dnf
    return min(h, hmax), dnf


@njit
def _initial_refine(y0, f0, f1, h, dnf, tol, hmax):
    der2 = 0.0
    for i in range(y0.shape[0]):
        sk = tol * max(1.0, abs(y0[i]))
        der2 = max(der2, abs(f1[i] - f0[i]) / sk)
    der2 = der2 / h
    der12 = max(der2, math.sqrt(dnf))
    if der12 <= 1e-15 or not math.isfinite(der12):
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    return min(100.0 * h, h1, hmax)


@njit
def dopri5(system, params, y0, x0, x1, tol, max_steps):
    """Integrate ``y' = f(y, params)`` from ``x0`` to ``x1 > x0``.

    ``system`` selects ``f`` (``SYSTEM_CHAZY`` or ``SYSTEM_HALPHEN``); the
    pure-Python build from :func:`python_stepper` accepts any callable.

    Returns ``(xs, ys, rcont, status)`` where ``rcont[i]`` holds the five
    dense-output vectors of step ``i`` (Hairer's continuous extension).
    """
    d = y0.shape[0]
    cap = 64
    xs = np.empty(cap, dtype=np.float64)
    ys = np.empty((cap, d), dtype=np.complex128)
    rc = np.empty((cap, 5, d), dtype=np.complex128)
    xs[0] = x0
    ys[0, :] = y0
    n = 0

    safe = 0.9
    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    facc1 = 1.0 / 0.2
    facc2 = 1.0 / 10.0
    facold = 1e-4
    hmax = x1 - x0

    y = y0.copy()
    x = x0
    k1 = _eval(system, y, params)
    if not _all_finite(k1):
        return xs[:1], ys[:1], rc[:0], STATUS_NONFINITE
    h, dnf = _initial_guess(y, k1, tol, hmax)
    h = _initial_refine(y, k1, _eval(system, y + h * k1, params), h, dnf, tol, hmax)
    reject = False
    status = STATUS_COMPLETED
    nsteps = 0

    while True:
        if nsteps >= max_steps:
            status = STATUS_MAXSTEPS
            break
        if x + 1.01 * h >= x1:
            h = x1 - x
            last = True
        else:
            last = False
        if h < MIN_STEP:
            status = STATUS_UNDERFLOW
            break
        nsteps += 1

        k2 = _eval(system, y + h * (_A21 * k1), params)
        k3 = _eval(system, y + h * (_A31 * k1 + _A32 * k2), params)
        k4 = _eval(system, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3), params)
        k5 = _eval(system, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4),
                 params)
        k6 = _eval(system, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4
                          + _A65 * k5), params)
        ynew = y + h * (_A71 * k1 + _A73 * k3 + _A74 * k4 + _A75 * k5
                        + _A76 * k6)
        k7 = _eval(system, ynew, params)
        errv = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6
                    + _E7 * k7)
        err = _scaled_max(errv, y, ynew, tol)

        if not (math.isfinite(err) and _all_finite(ynew) and _all_finite(k7)):
            # overflow inside a trial step: shrink and retry
            h = 0.2 * h
            reject = True
            continue

        fac11 = err ** expo1
        fac = fac11 / facold ** beta
        fac = max(facc2, min(facc1, fac / safe))
        hnew = h / fac

        if err <= 1.0:
            facold = max(err, 1e-4)
            if n + 1 >= cap:
                cap *= 2
                xs2 = np.empty(cap, dtype=np.float64)
                ys2 = np.empty((cap, d), dtype=np.complex128)
                rc2 = np.empty((cap, 5, d), dtype=np.complex128)
                xs2[:n + 1] = xs[:n + 1]
                ys2[:n + 1] = ys[:n + 1]
                rc2[:n] = rc[:n]
                xs, ys, rc = xs2, ys2, rc2
            ydiff = ynew - y
            bspl = h * k1 - ydiff
            rc[n, 0, :] = y
            rc[n, 1, :] = ydiff
            rc[n, 2, :] = bspl
            rc[n, 3, :] = ydiff - h * k7 - bspl
            rc[n, 4, :] = h * (_D1 * k1 + _D3 * k3 + _D4 * k4 + _D5 * k5
                               + _D6 * k6 + _D7 * k7)
            x = x1 if last else x + h
            n += 1
            xs[n] = x
            ys[n, :] = ynew
            y = ynew
            k1 = k7
            big = 0.0
            for i in range(d):
                big = max(big, abs(y[i]))
            if big > BLOWUP:
                status = STATUS_SINGULAR
                break
            if last:
                break
            if reject:
                hnew = min(hnew, h)
            reject = False
            h = min(hnew, hmax)
        else:
            hnew = h / min(facc1, fac11 / safe)
            reject = True
            h = hnew

    return xs[:n + 1], ys[:n + 1], rc[:n], status


def _call(f, y, params):
    return f(y, params)


def python_stepper():
    """Uncompiled :func:`dopri5` whose ``system`` argument is any callable."""
    return python_version(dopri5, _eval=_call)


# ---------------------------------------------------------------------------
# scalar polynomial solvers (monic, complex)
# ---------------------------------------------------------------------------

_OMEGA = complex(-0.5, math.sqrt(3.0) / 2.0)
_OMEGA2 = complex(-0.5, -math.sqrt(3.0) / 2.0)


@njit
def _cbrt(z):
    if z == 0:
        return 0j
    return cmath.exp(cmath.log(z) / 3.0)


@njit
def quadratic_roots(b, c):
    # x^2 + b x + c
    disc = cmath.sqrt(b * b - 4.0 * c)
    s1 = b + disc
    s2 = b - disc
    s = s1 if abs(s1) >= abs(s2) else s2
    if s == 0:
        return 0j, 0j
    q = -0.5 * s
    return q, c / q


@njit
def _horner(coeffs, x):
    # coeffs are the non-leading coefficients of a monic polynomial
    f = 1.0 + 0j
    df = 0j
    for a in coeffs:
        df = df * x + f
        f = f * x + a
    return f, df


@njit
def _polish(coeffs, x):
    f, df = _horner(coeffs, x)
    for _ in range(3):
        if f == 0 or df == 0:
            break
        xn = x - f / df
        fn, dfn = _horner(coeffs, xn)
        if abs(fn) < abs(f):
            x, f, df = xn, fn, dfn
        else:
            break
    return x


# Newton is ill-conditioned inside a cluster of nearly equal roots; there the
# closed form (symmetric about an accurate mean) is kept as is.
CLUSTER_SEP = 1e-6


@njit
def _polish_set(co, raw):
    n = raw.shape[0]
    out = raw.copy()
    for i in range(n):
        sep = np.inf
        for j in range(n):
            if j != i:
                sep = min(sep, abs(raw[i] - raw[j]))
        if sep > CLUSTER_SEP * (1.0 + abs(raw[i])):
            out[i] = _polish(co, raw[i])
    return out


@njit
def cubic_roots(a, b, c):
    # x^3 + a x^2 + b x + c
    shift = a / 3.0
    p = b - a * a / 3.0
    q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c
    disc = cmath.sqrt(q * q / 4.0 + p * p * p / 27.0)
    s1 = -0.5 * q + disc
    s2 = -0.5 * q - disc
    s = s1 if abs(s1) >= abs(s2) else s2
    u = _cbrt(s)
    if u == 0:
        t0 = t1 = t2 = 0j
    else:
        v = -p / (3.0 * u)
        t0 = u + v
        t1 = _OMEGA * u + _OMEGA2 * v
        t2 = _OMEGA2 * u + _OMEGA * v
    co = np.empty(3, dtype=np.complex128)
    co[0] = a
    co[1] = b
    co[2] = c
    raw = np.empty(3, dtype=np.complex128)
    raw[0] = t0 - shift
    raw[1] = t1 - shift
    raw[2] = t2 - shift
    out = _polish_set(co, raw)
    return out[0], out[1], out[2]


@njit
def quartic_roots(a, b, c, d):
    # x^4 + a x^3 + b x^2 + c x + d, Ferrari with the largest resolvent root
    shift = a / 4.0
    a2 = a * a
    p = b - 3.0 * a2 / 8.0
    q = c - a * b / 2.0 + a2 * a / 8.0
    r = d - a * c / 4.0 + a2 * b / 16.0 - 3.0 * a2 * a2 / 256.0
    m0, m1, m2 = cubic_roots(p, p * p / 4.0 - r, -q * q / 8.0)
    m = m0
    if abs(m1) > abs(m):
        m = m1
    if abs(m2) > abs(m):
        m = m2
    scale = max(abs(p), math.sqrt(abs(r)), abs(q) ** (2.0 / 3.0), 1e-300)
    if abs(m) <= 1e-14 * scale:
        z0, z1 = quadratic_roots(p, r)
        s0 = cmath.sqrt(z0)
        s1 = cmath.sqrt(z1)
        t = (s0, -s0, s1, -s1)
    else:
        s = cmath.sqrt(2.0 * m)
        g = q / (2.0 * s)
        t0, t1 = quadratic_roots(-s, p / 2.0 + m + g)
        t2, t3 = quadratic_roots(s, p / 2.0 + m - g)
        t = (t0, t1, t2, t3)
    co = np.empty(4, dtype=np.complex128)
    co[0] = a
    co[1] = b
    co[2] = c
    co[3] = d
    raw = np.empty(4, dtype=np.complex128)
    for i in range(4):
        raw[i] = t[i] - shift
    out = _polish_set(co, raw)
    return out[0], out[1], out[2], out[3]


@njit
def roots_batch(coeffs):
    """Roots of many monic polynomials; ``coeffs`` has shape (N, degree)."""
    n, deg = coeffs.shape
    out = np.empty((n, deg), dtype=np.complex128)
    for i in range(n):
        if deg == 2:
            r0, r1 = quadratic_roots(coeffs[i, 0], coeffs[i, 1])
            out[i, 0] = r0
            out[i, 1] = r1
        elif deg == 3:
            r0, r1, r2 = cubic_roots(coeffs[i, 0], coeffs[i, 1], coeffs[i, 2])
            out[i, 0] = r0
            out[i, 1] = r1
            out[i, 2] = r2
        else:
            r0, r1, r2, r3 = quartic_roots(coeffs[i, 0], coeffs[i, 1],
                                           coeffs[i, 2], coeffs[i, 3])
            out[i, 0] = r0
            out[i, 1] = r1
            out[i, 2] = r2
            out[i, 3] = r3
    return out


# ---------------------------------------------------------------------------
# branch tracking
# ---------------------------------------------------------------------------

TRACK_OK = 0
TRACK_COLLISION = 1
TRACK_JUMP = 2

COLLISION_GAP = 1e-9
DRIFT_FACTOR = 10.0


@njit
def _lex_less(a, b):
    if a.real < b.real:
        return True
    if a.real == b.real and a.imag < b.imag:
        return True
    return False


@njit
def nearest_two(current, candidates):
    """Indices of the nearest and second-nearest candidates (lexicographic
    tie-break on equal distance)."""
    j1 = -1
    j2 = -1
    d1 = np.inf
    d2 = np.inf
    for j in range(candidates.shape[0]):
        dj = abs(candidates[j] - current)
        if dj < d1 or (dj == d1 and j1 >= 0
                       and _lex_less(candidates[j], candidates[j1])):
            j2, d2 = j1, d1
            j1, d1 = j, dj
        elif dj < d2 or (dj == d2 and j2 >= 0
                         and _lex_less(candidates[j], candidates[j2])):
            j2, d2 = j, dj
    return j1, j2


@njit
def track_nearest(roots, droots, xs, start, check):
    """Follow one root of a family of polynomials along ``xs``.

    ``roots[i]`` are all roots at ``xs[i]`` and ``droots[i]`` their
    x-derivatives. Starting from ``roots[0, start]`` each step selects the
    nearest root. With ``check`` set, a step whose two nearest roots
    coincide, or whose move exceeds ten times the predicted drift, stops the
    walk. Returns ``(indices, status, failed_step)``.
    """
    n = roots.shape[0]
    idx = np.empty(n, dtype=np.int64)
    idx[0] = start
    for i in range(1, n):
        cur = roots[i - 1, idx[i - 1]]
        j1, j2 = nearest_two(cur, roots[i])
        idx[i] = j1
        if not check:
            continue
        dx = abs(xs[i] - xs[i - 1])
        rate = max(abs(droots[i - 1, idx[i - 1]]), abs(droots[i, j1]))
        if not math.isfinite(rate):
            return idx, TRACK_COLLISION, i
        allowed = DRIFT_FACTOR * dx * rate + 1e-10 * (1.0 + abs(cur))
        moved = abs(roots[i, j1] - cur)
        if j2 >= 0:
            gap = abs(roots[i, j1] - roots[i, j2])
            far = abs(roots[i, j2] - cur)
            if gap < COLLISION_GAP and far <= allowed:
                return idx, TRACK_COLLISION, i
        if moved > allowed:
            return idx, TRACK_JUMP, i
    return idx, TRACK_OK, -1
