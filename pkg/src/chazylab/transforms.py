"""The nineteen maps between solution triples of generalised Chazy systems.

Each :class:`TransformEntry` sends a triple of the source system to one of
the target system. Most maps depend on a root of a defining polynomial
whose coefficients are polynomials (or rational functions) in ``Q`` and
``R``; some also use an auxiliary value computed from that root. A few maps
exist in two versions differing by a sign or a coefficient; both are kept as
the named variants ``statement`` and ``proof`` and the audit decides between
them.

All formula callables accept plain complex numbers, numpy arrays or
:class:`~chazylab.dual.Dual` numbers, so the same code yields images and
their exact x-derivatives.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import Parameter, SystemSpec, Triple, system_rhs
from .dual import Dual, derivative, value
from .errors import (BranchCollision, DegenerateInput, InconsistentRoot,
                     MultipleRoot, ParameterMismatch)
from .roots import PolySpec, _lexsort, roots_many, track_path
from . import _kernels

DEGENERATE = 1e-10
ROOT_TOL = 1e-8
AUX_TOL = 1e-10
REFINE_DEPTH = 3

_OMEGA = complex(-0.5, np.sqrt(3.0) / 2.0)


@dataclass(frozen=True)
class TransformEntry:
    """One catalog entry.

    Attributes
    ----------
    poly : callable or None
        ``(Q, R) -> coefficients`` of the monic defining polynomial in the
        root, highest degree first without the leading 1.
    maps : dict
        Variant name -> ``(P, Q, R, root, aux) -> (P~, Q~, R~)``.
    aux : callable or None
        ``(root, Q, R) -> aux``.
    aux_poly : callable or None
        ``(Q, R) -> coefficients`` of the monic polynomial the auxiliary
        value satisfies.
    denominators : tuple of str
        Which of ``"Q"``, ``"R"``, ``"root"`` appear in a denominator.
    """

    id: str
    source: Parameter
    target: Parameter
    maps: dict
    poly: Optional[Callable] = None
    aux: Optional[Callable] = None
    aux_poly: Optional[Callable] = None
    denominators: tuple = ()
    root_name: str = ""
    aux_name: str = ""
    preferred: str = "statement"
    anchor: str = field(default="", compare=False)

    @property
    def variants(self) -> tuple:
        return tuple(self.maps)

    @property
    def branch_count(self) -> int:
        if self.poly is None:
            return 1
        return len(self.poly(1.0, 1.0))

    @property
    def source_spec(self) -> SystemSpec:
        return SystemSpec(self.source)

    @property
    def target_spec(self) -> SystemSpec:
        return SystemSpec(self.target)

    def poly_builder(self, Q, R) -> Optional[PolySpec]:
        if self.poly is None:
            return None
        return PolySpec(self.poly(complex(Q), complex(R)))

    def aux_relation(self, root, Q, R):
        if self.aux is None:
            return None
        return self.aux(root, Q, R)

    def triple_map(self, variant: str) -> Callable:
        try:
            return self.maps[variant]
        except KeyError:
            raise ValueError(
                f"{self.id} has no variant {variant!r}; choose from {self.variants}") from None

    def __str__(self):
        return f"{self.id} ({self.source} -> {self.target})"


def _p(k):
    return Parameter.parse(k)


# defining polynomials --------------------------------------------------------

def _t1_poly(Q, R):
    return (0.0, -0.75 * Q, 0.25 * R)


def _t2_poly(Q, R):
    return (0.0, -(2 / 3) * Q, (8 / 27) * R, -Q * Q / 27)


def _t4_poly(Q, R):
    return (0.0, (3 / 32) * Q, R / 32)


def _t5_poly(Q, R):
    return (-(R / Q), -Q / 32)


def _t6_poly(Q, R):
    return (0.0, Q / 12, R / 27, -Q * Q / 1728)


def _t8_poly(Q, R):
    # m^3 + (Q/15) m - Q^3/(2700 R) + 4R/135 with m = mu + Q^2/(240 R)
    s = Q * Q / (240 * R)
    c0 = -(Q ** 3) / (2700 * R) + (4 / 135) * R
    return (3 * s, 3 * s * s + Q / 15, s ** 3 + Q * s / 15 + c0)


def _t10_poly(Q, R):
    return (0.0, (2 / 9) * Q, (8 / 81) * R, -Q * Q / 243)


def _t13_poly(Q, R):
    return (0.0, 0.25 * Q, -R / 12)


def _t15_poly(Q, R):
    return (0.0, 0.6 * Q, -R / 5)


def _t16_poly(Q, R):
    return (R / Q, -Q / 5)


def _t17_poly(Q, R):
    return (0.0, -1.2 * Q, -(8 / 15) * R, -(3 / 25) * Q * Q)


def _t19_poly(Q, R):
    return (R / Q, (9 / 32) * Q)


# auxiliary values and the polynomials they satisfy ----------------------------

def _t4_aux(m, Q, R):
    return -(4 / 3) * m - Q / (24 * m)


def _t4_aux_poly(Q, R):
    return (-Q * Q / (8 * R), 0.0, -(Q ** 3) / (108 * R) - (2 / 27) * R)


def _t10_aux(m, Q, R):
    return -(9 / 8) * m - Q / (24 * m)


def _t10_aux_poly(Q, R):
    return (R / Q, 0.0, 0.0, -(3 / 64) * Q * Q - (9 / 64) * R * R / Q)


def _t15_aux(n, Q, R):
    return n / 3 + (4 / 15) * Q / n


def _t15_aux_poly(Q, R):
    return (-0.8 * Q * Q / R, -Q / 5, -(4 / 675) * Q ** 3 / R - R / 135)


def _t17_aux(m, Q, R):
    return m / 8 - (9 / 40) * Q / m


def _t17_aux_poly(Q, R):
    return (-(R / Q), 0.6 * Q, -R / 15, R * R / (960 * Q) - (3 / 1600) * Q * Q)


# triple maps -------------------------------------------------------------------

def _t3_tail(Q, R):
    return -Q - Q ** 4 / (8 * R * R), -R - Q ** 3 / (4 * R) - Q ** 6 / (64 * R ** 3)


def _t17_tail(Q, R, m, lam, qcoef):
    return (-1.25 * Q + qcoef * m * m + 5 * lam * lam,
            (5 / 9) * m ** 3 - 15 * lam ** 3 + (349 / 54) * Q * lam
            + (181 / 216) * Q * m - (181 / 216) * R)


def _t18_tail(Q, R, m, lam):
    return (-0.8 * Q + 4 * m * m,
            (4 / 15) * R + 8 * m ** 3 - (28 / 15) * Q * m - (16 / 15) * Q * lam)


def _t16_tail(Q, R, c):
    return -0.6 * Q - 3 * c * c, -0.6 * R - 1.8 * Q * c - 3 * c ** 3


def _t19_r(Q, R, c):
    return -1.25 * R - (55 / 8) * Q * c + 15 * c ** 3


_ENTRIES = None


def _build():
    E = []

    def add(*args, **kwargs):
        E.append(TransformEntry(*args, **kwargs))

    add("T1", _p("inf"), _p("inf"), {
        "statement": lambda P, Q, R, n, a: (P - n, -Q + 5 * n * n, 2.75 * R - 5.25 * Q * n)},
        poly=_t1_poly, root_name="nu")
    add("T2", _p("inf"), _p("inf"), {
        "statement": lambda P, Q, R, n, a: (P - 2 * n, -Q + 10 * n * n,
                                            -R - 35 * n ** 3 + 7 * Q * n)},
        poly=_t2_poly, root_name="nu")
    add("T3", _p(2), _p(2), {
        "statement": lambda P, Q, R, n, a: (P + Q * Q / (4 * R), *_t3_tail(Q, R)),
        "proof": lambda P, Q, R, n, a: (P - Q * Q / (4 * R), *_t3_tail(Q, R))},
        denominators=("R",), preferred="proof")
    add("T4", _p(2), _p(2), {
        "statement": lambda P, Q, R, m, n: (
            P - 2 * n, (5 / 3) * Q + (64 / 3) * m * m - 8 * n * n,
            -(7 / 27) * R - (4 / 3) * Q * m - 2 * Q * n - (Q * Q / R) * n * n
            - (2 / 27) * Q ** 3 / R)},
        poly=_t4_poly, aux=_t4_aux, aux_poly=_t4_aux_poly,
        denominators=("R", "root"), root_name="mu", aux_name="nu")
    add("T5", _p(2), _p(3), {
        "statement": lambda P, Q, R, c, a: (P + c, 0.75 * Q - 3 * c * c,
                                            0.75 * R + 1.125 * Q * c + 3 * c ** 3)},
        poly=_t5_poly, denominators=("Q",), root_name="chi")
    add("T6", _p(2), _p("2/3"), {
        "statement": lambda P, Q, R, m, a: (P + 2 * m, 1.25 * Q + 10 * m * m,
                                            1.25 * R + 3.125 * Q * m + 35 * m ** 3)},
        poly=_t6_poly, root_name="mu")
    add("T7", _p("2/3"), _p(2), {
        "statement": lambda P, Q, R, n, a: (
            P - Q * Q / (40 * R), 0.8 * Q - Q ** 4 / (800 * R * R),
            0.8 * R - Q ** 3 / (40 * R) - Q ** 6 / (64000 * R ** 3))},
        denominators=("R",))
    add("T8", _p("2/3"), _p("2/3"), {
        "statement": lambda P, Q, R, m, a: (
            P - Q * Q / (40 * R) + 2 * m,
            Q - Q ** 4 / (640 * R * R) + 10 * m * m,
            R - Q ** 3 / (32 * R) - Q ** 6 / (51200 * R ** 3) + 2.5 * Q * m
            - (25 / 6400) * (Q ** 4 / (R * R)) * m + 35 * m ** 3)},
        poly=_t8_poly, denominators=("R",), root_name="mu")
    add("T9", _p(3), _p(3), {
        "statement": lambda P, Q, R, n, a: (P + R / Q, -Q - 3 * R * R / (Q * Q),
                                            R + 3 * R ** 3 / Q ** 3)},
        denominators=("Q",))
    add("T10", _p(3), _p(3), {
        "statement": lambda P, Q, R, m, n: (
            P - n, 1.25 * Q + 6.75 * m * m - 3 * n * n,
            (17 / 8) * R - 3 * n ** 3 + (63 / 16) * Q * m + (243 / 16) * m ** 3)},
        poly=_t10_poly, aux=_t10_aux, aux_poly=_t10_aux_poly,
        denominators=("root",), root_name="mu", aux_name="nu")
    add("T11", _p(3), _p(2), {
        "statement": lambda P, Q, R, m, a: (P + m, (4 / 3) * Q + 4 * m * m,
                                            (4 / 3) * R + 2 * Q * m + 10 * m ** 3)},
        poly=_t10_poly, root_name="mu")
    add("T12", _p(3), _p(4), {
        "statement": lambda P, Q, R, n, a: (
            P - Q * Q / (3 * R), -(5 / 3) * Q - (5 / 9) * Q ** 4 / (R * R),
            -(5 / 3) * Q ** 3 / R - (5 / 3) * R - (10 / 27) * Q ** 6 / R ** 3)},
        denominators=("R",))
    add("T13", _p(3), _p("3/2"), {
        "statement": lambda P, Q, R, w, a: (P - w, (5 / 3) * Q + 5 * w * w,
                                            (5 / 12) * R + (5 / 12) * Q * w)},
        poly=_t13_poly, root_name="w")
    add("T14", _p("3/2"), _p(3), {
        "statement": lambda P, Q, R, n, a: (P + R / Q, 0.6 * Q - 3 * R * R / (Q * Q),
                                            1.8 * R + 3 * R ** 3 / Q ** 3)},
        denominators=("Q",))
    add("T15", _p(4), _p(4), {
        "statement": lambda P, Q, R, n, lam: (
            P - lam, -(5 / 3) * Q - 5 * lam * lam - (10 / 3) * n * n,
            -(5 / 3) * Q * n - (20 / 27) * R - 7 * Q * lam
            - 8 * (Q * Q / R) * lam * lam - (8 / 135) * Q ** 3 / R)},
        poly=_t15_poly, aux=_t15_aux, aux_poly=_t15_aux_poly,
        denominators=("R", "root"), root_name="nu", aux_name="lambda")
    add("T16", _p(4), _p(3), {
        "statement": lambda P, Q, R, c, a: (P + c, *_t16_tail(Q, R, c)),
        "proof": lambda P, Q, R, c, a: (P - c, *_t16_tail(Q, R, c))},
        poly=_t16_poly, denominators=("Q",), root_name="chi", preferred="proof")
    add("T17", _p(9), _p(9), {
        "statement": lambda P, Q, R, m, lam: (P - lam, *_t17_tail(Q, R, m, lam, 5 / 36)),
        "proof": lambda P, Q, R, m, lam: (P - lam, *_t17_tail(Q, R, m, lam, 1.25))},
        poly=_t17_poly, aux=_t17_aux, aux_poly=_t17_aux_poly,
        denominators=("root",), root_name="mu", aux_name="lambda", preferred="proof")
    add("T18", _p(9), _p(18), {
        "statement": lambda P, Q, R, m, lam: (P - m, *_t18_tail(Q, R, m, lam)),
        "proof": lambda P, Q, R, m, lam: (P + m, *_t18_tail(Q, R, m, lam))},
        poly=_t17_poly, aux=_t17_aux, aux_poly=_t17_aux_poly,
        denominators=("root",), root_name="mu", aux_name="lambda", preferred="proof")
    add("T19", _p(18), _p(9), {
        "statement": lambda P, Q, R, c, a: (P + c, -(5 / 32) * Q + 5 * c * c, _t19_r(Q, R, c)),
        "proof": lambda P, Q, R, c, a: (P + c, -1.25 * Q + 5 * c * c, _t19_r(Q, R, c))},
        poly=_t19_poly, denominators=("Q",), root_name="chi", preferred="proof")
    return E


def catalog() -> list:
    """All nineteen entries, T1 to T19."""
    global _ENTRIES
    if _ENTRIES is None:
        _ENTRIES = _build()
    return list(_ENTRIES)


def get(entry_id) -> TransformEntry:
    if isinstance(entry_id, TransformEntry):
        return entry_id
    key = str(entry_id).strip().upper()
    for e in catalog():
        if e.id == key:
            return e
    raise ValueError(f"unknown transform id {entry_id!r}")


def t8_roots(Q, R) -> np.ndarray:
    """The three explicit T8 roots (principal cube root of ``R``)."""
    Q, R = complex(Q), complex(R)
    c = R ** (1 / 3) if R != 0 else 0j
    if c == 0:
        raise DegenerateInput("R", R)
    a, b = 10 ** (1 / 3) / 30, 10 ** (2 / 3) / 15
    return np.array([-Q * Q / (240 * R) + _OMEGA ** j * a * Q / c - _OMEGA ** (2 * j) * b * c
                     for j in range(3)])


def identity_root(Q, R):
    """Root ``Q^2/(80R)`` of the T6 quartic at the T7 image of ``(P, Q, R)``."""
    return Q * Q / (80 * R)


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------


def _coeff_array(entry, Q, R) -> np.ndarray:
    Q = np.asarray(Q, dtype=complex)
    R = np.asarray(R, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        cs = entry.poly(Q, R)
    return np.stack([np.broadcast_to(np.asarray(c, dtype=complex), Q.shape) for c in cs],
                    axis=-1)


def _poly_parts(coeffs, r):
    """``F(r)`` and ``dF/dr`` for monic coefficient sequences."""
    f = np.ones_like(r)
    df = np.zeros_like(r)
    for c in coeffs:
        df = df * r + f
        f = f * r + c
    return f, df


def _root_rate(entry, Q, R, dQ, dR, r):
    """Implicit derivative of a root and ``dF/dr`` (arrays or scalars)."""
    cs = entry.poly(Dual(Q, dQ), Dual(R, dR))
    vals = [value(c) for c in cs]
    ders = [derivative(c) for c in cs]
    _, dF = _poly_parts(vals, r)
    n = len(cs)
    f_eps = 0.0
    for j, d in enumerate(ders):
        f_eps = f_eps + d * r ** (n - 1 - j)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -f_eps / dF, dF


def _scale(coeffs, r):
    return 1.0 + abs(r) ** len(coeffs) + sum(abs(c) * abs(r) ** (len(coeffs) - 1 - j)
                                              for j, c in enumerate(coeffs))


def _check_denominators(entry, Q, R, root, x=None, names=None):
    named = {"Q": Q, "R": R, "root": root}
    for d in entry.denominators:
        if names is not None and d not in names:
            continue
        v = np.asarray(named[d])
        bad = np.abs(v) < DEGENERATE
        if np.any(bad):
            where = None
            if x is not None:
                where = float(np.atleast_1d(x)[np.argmax(np.atleast_1d(bad))])
            name = entry.root_name if d == "root" else d
            raise DegenerateInput(name, complex(np.atleast_1d(v)[np.argmax(np.atleast_1d(bad))]),
                                  x=where)


def roots_at(entry: TransformEntry, t) -> np.ndarray:
    """Roots of the defining polynomial at a triple, sorted (real, imag)."""
    if entry.poly is None:
        return np.zeros(1, dtype=complex)
    t = Triple.of(t)
    return entry.poly_builder(t.Q, t.R).roots()


def apply(entry, variant: str, t, root=None, aux=None) -> Triple:
    """Map one triple.

    ``root`` must be a root of the entry's defining polynomial (ignored for
    closed-form entries). ``aux`` is computed from ``root`` when omitted and
    checked against it otherwise.

    Raises
    ------
    DegenerateInput
        A denominator has modulus below 1e-10.
    InconsistentRoot
        ``root`` or ``aux`` does not satisfy its defining relation.
    """
    entry = get(entry)
    fn = entry.triple_map(variant)
    t = Triple.of(t)
    P, Q, R = t
    if entry.poly is not None:
        if root is None:
            raise InconsistentRoot(f"{entry.id} needs a root of its defining polynomial")
        root = complex(root)
        _check_denominators(entry, Q, R, root, names=("Q", "R"))
        coeffs = entry.poly(Q, R)
        f, _ = _poly_parts(coeffs, root)
        if abs(f) > ROOT_TOL * _scale(coeffs, root):
            raise InconsistentRoot(f"{root} is not a root of the {entry.id} polynomial "
                                   f"(|F| = {abs(f):.3g})")
    else:
        root = 0j
    _check_denominators(entry, Q, R, root)
    if entry.aux is not None:
        expected = entry.aux(root, Q, R)
        if aux is None:
            aux = expected
        elif abs(complex(aux) - expected) > AUX_TOL * (1 + abs(expected)):
            raise InconsistentRoot(f"aux {aux} disagrees with the relation ({expected})")
    return Triple(*fn(P, Q, R, root, aux))


def implicit_root_derivative(entry, t, dt, root) -> complex:
    """``-(dF/dQ Q' + dF/dR R') / (dF/droot)`` at a root of the defining polynomial."""
    entry = get(entry)
    if entry.poly is None:
        raise ValueError(f"{entry.id} has no defining polynomial")
    t, dt = Triple.of(t), Triple.of(dt)
    rate, dF = _root_rate(entry, t.Q, t.R, dt.Q, dt.R, complex(root))
    if abs(dF) < DEGENERATE:
        raise MultipleRoot(f"dF/d{entry.root_name or 'root'} = {abs(dF):.3g} at root {root}")
    return complex(rate)


def map_with_derivative(entry, variant, states, derivs, roots):
    """Images and their x-derivatives for arrays of triples.

    ``states`` and ``derivs`` have shape ``(N, 3)``; ``roots`` shape ``(N,)``
    (ignored for closed-form entries). Derivatives are exact: the root's
    derivative comes from implicit differentiation and everything else
    from dual arithmetic.
    """
    entry = get(entry)
    fn = entry.triple_map(variant)
    P = Dual(states[:, 0], derivs[:, 0])
    Q = Dual(states[:, 1], derivs[:, 1])
    R = Dual(states[:, 2], derivs[:, 2])
    if entry.poly is not None:
        rate, _ = _root_rate(entry, Q.val, R.val, Q.der, R.der, roots)
        r = Dual(roots, rate)
    else:
        r = Dual(np.zeros(len(states), dtype=complex), np.zeros(len(states), dtype=complex))
    aux = entry.aux(r, Q, R) if entry.aux is not None else None
    out = [Dual.lift(c) for c in fn(P, Q, R, r, aux)]
    n = len(states)
    img = np.stack([np.broadcast_to(value(c), (n,)) for c in out], axis=-1)
    dimg = np.stack([np.broadcast_to(derivative(c), (n,)) for c in out], axis=-1)
    return img, dimg


# ---------------------------------------------------------------------------
# transforms applied to trajectories
# ---------------------------------------------------------------------------


_GRID_CACHE = weakref.WeakKeyDictionary()
_GRID_CACHE_SIZE = 8


def _nearest(candidates, ref):
    return int(_kernels.nearest_two(complex(ref), candidates)[0])


class AppliedTransform:
    """Image of a trajectory under one catalog map, branch-tracked.

    The tracked root is fixed on ``n_grid`` points of the source interval at
    construction (with local subdivision where the tracker reports an
    ambiguous or oversized step). Between grid points the root nearest to
    the tracked value at the left grid neighbour is used. Behaves like a
    trajectory: ``sample``, ``derivative``, ``grid``, ``x0``, ``x_end``.

    Parameters
    ----------
    xs : array_like, optional
        Explicit tracking grid (for sampled sources); overrides ``n_grid``.
    derivative_from : {"rhs", "source"}
        Where the source derivative comes from. ``"rhs"`` evaluates the
        source system at the sampled state; ``"source"`` uses
        ``source.derivative`` (needed when the source is itself an image).

    Raises
    ------
    DegenerateInput, BranchCollision, MultipleRoot
        With ``x`` set to the offending point.
    """

    def __init__(self, entry, variant, branch, source, n_grid=200,
                 derivative_from=None, xs=None):
        self.entry = get(entry)
        self.variant = variant
        self.entry.triple_map(variant)
        if not 0 <= branch < self.entry.branch_count:
            raise ValueError(f"branch must be in [0, {self.entry.branch_count})")
        self.branch = int(branch)
        self.source = source
        if derivative_from is None:
            derivative_from = "source" if isinstance(source, AppliedTransform) else "rhs"
        self.derivative_from = derivative_from
        self.x0, self.x_end = source.x0, source.x_end
        self.status = source.status
        self.spec = self.entry.target_spec
        if xs is None:
            xs = np.linspace(self.x0, self.x_end, max(int(n_grid), 2))
        self.xs = np.asarray(xs, dtype=float)
        self.tracked = self._track_grid()

    @property
    def id(self):
        return self.entry.id

    @property
    def completed(self):
        return self.status == "completed"

    def grid(self, n):
        return np.linspace(self.x0, self.x_end, n)

    # source access -------------------------------------------------------

    def _source(self, x):
        S = np.atleast_2d(self.source.sample(x))
        if self.derivative_from == "rhs":
            D = system_rhs(self.entry.source_spec, S)
        else:
            D = np.atleast_2d(self.source.derivative(x))
        return S, D

    def _roots(self, x, S, D):
        e = self.entry
        _check_denominators(e, S[:, 1], S[:, 2], None, x, names=("Q", "R"))
        if e.poly is None:
            z = np.zeros((len(S), 1), dtype=complex)
            return z, z
        roots = roots_many(_coeff_array(e, S[:, 1], S[:, 2]))
        rates = np.empty_like(roots)
        for j in range(roots.shape[1]):
            rates[:, j], _ = _root_rate(e, S[:, 1], S[:, 2], D[:, 1], D[:, 2], roots[:, j])
        return roots, rates

    def _grid_data(self, x):
        """``(S, D, roots, rates)`` on ``x``, shared by every image of the
        same source that uses the same polynomial (variants, branches)."""
        key = (self.entry.source, self.entry.poly, self.derivative_from, x.tobytes())
        try:
            per_source = _GRID_CACHE.setdefault(self.source, {})
        except TypeError:  # source not weak-referenceable
            per_source = {}
        hit = per_source.get(key)
        if hit is None:
            S, D = self._source(x)
            hit = (S, D) + self._roots(x, S, D)
            if len(per_source) >= _GRID_CACHE_SIZE:
                per_source.pop(next(iter(per_source)))
            per_source[key] = hit
        else:
            # denominators depend on the entry, not only on the polynomial
            _check_denominators(self.entry, hit[0][:, 1], hit[0][:, 2], None, x,
                                names=("Q", "R"))
        return hit

    # tracking --------------------------------------------------------------

    def _track(self, xs, r0, depth):
        _, _, roots, rates = self._grid_data(xs)
        out = np.empty(len(xs), dtype=complex)
        start = _nearest(roots[0], r0)
        i0 = 0
        while True:
            idx, status, fail = track_path(roots[i0:], rates[i0:], xs[i0:], start)
            if status == _kernels.TRACK_OK:
                out[i0:] = roots[i0:][np.arange(len(idx)), idx]
                return out
            # entries past the failing step are not written by the kernel
            f = i0 + fail
            out[i0:f] = roots[i0:f][np.arange(fail), idx[:fail]]
            if depth == 0:
                kind = "collide" if status == _kernels.TRACK_COLLISION else "jump"
                raise BranchCollision(
                    f"{self.entry.id} branch {self.branch}: roots {kind} near x={xs[f]:.6g}",
                    x=float(xs[f]))
            sub = np.linspace(xs[f - 1], xs[f], 9)
            r_end = self._track(sub, out[f - 1], depth - 1)[-1]
            start = _nearest(roots[f], r_end)
            out[f] = roots[f, start]
            i0 = f

    def _track_grid(self):
        if self.entry.poly is None:
            self._grid_data(self.xs)
            return np.zeros(len(self.xs), dtype=complex)
        S, _ = self._source(self.x0)
        _check_denominators(self.entry, S[:, 1], S[:, 2], None, self.x0, names=("Q", "R"))
        first = _lexsort(roots_many(_coeff_array(self.entry, S[:, 1], S[:, 2])))[0]
        tracked = self._track(self.xs, first[self.branch], REFINE_DEPTH)
        S = self._grid_data(self.xs)[0]
        _check_denominators(self.entry, None, None, tracked, self.xs, names=("root",))
        _, dF = _poly_parts(entry_coeffs(self.entry, S), tracked)
        bad = np.abs(dF) < DEGENERATE
        if np.any(bad):
            raise MultipleRoot(f"{self.entry.id}: multiple root at x={self.xs[np.argmax(bad)]:.6g}")
        return tracked

    def roots_at(self, x):
        """The tracked root at ``x`` (scalar in, scalar out)."""
        r = self._roots_at(np.atleast_1d(np.asarray(x, dtype=float)))
        return complex(r[0]) if np.ndim(x) == 0 else r

    def _roots_at(self, x):
        if self.entry.poly is None:
            return np.zeros(len(x), dtype=complex)
        roots = self._grid_data(x)[2]
        left = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.xs) - 1)
        ref = self.tracked[left]
        j = np.argmin(np.abs(roots - ref[:, None]), axis=1)
        return roots[np.arange(len(x)), j]

    def evaluate(self, x):
        """``(images, derivatives, roots)`` at the points ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        S, D = self._grid_data(x)[:2]
        r = self._roots_at(x)
        _check_denominators(self.entry, S[:, 1], S[:, 2], r, x)
        img, dimg = map_with_derivative(self.entry, self.variant, S, D, r)
        return img, dimg, r

    def sample(self, x):
        scalar = np.ndim(x) == 0
        img = self.evaluate(x)[0]
        return img[0] if scalar else img

    def derivative(self, x):
        scalar = np.ndim(x) == 0
        d = self.evaluate(x)[1]
        return d[0] if scalar else d

    def __repr__(self):
        return (f"AppliedTransform({self.entry.id}, {self.variant!r}, branch={self.branch}, "
                f"[{self.x0:g}, {self.x_end:g}])")


def entry_coeffs(entry, S):
    """Coefficient arrays ``(N, degree)`` -> list of columns at states ``S``."""
    c = _coeff_array(entry, S[:, 1], S[:, 2])
    return [c[:, j] for j in range(c.shape[1])]


def aux_closure(entry, Q, R, root) -> float:
    """Relative defect of the auxiliary value in its own polynomial."""
    entry = get(entry)
    if entry.aux_poly is None:
        raise ValueError(f"{entry.id} has no auxiliary polynomial")
    a = entry.aux(root, Q, R)
    coeffs = entry.aux_poly(Q, R)
    f, _ = _poly_parts(coeffs, a)
    return float(np.max(np.abs(f) / _scale([np.abs(c) for c in coeffs], a)))


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stage:
    entry: TransformEntry
    variant: str
    branch: int


@dataclass(frozen=True)
class CompositeTransform:
    stages: tuple

    @property
    def source(self) -> Parameter:
        return self.stages[0].entry.source

    @property
    def target(self) -> Parameter:
        return self.stages[-1].entry.target

    @property
    def ids(self) -> list:
        return [s.entry.id for s in self.stages]

    def apply(self, t, roots=None) -> Triple:
        """Pointwise application; ``roots`` per stage default to the branch
        index into the sorted roots at each intermediate triple."""
        t = Triple.of(t)
        for i, s in enumerate(self.stages):
            if s.entry.poly is None:
                r = None
            elif roots is not None and roots[i] is not None:
                r = roots[i]
            else:
                r = roots_at(s.entry, t)[s.branch]
            t = apply(s.entry, s.variant, t, r)
        return t

    def apply_trajectory(self, traj, n_grid=200, xs=None):
        """Nested :class:`AppliedTransform`, tracked independently per stage."""
        out = traj
        for s in self.stages:
            out = AppliedTransform(s.entry, s.variant, s.branch, out, n_grid=n_grid, xs=xs)
        return out

    def __str__(self):
        return " -> ".join(f"{s.entry.id}[{s.variant},{s.branch}]" for s in self.stages)


def compose(ids, branches=None, variants=None) -> CompositeTransform:
    """Chain catalog entries left to right.

    Raises
    ------
    ParameterMismatch
        When an entry's source differs from the previous entry's target.
    """
    entries = [get(i) for i in ids]
    if not entries:
        raise ValueError("compose needs at least one id")
    branches = list(branches) if branches is not None else [0] * len(entries)
    variants = list(variants) if variants is not None else [None] * len(entries)
    if len(branches) != len(entries) or len(variants) != len(entries):
        raise ValueError("one branch and variant per stage")
    for a, b in zip(entries, entries[1:]):
        if a.target != b.source:
            raise ParameterMismatch(
                f"{a.id} ends at k={a.target} but {b.id} starts at k={b.source}")
    stages = []
    for e, br, v in zip(entries, branches, variants):
        v = v or e.preferred
        e.triple_map(v)
        if not 0 <= int(br) < e.branch_count:
            raise ValueError(f"{e.id}: branch {br} out of range [0, {e.branch_count})")
        stages.append(Stage(e, v, int(br)))
    return CompositeTransform(tuple(stages))
