"""Generalised Darboux-Halphen system and its Chazy combinations.

``(w1, w2, w3)`` obey

    w1' = w2 w3 - w1 (w2 + w3) + tau^2     (and cyclically)

with ``tau^2`` a quadratic form weighted by the squared angles. Linear
combinations ``y = -n1 w1 - n2 w2 - n3 w3`` solve the generalised Chazy
equation for the (weights, angles, k) rows returned by
:func:`admissible_rules`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .core import Parameter, Triple
from .odeint import integrate

MIN_SEPARATION = 0.05


@dataclass(frozen=True)
class AngleTriple:
    alpha: Fraction
    beta: Fraction
    gamma: Fraction

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = Fraction(getattr(self, name))
            if v < 0:
                raise ValueError(f"angle {name} must be nonnegative, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def parse(cls, text: str) -> "AngleTriple":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated angles, got {text!r}")
        return cls(*(Fraction(p) for p in parts))

    def as_tuple(self):
        return (self.alpha, self.beta, self.gamma)

    def squares(self) -> np.ndarray:
        return np.array([float(a * a) for a in self.as_tuple()], dtype=np.complex128)

    def __str__(self):
        return ",".join(str(a) for a in self.as_tuple())


@dataclass(frozen=True)
class WState:
    w1: complex
    w2: complex
    w3: complex

    def __post_init__(self):
        for name in ("w1", "w2", "w3"):
            v = complex(getattr(self, name))
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ValueError(f"{name} is not finite")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3], dtype=np.complex128)


@dataclass(frozen=True)
class CombinationRule:
    """``y = -weights . w`` for the Halphen system with ``angles``."""

    weights: tuple
    angles: AngleTriple
    parameter: Parameter
    family: str = ""

    def __str__(self):
        n = ",".join(str(v) for v in self.weights)
        return f"weights ({n}) angles ({self.angles}) k={self.parameter}"


def _w(w) -> np.ndarray:
    if isinstance(w, WState):
        return w.as_array()
    return np.asarray(w, dtype=np.complex128)


def _tau2(sq, w1, w2, w3):
    return (sq[0] * (w1 - w2) * (w3 - w1) + sq[1] * (w2 - w3) * (w1 - w2)
            + sq[2] * (w3 - w1) * (w2 - w3))


def tau_squared(angles: AngleTriple, w):
    """``a^2 (w1-w2)(w3-w1) + b^2 (w2-w3)(w1-w2) + g^2 (w3-w1)(w2-w3)``."""
    sq = [a * a for a in angles.as_tuple()]
    if not isinstance(w, WState):
        raw = list(np.asarray(w, dtype=object).ravel())
        if len(raw) == 3 and all(isinstance(v, (Fraction, int)) for v in raw):
            return _tau2(sq, *(Fraction(v) for v in raw))
    y = _w(w)
    sq = [float(s) for s in sq]
    return _tau2(sq, y[..., 0], y[..., 1], y[..., 2])


def _rhs_array(sq, y):
    w1, w2, w3 = y[..., 0], y[..., 1], y[..., 2]
    t2 = _tau2(sq, w1, w2, w3)
    return np.stack([w2 * w3 - w1 * (w2 + w3) + t2,
                     w3 * w1 - w2 * (w3 + w1) + t2,
                     w1 * w2 - w3 * (w1 + w2) + t2], axis=-1)


def halphen_rhs(angles: AngleTriple, w):
    """Right-hand side of the Halphen system; WState in, WState out."""
    sq = [float(a * a) for a in angles.as_tuple()]
    out = _rhs_array(sq, _w(w))
    if isinstance(w, WState):
        return WState(*out)
    return out


def w_taylor(angles: AngleTriple, w, order: int = 3) -> np.ndarray:
    """Taylor coefficients ``w_0 .. w_order`` of the flow through ``w``.

    The right-hand side is a homogeneous quadratic ``f(w) = B(w, w)``, so
    ``(m+1) w_{m+1} = sum_j B(w_j, w_{m-j})`` with ``B`` recovered exactly
    by polarisation. Shape ``(order+1, ..., 3)``.
    """
    sq = [float(a * a) for a in angles.as_tuple()]

    def bilinear(u, v):
        return 0.25 * (_rhs_array(sq, u + v) - _rhs_array(sq, u - v))

    coeffs = [_w(w)]
    for m in range(order):
        acc = sum(bilinear(coeffs[j], coeffs[m - j]) for j in range(m + 1))
        coeffs.append(acc / (m + 1))
    return np.stack(coeffs)


def _p_derivatives(rule: CombinationRule, w, order: int):
    n = np.asarray(rule.weights, dtype=float)
    jet = w_taylor(rule.angles, w, order)
    p = -(jet @ n)
    fact = [1.0, 1.0, 2.0, 6.0, 24.0]
    return [p[m] * fact[m] for m in range(order + 1)]


def triple_from_w(rule: CombinationRule, w):
    """``(P, P^2 - 6P', PQ - 3/2 Q')`` with ``P = -n.w``.

    All derivatives are algebraic in ``w`` (no numerical differentiation).
    """
    P, P1, P2 = _p_derivatives(rule, w, 2)
    Q = P * P - 6 * P1
    Q1 = 2 * P * P1 - 6 * P2
    R = P * Q - 1.5 * Q1
    out = np.stack([P, Q, R], axis=-1)
    if isinstance(w, WState) or out.ndim == 1:
        return Triple(*out)
    return out


def triple_jet_from_w(rule: CombinationRule, w):
    """Triple and its exact x-derivative along the Halphen flow.

    Returns two arrays of shape ``(..., 3)``.
    """
    P, P1, P2, P3 = _p_derivatives(rule, w, 3)
    Q = P * P - 6 * P1
    Q1 = 2 * P * P1 - 6 * P2
    Q2 = 2 * P1 * P1 + 2 * P * P2 - 6 * P3
    R = P * Q - 1.5 * Q1
    R1 = P1 * Q + P * Q1 - 1.5 * Q2
    return np.stack([P, Q, R], axis=-1), np.stack([P1, Q1, R1], axis=-1)


def integrate_w(angles: AngleTriple, ic, x0: float, x1: float, tol: float = 1e-10):
    """Integrate the Halphen system; see :func:`chazylab.odeint.integrate`."""
    return integrate(_kernels.halphen_rhs, _w(ic), x0, x1, tol,
                     params=angles.squares(), label=f"halphen angles=({angles})")


# ---------------------------------------------------------------------------
# admissibility table
# ---------------------------------------------------------------------------

_THIRD, _HALF, _TWO_THIRDS = Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)


def _rows(k: Fraction):
    inv = 1 / k
    return [
        ("2,2,2", (2, 2, 2), (_THIRD, _THIRD, 2 * inv), False),
        ("2,2,2", (2, 2, 2), (2 * inv, 2 * inv, 2 * inv), False),
        ("1,2,3", (1, 2, 3), (inv, _THIRD, _HALF), True),
        ("1,2,3", (1, 2, 3), (inv, 2 * inv, _HALF), True),
        ("1,2,3", (1, 2, 3), (inv, _THIRD, 3 * inv), True),
        ("1,1,4", (1, 1, 4), (inv, inv, 4 * inv), True),
        ("1,1,4", (1, 1, 4), (inv, inv, _TWO_THIRDS), True),
    ]


def admissible_rules(parameter) -> list:
    """Every (weights, angles) combination solving the equation at ``k``.

    The (1,2,3) and (1,1,4) families are expanded over simultaneous
    permutations of weights and angles; duplicates are dropped.
    """
    parameter = Parameter.parse(parameter)
    if parameter.is_infinite:
        raise ValueError("admissible_rules needs a finite parameter")
    out, seen = [], set()
    for family, weights, angles, permute in _rows(parameter.k):
        perms = itertools.permutations(range(3)) if permute else [(0, 1, 2)]
        for perm in perms:
            wts = tuple(weights[i] for i in perm)
            ang = tuple(angles[i] for i in perm)
            if (wts, ang) in seen:
                continue
            seen.add((wts, ang))
            out.append(CombinationRule(wts, AngleTriple(*ang), parameter, family))
    return out


def infer_parameter(weights, angles: AngleTriple):
    """Find ``k`` such that (weights, angles) is an admissible row, or None."""
    weights = tuple(int(v) for v in weights)
    candidates = set()
    for a in angles.as_tuple():
        if a == 0:
            continue
        for mult in (1, 2, 3, 4):
            candidates.add(Fraction(mult) / a)
    for k in sorted(candidates):
        if k == 6:
            continue
        for rule in admissible_rules(Parameter(k)):
            if rule.weights == weights and rule.angles == angles:
                return rule
    return None


def sample_wstates(rng: np.random.Generator, n: int, radius: float = 1.0) -> np.ndarray:
    """Random complex w-states in the disc, rejecting near-collisions."""
    out = []
    while len(out) < n:
        r = radius * np.sqrt(rng.uniform(size=3))
        w = r * np.exp(2j * np.pi * rng.uniform(size=3))
        gaps = [abs(w[i] - w[j]) for i, j in ((0, 1), (1, 2), (2, 0))]
        if min(gaps) >= MIN_SEPARATION:
            out.append(w)
    return np.array(out)
