"""Parameters, first-order systems, triples, residuals and rational solutions.

The generalised Chazy equation with parameter ``k`` is equivalent to

    P' = (P^2 - Q) / 6
    Q' = 2/3 (P Q - R)
    R' = P R + c Q^2,       c = k^2 / (36 - k^2)

with ``c = -1`` in the limit ``k -> oo`` (Ramanujan's system).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from . import _kernels
from .errors import InadmissibleResidue, InvalidParameter, PoleAtSix, PoleHit

RationalLike = Union[int, str, Fraction, float]

POLE_THRESHOLD = 1e-8


@dataclass(frozen=True)
class Parameter:
    """Chazy parameter: an exact positive rational ``k != 6``, or infinity.

    ``k`` is ``None`` for the infinite parameter.
    """

    k: Optional[Fraction] = None

    def __post_init__(self):
        if self.k is None:
            return
        k = Fraction(self.k)
        if k <= 0:
            raise InvalidParameter(f"k must be positive, got {k}")
        if k == 6:
            raise PoleAtSix("k = 6 is a pole of k^2/(36-k^2)")
        object.__setattr__(self, "k", k)

    @classmethod
    def infinite(cls) -> "Parameter":
        return cls(None)

    @classmethod
    def parse(cls, value: Union[RationalLike, "Parameter", None]) -> "Parameter":
        """Build from ``'inf'``, a fraction ``'p/q'``, a decimal or a number.

        Decimal strings are converted exactly (``'1.5'`` is 3/2); floats go
        through their shortest repr for the same reason.
        """
        if isinstance(value, Parameter):
            return value
        if value is None:
            return cls.infinite()
        if isinstance(value, str):
            text = value.strip().lower()
            if text in ("inf", "infinity", "oo", "∞"):
                return cls.infinite()
            try:
                k = Fraction(text)
            except (ValueError, ZeroDivisionError):
                raise InvalidParameter(f"cannot parse parameter {value!r}") from None
            return cls(k)
        if isinstance(value, float):
            if np.isinf(value) and value > 0:
                return cls.infinite()
            return cls(Fraction(repr(value)))
        return cls(Fraction(value))

    @property
    def is_infinite(self) -> bool:
        return self.k is None

    def __str__(self):
        return "inf" if self.k is None else str(self.k)


def chazy_coefficient(parameter) -> Union[Fraction, int]:
    """Exact coefficient of ``Q^2`` in ``dR/dx``: ``k^2/(36-k^2)``, or -1."""
    parameter = Parameter.parse(parameter)
    if parameter.is_infinite:
        return -1
    k = parameter.k
    return k * k / (36 - k * k)


@dataclass(frozen=True)
class SystemSpec:
    parameter: Parameter
    c: complex = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "parameter", Parameter.parse(self.parameter))
        object.__setattr__(self, "c", complex(chazy_coefficient(self.parameter)))

    @classmethod
    def for_k(cls, k) -> "SystemSpec":
        return cls(Parameter.parse(k))

    @property
    def exact_coefficient(self):
        return chazy_coefficient(self.parameter)

    @property
    def kernel_params(self) -> np.ndarray:
        return np.array([self.c], dtype=np.complex128)


@dataclass(frozen=True)
class Triple:
    """State ``(P, Q, R)`` of the first-order system at one point."""

    P: complex
    Q: complex
    R: complex

    def __post_init__(self):
        for name in ("P", "Q", "R"):
            v = complex(getattr(self, name))
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ValueError(f"triple component {name} is not finite: {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def of(cls, values) -> "Triple":
        if isinstance(values, Triple):
            return values
        P, Q, R = values
        return cls(P, Q, R)

    def as_array(self) -> np.ndarray:
        return np.array([self.P, self.Q, self.R], dtype=np.complex128)

    def __iter__(self):
        return iter((self.P, self.Q, self.R))


def _as_state(t) -> np.ndarray:
    if isinstance(t, Triple):
        return t.as_array()
    return np.asarray(t, dtype=np.complex128)


def rhs_values(c, P, Q, R):
    """Right-hand side on bare components (scalars, arrays or duals)."""
    return (P * P - Q) / 6.0, (2.0 / 3.0) * (P * Q - R), P * R + c * Q * Q


def system_rhs(spec: SystemSpec, t):
    """``((P^2-Q)/6, 2/3 (PQ-R), PR + cQ^2)``.

    Accepts a :class:`Triple` (returns a Triple) or an array whose last
    axis has length 3 (returns an array of the same shape).
    """
    y = _as_state(t)
    dP, dQ, dR = rhs_values(spec.c, y[..., 0], y[..., 1], y[..., 2])
    out = np.stack([dP, dQ, dR], axis=-1)
    if isinstance(t, Triple):
        return Triple(*out)
    return out


def residual(spec: SystemSpec, t, dt) -> float:
    """Max over components of ``|dt - rhs| / (1 + |rhs|)``.

    Broadcasts over leading axes; the maximum is taken over everything.
    """
    f = system_rhs(spec, _as_state(t))
    d = _as_state(dt)
    return float(np.max(np.abs(d - f) / (1.0 + np.abs(f))))


def pointwise_residual(spec: SystemSpec, states: np.ndarray,
                       derivatives: np.ndarray) -> np.ndarray:
    """Per-sample version of :func:`residual` for ``(N, 3)`` arrays."""
    f = system_rhs(spec, states)
    return np.max(np.abs(derivatives - f) / (1.0 + np.abs(f)), axis=-1)


chazy_kernel = _kernels.chazy_rhs


# ---------------------------------------------------------------------------
# rational solutions y = a / (x - c)
# ---------------------------------------------------------------------------


def admissible_residues(parameter) -> list:
    """Residues ``a`` for which ``y = a/(x-c)`` is an exact solution.

    These are the roots of ``(6 + a)(4a^2 + 24a + 36 - k^2)``: ``-6`` and
    ``-3 +- k/2`` (only ``-6`` for infinite k). Returned as exact Fractions.
    """
    parameter = Parameter.parse(parameter)
    if parameter.is_infinite:
        return [Fraction(-6)]
    k = parameter.k
    out = [Fraction(-6), -3 + k / 2, -3 - k / 2]
    seen = []
    for a in out:
        if a not in seen:
            seen.append(a)
    return seen


def residue_defect(parameter, a) -> complex:
    """Value of the admissibility relation at ``a`` (zero when admissible)."""
    parameter = Parameter.parse(parameter)
    a = complex(a)
    if parameter.is_infinite:
        return 6 + a
    k = float(parameter.k)
    return (6 + a) * (4 * a * a + 24 * a + 36 - k * k)


@dataclass(frozen=True)
class RationalSolutionSpec:
    parameter: Parameter
    a: complex
    c: complex = 0.0

    def __post_init__(self):
        parameter = Parameter.parse(self.parameter)
        object.__setattr__(self, "parameter", parameter)
        a = self.a if isinstance(self.a, Fraction) else complex(self.a)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", complex(self.c))
        scale = 1.0 + abs(complex(a)) ** 3
        if parameter.k is not None:
            scale *= 1.0 + float(parameter.k) ** 2
        if abs(residue_defect(parameter, a)) > 1e-12 * scale:
            raise InadmissibleResidue(
                f"a = {a} does not give a rational solution for k = {parameter}")


def _rational_parts(rs: RationalSolutionSpec, x):
    x = np.asarray(x, dtype=np.complex128)
    u = x - rs.c
    if np.any(np.abs(u) < POLE_THRESHOLD):
        raise PoleHit(f"|x - c| < {POLE_THRESHOLD:g} (pole at {rs.c})")
    a = complex(rs.a)
    return a, u, a * a + 6 * a


def rational_triple(rs: RationalSolutionSpec, x):
    """``(a/u, (a^2+6a)/u^2, (a^2+6a)(a+3)/u^3)`` with ``u = x - c``.

    Scalar ``x`` gives a :class:`Triple`; an array gives shape ``(N, 3)``.
    """
    a, u, s = _rational_parts(rs, x)
    out = np.stack([a / u, s / u ** 2, s * (a + 3) / u ** 3], axis=-1)
    return Triple(*out) if out.ndim == 1 else out


def rational_derivative(rs: RationalSolutionSpec, x):
    """Closed-form x-derivative of :func:`rational_triple`."""
    a, u, s = _rational_parts(rs, x)
    out = np.stack([-a / u ** 2, -2 * s / u ** 3, -3 * s * (a + 3) / u ** 4],
                   axis=-1)
    return Triple(*out) if out.ndim == 1 else out


def rational_trajectory(rs: RationalSolutionSpec, x0: float, x1: float):
    """Exact trajectory of a rational solution on ``[x0, x1]``."""
    from .odeint import AnalyticTrajectory

    if not (x1 > x0):
        raise ValueError("need x1 > x0")
    return AnalyticTrajectory(
        x0=float(x0), x1=float(x1),
        state=lambda xs: rational_triple(rs, np.atleast_1d(xs)),
        derivative=lambda xs: rational_derivative(rs, np.atleast_1d(xs)),
        label=f"rational k={rs.parameter} a={rs.a} c={rs.c}")
