"""Adaptive Dormand-Prince 5(4) integration with dense output.

The state is a complex vector integrated along a real ``x``. Steps are
controlled on the embedded error estimate with a mixed absolute/relative
scale ``tol * max(1, |y|)`` and a PI step-size controller. Integration
stops cleanly (status ``"singular"``) once ``max|y|`` exceeds 1e8, the
signature of a movable pole.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from ._accel import python_version
from .errors import OutOfRange

logger = logging.getLogger(__name__)

TOL_RANGE = (1e-14, 1e-2)
MAX_STEPS = 200_000
_EDGE = 1e-12

_STATUS = {
    _kernels.STATUS_COMPLETED: ("completed", ""),
    _kernels.STATUS_SINGULAR: ("singular", "state norm exceeded 1e8"),
    _kernels.STATUS_UNDERFLOW: ("failed", "StepSizeUnderflow"),
    _kernels.STATUS_NONFINITE: ("failed", "NonFiniteState"),
    _kernels.STATUS_MAXSTEPS: ("failed", "step budget exhausted"),
}


class _Base:
    x0: float
    x_end: float
    status: str

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def _check(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.x0, self.x_end
        slack = _EDGE * max(1.0, abs(lo), abs(hi))
        if np.any(x < lo - slack) or np.any(x > hi + slack):
            raise OutOfRange(f"x outside covered interval [{lo}, {hi}]")
        return np.clip(x, lo, hi)

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.x0, self.x_end, n)


@dataclass(frozen=True, eq=False)
class DenseTrajectory(_Base):
    """Output of :func:`integrate`.

    ``xs``/``ys`` are the accepted mesh points; ``rcont[i]`` holds the five
    continuous-extension vectors of step ``i``. ``x_end`` is where the
    trajectory stops, which is before the requested end for singular or
    failed runs.
    """

    xs: np.ndarray
    ys: np.ndarray
    rcont: np.ndarray
    status: str
    tol: float
    x_requested: float
    reason: str = ""
    label: str = ""

    @property
    def x0(self) -> float:
        return float(self.xs[0])

    @property
    def x_end(self) -> float:
        return float(self.xs[-1])

    @property
    def x_stop(self) -> Optional[float]:
        return None if self.completed else self.x_end

    @property
    def n_steps(self) -> int:
        return len(self.xs) - 1

    def _locate(self, x):
        x = self._check(x)
        if self.n_steps == 0:
            return x, np.zeros(x.shape, dtype=int), np.zeros(x.shape), np.ones(x.shape)
        idx = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self.n_steps - 1)
        h = self.xs[idx + 1] - self.xs[idx]
        theta = (x - self.xs[idx]) / h
        return x, idx, theta, h

    def sample(self, x) -> np.ndarray:
        """Dense-output state at ``x`` (scalar -> (d,), array -> (N, d))."""
        scalar = np.ndim(x) == 0
        x, idx, th, _ = self._locate(x)
        if self.n_steps == 0:
            out = np.repeat(self.ys[:1], len(x), axis=0)
        else:
            r = self.rcont[idx]
            t = th[:, None]
            t1 = 1.0 - t
            out = r[:, 0] + t * (r[:, 1] + t1 * (r[:, 2] + t * (r[:, 3] + t1 * r[:, 4])))
            # mesh points come back exactly as stored
            hit = np.searchsorted(self.xs, x)
            hit = np.clip(hit, 0, len(self.xs) - 1)
            exact = self.xs[hit] == x
            out[exact] = self.ys[hit[exact]]
        return out[0] if scalar else out

    def derivative(self, x) -> np.ndarray:
        """x-derivative of the dense-output interpolant."""
        scalar = np.ndim(x) == 0
        x, idx, th, h = self._locate(x)
        if self.n_steps == 0:
            out = np.zeros((len(x), self.ys.shape[1]), dtype=complex)
        else:
            r = self.rcont[idx]
            t = th[:, None]
            out = (r[:, 1] + (1 - 2 * t) * r[:, 2] + (2 * t - 3 * t * t) * r[:, 3]
                   + (2 * t * (1 - t) ** 2 - 2 * t * t * (1 - t)) * r[:, 4]) / h[:, None]
        return out[0] if scalar else out


@dataclass(frozen=True, eq=False)
class AnalyticTrajectory(_Base):
    """Trajectory given by closed-form state and derivative functions."""

    x0: float
    x1: float
    state: Callable = field(repr=False)
    derivative_fn: Callable = field(repr=False, default=None)
    label: str = ""
    status: str = "completed"

    def __init__(self, x0, x1, state, derivative, label=""):
        object.__setattr__(self, "x0", float(x0))
        object.__setattr__(self, "x1", float(x1))
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "derivative_fn", derivative)
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "status", "completed")

    @property
    def x_end(self) -> float:
        return self.x1

    @property
    def x_stop(self):
        return None

    def sample(self, x):
        scalar = np.ndim(x) == 0
        out = np.asarray(self.state(self._check(x)), dtype=complex)
        return out[0] if scalar else out

    def derivative(self, x):
        scalar = np.ndim(x) == 0
        out = np.asarray(self.derivative_fn(self._check(x)), dtype=complex)
        return out[0] if scalar else out


_SYSTEMS = {_kernels.chazy_rhs: _kernels.SYSTEM_CHAZY,
            _kernels.halphen_rhs: _kernels.SYSTEM_HALPHEN}


def _check_args(tol, x0, x1):
    lo, hi = TOL_RANGE
    if not (lo <= tol <= hi):
        raise ValueError(f"tol must lie in [{lo:g}, {hi:g}], got {tol:g}")
    if not (x1 > x0):
        raise ValueError(f"need x1 > x0, got x0={x0}, x1={x1}")


def integrate(rhs: Callable, ic, x0: float, x1: float, tol: float = 1e-10,
              params=None, max_steps: int = MAX_STEPS, label: str = "") -> DenseTrajectory:
    """Integrate ``y' = rhs(y)`` (or ``rhs(y, params)``) from ``x0`` to ``x1``.

    Parameters
    ----------
    rhs : callable
        Either ``rhs(y) -> dy`` or, when ``params`` is given,
        ``rhs(y, params) -> dy``. The built-in kernels
        ``_kernels.chazy_rhs`` and ``_kernels.halphen_rhs`` run through the
        compiled stepper; anything else through the pure-Python one.
    ic : array_like
        Initial state (complex).
    tol : float
        Local error tolerance in [1e-14, 1e-2].

    Returns
    -------
    DenseTrajectory
        Status ``"completed"``, ``"singular"`` (blow-up, ``x_stop`` set) or
        ``"failed"`` (step-size underflow or a non-finite state).
    """
    x0, x1, tol = float(x0), float(x1), float(tol)
    _check_args(tol, x0, x1)
    y0 = np.array(ic, dtype=np.complex128).ravel()
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial condition must be finite")

    system = _SYSTEMS.get(rhs)
    if params is None:
        fn = rhs

        def wrapped(y, _p):
            return np.asarray(fn(y), dtype=np.complex128)

        stepper, system, p = _kernels.python_stepper(), wrapped, None
    else:
        p = np.asarray(params, dtype=np.complex128)
        if system is not None:
            stepper = _kernels.dopri5
        else:
            stepper, system = _kernels.python_stepper(), python_version(rhs)

    xs, ys, rc, code = stepper(system, p, y0, x0, x1, tol, int(max_steps))
    status, reason = _STATUS[int(code)]
    if status != "completed":
        logger.info("integration %s at x=%.6g (%s)", status, xs[-1], reason)
    return DenseTrajectory(xs=np.array(xs), ys=np.array(ys), rcont=np.array(rc),
                           status=status, tol=tol, x_requested=x1,
                           reason=reason, label=label)


def sample(traj, x):
    """Dense-output state of ``traj`` at ``x``; raises OutOfRange outside it."""
    return traj.sample(x)


def sample_derivative(traj, x):
    return traj.derivative(x)
