"""Residual, commutation and audit checks for solutions and transforms."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .core import (RationalSolutionSpec, SystemSpec, admissible_residues,
                   pointwise_residual, rational_trajectory, system_rhs)
from .errors import BranchCollision, DegenerateInput, MultipleRoot
from .odeint import integrate
from .transforms import (AppliedTransform, _poly_parts, _root_rate,
                         _scale, apply, aux_closure, get, identity_root, roots_at)

logger = logging.getLogger(__name__)

PASS_THRESHOLD = 1e-6
N_CHECK = 200
FD_STEP = 1e-5
AUDIT_INTERVAL = (-0.125, 0.125)
PASS_RATIO = 0.95
DEGENERATE_CAP = 0.20
IC_FLOOR = 0.1

_TRACKING_ERRORS = (DegenerateInput, BranchCollision, MultipleRoot)


@dataclass
class ResidualReport:
    """Outcome of a residual-type check.

    ``status`` is ``"pass"``, ``"fail"`` or ``"degenerate"``; for degenerate
    reports ``reason`` says why and ``argmax_x`` holds the offending x when
    known.
    """

    max_residual: float
    argmax_x: Optional[float]
    samples_checked: int
    status: str
    reason: str = ""
    threshold: float = PASS_THRESHOLD

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def degenerate(self) -> bool:
        return self.status == "degenerate"

    @classmethod
    def from_residuals(cls, xs, res, threshold) -> "ResidualReport":
        res = np.asarray(res, dtype=float)
        if not np.all(np.isfinite(res)):
            i = int(np.argmax(~np.isfinite(res)))
            return cls(float("inf"), float(xs[i]), len(res), "fail", "non-finite residual",
                       threshold)
        i = int(np.argmax(res))
        worst = float(res[i])
        return cls(worst, float(xs[i]), len(res),
                   "pass" if worst <= threshold else "fail", "", threshold)

    @classmethod
    def degenerate_at(cls, reason, x=None, threshold=PASS_THRESHOLD) -> "ResidualReport":
        return cls(float("nan"), x, 0, "degenerate", reason, threshold)

    def to_dict(self) -> dict:
        return asdict(self)


def _grid(traj, n_check):
    if n_check < 2:
        raise ValueError("n_check must be at least 2")
    return np.linspace(traj.x0, traj.x_end, int(n_check))


def verify_trajectory(spec: SystemSpec, traj, n_check: int = N_CHECK,
                      threshold: float = PASS_THRESHOLD) -> ResidualReport:
    """Compare the interpolant derivative with the system at ``n_check`` points.

    A trajectory that stopped early (movable pole, step failure) is reported
    as degenerate.
    """
    if not traj.completed:
        return ResidualReport.degenerate_at(
            f"trajectory {traj.status}", getattr(traj, "x_stop", None), threshold)
    xs = _grid(traj, n_check)
    try:
        states, derivs = traj.sample(xs), traj.derivative(xs)
    except _TRACKING_ERRORS as exc:
        return ResidualReport.degenerate_at(str(exc), getattr(exc, "x", None), threshold)
    return ResidualReport.from_residuals(xs, pointwise_residual(spec, states, derivs),
                                         threshold)


def fd_derivative(traj, xs, h: float = FD_STEP) -> np.ndarray:
    """Centred difference of ``traj.sample``.

    Within ``h`` of an end the second-order one-sided stencil
    ``(-3 f(x) + 4 f(x+h) - f(x+2h)) / 2h`` (mirrored at the right end) is used.
    """
    xs = np.asarray(xs, dtype=float)
    out = np.empty((len(xs), np.shape(traj.sample(traj.x0))[-1]), dtype=complex)
    left = xs - h < traj.x0
    right = ~left & (xs + h > traj.x_end)
    mid = ~(left | right)
    if mid.any():
        x = xs[mid]
        out[mid] = (traj.sample(x + h) - traj.sample(x - h)) / (2 * h)
    for mask, s in ((left, 1.0), (right, -1.0)):
        if mask.any():
            x = xs[mask]
            f0, f1, f2 = traj.sample(x), traj.sample(x + s * h), traj.sample(x + 2 * s * h)
            out[mask] = s * (-3 * f0 + 4 * f1 - f2) / (2 * h)
    return out


def transform_residual(entry, variant: str, branch: int, source_traj,
                       n_check: int = N_CHECK, threshold: float = PASS_THRESHOLD,
                       method: str = "analytic") -> ResidualReport:
    """Residual of the branch-tracked image of ``source_traj`` in the target system.

    ``method="analytic"`` differentiates the map exactly (implicit root
    derivative, source right-hand side); ``method="fd"`` uses centred finite
    differences of the image with step 1e-5 instead.
    """
    entry = get(entry)
    if not source_traj.completed:
        return ResidualReport.degenerate_at(
            f"source trajectory {source_traj.status}",
            getattr(source_traj, "x_stop", None), threshold)
    try:
        image = AppliedTransform(entry, variant, branch, source_traj, n_grid=n_check)
        xs = image.xs
        img, dimg, _ = image.evaluate(xs)
        if method == "fd":
            dimg = fd_derivative(image, xs)
        elif method != "analytic":
            raise ValueError(f"unknown method {method!r}")
    except _TRACKING_ERRORS as exc:
        return ResidualReport.degenerate_at(f"{type(exc).__name__}: {exc}",
                                            getattr(exc, "x", None), threshold)
    return ResidualReport.from_residuals(
        xs, pointwise_residual(entry.target_spec, img, dimg), threshold)


def _hybrid(a, b) -> np.ndarray:
    return np.max(np.abs(a - b) / (1.0 + np.abs(b)), axis=-1)


def commutation_check(entry, variant: str, branch: int, ic, x0: float, x1: float,
                      tol: float = 1e-10, n_check: int = N_CHECK,
                      threshold: float = PASS_THRESHOLD) -> ResidualReport:
    """Map-then-flow against flow-then-map.

    Integrates the source system from ``ic`` and maps it pointwise along the
    tracked branch; separately maps ``ic`` and integrates the target system.
    Reports the sup over ``n_check`` points of ``|a - b| / (1 + |b|)``.
    """
    entry = get(entry)
    ic = np.asarray(ic, dtype=complex)
    src = integrate(_kernels.chazy_rhs, ic, x0, x1, tol,
                    params=entry.source_spec.kernel_params, label=f"{entry.id} source")
    if not src.completed:
        return ResidualReport.degenerate_at(f"source trajectory {src.status}",
                                            src.x_stop, threshold)
    try:
        image = AppliedTransform(entry, variant, branch, src, n_grid=n_check)
        xs = image.xs
        mapped = image.sample(xs)
        r0 = image.tracked[0] if entry.poly is not None else None
        start = apply(entry, variant, ic, r0).as_array()
    except _TRACKING_ERRORS as exc:
        return ResidualReport.degenerate_at(f"{type(exc).__name__}: {exc}",
                                            getattr(exc, "x", None), threshold)
    tgt = integrate(_kernels.chazy_rhs, start, x0, x1, tol,
                    params=entry.target_spec.kernel_params, label=f"{entry.id} target")
    if not tgt.completed:
        return ResidualReport.degenerate_at(f"target trajectory {tgt.status}",
                                            tgt.x_stop, threshold)
    return ResidualReport.from_residuals(xs, _hybrid(mapped, tgt.sample(xs)), threshold)


# ---------------------------------------------------------------------------
# root and auxiliary consistency
# ---------------------------------------------------------------------------


def root_conservation(entry, branch: int, ic, x0: float, x1: float,
                      tol: float = 1e-10, n_check: int = N_CHECK) -> float:
    """Max relative ``|F(root)|`` when the root is integrated, never re-solved.

    The root is appended to the state and evolved with its implicit
    derivative alongside the source system.
    """
    entry = get(entry)
    if entry.poly is None:
        raise ValueError(f"{entry.id} has no defining polynomial")
    spec = entry.source_spec
    ic = np.asarray(ic, dtype=complex)
    r0 = roots_at(entry, ic)[branch]

    def rhs(y):
        d = system_rhs(spec, y[:3])
        rate, _ = _root_rate(entry, y[1], y[2], d[1], d[2], y[3])
        return np.array([d[0], d[1], d[2], rate])

    traj = integrate(rhs, np.append(ic, r0), x0, x1, tol, label=f"{entry.id} root flow")
    xs = _grid(traj, n_check)
    ys = traj.sample(xs)
    worst = 0.0
    for y in ys:
        coeffs = entry.poly(y[1], y[2])
        f, _ = _poly_parts(coeffs, y[3])
        worst = max(worst, abs(f) / _scale(coeffs, y[3]))
    return float(worst)


def aux_closure_check(entry, branch: int, source_traj, n_check: int = N_CHECK) -> float:
    """Worst aux-polynomial defect along a tracked branch."""
    image = AppliedTransform(entry, get(entry).preferred, branch, source_traj,
                             n_grid=n_check)
    S = source_traj.sample(image.xs)
    return aux_closure(image.entry, S[:, 1], S[:, 2], image.tracked)


def inverse_pair_identity(source_traj, n_check: int = N_CHECK) -> float:
    """Sup deviation of T6 (at root ``Q^2/(80R)``) after T7 from the identity.

    For each checkpoint the T6 root nearest to ``Q^2/(80R)`` is used.
    """
    t6, t7 = get("T6"), get("T7")
    xs = _grid(source_traj, n_check)
    S = source_traj.sample(xs)
    worst = 0.0
    for s in S:
        mid = apply(t7, "statement", s)
        target = identity_root(s[1], s[2])
        roots = roots_at(t6, mid)
        r = roots[np.argmin(np.abs(roots - target))]
        back = apply(t6, "statement", mid, r).as_array()
        worst = max(worst, float(np.max(np.abs(back - s) / (1.0 + np.abs(s)))))
    return worst


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------


def sample_source_ics(rng: np.random.Generator, n: int) -> np.ndarray:
    """Triples uniform in the unit complex disc with ``|Q|, |R| >= 0.1``."""
    out = []
    while len(out) < n:
        r = np.sqrt(rng.uniform(size=3))
        t = r * np.exp(2j * np.pi * rng.uniform(size=3))
        if abs(t[1]) >= IC_FLOOR and abs(t[2]) >= IC_FLOOR:
            out.append(t)
    return np.array(out)


@dataclass
class BranchStats:
    index: int
    trials: int = 0
    passes: int = 0
    failures: int = 0
    degenerate: int = 0
    worst_residual: Optional[float] = None

    def add(self, report: ResidualReport):
        self.trials += 1
        if report.degenerate:
            self.degenerate += 1
            return
        if report.passed:
            self.passes += 1
        else:
            self.failures += 1
        r = report.max_residual
        if self.worst_residual is None or not r <= self.worst_residual:
            self.worst_residual = float(r)

    @property
    def pass_ratio(self) -> Optional[float]:
        n = self.passes + self.failures
        return self.passes / n if n else None


@dataclass
class VariantReport:
    name: str
    branches: list
    verdict: str = "inconclusive"

    def decide(self):
        verdict = "pass"
        for b in self.branches:
            ratio = b.pass_ratio
            if b.degenerate > DEGENERATE_CAP * b.trials or ratio is None:
                return "inconclusive"
            if ratio < PASS_RATIO:
                verdict = "fail"
        return verdict

    @property
    def worst_residual(self) -> Optional[float]:
        vals = [b.worst_residual for b in self.branches if b.worst_residual is not None]
        return max(vals) if vals else None


@dataclass
class AuditReport:
    """Per-variant, per-branch trial counts and verdicts for one entry.

    ``exceptional`` lists the rational-solution checks, kept out of the
    trial counts.
    """

    entry: str
    trials: int
    seed: int
    variants: list
    exceptional: list = field(default_factory=list)
    threshold: float = PASS_THRESHOLD

    def variant(self, name) -> VariantReport:
        for v in self.variants:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def passing(self) -> list:
        return [v.name for v in self.variants if v.verdict == "pass"]

    def to_dict(self) -> dict:
        return {
            "entry": self.entry,
            "trials": self.trials,
            "seed": self.seed,
            "threshold": self.threshold,
            "variants": [{"name": v.name,
                          "branches": [asdict(b) for b in v.branches],
                          "verdict": v.verdict} for v in self.variants],
            "exceptional": self.exceptional,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "AuditReport":
        variants = [VariantReport(v["name"], [BranchStats(**b) for b in v["branches"]],
                                  v["verdict"]) for v in d["variants"]]
        return cls(d["entry"], d["trials"], d["seed"], variants,
                   d.get("exceptional", []), d.get("threshold", PASS_THRESHOLD))


def exceptional_report(entry, n_check: int = N_CHECK,
                       threshold: float = PASS_THRESHOLD) -> list:
    """Run every variant and branch on the rational solutions of the source k."""
    entry = get(entry)
    x0, x1 = AUDIT_INTERVAL
    out = []
    for a in admissible_residues(entry.source):
        traj = rational_trajectory(RationalSolutionSpec(entry.source, a, -1.0), x0, x1)
        for v in entry.variants:
            for b in range(entry.branch_count):
                rep = transform_residual(entry, v, b, traj, n_check, threshold)
                out.append({"residue": str(a), "variant": v, "branch": b,
                            "status": rep.status,
                            "max_residual": None if rep.degenerate else rep.max_residual})
    return out


def audit(entry, trials: int = 100, seed: int = 0, n_check: int = N_CHECK,
          tol: float = 1e-10, threshold: float = PASS_THRESHOLD,
          exceptional: bool = True) -> AuditReport:
    """Seeded random-trial audit of every variant and branch of ``entry``.

    A variant passes when, on every branch, at least 95% of the
    non-degenerate trials pass; more than 20% degenerate trials on any
    branch makes it inconclusive.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    entry = get(entry)
    rng = np.random.default_rng(seed)
    ics = sample_source_ics(rng, trials)
    stats = {v: [BranchStats(b) for b in range(entry.branch_count)] for v in entry.variants}
    x0, x1 = AUDIT_INTERVAL
    params = entry.source_spec.kernel_params
    for i, ic in enumerate(ics):
        traj = integrate(_kernels.chazy_rhs, ic, x0, x1, tol, params=params,
                         label=f"{entry.id} trial {i}")
        for v in entry.variants:
            for b in range(entry.branch_count):
                rep = transform_residual(entry, v, b, traj, n_check, threshold)
                if rep.degenerate:
                    logger.debug("%s %s branch %d trial %d degenerate: %s",
                                 entry.id, v, b, i, rep.reason)
                stats[v][b].add(rep)
    variants = []
    for v in entry.variants:
        rep = VariantReport(v, stats[v])
        rep.verdict = rep.decide()
        variants.append(rep)
    extra = exceptional_report(entry, n_check, threshold) if exceptional else []
    return AuditReport(entry.id, trials, seed, variants, extra, threshold)


# ---------------------------------------------------------------------------
# sampled trajectories (CSV input)
# ---------------------------------------------------------------------------


def verify_samples(spec: SystemSpec, xs, states, tol: float = 1e-10,
                   threshold: float = PASS_THRESHOLD) -> ResidualReport:
    """Check a sampled trajectory by one-step shooting.

    From every sample the system is integrated to the next sample's ``x``
    and compared there (``|a - b| / (1 + |b|)``).
    """
    xs = np.asarray(xs, dtype=float)
    states = np.asarray(states, dtype=complex)
    if len(xs) < 2:
        raise ValueError("need at least two samples")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("sample x values must be strictly increasing")
    res = np.zeros(len(xs))
    for i in range(len(xs) - 1):
        seg = integrate(_kernels.chazy_rhs, states[i], xs[i], xs[i + 1], tol,
                        params=spec.kernel_params)
        if not seg.completed:
            return ResidualReport.degenerate_at(f"segment {seg.status}", seg.x_stop,
                                                threshold)
        res[i + 1] = _hybrid(seg.ys[-1], states[i + 1])
    return ResidualReport.from_residuals(xs, res, threshold)
