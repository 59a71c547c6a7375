"""Literal parsing and CSV trajectory files."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange

TRIPLE_HEADER = ["x", "P_re", "P_im", "Q_re", "Q_im", "R_re", "R_im"]
HALPHEN_HEADER = ["x", "w1_re", "w1_im", "w2_re", "w2_im", "w3_re", "w3_im"]

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX = re.compile(rf"^\s*([+-]?{_NUM})\s*(?:([+-])\s*({_NUM})?\s*i)?\s*$")
_IMAG = re.compile(rf"^\s*([+-]?)({_NUM})?\s*i\s*$")


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` / ``a-bi`` (``a`` alone and ``bi`` alone also accepted)."""
    m = _COMPLEX.match(text)
    if m:
        re_part = float(m.group(1))
        if m.group(2) is None:
            return complex(re_part, 0.0)
        im = float(m.group(3)) if m.group(3) else 1.0
        return complex(re_part, -im if m.group(2) == "-" else im)
    m = _IMAG.match(text)
    if m:
        im = float(m.group(2)) if m.group(2) else 1.0
        return complex(0.0, -im if m.group(1) == "-" else im)
    raise ValueError(f"cannot parse complex literal {text!r} (expected a+bi)")


def parse_complex_list(text: str, n: int = 3) -> np.ndarray:
    parts = [p for p in text.split(",")]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated complex values, got {len(parts)}")
    return np.array([parse_complex(p) for p in parts])


def format_complex(z: complex) -> str:
    z = complex(z)
    sign = "-" if np.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real:.17g}{sign}{abs(z.imag):.17g}i"


def write_csv(path_or_file, xs, states, header=TRIPLE_HEADER):
    """Write samples with 17 significant digits (exact float round trip)."""
    xs = np.asarray(xs, dtype=float)
    states = np.asarray(states, dtype=complex)

    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, s in zip(xs, states):
            row = [f"{x:.17g}"]
            for z in s:
                row += [f"{z.real:.17g}", f"{z.imag:.17g}"]
            w.writerow(row)

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)


def read_csv(path, header=None):
    """Read a trajectory CSV; returns ``(xs, states, header)``.

    With ``header=None`` either known header is accepted.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    head = [h.strip() for h in rows[0]]
    allowed = [header] if header is not None else [TRIPLE_HEADER, HALPHEN_HEADER]
    if head not in allowed:
        raise ValueError(f"{path}: unexpected header {','.join(head)}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 7:
            raise ValueError(f"{path}:{lineno}: expected 7 columns, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value") from None
    if not data:
        raise ValueError(f"{path}: no samples")
    arr = np.array(data)
    states = arr[:, 1::2] + 1j * arr[:, 2::2]
    return arr[:, 0], states, head


@dataclass(frozen=True, eq=False)
class SampledTrajectory:
    """Samples read from a file; state lookups only at stored ``x`` values."""

    xs: np.ndarray
    ys: np.ndarray
    label: str = ""
    status: str = "completed"

    def __post_init__(self):
        if len(self.xs) < 2 or np.any(np.diff(self.xs) <= 0):
            raise ValueError("sample x values must be strictly increasing (at least two)")

    @property
    def x0(self) -> float:
        return float(self.xs[0])

    @property
    def x_end(self) -> float:
        return float(self.xs[-1])

    @property
    def completed(self) -> bool:
        return True

    def grid(self, n=None):
        return self.xs.copy()

    def sample(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        i = np.clip(np.searchsorted(self.xs, x), 0, len(self.xs) - 1)
        if not np.all(self.xs[i] == x):
            raise OutOfRange("sampled trajectory is only defined at its stored x values")
        out = self.ys[i]
        return out[0] if scalar else out
