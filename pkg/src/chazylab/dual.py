"""First-order forward-mode dual numbers ``v + d*eps`` with ``eps^2 = 0``.

Used to push x-derivatives through the transform formulas: the ``der``
part of every intermediate is the exact chain-rule derivative, so no
finite differences are involved. Works on complex scalars and numpy arrays.
"""

from __future__ import annotations

import numpy as np


class Dual:
    __slots__ = ("val", "der")
    # make ndarray <op> Dual defer to the reflected Dual method
    __array_ufunc__ = None

    def __init__(self, val, der=0.0):
        self.val = val
        self.der = der

    @staticmethod
    def lift(x) -> "Dual":
        return x if isinstance(x, Dual) else Dual(x, 0.0)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        return Dual(self.val + other, self.der)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        return Dual(self.val - other, self.der)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.der)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.der * other.val + self.val * other.der)
        return Dual(self.val * other, self.der * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.val / other.val
            return Dual(q, (self.der - q * other.der) / other.val)
        return Dual(self.val / other, self.der / other)

    def __rtruediv__(self, other):
        q = other / self.val
        return Dual(q, -q * self.der / self.val)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("Dual only supports integer powers")
        if n == 0:
            return Dual(np.ones_like(self.val), np.zeros_like(self.der * self.val))
        if n < 0:
            return 1.0 / self ** (-n)
        return Dual(self.val ** n, n * self.val ** (n - 1) * self.der)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.der!r})"


def value(x):
    return x.val if isinstance(x, Dual) else x


def derivative(x):
    return x.der if isinstance(x, Dual) else 0.0 * np.asarray(x)
