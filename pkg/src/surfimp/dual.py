"""Minimal forward-mode dual numbers for differentiating scalar closed forms.

A Dual carries (value, derivative) and propagates exact derivatives through
+, -, *, /, powers, and sqrt.  Seed the variable of interest with derivative
1.0 and read the derivative off the result; everything here stays scalar,
which is all the closed-form impedance expressions need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Dual:
    val: float
    der: float = 0.0

    @classmethod
    def variable(cls, x: float) -> "Dual":
        return cls(float(x), 1.0)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        return Dual(self.val + other, self.der)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        return Dual(self.val - other, self.der)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.der)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.der * other.val + self.val * other.der)
        return Dual(self.val * other, self.der * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val / other.val,
                (self.der * other.val - self.val * other.der) / (other.val * other.val),
            )
        return Dual(self.val / other, self.der / other)

    def __rtruediv__(self, other):
        return Dual(other / self.val, -other * self.der / (self.val * self.val))

    def __pow__(self, exponent: float):
        v = self.val ** exponent
        return Dual(v, exponent * self.val ** (exponent - 1) * self.der)

    def sqrt(self) -> "Dual":
        r = math.sqrt(self.val)
        return Dual(r, 0.5 * self.der / r)

    def __float__(self):
        return float(self.val)


def sqrt(x):
    """sqrt dispatching on Dual vs plain numbers."""
    return x.sqrt() if isinstance(x, Dual) else math.sqrt(x)


def value(x) -> float:
    return x.val if isinstance(x, Dual) else float(x)


def derivative(x) -> float:
    return x.der if isinstance(x, Dual) else 0.0
