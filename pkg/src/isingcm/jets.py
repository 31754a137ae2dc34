"""Second-order forward-mode jets in a single variable.

A :class:`Jet` carries ``(f, f', f'')`` through arithmetic and elementary
functions, so derivatives of the closed-form transfer-matrix quantities with
respect to the field come out by the chain rule without hand expansion.
Components may be floats or numpy arrays (broadcasting applies).
"""

import numpy as np


class Jet:
    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1=0.0, d2=0.0):
        self.v = v
        self.d1 = d1
        self.d2 = d2

    @classmethod
    def variable(cls, x):
        return cls(x, 1.0, 0.0)

    def __repr__(self):
        return f"Jet({self.v!r}, {self.d1!r}, {self.d2!r})"

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.v + other.v, self.d1 + other.d1, self.d2 + other.d2)
        return Jet(self.v + other, self.d1, self.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(
                self.v * other.v,
                self.d1 * other.v + self.v * other.d1,
                self.d2 * other.v + 2.0 * self.d1 * other.d1 + self.v * other.d2,
            )
        return Jet(self.v * other, self.d1 * other, self.d2 * other)

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.v
        return Jet(inv, -self.d1 * inv**2, (2.0 * self.d1**2 * inv - self.d2) * inv**2)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.v / other, self.d1 / other, self.d2 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def chain(self, f0, f1, f2):
        """Compose with a scalar function whose value and first two derivatives at ``self.v`` are given."""
        return Jet(f0, f1 * self.d1, f2 * self.d1**2 + f1 * self.d2)

    def ipow(self, n):
        """Integer power ``self**n`` for an integer scalar or array ``n >= 1``.

        Safe at ``v == 0``: terms with a negative exponent are masked rather
        than evaluated.
        """
        n = np.asarray(n)
        v = np.asarray(self.v, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
            p0 = v**n
            p1 = np.where(n >= 1, n * v ** np.maximum(n - 1, 0), 0.0)
            p2 = np.where(n >= 2, n * (n - 1) * v ** np.maximum(n - 2, 0), 0.0)
        return self.chain(p0, p1, p2)


def exp(x):
    e = np.exp(x.v)
    return x.chain(e, e, e)


def log(x):
    return x.chain(np.log(x.v), 1.0 / x.v, -1.0 / x.v**2)


def log1p(x):
    u = 1.0 + x.v
    return x.chain(np.log1p(x.v), 1.0 / u, -1.0 / u**2)


def sqrt(x):
    s = np.sqrt(x.v)
    return x.chain(s, 0.5 / s, -0.25 / (s * x.v))


def sinh(x):
    return x.chain(np.sinh(x.v), np.cosh(x.v), np.sinh(x.v))


def cosh(x):
    return x.chain(np.cosh(x.v), np.sinh(x.v), np.cosh(x.v))
