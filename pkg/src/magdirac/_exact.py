"""Exact Gaussian-rational scalars and rational parsing helpers.

Every algebraic module of the package works over Q(i).  Scalars are
stored as pairs of ``gmpy2.mpq`` which keeps the hot loops of the Moyal
product and the Hodge decomposition fast enough for pure Python.
"""
from __future__ import annotations

from fractions import Fraction
import numbers

from gmpy2 import mpq

__all__ = ["QI", "qi", "as_rational", "fmt_rational", "parse_rational", "I", "ONE", "ZERO"]

_MPQ = type(mpq(0))


def as_rational(x):
    """Convert ``x`` to an ``mpq``; accepts ints, Fractions, mpq and "p/q" strings."""
    if isinstance(x, _MPQ):
        return x
    if isinstance(x, (int, Fraction)):
        return mpq(x.numerator, x.denominator) if isinstance(x, Fraction) else mpq(x)
    if isinstance(x, str):
        return parse_rational(x)
    if isinstance(x, numbers.Rational):
        return mpq(int(x.numerator), int(x.denominator))
    raise TypeError(f"cannot convert {x!r} to an exact rational")


def parse_rational(s: str):
    """Parse ``"p/q"``, ``"p"`` or a terminating decimal such as ``"0.25"``."""
    s = s.strip()
    if not s:
        raise ValueError("empty rational literal")
    try:
        if "/" in s:
            p, q = s.split("/")
            return mpq(int(p), int(q))
        return mpq(Fraction(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad rational literal {s!r}") from exc


def fmt_rational(q) -> str:
    """Format a rational as ``"p/q"`` (integers print without denominator)."""
    return str(as_rational(q))


class QI:
    """Exact complex rational ``re + i*im``.

    Mixed arithmetic with Python floats or complex numbers degrades to
    ``complex``; this is how float-mode symbols (for instance after an
    irrational symplectic substitution) flow through the same code.
    """

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = as_rational(re)
        self.im = as_rational(im)

    @staticmethod
    def _mk(re, im):
        z = object.__new__(QI)
        z.re = re
        z.im = im
        return z

    # -- conversions -----------------------------------------------------
    @classmethod
    def coerce(cls, x):
        if isinstance(x, QI):
            return x
        if isinstance(x, complex):
            raise TypeError("complex floats are not exact")
        return cls._mk(as_rational(x), mpq(0))

    def _float(self):
        # real exact values mix with floats as floats
        return float(self.re) if self.im == 0 else complex(self)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def conjugate(self):
        return QI._mk(self.re, -self.im)

    def is_real(self) -> bool:
        return self.im == 0

    # -- arithmetic ------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, QI):
            return QI._mk(self.re + o.re, self.im + o.im)
        if isinstance(o, (float, complex)):
            return self._float() + o
        return QI._mk(self.re + as_rational(o), self.im)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, QI):
            return QI._mk(self.re - o.re, self.im - o.im)
        if isinstance(o, (float, complex)):
            return self._float() - o
        return QI._mk(self.re - as_rational(o), self.im)

    def __rsub__(self, o):
        return (-self) + o

    def __neg__(self):
        return QI._mk(-self.re, -self.im)

    def __mul__(self, o):
        if isinstance(o, QI):
            a, b, c, d = self.re, self.im, o.re, o.im
            return QI._mk(a * c - b * d, a * d + b * c)
        if isinstance(o, (float, complex)):
            return self._float() * o
        r = as_rational(o)
        return QI._mk(self.re * r, self.im * r)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, (float, complex)):
            return self._float() / o
        o = QI.coerce(o)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero in Q(i)")
        a, b, c, d = self.re, self.im, o.re, o.im
        return QI._mk((a * c + b * d) / den, (b * c - a * d) / den)

    def __rtruediv__(self, o):
        return QI.coerce(o) / self

    def __pow__(self, n: int):
        if n < 0:
            return (ONE / self) ** (-n)
        out, base = ONE, self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- comparisons -----------------------------------------------------
    def __eq__(self, o):
        if isinstance(o, QI):
            return self.re == o.re and self.im == o.im
        if isinstance(o, complex):
            return complex(self) == o
        try:
            return self.im == 0 and self.re == as_rational(o)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __abs__(self):
        return abs(complex(self))

    def __repr__(self):
        if self.im == 0:
            return f"QI({self.re})"
        return f"QI({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*i"
        return f"({self.re}{'+' if self.im > 0 else ''}{self.im}*i)"


def qi(re=0, im=0) -> QI:
    """Shorthand constructor for :class:`QI`."""
    return QI(re, im)


ZERO = QI(0)
ONE = QI(1)
I = QI(0, 1)

# powers of i: index k mod 4
IPOW = (QI(1), QI(0, 1), QI(-1), QI(0, -1))


def times_ipow(z, k: int, r):
    """Return ``z * i**k * r`` for a rational ``r`` without building ``i**k``."""
    k &= 3
    if isinstance(z, QI):
        a, b = z.re * r, z.im * r
        if k == 0:
            return QI._mk(a, b)
        if k == 1:
            return QI._mk(-b, a)
        if k == 2:
            return QI._mk(-a, -b)
        return QI._mk(b, -a)
    return z * (1j ** k) * float(r)


def coeff_abs(z) -> float:
    """Magnitude of an exact or float coefficient."""
    return abs(complex(z))
