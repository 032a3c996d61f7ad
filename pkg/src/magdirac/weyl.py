"""Filtered matrix-valued Weyl algebra in 2m+1 degrees of freedom.

Phase variables are ``(x_0, …, x_{2m}; ξ_0, …, ξ_{2m})`` together with the
semiclassical parameter ``h``.  They split into

* weighted variables ``ξ_0``, ``x' = (x_1..x_m)``, ``ξ' = (ξ_1..ξ_m)``
  (weight 1) and ``h`` (weight 2);
* transverse variables ``x_0``, ``x'' = (x_{m+1}..x_{2m})``, ``ξ''``
  (weight 0), which only enter through power-series coefficients.

A monomial is stored as an exponent tuple of length ``4m+3`` laid out as
``(x_0..x_2m, ξ_0..ξ_2m, h)``.  Matrix coefficients are stored in the basis
``c(e_I)`` of even Clifford blades, which is a basis of ``End(S)``; this
makes the matrix part of a product a signed bitmask XOR.

Truncation
----------
Symbols keep monomials with ``weight ≤ Nw`` and ``weight + transverse ≤
Nw + Mc``.  Both quantities are non-decreasing under the Moyal product,
so the discarded monomials span a two-sided ideal and every operation is
exact modulo it (associativity holds exactly after truncation).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from gmpy2 import mpq

from ._exact import QI, ZERO, ONE, IPOW, as_rational, fmt_rational, times_ipow, coeff_abs
from .clifford import (
    CliffordMatrix,
    blade_product,
    clifford_dequantize,
    _blade_matrix,
    _mask,
    volume_scalar,
)

__all__ = [
    "PhaseMonomial",
    "GradedSymbol",
    "moyal_product",
    "moyal_bracket",
    "exp_conjugate",
    "SymplecticMap",
    "linear_symplectic_substitute",
    "f0_map",
    "williamson_diagonalize",
    "TransverseSeries",
    "series_ops",
    "CapError",
]


class CapError(ValueError):
    """Raised when two symbols with different truncation caps are combined."""


# ----------------------------------------------------------------------
# exponent bookkeeping
# ----------------------------------------------------------------------

def n_vars(m: int) -> int:
    return 2 * m + 1


@lru_cache(maxsize=None)
def _weight_mask(m: int):
    n = 2 * m + 1
    w = [0] * (2 * n + 1)
    t = [0] * (2 * n + 1)
    t[0] = 1
    w[n] = 1
    for j in range(1, m + 1):
        w[j] = w[n + j] = 1
    for j in range(m + 1, 2 * m + 1):
        t[j] = t[n + j] = 1
    w[2 * n] = 2
    return tuple(w), tuple(t)


def weight(exps, m: int) -> int:
    w, _ = _weight_mask(m)
    return sum(a * b for a, b in zip(exps, w))


def transverse_degree(exps, m: int) -> int:
    _, t = _weight_mask(m)
    return sum(a * b for a, b in zip(exps, t))


@dataclass(frozen=True)
class PhaseMonomial:
    """Readable view of an exponent tuple.

    ``weight = 2*h_pow + xi0_pow + |xprime| + |xiprime|``; the transverse
    exponents ``(x_0, x'', ξ'')`` do not contribute.
    """

    h_pow: int
    xi0_pow: int
    xprime: tuple
    xiprime: tuple
    transverse: tuple

    @property
    def m(self) -> int:
        return len(self.xprime)

    @property
    def weight(self) -> int:
        return 2 * self.h_pow + self.xi0_pow + sum(self.xprime) + sum(self.xiprime)

    def to_exps(self) -> tuple:
        m = self.m
        x0 = self.transverse[0]
        xpp = self.transverse[1 : m + 1]
        xipp = self.transverse[m + 1 :]
        return (x0, *self.xprime, *xpp, self.xi0_pow, *self.xiprime, *xipp, self.h_pow)

    @classmethod
    def from_exps(cls, exps, m: int) -> "PhaseMonomial":
        n = 2 * m + 1
        x, xi, h = exps[:n], exps[n : 2 * n], exps[2 * n]
        return cls(h, xi[0], tuple(x[1 : m + 1]), tuple(xi[1 : m + 1]),
                   (x[0], *x[m + 1 :], *xi[m + 1 :]))


def monomial(m: int, x=None, xi=None, h: int = 0) -> tuple:
    """Exponent tuple from sparse maps ``{index: power}`` for ``x`` and ``ξ``."""
    n = 2 * m + 1
    e = [0] * (2 * n + 1)
    for j, p in (x or {}).items():
        e[j] = p
    for j, p in (xi or {}).items():
        e[n + j] = p
    e[2 * n] = h
    return tuple(e)


# ----------------------------------------------------------------------
# coefficient helpers
# ----------------------------------------------------------------------

def _is_zero(c) -> bool:
    return not c


def _add_into(d: dict, key, val):
    cur = d.get(key)
    new = val if cur is None else cur + val
    if new:
        d[key] = new
    elif cur is not None:
        del d[key]


def _mat_mul(d1: dict, d2: dict) -> dict:
    out = {}
    for a, ca in d1.items():
        for b, cb in d2.items():
            sign, mask = blade_product(a, b)
            _add_into(out, mask, ca * cb if sign > 0 else -(ca * cb))
    return out


# ----------------------------------------------------------------------
# GradedSymbol
# ----------------------------------------------------------------------

class GradedSymbol:
    """Truncated polynomial symbol with ``End(S)``-valued coefficients.

    Parameters
    ----------
    m : int
        Half-dimension (``2m+1`` degrees of freedom, spinor size ``2^m``).
    Nw, Mc : int
        Weight cap and transverse cap.
    terms : dict, optional
        ``{exps: {mask: coeff}}`` with ``mask`` an even Clifford blade
        (bitmask over ``e_0..e_2m``); a scalar symbol only uses mask ``0``.
    """

    __slots__ = ("m", "Nw", "Mc", "terms")

    def __init__(self, m: int, Nw: int, Mc: int, terms=None):
        self.m, self.Nw, self.Mc = int(m), int(Nw), int(Mc)
        self.terms = {}
        if terms:
            cap = self.Nw + self.Mc
            wm, tm = _weight_mask(self.m)
            L = len(wm)
            for exps, mats in terms.items():
                exps = tuple(int(e) for e in exps)
                if len(exps) != L or min(exps) < 0:
                    raise ValueError(f"bad exponent tuple {exps} for m={self.m}")
                w = sum(a * b for a, b in zip(exps, wm))
                if w > self.Nw or w + sum(a * b for a, b in zip(exps, tm)) > cap:
                    continue
                clean = {}
                for mask, c in mats.items():
                    if bin(mask).count("1") & 1:
                        raise ValueError("matrix coefficients must use even Clifford blades")
                    if not isinstance(c, (QI, float, complex)):
                        c = QI.coerce(c)
                    if c:
                        clean[mask] = c
                if clean:
                    self.terms[exps] = clean

    # -- construction ---------------------------------------------------
    @classmethod
    def _raw(cls, m, Nw, Mc, terms):
        s = object.__new__(cls)
        s.m, s.Nw, s.Mc, s.terms = m, Nw, Mc, terms
        return s

    def empty_like(self):
        return GradedSymbol._raw(self.m, self.Nw, self.Mc, {})

    @classmethod
    def scalar(cls, m, Nw, Mc, coeffs: dict):
        """Scalar symbol from ``{exps: coeff}``."""
        return cls(m, Nw, Mc, {e: {0: c} for e, c in coeffs.items()})

    @classmethod
    def constant(cls, m, Nw, Mc, c=1):
        return cls.scalar(m, Nw, Mc, {monomial(m): c})

    @classmethod
    def x(cls, m, Nw, Mc, j: int, power: int = 1):
        return cls.scalar(m, Nw, Mc, {monomial(m, x={j: power}): 1})

    @classmethod
    def xi(cls, m, Nw, Mc, j: int, power: int = 1):
        return cls.scalar(m, Nw, Mc, {monomial(m, xi={j: power}): 1})

    @classmethod
    def hbar(cls, m, Nw, Mc, power: int = 1):
        return cls.scalar(m, Nw, Mc, {monomial(m, h=power): 1})

    @classmethod
    def from_matrices(cls, m, Nw, Mc, terms: dict):
        """Build from ``{exps: CliffordMatrix}`` (any ``2^m`` square matrices)."""
        out = {}
        for e, M in terms.items():
            mv = clifford_dequantize(M, "even")
            out[e] = {_mask(k): v for k, v in mv.terms.items()}
        return cls(m, Nw, Mc, out)

    # -- inspection -----------------------------------------------------
    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_scalar(self) -> bool:
        return all(set(d) <= {0} for d in self.terms.values())

    @property
    def exact(self) -> bool:
        return all(isinstance(c, QI) for d in self.terms.values() for c in d.values())

    def weight_of(self, exps) -> int:
        return weight(exps, self.m)

    def min_weight(self):
        return min((weight(e, self.m) for e in self.terms), default=None)

    def min_total(self):
        """Smallest ``weight + transverse degree`` among stored monomials."""
        return min((weight(e, self.m) + transverse_degree(e, self.m) for e in self.terms), default=None)

    def homogeneous_part(self, w: int) -> "GradedSymbol":
        return GradedSymbol._raw(self.m, self.Nw, self.Mc,
                                 {e: dict(d) for e, d in self.terms.items() if weight(e, self.m) == w})

    def weight_profile(self) -> dict:
        """``{weight: max |coefficient|}`` over stored terms."""
        prof = {}
        for e, d in self.terms.items():
            w = weight(e, self.m)
            prof[w] = max(prof.get(w, 0.0), max(coeff_abs(c) for c in d.values()))
        return prof

    def coefficient_matrix(self, exps) -> CliffordMatrix:
        d = self.terms.get(tuple(exps), {})
        exact = all(isinstance(c, QI) for c in d.values())
        out = CliffordMatrix.zeros(self.m, exact=exact)
        for mask, c in d.items():
            B = _blade_matrix(self.m, mask)
            out = out + (B.scale(c) if exact else CliffordMatrix(self.m, B.to_complex() * complex(c)))
        return out

    def is_self_adjoint(self, tol: float = 0.0) -> bool:
        """Termwise Hermitian coefficients (exact unless ``tol > 0``)."""
        for d in self.terms.values():
            for mask, c in d.items():
                k = bin(mask).count("1")
                z = complex(c) if tol else c
                if k % 4 == 0:
                    bad = (abs(z.imag) > tol) if tol else (QI.coerce(z).im != 0 if isinstance(z, QI) else z.imag != 0)
                else:
                    bad = (abs(z.real) > tol) if tol else (QI.coerce(z).re != 0 if isinstance(z, QI) else z.real != 0)
                if bad:
                    return False
        return True

    def adjoint(self) -> "GradedSymbol":
        out = {}
        for e, d in self.terms.items():
            nd = {}
            for mask, c in d.items():
                k = bin(mask).count("1")
                cc = c.conjugate()
                nd[mask] = cc if k % 4 == 0 else -cc
            out[e] = nd
        return GradedSymbol._raw(self.m, self.Nw, self.Mc, out)

    def is_real_scalar(self) -> bool:
        return self.is_scalar and self.is_self_adjoint()

    # -- arithmetic -----------------------------------------------------
    def _check(self, other):
        if not isinstance(other, GradedSymbol):
            raise TypeError("expected a GradedSymbol")
        if (self.m, self.Nw, self.Mc) != (other.m, other.Nw, other.Mc):
            raise CapError(
                f"incompatible symbols: (m, Nw, Mc) = {(self.m, self.Nw, self.Mc)} vs {(other.m, other.Nw, other.Mc)}"
            )

    def __add__(self, other):
        self._check(other)
        out = {e: dict(d) for e, d in self.terms.items()}
        for e, d in other.terms.items():
            tgt = out.setdefault(e, {})
            for mask, c in d.items():
                _add_into(tgt, mask, c)
            if not tgt:
                del out[e]
        return GradedSymbol._raw(self.m, self.Nw, self.Mc, out)

    def __neg__(self):
        return GradedSymbol._raw(self.m, self.Nw, self.Mc,
                                 {e: {k: -c for k, c in d.items()} for e, d in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "GradedSymbol":
        if not isinstance(c, (QI, float, complex)):
            c = QI.coerce(c)
        if not c:
            return self.empty_like()
        out = {}
        for e, d in self.terms.items():
            nd = {k: v * c for k, v in d.items()}
            nd = {k: v for k, v in nd.items() if v}
            if nd:
                out[e] = nd
        return GradedSymbol._raw(self.m, self.Nw, self.Mc, out)

    def __mul__(self, c):
        if isinstance(c, GradedSymbol):
            raise TypeError("use moyal_product (or a.star(b)) for symbol products")
        return self.scale(c)

    __rmul__ = __mul__

    def star(self, other):
        return moyal_product(self, other)

    def __eq__(self, other):
        if not isinstance(other, GradedSymbol):
            return NotImplemented
        return (self.m, self.Nw, self.Mc) == (other.m, other.Nw, other.Mc) and self.terms == other.terms

    def __hash__(self):
        return id(self)

    def pointwise(self, other) -> "GradedSymbol":
        """Commutative-variable product: polynomial product with matrix multiplication of coefficients."""
        self._check(other)
        out = {}
        for e1, d1 in self.terms.items():
            for e2, d2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                P = _mat_mul(d1, d2)
                if P:
                    tgt = out.setdefault(e, {})
                    for k, v in P.items():
                        _add_into(tgt, k, v)
                    if not tgt:
                        del out[e]
        return GradedSymbol(self.m, self.Nw, self.Mc, out)

    def with_caps(self, Nw: int, Mc: int) -> "GradedSymbol":
        """Same terms re-truncated (or padded) to new caps."""
        return GradedSymbol(self.m, Nw, Mc, self.terms)

    def truncate_weight(self, w: int) -> "GradedSymbol":
        """Drop all terms of weight above ``w`` (caps unchanged)."""
        return GradedSymbol._raw(self.m, self.Nw, self.Mc,
                                 {e: dict(d) for e, d in self.terms.items() if weight(e, self.m) <= w})

    def divide_h(self, power: int = 1) -> "GradedSymbol":
        """Exact division by ``h**power``; every term must carry the factor."""
        L = 2 * (2 * self.m + 1)
        out = {}
        for e, d in self.terms.items():
            if e[L] < power:
                raise ArithmeticError(f"term {e} is not divisible by h^{power}")
            ne = e[:L] + (e[L] - power,)
            out[ne] = dict(d)
        return GradedSymbol._raw(self.m, self.Nw, self.Mc, out)

    def times_h(self, power: int = 1) -> "GradedSymbol":
        L = 2 * (2 * self.m + 1)
        return GradedSymbol(self.m, self.Nw, self.Mc,
                            {e[:L] + (e[L] + power,): d for e, d in self.terms.items()})

    def chop(self, tol: float = 1e-13) -> "GradedSymbol":
        """Remove float coefficients below ``tol`` in magnitude."""
        out = {}
        for e, d in self.terms.items():
            nd = {k: c for k, c in d.items() if isinstance(c, QI) or abs(c) > tol}
            if nd:
                out[e] = nd
        return GradedSymbol._raw(self.m, self.Nw, self.Mc, out)

    def __repr__(self):
        return f"GradedSymbol(m={self.m}, Nw={self.Nw}, Mc={self.Mc}, {len(self.terms)} terms)"

    def pretty(self) -> str:
        n = 2 * self.m + 1
        parts = []
        for e, d in sorted(self.terms.items()):
            mono = []
            for j in range(n):
                if e[j]:
                    mono.append(f"x{j}" + (f"^{e[j]}" if e[j] > 1 else ""))
            for j in range(n):
                if e[n + j]:
                    mono.append(f"ξ{j}" + (f"^{e[n + j]}" if e[n + j] > 1 else ""))
            if e[2 * n]:
                mono.append("h" + (f"^{e[2 * n]}" if e[2 * n] > 1 else ""))
            for mask, c in sorted(d.items()):
                blade = "".join(f"e{j}" for j in range(n) if mask >> j & 1)
                parts.append(f"({c})" + ("*" + "*".join(mono) if mono else "") + (f"·c({blade})" if blade else ""))
        return " + ".join(parts) or "0"

    # -- JSON -----------------------------------------------------------
    def to_json(self) -> dict:
        rows = []
        for e, _ in sorted(self.terms.items()):
            pm = PhaseMonomial.from_exps(e, self.m)
            M = self.coefficient_matrix(e)
            if M.exact:
                mat = CliffordMatrix.to_json(M)["rows"]
            else:
                mat = [[[repr(z.real), repr(z.imag)] for z in row] for row in M.entries]
            rows.append({"h": pm.h_pow, "xi0": pm.xi0_pow, "xp": list(pm.xprime),
                         "xip": list(pm.xiprime), "tv": list(pm.transverse), "mat": mat})
        return {"m": self.m, "Nw": self.Nw, "Mc": self.Mc, "terms": rows}

    @classmethod
    def from_json(cls, data: dict) -> "GradedSymbol":
        m = data["m"]
        mats = {}
        for t in data["terms"]:
            pm = PhaseMonomial(t["h"], t["xi0"], tuple(t["xp"]), tuple(t["xip"]), tuple(t["tv"]))
            rows = t["mat"]
            if len(rows) == 1 and m > 0 and len(rows[0]) == 1:
                # scalar shorthand: 1x1
                re, im = rows[0][0]
                M = CliffordMatrix.identity(m).scale(QI(as_rational(re), as_rational(im)))
            else:
                M = CliffordMatrix.from_json({"m": m, "rows": rows})
            mats[pm.to_exps()] = M
        return cls.from_matrices(m, data["Nw"], data["Mc"], mats)


# ----------------------------------------------------------------------
# Moyal product
# ----------------------------------------------------------------------

@lru_cache(maxsize=1 << 16)
def _moyal_1d(p: int, q: int, p2: int, q2: int) -> tuple:
    """Terms of ``x^p ξ^q ∗ x^{p2} ξ^{q2}`` in one degree of freedom.

    Returns tuples ``(k, rational)`` meaning ``i^k · rational · h^k
    x^{p+p2−k} ξ^{q+q2−k}`` from
    ``exp((ih/2)(∂_x^a ∂_ξ^b − ∂_ξ^a ∂_x^b))``.
    """
    out = []
    kmax = min(p, q2) + min(q, p2)
    for k in range(kmax + 1):
        total = mpq(0)
        for j in range(k + 1):
            l = k - j
            if j > p or j > q2 or l > q or l > p2:
                continue
            term = mpq(_falling(p, j) * _falling(q, l) * _falling(q2, j) * _falling(p2, l),
                       math.factorial(j) * math.factorial(l))
            total += -term if l & 1 else term
        if total:
            out.append((k, total / (1 << k)))
    return tuple(out)


def _falling(a: int, j: int) -> int:
    r = 1
    for t in range(j):
        r *= a - t
    return r


@lru_cache(maxsize=None)
def _pair_weight_gain(m: int) -> tuple:
    # weight increase per unit of k on each conjugate pair
    return (1,) + (0,) * m + (2,) * m


def _expand_pair(e1, e2, m, budget):
    """All Moyal terms of two monomials with weight gain ≤ budget.

    Yields ``(k_total, rational, x_exps, xi_exps)``.
    """
    n = 2 * m + 1
    gains = _pair_weight_gain(m)
    partial = [(0, 0, mpq(1), (), ())]
    for i in range(n):
        opts = _moyal_1d(e1[i], e1[n + i], e2[i], e2[n + i])
        g = gains[i]
        nxt = []
        for dw, kt, c, xs, xis in partial:
            for k, r in opts:
                w = dw + g * k
                if w > budget:
                    break
                nxt.append((w, kt + k, c * r, xs + (e1[i] + e2[i] - k,), xis + (e1[n + i] + e2[n + i] - k,)))
        partial = nxt
        if not partial:
            break
    return partial


def moyal_product(a: GradedSymbol, b: GradedSymbol) -> GradedSymbol:
    """Weyl product ``a ∗ b`` truncated to the common caps.

    Uses ``a ∗ b = exp((ih/2) Σ_i (∂_{x_i}^a ∂_{ξ_i}^b − ∂_{ξ_i}^a ∂_{x_i}^b)) a b``
    over all ``2m+1`` conjugate pairs, so ``x ∗ ξ = xξ + ih/2`` and
    ``[x_i, ξ_j] = ih δ_ij``.  The expansion terminates on polynomials.

    Examples
    --------
    >>> from magdirac.weyl import GradedSymbol, moyal_product
    >>> x1 = GradedSymbol.x(1, 4, 2, 1); xi1 = GradedSymbol.xi(1, 4, 2, 1)
    >>> print(moyal_product(x1, xi1).pretty())
    (1/2*i)*h + (1)*x1*ξ1
    """
    a._check(b)
    m, Nw = a.m, a.Nw
    cap = a.Nw + a.Mc
    n = 2 * m + 1
    wm, tm = _weight_mask(m)
    out = {}
    info_b = [(e, d, sum(x * y for x, y in zip(e, wm)), sum(x * y for x, y in zip(e, tm))) for e, d in b.terms.items()]
    for e1, d1 in a.terms.items():
        w1 = sum(x * y for x, y in zip(e1, wm))
        t1 = sum(x * y for x, y in zip(e1, tm))
        for e2, d2, w2, t2 in info_b:
            w = w1 + w2
            if w > Nw or w + t1 + t2 > cap:
                continue
            P = _mat_mul(d1, d2)
            if not P:
                continue
            hbase = e1[2 * n] + e2[2 * n]
            for _, kt, r, xs, xis in _expand_pair(e1, e2, m, Nw - w):
                exps = xs + xis + (hbase + kt,)
                tgt = out.get(exps)
                if tgt is None:
                    tgt = out[exps] = {}
                for mask, c in P.items():
                    _add_into(tgt, mask, times_ipow(c, kt, r))
                if not tgt:
                    del out[exps]
    return GradedSymbol._raw(m, a.Nw, a.Mc, out)


def moyal_bracket(a: GradedSymbol, b: GradedSymbol) -> GradedSymbol:
    """``[a, b] = a ∗ b − b ∗ a``."""
    return moyal_product(a, b) - moyal_product(b, a)


# ----------------------------------------------------------------------
# exponential conjugation
# ----------------------------------------------------------------------

def _check_generator(g: GradedSymbol, mode: str):
    m = g.m
    if mode == "scalar_over_h":
        if not g.is_scalar:
            raise ValueError("scalar_over_h mode needs a scalar generator")
        if not g.is_self_adjoint(0 if g.exact else 1e-12):
            raise ValueError("scalar_over_h mode needs a real generator")
        for e in g.terms:
            w = weight(e, m)
            if w < 2 or w + transverse_degree(e, m) < 3:
                raise ValueError(
                    "filtration precondition violated: every monomial of g needs weight >= 2 and "
                    f"weight + transverse degree >= 3; got {e}"
                )
    elif mode == "matrix":
        if not g.is_self_adjoint(0 if g.exact else 1e-12):
            raise ValueError("matrix mode needs a self-adjoint generator")
        for e in g.terms:
            if weight(e, m) + transverse_degree(e, m) < 1:
                raise ValueError(f"filtration precondition violated: constant term {e} in matrix generator")
    else:
        raise ValueError(f"unknown mode {mode!r}")


def _ad(G: GradedSymbol, t: GradedSymbol, mode: str) -> GradedSymbol:
    if mode == "scalar_over_h":
        # the bracket is divisible by h; compute it two weights higher so
        # nothing that survives the division is cut early
        Nw, Mc = t.Nw, t.Mc
        br = moyal_bracket(G.with_caps(Nw + 2, Mc), t.with_caps(Nw + 2, Mc))
        return br.divide_h().scale(IPOW[1]).with_caps(Nw, Mc)
    return moyal_bracket(G, t).scale(IPOW[1])


def exp_conjugate(g: GradedSymbol, mode: str, t: GradedSymbol, check: bool = True) -> GradedSymbol:
    """``e^G t e^{−G}`` with ``G = (i/h) g`` (``scalar_over_h``) or ``G = i g`` (``matrix``).

    Computed as the adjoint series ``t + [G,t] + [G,[G,t]]/2 + …``.  Each
    adjoint step raises ``weight + transverse degree`` by at least one, so
    the series terminates at the truncation caps.

    For the scalar mode the generator must be real with every monomial of
    weight ≥ 2 and ``weight + transverse ≥ 3`` (this contains ``O_3``), so
    ``(i/h)ad_g`` never lowers the weight; for the matrix mode it must be
    self-adjoint with no constant term.

    Examples
    --------
    >>> from magdirac.weyl import GradedSymbol, exp_conjugate
    >>> g = GradedSymbol.x(1, 4, 2, 1, 3); t = GradedSymbol.xi(1, 4, 2, 1)
    >>> print(exp_conjugate(g, "scalar_over_h", t).pretty())
    (1)*ξ1 + (-3)*x1^2
    """
    g._check(t)
    if check:
        _check_generator(g, mode)
    out = t
    term = t
    k = 0
    while term:
        k += 1
        term = _ad(g, term, mode)
        if k > 4 * (t.Nw + t.Mc) + 8:
            raise RuntimeError("adjoint series failed to terminate (filtration bug)")
        if term:
            term = term.scale(mpq(1, k))
            out = out + term
    return out


# ----------------------------------------------------------------------
# symplectic substitutions
# ----------------------------------------------------------------------

def _standard_J(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n), dtype=object)
    for i in range(2 * n):
        for j in range(2 * n):
            J[i, j] = 0
    for i in range(n):
        J[i, n + i] = 1
        J[n + i, i] = -1
    return J


class SymplecticMap:
    """Affine map ``z ↦ M z + c`` of phase space ``z = (x_0..x_2m, ξ_0..ξ_2m)``.

    ``M`` must satisfy ``Mᵀ J M = J`` with ``J = [[0, I], [−I, 0]]``;
    exactly when the entries are rational, to 1e−12 otherwise.  Substituting
    ``t ∘ S`` replaces each variable ``z_a`` by ``Σ_b M[a,b] z_b + c_a``.
    """

    def __init__(self, m: int, matrix, shift=None, kind: str = "linear"):
        self.m = m
        n = 2 * m + 1
        M = np.array(matrix, dtype=object)
        if M.shape != (2 * n, 2 * n):
            raise ValueError(f"symplectic matrix must be {2 * n}x{2 * n}")
        self.exact = all(not isinstance(v, (float, complex, np.floating)) for v in M.flat)
        if self.exact:
            M = np.vectorize(lambda v: as_rational(v), otypes=[object])(M)
        else:
            M = M.astype(float)
        self.matrix = M
        shift = [0] * (2 * n) if shift is None else list(shift)
        if len(shift) != 2 * n:
            raise ValueError("shift vector has the wrong length")
        self.shift = [as_rational(v) if not isinstance(v, (float, np.floating)) else float(v) for v in shift]
        self.kind = kind
        self._validate()

    def _validate(self):
        n = 2 * self.m + 1
        J = _standard_J(n)
        if self.exact:
            lhs = self.matrix.T.dot(J).dot(self.matrix)
            if any(a != b for a, b in zip(lhs.flat, J.flat)):
                raise ValueError("matrix is not symplectic (exact check)")
        else:
            Jf = J.astype(float)
            if np.max(np.abs(self.matrix.T @ Jf @ self.matrix - Jf)) > 1e-12:
                raise ValueError("matrix is not symplectic (|MᵀJM − J| > 1e−12)")

    @classmethod
    def identity(cls, m: int):
        n = 2 * m + 1
        M = [[1 if i == j else 0 for j in range(2 * n)] for i in range(2 * n)]
        return cls(m, M)


def f0_map(m: int) -> SymplecticMap:
    """Time-π/4 flow of the quadratic Hamiltonian that turns the model into normal form.

    ``(x_0, ξ_0) ↦ (x_0, ξ_0 + 1)`` and, for ``1 ≤ j ≤ m``,
    ``x_j ↦ (x_j + ξ_{j+m})/√2``, ``ξ_j ↦ (ξ_j − x_{j+m})/√2``,
    ``x_{j+m} ↦ (x_{j+m} + ξ_j)/√2``, ``ξ_{j+m} ↦ (ξ_{j+m} − x_j)/√2``.
    """
    n = 2 * m + 1
    r = 1 / math.sqrt(2)
    M = np.zeros((2 * n, 2 * n))
    M[0, 0] = 1.0
    M[n, n] = 1.0
    for j in range(1, m + 1):
        jm = j + m
        M[j, j] = r; M[j, n + jm] = r
        M[n + j, n + j] = r; M[n + j, jm] = -r
        M[jm, jm] = r; M[jm, n + j] = r
        M[n + jm, n + jm] = r; M[n + jm, j] = -r
    shift = [0.0] * (2 * n)
    shift[n] = 1.0
    return SymplecticMap(m, M, shift, kind="generating")


def linear_symplectic_substitute(t: GradedSymbol, S: SymplecticMap) -> GradedSymbol:
    """Classical substitution ``t ∘ S``, re-truncated to the caps of ``t``.

    For affine symplectic maps the Weyl calculus is covariant, so
    ``(a∘S) ∗ (b∘S) = (a∗b)∘S``.
    """
    if S.m != t.m:
        raise ValueError("dimension mismatch between symbol and map")
    m = t.m
    n = 2 * m + 1
    L = 2 * n
    zero_e = (0,) * (L + 1)
    # each variable as a polynomial {exps: coeff}
    images = []
    for a in range(L):
        poly = {}
        for b in range(L):
            v = S.matrix[a, b]
            if v:
                e = [0] * (L + 1)
                e[b] = 1
                poly[tuple(e)] = QI.coerce(v) if S.exact else float(v)
        if S.shift[a]:
            poly[zero_e] = QI.coerce(S.shift[a]) if S.exact and not isinstance(S.shift[a], float) else float(S.shift[a])
        images.append(poly)

    def pmul(p1, p2):
        out = {}
        for e1, c1 in p1.items():
            for e2, c2 in p2.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                _add_into(out, e, c1 * c2)
        return out

    power_cache = {}

    def power(a, k):
        key = (a, k)
        if key not in power_cache:
            power_cache[key] = {zero_e: ONE} if k == 0 else pmul(power(a, k - 1), images[a])
        return power_cache[key]

    out = {}
    for e, d in t.terms.items():
        poly = {zero_e[:L] + (e[L],): ONE}
        for a in range(L):
            if e[a]:
                poly = pmul(poly, power(a, e[a]))
        for pe, pc in poly.items():
            tgt = out.setdefault(pe, {})
            for mask, c in d.items():
                _add_into(tgt, mask, c * pc)
            if not tgt:
                del out[pe]
    return GradedSymbol(m, t.Nw, t.Mc, out)


# ----------------------------------------------------------------------
# Williamson normal form (frozen coefficients)
# ----------------------------------------------------------------------

def _williamson_block(B: np.ndarray):
    """Symplectic ``S`` with ``Sᵀ B S = diag(d, d)`` for positive-definite ``B`` (2k×2k)."""
    from scipy.linalg import sqrtm, schur

    k = B.shape[0] // 2
    J = np.block([[np.zeros((k, k)), np.eye(k)], [-np.eye(k), np.zeros((k, k))]])
    Bh = np.real(sqrtm(B))
    Bih = np.linalg.inv(Bh)
    A = Bih @ J @ Bih  # antisymmetric
    T, Z = schur(A, output="real")
    # Z^T A Z is block diagonal with 2x2 blocks [[0, a], [-a, 0]]
    blocks = []
    i = 0
    while i < 2 * k:
        a = T[i, i + 1]
        if a < 0:
            Z[:, [i, i + 1]] = Z[:, [i + 1, i]]
            a = -a
        blocks.append((i, a))
        i += 2
    # reorder columns into (q_1..q_k, p_1..p_k)
    cols_q = [Z[:, i] for i, _ in blocks]
    cols_p = [Z[:, i + 1] for i, _ in blocks]
    O = np.column_stack(cols_q + cols_p)
    a = np.array([b[1] for b in blocks])
    d = 1.0 / a
    S = Bih @ O @ np.diag(np.concatenate([np.sqrt(d), np.sqrt(d)]))
    if np.max(np.abs(S.T @ J @ S - J)) > 1e-9:
        S = S @ np.diag(np.concatenate([np.ones(k), -np.ones(k)]))
    return S, d


def williamson_diagonalize(Q, mu, tol: float = 1e-10):
    """Symplectic normalization of a frozen quadratic form.

    Parameters
    ----------
    Q : array_like, shape (2m+1, 2m+1)
        Symmetric positive-definite form in the variables
        ``(x_1..x_m, ξ_0, ξ_1..ξ_m)``.
    mu : sequence of positive floats
        Fixed ratios of the symplectic eigenvalues.

    Returns
    -------
    Lambda : ndarray
        Real matrix with ``exp(Λ)ᵀ Q exp(Λ) = ξ_0² + 2ν̄ Σ μ_j (x_j² + ξ_j²)``.
    nu_bar : float

    Raises
    ------
    ValueError
        If ``Q`` is not positive definite, if the effective ``ξ_0²``
        coefficient (Schur complement) is not 1, or if the symplectic
        eigenvalues are not proportional to ``mu``.
    """
    from scipy.linalg import logm, expm

    Q = np.asarray(Q, dtype=float)
    mu = np.asarray([float(v) for v in mu])
    m = len(mu)
    if Q.shape != (2 * m + 1, 2 * m + 1):
        raise ValueError(f"Q must be {(2 * m + 1)}x{(2 * m + 1)} for m={m}")
    if np.max(np.abs(Q - Q.T)) > 1e-12:
        raise ValueError("Q must be symmetric")
    if np.min(np.linalg.eigvalsh(Q)) <= 0:
        raise ValueError("Q is not positive definite")
    if np.any(mu <= 0):
        raise ValueError("mu must be positive")
    y = list(range(m)) + list(range(m + 1, 2 * m + 1))
    B = Q[np.ix_(y, y)]
    v = Q[y, m]
    q = Q[m, m]
    binv_v = np.linalg.solve(B, v)
    schur_c = q - v @ binv_v
    if abs(schur_c - 1) > 1e-9:
        raise ValueError(f"effective xi_0^2 coefficient is {schur_c}, expected 1")
    S, d = _williamson_block(B)
    # match symplectic eigenvalues to mu ordering
    order_d = np.argsort(d)
    order_mu = np.argsort(mu)
    perm = np.empty(m, dtype=int)
    perm[order_mu] = order_d
    S = S[:, np.concatenate([perm, perm + m])]
    d = d[perm]
    ratios = d / (2 * mu)
    nu_bar = float(np.mean(ratios))
    if np.max(np.abs(ratios - nu_bar)) > 1e-8 * max(1.0, nu_bar):
        raise ValueError(f"symplectic eigenvalues {d} are not proportional to 2*mu={2 * mu}")

    def assemble(Sy):
        T = np.zeros((2 * m + 1, 2 * m + 1))
        T[np.ix_(y, y)] = Sy
        T[y, m] = -binv_v
        T[m, m] = 1.0
        return T

    target = np.zeros((2 * m + 1, 2 * m + 1))
    target[m, m] = 1.0
    for j in range(m):
        target[j, j] = target[m + 1 + j, m + 1 + j] = 2 * nu_bar * mu[j]
    best = None
    for flips in itertools.product((1.0, -1.0), repeat=m):
        F = np.diag(np.concatenate([flips, flips]))
        T = assemble(S @ F)
        L = logm(T)
        if np.max(np.abs(np.imag(L))) > 1e-10:
            continue
        L = np.real(L)
        E = expm(L)
        resid = np.max(np.abs(E.T @ Q @ E - target))
        if resid <= tol:
            best = (L, resid)
            break
        if best is None or resid < best[1]:
            best = (L, resid)
    if best is None or best[1] > tol:
        raise ArithmeticError("no real logarithm with acceptable residual found")
    L = best[0]
    L[np.abs(L) < 1e-15] = 0.0
    return L, nu_bar


# ----------------------------------------------------------------------
# transverse power series
# ----------------------------------------------------------------------

class TransverseSeries:
    """Truncated power series in ``(x_0, x'', ξ'')`` with total degree ≤ ``Mc``.

    Coefficients are exact :class:`QI` or floats.  Exponent tuples have
    length ``2m+1``: ``(x_0, x_{m+1}..x_{2m}, ξ_{m+1}..ξ_{2m})``.
    """

    __slots__ = ("m", "Mc", "coeffs")

    def __init__(self, m: int, Mc: int, coeffs=None):
        self.m, self.Mc = int(m), int(Mc)
        self.coeffs = {}
        for e, c in (coeffs or {}).items():
            e = tuple(int(v) for v in e)
            if len(e) != 2 * m + 1:
                raise ValueError("transverse exponent has wrong length")
            if sum(e) > self.Mc:
                continue
            if not isinstance(c, (QI, float, complex)):
                c = QI.coerce(c)
            if c:
                self.coeffs[e] = c

    @classmethod
    def constant(cls, m, Mc, c):
        return cls(m, Mc, {(0,) * (2 * m + 1): c})

    @classmethod
    def x0_poly(cls, m, Mc, coeffs):
        """Series ``Σ coeffs[k] x_0^k``."""
        return cls(m, Mc, {(k,) + (0,) * (2 * m): c for k, c in enumerate(coeffs)})

    @property
    def const(self):
        return self.coeffs.get((0,) * (2 * self.m + 1), ZERO)

    def _check(self, o):
        if (self.m, self.Mc) != (o.m, o.Mc):
            raise CapError("transverse series caps differ")

    def __add__(self, o):
        self._check(o)
        out = dict(self.coeffs)
        for e, c in o.coeffs.items():
            _add_into(out, e, c)
        return TransverseSeries(self.m, self.Mc, out)

    def __sub__(self, o):
        return self + o.scale(-1)

    def scale(self, c):
        return TransverseSeries(self.m, self.Mc, {e: v * c for e, v in self.coeffs.items()})

    def __mul__(self, o):
        if not isinstance(o, TransverseSeries):
            return self.scale(o)
        self._check(o)
        out = {}
        for e1, c1 in self.coeffs.items():
            d1 = sum(e1)
            for e2, c2 in o.coeffs.items():
                if d1 + sum(e2) > self.Mc:
                    continue
                _add_into(out, tuple(a + b for a, b in zip(e1, e2)), c1 * c2)
        return TransverseSeries(self.m, self.Mc, out)

    __rmul__ = __mul__

    def __eq__(self, o):
        return isinstance(o, TransverseSeries) and (self.m, self.Mc) == (o.m, o.Mc) and self.coeffs == o.coeffs

    def __repr__(self):
        return f"TransverseSeries(m={self.m}, Mc={self.Mc}, {self.coeffs})"

    def is_zero(self):
        return not self.coeffs

    def derivative_x0(self) -> "TransverseSeries":
        return TransverseSeries(self.m, self.Mc, {(e[0] - 1,) + e[1:]: c * e[0] for e, c in self.coeffs.items() if e[0]})

    def antiderivative_x0(self) -> "TransverseSeries":
        return TransverseSeries(self.m, self.Mc, {(e[0] + 1,) + e[1:]: c * mpq(1, e[0] + 1) for e, c in self.coeffs.items()})

    def invert(self) -> "TransverseSeries":
        c0 = self.const
        if not c0:
            raise ZeroDivisionError("series has zero constant term")
        one = TransverseSeries.constant(self.m, self.Mc, 1)
        inv0 = (ONE / c0) if isinstance(c0, QI) else 1 / c0
        nil = one - self.scale(inv0)  # zero constant term
        out, p = one, one
        for _ in range(self.Mc):
            p = p * nil
            out = out + p
        return out.scale(inv0)

    def sqrt(self, root0=None) -> "TransverseSeries":
        """Square root with the given (or computed) square root of the constant term."""
        c0 = self.const
        if not c0:
            raise ValueError("series has zero constant term")
        if root0 is None:
            if isinstance(c0, QI):
                if c0.im != 0 or c0.re < 0:
                    raise ValueError("exact sqrt needs a non-negative rational constant term")
                import gmpy2

                num, den = c0.re.numerator, c0.re.denominator
                rn, okn = gmpy2.isqrt_rem(num)
                rd, okd = gmpy2.isqrt_rem(den)
                if okn or okd:
                    raise ValueError(f"constant term {c0.re} is not a rational square")
                root0 = QI(mpq(rn, rd))
            else:
                root0 = complex(c0) ** 0.5
                root0 = root0.real if abs(root0.imag) < 1e-15 else root0
        elif isinstance(c0, QI) and QI.coerce(root0) * QI.coerce(root0) != c0:
            raise ValueError("supplied root does not square to the constant term")
        # sqrt(c0 (1 + u)) = root0 Σ binom(1/2, k) u^k
        inv0 = (ONE / c0) if isinstance(c0, QI) else 1 / c0
        u = self.scale(inv0) - TransverseSeries.constant(self.m, self.Mc, 1)
        out = TransverseSeries.constant(self.m, self.Mc, 1)
        p = TransverseSeries.constant(self.m, self.Mc, 1)
        coef = mpq(1)
        for k in range(1, self.Mc + 1):
            coef = coef * (mpq(1, 2) - (k - 1)) / k
            p = p * u
            out = out + p.scale(coef)
        return out.scale(root0)

    def to_symbol(self, Nw: int, Mc: int | None = None) -> GradedSymbol:
        """Embed as a scalar symbol (the transverse cap is reused unless given)."""
        m = self.m
        n = 2 * m + 1
        Mc = self.Mc if Mc is None else Mc
        terms = {}
        for e, c in self.coeffs.items():
            exps = [0] * (2 * n + 1)
            exps[0] = e[0]
            for j in range(m):
                exps[m + 1 + j] = e[1 + j]
                exps[n + m + 1 + j] = e[1 + m + j]
            terms[tuple(exps)] = {0: c}
        return GradedSymbol(m, Nw, Mc, terms)


def series_ops(f: TransverseSeries, op: str, **kw) -> TransverseSeries:
    """Dispatch ``invert``, ``sqrt`` or ``antiderivative_x0`` on a transverse series."""
    if op == "invert":
        return f.invert()
    if op == "sqrt":
        return f.sqrt(**kw)
    if op == "antiderivative_x0":
        return f.antiderivative_x0()
    raise ValueError(f"unknown series op {op!r}")
