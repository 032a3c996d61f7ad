"""Koszul differentials on form-valued symbols and the twisted Hodge decomposition.

A :class:`ChainElement` is a truncated polynomial in the phase variables
with values in ``Λ* W``, ``W = span(e_0, …, e_2m)``.  With ``s_j = μ_j^{1/2}``
and ``ρ = (2ν̄)^{1/2}`` (a series in the transverse variables):

    w_x⁰ = Σ s_j (x_j e_{2j−1}∧ + ξ_j e_{2j}∧)        i_x⁰ = Σ s_j (x_j ι_{2j−1} + ξ_j ι_{2j})
    w_∂⁰ = Σ s_j (∂_{x_j} e_{2j−1}∧ + ∂_{ξ_j} e_{2j}∧)  i_∂⁰ = Σ s_j (∂_{x_j} ι_{2j−1} + ∂_{ξ_j} ι_{2j})
    w̃_∂⁰ = Σ s_j (∂_{x_j} e_{2j}∧ − ∂_{ξ_j} e_{2j−1}∧)  ĩ_∂⁰ = Σ s_j (∂_{x_j} ι_{2j} − ∂_{ξ_j} ι_{2j−1})

and ``w_x = ξ_0 e_0∧ + ρ w_x⁰``, ``i_x = ξ_0 ι_0 + ρ i_x⁰``,
``w_∂ = ∂_{ξ_0} e_0∧ + ρ w_∂⁰``, ``i_∂ = ∂_{ξ_0} ι_0 + ρ i_∂⁰``,
``w̃_∂ = σ ∂_{x_0} e_0∧ + ρ w̃_∂⁰``, ``ĩ_∂ = σ ∂_{x_0} ι_0 + ρ ĩ_∂⁰`` where the
sign ``σ`` defaults to ``−1``.

The twisted Laplacian ``Δ̃⁰ = Σ μ_j L_j`` with
``L_j = ξ_j∂_{x_j} − x_j∂_{ξ_j} + e_{2j}ι_{2j−1} − e_{2j−1}ι_{2j}``
generates simultaneous rotations of the ``(x_j, ξ_j)`` and
``(e_{2j−1}, e_{2j})`` planes; each ``L_j`` has eigenvalues ``i n_j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from gmpy2 import mpq

from ._exact import QI, ZERO, ONE, IPOW, as_rational, fmt_rational, coeff_abs
from .weyl import (
    TransverseSeries,
    _weight_mask,
    weight,
    transverse_degree,
    monomial,
    PhaseMonomial,
)

__all__ = [
    "ChainElement",
    "KoszulData",
    "apply_differential",
    "twisted_laplacian0",
    "twisted_laplacian",
    "untwisted_laplacians",
    "rotation_generator",
    "split_eigenspaces",
    "hodge_decompose",
    "HodgeResult",
    "inner_product",
    "DIFFERENTIALS",
]

DIFFERENTIALS = (
    "w_x0", "i_x0", "w_d0", "i_d0", "wt_d0", "it_d0",
    "w_x", "i_x", "w_d", "i_d", "wt_d", "it_d",
)
_ALIASES = {
    "w_x⁰": "w_x0", "i_x⁰": "i_x0", "w_∂⁰": "w_d0", "i_∂⁰": "i_d0", "w̃_∂⁰": "wt_d0", "ĩ_∂⁰": "it_d0",
    "w_∂": "w_d", "i_∂": "i_d", "w̃_∂": "wt_d", "ĩ_∂": "it_d",
}


def _add(d, k, v):
    cur = d.get(k)
    new = v if cur is None else cur + v
    if new:
        d[k] = new
    elif cur is not None:
        del d[k]


class ChainElement:
    """Form-valued truncated symbol, an element of ``S ⊗ Λ* W``.

    ``terms`` maps ``(exps, mask)`` to a coefficient, where ``exps`` is a
    phase exponent tuple (see :mod:`magdirac.weyl`) and ``mask`` a bitmask
    over ``e_0..e_2m`` for the wedge factor.
    """

    __slots__ = ("m", "Nw", "Mc", "terms")

    def __init__(self, m: int, Nw: int, Mc: int, terms=None):
        self.m, self.Nw, self.Mc = int(m), int(Nw), int(Mc)
        self.terms = {}
        if terms:
            wm, tm = _weight_mask(self.m)
            cap = self.Nw + self.Mc
            for (e, mask), c in terms.items():
                e = tuple(int(v) for v in e)
                if len(e) != len(wm) or min(e) < 0:
                    raise ValueError(f"bad exponent tuple {e}")
                if mask < 0 or mask >> (2 * self.m + 1):
                    raise ValueError(f"wedge mask {mask} out of range for m={self.m}")
                w = sum(a * b for a, b in zip(e, wm))
                if w > self.Nw or w + sum(a * b for a, b in zip(e, tm)) > cap:
                    continue
                if not isinstance(c, (QI, float, complex)):
                    c = QI.coerce(c)
                if c:
                    self.terms[(e, mask)] = c

    @classmethod
    def _raw(cls, m, Nw, Mc, terms):
        s = object.__new__(cls)
        s.m, s.Nw, s.Mc, s.terms = m, Nw, Mc, terms
        return s

    @classmethod
    def from_terms(cls, m, Nw, Mc, items):
        """From ``[(coeff, {x-index: pow}, {ξ-index: pow}, h_pow, wedge_indices), …]``."""
        terms = {}
        for c, xs, xis, hp, wedge in items:
            mask = 0
            for j in wedge:
                mask |= 1 << j
            if len(set(wedge)) != len(wedge):
                continue
            # sign of sorting the wedge indices
            sign = _perm_sign(list(wedge))
            _add(terms, (monomial(m, xs, xis, hp), mask), QI.coerce(c) * sign if not isinstance(c, (float, complex)) else c * sign)
        return cls(m, Nw, Mc, terms)

    def empty_like(self):
        return ChainElement._raw(self.m, self.Nw, self.Mc, {})

    def with_caps(self, Nw, Mc):
        return ChainElement(self.m, Nw, Mc, self.terms)

    # -- inspection ----------------------------------------------------
    def __bool__(self):
        return bool(self.terms)

    def is_zero(self):
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __eq__(self, o):
        return isinstance(o, ChainElement) and (self.m, self.Nw, self.Mc) == (o.m, o.Nw, o.Mc) and self.terms == o.terms

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"ChainElement(m={self.m}, Nw={self.Nw}, Mc={self.Mc}, {len(self.terms)} terms)"

    def min_weight(self):
        return min((weight(e, self.m) for e, _ in self.terms), default=None)

    def weights(self):
        return sorted({weight(e, self.m) for e, _ in self.terms})

    def form_degrees(self):
        return sorted({bin(k).count("1") for _, k in self.terms})

    def homogeneous_part(self, w: int) -> "ChainElement":
        return ChainElement._raw(self.m, self.Nw, self.Mc,
                                 {k: c for k, c in self.terms.items() if weight(k[0], self.m) == w})

    def truncate_weight(self, w: int) -> "ChainElement":
        return ChainElement._raw(self.m, self.Nw, self.Mc,
                                 {k: c for k, c in self.terms.items() if weight(k[0], self.m) <= w})

    def above_weight(self, w: int) -> "ChainElement":
        return ChainElement._raw(self.m, self.Nw, self.Mc,
                                 {k: c for k, c in self.terms.items() if weight(k[0], self.m) > w})

    def parity_part(self, parity: str) -> "ChainElement":
        want = 0 if parity == "even" else 1
        return ChainElement._raw(self.m, self.Nw, self.Mc,
                                 {k: c for k, c in self.terms.items() if bin(k[1]).count("1") % 2 == want})

    def weight_profile(self) -> dict:
        prof = {}
        for (e, _), c in self.terms.items():
            w = weight(e, self.m)
            prof[w] = max(prof.get(w, 0.0), coeff_abs(c))
        return prof

    def xi0_free(self) -> bool:
        n = 2 * self.m + 1
        return all(e[n] == 0 for e, _ in self.terms)

    def is_real(self) -> bool:
        return all((c.im == 0) if isinstance(c, QI) else complex(c).imag == 0 for c in self.terms.values())

    # -- arithmetic ----------------------------------------------------
    def _check(self, o):
        if not isinstance(o, ChainElement) or (self.m, self.Nw, self.Mc) != (o.m, o.Nw, o.Mc):
            raise ValueError("incompatible chain elements (m, Nw, Mc differ)")

    def __add__(self, o):
        self._check(o)
        out = dict(self.terms)
        for k, v in o.terms.items():
            _add(out, k, v)
        return ChainElement._raw(self.m, self.Nw, self.Mc, out)

    def __neg__(self):
        return ChainElement._raw(self.m, self.Nw, self.Mc, {k: -v for k, v in self.terms.items()})

    def __sub__(self, o):
        return self + (-o)

    def scale(self, c):
        if not isinstance(c, (QI, float, complex)):
            c = QI.coerce(c)
        out = {}
        for k, v in self.terms.items():
            nv = v * c
            if nv:
                out[k] = nv
        return ChainElement._raw(self.m, self.Nw, self.Mc, out)

    __mul__ = scale
    __rmul__ = scale

    def map_terms(self, fn) -> "ChainElement":
        """Apply ``fn(exps, mask, coeff) -> iterable of (exps, mask, coeff)`` and re-truncate."""
        out = {}
        wm, tm = _weight_mask(self.m)
        cap = self.Nw + self.Mc
        for (e, mask), c in self.terms.items():
            for e2, m2, c2 in fn(e, mask, c):
                w = sum(a * b for a, b in zip(e2, wm))
                if w > self.Nw or w + sum(a * b for a, b in zip(e2, tm)) > cap:
                    continue
                _add(out, (e2, m2), c2)
        return ChainElement._raw(self.m, self.Nw, self.Mc, out)

    # elementary operators ------------------------------------------------
    def mul_var(self, idx: int, power: int = 1) -> "ChainElement":
        """Multiply by the phase variable with exponent index ``idx``."""
        def fn(e, mask, c):
            e2 = list(e)
            e2[idx] += power
            yield tuple(e2), mask, c
        return self.map_terms(fn)

    def diff(self, idx: int) -> "ChainElement":
        def fn(e, mask, c):
            if e[idx]:
                e2 = list(e)
                e2[idx] -= 1
                yield tuple(e2), mask, c * e[idx]
        return self.map_terms(fn)

    def wedge(self, j: int) -> "ChainElement":
        """Left exterior multiplication ``e_j ∧``."""
        bit = 1 << j
        def fn(e, mask, c):
            if not mask & bit:
                yield e, mask | bit, (-c if bin(mask & (bit - 1)).count("1") & 1 else c)
        return self.map_terms(fn)

    def contract(self, j: int) -> "ChainElement":
        """Interior product ``ι_{e_j}``."""
        bit = 1 << j
        def fn(e, mask, c):
            if mask & bit:
                yield e, mask ^ bit, (-c if bin(mask & (bit - 1)).count("1") & 1 else c)
        return self.map_terms(fn)

    def mul_series(self, f: TransverseSeries) -> "ChainElement":
        """Multiply by a function of the transverse variables."""
        m = self.m
        n = 2 * m + 1
        shifts = []
        for te, tc in f.coeffs.items():
            s = [0] * (2 * n + 1)
            s[0] = te[0]
            for j in range(m):
                s[m + 1 + j] = te[1 + j]
                s[n + m + 1 + j] = te[1 + m + j]
            shifts.append((s, tc))

        def fn(e, mask, c):
            for s, tc in shifts:
                yield tuple(a + b for a, b in zip(e, s)), mask, c * tc
        return self.map_terms(fn)

    # JSON ----------------------------------------------------------------
    def to_json(self) -> dict:
        rows = []
        for (e, mask), c in sorted(self.terms.items()):
            pm = PhaseMonomial.from_exps(e, self.m)
            wedge = [j for j in range(2 * self.m + 1) if mask >> j & 1]
            if isinstance(c, QI):
                re, im = fmt_rational(c.re), fmt_rational(c.im)
            else:
                re, im = repr(complex(c).real), repr(complex(c).imag)
            rows.append({"h": pm.h_pow, "xi0": pm.xi0_pow, "xp": list(pm.xprime), "xip": list(pm.xiprime),
                         "tv": list(pm.transverse), "wedge": wedge, "re": re, "im": im})
        return {"m": self.m, "Nw": self.Nw, "Mc": self.Mc, "terms": rows}

    @classmethod
    def from_json(cls, data: dict) -> "ChainElement":
        m = data["m"]
        terms = {}
        for t in data["terms"]:
            pm = PhaseMonomial(t["h"], t["xi0"], tuple(t["xp"]), tuple(t["xip"]), tuple(t["tv"]))
            wedge = list(t["wedge"])
            mask = 0
            for j in wedge:
                mask |= 1 << j
            c = QI(as_rational(t["re"]), as_rational(t["im"])) * _perm_sign(wedge)
            _add(terms, (pm.to_exps(), mask), c)
        return cls(m, data["Nw"], data["Mc"], terms)


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


# ----------------------------------------------------------------------
# differential data
# ----------------------------------------------------------------------

def _exact_sqrt(q):
    import gmpy2

    q = as_rational(q)
    if q < 0:
        return None
    rn, r1 = gmpy2.isqrt_rem(q.numerator)
    rd, r2 = gmpy2.isqrt_rem(q.denominator)
    if r1 or r2:
        return None
    return mpq(rn, rd)


class KoszulData:
    """Parameters shared by the differentials.

    Parameters
    ----------
    m : int
    mu : sequence
        Positive ratios ``μ_j``.  Rational input stays exact.
    s : sequence, optional
        Square roots ``s_j`` with ``s_j² = μ_j``; computed exactly when
        ``μ_j`` is a rational square, otherwise in floating point unless
        ``exact=True`` in which case a ``ValueError`` is raised.
    rho : TransverseSeries or rational, optional
        ``ρ = (2ν̄)^{1/2}``; defaults to 1.  Needed by the W-differentials.
    e0_sign : int
        Sign ``σ`` in front of ``∂_{x_0} e_0∧`` in ``w̃_∂`` (and ``ĩ_∂``).
    """

    def __init__(self, m, mu, s=None, rho=None, e0_sign: int = -1, Mc: int | None = None, exact: bool = False):
        self.m = int(m)
        if len(mu) != self.m:
            raise ValueError(f"mu must have length {self.m}")
        self.mu = []
        for v in mu:
            self.mu.append(float(v) if isinstance(v, float) else as_rational(v))
        if any(v <= 0 for v in self.mu):
            raise ValueError("mu must be positive")
        if s is None:
            s = []
            for v in self.mu:
                r = _exact_sqrt(v) if not isinstance(v, float) else None
                if r is None:
                    if exact:
                        raise ValueError(f"mu_j = {v} has no rational square root; supply s explicitly")
                    r = math.sqrt(float(v))
                s.append(r)
        else:
            s = [float(v) if isinstance(v, float) else as_rational(v) for v in s]
            for sv, mv in zip(s, self.mu):
                if not isinstance(sv, float) and not isinstance(mv, float) and sv * sv != mv:
                    raise ValueError(f"s_j = {sv} does not square to mu_j = {mv}")
        self.s = list(s)
        if e0_sign not in (1, -1):
            raise ValueError("e0_sign must be +1 or -1")
        self.e0_sign = e0_sign
        self._rho = rho
        self.Mc = Mc

    def rho_series(self, Mc: int) -> TransverseSeries:
        rho = self._rho
        if rho is None:
            return TransverseSeries.constant(self.m, Mc, 1)
        if isinstance(rho, TransverseSeries):
            if rho.Mc != Mc:
                return TransverseSeries(self.m, Mc, rho.coeffs)
            return rho
        return TransverseSeries.constant(self.m, Mc, rho if isinstance(rho, float) else as_rational(rho))

    @property
    def rho_is_constant(self) -> bool:
        rho = self._rho
        if not isinstance(rho, TransverseSeries):
            return True
        return all(not any(e) for e in rho.coeffs)


def _sc(c):
    return c if isinstance(c, float) else QI.coerce(c)


def _xi(m, j):
    return 2 * m + 1 + j


def _apply0(name: str, e: ChainElement, data: KoszulData) -> ChainElement:
    m = e.m
    out = e.empty_like()
    for j in range(1, m + 1):
        s = _sc(data.s[j - 1])
        xj, xij = j, _xi(m, j)
        if name == "w_x0":
            t = e.mul_var(xj).wedge(2 * j - 1) + e.mul_var(xij).wedge(2 * j)
        elif name == "i_x0":
            t = e.contract(2 * j - 1).mul_var(xj) + e.contract(2 * j).mul_var(xij)
        elif name == "w_d0":
            t = e.diff(xj).wedge(2 * j - 1) + e.diff(xij).wedge(2 * j)
        elif name == "i_d0":
            t = e.diff(xj).contract(2 * j - 1) + e.diff(xij).contract(2 * j)
        elif name == "wt_d0":
            t = e.diff(xj).wedge(2 * j) - e.diff(xij).wedge(2 * j - 1)
        elif name == "it_d0":
            t = e.diff(xj).contract(2 * j) - e.diff(xij).contract(2 * j - 1)
        else:
            raise ValueError(name)
        out = out + t.scale(s)
    return out


def apply_differential(name: str, e: ChainElement, data: KoszulData) -> ChainElement:
    """Apply one of the twelve Koszul operators (see module docstring).

    ``name`` is one of ``w_x0, i_x0, w_d0, i_d0, wt_d0, it_d0, w_x, i_x,
    w_d, i_d, wt_d, it_d`` (the symbols ``w̃_∂⁰`` etc. are accepted too).

    Examples
    --------
    >>> from magdirac.koszul import ChainElement, KoszulData, apply_differential
    >>> u = ChainElement.from_terms(1, 4, 2, [(1, {1: 1}, {}, 0, [])])
    >>> v = apply_differential("wt_d0", u, KoszulData(1, [1]))
    >>> [(k[1], str(c)) for k, c in v.terms.items()]
    [(4, '1')]
    """
    name = _ALIASES.get(name, name)
    if name not in DIFFERENTIALS:
        raise ValueError(f"unknown differential {name!r}; expected one of {DIFFERENTIALS}")
    if data.m != e.m:
        raise ValueError("dimension mismatch between data and chain element")
    if name.endswith("0"):
        return _apply0(name, e, data)
    m = e.m
    n = 2 * m + 1
    rho = data.rho_series(e.Nw + e.Mc)
    inner = _apply0(name + "0", e, data).mul_series(rho)
    sig = data.e0_sign
    if name == "w_x":
        head = e.mul_var(n).wedge(0)
    elif name == "i_x":
        head = e.contract(0).mul_var(n)
    elif name == "w_d":
        head = e.diff(n).wedge(0)
    elif name == "i_d":
        head = e.diff(n).contract(0)
    elif name == "wt_d":
        head = e.diff(0).wedge(0).scale(sig)
    else:  # it_d
        head = e.diff(0).contract(0).scale(sig)
    return head + inner


def rotation_generator(e: ChainElement, j: int) -> ChainElement:
    """``L_j = ξ_j∂_{x_j} − x_j∂_{ξ_j} + e_{2j}ι_{2j−1} − e_{2j−1}ι_{2j}``."""
    m = e.m
    xj, xij = j, _xi(m, j)
    return (e.diff(xj).mul_var(xij) - e.diff(xij).mul_var(xj)
            + e.contract(2 * j - 1).wedge(2 * j) - e.contract(2 * j).wedge(2 * j - 1))


def twisted_laplacian0(e: ChainElement, data: KoszulData | None = None, mu=None) -> ChainElement:
    """``Δ̃⁰ = Σ_j μ_j L_j`` (rotation form).

    Examples
    --------
    >>> from magdirac.koszul import ChainElement, twisted_laplacian0
    >>> u = ChainElement.from_terms(1, 4, 2, [(1, {1: 1}, {}, 0, [])])
    >>> [(k[0], str(c)) for k, c in twisted_laplacian0(u, mu=[1]).terms.items()]
    [((0, 0, 0, 0, 1, 0, 0), '1')]
    """
    if mu is None:
        if data is None:
            raise ValueError("supply KoszulData or mu")
        mu = data.mu
    out = e.empty_like()
    for j in range(1, e.m + 1):
        out = out + rotation_generator(e, j).scale(_sc(mu[j - 1]))
    return out


def twisted_laplacian(e: ChainElement, data: KoszulData) -> ChainElement:
    """``Δ̃ = i_x w̃_∂ + w̃_∂ i_x`` (composition form)."""
    return (apply_differential("i_x", apply_differential("wt_d", e, data), data)
            + apply_differential("wt_d", apply_differential("i_x", e, data), data))


def untwisted_laplacians(e: ChainElement, data: KoszulData):
    """Both untwisted compositions ``(w_x⁰i_∂⁰ + i_∂⁰w_x⁰, w_∂⁰i_x⁰ + i_x⁰w_∂⁰)``.

    They are exposed for inspection only; they do not coincide in general.
    """
    a = apply_differential("w_x0", apply_differential("i_d0", e, data), data) + \
        apply_differential("i_d0", apply_differential("w_x0", e, data), data)
    b = apply_differential("w_d0", apply_differential("i_x0", e, data), data) + \
        apply_differential("i_x0", apply_differential("w_d0", e, data), data)
    return a, b


def inner_product(a: ChainElement, b: ChainElement):
    """Sesquilinear pairing where ``x^α ξ^β h^k e_I`` are orthogonal with norm² ``α! β! k!``.

    With this normalization ``∂`` is adjoint to multiplication, so for
    instance ``w_x⁰`` and ``i_∂⁰`` are mutually adjoint.
    """
    a._check(b)
    total = ZERO
    for k, c in a.terms.items():
        d = b.terms.get(k)
        if d is None:
            continue
        norm = 1
        for p in k[0]:
            norm *= math.factorial(p)
        cc = c.conjugate() if isinstance(c, QI) else complex(c).conjugate()
        total = total + cc * d * norm
    return total


# ----------------------------------------------------------------------
# eigen-splitting of Δ̃⁰
# ----------------------------------------------------------------------

def _block_key(e, mask, j, m):
    d = e[j] + e[_xi(m, j)]
    bits = (mask >> (2 * j - 1)) & 3
    f = 1 if bits in (1, 2) else 0
    return d, f


def split_rotation(u: ChainElement, j: int) -> dict:
    """Split ``u`` into eigencomponents of ``L_j``: ``{n: component}`` with ``L_j v = i n v``."""
    m = u.m
    groups = {}
    for (e, mask), c in u.terms.items():
        groups.setdefault(_block_key(e, mask, j, m), {})[(e, mask)] = c
    out = {}
    for (d, f), terms in groups.items():
        v = ChainElement._raw(m, u.Nw, u.Mc, terms)
        top = d + f
        cands = list(range(-top, top + 1, 2))
        if len(cands) == 1:
            _merge(out, cands[0], v)
            continue
        # powers of L_j applied to v, then Lagrange interpolation
        for n in cands:
            comp = v
            for n2 in cands:
                if n2 == n:
                    continue
                # (L - i n2) / (i n - i n2) = (L - i n2) * (-i) / (n - n2)
                comp = (rotation_generator(comp, j) - comp.scale(QI(0, n2))).scale(QI(0, mpq(-1, n - n2)))
            if comp:
                _merge(out, n, comp)
    return out


def _merge(d, key, v):
    if key in d:
        d[key] = d[key] + v
    else:
        d[key] = v


def split_eigenspaces(u: ChainElement) -> dict:
    """Joint eigen-split ``{(n_1..n_m): component}`` with ``Δ̃⁰ v = i (μ·n) v``."""
    parts = {(): u}
    for j in range(1, u.m + 1):
        nxt = {}
        for key, v in parts.items():
            for n, comp in split_rotation(v, j).items():
                _merge(nxt, key + (n,), comp)
        parts = {k: v for k, v in nxt.items() if v}
    return parts


# ----------------------------------------------------------------------
# Hodge decomposition
# ----------------------------------------------------------------------

@dataclass
class HodgeResult:
    """Output of :func:`hodge_decompose`.

    ``input = harmonic + i_x w̃_∂ b + w̃_∂ i_x g + residual`` with the
    residual supported in weights above ``target``.  ``b`` and ``g`` carry
    one extra unit of each cap so that the recomposition is exact.
    """

    harmonic: ChainElement
    b: ChainElement
    g: ChainElement
    residual: ChainElement
    target: int


def _xi0_split(u: ChainElement) -> dict:
    n = 2 * u.m + 1
    out = {}
    for (e, mask), c in u.terms.items():
        out.setdefault(e[n], {})[(e, mask)] = c
    return {k: ChainElement._raw(u.m, u.Nw, u.Mc, t) for k, t in out.items()}


def _J(u: ChainElement) -> ChainElement:
    """``ξ_0^{-1} ∫_0^{x_0}``; every term must contain ``ξ_0``."""
    n = 2 * u.m + 1

    def fn(e, mask, c):
        if e[n] == 0:
            raise ArithmeticError("J applied to a xi_0-free term")
        e2 = list(e)
        e2[n] -= 1
        e2[0] += 1
        yield tuple(e2), mask, c * mpq(1, e[0] + 1)
    return u.map_terms(fn)


def _M(u: ChainElement, data: KoszulData, drho: TransverseSeries) -> ChainElement:
    """``ρ' e_0 ∧ i_x⁰``."""
    return apply_differential("i_x0", u, data).wedge(0).mul_series(drho)


def hodge_decompose(u: ChainElement, data: KoszulData, target_weight: int | None = None) -> HodgeResult:
    """Decompose ``u = υ + i_x w̃_∂ b + w̃_∂ i_x g`` with ``υ`` twisted-harmonic and ``ξ_0``-free.

    Algorithm
    ---------
    With ``Δ̃ = i_x w̃_∂ + w̃_∂ i_x = σ ξ_0∂_{x_0} + ρ² Δ̃⁰ + σ ρ' e_0 i_x⁰``:

    1. split ``u`` into ``Δ̃⁰`` eigencomponents ``i μ·n`` (Lagrange
       projectors of the commuting rotations ``L_j``);
    2. on ``μ·n ≠ 0`` solve ``Δ̃ v = u_n`` by the terminating series
       ``v = Σ_k (A⁻¹B)^k A⁻¹ u_n`` with ``A = ρ²Δ̃⁰`` and ``B = A − Δ̃``,
       which raises the weight by one per step;
    3. on ``μ·n = 0`` write ``u_0 = Σ_j ξ_0^j η_j``.  ``η_0`` is harmonic.
       For ``j ≥ 1`` with ``J = ξ_0^{-1}∫_0^{x_0}`` and ``M = ρ' e_0 i_x⁰``
       one has ``ξ_0^jη_j = (−MJ)^j ξ_0^jη_j + Δ̃ ω_1``,
       ``ω_1 = σ J Σ_{l<j} (−MJ)^l ξ_0^jη_j``.

    Then ``b = g = v + ω_1``.  Intermediate work is done with caps raised
    by one so the recomposition is exact at the original caps.
    """
    m = u.m
    if data.m != m:
        raise ValueError("dimension mismatch")
    if target_weight is None:
        target_weight = u.Nw
    Nw2, Mc2 = u.Nw + 1, u.Mc + 1
    rho = data.rho_series(Nw2 + Mc2)
    r0 = rho.const
    if not r0:
        raise ValueError("rho must have a nonzero constant term")
    rho2_inv = (rho * rho).invert()
    drho = rho.derivative_x0()
    sig = data.e0_sign
    work = u.truncate_weight(target_weight).with_caps(Nw2, Mc2)
    harmonic = work.empty_like()
    sol = work.empty_like()

    def B(v):
        # B = A − Δ̃ = −σ(ξ_0∂_{x_0} + ρ' e_0 i_x⁰)
        return (v.diff(0).mul_var(2 * m + 1) + _M(v, data, drho)).scale(-sig)

    for nvec, comp in sorted(split_eigenspaces(work).items()):
        lam = sum(_sc(mu) * n for mu, n in zip(data.mu, nvec))
        if lam != 0:
            inv = (ONE / QI(0, 1)) / lam if not isinstance(lam, float) else 1 / (1j * lam)

            def Ainv(v):
                return v.mul_series(rho2_inv).scale(inv)

            term = Ainv(comp)
            acc = term
            steps = 0
            while term:
                term = Ainv(B(term))
                acc = acc + term
                steps += 1
                if steps > Nw2 + Mc2 + 4:
                    raise RuntimeError("Volterra series did not terminate")
            sol = sol + acc
        else:
            for j, part in sorted(_xi0_split(comp).items()):
                if j == 0:
                    harmonic = harmonic + part
                    continue
                omega1 = part.empty_like()
                cur = part
                for _ in range(j):
                    omega1 = omega1 + cur
                    cur = -_M(_J(cur), data, drho)
                harmonic = harmonic + cur
                sol = sol + _J(omega1).scale(sig)
    b = sol
    recomposed = twisted_laplacian(b, data) + harmonic
    harm_out = harmonic.with_caps(u.Nw, u.Mc)
    residual = u - recomposed.with_caps(u.Nw, u.Mc)
    return HodgeResult(harm_out, b, b, residual, target_weight)
