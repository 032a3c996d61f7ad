"""Formal Birkhoff normal form of the model Dirac symbol.

The input is ``d_1 = H_1 + c_0(r) + h·(matrix terms)`` where

    H_1 = ξ_0 σ_0 + ρ Σ_j s_j (x_j σ_{2j−1} + ξ_j σ_{2j}) = c_0(w_x 1),   σ_j = iγ_j,

and ``r`` is a real 1-form with coefficients of weight ≥ 2.  The algorithm
finds a real scalar ``f``, a real even form ``a`` and a real odd form ``ω``
that is twisted-harmonic and ``ξ_0``-free, with

    e^{ic_0(a)} e^{(i/h)f} d_1 e^{−(i/h)f} e^{−ic_0(a)} = H_1 + c_0(ω)

through a target weight.  Linearized, with ``D`` the twisted differential
``w̃_∂`` taken with ``+∂_{x_0}e_0∧``:

    (i/h)[f, H_1]      = −c_0(D f)
    i[c_0(a), H_1]     = ε_k (2 c_0(i_x a) + h c_0(D a)) + O(h²),   ε_k = (−1)^{k/2+1}

for ``a`` of form degree ``k``.  A weight-homogeneous remainder ``u`` is
split by :func:`magdirac.koszul.hodge_decompose` as
``u = υ + i_x D b + D i_x g`` and each piece is cancelled by the matching
generator; the conjugation is then recomputed from scratch, so nonlinear
terms are picked up at the next pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from gmpy2 import mpq

from ._exact import QI, ZERO, ONE, IPOW, as_rational, coeff_abs, fmt_rational
from .clifford import blade_product, volume_scalar, c0_phase
from .koszul import (
    ChainElement,
    KoszulData,
    apply_differential,
    hodge_decompose,
    twisted_laplacian0,
)
from .weyl import (
    GradedSymbol,
    TransverseSeries,
    exp_conjugate,
    weight,
    transverse_degree,
    _weight_mask,
)

__all__ = [
    "c0_quantize",
    "c0_dequantize",
    "assemble_H1",
    "ModelSymbol",
    "NormalFormResult",
    "birkhoff_normal_form",
    "conjugate_model",
    "verify_normal_form",
    "form_sign",
]


def form_sign(k: int) -> int:
    """``ε_k = (−1)^{k/2 + 1}`` for an even form of degree ``k``."""
    if k % 2:
        raise ValueError("form_sign is defined for even degrees")
    return -1 if (k // 2) % 2 == 0 else 1


@lru_cache(maxsize=None)
def _odd_to_even(m: int, mask: int):
    """``c(e_I) = factor · c(e_J)`` for odd ``I``; returns ``(J, factor)``."""
    full = (1 << (2 * m + 1)) - 1
    sign, J = blade_product(mask, full)
    s = volume_scalar(m)
    return J, QI.coerce(sign) / s


def c0_quantize(e: ChainElement) -> GradedSymbol:
    """Normalized Clifford quantization ``c_0`` applied termwise to a chain element."""
    m = e.m
    out = {}
    for (exps, mask), c in e.terms.items():
        k = bin(mask).count("1")
        coef = c * IPOW[c0_phase(k) % 4]
        if k % 2:
            J, fac = _odd_to_even(m, mask)
            coef = coef * fac
        else:
            J = mask
        d = out.setdefault(exps, {})
        new = d.get(J, ZERO) + coef
        if new:
            d[J] = new
        else:
            d.pop(J, None)
            if not d:
                del out[exps]
    return GradedSymbol(m, e.Nw, e.Mc, out)


@lru_cache(maxsize=None)
def _even_to_odd(m: int):
    table = {}
    for mask in range(1 << (2 * m + 1)):
        if bin(mask).count("1") % 2:
            J, fac = _odd_to_even(m, mask)
            table[J] = (mask, fac)
    return table


def c0_dequantize(sym: GradedSymbol, parity: str = "odd") -> ChainElement:
    """Inverse of :func:`c0_quantize` onto odd (default) or even forms."""
    m = sym.m
    out = {}
    table = _even_to_odd(m)
    for exps, d in sym.terms.items():
        for J, c in d.items():
            if parity == "odd":
                I, fac = table[J]
                coef = c / fac
            else:
                I, coef = J, c
            k = bin(I).count("1")
            coef = coef / IPOW[c0_phase(k) % 4] if isinstance(coef, QI) else coef / (1j ** c0_phase(k))
            out[(exps, I)] = coef
    return ChainElement(m, sym.Nw, sym.Mc, out)


def assemble_H1(m: int, data: KoszulData, Nw: int, Mc: int) -> GradedSymbol:
    """``H_1 = c_0(ξ_0 e_0 + ρ Σ s_j (x_j e_{2j−1} + ξ_j e_{2j}))``.

    Raises
    ------
    ValueError
        If ``Nw < 2`` or ``ρ`` has zero constant term.
    """
    if Nw < 2:
        raise ValueError("weight cap must be at least 2")
    if not data.rho_series(Nw + Mc).const:
        raise ValueError("rho must have a nonzero constant term")
    one = ChainElement(m, Nw, Mc, {((0,) * (4 * m + 3), 0): 1})
    return c0_quantize(apply_differential("w_x", one, data))


@dataclass
class ModelSymbol:
    """``d_1 = H_1 + c_0(r) + tail`` together with the data that defines ``H_1``.

    Parameters
    ----------
    data : KoszulData
        ``μ``, ``s_j`` and ``ρ``.
    Nw, Mc : int
        Truncation caps of every symbol involved.
    remainder_vec : ChainElement
        Real 1-form ``r`` with coefficients of weight ≥ 2.
    matrix_tail : GradedSymbol, optional
        Self-adjoint symbol divisible by ``h``.
    """

    data: KoszulData
    Nw: int
    Mc: int
    remainder_vec: ChainElement | None = None
    matrix_tail: GradedSymbol | None = None

    def __post_init__(self):
        m = self.data.m
        if self.remainder_vec is None:
            self.remainder_vec = ChainElement(m, self.Nw, self.Mc)
        if self.matrix_tail is None:
            self.matrix_tail = GradedSymbol(m, self.Nw, self.Mc)
        r = self.remainder_vec
        if (r.m, r.Nw, r.Mc) != (m, self.Nw, self.Mc):
            raise ValueError("remainder caps differ from the model caps")
        if any(bin(mask).count("1") != 1 for _, mask in r.terms):
            raise ValueError("remainder must be a 1-form")
        if r.terms and r.min_weight() < 2:
            raise ValueError("remainder must vanish to weight 2")
        if not r.is_real():
            raise ValueError("remainder must be real")
        t = self.matrix_tail
        if (t.m, t.Nw, t.Mc) != (m, self.Nw, self.Mc):
            raise ValueError("matrix tail caps differ from the model caps")
        L = 2 * (2 * m + 1)
        if any(e[L] < 1 for e in t.terms):
            raise ValueError("matrix tail must be divisible by h")
        if not t.is_self_adjoint(0 if t.exact else 1e-12):
            raise ValueError("matrix tail must be self-adjoint")

    @property
    def m(self) -> int:
        return self.data.m

    @property
    def H1(self) -> GradedSymbol:
        return assemble_H1(self.m, self.data, self.Nw, self.Mc)

    def symbol(self, Nw: int | None = None, Mc: int | None = None) -> GradedSymbol:
        Nw = self.Nw if Nw is None else Nw
        Mc = self.Mc if Mc is None else Mc
        H = assemble_H1(self.m, self.data, Nw, Mc)
        return H + c0_quantize(self.remainder_vec.with_caps(Nw, Mc)) + self.matrix_tail.with_caps(Nw, Mc)


    # JSON ----------------------------------------------------------------
    def to_json(self) -> dict:
        d = self.data
        return {
            "m": self.m,
            "mu": [_num_out(v) for v in d.mu],
            "s": [_num_out(v) for v in d.s],
            "rho": _rho_out(d._rho),
            "Nw": self.Nw,
            "Mc": self.Mc,
            "remainder": self.remainder_vec.to_json(),
            "matrix_tail": self.matrix_tail.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelSymbol":
        """Build from ``{"m", "mu", "Nw", "Mc"[, "s", "rho", "remainder", "matrix_tail"]}``."""
        missing = [k for k in ("m", "mu", "Nw", "Mc") if k not in obj]
        if missing:
            raise ValueError(f"model symbol JSON lacks keys {missing}")
        m, Nw, Mc = int(obj["m"]), int(obj["Nw"]), int(obj["Mc"])
        mu = [_num_in(v) for v in obj["mu"]]
        s = [_num_in(v) for v in obj["s"]] if obj.get("s") else None
        rho = _rho_in(m, Nw + Mc, obj.get("rho"))
        data = KoszulData(m, mu, s=s, rho=rho)
        r = ChainElement.from_json(obj["remainder"]) if obj.get("remainder") else None
        t = GradedSymbol.from_json(obj["matrix_tail"]) if obj.get("matrix_tail") else None
        return cls(data, Nw, Mc, r, t)


def _num_out(v):
    return repr(v) if isinstance(v, float) else fmt_rational(v)


def _num_in(v):
    if isinstance(v, float):
        return v
    return as_rational(v)


def _rho_out(rho):
    if rho is None:
        return None
    if isinstance(rho, TransverseSeries):
        return {"terms": [{"exp": list(e), "re": _num_out(c.re), "im": _num_out(c.im)} if isinstance(c, QI)
                          else {"exp": list(e), "re": repr(complex(c).real), "im": repr(complex(c).imag)}
                          for e, c in sorted(rho.coeffs.items())]}
    return _num_out(rho)


def _rho_in(m, Mc, obj):
    """``null``, a rational string, ``{"x0": [c_0, c_1, …]}`` or ``{"terms": […]}``."""
    if obj is None:
        return None
    if isinstance(obj, (str, int, float)):
        return _num_in(obj)
    if "x0" in obj:
        return TransverseSeries.x0_poly(m, Mc, [_num_in(c) for c in obj["x0"]])
    coeffs = {}
    for t in obj["terms"]:
        re, im = t["re"], t.get("im", "0")
        if "." in str(re) or "e" in str(re).lower() or "." in str(im):
            c = complex(float(re), float(im))
            c = c.real if c.imag == 0 else c
        else:
            c = QI(as_rational(re), as_rational(im))
        coeffs[tuple(t["exp"])] = c
    return TransverseSeries(m, Mc, coeffs)


@dataclass
class NormalFormResult:
    """Generators and normal form produced by :func:`birkhoff_normal_form`.

    ``f`` is a real scalar symbol, ``a`` a real even form, ``omega`` a real
    odd form with ``Δ̃⁰ω = 0`` and ``∂_{ξ_0}ω = 0``.  ``history`` keeps one
    record per elimination step.
    """

    f: GradedSymbol
    a: ChainElement
    omega: ChainElement
    achieved_weight: int
    Nw: int
    Mc: int
    history: list = field(default_factory=list)

    @property
    def a_min_weight(self):
        return self.a.min_weight()

    @property
    def f_min_weight(self):
        return self.f.min_weight()

    def to_json(self) -> dict:
        return {"f": self.f.to_json(), "a": self.a.to_json(), "omega": self.omega.to_json(),
                "achieved_weight": self.achieved_weight, "Nw": self.Nw, "Mc": self.Mc, "steps": len(self.history)}


def conjugate_model(sym: GradedSymbol, f: GradedSymbol, a: ChainElement, check: bool = True) -> GradedSymbol:
    """``e^{ic_0(a)} e^{(i/h)f} sym e^{−(i/h)f} e^{−ic_0(a)}``."""
    out = sym
    if f:
        out = exp_conjugate(f, "scalar_over_h", out, check=check)
    if a:
        out = exp_conjugate(c0_quantize(a), "matrix", out, check=check)
    return out


def _h_shift(e: ChainElement, k: int) -> ChainElement:
    L = 2 * (2 * e.m + 1)
    out = {}
    for (exps, mask), c in e.terms.items():
        if exps[L] + k < 0:
            raise ArithmeticError("negative power of h")
        out[(exps[:L] + (exps[L] + k,), mask)] = c
    return ChainElement(e.m, e.Nw, e.Mc, out)


def _by_degree(e: ChainElement) -> dict:
    out = {}
    for key, c in e.terms.items():
        out.setdefault(bin(key[1]).count("1"), {})[key] = c
    return {k: ChainElement._raw(e.m, e.Nw, e.Mc, t) for k, t in out.items()}


def _realify(e: ChainElement, tol: float) -> ChainElement:
    """Drop imaginary round-off (float mode) and assert reality."""
    out = {}
    for key, c in e.terms.items():
        if isinstance(c, QI):
            if c.im != 0:
                raise ArithmeticError("non-real correction produced (algebra bug)")
            out[key] = c
        else:
            z = complex(c)
            if abs(z.imag) > tol * max(1.0, abs(z)):
                raise ArithmeticError(f"non-real correction {z} produced")
            if abs(z.real) > tol:
                out[key] = z.real
    return ChainElement._raw(e.m, e.Nw, e.Mc, out)


def _chain_to_scalar(e: ChainElement, Nw: int, Mc: int) -> GradedSymbol:
    terms = {}
    for (exps, mask), c in e.terms.items():
        if mask:
            raise ValueError("expected a 0-form")
        terms[exps] = {0: c}
    return GradedSymbol(e.m, Nw, Mc, terms)


def birkhoff_normal_form(d1: ModelSymbol, N: int, max_steps: int | None = None, tol: float = 1e-11) -> NormalFormResult:
    """Conjugate ``d_1`` to ``H_1 + c_0(ω)`` through weight ``N``.

    Each step takes the lowest-weight part ``u = u_0 + h u_h`` of the
    current defect (``u_0`` is a 1-form) and decomposes both pieces with
    :func:`magdirac.koszul.hodge_decompose` relative to ``(i_x, D)``:

    * ``u_0 = υ + i_x D b + D i_x g``  gives  ``f += i_x g``, ``a += −D b / (2ε_2)``, ``ω += υ``;
    * ``u_h = υ' + i_x D b' + D i_x g'``  gives
      ``a += −ε i_x g' − h ε D b' / 2`` (``ε`` of the resulting degree), ``ω += hυ'``.

    The conjugation is recomputed from scratch after every step, so the
    quadratic and higher terms are eliminated by later steps (they sit
    strictly higher in ``weight + transverse degree``).

    Raises
    ------
    ValueError
        If the caps are too small (``Nw < N + 2``).
    ArithmeticError
        If an intermediate symbol stops being self-adjoint.
    """
    m = d1.m
    if d1.Nw < N + 2:
        raise ValueError(f"weight cap Nw={d1.Nw} must be at least N+2={N + 2}")
    Nw, Mc = d1.Nw, d1.Mc
    Mw = Mc + 1  # working transverse cap
    C = Nw + Mc
    data = d1.data
    dplus = KoszulData(m, data.mu, s=data.s, rho=data._rho, e0_sign=1)
    sym = d1.symbol(Nw, Mw)
    H1 = assemble_H1(m, data, Nw, Mw)
    f = GradedSymbol(m, Nw, Mw)
    a = ChainElement(m, Nw, Mw)
    omega = ChainElement(m, Nw, Mw)
    history = []
    wm, tm = _weight_mask(m)
    if max_steps is None:
        max_steps = 8 * (C + 2) * (N + 2)
    exact = sym.exact
    sa_tol = 0 if exact else 1e-9
    L = 2 * (2 * m + 1)
    for step in range(max_steps):
        P = conjugate_model(sym, f, a)
        if not P.is_self_adjoint(sa_tol):
            raise ArithmeticError("conjugated symbol is not self-adjoint (algebra bug)")
        R = P - H1 - c0_quantize(omega)
        if not exact:
            R = R.chop(tol)
        r = c0_dequantize(R, "odd")
        live = {}
        for key, c in r.terms.items():
            e = key[0]
            w = sum(x * y for x, y in zip(e, wm))
            if w <= N and w + sum(x * y for x, y in zip(e, tm)) <= C:
                live[key] = c
        if not live:
            break
        W = min(sum(x * y for x, y in zip(k[0], wm)) for k in live)
        u = ChainElement(m, Nw, Mw, {k: c for k, c in live.items() if sum(x * y for x, y in zip(k[0], wm)) == W})
        if not exact:
            u = _realify(u, 1e-9)
        u0 = ChainElement._raw(m, Nw, Mw, {k: c for k, c in u.terms.items() if k[0][L] == 0})
        uh = _h_shift(ChainElement._raw(m, Nw, Mw, {k: c for k, c in u.terms.items() if k[0][L] > 0}), -1)
        df = ChainElement(m, Nw, Mw)
        da = ChainElement(m, Nw, Mw)
        dom = ChainElement(m, Nw, Mw)
        if u0:
            if any(bin(mask).count("1") != 1 for _, mask in u0.terms):
                raise ArithmeticError("h-free remainder is not a 1-form")
            hd = hodge_decompose(u0, dplus)
            g = hd.g
            df = df + apply_differential("i_x", g, dplus).with_caps(Nw, Mw)
            Db = apply_differential("wt_d", hd.b, dplus)
            da = da + Db.scale(mpq(-1, 2 * form_sign(2))).with_caps(Nw, Mw)
            dom = dom + hd.harmonic
        if uh:
            hd = hodge_decompose(uh, dplus)
            ixg = apply_differential("i_x", hd.g, dplus)
            for k, part in _by_degree(ixg).items():
                da = da + part.scale(-form_sign(k)).with_caps(Nw, Mw)
            Db = apply_differential("wt_d", hd.b, dplus)
            for k, part in _by_degree(Db).items():
                da = da + _h_shift(part, 1).scale(mpq(-form_sign(k), 2)).with_caps(Nw, Mw)
            dom = dom + _h_shift(hd.harmonic, 1)
        if not exact:
            df, da, dom = _realify(df, 1e-9), _realify(da, 1e-9), _realify(dom, 1e-9)
        if not (df or da or dom):
            raise ArithmeticError(f"no progress possible at weight {W}")
        f = f + _chain_to_scalar(df, Nw, Mw)
        a = a + da
        omega = omega + dom
        history.append({"step": step, "weight": W, "f": df, "a": da, "omega": dom})
    else:
        raise RuntimeError("normal form iteration did not converge within max_steps")
    return NormalFormResult(f, a, omega, N, Nw, Mc, history)


def verify_normal_form(d1: ModelSymbol, result: NormalFormResult, tol: float = 0.0) -> dict:
    """Recompute the conjugation and return ``{weight: max |defect|}`` for weights ``0..Nw``.

    The defect is ``e^{ic_0(a)} e^{(i/h)f} d_1 e^{−(i/h)f} e^{−ic_0(a)} − H_1 − c_0(ω)``
    truncated to the caps of ``d_1``.
    """
    Nw, Mw = result.f.Nw, result.f.Mc
    sym = d1.symbol(Nw, Mw)
    H1 = assemble_H1(d1.m, d1.data, Nw, Mw)
    P = conjugate_model(sym, result.f, result.a)
    D = (P - H1 - c0_quantize(result.omega)).with_caps(d1.Nw, d1.Mc)
    prof = {w: 0.0 for w in range(d1.Nw + 1)}
    for w, v in D.weight_profile().items():
        prof[w] = v if v > tol else 0.0
    return prof
