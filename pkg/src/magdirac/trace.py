"""Heat traces of the model operator and the leading trace density.

On the diagonal the heat kernel of the squared model operator is given by
Mehler's formula,

    tr e^{−t D²}(0, 0) = (4π)^{−m} t^{−1/2} Π_j λ_j / tanh(t λ_j),

and expanding ``coth`` as ``1 + 2Σ_k e^{−2ktλ}`` turns it into a sum over
Landau levels weighted by ``2^{Z_τ}``.  The leading density ``u_0`` pairs a
smooth part with threshold distributions ``v_{a,b,c,Λ}``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

__all__ = [
    "HeatParams",
    "mehler_trace",
    "landau_trace_sum",
    "LandauSum",
    "ElementaryDistribution",
    "TestFunction",
    "gaussian",
    "odd_gaussian",
    "gaussian_moment",
    "bump",
    "elementary_distribution_eval",
    "u0_evaluate",
    "U0Result",
    "landau_values",
]


@dataclass(frozen=True)
class HeatParams:
    """``λ_j = μ_j ν_p`` together with the heat time ``t``."""

    m: int
    lam: tuple
    t: float

    def __post_init__(self):
        if len(self.lam) != self.m:
            raise ValueError(f"lambda must have length m={self.m}")
        if any(l <= 0 for l in self.lam):
            raise ValueError("lambda_j must be positive")
        if not self.t > 0:
            raise ValueError("heat time t must be positive")

    @classmethod
    def from_mu(cls, mu, nu_p: float, t: float):
        return cls(len(mu), tuple(float(v) * nu_p for v in mu), t)


def _params(p_or_m, lam=None, t=None) -> HeatParams:
    if isinstance(p_or_m, HeatParams):
        return p_or_m
    return HeatParams(int(p_or_m), tuple(float(v) for v in lam), float(t))


def mehler_trace(p, lam=None, t=None) -> float:
    """``(4π)^{−m} t^{−1/2} Π λ_j / tanh(tλ_j)``.

    Accepts a :class:`HeatParams` or ``(m, lam, t)``.

    Examples
    --------
    >>> round(mehler_trace(1, [1.0], 1.0), 8)
    0.10448803
    """
    p = _params(p, lam, t)
    out = (4 * math.pi) ** (-p.m) * p.t ** -0.5
    for l in p.lam:
        out *= l / math.tanh(p.t * l)
    return out


@dataclass
class LandauSum:
    """Truncated Landau sum, its certified tail bound and the lattice box used."""

    value: float
    tail: float
    box: tuple

    def __float__(self):
        return self.value


def landau_trace_sum(p, lam=None, t=None, tail_tol: float = 1e-13, max_points: int = 2_000_000) -> LandauSum:
    """``(4π)^{−m} t^{−1/2} Πλ_j Σ_τ 2^{Z_τ} e^{−2t τ·λ}`` over a box of ``τ``.

    The box ``0 ≤ τ_j ≤ K_j`` is chosen so that the tail bound
    ``Π(S_j + ε_j) − Π S_j`` with ``ε_j = 2q_j^{K_j+1}/(1−q_j)``,
    ``q_j = e^{−2tλ_j}``, is below ``tail_tol`` (relative to the prefactor).

    Raises
    ------
    ValueError
        If the box needed for ``tail_tol`` exceeds ``max_points`` lattice points.
    """
    p = _params(p, lam, t)
    pref = (4 * math.pi) ** (-p.m) * p.t ** -0.5 * math.prod(p.lam)
    qs = [math.exp(-2 * p.t * l) for l in p.lam]
    per = tail_tol / max(pref, 1e-300) / (p.m * 4 ** p.m)
    K = []
    for q in qs:
        k = 0
        while 2 * q ** (k + 1) / (1 - q) > per:
            k += 1
            if k > 10 ** 7:
                raise ValueError("tail bound unachievable")
        K.append(k)
    if math.prod(k + 1 for k in K) > max_points:
        raise ValueError(f"lattice box {K} exceeds the cap of {max_points} points")
    grids = np.meshgrid(*[np.arange(k + 1) for k in K], indexing="ij")
    expo = np.zeros(grids[0].shape)
    mult = np.ones(grids[0].shape)
    for g, l in zip(grids, p.lam):
        expo += g * l
        mult *= np.where(g > 0, 2.0, 1.0)
    terms = (mult * np.exp(-2 * p.t * expo)).ravel()
    partial = math.fsum(terms.tolist())
    S = [1 + 2 * q * (1 - q ** k) / (1 - q) for q, k in zip(qs, K)]
    eps = [2 * q ** (k + 1) / (1 - q) for q, k in zip(qs, K)]
    tail = math.prod(s + e for s, e in zip(S, eps)) - math.prod(S)
    return LandauSum(pref * partial, pref * tail, tuple(K))


# ----------------------------------------------------------------------
# test functions
# ----------------------------------------------------------------------

@dataclass
class TestFunction:
    """Smooth rapidly decaying test function with exact derivatives.

    ``derivative(k)`` returns a vectorized callable for ``φ^{(k)}``.
    ``parity`` is ``+1``/``−1`` when known, ``gauss_bound = (A, t)`` certifies
    ``|φ(s)| ≤ A e^{−ts²}`` and enables tail bounds.
    """

    __test__ = False  # not a pytest class

    derivative: Callable[[int], Callable]
    parity: int | None = None
    gauss_bound: tuple | None = None
    support: float | None = None
    name: str = "phi"

    def __call__(self, s):
        return self.derivative(0)(s)


def gaussian_moment(p: int, t: float, scale: float = 1.0) -> TestFunction:
    """``φ(s) = scale · s^p e^{−ts²}``; derivatives via ``(Q' − 2tsQ) e^{−ts²}``."""
    if t <= 0:
        raise ValueError("Gaussian parameter must be positive")
    base = np.zeros(p + 1)
    base[p] = scale
    cache = {0: base}

    def poly(k):
        if k not in cache:
            q = poly(k - 1)
            cache[k] = P.polysub(P.polyder(q), P.polymulx(q) * 2 * t) if len(q) > 1 else P.polymulx(q) * (-2 * t)
        return cache[k]

    def derivative(k):
        c = poly(k)
        return lambda s: P.polyval(s, c) * np.exp(-t * np.asarray(s, dtype=float) ** 2)

    # |s^p| e^{-ts^2} <= (p/(2 t'))^{p/2} e^{-p/2} e^{-(t - t')s^2} with t' = t/2
    if p == 0:
        bound = (abs(scale), t)
    else:
        tp = t / 2
        bound = (abs(scale) * (p / (2 * tp)) ** (p / 2) * math.exp(-p / 2), t - tp)
    return TestFunction(derivative, parity=1 if p % 2 == 0 else -1, gauss_bound=bound, name=f"s^{p} exp(-{t} s^2)")


def gaussian(t: float) -> TestFunction:
    """``e^{−ts²}``."""
    return gaussian_moment(0, t)


def odd_gaussian(t: float) -> TestFunction:
    """``s e^{−ts²}``."""
    return gaussian_moment(1, t)


def bump(radius: float) -> TestFunction:
    """``exp(−1/(1 − (s/R)²))`` on ``|s| < R``; only the value (order 0) is provided."""
    R = float(radius)

    def derivative(k):
        if k:
            raise NotImplementedError("bump only supplies order-0 values")

        def f(s):
            s = np.asarray(s, dtype=float)
            y = 1 - (s / R) ** 2
            out = np.zeros_like(s)
            mask = y > 0
            out[mask] = np.exp(-1 / y[mask])
            return out
        return f

    return TestFunction(derivative, parity=1, support=R, name=f"bump(R={R})")


# ----------------------------------------------------------------------
# elementary distributions
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ElementaryDistribution:
    """``v_{a,b,c,Λ}(φ) = (−1)^a ∫ |s| s^b (s²−2νΛ)^{c−1/2} H(s²−2νΛ) φ^{(a)}(s) ds``."""

    a: int
    b: int
    c: int
    Lambda: float
    nu: float

    def __post_init__(self):
        if self.a < 0 or self.c < 0:
            raise ValueError("a and c must be non-negative")
        if self.Lambda <= 0 or self.nu <= 0:
            raise ValueError("Lambda and nu must be positive")


def elementary_distribution_eval(d: ElementaryDistribution, phi: TestFunction, epsabs: float = 1e-13) -> float:
    """Evaluate ``v_{a,b,c,Λ}(φ)``.

    With ``u = s² − 2νΛ`` the two half-lines combine into
    ``½ ∫_0^∞ u^{c−1/2} [s^b φ^{(a)}(s) + (−s)^b φ^{(a)}(−s)] du``,
    ``s = √(u + 2νΛ)``; the ``u^{c−1/2}`` endpoint behaviour is handled by
    an algebraic-weight quadrature on ``[0, 1]``.

    Examples
    --------
    >>> v = elementary_distribution_eval(ElementaryDistribution(0, 0, 0, 1.0, 0.5), gaussian(1.0))
    >>> abs(v - math.sqrt(math.pi) * math.exp(-1.0)) < 1e-12
    True
    """
    thr = 2 * d.nu * d.Lambda
    if phi.parity is not None and phi.parity * (-1) ** (d.a + d.b) == -1:
        return 0.0
    der = phi.derivative(d.a)

    def g(u):
        s = math.sqrt(u + thr)
        return 0.5 * (s ** d.b * float(der(s)) + (-s) ** d.b * float(der(-s)))

    expo = d.c - 0.5
    first, err1 = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(expo, 0.0), epsabs=epsabs, epsrel=1e-13, limit=200)
    if phi.support is not None:
        upper = max(phi.support ** 2 - thr, 1.0)
        second, err2 = integrate.quad(lambda u: u ** expo * g(u), 1.0, upper, epsabs=epsabs, epsrel=1e-13, limit=200) if upper > 1 else (0.0, 0.0)
    else:
        second, err2 = integrate.quad(lambda u: u ** expo * g(u), 1.0, np.inf, epsabs=epsabs, epsrel=1e-13, limit=400)
    if err1 + err2 > 1e-9:
        raise ArithmeticError(f"quadrature did not converge (error estimate {err1 + err2})")
    return (-1) ** d.a * (first + second)


def landau_values(mu, cap: float) -> list:
    """``[(Λ, Σ_{μ·τ=Λ} 2^{Z_τ})]`` for ``0 < Λ = μ·τ ≤ cap``, sorted."""
    mu = [float(v) for v in mu]
    box = [range(int(math.floor(cap / v + 1e-12)) + 1) for v in mu]
    groups = {}
    for tau in itertools.product(*box):
        if not any(tau):
            continue
        lam = sum(t * v for t, v in zip(tau, mu))
        if lam > cap * (1 + 1e-14):
            continue
        key = round(lam, 12)
        groups[key] = groups.get(key, 0) + 2 ** sum(1 for t in tau if t)
    return sorted(groups.items())


@dataclass
class U0Result:
    """Value of ``u_0(φ)`` with the Λ-cap used and a tail bound (``nan`` if unavailable)."""

    value: float
    lambda_cap: float
    tail: float
    terms: list = field(default_factory=list)

    def __float__(self):
        return self.value


def u0_evaluate(phi: TestFunction, nu_p: float, mu, lambda_cap: float | None = None, tail_tol: float = 1e-14) -> U0Result:
    """``u_0(φ) = c_{00} ∫φ + Σ_{Λ ≤ cap} c_{00} (Σ_{μ·τ=Λ} 2^{Z_τ}) v_{0,0,0,Λ}(φ)``.

    ``c_{00} = ν^m Π μ_j / (4π)^m``.  For a Gaussian-bounded ``φ`` the tail
    beyond the cap is bounded through ``|v_{0,0,0,Λ}(φ)| ≤ A √(π/t) e^{−2tνΛ}``
    and, when ``lambda_cap`` is omitted, the cap is grown until the bound is
    below ``tail_tol``.  The number of thresholds, and so the cost, grows
    like ``(tν)^{−m}`` for a bound ``e^{−ts²}``.

    Raises
    ------
    ValueError
        If no cap is given and ``φ`` has no Gaussian bound.
    """
    mu = [float(v) for v in mu]
    m = len(mu)
    nu = float(nu_p)
    c00 = nu ** m * math.prod(mu) / (4 * math.pi) ** m

    def tail_for(cap):
        if phi.gauss_bound is None:
            return math.nan
        A, t = phi.gauss_bound
        qs = [math.exp(-2 * t * nu * v) for v in mu]
        total = math.prod((1 + q) / (1 - q) for q in qs) - 1
        inside = sum(w * math.exp(-2 * t * nu * lam) for lam, w in landau_values(mu, cap))
        return c00 * A * math.sqrt(math.pi / t) * max(total - inside, 0.0)

    if lambda_cap is None:
        if phi.gauss_bound is None and phi.support is None:
            raise ValueError("lambda_cap is required for test functions without a Gaussian bound")
        if phi.support is not None:
            lambda_cap = phi.support ** 2 / (2 * nu)
        else:
            lambda_cap = max(mu)
            while tail_for(lambda_cap) > tail_tol:
                lambda_cap *= 1.5
    if phi.support is not None:
        # every threshold beyond support^2/(2ν) contributes exactly zero
        lambda_cap = min(lambda_cap, phi.support ** 2 / (2 * nu))
    der0 = phi.derivative(0)
    if phi.parity == -1:
        smooth = 0.0
    elif phi.support is not None:
        smooth, _ = integrate.quad(lambda s: float(der0(s)), -phi.support, phi.support, epsabs=1e-14, epsrel=1e-13, limit=200)
    else:
        smooth, _ = integrate.quad(lambda s: float(der0(s)), -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
    terms = []
    for lam, w in landau_values(mu, lambda_cap):
        v = elementary_distribution_eval(ElementaryDistribution(0, 0, 0, lam, nu), phi)
        terms.append((lam, w, v))
    value = c00 * (smooth + math.fsum(w * v for _, w, v in terms))
    tail = 0.0 if phi.support is not None else tail_for(lambda_cap)
    return U0Result(value, lambda_cap, tail, terms)
