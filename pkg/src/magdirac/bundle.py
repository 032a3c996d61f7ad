"""Explicit spectra of the Dirac operator on a circle bundle.

The operator splits into Type 1 eigenvalues ``(−1)^p h(k + ε − m/2 − 1/h)``
with multiplicity ``dim H^p`` and Type 2 pairs attached to positive
eigenvalues of the ``∂̄_k`` Laplacians.  Geometry is summarized by the
Euler characteristic polynomial ``χ(k)``; in the Kodaira regime only
``p = 0`` contributes and ``dim H^0 = χ(k)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erfc

__all__ = [
    "BundleConfig",
    "SpectralSample",
    "EtaSum",
    "type1_spectrum",
    "type2_eigenvalue_pair",
    "type2_gap",
    "weyl_count_and_kernel",
    "eta_erfc_sum",
    "erfc_sign",
    "scaling_exponent_fit",
    "resonant_h",
]

RESONANCE_TOL = 1e-9


@dataclass
class BundleConfig:
    """Circle-bundle data.

    Parameters
    ----------
    m : int
        Complex dimension of the base.
    epsilon : float
        Metric parameter.
    chi : list of int
        Coefficients ``c_0, …, c_m`` of ``χ(k) = Σ c_i k^i``.
    kodaira_kmin : int
        Smallest ``k`` of the Kodaira regime.
    cohomology : dict, optional
        ``{k: {p: dim H^p}}`` for ``k`` below the Kodaira threshold.
    laplace_data : dict, optional
        ``{(k, p): [(μ, multiplicity), …]}`` for Type 2 eigenvalues.
    type2_mu_min : float, optional
        Lower bound for ``μ`` in the positive Laplace spectrum.  When set,
        windows are checked against the Type-2 gap; when ``None`` the
        exclusion of Type 2 from small windows is taken as given.
    """

    m: int = 1
    epsilon: float = 0.25
    chi: list = field(default_factory=lambda: [0, 1])
    kodaira_kmin: int = 1
    cohomology: dict | None = None
    laplace_data: dict | None = None
    type2_mu_min: float | None = None

    def __post_init__(self):
        errs = self.validation_errors()
        if errs:
            raise ValueError("; ".join(errs))

    def validation_errors(self) -> list:
        errs = []
        if not isinstance(self.m, int) or self.m < 1:
            errs.append(f"m: must be an integer >= 1, got {self.m!r}")
        if not (isinstance(self.epsilon, (int, float, Fraction)) and self.epsilon > 0):
            errs.append(f"epsilon: must be positive, got {self.epsilon!r}")
        if not self.chi or any(int(c) != c for c in self.chi):
            errs.append(f"chi: must be a non-empty list of integers, got {self.chi!r}")
        elif isinstance(self.m, int) and len(self.chi) - 1 > self.m:
            errs.append(f"chi: degree {len(self.chi) - 1} exceeds m={self.m}")
        if self.type2_mu_min is not None:
            if self.type2_mu_min <= 0:
                errs.append("type2_mu_min: must be positive")
            elif not self.epsilon < 0.5 * self.type2_mu_min ** 2:
                errs.append("epsilon: must be below the Type-2 gap bound mu_min^2/2")
        return errs

    def chi_value(self, k: int) -> int:
        return sum(int(c) * k ** i for i, c in enumerate(self.chi))

    def cohomology_at(self, k: int) -> dict:
        """``{p: dim H^p}`` at ``k``."""
        if k >= self.kodaira_kmin:
            return {0: self.chi_value(k)}
        if self.cohomology is None or k not in self.cohomology:
            raise ValueError(f"k={k} is below the Kodaira threshold {self.kodaira_kmin} and no cohomology data is configured")
        return dict(self.cohomology[k])

    # -- I/O -------------------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict):
        d = dict(d)
        known = {"m", "epsilon", "chi", "kodaira_kmin", "cohomology", "laplace_data", "type2_mu_min"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown bundle config keys: {unknown}")
        if "cohomology" in d and d["cohomology"] is not None:
            d["cohomology"] = {int(k): {int(p): int(v) for p, v in row.items()} for k, row in d["cohomology"].items()}
        if "laplace_data" in d and d["laplace_data"] is not None:
            d["laplace_data"] = {tuple(int(t) for t in key.split(",")): [tuple(x) for x in val] for key, val in d["laplace_data"].items()}
        return cls(**d)

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text) if text.strip() else {})

    def to_dict(self) -> dict:
        return {"m": self.m, "epsilon": self.epsilon, "chi": list(self.chi), "kodaira_kmin": self.kodaira_kmin}


def _offset(cfg: BundleConfig, h) -> float:
    """``x = 1/h − ε + m/2``; Type-1 eigenvalues vanish exactly at ``k = x``."""
    return 1 / h - cfg.epsilon + cfg.m / 2


def resonant_h(cfg: BundleConfig, k: int) -> float:
    """The ``h`` with ``1/h = k + ε − m/2``."""
    return 1 / (k + cfg.epsilon - cfg.m / 2)


def type1_spectrum(cfg: BundleConfig, h: float, k_range: Iterable[int]) -> list:
    """Type 1 eigenvalues ``(−1)^p h(k + ε − m/2 − 1/h)`` with multiplicity ``dim H^p``.

    Returns a list of ``(eigenvalue, multiplicity, k, p)`` sorted by eigenvalue.

    Examples
    --------
    >>> cfg = BundleConfig()
    >>> type1_spectrum(cfg, 0.01, [100])[0][:2]
    (-0.0025, 100)
    """
    if not h > 0:
        raise ValueError("h must be positive")
    out = []
    for k in k_range:
        base = h * ((k - 1 / h) + (cfg.epsilon - cfg.m / 2))
        for p, dim in sorted(cfg.cohomology_at(k).items()):
            if dim:
                out.append(((-1) ** p * base, int(dim), k, p))
    out.sort(key=lambda r: r[0])
    return out


def type2_eigenvalue_pair(cfg: BundleConfig, h: float, k: int, p: int, mu: float) -> tuple:
    """Both roots ``h[((−1)^{p+1}ε ± √((2k+ε(2p−m)−2/h+1)² + 4μ²ε))/2]``.

    Examples
    --------
    >>> a, b = type2_eigenvalue_pair(BundleConfig(), 0.01, 100, 0, 3.0)
    >>> f"{a:.7g} {b:.7g}"
    '0.01421165 -0.01671165'
    """
    eps = cfg.epsilon
    inner = (2 * k + eps * (2 * p - cfg.m) - 2 / h + 1) ** 2 + 4 * mu * mu * eps
    root = math.sqrt(inner)
    lead = (-1) ** (p + 1) * eps
    return h * (lead + root) / 2, h * (lead - root) / 2


def type2_gap(cfg: BundleConfig, mu_min: float | None = None) -> float:
    """Constant ``g`` with ``|λ_±| ≥ g h`` for every Type 2 eigenvalue."""
    mu = cfg.type2_mu_min if mu_min is None else mu_min
    if mu is None:
        raise ValueError("no Type-2 spectral bound configured")
    return (math.sqrt(4 * mu * mu * cfg.epsilon) - cfg.epsilon) / 2


def erfc_sign(x):
    """``E(x) = sign(x) erfc(|x|)`` with ``sign(0) = 0``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * erfc(np.abs(x))


@dataclass
class EtaSum:
    """``Σ mult·E(λ/√h)``, the window ``|λ| ≤ window·√h`` it covers and a tail bound."""

    value: float
    window: float
    tail: float

    def __float__(self):
        return self.value


def eta_erfc_sum(eigenvalues: Sequence, h: float, window: float | None = None, tail_tol: float = 1e-12,
                 tail_density: float = 0.0) -> EtaSum:
    """Erfc-regularized eta sum over ``(λ, multiplicity)`` pairs.

    Eigenvalues with ``|λ|/√h > window`` are dropped; the tail outside the
    window is bounded by ``tail_density · erfc(window)`` where ``tail_density``
    bounds the total multiplicity beyond the window weighted by the decay of
    ``erfc`` (``0`` when the supplied list is complete).

    Raises
    ------
    ValueError
        If the tail bound exceeds ``tail_tol``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    rh = math.sqrt(h)
    lam = np.array([float(e[0]) for e in eigenvalues], dtype=float)
    mult = np.array([float(e[1]) for e in eigenvalues], dtype=float)
    x = lam / rh if len(lam) else lam
    if window is None:
        window = float(np.max(np.abs(x))) if len(x) else 0.0
        tail = 0.0
    else:
        tail = tail_density * float(erfc(window))
        keep = np.abs(x) <= window
        x, mult = x[keep], mult[keep]
    if tail > tail_tol:
        raise ValueError(f"window {window} too small: erfc tail bound {tail:.3g} exceeds {tail_tol:.3g}")
    vals = mult * erfc_sign(x)
    return EtaSum(math.fsum(vals.tolist()), window, tail)


@dataclass
class SpectralSample:
    """Window count, kernel dimension and eta proxy at one value of ``h``."""

    h: float
    eigenvalues: list
    N: int
    k_h: int
    eta_erfc: float
    c: float = 0.0
    eta_window: float = 0.0

    def __post_init__(self):
        vals = [e[0] for e in self.eigenvalues]
        if vals != sorted(vals):
            raise ValueError("eigenvalues must be sorted ascending")
        if any(int(e[1]) != e[1] or e[1] <= 0 for e in self.eigenvalues):
            raise ValueError("multiplicities must be positive integers")

    @property
    def eta_jump(self) -> int:
        """Jump of the eta proxy across the resonance: ``E(0±) = ±1`` on the kernel."""
        return 2 * self.k_h

    def stat(self, name: str):
        if name == "N":
            return self.N
        if name == "k_h":
            return self.k_h
        if name == "eta_jump":
            return self.eta_jump
        if name == "eta_erfc":
            return self.eta_erfc
        raise ValueError(f"unknown statistic {name!r}")

    def to_row(self) -> dict:
        return {"h": repr(float(self.h)), "N": self.N, "k_h": self.k_h, "eta_erfc": repr(self.eta_erfc)}


def weyl_count_and_kernel(cfg: BundleConfig, h: float, c: float, eta_window: float = 7.0) -> SpectralSample:
    """Count Type 1 eigenvalues with ``|λ| ≤ ch`` and record ``k_h``.

    ``|λ| ≤ ch`` is ``|k′ − x| ≤ c`` with ``x = 1/h − ε + m/2``.  The eta
    proxy sums ``χ(k′)E(√h(k′ − x))`` over ``|k′ − x| ≤ eta_window/√h``.

    Raises
    ------
    ValueError
        If ``c`` reaches the Type-2 gap and no ``laplace_data`` is configured,
        or the window reaches below the Kodaira threshold without cohomology data.

    Examples
    --------
    >>> s = weyl_count_and_kernel(BundleConfig(), 1 / 99.75, 0.5)
    >>> s.N, s.k_h
    (100, 100)
    """
    if not h > 0 or c < 0:
        raise ValueError("need h > 0 and c >= 0")
    if cfg.type2_mu_min is not None and c >= type2_gap(cfg) and cfg.laplace_data is None:
        raise ValueError(f"c={c} reaches the Type-2 gap {type2_gap(cfg):.6g}; laplace_data required")
    x = _offset(cfg, h)
    lo, hi = math.ceil(x - c - RESONANCE_TOL), math.floor(x + c + RESONANCE_TOL)
    ks = range(lo, hi + 1)
    window_eigs = [(lam, mult) for lam, mult, _, _ in type1_spectrum(cfg, h, ks) if abs(lam) <= c * h * (1 + 1e-12) + 1e-15]
    if cfg.laplace_data:
        for (k, p), rows in cfg.laplace_data.items():
            for mu, mult in rows:
                for lam in type2_eigenvalue_pair(cfg, h, k, p, mu):
                    if abs(lam) <= c * h:
                        window_eigs.append((lam, int(mult)))
    # merge equal eigenvalues
    merged = {}
    for lam, mult in window_eigs:
        key = round(lam, 15)
        merged[key] = merged.get(key, 0) + mult
    eigs = sorted(merged.items())
    N = sum(m for _, m in eigs)
    kr = round(x)
    k_h = cfg.chi_value(kr) if abs(kr - x) <= RESONANCE_TOL and kr >= cfg.kodaira_kmin else 0
    span = eta_window / math.sqrt(h)
    ke = range(max(math.ceil(x - span), cfg.kodaira_kmin), math.floor(x + span) + 1)
    if math.ceil(x - span) < cfg.kodaira_kmin and cfg.cohomology is None:
        raise ValueError("eta window reaches below the Kodaira threshold")
    spec1 = [(lam, mult) for lam, mult, _, _ in type1_spectrum(cfg, h, ke)]
    eta = eta_erfc_sum(spec1, h).value
    return SpectralSample(h, eigs, N, k_h, eta, c, eta_window)


def scaling_exponent_fit(samples: Sequence[SpectralSample], stat: str = "N") -> tuple:
    """OLS slope and standard error of ``log stat`` against ``log(1/h)``.

    Examples
    --------
    >>> cfg = BundleConfig()
    >>> ss = [weyl_count_and_kernel(cfg, resonant_h(cfg, k), 0.1) for k in range(50, 501, 50)]
    >>> slope, err = scaling_exponent_fit(ss, "k_h")
    >>> abs(slope - 1) < 0.01
    True
    """
    if len(samples) < 10:
        raise ValueError(f"need at least 10 samples, got {len(samples)}")
    hs = np.array([s.h for s in samples], dtype=float)
    if hs.max() / hs.min() < 10 * (1 - 1e-9):
        raise ValueError("samples must span at least one decade in h")
    y = np.array([s.stat(stat) for s in samples], dtype=float)
    if np.any(y <= 0):
        raise ValueError(f"statistic {stat!r} has nonpositive values; cannot take logarithms")
    X = np.log(1 / hs)
    Y = np.log(y)
    A = np.vstack([X, np.ones_like(X)]).T
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - A @ coef
    dof = len(X) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    sxx = float(((X - X.mean()) ** 2).sum())
    return float(coef[0]), math.sqrt(s2 / sxx)
