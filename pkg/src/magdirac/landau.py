"""Spectrum of the constant-field magnetic Dirac operator on R^m.

The operator is

    D = Σ_j (μ_j/2)^{1/2} [γ_{2j} h∂_{x_j} + i γ_{2j−1} x_j]
      = Σ_j (μ_j/2)^{1/2} [w_j∧ A_j + ι_{w̄_j} A_j*],

with ``A_j ψ_τ = √(2hτ_j) ψ_{τ−e_j}``.  It preserves the label ``τ + k``
of ``ψ_τ ⊗ w_k``; the finite blocks ``E_τ = span{ψ_{τ−b} ⊗ w_b}`` carry
the eigenvalues ``±√(μ·τ h)`` with multiplicity ``2^{Z_τ−1}`` each.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .clifford import basis_labels, basis_index, involution_eigenvectors

__all__ = [
    "HermiteIndex",
    "LandauLevel",
    "landau_levels",
    "group_levels",
    "model_dirac_matrix",
    "truncated_basis",
    "dsq_eigenvalue",
    "eigenspace_basis",
    "reliable_spectrum",
    "levels_to_csv",
    "MAX_DIM_ENV",
]

MAX_DIM_ENV = "MAGDIRAC_MAX_DIM"
_DEFAULT_MAX_DIM = 6000


def _max_dim() -> int:
    return int(os.environ.get(MAX_DIM_ENV, _DEFAULT_MAX_DIM))


def _num(x):
    """Keep rationals exact, everything else becomes float."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


def _check_positive(mu, h, m=None):
    mu = [_num(v) for v in mu]
    if m is not None and len(mu) != m:
        raise ValueError(f"mu must have length m={m}, got {len(mu)}")
    if not mu or any(v <= 0 for v in mu):
        raise ValueError("all mu_j must be positive")
    h = _num(h)
    if h <= 0:
        raise ValueError("h must be positive")
    return mu, h


@dataclass(frozen=True)
class HermiteIndex:
    """Index ``(τ, k)`` of the basis vector ``ψ_τ ⊗ w_k``."""

    tau: tuple
    k: tuple

    def __post_init__(self):
        if len(self.tau) != len(self.k):
            raise ValueError("tau and k must have the same length")
        if any(t < 0 for t in self.tau) or any(b not in (0, 1) for b in self.k):
            raise ValueError(f"invalid Hermite index {self.tau}, {self.k}")


@dataclass(frozen=True)
class LandauLevel:
    """Eigenspace ``E_τ^±`` (or the zero mode) of the model operator.

    ``eigenvalue_sq`` is ``μ·τ h``, exact when the inputs are rational.
    """

    tau: tuple
    sign: str
    eigenvalue: float
    multiplicity: int
    mu: tuple
    h: object
    eigenvalue_sq: object = field(default=0)

    @property
    def zeros(self) -> int:
        return sum(1 for t in self.tau if t)


def dsq_eigenvalue(idx: HermiteIndex, mu, h):
    """``λ_{τ,k} = h Σ_j (2τ_j + 1 + (−1)^{k_j−1}) μ_j / 2``, the eigenvalue of D² on ``ψ_τ ⊗ w_k``."""
    mu, h = _check_positive(mu, h, len(idx.tau))
    total = 0
    for t, b, mj in zip(idx.tau, idx.k, mu):
        total += (2 * t + 1 + (1 if b else -1)) * mj
    return h * total / 2


def landau_levels(m: int, mu, h, lambda_max) -> list:
    """All levels with ``|eigenvalue| ≤ lambda_max``, sorted by eigenvalue.

    Examples
    --------
    >>> [round(l.eigenvalue, 3) for l in landau_levels(1, [1], 1, 1.5)]
    [-1.414, -1.0, 0.0, 1.0, 1.414]
    """
    mu, h = _check_positive(mu, h, m)
    lam = _num(lambda_max)
    if lam <= 0:
        raise ValueError("lambda_max must be positive")
    bound = lam * lam
    ranges = [range(int(math.floor(bound / (mj * h))) + 1) for mj in mu]
    out = [LandauLevel((0,) * m, "zero", 0.0, 1, tuple(mu), h, 0)]
    for tau in itertools.product(*ranges):
        if not any(tau):
            continue
        sq = h * sum(t * mj for t, mj in zip(tau, mu))
        if sq > bound:
            continue
        mult = 2 ** (sum(1 for t in tau if t) - 1)
        ev = math.sqrt(sq)
        out.append(LandauLevel(tau, "+", ev, mult, tuple(mu), h, sq))
        out.append(LandauLevel(tau, "-", -ev, mult, tuple(mu), h, sq))
    out.sort(key=lambda l: (l.eigenvalue, l.tau))
    return out


def group_levels(levels) -> list:
    """Merge levels with equal ``(sign, μ·τh)``.

    Returns a list of ``(eigenvalue, multiplicity, [tau, ...], sign)``.
    """
    groups = {}
    for lvl in levels:
        key = (lvl.sign, lvl.eigenvalue_sq)
        g = groups.setdefault(key, [lvl.eigenvalue, 0, [], lvl.sign])
        g[1] += lvl.multiplicity
        g[2].append(lvl.tau)
    return sorted((tuple(v) for v in groups.values()), key=lambda g: g[0])


def truncated_basis(m: int, degree_cutoff: int) -> list:
    """Ordered list of ``HermiteIndex`` with ``|τ| ≤ degree_cutoff``."""
    taus = [t for t in itertools.product(range(degree_cutoff + 1), repeat=m) if sum(t) <= degree_cutoff]
    taus.sort(key=lambda t: (sum(t), t))
    return [HermiteIndex(t, k) for t in taus for k in basis_labels(m)]


def model_dirac_matrix(m: int, mu, h, degree_cutoff: int, return_basis: bool = False):
    """Dense matrix of D in the basis ``{ψ_τ ⊗ w_k : |τ| ≤ degree_cutoff}``.

    Parameters
    ----------
    m : int
    mu : sequence of positive numbers
    h : positive number
    degree_cutoff : int
        Total Hermite degree kept.  The truncated matrix is the compression
        of D; rows near the boundary shell are not eigen-accurate.
    return_basis : bool
        Also return the ordered basis list.

    Raises
    ------
    MemoryError
        When the basis exceeds the cap set by ``MAGDIRAC_MAX_DIM``.
    """
    mu, h = _check_positive(mu, h, m)
    if degree_cutoff < 0:
        raise ValueError("degree_cutoff must be non-negative")
    basis = truncated_basis(m, degree_cutoff)
    if len(basis) > _max_dim():
        raise MemoryError(
            f"truncated basis has {len(basis)} vectors, above the cap {_max_dim()} "
            f"(raise {MAX_DIM_ENV} to allow it)"
        )
    pos = {(b.tau, b.k): i for i, b in enumerate(basis)}
    hf = float(h)
    M = np.zeros((len(basis), len(basis)))
    for col, b in enumerate(basis):
        for j in range(m):
            coef = math.sqrt(float(mu[j]) / 2)
            sign = -1.0 if sum(b.k[:j]) % 2 else 1.0
            if b.k[j] == 0 and b.tau[j] > 0:
                # w_j∧ A_j
                tau = list(b.tau); tau[j] -= 1
                k = list(b.k); k[j] = 1
                M[pos[(tuple(tau), tuple(k))], col] += coef * sign * math.sqrt(2 * hf * b.tau[j])
            elif b.k[j] == 1:
                # ι_{w̄_j} A_j*
                tau = list(b.tau); tau[j] += 1
                k = list(b.k); k[j] = 0
                row = pos.get((tuple(tau), tuple(k)))
                if row is not None:
                    M[row, col] += coef * sign * math.sqrt(2 * hf * (b.tau[j] + 1))
    return (M, basis) if return_basis else M


def eigenspace_basis(tau, sign: str, mu, h, m: int, degree_cutoff: int | None = None) -> list:
    """Orthonormal-ish spanning vectors of ``E_τ^±`` in the truncated basis.

    The block ``E_τ`` is spanned by ``ψ_{τ−b} ⊗ w_b`` with ``b ≤ τ``; D acts
    there as ``w_r∧ + ι_{w̄_r}`` with ``r_j = √(μ_j τ_j h)``, whose ``±|r|``
    eigenvectors come from :func:`magdirac.clifford.involution_eigenvectors`.
    """
    tau = tuple(int(t) for t in tau)
    if len(tau) != m:
        raise ValueError(f"tau must have length m={m}")
    if not any(tau):
        raise ValueError("tau must be nonzero (the zero mode is psi_0 ⊗ 1)")
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    mu, h = _check_positive(mu, h, m)
    if degree_cutoff is None:
        degree_cutoff = sum(tau)
    r = [math.sqrt(float(mj) * t * float(h)) for mj, t in zip(mu, tau)]
    plus, minus = involution_eigenvectors(r, m)
    chosen = plus if sign == "+" else minus
    basis = truncated_basis(m, degree_cutoff)
    pos = {(b.tau, b.k): i for i, b in enumerate(basis)}
    labels = basis_labels(m)
    out = []
    for v in chosen:
        vec = np.zeros(len(basis))
        for i, coeff in enumerate(v):
            if coeff == 0:
                continue
            b = labels[i]
            vec[pos[(tuple(t - bj for t, bj in zip(tau, b)), b)]] = coeff
        out.append(vec / np.linalg.norm(vec))
    return out


def reliable_spectrum(m: int, mu, h, degree_cutoff: int) -> np.ndarray:
    """Eigenvalues of the truncated matrix restricted to exact blocks.

    D commutes with the label ``|τ| + |k|``.  Blocks with label at most
    ``degree_cutoff`` are contained in the truncation without loss, so
    diagonalizing the compression onto those coordinates gives exact
    levels up to rounding.
    """
    M, basis = model_dirac_matrix(m, mu, h, degree_cutoff, return_basis=True)
    keep = [i for i, b in enumerate(basis) if sum(b.tau) + sum(b.k) <= degree_cutoff]
    sub = M[np.ix_(keep, keep)]
    return np.linalg.eigvalsh(sub)


def levels_to_csv(levels, fh):
    """Write ``eigenvalue,multiplicity,tau,sign`` rows."""
    fh.write("eigenvalue,multiplicity,tau,sign\n")
    for lvl in levels:
        fh.write(f"{lvl.eigenvalue!r},{lvl.multiplicity},{' '.join(map(str, lvl.tau))},{lvl.sign}\n")
