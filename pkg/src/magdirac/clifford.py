"""Spin representation of Cl(2m+1), Clifford quantization and involutions.

The spinor space is ``S = Λ* V^{1,0}`` with basis ``w_k``, ``k ∈ {0,1}^m``,
ordered lexicographically (``k_1`` is the most significant bit).  With
``w_j = (e_{2j} + i e_{2j-1})/√2`` the rule

    c(v) ω = √2 (v^{1,0} ∧ ω − ι_{v^{0,1}} ω)

gives ``c(e_{2j}) = w_j∧ − ι_{w̄_j}`` and ``c(e_{2j-1}) = −i(w_j∧ + ι_{w̄_j})``;
the √2 cancels against the normalisation of ``w_j`` so all entries lie in
{0, ±1, ±i}.  ``c(e_0)`` is ``+i`` on even and ``−i`` on odd degree.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from ._exact import QI, ZERO, ONE, IPOW, as_rational, fmt_rational

__all__ = [
    "Multivector",
    "CliffordMatrix",
    "build_gamma",
    "clifford_quantize",
    "clifford_dequantize",
    "involution_eigenvectors",
    "curvature_operator",
    "volume_scalar",
    "c0_phase",
    "basis_index",
    "basis_labels",
    "blade_product",
    "MAX_EXACT_M",
]

MAX_EXACT_M = 6


def c0_phase(k: int) -> int:
    """Exponent ``p`` with ``c₀ = i^p c`` on degree-``k`` forms, ``p = k(k+1)/2``."""
    return k * (k + 1) // 2


def basis_index(k: Sequence[int]) -> int:
    """Position of ``w_k`` in the lexicographic spinor basis."""
    idx = 0
    for bit in k:
        idx = 2 * idx + int(bit)
    return idx


def basis_labels(m: int) -> list:
    """All ``k ∈ {0,1}^m`` in basis order."""
    return [tuple((i >> (m - 1 - j)) & 1 for j in range(m)) for i in range(2 ** m)]


@lru_cache(maxsize=None)
def blade_product(a: int, b: int):
    """Clifford product of basis blades given as bitmasks, with ``e_j² = −1``.

    Returns ``(sign, mask)`` such that ``e_a e_b = sign * e_mask``.
    """
    sign = 1
    # count transpositions needed to move each generator of b past those of a
    x = a >> 1
    while x:
        if bin(x & b).count("1") & 1:
            sign = -sign
        x >>= 1
    if bin(a & b).count("1") & 1:
        sign = -sign
    return sign, a ^ b


def _mask(indices: Iterable[int]) -> int:
    out = 0
    for j in indices:
        out |= 1 << j
    return out


def _indices(mask: int) -> tuple:
    out, j = [], 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


class Multivector:
    """Element of ``Λ*W ⊗ C`` with ``W = span(e_0, …, e_2m)``.

    Parameters
    ----------
    m : int
        Half-dimension; the generators are ``e_0, …, e_{2m}``.
    terms : dict, optional
        Map from a strictly increasing index tuple to a coefficient.
    """

    __slots__ = ("m", "terms")

    def __init__(self, m: int, terms=None):
        self.m = int(m)
        self.terms = {}
        for key, val in (terms or {}).items():
            key = tuple(key)
            if list(key) != sorted(set(key)) or (key and (key[0] < 0 or key[-1] > 2 * m)):
                raise ValueError(f"invalid wedge index set {key} for m={m}")
            val = val if isinstance(val, (QI, complex, float)) else QI.coerce(val)
            if val != 0:
                self.terms[key] = val

    @property
    def dim_odd(self) -> int:
        return 2 * self.m + 1

    @classmethod
    def blade(cls, m: int, indices, coeff=1):
        return cls(m, {tuple(sorted(indices)): coeff})

    def degrees(self) -> set:
        return {len(k) for k in self.terms}

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, ZERO) + v
        return Multivector(self.m, out)

    def __sub__(self, other):
        return self + other * (-1)

    def __mul__(self, c):
        return Multivector(self.m, {k: v * c for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Multivector) and self.m == other.m and self.terms == other.terms

    def __repr__(self):
        body = " + ".join(f"{v}*e{''.join(map(str, k)) or '∅'}" for k, v in sorted(self.terms.items()))
        return f"Multivector(m={self.m}, {body or '0'})"

    def to_json(self) -> dict:
        rows = []
        for k, v in sorted(self.terms.items()):
            v = QI.coerce(v)
            rows.append({"wedge": list(k), "re": fmt_rational(v.re), "im": fmt_rational(v.im)})
        return {"m": self.m, "terms": rows}

    @classmethod
    def from_json(cls, data: dict) -> "Multivector":
        return cls(data["m"], {tuple(t["wedge"]): QI(as_rational(t["re"]), as_rational(t["im"])) for t in data["terms"]})


class CliffordMatrix:
    """A ``2^m × 2^m`` matrix on the spinor space.

    ``entries`` is a numpy object array of :class:`QI` in exact mode or a
    ``complex128`` array in float mode.
    """

    __slots__ = ("m", "entries")

    def __init__(self, m: int, entries):
        arr = np.asarray(entries)
        n = 2 ** m
        if arr.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix for m={m}, got shape {arr.shape}")
        self.m = m
        self.entries = arr

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object

    @classmethod
    def zeros(cls, m: int, exact: bool = True):
        n = 2 ** m
        if exact:
            arr = np.empty((n, n), dtype=object)
            arr.fill(ZERO)
            return cls(m, arr)
        return cls(m, np.zeros((n, n), dtype=complex))

    @classmethod
    def identity(cls, m: int, exact: bool = True):
        out = cls.zeros(m, exact)
        for i in range(2 ** m):
            out.entries[i, i] = ONE if exact else 1.0
        return out

    def __matmul__(self, other):
        return CliffordMatrix(self.m, self.entries.dot(other.entries))

    def __add__(self, other):
        return CliffordMatrix(self.m, self.entries + other.entries)

    def __sub__(self, other):
        return CliffordMatrix(self.m, self.entries - other.entries)

    def __neg__(self):
        return CliffordMatrix(self.m, -self.entries)

    def scale(self, c):
        return CliffordMatrix(self.m, self.entries * c)

    def adjoint(self):
        if self.exact:
            f = np.vectorize(lambda z: z.conjugate(), otypes=[object])
            return CliffordMatrix(self.m, f(self.entries.T))
        return CliffordMatrix(self.m, self.entries.conj().T)

    def to_complex(self) -> np.ndarray:
        if self.exact:
            return np.array([[complex(z) for z in row] for row in self.entries], dtype=complex)
        return self.entries

    def is_zero(self) -> bool:
        return all(z == 0 for z in self.entries.flat)

    def scalar_value(self):
        """Return ``s`` if the matrix is ``s·I`` and ``None`` otherwise."""
        s = self.entries[0, 0]
        n = 2 ** self.m
        for i in range(n):
            for j in range(n):
                if (self.entries[i, j] != s) if i == j else (self.entries[i, j] != 0):
                    return None
        return s

    def __eq__(self, other):
        return (
            isinstance(other, CliffordMatrix)
            and self.m == other.m
            and all(a == b for a, b in zip(self.entries.flat, other.entries.flat))
        )

    def __repr__(self):
        return f"CliffordMatrix(m={self.m}, {self.entries.tolist()})"

    def to_json(self) -> dict:
        rows = []
        for row in self.entries:
            rows.append([[fmt_rational(QI.coerce(z).re), fmt_rational(QI.coerce(z).im)] for z in row])
        return {"m": self.m, "rows": rows}

    @classmethod
    def from_json(cls, data: dict) -> "CliffordMatrix":
        m = data["m"]
        arr = np.empty((2 ** m, 2 ** m), dtype=object)
        for i, row in enumerate(data["rows"]):
            for j, (re, im) in enumerate(row):
                arr[i, j] = QI(as_rational(re), as_rational(im))
        return cls(m, arr)


def _check_m(m: int, exact: bool):
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    if exact and m > MAX_EXACT_M:
        raise ValueError(f"exact mode supports 1 <= m <= {MAX_EXACT_M}, got m={m}")


def _ladder(m: int, j: int):
    """``(w_j∧, ι_{w̄_j})`` as sparse lists of (row, col, sign), j = 1..m."""
    wedge, contract = [], []
    for col, k in enumerate(basis_labels(m)):
        sign = -1 if sum(k[: j - 1]) % 2 else 1
        kk = list(k)
        if k[j - 1] == 0:
            kk[j - 1] = 1
            wedge.append((basis_index(kk), col, sign))
        else:
            kk[j - 1] = 0
            contract.append((basis_index(kk), col, sign))
    return wedge, contract


@lru_cache(maxsize=None)
def _gamma_exact(m: int) -> tuple:
    n = 2 ** m
    gammas = []
    g0 = CliffordMatrix.zeros(m)
    for i, k in enumerate(basis_labels(m)):
        g0.entries[i, i] = IPOW[1] if sum(k) % 2 == 0 else IPOW[3]
    gammas.append(g0)
    pairs = {}
    for j in range(1, m + 1):
        wedge, contract = _ladder(m, j)
        odd = CliffordMatrix.zeros(m)  # c(e_{2j-1}) = -i (w∧ + ι)
        even = CliffordMatrix.zeros(m)  # c(e_{2j}) = w∧ - ι
        for r, c, s in wedge:
            odd.entries[r, c] = IPOW[3] * s
            even.entries[r, c] = QI(s)
        for r, c, s in contract:
            odd.entries[r, c] = IPOW[3] * s
            even.entries[r, c] = QI(-s)
        pairs[j] = (odd, even)
    for j in range(1, m + 1):
        gammas.extend(pairs[j])
    assert all(g.entries.shape == (n, n) for g in gammas)
    return tuple(gammas)


def build_gamma(m: int, exact: bool = True) -> list:
    """Gamma matrices ``γ_0, …, γ_{2m}`` of the spin representation.

    Parameters
    ----------
    m : int
        Half-dimension, ``1 <= m <= 6`` in exact mode.
    exact : bool
        Exact ``QI`` entries (default) or ``complex128``.

    Returns
    -------
    list of CliffordMatrix
        ``γ_j = c(e_j)``; they satisfy ``γ_iγ_j + γ_jγ_i = −2δ_ij``.
    """
    _check_m(m, exact)
    if exact:
        return list(_gamma_exact(m))
    if m <= MAX_EXACT_M:
        return [CliffordMatrix(m, g.to_complex()) for g in _gamma_exact(m)]
    n = 2 ** m
    labels = basis_labels(m)
    g0 = np.diag([1j if sum(k) % 2 == 0 else -1j for k in labels])
    out = [CliffordMatrix(m, g0)]
    for j in range(1, m + 1):
        wedge, contract = _ladder(m, j)
        odd = np.zeros((n, n), complex)
        even = np.zeros((n, n), complex)
        for r, c, s in wedge:
            odd[r, c], even[r, c] = -1j * s, s
        for r, c, s in contract:
            odd[r, c], even[r, c] = -1j * s, -s
        out += [CliffordMatrix(m, odd), CliffordMatrix(m, even)]
    return out


@lru_cache(maxsize=None)
def _blade_matrix(m: int, mask: int) -> CliffordMatrix:
    gam = _gamma_exact(m)
    out = CliffordMatrix.identity(m)
    for j in _indices(mask):
        out = out @ gam[j]
    return out


def clifford_quantize(a: Multivector, m: int | None = None, normalized: bool = False) -> CliffordMatrix:
    """Clifford quantization ``c(a)`` (or ``c₀(a)`` when ``normalized``).

    ``c(e_{j1}∧…∧e_{jk}) = γ_{j1}⋯γ_{jk}`` for increasing indices, and
    ``c₀ = i^{k(k+1)/2} c`` on degree ``k``.
    """
    if m is None:
        m = a.m
    if a.m != m:
        raise ValueError(f"dimension mismatch: multivector has m={a.m}, requested m={m}")
    _check_m(m, True)
    out = CliffordMatrix.zeros(m)
    for key, coeff in a.terms.items():
        blade = _blade_matrix(m, _mask(key))
        if normalized:
            coeff = coeff * IPOW[c0_phase(len(key)) % 4]
        out = out + blade.scale(coeff)
    return out


@lru_cache(maxsize=None)
def _parity_basis(m: int, parity: str) -> tuple:
    want = 0 if parity == "even" else 1
    keys = [k for d in range(want, 2 * m + 2, 2) for k in combinations(range(2 * m + 1), d)]
    n = 2 ** m
    # columns vec(c(e_K)); orthogonal for the trace form with squared norm 2^m
    cols = [np.array([complex(z) for z in _blade_matrix(m, _mask(k)).entries.flat]) for k in keys]
    gram = np.array([[np.vdot(u, v) for v in cols] for u in cols])
    if not np.allclose(gram, n * np.eye(len(keys))):
        raise ArithmeticError("singular Clifford change of basis (internal construction bug)")
    return tuple(keys)


def clifford_dequantize(M: CliffordMatrix, parity: str = "even", normalized: bool = False) -> Multivector:
    """Inverse of :func:`clifford_quantize` restricted to ``Λ^{parity} W``.

    The ``4^m`` blades of one parity form a basis of the matrix algebra,
    orthogonal for ``⟨A, B⟩ = tr(A* B)``, so the linear system is solved
    by projection: ``a_K = tr(c(e_K)* M) / 2^m``.
    """
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    m = M.m
    exact = M.exact
    terms = {}
    n = 2 ** m
    for key in _parity_basis(m, parity):
        B = _blade_matrix(m, _mask(key))
        acc = ZERO if exact else 0j
        for bz, mz in zip(B.entries.flat, M.entries.flat):
            if bz != 0:
                acc = acc + bz.conjugate() * mz
        val = acc * QI(1, 0) / n if exact else complex(acc) / n
        if normalized:
            val = val / IPOW[c0_phase(len(key)) % 4] if exact else val / (1j ** c0_phase(len(key)))
        if val != 0:
            terms[key] = val
    return Multivector(m, terms)


def volume_scalar(m: int):
    """The scalar ``s`` with ``c(e_0∧…∧e_{2m}) = s·I`` (computed, not assumed)."""
    s = _blade_matrix(m, (1 << (2 * m + 1)) - 1).scalar_value()
    if s is None:
        raise ArithmeticError("volume element is not central (construction bug)")
    return s


def curvature_operator(m: int, mu) -> CliffordMatrix:
    """``R = ½ Σ_j μ_j γ_{2j−1} γ_{2j}`` for rational ``μ``."""
    gam = _gamma_exact(m)
    out = CliffordMatrix.zeros(m)
    for j, mu_j in enumerate(mu, start=1):
        out = out + (gam[2 * j - 1] @ gam[2 * j]).scale(as_rational(mu_j) / 2)
    return out


def _involution_block(r, m: int):
    """Matrix of ``w_r∧ + ι_{w̄_r}`` on S and the index set of ``Λ*V_r``."""
    n = 2 ** m
    c = np.zeros((n, n))
    for j in range(1, m + 1):
        if r[j - 1] == 0:
            continue
        wedge, contract = _ladder(m, j)
        for row, col, s in wedge + contract:
            c[row, col] += float(r[j - 1]) * s
    support = {j for j in range(m) if r[j] != 0}
    inside = [i for i, k in enumerate(basis_labels(m)) if all(k[j] == 0 or j in support for j in range(m))]
    return c, inside


def involution_eigenvectors(r, m: int):
    """Bases of the ``±|r|`` eigenspaces of ``c((w_r − w̄_r)/√2)`` on ``Λ*V_r``.

    ``(w_r − w̄_r)/√2 = i Σ r_j e_{2j−1}``, so the operator is
    ``w_r∧ + ι_{w̄_r}``; it equals ``|r|·𝚒_r`` on ``Λ*V_r``.  The bases
    returned are ``(1 ± 𝚒_r) w_k`` for the even-degree ``w_k`` in ``Λ*V_r``.

    Returns
    -------
    (list of ndarray, list of ndarray)
        Vectors in the spinor basis (length ``2^m``), float mode.
    """
    r = [float(x) for x in r]
    if len(r) != m:
        raise ValueError(f"direction vector must have length m={m}")
    norm = float(np.sqrt(sum(x * x for x in r)))
    if norm == 0:
        raise ValueError("direction vector r must be nonzero")
    c, inside = _involution_block(r, m)
    inv = c / norm
    labels = basis_labels(m)
    plus, minus = [], []
    for i in inside:
        if sum(labels[i]) % 2:
            continue
        x = np.zeros(2 ** m)
        x[i] = 1.0
        plus.append(x + inv @ x)
        minus.append(x - inv @ x)
    return plus, minus


def involution_operator(r, m: int):
    """``(c_r, indices)``: the float matrix of ``w_r∧ + ι_{w̄_r}`` and the ``Λ*V_r`` coordinates."""
    return _involution_block([float(x) for x in r], m)
