from fractions import Fraction
from itertools import combinations, product

import pytest
from hypothesis import given, strategies as st

from magdirac._exact import QI, I
from magdirac.koszul import (
    DIFFERENTIALS,
    ChainElement,
    KoszulData,
    apply_differential,
    hodge_decompose,
    inner_product,
    split_eigenspaces,
    twisted_laplacian,
    twisted_laplacian0,
)
from magdirac.weyl import TransverseSeries, monomial, transverse_degree, weight


def ce(m, items, Nw=5, Mc=2):
    return ChainElement.from_terms(m, Nw, Mc, items)


D1 = KoszulData(1, [1])


def ap(name, u, data=D1):
    return apply_differential(name, u, data)


def test_differential_examples():
    assert ap("wt_d0", ce(1, [(1, {1: 1}, {}, 0, [])])) == ce(1, [(1, {}, {}, 0, [2])])
    assert ap("i_x0", ce(1, [(1, {}, {}, 0, [])])).is_zero()
    # ξ_0 x_0 ↦ −∂_{x_0}(ξ_0 x_0) e_0 with ρ = 1 and the default sign
    assert ap("wt_d", ce(1, [(1, {0: 1}, {0: 1}, 0, [])])) == ce(1, [(-1, {}, {0: 1}, 0, [0])])


def test_unknown_differential():
    with pytest.raises(ValueError):
        ap("nope", ce(1, []))
    assert ap("w̃_∂⁰", ce(1, [(1, {1: 1}, {}, 0, [])])) == ap("wt_d0", ce(1, [(1, {1: 1}, {}, 0, [])]))


def test_exact_mode_needs_square_roots():
    with pytest.raises(ValueError):
        KoszulData(1, [2], exact=True)
    with pytest.raises(ValueError):
        KoszulData(1, [2], s=[Fraction(3, 2)])
    assert KoszulData(2, [1, Fraction(9, 4)], exact=True).s[1] == Fraction(3, 2)


def test_laplacian_examples():
    x1 = ce(1, [(1, {1: 1}, {}, 0, [])])
    xi1 = ce(1, [(1, {}, {1: 1}, 0, [])])
    assert twisted_laplacian0(x1, D1) == xi1
    r2 = ce(1, [(1, {1: 2}, {}, 0, []), (1, {}, {1: 2}, 0, [])])
    assert twisted_laplacian0(r2, D1).is_zero()
    z = x1 + xi1.scale(I)
    assert twisted_laplacian0(z, D1) == z.scale(-I)


# -- random elements --------------------------------------------------------------

coeffs = st.builds(lambda a, b: QI(a, b), st.integers(-3, 3), st.integers(-2, 2))


@st.composite
def chains(draw, m=None, Nw=5, Mc=2, n_terms=5, real=False):
    m = draw(st.integers(1, 2)) if m is None else m
    n = 2 * m + 1
    L = 2 * n + 1
    terms = {}
    for _ in range(draw(st.integers(0, n_terms))):
        e = draw(st.lists(st.integers(0, 2), min_size=L, max_size=L))
        if weight(e, m) > Nw or transverse_degree(e, m) > Mc:
            continue
        c = draw(coeffs)
        terms[(tuple(e), draw(st.integers(0, (1 << n) - 1)))] = QI(c.re) if real else c
    return ChainElement(m, Nw, Mc, terms)


def data_for(m, rho=None):
    return KoszulData(m, [1, Fraction(9, 4)][:m] if m == 2 else [1], rho=rho)


PURE = ["w_x0", "w_d0", "wt_d0", "w_x", "w_d", "wt_d", "i_x0", "i_d0", "it_d0", "i_x", "i_d", "it_d"]


@pytest.mark.parametrize("name", PURE)
@given(u=chains(Nw=4))
def test_pure_differentials_square_to_zero(name, u):
    d = data_for(u.m)
    u = u.with_caps(6, 2)
    assert ap(name, ap(name, u, d), d).is_zero()


@pytest.mark.parametrize("name", ["w_x", "i_x", "w_d", "i_d"])
@given(u=chains(Nw=4))
def test_untwisted_nilpotent_with_variable_rho(name, u):
    d = data_for(u.m, TransverseSeries.x0_poly(u.m, 8, [1, Fraction(1, 4)]))
    u = u.with_caps(6, 2)
    assert ap(name, ap(name, u, d), d).is_zero()


def test_twisted_w_not_nilpotent_for_variable_rho():
    # w̃_∂² = σ ρ' e_0 ∧ w̃_∂⁰, nonzero once ρ depends on x_0
    d = data_for(1, TransverseSeries.x0_poly(1, 8, [1, Fraction(1, 4)]))
    u = ce(1, [(1, {1: 1}, {}, 0, [])], Nw=5, Mc=3)
    assert not ap("wt_d", ap("wt_d", u, d), d).is_zero()


def monomial_basis(m, max_weight, max_degree):
    n = 2 * m + 1
    wvars = [j for j in range(1, m + 1)] + [n] + [n + j for j in range(1, m + 1)]
    out = []
    for pows in product(range(max_weight + 1), repeat=len(wvars)):
        if sum(pows) > max_weight:
            continue
        e = [0] * (2 * n + 1)
        for v, p in zip(wvars, pows):
            e[v] = p
        for d in range(max_degree + 1):
            for wedge in combinations(range(n), d):
                mask = sum(1 << j for j in wedge)
                out.append(ChainElement(m, max_weight + 1, 1, {(tuple(e), mask): 1}))
    return out


@pytest.mark.parametrize("m", [1, 2])
def test_laplacian_expressions_exhaustive(m):
    d = data_for(m)
    for u in monomial_basis(m, 4 if m == 1 else 3, 3):
        rot = twisted_laplacian0(u, d)
        first = ap("wt_d0", ap("i_x0", u, d), d) + ap("i_x0", ap("wt_d0", u, d), d)
        # the anticommutator of w_x⁰ and ĩ_∂⁰ equals +Δ̃⁰ (not −Δ̃⁰)
        third = ap("w_x0", ap("it_d0", u, d), d) + ap("it_d0", ap("w_x0", u, d), d)
        assert first == rot
        assert third == rot


def test_laplacian_minus_sign_fails_on_zero_form():
    u = ce(1, [(1, {1: 1}, {}, 0, [])])
    third = ap("w_x0", ap("it_d0", u)) + ap("it_d0", ap("w_x0", u))
    assert third == twisted_laplacian0(u, D1)
    assert third.scale(-1) != twisted_laplacian0(u, D1)


@pytest.mark.parametrize("m", [1, 2])
def test_spectrum_imaginary_integer(m):
    d = data_for(m)
    for u in monomial_basis(m, 3 if m == 1 else 2, 2):
        for n, comp in split_eigenspaces(u).items():
            lam = sum(Fraction(int(k)) * Fraction(str(mu)) for k, mu in zip(n, d.mu))
            assert twisted_laplacian0(comp, d) == comp.scale(QI(0, lam))


def test_twisted_laplacian_formula():
    # Δ̃ = σ ξ_0 ∂_{x_0} + ρ² Δ̃⁰ + σ ρ' e_0 i_x⁰ with σ = −1
    rho = TransverseSeries.x0_poly(1, 8, [1, Fraction(1, 4)])
    d = data_for(1, rho)
    u = ce(1, [(1, {0: 1, 1: 1}, {0: 1}, 0, [1]), (2, {}, {1: 1}, 0, [2])], Nw=5, Mc=3)
    lhs = twisted_laplacian(u, d)
    rho2 = rho * rho
    rhs = u.diff(0).mul_var(3).scale(-1) + twisted_laplacian0(u, d).mul_series(rho2)
    rhs = rhs + apply_differential("i_x0", u, d).wedge(0).mul_series(rho.derivative_x0()).scale(-1)
    assert lhs == rhs


def test_inner_product_adjoint():
    d = D1
    u = ce(1, [(1, {1: 2}, {}, 0, [1]), (QI(0, 1), {}, {1: 1}, 0, [2])], Nw=6)
    v = ce(1, [(1, {1: 1}, {}, 0, []), (3, {}, {}, 0, [])], Nw=6)
    assert inner_product(ap("w_x0", v, d), u) == inner_product(v, ap("i_d0", u, d))


# -- Hodge decomposition ------------------------------------------------------------

def recompose(r, u, d):
    t1 = ap("i_x", ap("wt_d", r.b, d), d)
    t2 = ap("wt_d", ap("i_x", r.g, d), d)
    return (r.harmonic.with_caps(r.b.Nw, r.b.Mc) + t1 + t2 + r.residual.with_caps(r.b.Nw, r.b.Mc)).with_caps(u.Nw, u.Mc)


def test_hodge_x1e1():
    u = ce(1, [(1, {1: 1}, {}, 0, [1])])
    r = hodge_decompose(u, D1)
    assert r.harmonic == ce(1, [(Fraction(1, 2), {1: 1}, {}, 0, [1]), (Fraction(1, 2), {}, {1: 1}, 0, [2])])
    assert recompose(r, u, D1) == u


def test_hodge_harmonic_input():
    u = ce(1, [(1, {1: 2}, {}, 0, [0]), (1, {}, {1: 2}, 0, [0])])
    r = hodge_decompose(u, D1)
    assert r.harmonic == u
    assert r.b.is_zero() and r.g.is_zero() and r.residual.is_zero()


def test_hodge_zero():
    r = hodge_decompose(ce(1, []), D1)
    assert r.harmonic.is_zero() and r.b.is_zero() and r.g.is_zero()


def test_hodge_rho_zero_rejected():
    with pytest.raises(ValueError):
        hodge_decompose(ce(1, [(1, {1: 1}, {}, 0, [1])]), data_for(1, 0))


@given(chains(Nw=4), st.booleans())
def test_hodge_properties(u, variable_rho):
    rho = TransverseSeries.x0_poly(u.m, 8, [1, Fraction(1, 4)]) if variable_rho else None
    d = data_for(u.m, rho)
    r = hodge_decompose(u, d)
    assert recompose(r, u, d) == u
    assert twisted_laplacian0(r.harmonic, d).is_zero()
    assert r.harmonic.xi0_free()


def test_json_roundtrip():
    u = ce(2, [(QI(1, 2), {1: 1, 0: 2}, {4: 1}, 1, [3, 0]), (Fraction(2, 3), {}, {}, 0, [])])
    assert ChainElement.from_json(u.to_json()) == u
