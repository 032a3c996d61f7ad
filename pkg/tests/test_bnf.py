from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from magdirac._exact import QI, I, IPOW
from magdirac.bnf import (
    ModelSymbol,
    NormalFormResult,
    assemble_H1,
    birkhoff_normal_form,
    c0_dequantize,
    c0_quantize,
    form_sign,
    verify_normal_form,
)
from magdirac.clifford import build_gamma
from magdirac.koszul import ChainElement, KoszulData, apply_differential, twisted_laplacian0
from magdirac.weyl import (
    GradedSymbol,
    TransverseSeries,
    exp_conjugate,
    monomial,
    moyal_product,
    transverse_degree,
    weight,
)

D1 = KoszulData(1, [1])
D1P = KoszulData(1, [1], e0_sign=1)


def ce(items, m=1, Nw=7, Mc=2):
    return ChainElement.from_terms(m, Nw, Mc, items)


def test_H1_matches_gamma_expansion():
    H = assemble_H1(1, D1, 4, 1)
    g = build_gamma(1)
    expect = GradedSymbol.from_matrices(1, 4, 1, {
        monomial(1, xi={0: 1}): g[0].scale(I),
        monomial(1, x={1: 1}): g[1].scale(I),
        monomial(1, xi={1: 1}): g[2].scale(I),
    })
    assert H == expect
    assert H.is_self_adjoint()


def test_H1_square():
    H = assemble_H1(1, D1, 4, 1)
    g = build_gamma(1)
    sig = [M.scale(I) for M in g]
    Id = g[0] @ g[0].scale(-1)
    # x_1∗ξ_1 = x_1ξ_1 + ih/2 and ξ_1∗x_1 = x_1ξ_1 − ih/2, so the cross terms leave ih σ_1σ_2
    expect = GradedSymbol.from_matrices(1, 4, 1, {
        monomial(1, xi={0: 2}): Id,
        monomial(1, x={1: 2}): Id,
        monomial(1, xi={1: 2}): Id,
        monomial(1, h=1): (sig[1] @ sig[2]).scale(I),
    })
    assert moyal_product(H, H) == expect


def test_H1_errors():
    with pytest.raises(ValueError):
        assemble_H1(1, D1, 1, 1)
    with pytest.raises(ValueError):
        assemble_H1(1, KoszulData(1, [1], rho=0), 4, 1)


def test_form_sign():
    assert [form_sign(k) for k in (0, 2, 4, 6)] == [-1, 1, -1, 1]
    with pytest.raises(ValueError):
        form_sign(1)


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 3), st.integers(-3, 3)), min_size=1, max_size=4),
       st.sampled_from([1, 2, 4, 7]))
def test_c0_roundtrip_odd(items, mask):
    terms = {}
    for a, b, c, k in items:
        terms[(monomial(1, {0: c, 1: a}, {1: b}), mask)] = k
    e = ChainElement(1, 6, 3, terms)
    S = c0_quantize(e)
    assert c0_dequantize(S, "odd") == e
    assert S.is_self_adjoint()


# -- conjugation identities -----------------------------------------------------------

@st.composite
def homogeneous_chain(draw, w, degrees, m=1, Nw=7, Mc=2):
    n = 2 * m + 1
    L = 2 * n + 1
    masks = [k for k in range(1 << n) if bin(k).count("1") in degrees]
    terms = {}
    for _ in range(draw(st.integers(1, 3))):
        e = draw(st.lists(st.integers(0, 2), min_size=L, max_size=L))
        e[-1] = 0
        e[n] = 0
        rest = weight(e, m)
        if rest > w:
            continue
        e[n] = w - rest
        if transverse_degree(e, m) > Mc:
            continue
        terms[(tuple(e), draw(st.sampled_from(masks)))] = draw(st.integers(-3, 3))
    return ChainElement(m, Nw, Mc, terms)


@settings(max_examples=20)
@given(st.integers(3, 4), st.data())
def test_scalar_conjugation_identity(w, data):
    f = data.draw(homogeneous_chain(w, [0]))
    H = assemble_H1(1, D1, 7, 2)
    F = c0_quantize(f)
    conj = exp_conjugate(F, "scalar_over_h", H)
    defect = conj - H + c0_quantize(apply_differential("wt_d", f, D1P))
    assert defect.is_zero() or defect.min_weight() >= w


@settings(max_examples=20)
@given(st.integers(1, 3), st.data())
def test_matrix_conjugation_identity(N, data):
    a = data.draw(homogeneous_chain(N, [0, 2]))
    H = assemble_H1(1, D1, 7, 2)
    conj = exp_conjugate(c0_quantize(a), "matrix", H)
    lin = GradedSymbol(1, 7, 2)
    for k in (0, 2):
        ak = ChainElement(1, 7, 2, {key: c for key, c in a.terms.items() if bin(key[1]).count("1") == k})
        ix = apply_differential("i_x", ak, D1P)
        Da = apply_differential("wt_d", ak, D1P)
        hDa = GradedSymbol.hbar(1, 7, 2).pointwise(c0_quantize(Da))
        lin = lin + (c0_quantize(ix).scale(2) + hDa).scale(form_sign(k))
    defect = conj - H - lin
    assert defect.is_zero() or defect.min_weight() >= N + 2


# -- the normal form -------------------------------------------------------------------

def run(d1, N):
    res = birkhoff_normal_form(d1, N)
    prof = verify_normal_form(d1, res)
    return res, prof


def assert_normal(d1, res, prof, N):
    assert all(prof[w] == 0 for w in range(N + 1)), prof
    assert twisted_laplacian0(res.omega, d1.data).is_zero()
    assert res.omega.xi0_free()
    assert res.omega.is_real()
    assert set(res.omega.form_degrees()) <= {1, 3}
    assert c0_quantize(res.omega).is_self_adjoint()


def test_trivial_input():
    d1 = ModelSymbol(D1, 6, 2)
    res, prof = run(d1, 4)
    assert res.f.is_zero() and res.a.is_zero() and res.omega.is_zero()
    assert all(v == 0 for v in prof.values())


def test_harmonic_input_is_absorbed():
    u = ce([(1, {1: 2}, {}, 0, [0]), (1, {}, {1: 2}, 0, [0])])
    d1 = ModelSymbol(D1, 7, 2, u)
    res, prof = run(d1, 5)
    assert_normal(d1, res, prof, 5)
    assert res.omega.terms == u.terms
    assert res.f.is_zero() and res.a.is_zero()


def test_x1_squared_e1():
    d1 = ModelSymbol(D1, 7, 2, ce([(1, {1: 2}, {}, 0, [1])]))
    res, prof = run(d1, 5)
    assert_normal(d1, res, prof, 5)
    assert res.achieved_weight >= 5


def test_corrupted_result_detected():
    d1 = ModelSymbol(D1, 7, 2, ce([(1, {1: 2}, {}, 0, [1])]))
    res, _ = run(d1, 4)
    bump = ChainElement.from_terms(1, res.omega.Nw, res.omega.Mc, [(1, {1: 3}, {}, 0, [0])])
    bad = NormalFormResult(res.f, res.a, res.omega + bump, res.achieved_weight, res.Nw, res.Mc)
    prof = verify_normal_form(d1, bad)
    assert [w for w, v in prof.items() if w <= 4 and v] == [3]


def test_variable_rho_with_tail():
    rho = TransverseSeries.x0_poly(1, 8, [1, Fraction(1, 4)])
    d = KoszulData(1, [1], rho=rho)
    tail = c0_quantize(ChainElement.from_terms(1, 6, 1, [(1, {}, {}, 1, [0]), (-2, {1: 1}, {}, 1, [2])]))
    d1 = ModelSymbol(d, 6, 1, ChainElement.from_terms(1, 6, 1, [(1, {0: 1, 1: 1}, {1: 1}, 0, [2]), (2, {}, {0: 2}, 0, [1])]), tail)
    res, prof = run(d1, 4)
    assert_normal(d1, res, prof, 4)


def test_m2():
    d = KoszulData(2, [1, Fraction(9, 4)])
    r = ChainElement.from_terms(2, 5, 1, [(1, {1: 1, 2: 1}, {}, 0, [3]), (-1, {}, {0: 1, 2: 1}, 0, [1])])
    d1 = ModelSymbol(d, 5, 1, r)
    res, prof = run(d1, 3)
    assert_normal(d1, res, prof, 3)


def test_model_symbol_validation():
    with pytest.raises(ValueError):
        ModelSymbol(D1, 6, 2, ce([(1, {1: 1}, {}, 0, [1])], Nw=6))  # weight 1 remainder
    with pytest.raises(ValueError):
        ModelSymbol(D1, 6, 2, ce([(1, {1: 2}, {}, 0, [0, 1])], Nw=6))  # not a 1-form
    with pytest.raises(ValueError):
        ModelSymbol(D1, 6, 2, ce([(QI(0, 1), {1: 2}, {}, 0, [1])], Nw=6))  # not real
    with pytest.raises(ValueError):
        ModelSymbol(D1, 6, 2, None, GradedSymbol.x(1, 6, 2, 1))  # tail without h
    with pytest.raises(ValueError):
        birkhoff_normal_form(ModelSymbol(D1, 5, 2), 4)


def test_model_symbol_json():
    rho = TransverseSeries.x0_poly(1, 8, [1, Fraction(1, 4)])
    d1 = ModelSymbol(KoszulData(1, [1], rho=rho), 6, 2, ce([(3, {1: 2}, {}, 0, [1])], Nw=6))
    back = ModelSymbol.from_json(d1.to_json())
    assert back.symbol() == d1.symbol()
