"""Normal form of a small model symbol, step by step.

Run with ``python demos/normal_form.py``.
"""
from fractions import Fraction

from magdirac.bnf import ModelSymbol, birkhoff_normal_form, verify_normal_form
from magdirac.koszul import ChainElement, KoszulData, twisted_laplacian0
from magdirac.weyl import TransverseSeries

rho = TransverseSeries.x0_poly(1, 9, [1, Fraction(1, 4)])
data = KoszulData(1, [1], rho=rho)
remainder = ChainElement.from_terms(1, 7, 2, [
    (1, {1: 2}, {}, 0, [1]),          # x_1^2 e_1
    (-2, {0: 1}, {0: 1, 1: 1}, 0, [2]),  # -2 x_0 ξ_0 ξ_1 e_2
])
d1 = ModelSymbol(data, 7, 2, remainder)

print("model symbol:")
print(d1.symbol().pretty())
res = birkhoff_normal_form(d1, 5)
print(f"\nscalar generator f: {len(res.f.terms)} monomials, lowest weight {res.f.min_weight()}")
print(f"matrix generator a: {len(res.a.terms)} terms, lowest weight {res.a_min_weight}")
print(f"normal form omega:  {len(res.omega.terms)} terms")
print("omega twisted-harmonic:", twisted_laplacian0(res.omega, data).is_zero())
print("omega free of xi_0:    ", res.omega.xi0_free())
prof = verify_normal_form(d1, res)
print("defect by weight (zero through the target, truncation noise above):")
for w, v in sorted(prof.items()):
    print(f"  {w}: {v:.3g}")
