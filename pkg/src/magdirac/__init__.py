"""Desk-scale computations for semiclassical magnetic Dirac operators.

Modules
-------
clifford
    Spin representation, Clifford quantization and the curvature operator.
landau
    Exact spectrum of the constant-field model operator and its truncations.
weyl
    Graded Weyl symbols, the Moyal product and symplectic normalization.
koszul
    Twisted Koszul differentials, Laplacians and the Hodge decomposition.
bnf
    Birkhoff normal form of the model symbol.
trace
    Mehler heat trace, Landau sums and the leading trace density.
bundle
    Circle-bundle spectra, Weyl counts and eta proxies.
cli
    Command-line front end.
"""

__version__ = "0.1.0"
