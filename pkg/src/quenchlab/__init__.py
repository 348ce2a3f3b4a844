"""Numerical laboratory for quenched survival of Levy processes among Poissonian obstacles.

Modules: symbols (Levy-Khintchine exponents), rates (f, h, g machinery and
the table of rates), environment (Poisson clouds and potentials), paths
(increment samplers), spectral (Dirichlet eigenvalues), feynman_kac
(Monte Carlo survival functionals) and cli (config-driven runs).
"""

__version__ = "0.1.0"
