"""Discrete fractional div-curl calculus on uniform node sets.

Modules
-------
domain      uniform lattices, weights and pair distances
fracops     s-gradient, s-divergence, pairings, norms, fractional Laplacian
analysis    BMO / Hardy / maximal functionals, div-free projection, experiments
manifold    round-sphere geometry and Killing fields
solver      W^{s,p}-harmonic maps into spheres and their conservation laws
gauge       SO(N) gauge minimization and the rotated potential
cli         batch experiment driver
"""

__version__ = "0.1.0"
