"""
rigidlab: numerical experiments on Poisson brackets, Hamiltonian flows,
generating functions and C0 rigidity of symplectic maps.
"""

__version__ = "0.1.0"
