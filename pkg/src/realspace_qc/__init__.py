"""Real-space first-quantized molecular Hamiltonians on Voronoi finite-volume grids.

Submodules
----------
molgrid          atom-centered Becke/Lebedev grids
voronoi          3-D Voronoi diagrams by half-space clipping (compiled kernel)
fvops            finite-volume Laplacian, derivatives and potentials
transcorrelated  Jastrow functions and transcorrelated operator blocks
hamiltonian      matrix-free many-electron operators
eigensolve       dense and Davidson eigensolvers
lcu              Pauli LCU coefficients, one-norm and walk-operator check
qcpe             classical simulation of Chebyshev phase estimation
pipeline, cli    experiment drivers and the command-line interface

Submodules are imported on demand so that the command-line interface can
configure thread counts before numerical libraries load.
"""

__version__ = "0.1.0"
