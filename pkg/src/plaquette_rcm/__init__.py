"""Plaquette random-cluster model, Potts lattice gauge theory, and the
dual-lattice null-homology criteria, on boxes in Z^d with Z_q coefficients."""

__version__ = "0.1.0"

from .lattice import (Bc, Box, CellId, Chain, Cochain, PercolationConfig,
                      boundary, boundary_of_cell, coboundary, dualize_cell,
                      enumerate_cells, loop_boundary_chain)
from .prcm import PrcmParams, enumerate_measure, p_star, beta_star, sample
from .plgt import PlgtParams, anomaly_example, wilson_loop

__all__ = [
    "Bc", "Box", "CellId", "Chain", "Cochain", "PercolationConfig",
    "boundary", "boundary_of_cell", "coboundary", "dualize_cell",
    "enumerate_cells", "loop_boundary_chain",
    "PrcmParams", "enumerate_measure", "p_star", "beta_star", "sample",
    "PlgtParams", "anomaly_example", "wilson_loop", "__version__",
]
