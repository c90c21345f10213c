"""Sparse assembly of the discrete generator A_h.

Independent of the stencil code in ``grid``: it is built from Kronecker
products of 1-D difference matrices, and the tests compare the two.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from ..stix_algebra import assemble_M
from .boundary import BoundaryOperator
from .grid import curl_b_matrix, from_nodes_matrix


def assemble_generator(medium, bc, bops: BoundaryOperator | None = None):
    """Return (A_h, free) in ``StateVector.to_vector`` ordering.

    ``free`` masks out the pinned (PEC) tangential edges; rows of A_h for
    pinned edges are zero.  Restrict with ``A[free][:, free]``.
    """
    g = medium.grid
    bops = bops or BoundaryOperator(g, bc, medium.c)
    eps0, c = medium.eps0, medium.c
    P = g.to_nodes_matrix()
    Pstar = from_nodes_matrix(g)
    C = g.curl_e_matrix()
    Cstar = curl_b_matrix(g)
    ns = medium.n_species
    keepE = sp.diags((~bops.pinned).astype(float))
    rows = []
    for s in range(ns):
        row = [None] * (ns + 2)
        M = assemble_M(medium.nu[s], medium.Omega_c[s], medium.b)
        row[s] = sp.block_diag(list(M), format="csr")
        row[ns] = -eps0 * sp.diags(np.repeat(medium.omega_p[s] ** 2, 3)) @ P
        rows.append(row)
    Erow = [keepE @ Pstar / eps0 for _ in range(ns)]
    Erow += [keepE @ sp.diags(bops.kappa), -(c * c) * keepE @ Cstar]
    rows.append(Erow)
    rows.append([None] * ns + [C, None])
    # make sure every block column has its size pinned down
    nB = g.n_b
    rows[-1][ns + 1] = sp.csr_matrix((nB, nB))
    A = sp.bmat(rows, format="csr")
    free = np.ones(A.shape[0], dtype=bool)
    o = 3 * g.n_nodes * ns
    free[o:o + g.n_e] = ~bops.pinned
    return A, free


def source_vector(medium, bops: BoundaryOperator, g_src_E: NDArray) -> NDArray:
    """Embed an E-shaped source into the full state vector layout."""
    g = medium.grid
    v = np.zeros(3 * g.n_nodes * medium.n_species + g.n_e + g.n_b, dtype=g_src_E.dtype)
    o = 3 * g.n_nodes * medium.n_species
    v[o:o + g.n_e] = np.where(bops.pinned, 0.0, g_src_E)
    return v
