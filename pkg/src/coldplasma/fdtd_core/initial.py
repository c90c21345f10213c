"""Named initial data."""

from __future__ import annotations

import numpy as np

from .boundary import BoundaryOperator, BoundarySpec
from .state import StateVector


def cavity_mode(grid, amplitude: float = 1.0, n_species: int = 2, mx: int = 1, my: int = 1) -> StateVector:
    """E_z = A sin(mx pi x / Lx) sin(my pi y / Ly) on a box, everything else zero.

    Tangential E vanishes on all six faces, so the data are PEC compatible.
    """
    U = StateVector.zeros(grid, n_species)
    Lx, Ly, _ = grid.lengths
    Ex, Ey, Ez = grid.split_e(U.E)
    p = grid.e_points(2)
    Ez[...] = (amplitude * np.sin(mx * np.pi * p[:, 0] / Lx)
               * np.sin(my * np.pi * p[:, 1] / Ly)).reshape(Ez.shape)
    return U


def random_state(grid, rng: np.random.Generator, n_species: int = 2, bc: BoundarySpec | None = None,
                 divergence_free_B: bool = True, track_rho: bool = False, eps0: float = 1.0) -> StateVector:
    """Random state; B = curl_e(random edge field) keeps div B = 0 to round-off.

    With ``bc`` the pinned tangential edges of E are zeroed.  With
    ``track_rho`` the first species carries eps0 div E so Gauss's law holds.
    """
    U = StateVector.zeros(grid, n_species, track_rho=track_rho)
    U.J = tuple(rng.standard_normal((grid.n_nodes, 3)) for _ in range(n_species))
    U.E = rng.standard_normal(grid.n_e)
    if bc is not None:
        U.E[BoundaryOperator(grid, bc).pinned] = 0.0
    if divergence_free_B:
        A = rng.standard_normal(grid.n_e)
        if bc is not None:
            A[BoundaryOperator(grid, bc).pinned] = 0.0
        U.B = grid.curl_e(A) * min(grid.spacing)
    else:
        U.B = rng.standard_normal(grid.n_b)
    if track_rho:
        rho0 = eps0 * grid.div_e(U.E)
        U.rho = (rho0,) + tuple(np.zeros(grid.n_nodes) for _ in range(n_species - 1))
    return U


def smooth_slab_state(slab, n_species: int = 2, modes=(1, 2, 3), amplitude: float = 1.0,
                      pec: bool = True) -> StateVector:
    """Smooth slab data with zero-mean transverse B.

    E_y, E_z are sums of sin(k pi x / L) (vanishing at both ends), B_y, B_z
    sums of cos(k pi x / L) at the half nodes with the discrete mean removed,
    and E_x a smooth bump.
    """
    U = StateVector.zeros(slab, n_species)
    L = slab.length
    x = slab.node_points()[:, 0]
    xh = slab.b_points(0)[:, 0]
    Ex, Ey, Ez = slab.split_e(U.E)
    By, Bz = slab.split_b(U.B)
    for i, k in enumerate(modes):
        w = amplitude / (i + 1)
        Ey += w * np.sin(k * np.pi * x / L)
        Ez += 0.5 * w * np.sin((k + 1) * np.pi * x / L)
        By += 0.7 * w * np.cos(k * np.pi * xh / L)
        Bz += 0.3 * w * np.cos((k + 1) * np.pi * xh / L)
    Ex += 0.5 * amplitude * np.exp(-((x - 0.5 * L) / (0.15 * L)) ** 2)
    By -= By.mean()
    Bz -= Bz.mean()
    if not pec:
        return U
    Ey[0] = Ey[-1] = Ez[0] = Ez[-1] = 0.0
    return U
