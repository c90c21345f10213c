"""Staggered-grid discretisation, boundary conditions and time stepping."""

import numpy as np

from .boundary import PEC, SM, BoundaryOperator, BoundarySpec, Forcing, VectorProfile, all_pec, all_sm
from .grid import Box, Slab, cfl_max_dt, curl_b_matrix, from_nodes_matrix, grid_from_dict
from .initial import cavity_mode, random_state, smooth_slab_state
from .snapshot import read_snapshot, write_snapshot
from .state import StateVector, x_weights
from .stepper import RunTrace, Stepper, apply_generator, rhs, run


def curl_E(grid, E):
    return grid.curl_e(E)


def curl_B(grid, B):
    return grid.curl_b(B)


def step(state, dt, medium, bc):
    """One time step (builds a Stepper; use ``Stepper`` directly in loops)."""
    return Stepper(medium, bc, dt).step(state)[0]


def apply_pec(state, grid, faces):
    """Zero the tangential E on ``faces``.  Nodal currents are left alone:
    they are not co-located with the tangential edges, and B.n on the
    faces is only ever changed through tangential E."""
    out = state.copy()
    mask = np.zeros(grid.n_e, dtype=bool)
    for f in faces:
        mask |= np.concatenate([grid.tangential_edges(f, comp) for comp in range(3)])
    out.E[mask] = 0.0
    return out


def apply_silver_muller(state, medium, faces, forcing=None, t=None):
    """Trace residual E x n + c B_t - g on ``faces`` for the given state.

    The impedance closure itself is built into the update (see
    ``boundary``); this evaluates how well a state satisfies it, with B_t
    taken one-sided from the first interior half cell.
    """
    from ..harmonic import trace_residual
    bc = BoundarySpec({f: SM for f in faces}, forcing or Forcing())
    return trace_residual(state, medium, bc, state.t if t is None else t)


__all__ = [
    "PEC", "SM", "Box", "Slab", "BoundaryOperator", "BoundarySpec", "Forcing", "VectorProfile",
    "RunTrace", "StateVector", "Stepper", "all_pec", "all_sm", "apply_generator", "apply_pec",
    "apply_silver_muller", "cavity_mode", "cfl_max_dt", "curl_B", "curl_E", "curl_b_matrix",
    "from_nodes_matrix", "grid_from_dict", "random_state", "read_snapshot", "rhs", "run",
    "smooth_slab_state", "step", "write_snapshot", "x_weights",
]
