"""State vector U = (J_1, J_2, E, B) on a staggered grid."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from ..errors import ShapeMismatch


@dataclass
class StateVector:
    """J[s] has shape (n_nodes, 3); E and B are flat edge / face vectors.

    rho, when tracked, holds one nodal charge density per species.
    """

    J: tuple[NDArray, ...]
    E: NDArray
    B: NDArray
    t: float = 0.0
    rho: tuple[NDArray, ...] | None = None

    @classmethod
    def zeros(cls, grid, n_species: int = 2, dtype=float, track_rho: bool = False) -> "StateVector":
        J = tuple(np.zeros((grid.n_nodes, 3), dtype=dtype) for _ in range(n_species))
        rho = tuple(np.zeros(grid.n_nodes, dtype=dtype) for _ in range(n_species)) if track_rho else None
        return cls(J, np.zeros(grid.n_e, dtype=dtype), np.zeros(grid.n_b, dtype=dtype), 0.0, rho)

    def check(self, grid) -> None:
        if self.E.shape != (grid.n_e,) or self.B.shape != (grid.n_b,):
            raise ShapeMismatch("E/B sizes do not match the grid")
        for j in self.J:
            if j.shape != (grid.n_nodes, 3):
                raise ShapeMismatch("current arrays must be (n_nodes, 3)")

    def copy(self) -> "StateVector":
        return StateVector(tuple(j.copy() for j in self.J), self.E.copy(), self.B.copy(), self.t,
                           None if self.rho is None else tuple(r.copy() for r in self.rho))

    @property
    def n_species(self) -> int:
        return len(self.J)

    # flat vector used by the linear solvers and the assembled operators
    def to_vector(self) -> NDArray:
        return np.concatenate([j.ravel() for j in self.J] + [self.E, self.B])

    @classmethod
    def from_vector(cls, v: NDArray, grid, n_species: int = 2, t: float = 0.0) -> "StateVector":
        nj = 3 * grid.n_nodes
        expected = n_species * nj + grid.n_e + grid.n_b
        if v.shape != (expected,):
            raise ShapeMismatch(f"vector has {v.shape}, expected ({expected},)")
        J = tuple(v[s * nj:(s + 1) * nj].reshape(grid.n_nodes, 3).copy() for s in range(n_species))
        o = n_species * nj
        return cls(J, v[o:o + grid.n_e].copy(), v[o + grid.n_e:].copy(), t)

    def combine(self, a: complex, other: "StateVector", b: complex) -> "StateVector":
        """a * self + b * other (rho combined when both carry it)."""
        rho = None
        if self.rho is not None and other.rho is not None:
            rho = tuple(a * r + b * q for r, q in zip(self.rho, other.rho))
        return StateVector(tuple(a * x + b * y for x, y in zip(self.J, other.J)),
                           a * self.E + b * other.E, a * self.B + b * other.B, self.t, rho)

    def scaled(self, a: complex) -> "StateVector":
        rho = None if self.rho is None else tuple(a * r for r in self.rho)
        return replace(self, J=tuple(a * j for j in self.J), E=a * self.E, B=a * self.B, rho=rho)

    def real(self) -> "StateVector":
        rho = None if self.rho is None else tuple(np.real(r).copy() for r in self.rho)
        return StateVector(tuple(np.real(j).copy() for j in self.J), np.real(self.E).copy(),
                           np.real(self.B).copy(), self.t, rho)


def x_weights(grid, medium) -> NDArray:
    """Diagonal of the energy inner product in ``to_vector`` ordering.

    Current weights 1/(eps0 omega_p^2) become 0 where omega_p vanishes
    (there the current is decoupled from E and stays at its initial value).
    """
    eps0, c = medium.eps0, medium.c
    parts = []
    wn = grid.w_n
    for wp in medium.omega_p:
        inv = np.divide(1.0, eps0 * wp**2, out=np.zeros_like(wp), where=wp > 0)
        parts.append(np.repeat(wn * inv, 3))
    parts.append(eps0 * grid.w_e)
    parts.append(c * c * eps0 * grid.w_b)
    return np.concatenate(parts)
