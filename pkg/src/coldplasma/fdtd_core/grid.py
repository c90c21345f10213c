"""Staggered grids: a 3-D box and a 1-D slab.

Box (Yee staggering)::

    Ex (i+1/2, j, k)   Bx (i, j+1/2, k+1/2)
    Ey (i, j+1/2, k)   By (i+1/2, j, k+1/2)
    Ez (i, j, k+1/2)   Bz (i+1/2, j+1/2, k)

Currents J_s and the medium coefficients live at the nodes (i, j, k) as
full 3-vectors.  ``to_nodes`` averages edge E onto nodes and ``from_nodes``
is its adjoint for the weighted inner products, so the E/J exchange term
is exactly energy neutral and the rotation M_s stays a local 3x3 matrix.

Slab: all fields depend on x only.  E and J share the nodes x_i = i dx,
(By, Bz) sit at half nodes; Bx is constant in 1-D and is dropped.

Every field family is stored as one flat float vector.  Inner products
use lumped midpoint weights (dual-cell volumes), under which ``curl_b`` is
exactly the adjoint of ``curl_e``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from ..errors import ShapeMismatch, ValidationError

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


def _frozen(a: NDArray) -> NDArray:
    a.flags.writeable = False
    return a


def _node_weights(n: int, d: float) -> NDArray:
    w = np.full(n + 1, d)
    w[0] = w[-1] = d / 2
    return w


def _fwd(f: NDArray, axis: int, d: float) -> NDArray:
    return np.diff(f, axis=axis) / d


def _dual(h: NDArray, axis: int, w: NDArray) -> NDArray:
    # difference of h padded by one zero on each side along ``axis``
    a = np.moveaxis(h, axis, 0)
    out = np.empty((a.shape[0] + 1,) + a.shape[1:], dtype=np.result_type(h, w))
    out[0] = a[0]
    np.subtract(a[1:], a[:-1], out=out[1:-1])
    out[-1] = -a[-1]
    out /= w.reshape((-1,) + (1,) * (h.ndim - 1))
    return np.moveaxis(out, 0, axis)


def _avg_to_node(h: NDArray, axis: int) -> NDArray:
    pad = [(0, 0)] * h.ndim
    pad[axis] = (1, 1)
    g = np.pad(h, pad, mode="edge")
    a = np.moveaxis(g, axis, 0)
    return np.moveaxis(0.5 * (a[1:] + a[:-1]), 0, axis)


def _avg_to_half(v: NDArray, axis: int) -> NDArray:
    a = np.moveaxis(v, axis, 0)
    return np.moveaxis(0.5 * (a[1:] + a[:-1]), 0, axis)


def _fwd_mat(n: int, d: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr") / d


def _dual_mat(n: int, d: float) -> sp.csr_matrix:
    w = _node_weights(n, d)
    return (sp.diags(1.0 / w) @ (-_fwd_mat(n, d).T * d)).tocsr()


def _avg_node_mat(n: int) -> sp.csr_matrix:
    A = sp.lil_matrix((n + 1, n))
    for i in range(n + 1):
        lo, hi = max(i - 1, 0), min(i, n - 1)
        A[i, lo] += 0.5
        A[i, hi] += 0.5
    return A.tocsr()


def _avg_half_mat(n: int) -> sp.csr_matrix:
    return sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


def _kron3(a, b, c) -> sp.csr_matrix:
    return sp.kron(sp.kron(a, b), c, format="csr")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [0,Lx]x[0,Ly]x[0,Lz] with nx*ny*nz cells."""

    lengths: tuple[float, float, float]
    cells: tuple[int, int, int]
    kind = "box"
    colocated = False

    def __post_init__(self):
        if len(self.cells) != 3 or min(self.cells) < 1:
            raise ValidationError("box needs three cell counts >= 1")
        if min(self.lengths) <= 0:
            raise ValidationError("box extents must be positive")
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))

    # -- geometry ---------------------------------------------------------
    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))  # type: ignore

    @property
    def faces(self) -> tuple[str, ...]:
        return FACES

    @property
    def node_shape(self) -> tuple[int, int, int]:
        return tuple(n + 1 for n in self.cells)  # type: ignore

    @property
    def cell_shape(self) -> tuple[int, int, int]:
        return self.cells

    def e_shape(self, comp: int) -> tuple[int, int, int]:
        return tuple(n if a == comp else n + 1 for a, n in enumerate(self.cells))  # type: ignore

    def b_shape(self, comp: int) -> tuple[int, int, int]:
        return tuple(n + 1 if a == comp else n for a, n in enumerate(self.cells))  # type: ignore

    @property
    def e_sizes(self) -> list[int]:
        return [int(np.prod(self.e_shape(c))) for c in range(3)]

    @property
    def b_sizes(self) -> list[int]:
        return [int(np.prod(self.b_shape(c))) for c in range(3)]

    @property
    def n_e(self) -> int:
        return sum(self.e_sizes)

    @property
    def n_b(self) -> int:
        return sum(self.b_sizes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    def _coords(self, axis: int, half: bool) -> NDArray:
        n, d = self.cells[axis], self.spacing[axis]
        return (np.arange(n) + 0.5) * d if half else np.arange(n + 1) * d

    def _points(self, halves: tuple[bool, bool, bool]) -> NDArray:
        X = np.meshgrid(*[self._coords(a, h) for a, h in enumerate(halves)], indexing="ij")
        return np.stack([x.ravel() for x in X], axis=-1)

    def node_points(self) -> NDArray:
        return self._points((False, False, False))

    def e_points(self, comp: int) -> NDArray:
        return self._points(tuple(a == comp for a in range(3)))  # type: ignore

    def b_points(self, comp: int) -> NDArray:
        return self._points(tuple(a != comp for a in range(3)))  # type: ignore

    def cell_points(self) -> NDArray:
        return self._points((True, True, True))

    # -- flat <-> component views -----------------------------------------
    def split_e(self, E: NDArray) -> list[NDArray]:
        if E.shape[0] != self.n_e:
            raise ShapeMismatch(f"E has {E.shape[0]} entries, grid expects {self.n_e}")
        o = np.cumsum([0] + self.e_sizes)
        return [E[o[c]:o[c + 1]].reshape(self.e_shape(c)) for c in range(3)]

    def split_b(self, B: NDArray) -> list[NDArray]:
        if B.shape[0] != self.n_b:
            raise ShapeMismatch(f"B has {B.shape[0]} entries, grid expects {self.n_b}")
        o = np.cumsum([0] + self.b_sizes)
        return [B[o[c]:o[c + 1]].reshape(self.b_shape(c)) for c in range(3)]

    @staticmethod
    def join(parts) -> NDArray:
        return np.concatenate([p.ravel() for p in parts])

    # -- weights ----------------------------------------------------------
    def _w(self, axis: int, half: bool) -> NDArray:
        n, d = self.cells[axis], self.spacing[axis]
        return np.full(n, d) if half else _node_weights(n, d)

    def _weights(self, halves) -> NDArray:
        wx, wy, wz = (self._w(a, h) for a, h in enumerate(halves))
        return (wx[:, None, None] * wy[None, :, None] * wz[None, None, :]).ravel()

    @cached_property
    def w_e(self) -> NDArray:
        return _frozen(np.concatenate([self._weights(tuple(a == c for a in range(3))) for c in range(3)]))

    @cached_property
    def w_b(self) -> NDArray:
        return _frozen(np.concatenate([self._weights(tuple(a != c for a in range(3))) for c in range(3)]))

    @cached_property
    def w_n(self) -> NDArray:
        return _frozen(self._weights((False, False, False)))

    # -- stencils -----------------------------------------------------------
    def curl_e(self, E: NDArray) -> NDArray:
        """Edge field -> face field (circulation around each face)."""
        Ex, Ey, Ez = self.split_e(E)
        dx, dy, dz = self.spacing
        Bx = _fwd(Ez, 1, dy) - _fwd(Ey, 2, dz)
        By = _fwd(Ex, 2, dz) - _fwd(Ez, 0, dx)
        Bz = _fwd(Ey, 0, dx) - _fwd(Ex, 1, dy)
        return self.join((Bx, By, Bz))

    def curl_b(self, B: NDArray) -> NDArray:
        """Face field -> edge field; weighted adjoint of ``curl_e``.

        Outside the box the tangential face values count as zero, so the
        boundary rows are half-cell differences.  PEC pinning and the
        Silver-Muller impedance term are applied by the caller.
        """
        Bx, By, Bz = self.split_b(B)
        w = [self._w(a, False) for a in range(3)]
        Ex = _dual(Bz, 1, w[1]) - _dual(By, 2, w[2])
        Ey = _dual(Bx, 2, w[2]) - _dual(Bz, 0, w[0])
        Ez = _dual(By, 0, w[0]) - _dual(Bx, 1, w[1])
        return self.join((Ex, Ey, Ez))

    def to_nodes(self, E: NDArray) -> NDArray:
        """Average edge components onto nodes -> (n_nodes, 3)."""
        parts = self.split_e(E)
        return np.stack([_avg_to_node(parts[c], c).ravel() for c in range(3)], axis=-1)

    def from_nodes(self, V: NDArray) -> NDArray:
        """Adjoint of ``to_nodes``: nodal 3-vectors -> edge field."""
        V = V.reshape(self.node_shape + (3,))
        return self.join([_avg_to_half(V[..., c], c) for c in range(3)])

    def grad(self, phi: NDArray) -> NDArray:
        phi = phi.reshape(self.node_shape)
        return self.join([_fwd(phi, a, self.spacing[a]) for a in range(3)])

    def div_e(self, E: NDArray) -> NDArray:
        """Edge field -> nodal divergence (negative weighted adjoint of grad)."""
        parts = self.split_e(E)
        out = sum(_dual(parts[a], a, self._w(a, False)) for a in range(3))
        return out.ravel()

    def div_b(self, B: NDArray) -> NDArray:
        parts = self.split_b(B)
        return sum(_fwd(parts[a], a, self.spacing[a]) for a in range(3)).ravel()

    def interior_nodes(self) -> NDArray:
        m = np.zeros(self.node_shape, dtype=bool)
        m[1:-1, 1:-1, 1:-1] = True
        return m.ravel()

    # -- boundary geometry ----------------------------------------------------
    def tangential_edges(self, face: str, comp: int) -> NDArray:
        """Boolean mask over component ``comp`` of E for edges lying in ``face``."""
        axis = "xyz".index(face[0])
        m = np.zeros(self.e_shape(comp), dtype=bool)
        if comp == axis:
            return m.ravel()
        idx = [slice(None)] * 3
        idx[axis] = 0 if face[1] == "-" else -1
        m[tuple(idx)] = True
        return m.ravel()

    def normal_faces(self, face: str) -> NDArray:
        """Boolean mask over the full B vector for normal components on ``face``."""
        axis = "xyz".index(face[0])
        masks = []
        for c in range(3):
            m = np.zeros(self.b_shape(c), dtype=bool)
            if c == axis:
                idx = [slice(None)] * 3
                idx[axis] = 0 if face[1] == "-" else -1
                m[tuple(idx)] = True
            masks.append(m.ravel())
        return np.concatenate(masks)

    def face_spacing(self, face: str) -> float:
        return self.spacing["xyz".index(face[0])]

    # -- assembled operators (scipy.sparse) ------------------------------------
    def curl_e_matrix(self) -> sp.csr_matrix:
        (nx, ny, nz), (dx, dy, dz) = self.cells, self.spacing
        IN = [sp.identity(n + 1, format="csr") for n in (nx, ny, nz)]
        IC = [sp.identity(n, format="csr") for n in (nx, ny, nz)]
        F = [_fwd_mat(n, d) for n, d in zip((nx, ny, nz), (dx, dy, dz))]
        Z = lambda r, c: sp.csr_matrix((r, c))  # noqa: E731
        ne, nb = self.e_sizes, self.b_sizes
        # Bx = d_y Ez - d_z Ey on (N, C, C)
        bx_ez = _kron3(IN[0], F[1], IC[2])
        bx_ey = _kron3(IN[0], IC[1], F[2])
        by_ex = _kron3(IC[0], IN[1], F[2])
        by_ez = _kron3(F[0], IN[1], IC[2])
        bz_ey = _kron3(F[0], IC[1], IN[2])
        bz_ex = _kron3(IC[0], F[1], IN[2])
        return sp.bmat([
            [Z(nb[0], ne[0]), -bx_ey, bx_ez],
            [by_ex, Z(nb[1], ne[1]), -by_ez],
            [-bz_ex, bz_ey, Z(nb[2], ne[2])],
        ], format="csr")

    def to_nodes_matrix(self) -> sp.csr_matrix:
        """(3 n_nodes) x n_e matrix, node-major (node, comp) ordering."""
        (nx, ny, nz) = self.cells
        IN = [sp.identity(n + 1, format="csr") for n in (nx, ny, nz)]
        A = [_avg_node_mat(n) for n in (nx, ny, nz)]
        blocks = [_kron3(A[0], IN[1], IN[2]), _kron3(IN[0], A[1], IN[2]), _kron3(IN[0], IN[1], A[2])]
        comp_major = sp.block_diag(blocks, format="csr")
        nn = self.n_nodes
        perm = (np.arange(nn)[:, None] + nn * np.arange(3)[None, :]).ravel()
        return comp_major[perm]

    def weight_matrices(self):
        return sp.diags(self.w_e), sp.diags(self.w_b), sp.diags(np.repeat(self.w_n, 3))

    def to_dict(self) -> dict:
        return {"kind": "box", "lengths": list(self.lengths), "cells": list(self.cells)}


@dataclass(frozen=True)
class Slab:
    """1-D slab [0, L] with n cells; fields depend on x only."""

    length: float
    n: int
    kind = "slab"
    colocated = True

    def __post_init__(self):
        if self.n < 1 or self.length <= 0:
            raise ValidationError("slab needs n >= 1 cells and positive length")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def spacing(self) -> tuple[float]:
        return (self.dx,)

    @property
    def faces(self) -> tuple[str, ...]:
        return ("x-", "x+")

    @property
    def node_shape(self) -> tuple[int]:
        return (self.n + 1,)

    @property
    def n_nodes(self) -> int:
        return self.n + 1

    @property
    def n_e(self) -> int:
        return 3 * (self.n + 1)

    @property
    def n_b(self) -> int:
        return 2 * self.n

    def node_points(self) -> NDArray:
        x = np.arange(self.n + 1) * self.dx
        return np.stack([x, np.zeros_like(x), np.zeros_like(x)], axis=-1)

    def e_points(self, comp: int) -> NDArray:
        return self.node_points()

    def b_points(self, comp: int) -> NDArray:
        x = (np.arange(self.n) + 0.5) * self.dx
        return np.stack([x, np.zeros_like(x), np.zeros_like(x)], axis=-1)

    def split_e(self, E: NDArray) -> list[NDArray]:
        if E.shape[0] != self.n_e:
            raise ShapeMismatch(f"E has {E.shape[0]} entries, slab expects {self.n_e}")
        return list(E.reshape(3, self.n + 1))

    def split_b(self, B: NDArray) -> list[NDArray]:
        """Returns [By, Bz]."""
        if B.shape[0] != self.n_b:
            raise ShapeMismatch(f"B has {B.shape[0]} entries, slab expects {self.n_b}")
        return list(B.reshape(2, self.n))

    @staticmethod
    def join(parts) -> NDArray:
        return np.concatenate([p.ravel() for p in parts])

    @cached_property
    def w_nodes1d(self) -> NDArray:
        return _frozen(_node_weights(self.n, self.dx))

    @cached_property
    def w_e(self) -> NDArray:
        return _frozen(np.tile(self.w_nodes1d, 3))

    @cached_property
    def w_b(self) -> NDArray:
        return _frozen(np.full(2 * self.n, self.dx))

    @cached_property
    def w_n(self) -> NDArray:
        return _frozen(self.w_nodes1d)

    def curl_e(self, E: NDArray) -> NDArray:
        _, Ey, Ez = self.split_e(E)
        return self.join((-_fwd(Ez, 0, self.dx), _fwd(Ey, 0, self.dx)))

    def curl_b(self, B: NDArray) -> NDArray:
        By, Bz = self.split_b(B)
        w = self.w_nodes1d
        return self.join((np.zeros(self.n + 1), -_dual(Bz, 0, w), _dual(By, 0, w)))

    def to_nodes(self, E: NDArray) -> NDArray:
        return E.reshape(3, self.n + 1).T.copy()

    def from_nodes(self, V: NDArray) -> NDArray:
        return V.reshape(self.n + 1, 3).T.ravel().copy()

    def div_e(self, E: NDArray) -> NDArray:
        """d/dx of Ex at the nodes (centred inside, one-sided at the ends)."""
        return np.gradient(self.split_e(E)[0], self.dx)

    def div_b(self, B: NDArray) -> NDArray:
        # Bx is uniform in 1-D, so the discrete divergence vanishes identically
        return np.zeros(self.n)

    def interior_nodes(self) -> NDArray:
        m = np.zeros(self.n + 1, dtype=bool)
        m[1:-1] = True
        return m

    def tangential_edges(self, face: str, comp: int) -> NDArray:
        m = np.zeros(self.n + 1, dtype=bool)
        if comp != 0:
            m[0 if face == "x-" else -1] = True
        return m

    def normal_faces(self, face: str) -> NDArray:
        return np.zeros(self.n_b, dtype=bool)

    def face_spacing(self, face: str) -> float:
        return self.dx

    def curl_e_matrix(self) -> sp.csr_matrix:
        n = self.n
        F = _fwd_mat(n, self.dx)
        Z = sp.csr_matrix((n, n + 1))
        return sp.bmat([[Z, None, -F], [Z, F, None]], format="csr")

    def to_nodes_matrix(self) -> sp.csr_matrix:
        nn = self.n + 1
        perm = (np.arange(nn)[:, None] + nn * np.arange(3)[None, :]).ravel()
        return sp.identity(3 * nn, format="csr")[perm]

    def weight_matrices(self):
        return sp.diags(self.w_e), sp.diags(self.w_b), sp.diags(np.repeat(self.w_n, 3))

    def to_dict(self) -> dict:
        return {"kind": "slab", "length": self.length, "n": self.n}


def grid_from_dict(d: dict):
    if d.get("kind") == "slab":
        return Slab(float(d["length"]), int(d["n"]))
    return Box(tuple(d["lengths"]), tuple(d["cells"]))


def curl_b_matrix(grid) -> sp.csr_matrix:
    """Assembled adjoint: W_e^-1 C^T W_b."""
    C = grid.curl_e_matrix()
    return (sp.diags(1.0 / grid.w_e) @ C.T @ sp.diags(grid.w_b)).tocsr()


def from_nodes_matrix(grid) -> sp.csr_matrix:
    A = grid.to_nodes_matrix()
    return (sp.diags(1.0 / grid.w_e) @ A.T @ sp.diags(np.repeat(grid.w_n, 3))).tocsr()


def cfl_max_dt(grid, c: float = 1.0) -> float:
    """Vacuum Courant bound 1 / (c sqrt(sum 1/d^2)); plasma terms are implicit."""
    return 1.0 / (c * np.sqrt(sum(1.0 / d**2 for d in grid.spacing)))
