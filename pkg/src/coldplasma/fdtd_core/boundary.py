"""Boundary tags, antenna forcing and their discrete realisation.

PEC faces pin the tangential edges of E to zero.  On Silver-Muller faces
the tangential B trace just outside the grid is a ghost value fixed by the
impedance relation E x n + c B_t = g; eliminating it turns the boundary
rows of curl_b into

    dE/dt += -kappa * E + kappa * (n x g),     kappa = 2 c / h

on every tangential boundary edge (h is the spacing normal to the face).
Edges shared by a PEC and a Silver-Muller face follow the PEC rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from numpy.typing import NDArray

from ..errors import UnsupportedFace, ValidationError

PEC = "PEC"
SM = "SilverMuller"


@dataclass(frozen=True)
class VectorProfile:
    """Complex tangential profile g_hat(x) = (vec_re + i vec_im) * shape(x)."""

    vec_re: tuple[float, float, float] = (0.0, 0.0, 0.0)
    vec_im: tuple[float, float, float] = (0.0, 0.0, 0.0)
    shape: Callable | None = None  # scalar profile from coldplasma.medium

    def __call__(self, pts: NDArray) -> NDArray:
        v = np.asarray(self.vec_re, float) + 1j * np.asarray(self.vec_im, float)
        s = np.ones(pts.shape[0]) if self.shape is None else self.shape(pts)
        return s[:, None] * v[None, :]

    def to_dict(self) -> dict:
        d = {"vector": list(self.vec_re), "vector_im": list(self.vec_im)}
        if self.shape is not None:
            d["shape"] = self.shape.to_dict()
        return d


@dataclass(frozen=True)
class Forcing:
    """Boundary data g(x, t) on the Silver-Muller faces.

    kind 'zero': g = 0;  'harmonic': g = Re[g_hat(x) exp(-i omega t)];
    'pulse': g = Re[g_hat(x)] exp(-(t-t0)^2 / (2 width^2)) cos(omega (t-t0));
    'callback': g = fn(points, t).
    """

    kind: str = "zero"
    omega: float = 0.0
    profile: Callable | None = None
    t0: float = 0.0
    width: float = 1.0
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "harmonic", "pulse", "callback"):
            raise ValidationError(f"unknown forcing kind {self.kind!r}")

    def is_zero(self) -> bool:
        return self.kind == "zero"

    def g_hat(self, pts: NDArray) -> NDArray:
        if self.kind != "harmonic" or self.profile is None:
            return np.zeros((pts.shape[0], 3), dtype=complex)
        return self.profile(pts)

    def __call__(self, pts: NDArray, t: float) -> NDArray:
        if self.kind == "zero":
            return np.zeros((pts.shape[0], 3))
        if self.kind == "harmonic":
            return np.real(self.profile(pts) * np.exp(-1j * self.omega * t))
        if self.kind == "pulse":
            env = np.exp(-((t - self.t0) ** 2) / (2 * self.width**2)) * np.cos(self.omega * (t - self.t0))
            return np.real(self.profile(pts)) * env
        return np.asarray(self.fn(pts, t), dtype=float)


@dataclass(frozen=True)
class BoundarySpec:
    faces: Mapping[str, str]
    forcing: Forcing = field(default_factory=Forcing)

    def __post_init__(self):
        for f, tag in self.faces.items():
            if tag not in (PEC, SM):
                raise ValidationError(f"face {f}: tag must be {PEC!r} or {SM!r}")
        if not self.faces:
            raise ValidationError("at least one face must be tagged")

    def tag(self, face: str) -> str:
        return self.faces.get(face, PEC)

    def absorbing_faces(self, grid) -> list[str]:
        return [f for f in grid.faces if self.tag(f) == SM]

    def pec_faces(self, grid) -> list[str]:
        return [f for f in grid.faces if self.tag(f) == PEC]

    def check(self, grid) -> None:
        extra = set(self.faces) - set(grid.faces)
        if extra:
            raise ValidationError(f"faces {sorted(extra)} do not exist on a {grid.kind}")


def all_pec(grid) -> BoundarySpec:
    return BoundarySpec({f: PEC for f in grid.faces})


def all_sm(grid, forcing: Forcing | None = None) -> BoundarySpec:
    return BoundarySpec({f: SM for f in grid.faces}, forcing or Forcing())


_AXIS = {"x": 0, "y": 1, "z": 2}


class BoundaryOperator:
    """Masks and coefficients of a BoundarySpec on a given grid."""

    def __init__(self, grid, bc: BoundarySpec, c: float = 1.0):
        bc.check(grid)
        self.grid = grid
        self.bc = bc
        self.c = c
        pinned = np.zeros(grid.n_e, dtype=bool)
        offs = np.cumsum([0] + [grid.split_e(np.zeros(grid.n_e))[k].size for k in range(3)])
        for f in bc.pec_faces(grid):
            for comp in range(3):
                pinned[offs[comp]:offs[comp + 1]] |= grid.tangential_edges(f, comp)
        self.pinned = pinned
        self.free = ~pinned
        kappa = np.zeros(grid.n_e)
        # per-face (edge indices, component, outward sign, kappa_face)
        self.sm_parts: list[tuple[str, NDArray, int, float, float]] = []
        for f in bc.absorbing_faces(grid):
            k_face = 2.0 * c / grid.face_spacing(f)
            sign = -1.0 if f[1] == "-" else 1.0
            for comp in range(3):
                m = np.zeros(grid.n_e, dtype=bool)
                m[offs[comp]:offs[comp + 1]] = grid.tangential_edges(f, comp)
                m &= ~pinned
                idx = np.flatnonzero(m)
                if idx.size:
                    kappa[idx] += k_face
                    self.sm_parts.append((f, idx, comp, sign, k_face))
        self.kappa = kappa
        self._offs = offs
        self._pts = [grid.e_points(comp) for comp in range(3)]

    def _edge_points(self, idx: NDArray, comp: int) -> NDArray:
        return self._pts[comp][idx - self._offs[comp]]

    def trace_edges(self):
        """Yield (face, flat edge indices, component, outward sign, kappa_face, points)."""
        for f, idx, comp, sign, k in self.sm_parts:
            yield f, idx, comp, sign, k, self._edge_points(idx, comp)

    def source_from(self, gfun: Callable[[NDArray], NDArray], dtype=float) -> NDArray:
        """E-shaped vector  sum_faces kappa_f (n_f x g)_comp  for boundary data g."""
        out = np.zeros(self.grid.n_e, dtype=dtype)
        for f, idx, comp, sign, k, pts in self.trace_edges():
            axis = _AXIS[f[0]]
            g = gfun(pts)
            ng = sign * np.cross(np.eye(3)[axis], g)
            out[idx] += k * ng[:, comp]
        return out

    def source(self, t: float) -> NDArray:
        if self.bc.forcing.is_zero() or not self.sm_parts:
            return np.zeros(self.grid.n_e)
        return self.source_from(lambda p: self.bc.forcing(p, t))

    def source_hat(self) -> NDArray:
        """Complex source of the time-harmonic forcing amplitude g_hat."""
        return self.source_from(self.bc.forcing.g_hat, dtype=complex)

    def check_support(self, faces_with_data) -> None:
        for f in faces_with_data:
            if self.bc.tag(f) != SM:
                raise UnsupportedFace(f"boundary data given on non-absorbing face {f}")
