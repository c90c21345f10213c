"""Time-harmonic boundary forcing and convergence to the harmonic regime.

The discrete harmonic solution U_hat solves (-i omega + A_h) U_hat = S g_hat,
where S g_hat is the boundary source of the absorbing faces (the same term
the time stepper uses, evaluated on the complex amplitude).  It is computed
through a lifting G = (0, 0, g3, g4) of the boundary data:
U* = U_hat - G solves the homogeneous-boundary problem with a volume
right-hand side, and U_hat = U* + G.

Traces are measured on the Yee pairs of each absorbing face: a tangential
boundary edge E_p and the tangential B_q of the first half cell inside,
with q chosen so that (E x n)_q = s * eps_{q p a} E_p is non-zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .diagnostics import DecayFit, energy, fit_decay, write_csv
from .errors import IncompatibleInitialData
from .fdtd_core.boundary import BoundaryOperator, BoundarySpec, Forcing
from .fdtd_core.state import StateVector, x_weights
from .fdtd_core.stepper import apply_generator, run
from .implicit_solver import shifted_solve

_AXIS = {"x": 0, "y": 1, "z": 2}


def _levi(i: int, j: int, k: int) -> int:
    return int((i - j) * (j - k) * (k - i) / 2)


@dataclass(frozen=True)
class TracePairs:
    """Flat E and B indices of every (edge, half-cell) trace pair."""

    e_idx: NDArray
    b_idx: NDArray
    q: NDArray          # tangential component of the trace
    coef: NDArray       # s * eps_{q p a}: (E x n)_q = coef * E_p
    points: NDArray     # boundary edge positions

    @property
    def size(self) -> int:
        return self.e_idx.size


def trace_pairs(grid, bc: BoundarySpec, bops: BoundaryOperator | None = None) -> TracePairs:
    bops = bops or BoundaryOperator(grid, bc)
    e_parts = grid.split_e(np.arange(grid.n_e))
    b_parts = grid.split_b(np.arange(grid.n_b))
    b_comp = {3 - len(b_parts) + k: arr for k, arr in enumerate(b_parts)}  # slab has no Bx
    e_pts = [grid.e_points(p) for p in range(3)]
    offs = np.cumsum([0] + [a.size for a in e_parts])
    cols: dict[str, list] = {"e": [], "b": [], "q": [], "c": [], "p": []}
    for f in bc.absorbing_faces(grid):
        a = _AXIS[f[0]]
        end = 0 if f[1] == "-" else -1
        s = -1.0 if f[1] == "-" else 1.0
        for p in range(3):
            if p == a:
                continue
            q = 3 - a - p
            if q not in b_comp:
                continue
            ei = np.take(e_parts[p], end, axis=a).ravel()
            bi = np.take(b_comp[q], end, axis=a).ravel()
            keep = ~bops.pinned[ei]
            ei, bi = ei[keep], bi[keep]
            cols["e"].append(ei)
            cols["b"].append(bi)
            cols["q"].append(np.full(ei.size, q))
            cols["c"].append(np.full(ei.size, s * _levi(q, p, a)))
            cols["p"].append(e_pts[p][ei - offs[p]])
    if not cols["e"]:
        z = np.zeros(0, dtype=int)
        return TracePairs(z, z, z, np.zeros(0), np.zeros((0, 3)))
    return TracePairs(*(np.concatenate(cols[k]) for k in ("e", "b", "q", "c", "p")))


def trace_values(E: NDArray, B: NDArray, pairs: TracePairs, c: float) -> NDArray:
    """(E x n + c B_t)_q on every pair."""
    return pairs.coef * E[pairs.e_idx] + c * B[pairs.b_idx]


def _g_on_pairs(gfun: Callable, pairs: TracePairs) -> NDArray:
    if pairs.size == 0:
        return np.zeros(0)
    g = np.asarray(gfun(pairs.points))
    return g[np.arange(pairs.size), pairs.q]


def trace_residual(state: StateVector, medium, bc: BoundarySpec, t: float | None = None,
                   g: Callable | None = None) -> float:
    """max |E x n + c B_t - g| over the absorbing faces.

    ``g`` overrides the forcing; with ``t=None`` the complex amplitude
    g_hat of a harmonic forcing is used.
    """
    pairs = trace_pairs(medium.grid, bc)
    if pairs.size == 0:
        return 0.0
    if g is None:
        g = bc.forcing.g_hat if t is None else (lambda p: bc.forcing(p, t))
    r = trace_values(state.E, state.B, pairs, medium.c) - _g_on_pairs(g, pairs)
    return float(np.max(np.abs(r)))


@dataclass
class HarmonicData:
    omega: float
    g_hat: Callable
    g3: NDArray
    g4: NDArray


def lift_boundary_data(g_hat: Callable, grid, bc: BoundarySpec, *, c: float = 1.0,
                       theta: float = 0.5, faces=None) -> tuple[NDArray, NDArray]:
    """Edge field g3 and face field g4 with (g3 x n + c g4_t) = g_hat on every pair.

    A share ``theta`` of g_hat goes into g3 on the boundary edges, the rest
    into g4 on the first half cells; both are continued inward with linear
    decay to zero over two cells.  Corner pairs, where the two faces compete
    for the same unknowns, are reconciled by a minimum-norm correction.
    """
    bops = BoundaryOperator(grid, bc, c)
    if faces is not None:
        bops.check_support(faces)
    pairs = trace_pairs(grid, bc, bops)
    g3 = np.zeros(grid.n_e, dtype=complex)
    g4 = np.zeros(grid.n_b, dtype=complex)
    if pairs.size == 0:
        return g3, g4
    gv = _g_on_pairs(g_hat, pairs).astype(complex)
    if not np.any(gv):
        return g3, g4
    e_parts = grid.split_e(np.arange(grid.n_e))
    b_parts = grid.split_b(np.arange(grid.n_b))
    b_comp = {3 - len(b_parts) + k: arr for k, arr in enumerate(b_parts)}
    # seed values on the trace pairs
    np.add.at(g3, pairs.e_idx, theta * pairs.coef * gv)
    np.add.at(g4, pairs.b_idx, (1.0 - theta) * gv / c)
    # half-strength copy one layer further in (zero beyond)
    inner3 = np.zeros_like(g3)
    inner4 = np.zeros_like(g4)
    for f in bc.absorbing_faces(grid):
        a = _AXIS[f[0]]
        lay0, lay1 = (0, 1) if f[1] == "-" else (-1, -2)
        for p in range(3):
            if p == a or e_parts[p].shape[a] < 3:
                continue
            e0 = np.take(e_parts[p], lay0, axis=a).ravel()
            e1 = np.take(e_parts[p], lay1, axis=a).ravel()
            inner3[e1] += 0.5 * g3[e0] * (~bops.pinned[e1])
        for q, arr in b_comp.items():
            if q == a or arr.shape[a] < 3:
                continue
            b0 = np.take(arr, lay0, axis=a).ravel()
            b1 = np.take(arr, lay1, axis=a).ravel()
            inner4[b1] += 0.5 * g4[b0]
    on_trace3 = np.zeros(grid.n_e, dtype=bool)
    on_trace3[pairs.e_idx] = True
    on_trace4 = np.zeros(grid.n_b, dtype=bool)
    on_trace4[pairs.b_idx] = True
    g3 += np.where(on_trace3, 0.0, inner3)
    g4 += np.where(on_trace4, 0.0, inner4)
    # exact trace: correct the trace unknowns by the minimum-norm fix
    r = gv - trace_values(g3, g4, pairs, c)
    if np.max(np.abs(r)) > 1e-14 * np.max(np.abs(gv)):
        ue, ie = np.unique(pairs.e_idx, return_inverse=True)
        ub, ib = np.unique(pairs.b_idx, return_inverse=True)
        k = pairs.size
        T = sp.hstack([sp.csr_matrix((pairs.coef, (np.arange(k), ie)), shape=(k, ue.size)),
                       sp.csr_matrix((np.full(k, c), (np.arange(k), ib)), shape=(k, ub.size))]).tocsr()
        fix = np.zeros(ue.size + ub.size, dtype=complex)
        for unit, part in ((1.0, np.real(r)), (1j, np.imag(r))):
            fix += unit * spla.lsqr(T, part, atol=1e-15, btol=1e-15, iter_lim=10 * k)[0]
        g3[ue] += fix[:ue.size]
        g4[ub] += fix[ue.size:]
    g3[bops.pinned] = 0.0
    return g3, g4


def lifting_trace_residual(g3: NDArray, g4: NDArray, g_hat: Callable, grid, bc, c: float = 1.0) -> float:
    pairs = trace_pairs(grid, bc)
    if pairs.size == 0:
        return 0.0
    return float(np.max(np.abs(trace_values(g3, g4, pairs, c) - _g_on_pairs(g_hat, pairs))))


def _g_norm(g_hat: Callable, pairs: TracePairs) -> float:
    return float(np.max(np.abs(_g_on_pairs(g_hat, pairs)))) if pairs.size else 0.0


def harmonic_residual(U: StateVector, omega: float, g_hat: Callable, medium, bc) -> float:
    """||(-i omega + A_h) U - S g_hat||_X (absolute)."""
    bops = BoundaryOperator(medium.grid, bc, medium.c)
    R = U.combine(-1j * omega, apply_generator(U, medium, bops), 1.0)
    R.E = R.E - bops.source_from(g_hat, dtype=complex)
    R.E[bops.pinned] = 0.0
    w = x_weights(medium.grid, medium)
    return float(np.sqrt(np.sum(w * np.abs(R.to_vector()) ** 2)))


def harmonic_solution(omega: float, g_hat: Callable | None, medium, bc: BoundarySpec, *,
                      theta: float = 0.5, faces=None, tol: float = 1e-12,
                      return_data: bool = False):
    """Complex U_hat with (-i omega + A_h) U_hat = S g_hat.

    ``g_hat`` maps (P, 3) points to complex (P, 3) tangential data; None
    takes it from ``bc.forcing``.
    """
    g = medium.grid
    g_hat = g_hat or bc.forcing.g_hat
    bops = BoundaryOperator(g, bc, medium.c)
    if faces is not None:
        bops.check_support(faces)
    g3, g4 = lift_boundary_data(g_hat, g, bc, c=medium.c, theta=theta)
    ns = medium.n_species
    Glift = StateVector(tuple(np.zeros((g.n_nodes, 3), dtype=complex) for _ in range(ns)), g3, g4, 0.0)
    AG = apply_generator(Glift, medium, bops)
    Fst = Glift.combine(1j * omega, AG, -1.0)
    Fst.E = Fst.E + bops.source_from(g_hat, dtype=complex)
    Fst.E[bops.pinned] = 0.0
    if not np.any(Fst.to_vector()):
        U = StateVector.zeros(g, ns, dtype=complex)
    else:
        Ust, _ = shifted_solve(omega, Fst, medium, bc, tol=tol)
        U = Ust.combine(1.0, Glift, 1.0)
    U.t = 0.0
    if return_data:
        return U, HarmonicData(float(omega), g_hat, g3, g4)
    return U


def rotate(U_hat: StateVector, omega: float, t: float) -> StateVector:
    """Re[U_hat exp(-i omega t)]"""
    out = U_hat.scaled(np.exp(-1j * omega * t)).real()
    out.t = t
    return out


@dataclass
class ConvergenceResult:
    t: NDArray
    err_x: NDArray
    err_components: dict[str, NDArray]
    fit: DecayFit | None
    U_hat: StateVector
    trace: object

    def write_csv(self, path: str) -> None:
        keys = list(self.err_components)
        rows = [[self.t[i], self.err_x[i]] + [self.err_components[k][i] for k in keys]
                for i in range(self.t.size)]
        write_csv(rows, ["t", "err_X"] + [f"err_{k}" for k in keys], path)

    def summary(self) -> dict:
        f = self.fit
        return {"fit": None if f is None else {
            "model": f.model, "rate": f.rate, "prefactor": f.prefactor,
            "window": list(f.window), "residual": f.residual, "n_points": f.n_points},
            "max_err": float(self.err_x.max()), "final_err": float(self.err_x[-1])}


def harmonic_bc(bc: BoundarySpec, omega: float, g_hat: Callable) -> BoundarySpec:
    return BoundarySpec(dict(bc.faces), Forcing("harmonic", omega, g_hat))


def check_compatible(U0: StateVector, U_hat: StateVector, medium, bc, g_scale: float,
                     tol: float = 1e-6) -> float:
    """Trace of U0 against the trace of Re[U_hat] (the reference at t = 0)."""
    pairs = trace_pairs(medium.grid, bc)
    if pairs.size == 0:
        return 0.0
    ref = trace_values(np.real(U_hat.E), np.real(U_hat.B), pairs, medium.c)
    mis = float(np.max(np.abs(trace_values(U0.E, U0.B, pairs, medium.c) - ref)))
    if mis > tol * max(g_scale, 1.0):
        raise IncompatibleInitialData(f"initial trace differs from the forced trace by {mis:.3e}")
    return mis


def convergence_test(omega: float, g_hat: Callable, medium, bc: BoundarySpec, U0: StateVector,
                     T: float, dt: float, *, model: str = "exp", window=None, every: int = 1,
                     U_hat: StateVector | None = None, fit: bool = True) -> ConvergenceResult:
    """March from U0 under g = Re[g_hat e^{-i omega t}] and measure
    ||U(t) - Re[U_hat e^{-i omega t}]||_X."""
    bc_h = harmonic_bc(bc, omega, g_hat)
    if U_hat is None:
        U_hat = harmonic_solution(omega, g_hat, medium, bc_h)
    pairs = trace_pairs(medium.grid, bc_h)
    check_compatible(U0, U_hat, medium, bc_h, _g_norm(g_hat, pairs))
    n = int(round(T / dt))
    ts, ex = [], []
    comps: dict[str, list] = {f"J{k + 1}": [] for k in range(medium.n_species)}
    comps.update(E=[], B=[])

    def sample(U):
        D = U.combine(1.0, rotate(U_hat, omega, U.t), -1.0)
        rep = energy(D, medium)
        ts.append(U.t)
        ex.append(np.sqrt(2.0 * rep.total))
        for k, v in enumerate(rep.kinetic):
            comps[f"J{k + 1}"].append(np.sqrt(2.0 * v))
        comps["E"].append(np.sqrt(2.0 * rep.electric))
        comps["B"].append(np.sqrt(2.0 * rep.magnetic))

    sample(U0)

    def cb(i, U, info):
        if i % every == 0 or i == n:
            sample(U)

    tr = run(medium, bc_h, U0, dt, n, callback=cb, diagnostics=False)
    t = np.array(ts)
    e = np.array(ex)
    res = None
    if fit:
        res = fit_decay(t, e, model, window)
    return ConvergenceResult(t, e, {k: np.array(v) for k, v in comps.items()}, res, U_hat, tr)


def interior_perturbation(grid, n_species: int = 2, amplitude: float = 1.0) -> StateVector:
    """Divergence-free perturbation supported away from the boundary.

    Built from the compact bump (1 - r^2/R^2)^2 with R = 0.3 L around the
    centre.  On the slab it fills the transverse (y, z) components of the
    currents and E.  On the box, E = curl_b of a bump face field (so div E
    vanishes at every node) and the currents stay zero.  It vanishes on
    every trace pair, so adding it to compatible data keeps them compatible.
    """
    def bump(pts):
        L = np.asarray(getattr(grid, "lengths", (getattr(grid, "length", 1.0),)), dtype=float)
        d = pts[:, :L.size] - 0.5 * L[None, :]
        r2 = np.sum((d / (0.3 * L[None, :])) ** 2, axis=1)
        return np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)

    U = StateVector.zeros(grid, n_species)
    if grid.colocated:
        bn = bump(grid.node_points())
        pattern = [(0.0, 1.0, -0.5), (0.0, 0.3, 1.0)]
        U.J = tuple(amplitude * bn[:, None] * np.asarray(pattern[s % 2])[None, :] for s in range(n_species))
        parts = grid.split_e(U.E)
        for comp, w in ((1, 0.5), (2, -0.25)):
            parts[comp][...] = amplitude * w * bump(grid.e_points(comp)).reshape(parts[comp].shape)
        return U
    F = np.zeros(grid.n_b)
    fparts = grid.split_b(F)
    for comp, w in zip(range(3), (1.0, 0.5, -0.25)):
        fparts[comp][...] = w * bump(grid.b_points(comp)).reshape(fparts[comp].shape)
    E = grid.curl_b(F)
    U.E = amplitude * E / max(np.max(np.abs(E)), 1e-300)
    return U
