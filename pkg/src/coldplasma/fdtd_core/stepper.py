"""Generator application and the leapfrog / Crank-Nicolson time step.

Semi-discrete system, dU/dt + A_h U = f(t)::

    dJ_s/dt = eps0 wp_s^2 P E - M_s J_s
    dE/dt   = c^2 curl_b B - (1/eps0) P* sum_s J_s - kappa E + src(t)
    dB/dt   = -curl_e E

P averages edge E onto the nodes (identity on the slab) and P* is its
weighted adjoint.  One step from t_n to t_n + dt::

    B' = B^n - dt/2 curl_e E^n
    (E, J)^{n+1}: trapezoidal rule with B' frozen
    B^{n+1} = B' - dt/2 curl_e E^{n+1}

With Eb = (E^n + E^{n+1})/2 the trapezoidal pair reduces to

    (2 + dt kappa) Eb + dt^2/2 P* D P Eb = 2 E^n + dt c^2 curl_b B'
                                          - dt/eps0 P* sum_s R_s J_s^n + dt srcbar
    R_s = (I + dt/2 M_s)^-1,   D = sum_s wp_s^2 R_s

which is a 3x3 solve per node on the slab.  On the box the coupling
term is tiny next to the diagonal (ratio ~ dt^2 wp^2 / 4), so a Jacobi
iteration reaches round-off in a handful of sweeps; a sparse LU takes
over when the row-sum contraction bound is not small.  The scheme dissipates
E_h = E - c^2 eps0 dt^2/8 |curl_e E|^2 exactly:

    E_h^{n+1} - E_h^n = -dt [ (1/eps0) sum_s |sqrt(nu_s) Jb_s / wp_s|^2
                              + eps0 (kappa Eb, Eb) - eps0 (Eb, srcbar) ]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from ..errors import CFLViolation
from ..stix_algebra import assemble_M, resolvent_M
from .boundary import BoundaryOperator, BoundarySpec
from .grid import cfl_max_dt, curl_b_matrix, from_nodes_matrix
from .state import StateVector

_EPS = np.finfo(float).eps
_JACOBI_MAX_CONTRACTION = 0.25
_JACOBI_MAX_SWEEPS = 40

def _two_sum(a: NDArray, d: NDArray, carry: NDArray | None) -> tuple[NDArray, NDArray]:
    """a + d with the rounding error returned separately (compensated update)."""
    if carry is not None:
        d = d + carry
    s = a + d
    bb = s - a
    return s, (a - (s - bb)) + (d - bb)


def species_matrices(medium) -> list[NDArray]:
    return [assemble_M(nu, Om, medium.b) for nu, Om in zip(medium.nu, medium.Omega_c)]


def apply_generator(U: StateVector, medium, bops: BoundaryOperator) -> StateVector:
    """A_h U for homogeneous boundary data (matrix-free)."""
    grid = medium.grid
    eps0, c = medium.eps0, medium.c
    PE = grid.to_nodes(U.E)
    Ms = species_matrices(medium)
    J_out = tuple(np.einsum("nij,nj->ni", M, J) - eps0 * (wp**2)[:, None] * PE
                  for M, J, wp in zip(Ms, U.J, medium.omega_p))
    Jsum = sum(U.J)
    E_out = grid.from_nodes(Jsum) / eps0 - c * c * grid.curl_b(U.B) + bops.kappa * U.E
    E_out = np.where(bops.pinned, 0.0, E_out)
    B_out = grid.curl_e(U.E)
    return StateVector(J_out, E_out, B_out, U.t)


def rhs(U: StateVector, medium, bops: BoundaryOperator) -> StateVector:
    """Right-hand side dU/dt = -A_h U + f(t) at time U.t."""
    out = apply_generator(U, medium, bops).scaled(-1.0)
    out.E = out.E + np.where(bops.pinned, 0.0, bops.source(U.t))
    return out


@dataclass
class StepInfo:
    E_mid: NDArray
    J_mid: tuple[NDArray, ...]
    src_mid: NDArray
    iterations: int


class Stepper:
    """Precomputed leapfrog / Crank-Nicolson update for fixed dt."""

    def __init__(self, medium, bc: BoundarySpec, dt: float, *, check_cfl: bool = True):
        grid = medium.grid
        self.grid, self.medium, self.bc, self.dt = grid, medium, bc, float(dt)
        self.bops = BoundaryOperator(grid, bc, medium.c)
        dtmax = cfl_max_dt(grid, medium.c)
        if check_cfl and dt > dtmax * (1 + 1e-12):
            raise CFLViolation(f"dt = {dt:g} exceeds the Courant bound {dtmax:g}")
        eps0 = medium.eps0
        self.R = [resolvent_M(dt / 2, nu, Om, medium.b) for nu, Om in zip(medium.nu, medium.Omega_c)]
        self.couple = [(dt / 2) * eps0 * (wp**2)[:, None, None] * R for wp, R in zip(medium.omega_p, self.R)]
        D = sum((wp**2)[:, None, None] * R for wp, R in zip(medium.omega_p, self.R))
        self.D = D
        self._last: StateVector | None = None
        self._carry: dict = {}
        self.C = grid.curl_e_matrix()
        self.Cb = curl_b_matrix(grid)
        kappa = self.bops.kappa
        pinned = self.bops.pinned
        if grid.colocated:
            K = (dt * dt / 2) * D.copy()
            kn = grid.to_nodes(kappa)
            pn = grid.to_nodes(pinned.astype(float)) > 0.5
            idx = np.arange(3)
            K[:, idx, idx] += 2.0 + dt * kn
            # pinned components: identity row and column
            K = np.where(pn[:, :, None] | pn[:, None, :], 0.0, K)
            K[:, idx, idx] = np.where(pn, 1.0, K[:, idx, idx])
            self.Kinv = np.linalg.inv(K)
        else:
            self.P = grid.to_nodes_matrix()
            self.Pt = from_nodes_matrix(grid)
            PDP = self.Pt @ sp.block_diag(list(D), format="csr") @ self.P
            self.free = ~pinned
            f = self.free
            self.Kd = (2.0 + dt * kappa)[f]
            self.Koff = ((dt * dt / 2) * PDP).tocsr()[f][:, f]
            self.contraction = float(np.max(abs(self.Koff).sum(axis=1).A1 / self.Kd)) if f.any() else 0.0
            self._lu = None

    def _lu_solve(self, r: NDArray) -> NDArray:
        if self._lu is None:
            K = (sp.diags(self.Kd) + self.Koff).tocsc()
            self._lu = spla.splu(K)
        return self._lu.solve(r)

    def _to_nodes(self, X: NDArray) -> NDArray:
        if self.grid.colocated:
            return self.grid.to_nodes(X)
        return (self.P @ X).reshape(-1, 3)

    def _from_nodes(self, V: NDArray) -> NDArray:
        if self.grid.colocated:
            return self.grid.from_nodes(V)
        return self.Pt @ V.ravel()

    def _solve_mid(self, r: NDArray) -> tuple[NDArray, int]:
        g = self.grid
        pinned = self.bops.pinned
        if g.colocated:
            X = g.from_nodes(np.einsum("nij,nj->ni", self.Kinv, g.to_nodes(r)))
            return np.where(pinned, 0.0, X), 1
        b = r[self.free]
        x, its = b / self.Kd, 0
        if self.contraction < _JACOBI_MAX_CONTRACTION:
            tol = _EPS * np.max(np.abs(x), initial=0.0)
            while its < _JACOBI_MAX_SWEEPS:
                its += 1
                x_new = (b - self.Koff @ x) / self.Kd
                change = np.max(np.abs(x_new - x), initial=0.0)
                x = x_new
                if change <= tol:
                    break
            else:
                x, its = self._lu_solve(b), its + 1
        else:
            x, its = self._lu_solve(b), 1
        X = np.zeros_like(r)
        X[self.free] = x
        return X, its

    def step(self, U: StateVector) -> tuple[StateVector, StepInfo]:
        m, dt = self.medium, self.dt
        eps0, c = m.eps0, m.c
        bops = self.bops
        t0, t1 = U.t, U.t + dt
        Bh = U.B - (dt / 2) * (self.C @ U.E)
        S = [np.einsum("nij,nj->ni", R, J) for R, J in zip(self.R, U.J)]
        if bops.bc.forcing.is_zero() or not bops.sm_parts:
            sbar = np.zeros(self.grid.n_e)
        else:
            sbar = 0.5 * (bops.source(t0) + bops.source(t1))
        # solve for the increment Y = Eb - E^n so round-off scales with |Y|
        DPE = np.einsum("nij,nj->ni", self.D, self._to_nodes(U.E))
        r = (dt * c * c * (self.Cb @ Bh) - (dt / eps0) * self._from_nodes(sum(S)) + dt * sbar
             - dt * bops.kappa * U.E - (dt * dt / 2) * self._from_nodes(DPE))
        r[bops.pinned] = 0.0
        Y, its = self._solve_mid(r)
        X = U.E + Y
        PX = self._to_nodes(X)
        Jmid = tuple(s + np.einsum("nij,nj->ni", C, PX) for s, C in zip(S, self.couple))
        J1 = tuple(2.0 * jm - j for jm, j in zip(Jmid, U.J))
        # E, B and rho are accumulated with compensated sums so that the
        # constraint residuals do not random-walk over long runs; the carry
        # persists only while the stepper is fed its own output
        carry = self._carry if U is self._last else {}
        new_carry = {}
        E1, new_carry["E"] = _two_sum(U.E, 2.0 * Y, carry.get("E"))
        # B' - dt/2 curl E1 = B - dt curl Eb, one curl per step
        B1, new_carry["B"] = _two_sum(U.B, -dt * (self.C @ X), carry.get("B"))
        rho = None
        if U.rho is not None:
            rho = []
            for k, (r_, jm) in enumerate(zip(U.rho, Jmid)):
                rk, new_carry[k] = _two_sum(r_, -dt * self.grid.div_e(self._from_nodes(jm)), carry.get(k))
                rho.append(rk)
            rho = tuple(rho)
        out = StateVector(J1, E1, B1, t1, rho)
        self._last, self._carry = out, new_carry
        return out, StepInfo(X, Jmid, sbar, its)


# ---------------------------------------------------------------------------
# driver


TRACE_COLUMNS = ("t", "E_total", "E_J1", "E_J2", "E_E", "E_B", "dissipation_vol",
                 "dissipation_bdry", "residual_balance", "divB_max", "gauss_max")


@dataclass
class RunTrace:
    """Per-step diagnostics of one run (row 0 is the initial state)."""

    dt: float
    columns: dict[str, NDArray]
    scheme_energy: NDArray
    final: StateVector
    cadence: int = 1
    snapshots: list[str] = field(default_factory=list)
    iterations: NDArray | None = None

    @property
    def t(self) -> NDArray:
        return self.columns["t"]

    @property
    def energy(self) -> NDArray:
        return self.columns["E_total"]

    def norm_x(self) -> NDArray:
        return np.sqrt(2.0 * np.maximum(self.columns["E_total"], 0.0))

    def rows(self):
        n = len(self.columns["t"])
        keep = list(range(0, n, self.cadence))
        if keep[-1] != n - 1:
            keep.append(n - 1)
        for i in keep:
            yield [self.columns[k][i] for k in TRACE_COLUMNS]


def run(medium, bc: BoundarySpec, state0: StateVector, dt: float, n_steps: int, *,
        cadence: int = 1, snapshot_dir: str | None = None, snapshot_every: int = 0,
        callback: Callable[[int, StateVector, StepInfo], None] | None = None,
        diagnostics: bool = True) -> RunTrace:
    """March ``n_steps`` steps and record the diagnostics ledger every step.

    Deterministic: all reductions are fixed-order numpy sums.
    """
    from .. import diagnostics as dg
    from .snapshot import write_snapshot

    grid = medium.grid
    state0.check(grid)
    stepper = Stepper(medium, bc, dt)
    U = state0.copy()
    U.E = np.where(stepper.bops.pinned, 0.0, U.E)
    ns = len(U.J)
    cols = {k: np.zeros(n_steps + 1) for k in TRACE_COLUMNS}
    scheme = np.zeros(n_steps + 1)
    iters = np.zeros(n_steps + 1, dtype=int)
    snaps: list[str] = []

    def record(i, state, info, prev_total):
        rep = dg.energy(state, medium)
        cols["t"][i] = state.t
        cols["E_total"][i] = rep.total
        cols["E_J1"][i] = rep.kinetic[0] if ns > 0 else 0.0
        cols["E_J2"][i] = rep.kinetic[1] if ns > 1 else 0.0
        cols["E_E"][i] = rep.electric
        cols["E_B"][i] = rep.magnetic
        scheme[i] = rep.total - dg.leapfrog_correction(state, medium, dt)
        if info is not None:
            vol, bd = dg.step_dissipation(info, medium, stepper.bops)
            cols["dissipation_vol"][i] = vol
            cols["dissipation_bdry"][i] = bd
            cols["residual_balance"][i] = (rep.total - prev_total) / dt + vol + bd
        cr = dg.constraint_residuals(state, medium, bc)
        cols["divB_max"][i] = cr["divB_max"]
        cols["gauss_max"][i] = cr["gauss_max"]
        return rep.total

    prev = record(0, U, None, 0.0) if diagnostics else 0.0
    if snapshot_dir and snapshot_every:
        snaps.append(write_snapshot(U, grid, snapshot_dir, 0))
    for n in range(1, n_steps + 1):
        U, info = stepper.step(U)
        iters[n] = info.iterations
        if diagnostics:
            prev = record(n, U, info, prev)
        else:
            cols["t"][n] = U.t
        if callback is not None:
            callback(n, U, info)
        if snapshot_dir and snapshot_every and n % snapshot_every == 0:
            snaps.append(write_snapshot(U, grid, snapshot_dir, n))
    return RunTrace(dt, cols, scheme, U, max(1, int(cadence)), snaps, iters)
