"""Discrete resolvent solves by elimination to one curl-curl system in E.

For (I + lam A_h) U = F the currents and B are eliminated pointwise::

    U_s = (I + lam M_s)^-1 (F_s + lam eps0 wp_s^2 P U_E)
    U_B = F_B - lam curl_e U_E

leaving a coercive, W_e-self-adjoint (when Omega_c = 0) system

    U_E + lam^2 c^2 curl_b curl_e U_E + lam^2 P* D_lam P U_E + lam kappa U_E
        = F_E + lam c^2 curl_b F_B - (lam/eps0) P* sum_s (I + lam M_s)^-1 F_s.

For (z I + A_h) U = F with z = -i omega the same elimination gives

    z U_E + (c^2/z) curl_b curl_e U_E + P* D_z P U_E + kappa U_E
        = F_E + (c^2/z) curl_b F_B - (1/eps0) P* sum_s (z I + M_s)^-1 F_s,

solved with restarted GMRES and a Jacobi (block 3x3 on the slab)
preconditioner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .errors import IterativeSolveFailure, NearSingularShift, NonAdmissibleLambda
from .fdtd_core.assembly import assemble_generator
from .fdtd_core.boundary import BoundaryOperator
from .fdtd_core.grid import curl_b_matrix, from_nodes_matrix
from .fdtd_core.state import StateVector, x_weights
from .fdtd_core.stepper import apply_generator
from .stix_algebra import assemble_M, inv_shift, resolvent_M


@dataclass
class SolveStats:
    method: str
    iterations: int
    residual: float  # relative, energy norm, full system


def _xnorm(v: NDArray, w: NDArray) -> float:
    return float(np.sqrt(np.sum(w * np.abs(v) ** 2)))


def shifted_residual(U: StateVector, F: StateVector, z: complex, scale: complex, medium, bops) -> float:
    """||scale*(z U + A_h U) - F||_X / ||F||_X."""
    AU = apply_generator(U, medium, bops)
    R = U.combine(scale * z, AU, scale).combine(1.0, F, -1.0)
    R.E = np.where(bops.pinned, 0.0, R.E)
    w = x_weights(medium.grid, medium)
    nF = _xnorm(F.to_vector(), w)
    return _xnorm(R.to_vector(), w) / (nF if nF > 0 else 1.0)


def forward_apply(V: StateVector, lam: float, medium, bc) -> StateVector:
    """(I + lam A_h) V."""
    bops = BoundaryOperator(medium.grid, bc, medium.c)
    out = V.combine(1.0, apply_generator(V, medium, bops), lam)
    out.E = np.where(bops.pinned, 0.0, out.E)
    return out


def _counter():
    box = {"n": 0}

    def cb(_):
        box["n"] += 1
    return box, cb


def resolvent_step(F: StateVector, lam: float, medium, bc, *, tol: float = 1e-12,
                   max_neumann: bool = False, x0: NDArray | None = None):
    """Solve (I + lam A_h) U = F.  Returns (U, SolveStats).

    ``max_neumann`` additionally rejects lam with lam * max|M_s| >= 1.
    """
    if not (np.isfinite(lam) and lam > 0):
        raise NonAdmissibleLambda(f"lambda must be finite and positive, got {lam!r}")
    g = medium.grid
    b = medium.bounds
    if max_neumann and b is not None and lam * (b.nu_star + b.Omega_star) >= 1.0:
        raise NonAdmissibleLambda("lambda * (nu* + Omega*) >= 1")
    bops = BoundaryOperator(g, bc, medium.c)
    eps0, c = medium.eps0, medium.c
    Rs = [resolvent_M(lam, nu, Om, medium.b) for nu, Om in zip(medium.nu, medium.Omega_c)]
    D = sum((wp**2)[:, None, None] * R for wp, R in zip(medium.omega_p, Rs))
    RF = [np.einsum("nij,nj->ni", R, f) for R, f in zip(Rs, F.J)]
    rhs = F.E + lam * c * c * g.curl_b(F.B) - (lam / eps0) * g.from_nodes(sum(RF))
    free = bops.free
    we = g.w_e[free]
    l2 = lam * lam

    def op(u):
        x = np.zeros(g.n_e, dtype=u.dtype)
        x[free] = u
        y = (x + l2 * c * c * g.curl_b(g.curl_e(x))
             + l2 * g.from_nodes(np.einsum("nij,nj->ni", D, g.to_nodes(x))) + lam * bops.kappa * x)
        return y[free]

    n = int(free.sum())
    symmetric = all(np.all(Om == 0) for Om in medium.Omega_c)
    box, cb = _counter()
    diag = 1.0 + lam * bops.kappa[free] + l2 * c * c * 4.0 / min(g.spacing) ** 2
    if symmetric:
        # W_e-weighted form is symmetric positive definite: use CG
        A = spla.LinearOperator((n, n), matvec=lambda u: we * op(u), dtype=float)
        Mp = spla.LinearOperator((n, n), matvec=lambda r: r / (we * diag), dtype=float)
        sol, info = spla.cg(A, we * rhs[free], x0=x0, rtol=tol, atol=0.0, maxiter=10 * n, M=Mp,
                            callback=cb)
        method = "cg"
    else:
        A = spla.LinearOperator((n, n), matvec=op, dtype=float)
        Mp = spla.LinearOperator((n, n), matvec=lambda r: r / diag, dtype=float)
        sol, info = spla.gmres(A, rhs[free], x0=x0, rtol=tol, atol=0.0, restart=min(n, 200),
                               maxiter=max(1, 10 * n // min(n, 200)), M=Mp, callback=cb,
                               callback_type="pr_norm")
        method = "gmres"
    UE = np.zeros(g.n_e)
    UE[free] = sol
    PU = g.to_nodes(UE)
    J = tuple(np.einsum("nij,nj->ni", R, f + lam * eps0 * (wp**2)[:, None] * PU)
              for R, f, wp in zip(Rs, F.J, medium.omega_p))
    U = StateVector(J, UE, F.B - lam * g.curl_e(UE), F.t)
    res = shifted_residual(U, F, 1.0 / lam, lam, medium, bops)
    if info != 0:
        raise IterativeSolveFailure(f"{method} stopped after {box['n']} iterations", res)
    return U, SolveStats(method, box["n"], res)


def _shift_inverses(z: complex, medium):
    return [inv_shift(z, nu, Om, medium.b) for nu, Om in zip(medium.nu, medium.Omega_c)]


def direct_solve(F: StateVector, medium, bc, *, z: complex, scale: complex = 1.0):
    """Monolithic sparse LU of scale * (z I + A_h) on the free unknowns."""
    bops = BoundaryOperator(medium.grid, bc, medium.c)
    A, free = assemble_generator(medium, bc, bops)
    n = A.shape[0]
    K = (scale * (z * sp.identity(n) + A)).tocsc()[free][:, free]
    rhs = F.to_vector()[free]
    dtype = np.result_type(K.dtype, rhs.dtype)
    try:
        lu = spla.splu(K.astype(dtype).tocsc())
        sol = lu.solve(rhs.astype(dtype))
    except RuntimeError as exc:  # exactly singular factorisation
        raise NearSingularShift(f"monolithic factorisation failed: {exc}") from exc
    v = np.zeros(n, dtype=dtype)
    v[free] = sol
    U = StateVector.from_vector(v, medium.grid, medium.n_species, F.t)
    res = shifted_residual(U, F, z, scale, medium, bops)
    if not np.isfinite(res) or res > 1e-6:
        raise NearSingularShift(f"monolithic solve residual {res:.3e}: shift is (near) an eigenvalue")
    return U, SolveStats("splu", 1, res)


def _reduced_diagonal(z, D, medium, bops, free):
    g = medium.grid
    c = medium.c
    C = g.curl_e_matrix()
    cc = np.asarray((curl_b_matrix(g).multiply(C.T)).sum(axis=1)).ravel()
    P = g.to_nodes_matrix()
    PDP = from_nodes_matrix(g) @ sp.block_diag(list(D), format="csr") @ P
    return (z + bops.kappa + (c * c / z) * cc + PDP.diagonal())[free], PDP


def shifted_solve(omega: float, F: StateVector, medium, bc, *, tol: float = 1e-12,
                  x0: NDArray | None = None, method: str = "gmres"):
    """Solve (-i omega I + A_h) U = F.  Returns (complex U, SolveStats).

    omega = 0 on an all-PEC domain is refused: 0 is an eigenvalue of A_h
    (curl-free magnetic fields).  With absorbing faces it is handled by a
    monolithic factorisation.
    """
    g = medium.grid
    bops = BoundaryOperator(g, bc, medium.c)
    if omega == 0.0:
        if not bops.sm_parts:
            raise NearSingularShift("omega = 0 with PEC walls only: curl-free B fields span the kernel")
        return direct_solve(F, medium, bc, z=0.0)
    if method == "direct":
        return direct_solve(F, medium, bc, z=-1j * omega)
    z = -1j * float(omega)
    eps0, c = medium.eps0, medium.c
    Rs = _shift_inverses(z, medium)
    D = sum((wp**2)[:, None, None] * R for wp, R in zip(medium.omega_p, Rs))
    FJ = [np.asarray(f, dtype=complex) for f in F.J]
    RF = [np.einsum("nij,nj->ni", R, f) for R, f in zip(Rs, FJ)]
    rhs = F.E + (c * c / z) * g.curl_b(F.B) - (1.0 / eps0) * g.from_nodes(sum(RF))
    free = bops.free
    n = int(free.sum())

    def op(u):
        x = np.zeros(g.n_e, dtype=complex)
        x[free] = u
        y = (z * x + (c * c / z) * g.curl_b(g.curl_e(x))
             + g.from_nodes(np.einsum("nij,nj->ni", D, g.to_nodes(x))) + bops.kappa * x)
        return y[free]

    diag, PDP = _reduced_diagonal(z, D, medium, bops, free)
    if g.colocated:
        # 3x3 block Jacobi: couplings inside a node come only from D
        blocks = D.astype(complex).copy()
        full = np.zeros(g.n_e, dtype=complex)
        full[free] = diag - PDP.diagonal()[free]
        dn = g.to_nodes(full)
        idx = np.arange(3)
        blocks[:, idx, idx] += dn
        pn = g.to_nodes(bops.pinned.astype(float)) > 0.5
        blocks = np.where(pn[:, :, None] | pn[:, None, :], 0.0, blocks)
        blocks[:, idx, idx] = np.where(pn, 1.0, blocks[:, idx, idx])
        binv = np.linalg.inv(blocks)

        def prec(r):
            x = np.zeros(g.n_e, dtype=complex)
            x[free] = r
            return g.from_nodes(np.einsum("nij,nj->ni", binv, g.to_nodes(x)))[free]
    else:
        def prec(r):
            return r / diag
    A = spla.LinearOperator((n, n), matvec=op, dtype=complex)
    Mp = spla.LinearOperator((n, n), matvec=prec, dtype=complex)
    restart = min(n, 300)
    box, cb = _counter()
    sol, info = spla.gmres(A, rhs[free].astype(complex), x0=x0, rtol=tol, atol=0.0, restart=restart,
                           maxiter=max(1, 10 * n // restart), M=Mp, callback=cb, callback_type="pr_norm")
    UE = np.zeros(g.n_e, dtype=complex)
    UE[free] = sol
    PU = g.to_nodes(UE)
    J = tuple(np.einsum("nij,nj->ni", R, f + eps0 * (wp**2)[:, None] * PU)
              for R, f, wp in zip(Rs, FJ, medium.omega_p))
    U = StateVector(J, UE, (F.B - g.curl_e(UE)) / z, F.t)
    res = shifted_residual(U, F, z, 1.0, medium, bops)
    if info != 0 or res > 1e-9:
        smin = _smallest_singular_estimate(z, medium, bc)
        if smin < 1e-10:
            raise NearSingularShift(f"GMRES stagnated (residual {res:.2e}); sigma_min ~ {smin:.2e}")
        raise IterativeSolveFailure(f"GMRES stopped after {box['n']} iterations", res)
    return U, SolveStats("gmres", box["n"], res)


def _smallest_singular_estimate(z: complex, medium, bc, iters: int = 30) -> float:
    """Relative sigma_min of z I + A_h (energy-orthonormal coordinates) by
    inverse iteration on the normal equations."""
    A, free = assemble_generator(medium, bc)
    w = x_weights(medium.grid, medium)[free]
    s = np.sqrt(w)
    K = sp.diags(s) @ (z * sp.identity(A.shape[0]) + A).tocsc()[free][:, free] @ sp.diags(1 / s)
    K = K.tocsc().astype(complex)
    try:
        lu = spla.splu(K)
    except RuntimeError:
        return 0.0
    x = np.random.default_rng(0).standard_normal(K.shape[0]).astype(complex)
    x /= np.linalg.norm(x)
    sig = np.inf
    for _ in range(iters):
        y = lu.solve(lu.solve(x), trans="H")
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0:
            return 0.0
        sig = 1.0 / np.sqrt(ny)
        x = y / ny
    scale = spla.norm(K, 1)
    return float(sig / max(scale, 1e-300))


def coercive_form(w: NDArray, v: NDArray, lam: float, medium, bc) -> complex:
    """a~(w, v) = (w|v) + lam^2 c^2 (curl w|curl v) + lam^2 (D_lam P w|P v)
    + lam c (w_t|v_t) on the absorbing faces (weighted inner products)."""
    g = medium.grid
    c = medium.c
    bops = BoundaryOperator(g, bc, c)
    Rs = [resolvent_M(lam, nu, Om, medium.b) for nu, Om in zip(medium.nu, medium.Omega_c)]
    D = sum((wp**2)[:, None, None] * R for wp, R in zip(medium.omega_p, Rs))
    Pw, Pv = g.to_nodes(w), g.to_nodes(v)
    return complex(np.sum(g.w_e * w * np.conj(v))
                   + lam * lam * c * c * np.sum(g.w_b * g.curl_e(w) * np.conj(g.curl_e(v)))
                   + lam * lam * np.sum(g.w_n[:, None] * np.einsum("nij,nj->ni", D, Pw) * np.conj(Pv))
                   + lam * np.sum(g.w_e * bops.kappa * w * np.conj(v)))


def species_matrix_field(medium, s: int) -> NDArray:
    return assemble_M(medium.nu[s], medium.Omega_c[s], medium.b)
