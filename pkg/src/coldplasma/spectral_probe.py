"""Spectrum and resolvent norms of the discrete generator on a 1-D slab.

All linear algebra is done in energy-orthonormal coordinates
A_hat = W^{1/2} A_h W^{-1/2}, where W holds the diagonal X-norm weights, so
plain Euclidean norms and singular values are the X-norm quantities.
Pinned (PEC) edges are removed from the unknowns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .diagnostics import write_csv
from .errors import ConvergenceFailure, EigensolveFailure, ShapeMismatch
from .fdtd_core.assembly import assemble_generator
from .fdtd_core.boundary import BoundaryOperator, BoundarySpec
from .fdtd_core.grid import Slab
from .fdtd_core.state import StateVector, x_weights
from .medium import MediumFields, MediumSpec, sample_medium
from .stix_algebra import inv_shift

DENSE_SVD_MAX = 600


@dataclass
class SlabOperator:
    """A_h on the free unknowns, in X-orthonormal coordinates."""

    grid: object
    medium: object
    bc: BoundarySpec
    A: sp.csr_matrix            # raw A_h restricted to free unknowns
    A_hat: sp.csr_matrix        # W^{1/2} A W^{-1/2}
    free: NDArray
    sqrt_w: NDArray             # on free unknowns
    layout: dict[str, slice] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def dense(self) -> NDArray:
        return self.A_hat.toarray()

    def norm(self) -> float:
        return float(spla.norm(self.A_hat, 1))

    def block_masks(self) -> dict[str, NDArray]:
        """Masks over the free unknowns for the J, E and B families."""
        out = {}
        for k, sl in self.layout.items():
            m = np.zeros(self.free.size, dtype=bool)
            m[sl] = True
            out[k] = m[self.free]
        return out

    def to_state(self, y: NDArray) -> StateVector:
        """Map an X-orthonormal coordinate vector back to a state."""
        v = np.zeros(self.free.size, dtype=y.dtype)
        v[self.free] = y / self.sqrt_w
        return StateVector.from_vector(v, self.grid, self.medium.n_species)

    def from_state(self, U: StateVector) -> NDArray:
        return U.to_vector()[self.free] * self.sqrt_w


def assemble_slab(medium, bc: BoundarySpec, n: int | None = None, *, length: float = 1.0) -> SlabOperator:
    """Sparse A_h for a plasma slab.

    ``medium`` is either sampled fields on a Slab, or a MediumSpec sampled
    on ``Slab(length, n)``.
    """
    if isinstance(medium, MediumSpec):
        if n is None:
            raise ShapeMismatch("a MediumSpec needs the node count n")
        medium = sample_medium(medium, Slab(length, n))
    if not isinstance(medium, MediumFields) or medium.grid.kind != "slab":
        raise ShapeMismatch("assemble_slab expects a medium sampled on a Slab")
    g = medium.grid
    if n is not None and n != g.n:
        raise ShapeMismatch(f"n={n} does not match the medium grid (n={g.n})")
    if g.n < 4:
        raise ShapeMismatch("the slab needs at least 4 cells")
    return assemble_operator(medium, bc)


def assemble_operator(medium, bc: BoundarySpec) -> SlabOperator:
    """Same as assemble_slab for any grid (tiny boxes included)."""
    g = medium.grid
    A, free = assemble_generator(medium, bc)
    w = x_weights(g, medium)
    if np.any(w[free] <= 0):
        raise ShapeMismatch("every species needs omega_p > 0 for the energy weights")
    s = np.sqrt(w[free])
    Af = A[free][:, free].tocsr()
    Ahat = (sp.diags(s) @ Af @ sp.diags(1.0 / s)).tocsr()
    nj = 3 * g.n_nodes
    layout = {f"J{k + 1}": slice(k * nj, (k + 1) * nj) for k in range(medium.n_species)}
    o = nj * medium.n_species
    layout["E"] = slice(o, o + g.n_e)
    layout["B"] = slice(o + g.n_e, o + g.n_e + g.n_b)
    return SlabOperator(g, medium, bc, Af, Ahat, free, s, layout)


# ---------------------------------------------------------------------------
# tilde space


def kernel_basis(op: SlabOperator, tol: float = 1e-10) -> NDArray:
    """X-orthonormal basis of the constant transverse-B fields lying in ker A_h.

    On a slab closed by PEC at both ends these are the two uniform B
    components (the curl-free magnetic fields); with an absorbing end the
    list is empty.
    """
    g = op.grid
    nb = g.n_b
    cols = []
    for parts in _uniform_b_fields(g):
        B = g.join(parts) if nb else np.zeros(0)
        U = StateVector.zeros(g, op.medium.n_species)
        U.B = B
        y = op.from_state(U)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            continue
        y = y / nrm
        if np.linalg.norm(op.A_hat @ y) <= tol * max(op.norm(), 1.0):
            cols.append(y)
    if not cols:
        return np.zeros((op.dim, 0))
    Q, _ = np.linalg.qr(np.stack(cols, axis=1))
    return Q


def _uniform_b_fields(g):
    parts = g.split_b(np.zeros(g.n_b))
    for k in range(len(parts)):
        yield [np.ones_like(p) if j == k else np.zeros_like(p) for j, p in enumerate(parts)]


def tilde_basis(op: SlabOperator) -> NDArray:
    """Orthonormal basis of the complement of ``kernel_basis`` (dense)."""
    K = kernel_basis(op)
    if K.shape[1] == 0:
        return np.eye(op.dim)
    return sla.null_space(K.T)


# ---------------------------------------------------------------------------
# spectrum


@dataclass
class SpectrumReport:
    eigenvalues: NDArray
    near_axis: NDArray
    labels: list[str]
    counts: dict[str, int]
    norm: float
    min_re: float
    min_re_nonkernel: float

    def to_dict(self) -> dict:
        return {"counts": self.counts, "norm": self.norm, "min_re": self.min_re,
                "min_re_nonkernel": self.min_re_nonkernel, "n_eigenvalues": int(self.eigenvalues.size)}


def spectrum_near_axis(op: SlabOperator, re_window: tuple[float, float] | None = None,
                       im_window: tuple[float, float] | None = None, *, tol: float = 1e-10,
                       restrict: NDArray | None = None, kernel_tol: float = 1e-8) -> SpectrumReport:
    """Dense eigen-decomposition, classifying eigenvalues with |Re| <= tol.

    kernel-mode: the eigenvector has E and J parts below ``kernel_tol`` of
    its norm (a curl-free B field); suspicious: anything else on the axis;
    damped: Re > tol.  ``restrict`` is an orthonormal basis to restrict to
    (e.g. ``tilde_basis(op)``).  Windows filter the reported near-axis set.
    """
    if op.dim > 20000:
        raise EigensolveFailure("dense eigensolve limited to dimension 2e4")
    Ad = op.dense()
    if restrict is not None:
        Ad = restrict.T @ Ad @ restrict
    try:
        lam, V = sla.eig(Ad, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise EigensolveFailure(str(exc)) from exc
    if restrict is not None:
        V = restrict @ V
    masks = op.block_masks()
    ej = np.zeros(op.dim, dtype=bool)
    for k, m in masks.items():
        if k != "B":
            ej |= m
    sel = np.abs(lam.real) <= tol
    if re_window is not None:
        sel &= (lam.real >= re_window[0]) & (lam.real <= re_window[1])
    if im_window is not None:
        sel &= (lam.imag >= im_window[0]) & (lam.imag <= im_window[1])
    labels = []
    kernel_all = np.zeros(lam.size, dtype=bool)
    for i in range(lam.size):
        if abs(lam[i].real) > tol:
            continue
        v = V[:, i]
        frac = np.linalg.norm(v[ej]) / max(np.linalg.norm(v), 1e-300)
        kernel_all[i] = frac < kernel_tol and abs(lam[i]) <= max(tol, 1e-8)
    for i in np.flatnonzero(sel):
        labels.append("kernel-mode" if kernel_all[i] else "suspicious")
    counts = {"kernel-mode": labels.count("kernel-mode"), "suspicious": labels.count("suspicious"),
              "damped": int(np.sum(lam.real > tol))}
    nk = lam[~kernel_all]
    return SpectrumReport(lam, lam[sel], labels, counts, op.norm(), float(lam.real.min()),
                          float(nk.real.min()) if nk.size else float("nan"))


def spectral_abscissa(op: SlabOperator | NDArray, band: float | None = None) -> float:
    """s(-A_h) = max Re(-lambda) over eigenvalues with |Im lambda| <= band.

    ``band=None`` takes the whole discrete spectrum.  A finite band keeps
    the resolved part of the spectrum and leaves out lattice modes near
    the grid Nyquist frequency.  Accepts precomputed eigenvalues.
    """
    lam = op if isinstance(op, np.ndarray) else sla.eigvals(op.dense())
    if band is not None:
        lam = lam[np.abs(lam.imag) <= band]
    return float(np.max(-lam.real))


def imaginary_pairs(lam: NDArray, tol: float = 1e-10, min_freq: float = 1e-8) -> int:
    """Number of conjugate pairs +-i w (w > min_freq) with |Re| < tol."""
    on = lam[(np.abs(lam.real) < tol) & (lam.imag > min_freq)]
    return int(on.size)


# ---------------------------------------------------------------------------
# resolvent norms


@dataclass
class ResolventCurve:
    betas: NDArray
    sigma_min: NDArray
    norms: NDArray
    envelope_slope: float = float("nan")
    envelope_window: tuple[float, float] | None = None
    sup: float = float("nan")
    method: str = ""

    def sup_on(self, lo: float, hi: float) -> float:
        m = (self.betas >= lo) & (self.betas <= hi)
        return float(self.norms[m].max())

    def median_on(self, lo: float, hi: float) -> float:
        m = (self.betas >= lo) & (self.betas <= hi)
        return float(np.median(self.norms[m]))

    def write_csv(self, path: str) -> None:
        write_csv(zip(self.betas, self.sigma_min, self.norms), ["beta", "sigma_min", "resolvent_norm"], path)

    def summary(self, spectrum: SpectrumReport | None = None) -> dict:
        d = {"tail_slope": self.envelope_slope, "sup": self.sup, "method": self.method,
             "window": list(self.envelope_window) if self.envelope_window else None,
             "n_betas": int(self.betas.size)}
        if spectrum is not None:
            d["eigenvalue_classification"] = spectrum.counts
        return d

    def write_json(self, path: str, spectrum: SpectrumReport | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(spectrum), fh, indent=2, sort_keys=True)


def _sigma_min_dense(K: NDArray) -> float:
    return float(sla.svdvals(K, check_finite=False)[-1])


def _sigma_min_sparse(K: sp.csc_matrix, seed: int = 0) -> float:
    """Smallest singular value via Lanczos on (K^H K)^{-1} applied with one LU."""
    try:
        lu = spla.splu(K.tocsc())
    except RuntimeError:
        return 0.0
    n = K.shape[0]
    # (K^H K)^{-1} x = K^{-1} K^{-H} x
    Op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(lu.solve(x.astype(complex)), trans="H"),
                             dtype=complex)
    v0 = np.random.default_rng(seed).standard_normal(n).astype(complex)
    try:
        val = spla.eigsh(Op, k=1, which="LM", v0=v0, tol=1e-10, maxiter=5000,
                         return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceFailure(f"singular-value iteration did not converge: {exc}") from exc
    lam_max = float(np.real(val[0]))
    if not np.isfinite(lam_max) or lam_max <= 0:
        return 0.0
    return 1.0 / np.sqrt(lam_max)


def _dedupe_betas(betas, eig_freqs: NDArray | None) -> NDArray:
    b = np.unique(np.asarray(betas, dtype=float))
    if eig_freqs is not None and eig_freqs.size:
        hit = np.min(np.abs(b[:, None] - eig_freqs[None, :]), axis=1) == 0.0
        b = b + np.where(hit, 1e-9, 0.0)
    return np.unique(b)


def resolvent_curve(op: SlabOperator, betas, projector: NDArray | None = None, *,
                    envelope_window: tuple[float, float] | None = None, n_bins: int = 12,
                    dense_max: int = DENSE_SVD_MAX, eig_freqs: NDArray | None = None) -> ResolventCurve:
    """||(i beta + A_h)^{-1}||_X = 1 / sigma_min(i beta + A_hat) on every beta.

    ``projector``: X-orthonormal columns spanning the directions to remove
    (``kernel_basis(op)``); the norm is then taken on their orthogonal
    complement.  Dimensions up to ``dense_max`` use a dense SVD (on the
    compressed operator), larger ones a sparse LU with Lanczos iteration,
    where the removed directions are deflated by a large shift.
    ``eig_freqs``: eigenvalue frequencies; coinciding betas move by 1e-9.
    """
    b = _dedupe_betas(betas, eig_freqs)
    sig = np.zeros(b.size)
    K = None if projector is None or projector.shape[1] == 0 else projector
    if K is not None:
        leak = np.linalg.norm(op.A_hat.T @ K) + np.linalg.norm(op.A_hat @ K)
        if leak > 1e-8 * max(op.norm(), 1.0):
            raise ConvergenceFailure("projector columns are not invariant under A_h; cannot deflate")
    if op.dim <= dense_max:
        Ad = op.dense()
        if K is not None:
            Q = sla.null_space(K.T)
            Ad = Q.T @ Ad @ Q
        eye = np.eye(Ad.shape[0])
        for i, beta in enumerate(b):
            sig[i] = _sigma_min_dense(1j * beta * eye + Ad)
        method = "dense"
    else:
        I = sp.identity(op.dim, format="csc", dtype=complex)
        Ah = op.A_hat.astype(complex).tocsc()
        if K is not None:
            shift = 2.0 * op.norm() + float(np.max(np.abs(b)))
            Ah = (Ah + shift * sp.csc_matrix(K @ K.T)).tocsc()
        for i, beta in enumerate(b):
            sig[i] = _sigma_min_sparse(1j * beta * I + Ah)
        method = "sparse-lanczos"
    with np.errstate(divide="ignore"):
        norms = np.where(sig > 0, 1.0 / np.maximum(sig, 1e-300), np.inf)
    curve = ResolventCurve(b, sig, norms, sup=float(np.max(norms)), method=method)
    if envelope_window is not None:
        curve.envelope_slope = envelope_slope(curve, envelope_window, n_bins)
        curve.envelope_window = tuple(envelope_window)
    return curve


def envelope_slope(curve: ResolventCurve, window: tuple[float, float], n_bins: int = 12) -> float:
    """Log-log slope of the upper envelope on ``window``.

    The envelope is formed by the local maxima of the sampled curve (the
    resolvent peaks); the largest peak in each log-spaced bin enters the
    least-squares fit.  Bins without a peak are skipped, so sample points
    that merely sit between two resonances do not drag the fit down.
    """
    lo, hi = window
    b, r = curve.betas, curve.norms
    ok = np.isfinite(r)
    inner = np.zeros(b.size, dtype=bool)
    if b.size >= 3:
        inner[1:-1] = (r[1:-1] >= r[:-2]) & (r[1:-1] >= r[2:])
    peaks = inner & ok & (b >= lo) & (b <= hi)
    if peaks.sum() < 3:
        peaks = ok & (b >= lo) & (b <= hi)
    edges = np.geomspace(lo, hi, n_bins + 1)
    xs, ys = [], []
    for a, c in zip(edges[:-1], edges[1:]):
        m = peaks & (b >= a) & (b <= c)
        if m.any():
            j = np.argmax(np.where(m, r, -np.inf))
            xs.append(np.log(b[j]))
            ys.append(np.log(r[j]))
    if len(xs) < 3:
        return float("nan")
    return float(np.polyfit(xs, ys, 1)[0])


def probe_betas(spectrum: SpectrumReport | None, lo: float, hi: float, n_uniform: int = 200) -> NDArray:
    """Uniform grid plus the frequencies of eigenvalues (resolvent peaks)."""
    b = [np.linspace(lo, hi, n_uniform)]
    if spectrum is not None:
        f = -spectrum.eigenvalues.imag
        b.append(f[(f >= lo) & (f <= hi)])
        b.append(-f[(-f >= lo) & (-f <= hi)])
    return np.unique(np.concatenate(b))


# ---------------------------------------------------------------------------
# quasimodes


@dataclass
class Quasimode:
    k: int
    frequency: float
    residual: float     # ||(i w + A_h) U|| / ||U||, X-norm
    norm: float


def cavity_quasimodes(op: SlabOperator, n_modes: int = 5) -> list[Quasimode]:
    """Quasimodes built from the vacuum cavity modes of a PEC slab.

    For the k-th discrete mode E_y = sin(k pi x/L) with frequency w_k the
    state U = (J_s, E, B) with B = i curl_e E / w_k and
    J_s = (i w_k + M_s)^{-1} eps0 wp_s^2 P E solves every row of
    (i w_k + A_h) U = r except the plasma feedback on E, so
    ||r|| ~ wp^2 / w_k -> 0 while ||U|| stays of unit size.
    """
    g, m = op.grid, op.medium
    if g.kind != "slab":
        raise ShapeMismatch("quasimodes are built on the slab")
    c, eps0 = m.c, m.eps0
    bops = BoundaryOperator(g, op.bc, c)
    x = g.node_points()[:, 0]
    out = []
    for k in range(1, n_modes + 1):
        w = 2.0 * c / g.dx * np.sin(k * np.pi * g.dx / (2.0 * g.length))
        U = StateVector.zeros(g, m.n_species, dtype=complex)
        Ex, Ey, Ez = g.split_e(U.E)
        Ey[:] = np.sin(k * np.pi * x / g.length)
        U.E[bops.pinned] = 0.0
        U.B = 1j * g.curl_e(U.E) / w
        PE = g.to_nodes(U.E)
        U.J = tuple(np.einsum("nij,nj->ni", inv_shift(1j * w, nu, Om, m.b), eps0 * (wp**2)[:, None] * PE)
                    for nu, Om, wp in zip(m.nu, m.Omega_c, m.omega_p))
        y = op.from_state(U)
        nrm = float(np.linalg.norm(y))
        r = 1j * w * y + op.A_hat @ y
        out.append(Quasimode(k, float(w), float(np.linalg.norm(r) / nrm), nrm))
    return out
