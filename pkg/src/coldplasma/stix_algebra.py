"""Pointwise 3x3 plasma-tensor algebra.

All functions are vectorised over leading axes: scalars have shape ``(...)``
and directions / matrices ``(..., 3)`` / ``(..., 3, 3)``.

With M v = Omega_c b x v + nu v, the matrix is block diagonal in a frame
whose third axis is b::

    M = [[nu, -Omega, 0], [Omega, nu, 0], [0, 0, nu]]

so every shifted inverse (sigma I + tau M)^-1 has a closed form there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateDirection, NonPositiveZeta, SingularShift

SINGULAR_TOL = 1e-14


@dataclass(frozen=True)
class StixFrame:
    e1: NDArray
    e2: NDArray
    e3: NDArray

    def rotation(self) -> NDArray:
        """Columns are e1, e2, e3: maps frame coordinates to lab coordinates."""
        return np.stack([self.e1, self.e2, self.e3], axis=-1)


@dataclass(frozen=True)
class EigenTriple:
    lambda1: NDArray  # P + iQ
    lambda2: NDArray  # P - iQ
    lambda3: NDArray  # R

    def as_array(self) -> NDArray:
        return np.stack([self.lambda1, self.lambda2, self.lambda3], axis=-1)


def stix_frame(b: ArrayLike) -> StixFrame:
    """Right-handed orthonormal frame with e3 = b.

    e1 is the projection, orthogonal to b, of the canonical axis whose
    component along b is smallest in magnitude (lowest index on ties).
    """
    b = np.asarray(b, dtype=float)
    norm = np.linalg.norm(b, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-6):
        raise DegenerateDirection("direction must have unit length (tolerance 1e-6)")
    b = b / norm[..., None]
    axis = np.argmin(np.abs(b), axis=-1)
    a = np.zeros_like(b)
    np.put_along_axis(a, axis[..., None], 1.0, axis=-1)
    e1 = a - np.einsum("...i,...i->...", a, b)[..., None] * b
    e1 /= np.linalg.norm(e1, axis=-1)[..., None]
    e2 = np.cross(b, e1)
    return StixFrame(e1, e2, b)


def cross_matrix(b: ArrayLike) -> NDArray:
    """Matrix K with K v = b x v."""
    b = np.asarray(b, dtype=float)
    K = np.zeros(b.shape[:-1] + (3, 3))
    K[..., 0, 1] = -b[..., 2]
    K[..., 0, 2] = b[..., 1]
    K[..., 1, 0] = b[..., 2]
    K[..., 1, 2] = -b[..., 0]
    K[..., 2, 0] = -b[..., 1]
    K[..., 2, 1] = b[..., 0]
    return K


def assemble_M(nu: ArrayLike, Omega_c: ArrayLike, b: ArrayLike) -> NDArray:
    """Real 3x3 matrix of v -> Omega_c b x v + nu v."""
    nu = np.asarray(nu, dtype=float)
    Om = np.asarray(Omega_c, dtype=float)
    M = Om[..., None, None] * cross_matrix(b)
    M[..., 0, 0] += nu
    M[..., 1, 1] += nu
    M[..., 2, 2] += nu
    return M


def _affine_inverse(sigma, tau, nu, Omega_c, b, check: bool = True) -> NDArray:
    """(sigma I + tau M)^-1 through the closed form in the Stix frame."""
    nu = np.asarray(nu, dtype=float)
    Om = np.asarray(Omega_c, dtype=float)
    a = sigma + tau * nu
    w = tau * Om
    s = a * a + w * w
    det = a * s
    if check and np.any(np.abs(det) <= SINGULAR_TOL):
        raise SingularShift("|d_s| <= 1e-14: shifted matrix is singular (nu = 0?)")
    a, w, s = np.broadcast_arrays(a, w, s)
    inv = np.zeros(a.shape + (3, 3), dtype=np.result_type(a.dtype, w.dtype))
    inv[..., 0, 0] = a / s
    inv[..., 1, 1] = a / s
    inv[..., 0, 1] = w / s
    inv[..., 1, 0] = -w / s
    inv[..., 2, 2] = 1.0 / a
    R = stix_frame(b).rotation()
    return R @ inv @ np.swapaxes(R, -1, -2)


def inv_shifted_M(alpha, nu, Omega_c, b) -> NDArray:
    """(i alpha I + M)^-1, determinant d = (i alpha + nu)[(Omega^2 + nu^2 - alpha^2) + 2 i alpha nu]."""
    return _affine_inverse(1j * np.asarray(alpha, dtype=float), 1.0, nu, Omega_c, b)


def inv_shift(z, nu, Omega_c, b) -> NDArray:
    """(z I + M)^-1 for an arbitrary complex shift z."""
    return _affine_inverse(np.asarray(z, dtype=complex), 1.0, nu, Omega_c, b)


def resolvent_M(lam, nu, Omega_c, b) -> NDArray:
    """(I + lam M)^-1 for real lam > 0 (real matrix)."""
    return _affine_inverse(1.0, float(lam), nu, Omega_c, b)


def assemble_D(omega_p: Sequence, nu: Sequence, Omega_c: Sequence, b,
               *, lam: float | None = None, alpha: float | None = None) -> NDArray:
    """Sum over species of omega_p^2 times a shifted inverse.

    ``lam`` selects D_lam = sum omega_p^2 (I + lam M_s)^-1 (real),
    ``alpha`` selects D_alpha = sum omega_p^2 (i alpha I + M_s)^-1 (complex).
    """
    if (lam is None) == (alpha is None):
        raise ValueError("give exactly one of lam, alpha")
    D = None
    for wp, v, Om in zip(omega_p, nu, Omega_c):
        if lam is not None:
            inv = resolvent_M(lam, v, Om, b)
        else:
            inv = inv_shifted_M(alpha, v, Om, b)
        term = (np.asarray(wp, dtype=float) ** 2)[..., None, None] * inv
        D = term if D is None else D + term
    return D


def pqr(alpha, omega_p: Sequence, nu: Sequence, Omega_c: Sequence):
    """The three Stix-frame entries of B_alpha."""
    alpha = np.asarray(alpha, dtype=float)
    P = 1j * alpha
    Q = 0.0
    R = 1j * alpha
    for wp, v, Om in zip(omega_p, nu, Omega_c):
        a = 1j * alpha + np.asarray(v, dtype=float)
        w2 = np.asarray(wp, dtype=float) ** 2
        den = a * a + np.asarray(Om, dtype=float) ** 2
        P = P + w2 * a / den
        Q = Q + w2 * np.asarray(Om, dtype=float) / den
        R = R + w2 / a
    return P, Q, R


def B_alpha(alpha, omega_p: Sequence, nu: Sequence, Omega_c: Sequence, b):
    """B_alpha = i alpha I + D_alpha and its eigenvalues (P + iQ, P - iQ, R)."""
    D = assemble_D(omega_p, nu, Omega_c, b, alpha=alpha)
    B = D + 1j * np.asarray(alpha, dtype=float)[..., None, None] * np.eye(3)
    P, Q, R = pqr(alpha, omega_p, nu, Omega_c)
    return B, EigenTriple(P + 1j * Q, P - 1j * Q, R + 0 * P)


def real_parts(alpha, omega_p: Sequence, nu: Sequence, Omega_c: Sequence) -> NDArray:
    """Closed-form Re of the eigen triple, stacked on the last axis."""
    alpha = np.asarray(alpha, dtype=float)
    r1 = r2 = r3 = 0.0
    for wp, v, Om in zip(omega_p, nu, Omega_c):
        w2 = np.asarray(wp, dtype=float) ** 2
        v = np.asarray(v, dtype=float)
        Om = np.asarray(Om, dtype=float)
        den = (Om**2 + v**2 - alpha**2) ** 2 + 4 * alpha**2 * v**2
        r1 = r1 + w2 * v * ((Om + alpha) ** 2 + v**2) / den
        r2 = r2 + w2 * v * ((Om - alpha) ** 2 + v**2) / den
        r3 = r3 + w2 * v / (v**2 + alpha**2)
    return np.stack(np.broadcast_arrays(r1, r2, r3), axis=-1)


def zeta_eta(alpha: float, m) -> tuple[float, float]:
    """Uniform lower bound of Re(eig B_alpha) and upper bound of its norm
    over all samples of the medium ``m``."""
    re = real_parts(alpha, m.omega_p, m.nu, m.Omega_c)
    zeta = float(np.min(re))
    _, eig = B_alpha(alpha, m.omega_p, m.nu, m.Omega_c, m.b)
    # B_alpha is normal, so its operator norm is the spectral radius
    eta = float(np.max(np.abs(eig.as_array())))
    if not zeta > 0:
        raise NonPositiveZeta(f"zeta_alpha = {zeta:g} <= 0 at alpha = {alpha:g}")
    return zeta, eta


def choose_lambda(dt: float, nu_star: float, Omega_star: float) -> float:
    """lam = min(dt, 0.5 / (nu* + Omega*)), which keeps ||lam M_s|| < 1."""
    s = nu_star + Omega_star
    return float(dt) if s <= 0 else float(min(dt, 0.5 / s))
