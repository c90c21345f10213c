"""Energy functional, dissipation ledger, constraint residuals, decay fits.

Energy of U = (J_1, J_2, E, B)::

    E(U) = 1/2 [ sum_s (1/eps0) |J_s / wp_s|^2 + eps0 |E|^2 + c^2 eps0 |B|^2 ]

with each family integrated where it lives (lumped midpoint weights).  All
reductions are numpy pairwise sums, so results do not depend on threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateSeries


@dataclass(frozen=True)
class EnergyReport:
    t: float
    total: float
    kinetic: tuple[float, ...]
    electric: float
    magnetic: float
    boundary_flux: float = 0.0
    dissipation_vol: float = 0.0


def _wsum(w: NDArray, x: NDArray) -> float:
    return float(np.sum(w * (x.real**2 + x.imag**2) if np.iscomplexobj(x) else w * x * x))


def _inv_wp2(wp: NDArray, eps0: float) -> NDArray:
    return np.divide(1.0, eps0 * wp**2, out=np.zeros_like(wp, dtype=float), where=wp > 0)


def energy(state, medium) -> EnergyReport:
    grid = medium.grid
    eps0, c = medium.eps0, medium.c
    wn = grid.w_n
    kin = tuple(0.5 * _wsum((wn * _inv_wp2(wp, eps0))[:, None], J)
                for J, wp in zip(state.J, medium.omega_p))
    el = 0.5 * eps0 * _wsum(grid.w_e, state.E)
    mag = 0.5 * c * c * eps0 * _wsum(grid.w_b, state.B)
    return EnergyReport(state.t, float(sum(kin) + el + mag), kin, el, mag)


def norm_x(state, medium) -> float:
    return float(np.sqrt(2.0 * energy(state, medium).total))


def leapfrog_correction(state, medium, dt: float) -> float:
    """c^2 eps0 dt^2 / 8 |curl_e E|^2: subtracting it from the energy gives
    the quantity the leapfrog scheme dissipates exactly."""
    g = medium.grid
    return 0.125 * medium.c**2 * medium.eps0 * dt * dt * _wsum(g.w_b, g.curl_e(state.E))


def scheme_energy(state, medium, dt: float) -> float:
    return energy(state, medium).total - leapfrog_correction(state, medium, dt)


def volumetric_dissipation(J: tuple, medium) -> float:
    """(1/eps0) sum_s |sqrt(nu_s) J_s / wp_s|^2"""
    wn = medium.grid.w_n
    return float(sum(_wsum((wn * nu * _inv_wp2(wp, medium.eps0))[:, None], j)
                     for j, nu, wp in zip(J, medium.nu, medium.omega_p)))


def boundary_dissipation(E: NDArray, src: NDArray, medium, bops) -> float:
    """eps0 c^2 int (c |B_t|^2 - g . B_t) with the ghost trace B_t = (g - E x n)/c,
    which equals eps0 sum_e w_e (kappa E^2 - E src) on the boundary edges."""
    w = medium.grid.w_e
    return float(medium.eps0 * (np.sum(w * bops.kappa * E * E) - np.sum(w * E * src)))


def step_dissipation(info, medium, bops) -> tuple[float, float]:
    """Dissipation terms evaluated at the step midpoint."""
    return (volumetric_dissipation(info.J_mid, medium),
            boundary_dissipation(info.E_mid, info.src_mid, medium, bops))


@dataclass(frozen=True)
class BalanceReport:
    residuals: NDArray
    max_abs: float
    l2: float
    max_scheme_increase: float


def dissipation_balance(trace) -> BalanceReport:
    """residual_n = (E^{n+1} - E^n)/dt + dissipation(t_{n+1/2}) for every step."""
    r = trace.columns["residual_balance"][1:]
    inc = np.diff(trace.scheme_energy)
    return BalanceReport(r, float(np.max(np.abs(r))) if r.size else 0.0,
                         float(np.sqrt(trace.dt * np.sum(r * r))),
                         float(np.max(inc)) if inc.size else 0.0)


def constraint_residuals(state, medium, bc=None) -> dict:
    """divB_max over cells, gauss_max over interior nodes (NaN without rho),
    Bn_on_GammaP_max over the normal faces of PEC faces."""
    g = medium.grid
    divb = g.div_b(state.B)
    out = {"divB_max": float(np.max(np.abs(divb))) if divb.size else 0.0}
    if state.rho is not None:
        res = g.div_e(state.E) - sum(state.rho) / medium.eps0
        out["gauss_max"] = float(np.max(np.abs(res[g.interior_nodes()]))) if res.size else 0.0
    else:
        out["gauss_max"] = float("nan")
    bn = 0.0
    if bc is not None:
        for f in bc.pec_faces(g):
            m = g.normal_faces(f)
            if m.any():
                bn = max(bn, float(np.max(np.abs(state.B[m]))))
    out["Bn_on_GammaP_max"] = bn
    return out


@dataclass(frozen=True)
class DecayFit:
    model: str
    rate: float
    prefactor: float
    window: tuple[float, float]
    residual: float
    n_points: int


def fit_decay(t: NDArray, y: NDArray, model: str = "poly",
              window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares decay law on a window.

    poly: log y = log C + rate log t;  exp: log y = log C + rate t.
    Default window [max(1, T/10), T].  No extrapolation outside it.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if model not in ("poly", "exp"):
        raise ValueError("model must be 'poly' or 'exp'")
    if t.size < 3:
        raise DegenerateSeries("need at least three samples")
    T = float(np.max(t))
    lo, hi = window if window is not None else (max(1.0, T / 10), T)
    m = (t >= lo) & (t <= hi)
    if model == "poly":
        m &= t > 0
    if m.sum() < 3:
        raise DegenerateSeries(f"fewer than three samples in window [{lo:g}, {hi:g}]")
    if np.any(~(y[m] > 0)) or not np.all(np.isfinite(y[m])):
        raise DegenerateSeries("series must be positive and finite in the fit window")
    x = np.log(t[m]) if model == "poly" else t[m]
    ly = np.log(y[m])
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return DecayFit(model, float(coef[1]), float(np.exp(coef[0])), (float(lo), float(hi)),
                    float(np.sqrt(np.mean(res**2))), int(m.sum()))


def write_csv(rows, header, path: str) -> None:
    """Deterministic CSV: shortest round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def read_csv(path: str) -> dict[str, NDArray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {h: arr[:, i] for i, h in enumerate(header)}


def write_trace_csv(trace, path: str) -> None:
    from .fdtd_core.stepper import TRACE_COLUMNS
    write_csv(trace.rows(), TRACE_COLUMNS, path)
