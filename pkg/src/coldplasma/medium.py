"""Spatially varying two-species plasma coefficients.

Each species carries a plasma frequency omega_p(x), a collision frequency
nu(x) and a signed cyclotron frequency Omega_c(x) = sign * (q/m) * |B_ext(x)|.
The anisotropy direction is b = B_ext / |B_ext|.  Profiles are analytic and
sampled at the points where the currents live (see ``node_points`` on the
grid objects in :mod:`coldplasma.fdtd_core`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ValidationError, ZeroExternalField

# ---------------------------------------------------------------------------
# analytic scalar profiles


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, pts: NDArray) -> NDArray:
        return np.full(pts.shape[:-1], float(self.value))

    def to_dict(self) -> dict:
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class Affine:
    """value + gradient . (x - origin)"""

    value: float
    gradient: tuple[float, float, float] = (0.0, 0.0, 0.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __call__(self, pts: NDArray) -> NDArray:
        g = np.asarray(self.gradient, dtype=float)
        o = np.asarray(self.origin, dtype=float)
        return self.value + (pts - o) @ g

    def to_dict(self) -> dict:
        return {"type": "affine", "value": self.value,
                "gradient": list(self.gradient), "origin": list(self.origin)}


@dataclass(frozen=True)
class Gaussian:
    """base + amplitude * exp(-|x - center|^2 / (2 width^2))"""

    base: float
    amplitude: float
    center: tuple[float, float, float]
    width: float

    def __call__(self, pts: NDArray) -> NDArray:
        d = pts - np.asarray(self.center, dtype=float)
        r2 = np.einsum("...i,...i->...", d, d)
        return self.base + self.amplitude * np.exp(-r2 / (2.0 * self.width**2))

    def to_dict(self) -> dict:
        return {"type": "gaussian", "base": self.base, "amplitude": self.amplitude,
                "center": list(self.center), "width": self.width}


@dataclass(frozen=True)
class Product:
    """Pointwise product of other profiles (tensor products when each
    factor varies along a single axis)."""

    factors: tuple

    def __call__(self, pts: NDArray) -> NDArray:
        out = np.ones(pts.shape[:-1])
        for f in self.factors:
            out = out * f(pts)
        return out

    def to_dict(self) -> dict:
        return {"type": "product", "factors": [f.to_dict() for f in self.factors]}


Profile = Constant | Affine | Gaussian | Product


def _vec3(v: Any, where: str) -> tuple[float, float, float]:
    v = tuple(float(x) for x in v)
    if len(v) != 3:
        raise ValidationError("expected a 3-vector", where)
    return v  # type: ignore[return-value]


def profile_from_dict(d: Any, where: str = "") -> Profile:
    """Build a profile from its JSON form; bare numbers mean constants."""
    if isinstance(d, (int, float)) and not isinstance(d, bool):
        return Constant(float(d))
    if not isinstance(d, dict) or "type" not in d:
        raise ValidationError("profile must be a number or an object with 'type'", where)
    kind = d["type"]
    if kind == "constant":
        return Constant(float(d["value"]))
    if kind == "affine":
        return Affine(float(d["value"]),
                      _vec3(d.get("gradient", (0, 0, 0)), where + "/gradient"),
                      _vec3(d.get("origin", (0, 0, 0)), where + "/origin"))
    if kind == "gaussian":
        w = float(d["width"])
        if w <= 0:
            raise ValidationError("gaussian width must be positive", where + "/width")
        return Gaussian(float(d.get("base", 0.0)), float(d["amplitude"]),
                        _vec3(d["center"], where + "/center"), w)
    if kind == "product":
        return Product(tuple(profile_from_dict(f, f"{where}/factors/{i}")
                             for i, f in enumerate(d["factors"])))
    raise ValidationError(f"unknown profile type {kind!r}", where + "/type")


# ---------------------------------------------------------------------------
# specs and sampled fields


@dataclass(frozen=True)
class SpeciesSpec:
    omega_p: Profile
    nu: Profile
    charge_sign: int = -1
    charge_to_mass: float = 1.0  # |q|/m, so that |Omega_c| = charge_to_mass * |B_ext|

    def __post_init__(self):
        if self.charge_sign not in (-1, 1):
            raise ValidationError("charge_sign must be +1 or -1")


@dataclass(frozen=True)
class MediumSpec:
    species: tuple[SpeciesSpec, ...]
    B_ext: tuple[Profile, Profile, Profile]
    eps0: float = 1.0
    c: float = 1.0


@dataclass(frozen=True)
class BoundsReport:
    nu_star: float
    Omega_star: float
    omega_star: float
    nu_lower: float
    omega_lower: float
    hyp1_ok: bool
    hyp2_ok: bool
    hyp1_violations: tuple[int, ...] = ()
    hyp2_violations: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class MediumFields:
    """Sampled coefficients; arrays are indexed by flattened sample index."""

    grid: Any
    omega_p: tuple[NDArray, ...]
    nu: tuple[NDArray, ...]
    Omega_c: tuple[NDArray, ...]
    b: NDArray
    eps0: float = 1.0
    c: float = 1.0
    bounds: BoundsReport | None = field(default=None)

    @property
    def n_species(self) -> int:
        return len(self.omega_p)

    @property
    def n_points(self) -> int:
        return self.b.shape[0]


def _unit_field(B: NDArray, require: bool) -> NDArray:
    mag = np.linalg.norm(B, axis=-1)
    zero = mag == 0.0
    if np.any(zero):
        if require:
            idx = int(np.flatnonzero(zero)[0])
            raise ZeroExternalField(f"|B_ext| = 0 at sample {idx}; b is undefined there")
        B = B.copy()
        B[zero] = (0.0, 0.0, 1.0)
        mag = np.where(zero, 1.0, mag)
    b = B / mag[:, None]
    # one Newton polish keeps |b| = 1 at the 1e-16 level
    b = b * (1.5 - 0.5 * np.einsum("ij,ij->i", b, b))[:, None]
    return b


def sample_medium(spec: MediumSpec, grid: Any) -> MediumFields:
    """Sample ``spec`` at the grid's current locations and attach bounds."""
    pts = np.asarray(grid.node_points(), dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValidationError("grid has no sample points")
    Bx = np.stack([np.broadcast_to(p(pts), pts.shape[:1]) for p in spec.B_ext], axis=-1)
    magnetized = any(s.charge_to_mass != 0.0 for s in spec.species)
    b = _unit_field(Bx, require=magnetized)
    Bmag = np.linalg.norm(Bx, axis=-1)
    wp, nu, Om = [], [], []
    for s in spec.species:
        wp.append(np.broadcast_to(s.omega_p(pts), Bmag.shape).astype(float).copy())
        nu.append(np.broadcast_to(s.nu(pts), Bmag.shape).astype(float).copy())
        Om.append(s.charge_sign * s.charge_to_mass * Bmag)
    m = MediumFields(grid, tuple(wp), tuple(nu), tuple(Om), b, spec.eps0, spec.c)
    object.__setattr__(m, "bounds", validate_hypotheses(m))
    return m


def uniform_medium(grid: Any, omega_p: Sequence[float], nu: Sequence[float],
                   Omega_c: Sequence[float], b=(0.0, 0.0, 1.0),
                   eps0: float = 1.0, c: float = 1.0) -> MediumFields:
    """Shortcut for homogeneous media given signed cyclotron frequencies."""
    n = np.asarray(grid.node_points()).shape[0]
    bv = np.asarray(b, dtype=float)
    bv = bv / np.linalg.norm(bv)
    m = MediumFields(grid,
                     tuple(np.full(n, float(w)) for w in omega_p),
                     tuple(np.full(n, float(v)) for v in nu),
                     tuple(np.full(n, float(o)) for o in Omega_c),
                     np.tile(bv, (n, 1)), eps0, c)
    object.__setattr__(m, "bounds", validate_hypotheses(m))
    return m


def validate_hypotheses(m: MediumFields) -> BoundsReport:
    """Sample-wise bounds for the boundedness and positivity hypotheses.

    hyp1: 0 <= nu, 0 < omega_p (finite suprema are automatic on a grid).
    hyp2: hyp1 plus strictly positive infima of nu and omega_p.
    Violations are reported as flattened sample indices, never raised.
    """
    nu = np.stack(m.nu)
    wp = np.stack(m.omega_p)
    Om = np.stack(m.Omega_c)
    finite = np.isfinite(nu).all(0) & np.isfinite(wp).all(0) & np.isfinite(Om).all(0)
    bad1 = (nu < 0).any(0) | (wp <= 0).any(0) | ~finite
    bad2 = bad1 | (nu <= 0).any(0)
    nu_lower = float(nu.min())
    om_lower = float(wp.min())
    hyp1 = not bad1.any()
    return BoundsReport(
        nu_star=float(nu.max()),
        Omega_star=float(np.abs(Om).max()),
        omega_star=float(wp.max()),
        nu_lower=nu_lower,
        omega_lower=om_lower,
        hyp1_ok=bool(hyp1),
        hyp2_ok=bool(hyp1 and nu_lower > 0 and om_lower > 0),
        hyp1_violations=tuple(int(i) for i in np.flatnonzero(bad1)),
        hyp2_violations=tuple(int(i) for i in np.flatnonzero(bad2)),
    )


def species_from_dict(d: dict, where: str = "") -> SpeciesSpec:
    return SpeciesSpec(
        omega_p=profile_from_dict(d["omega_p"], where + "/omega_p"),
        nu=profile_from_dict(d["nu"], where + "/nu"),
        charge_sign=int(d.get("charge_sign", -1)),
        charge_to_mass=float(d.get("charge_to_mass", 1.0)),
    )


def species_to_dict(s: SpeciesSpec) -> dict:
    return {"omega_p": s.omega_p.to_dict(), "nu": s.nu.to_dict(),
            "charge_sign": s.charge_sign, "charge_to_mass": s.charge_to_mass}
