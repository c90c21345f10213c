"""Scenario documents: JSON schema, defaults, semantic checks, round trip."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from typing import Any

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from ..errors import ParseError, ValidationError
from ..fdtd_core.boundary import PEC, SM, BoundarySpec, Forcing, VectorProfile
from ..fdtd_core.grid import Box, Slab, cfl_max_dt
from ..medium import MediumSpec, profile_from_dict, sample_medium, species_from_dict

_NUM = {"type": "number"}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_PROFILE = {"anyOf": [_NUM, {"type": "object", "required": ["type"]}]}
_WINDOW = {"anyOf": [{"type": "null"}, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}
_FACE_TAG = {"enum": [PEC, SM]}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mode", "geometry", "medium"],
    "properties": {
        "mode": {"enum": ["simulate", "probe", "harmonic", "decay-study"]},
        "geometry": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind", "lengths", "cells"],
                 "properties": {"kind": {"const": "box"}, "lengths": _VEC3,
                                "cells": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                          "minItems": 3, "maxItems": 3}}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "length", "n"],
                 "properties": {"kind": {"const": "slab"}, "length": {"type": "number", "exclusiveMinimum": 0},
                                "n": {"type": "integer", "minimum": 1}}},
            ]
        },
        "constants": {"type": "object", "additionalProperties": False,
                      "properties": {"eps0": {"type": "number", "exclusiveMinimum": 0},
                                     "c": {"type": "number", "exclusiveMinimum": 0}}},
        "medium": {
            "type": "object", "additionalProperties": False, "required": ["species", "B_ext"],
            "properties": {
                "species": {"type": "array", "minItems": 1, "maxItems": 2, "items": {
                    "type": "object", "additionalProperties": False, "required": ["omega_p", "nu"],
                    "properties": {"omega_p": _PROFILE, "nu": _PROFILE,
                                   "charge_sign": {"enum": [-1, 1]},
                                   "charge_to_mass": {"type": "number", "minimum": 0}}}},
                "B_ext": {"type": "array", "items": _PROFILE, "minItems": 3, "maxItems": 3},
            },
        },
        "boundary": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "default": _FACE_TAG,
                "faces": {"type": "object", "additionalProperties": _FACE_TAG},
                "forcing": {
                    "type": "object", "additionalProperties": False, "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["zero", "harmonic", "pulse"]},
                        "omega": _NUM, "t0": _NUM, "width": {"type": "number", "exclusiveMinimum": 0},
                        "profile": {"type": "object", "additionalProperties": False,
                                    "properties": {"vector": _VEC3, "vector_im": _VEC3, "shape": _PROFILE}},
                    },
                },
            },
        },
        "time": {"type": "object", "additionalProperties": False,
                 "properties": {"T": {"type": "number", "exclusiveMinimum": 0},
                                "dt": {"type": "number", "exclusiveMinimum": 0},
                                "cfl_fraction": {"type": "number", "exclusiveMinimum": 0}}},
        "initial": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "cavity", "random", "smooth_slab", "snapshot", "harmonic"]},
                "amplitude": _NUM, "mx": {"type": "integer", "minimum": 1}, "my": {"type": "integer", "minimum": 1},
                "modes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "path": {"type": "string"}, "perturbation": _NUM,
            },
        },
        "outputs": {"type": "object", "additionalProperties": False,
                    "properties": {"cadence": {"type": "integer", "minimum": 1},
                                   "snapshots": {"type": "integer", "minimum": 0}}},
        "track_rho": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "probe": {"type": "object", "additionalProperties": False,
                  "properties": {"beta_min": _NUM, "beta_max": _NUM,
                                 "n_betas": {"type": "integer", "minimum": 2},
                                 "envelope_window": _WINDOW, "tilde": {"type": "boolean"},
                                 "spectrum": {"type": "boolean"},
                                 "band": {"anyOf": [{"type": "null"}, _NUM]},
                                 "quasimodes": {"type": "integer", "minimum": 0}}},
        "fit": {"type": "object", "additionalProperties": False,
                "properties": {"model": {"enum": ["poly", "exp", None]}, "window": _WINDOW}},
    },
}

DEFAULTS: dict[str, Any] = {
    "constants": {"eps0": 1.0, "c": 1.0},
    "boundary": {"default": PEC, "faces": {}, "forcing": {"kind": "zero"}},
    "time": {"cfl_fraction": 0.9},
    "initial": {"kind": "zero"},
    "outputs": {"cadence": 1, "snapshots": 0},
    "track_rho": False,
    "seed": 0,
    "probe": {"beta_min": 0.0, "beta_max": 50.0, "n_betas": 200, "envelope_window": None,
              "tilde": True, "spectrum": True, "band": None, "quasimodes": 0},
    "fit": {"model": None, "window": None},
}

_VALIDATOR = Draft202012Validator(SCHEMA)


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _merge(defaults: dict, doc: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in doc.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated scenario; ``doc`` is the normalised document (defaults applied)."""

    doc: dict

    def __eq__(self, other) -> bool:
        return isinstance(other, Scenario) and canonical(self.doc) == canonical(other.doc)

    @property
    def mode(self) -> str:
        return self.doc["mode"]

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    def with_seed(self, seed: int) -> "Scenario":
        d = copy.deepcopy(self.doc)
        d["seed"] = int(seed)
        return Scenario(d)

    def grid(self):
        g = self.doc["geometry"]
        if g["kind"] == "slab":
            return Slab(float(g["length"]), int(g["n"]))
        return Box(tuple(float(x) for x in g["lengths"]), tuple(int(x) for x in g["cells"]))

    def medium_spec(self) -> MediumSpec:
        m, k = self.doc["medium"], self.doc["constants"]
        sp = tuple(species_from_dict(s, f"/medium/species/{i}") for i, s in enumerate(m["species"]))
        B = tuple(profile_from_dict(p, f"/medium/B_ext/{i}") for i, p in enumerate(m["B_ext"]))
        return MediumSpec(sp, B, float(k["eps0"]), float(k["c"]))

    def medium(self, grid=None):
        return sample_medium(self.medium_spec(), grid or self.grid())

    def forcing(self) -> Forcing:
        f = self.doc["boundary"]["forcing"]
        if f["kind"] == "zero":
            return Forcing()
        p = f.get("profile", {})
        shape = profile_from_dict(p["shape"], "/boundary/forcing/profile/shape") if "shape" in p else None
        prof = VectorProfile(tuple(p.get("vector", (0.0, 0.0, 0.0))), tuple(p.get("vector_im", (0.0, 0.0, 0.0))),
                             shape)
        return Forcing(f["kind"], float(f.get("omega", 0.0)), prof, float(f.get("t0", 0.0)),
                       float(f.get("width", 1.0)))

    def boundary(self, grid=None) -> BoundarySpec:
        grid = grid or self.grid()
        b = self.doc["boundary"]
        faces = {f: b["faces"].get(f, b["default"]) for f in grid.faces}
        return BoundarySpec(faces, self.forcing())

    def dt(self, grid=None) -> float:
        grid = grid or self.grid()
        t = self.doc["time"]
        bound = cfl_max_dt(grid, float(self.doc["constants"]["c"]))
        return float(t["dt"]) if "dt" in t else float(t["cfl_fraction"]) * bound

    def n_steps(self, grid=None) -> int:
        return int(round(float(self.doc["time"]["T"]) / self.dt(grid)))


def canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(s: Scenario) -> str:
    return hashlib.sha256(canonical(s.doc).encode()).hexdigest()


def serialize(s: Scenario) -> str:
    return json.dumps(s.doc, indent=2, sort_keys=True)


def parse_scenario(text: str) -> Scenario:
    """Parse, apply defaults, validate.  A run manifest is accepted too:
    its embedded scenario is used."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "") from exc
    if isinstance(doc, dict) and "manifest_version" in doc:
        doc = doc.get("scenario")
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object", "")
    e = best_match(_VALIDATOR.iter_errors(doc))
    if e is not None:
        raise ParseError(e.message, _pointer(e.absolute_path))
    full = _merge(DEFAULTS, doc)
    s = Scenario(full)
    _check(s)
    return s


def _check(s: Scenario) -> None:
    d = s.doc
    grid = s.grid()
    mode = d["mode"]
    for f in d["boundary"]["faces"]:
        if f not in grid.faces:
            raise ValidationError(f"face {f!r} does not exist on a {grid.kind}", f"/boundary/faces/{f}")
    spec = s.medium_spec()
    pts = grid.node_points()
    for i, sp_ in enumerate(spec.species):
        if np.any(sp_.omega_p(pts) <= 0):
            raise ValidationError("plasma frequency must be positive at every sample point",
                                  f"/medium/species/{i}/omega_p")
        nu = sp_.nu(pts)
        if np.any(nu < 0):
            raise ValidationError("collision frequency must be non-negative", f"/medium/species/{i}/nu")
        if mode == "decay-study" and np.min(nu) <= 0:
            raise ValidationError(
                "decay studies need a collision frequency bounded below by a strictly positive constant "
                f"(min nu = {float(np.min(nu)):g})", f"/medium/species/{i}/nu")
    s.medium(grid)  # raises ZeroExternalField when b is undefined
    bc = s.boundary(grid)
    forcing = d["boundary"]["forcing"]
    if forcing["kind"] != "zero":
        if not bc.absorbing_faces(grid):
            raise ValidationError("boundary forcing needs at least one SilverMuller face", "/boundary/forcing")
        if "profile" not in forcing:
            raise ValidationError("forcing needs a profile", "/boundary/forcing")
        if "omega" not in forcing and forcing["kind"] == "harmonic":
            raise ValidationError("harmonic forcing needs omega", "/boundary/forcing")
    t = d["time"]
    if mode != "probe" and "T" not in t:
        raise ValidationError("final time T is required", "/time")
    if "dt" in t:
        bound = cfl_max_dt(grid, float(d["constants"]["c"]))
        if t["dt"] > bound:
            raise ValidationError(f"dt = {t['dt']:g} exceeds the CFL bound {bound:g}", "/time/dt")
    elif t["cfl_fraction"] > 1.0:
        raise ValidationError("cfl_fraction must not exceed 1", "/time/cfl_fraction")
    ini = d["initial"]
    kind = ini["kind"]
    if kind == "cavity" and grid.kind != "box":
        raise ValidationError("cavity data are defined on a box", "/initial/kind")
    if kind == "smooth_slab" and grid.kind != "slab":
        raise ValidationError("smooth_slab data are defined on a slab", "/initial/kind")
    if kind == "snapshot" and "path" not in ini:
        raise ValidationError("snapshot initial data need a path", "/initial")
    if mode == "harmonic":
        if forcing["kind"] != "harmonic":
            raise ValidationError("harmonic mode needs a harmonic forcing", "/boundary/forcing/kind")
        if kind not in ("harmonic", "zero"):
            raise ValidationError("harmonic mode starts from 'harmonic' (or 'zero') initial data", "/initial/kind")
    elif kind == "harmonic":
        raise ValidationError("'harmonic' initial data are only available in harmonic mode", "/initial/kind")
    p = d["probe"]
    if p["beta_max"] < p["beta_min"]:
        raise ValidationError("beta_max < beta_min", "/probe/beta_max")
    for key in ("fit",):
        w = d[key]["window"]
        if w is not None and w[1] <= w[0]:
            raise ValidationError("window must be increasing", f"/{key}/window")
