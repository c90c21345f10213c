"""Snapshot dump: raw little-endian float64 data plus a JSON header.

Byte layout of ``<stem>.bin``: the blocks listed in the header, in order,
each a C-ordered array of ``<f8``.  Blocks are J<s> (n_nodes, 3) per
species, E and B as flat vectors (component-major, see ``grid.split_e`` /
``grid.split_b``), then rho<s> when tracked.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .grid import grid_from_dict
from .state import StateVector


def _blocks(U: StateVector):
    out = [(f"J{s + 1}", j, "node") for s, j in enumerate(U.J)]
    out += [("E", U.E, "edge"), ("B", U.B, "face")]
    if U.rho is not None:
        out += [(f"rho{s + 1}", r, "node") for s, r in enumerate(U.rho)]
    return out


def write_snapshot(U: StateVector, grid, directory: str, step: int, stem: str | None = None) -> str:
    os.makedirs(directory, exist_ok=True)
    stem = stem or f"state_{step:08d}"
    blocks, header, offset = _blocks(U), [], 0
    with open(os.path.join(directory, stem + ".bin"), "wb") as fh:
        for name, arr, where in blocks:
            a = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(a.tobytes(order="C"))
            header.append({"name": name, "shape": list(a.shape), "offset": offset, "staggering": where})
            offset += a.nbytes
    meta = {"format": "raw-le-float64", "dtype": "<f8", "time": U.t, "step": step,
            "grid": grid.to_dict(), "blocks": header}
    path = os.path.join(directory, stem + ".json")
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return path


def read_snapshot(json_path: str):
    """Returns (StateVector, grid)."""
    with open(json_path) as fh:
        meta = json.load(fh)
    raw = np.fromfile(json_path[:-5] + ".bin", dtype="<f8")
    arrays = {}
    for b in meta["blocks"]:
        n = int(np.prod(b["shape"]))
        arrays[b["name"]] = raw[b["offset"] // 8: b["offset"] // 8 + n].reshape(b["shape"]).astype(float)
    ns = sum(1 for k in arrays if k.startswith("J"))
    J = tuple(arrays[f"J{s + 1}"] for s in range(ns))
    rho = tuple(arrays[f"rho{s + 1}"] for s in range(ns)) if "rho1" in arrays else None
    return StateVector(J, arrays["E"], arrays["B"], float(meta["time"]), rho), grid_from_dict(meta["grid"])
