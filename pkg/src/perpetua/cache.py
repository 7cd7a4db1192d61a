"""Binary cache of solved value functions, keyed by a hash of the inputs."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .fd_solver import LogGrid, ValueFunction, extract_boundary
from .exceptions import EmptyExerciseRegion
from .payoff import PayoffSpec


def cache_key(model, spec: PayoffSpec, grid: LogGrid, **solver) -> str:
    payload = {"model": model.to_dict(), "payoff": spec.to_dict(), "grid": grid.key(),
               "solver": {k: solver[k] for k in sorted(solver)}}
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def save(vf: ValueFunction, directory, key: str) -> Path:
    path = Path(directory) / f"{key}.npz"
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"payoff": vf.spec.to_dict(), "residual": vf.residual, "sweeps": vf.sweeps,
            "method": vf.method, "omega": vf.omega,
            "boundary_kinds": {str(k): v for k, v in vf.boundary_kinds.items()}}
    np.savez_compressed(path, values=vf.values, psi=vf.psi, lower=vf.grid.lower,
                        upper=vf.grid.upper, n=np.asarray(vf.grid.n), meta=json.dumps(meta))
    return path


def load(directory, key: str) -> ValueFunction | None:
    path = Path(directory) / f"{key}.npz"
    if not path.exists():
        return None
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        grid = LogGrid(z["lower"], z["upper"], tuple(int(k) for k in z["n"]))
        vf = ValueFunction(grid, z["values"], z["psi"], PayoffSpec.from_mapping(meta["payoff"]),
                           meta["residual"], meta["sweeps"], meta["method"], meta["omega"],
                           {int(k): v for k, v in meta["boundary_kinds"].items()})
    try:
        vf.boundary = extract_boundary(vf)
    except EmptyExerciseRegion:
        vf.boundary = None
    return vf
