"""Trajectory CSV, field text and summary JSON files.

Trajectory CSV: one comment line ``# bohmsim-trajectories key=value ...``, a
column header, then rows ``id,t,x1[,x2],status[,lambda0,s3][,outcome]`` with
floats written at full precision (``%.17g``).  Status codes: 0 complete,
1 node-regularized, 2 boundary-exit.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .grid import read_field, write_field  # noqa: F401  (re-exported)

TRAJ_TAG = "# bohmsim-trajectories"


def _thin(n: int, max_n: int | None) -> np.ndarray:
    if max_n is None or max_n >= n:
        return np.arange(n)
    return np.arange(max_n)


def write_trajectories(path: str | Path, times: np.ndarray, positions: np.ndarray, status: np.ndarray,
                       meta: dict | None = None, stride: int = 1, max_n: int | None = None,
                       lambda0: np.ndarray | None = None, s3: np.ndarray | None = None,
                       outcome: np.ndarray | None = None) -> int:
    """Write ``positions[s, i, axis]`` in long format; returns the number of trajectories written."""
    times = np.asarray(times)
    positions = np.asarray(positions)
    nsnap, n, dims = positions.shape
    ids = _thin(n, max_n)
    snaps = np.arange(0, nsnap, stride)
    if snaps[-1] != nsnap - 1:
        snaps = np.append(snaps, nsnap - 1)
    m = len(ids)
    cols = [np.repeat(ids, len(snaps)), np.tile(times[snaps], m)]
    names, fmts = ["id", "t"], ["%d", "%.17g"]
    for a in range(dims):
        cols.append(positions[snaps][:, ids, a].T.ravel())
        names.append(f"x{a + 1}")
        fmts.append("%.17g")
    cols.append(np.repeat(np.asarray(status)[ids], len(snaps)))
    names.append("status")
    fmts.append("%d")
    if lambda0 is not None:
        cols.append(np.repeat(np.asarray(lambda0)[ids], len(snaps)))
        cols.append(np.asarray(s3)[snaps][:, ids].T.ravel())
        names += ["lambda0", "s3"]
        fmts += ["%.17g", "%.17g"]
    if outcome is not None:
        cols.append(np.repeat(np.asarray(outcome)[ids], len(snaps)))
        names.append("outcome")
        fmts.append("%d")
    head = TRAJ_TAG + "".join(f" {k}={v}" for k, v in (meta or {}).items())
    table = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    np.savetxt(path, table, fmt=fmts, delimiter=",", header=head[2:] + "\n" + ",".join(names), comments="# ")
    return m


def read_trajectories(path: str | Path) -> tuple[dict, np.ndarray]:
    """Returns the header metadata and a structured array with one field per column."""
    with open(path) as fh:
        first = fh.readline().strip()
        names = fh.readline().lstrip("#").strip().split(",")
    if not first.startswith(TRAJ_TAG):
        raise ValueError(f"{path} is not a trajectory file")
    meta = dict(tok.split("=", 1) for tok in first[len(TRAJ_TAG):].split())
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    rec = np.rec.fromarrays(data.T, names=names)
    return meta, rec


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return {"real": obj.real, "imag": obj.imag}
    return obj


def write_summary(path: str | Path, summary: dict) -> None:
    Path(path).write_text(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")


def read_summary(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
