"""On-disk snapshot database: ``manifest.json``, ``params.csv`` and ``snapshots.csv``.

Numbers are written as 17-significant-digit decimals, which round-trip
binary64 values exactly, so ``load(save(db))`` is lossless.
"""

from __future__ import annotations

import io
import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .rom import SnapshotDatabase

FORMAT = "igarom-snapshot-database"
VERSION = 1


def _table(array) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(array), fmt="%.17g", delimiter=",")
    return buf.getvalue()


def save(db: SnapshotDatabase, directory) -> Path:
    """Write ``db`` to ``directory``, replacing it only once every file is complete."""
    directory = Path(directory)
    directory.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "n_train": db.n_train,
        "n_dofs": db.n_dofs,
        "parameter_order": "first parameter varies fastest",
        "parameters": db.parameters.tolist(),
        "mesh": db.mesh,
        "config": db.config,
        "files": {"parameters": "params.csv", "snapshots": "snapshots.csv"},
    }
    tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=directory.parent))
    try:
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        header = ",".join(f"mu{k + 1}" for k in range(db.parameters.shape[1]))
        (tmp / "params.csv").write_text(header + "\n" + _table(db.parameters))
        (tmp / "snapshots.csv").write_text(_table(db.snapshots))
        if directory.exists():
            old = directory.with_name(directory.name + ".old")
            shutil.rmtree(old, ignore_errors=True)
            os.replace(directory, old)
            os.replace(tmp, directory)
            shutil.rmtree(old)
        else:
            os.replace(tmp, directory)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return directory


def load(directory) -> SnapshotDatabase:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no snapshot database at {directory}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{manifest_path} is not a snapshot database manifest")
    if manifest.get("version") != VERSION:
        raise ValueError(f"unsupported database version {manifest.get('version')}")
    files = manifest["files"]
    params = np.loadtxt(directory / files["parameters"], delimiter=",", skiprows=1, ndmin=2)
    snaps = np.loadtxt(directory / files["snapshots"], delimiter=",", ndmin=2)
    if snaps.shape != (manifest["n_dofs"], manifest["n_train"]):
        raise ValueError(f"snapshot matrix has shape {snaps.shape}, manifest says "
                         f"({manifest['n_dofs']}, {manifest['n_train']})")
    if not np.array_equal(params, np.asarray(manifest["parameters"], dtype=float)):
        raise ValueError("params.csv disagrees with the manifest")
    return SnapshotDatabase(params, snaps, manifest["mesh"], manifest["config"])
