"""CSV tables, run manifests and config (de)serialization."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import subprocess
import sys
from dataclasses import asdict, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .fock import PhysicalParams
from .protocol import ProtocolConfig

FLOAT_FORMAT = "%.12g"


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return FLOAT_FORMAT % x
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    """Write ``rows`` under ``header``; floats keep 12 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def config_to_dict(config: ProtocolConfig) -> dict:
    return asdict(config)


def config_from_dict(d: dict) -> ProtocolConfig:
    d = dict(d)
    params = PhysicalParams(**d.pop("params"))
    known = {f.name for f in fields(ProtocolConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown protocol config keys: {sorted(unknown)}")
    return ProtocolConfig(params=params, **d)


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def code_version() -> str:
    from . import __version__

    root = Path(__file__).resolve().parents[2]
    try:
        rev = subprocess.run(
            ["git", "-C", str(root), "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+g{rev}" if rev else __version__


def write_manifest(out_dir, command: str, config: dict, outputs=(), results=None) -> Path:
    """One JSON manifest per run: full config, code version, outputs and summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "code_version": code_version(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": [str(Path(p).name) for p in outputs],
        "results": results or {},
    }
    path = out_dir / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, default=_json_default))
    return path


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def load_manifest(path) -> dict:
    m = json.loads(Path(path).read_text())
    if config_hash(m["config"]) != m["config_hash"]:
        raise ValueError(f"{path}: config hash mismatch")
    return m
