"""Deterministic report emission: canonical JSON/CSV, hashes, atomic writes.

Reports embed the resolved configuration and a content hash so a run
can be reproduced and verified byte for byte; no timestamps or other
nondeterministic data are ever written.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _canonical(obj):
    """Recursively convert numpy scalars/arrays for stable JSON dumps."""
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canonical(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def write_json_report(path, payload, config) -> str:
    """Emit ``{config, payload, content_hash}`` as canonical JSON."""
    body = {"config": _canonical(config), "payload": _canonical(payload)}
    digest = hashlib.sha256(
        json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    body["content_hash"] = digest
    atomic_write_text(path, json.dumps(body, sort_keys=True, indent=2) + "\n")
    return digest


def write_csv_report(path, header: Sequence[str], rows: Iterable[Sequence], config) -> str:
    """CSV with the resolved config and content hash in comment lines."""
    lines = []
    for row in rows:
        cells = []
        for v in row:
            if v is None:
                cells.append("")
            elif isinstance(v, (float, np.floating)):
                cells.append(repr(float(v)))
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    config_line = json.dumps(_canonical(config), sort_keys=True, separators=(",", ":"))
    data = ",".join(header) + "\n" + "\n".join(lines) + ("\n" if lines else "")
    digest = hashlib.sha256((config_line + "\n" + data).encode()).hexdigest()
    text = f"# config: {config_line}\n# content_hash: {digest}\n" + data
    atomic_write_text(path, text)
    return digest


def read_trajectory_csv(path):
    """Parse a trajectory CSV written by the evolve command."""
    times = []
    norms = {}
    with open(path, encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                for key in header[1:]:
                    norms[key] = []
                continue
            cells = line.split(",")
            times.append(float(cells[0]))
            for key, cell in zip(header[1:], cells[1:]):
                norms[key].append(float(cell))
    return np.asarray(times), {k: np.asarray(v) for k, v in norms.items()}
