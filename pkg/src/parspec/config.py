"""Run configuration: TOML tables, fail-closed key validation."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigError

#: Allowed keys per table.  Unknown tables or keys are rejected.
SCHEMA: Dict[str, Dict[str, type]] = {
    "run": {"command": str, "seed": int, "out_dir": str, "threads": int},
    "model": {
        "system": str,
        "n": int,
        "alpha": float,
        "beta": float,
        "gamma": float,
        "mu": float,
        "mu_prime": float,
    },
    "grid": {"n": int, "box_length": object, "points_per_dim": object},
    "cutoff": {"r1_prime": float, "r_infty_prime": float, "mollifier_width": float},
    "contour": {
        "t": float,
        "r_max": float,
        "nodes_per_branch": int,
        "arc_nodes": int,
        "quadrature": str,
        "richardson": int,
        "times": object,
        "xi_mags": object,
        "compare_propagator": bool,
    },
    "spectrum": {"xi_min": float, "xi_max": float, "count": int, "scale": str},
    "scan": {
        "families": object,
        "c0": float,
        "a_count": int,
        "xi_count": int,
        "xi_min": float,
        "r_infty": float,
        "refine": bool,
    },
    "profile": {"epsilon": float, "p0": float, "sobolev_order": int},
    "evolve": {
        "mode": str,
        "data": str,
        "width": float,
        "normalize_p": float,
        "dt": float,
        "t_min": float,
        "t_max": float,
        "samples": int,
        "epsilon": float,
        "energy_s": int,
        "record_physical": bool,
        "mode_index": object,
        "data_seed": int,
    },
    "fit": {"input": str, "norms": object, "window": object, "kind": str},
    "norms": {"trials": int, "checks": object},
    "counterexample": {
        "counts": object,
        "separation": float,
        "bump_radius": float,
        "dx": float,
        "weighted_m1": float,
        "weighted_grid_points": int,
        "weighted_box": float,
    },
}


@dataclass
class RunConfig:
    """Validated configuration tables plus run identity (seed, outputs)."""

    tables: Dict[str, Dict[str, Any]]
    path: str

    @property
    def seed(self) -> int:
        return int(self.table("run").get("seed", 0))

    def table(self, name: str) -> Dict[str, Any]:
        return self.tables.get(name, {})

    def get(self, table: str, key: str, default=None):
        return self.table(table).get(key, default)

    def require(self, table: str, key: str):
        try:
            return self.tables[table][key]
        except KeyError:
            raise ConfigError(f"missing required key [{table}] {key}") from None

    def to_jsonable(self) -> dict:
        return {"path": self.path, "tables": self.tables}


def validate_tables(tables: Dict[str, Any]) -> None:
    for name, table in tables.items():
        if name not in SCHEMA:
            raise ConfigError(f"unknown config table [{name}]")
        if not isinstance(table, dict):
            raise ConfigError(f"[{name}] must be a table")
        allowed = SCHEMA[name]
        for key in table:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in table [{name}]")


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            tables = _toml.load(fh)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {p}: {exc}") from exc
    validate_tables(tables)
    return RunConfig(tables=tables, path=str(p))
