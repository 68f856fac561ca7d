"""Loading of bundled and user-supplied data files.

Network descriptions are YAML documents with tabular sections (see
``data/rts/network.yaml``); trace libraries are CSV files with one column
per year and one row per hour; fleets and thermal portfolios are small CSV
tables.  ``data_dir`` resolution order: explicit argument, the
``GRIDMC_DATA_DIR`` environment variable, then the packaged data directory.
"""

import hashlib
import os
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .composite import NetworkDescription
from .sampling import ThermalPortfolio
from .storage import StorageFleet, StorageUnit

__all__ = [
    "bundled_data_dir",
    "data_hashes",
    "load_fleet",
    "load_network",
    "load_portfolio",
    "load_trace_library",
    "resolve_data_dir",
]


def bundled_data_dir() -> Path:
    return Path(__file__).resolve().parent / "data"


def resolve_data_dir(explicit: Optional[str] = None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get("GRIDMC_DATA_DIR")
    if env:
        return Path(env)
    return bundled_data_dir()


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ValueError(f"{context}: missing required field {key!r}")
    return mapping[key]


def load_network(path, rating_scale: float = 1.0) -> NetworkDescription:
    """Load a composite-system description from YAML plus its demand CSV."""
    path = Path(path)
    with open(path) as f:
        doc = yaml.safe_load(f)
    context = str(path)
    version = _require(doc, "schema_version", context)
    if version != 1:
        raise ValueError(f"{context}: unsupported schema_version {version}")

    buses = list(_require(doc, "buses", context))
    bus_index = {int(b): i for i, b in enumerate(buses)}
    loads = {int(k): float(v) for k, v in _require(doc, "bus_load_mw", context).items()}
    total_load = sum(loads.values())
    weights = np.zeros(len(buses))
    for bus, mw in loads.items():
        if bus not in bus_index:
            raise ValueError(f"{context}: load at unknown bus {bus}")
        weights[bus_index[bus]] = mw / total_load

    gens = _require(doc, "generators", context)
    lines = _require(doc, "lines", context)
    trace_file = path.parent / _require(doc, "demand_trace", context)
    trace = np.loadtxt(trace_file, delimiter=",", skiprows=1, dtype=np.float64)

    return NetworkDescription(
        n_nodes=len(buses),
        gen_node=[bus_index[int(g["bus"])] for g in gens],
        gen_capacity=[float(g["capacity_mw"]) for g in gens],
        gen_availability=[float(g["availability"]) for g in gens],
        line_from=[bus_index[int(l["from_bus"])] for l in lines],
        line_to=[bus_index[int(l["to_bus"])] for l in lines],
        line_reactance=[float(l["reactance_pu"]) for l in lines],
        line_rating=[float(l["rating_mw"]) for l in lines],
        line_availability=[float(l["availability"]) for l in lines],
        nodal_weights=weights,
        demand_trace=trace,
        rating_scale=rating_scale,
        name=str(doc.get("name", path.stem)),
    )


def load_trace_library(path, hours: Optional[int] = None) -> np.ndarray:
    """Load a (hours, years) trace library from CSV, one column per year."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    if hours is not None and arr.shape[0] != hours:
        raise ValueError(f"{path}: expected {hours} rows, found {arr.shape[0]}")
    return arr


def load_portfolio(path) -> ThermalPortfolio:
    """Load conventional units from CSV columns capacity_mw, mttf_h, mttr_h."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    if arr.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns (capacity_mw, mttf_h, mttr_h)")
    return ThermalPortfolio(capacity=arr[:, 0], mttf=arr[:, 1], mttr=arr[:, 2])


def load_fleet(path) -> StorageFleet:
    """Load storage units from CSV columns p_bar_mw, e_bar_mwh."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    if arr.shape[1] != 2:
        raise ValueError(f"{path}: expected 2 columns (p_bar_mw, e_bar_mwh)")
    return StorageFleet([StorageUnit(p_bar=row[0], e_bar=row[1]) for row in arr])


def data_hashes(paths: Sequence) -> dict:
    """SHA-256 of each data file, for the provenance block of result records."""
    out = {}
    for p in paths:
        p = Path(p)
        out[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out
