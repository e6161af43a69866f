"""The nullcone/1 cone-data format.

A data set is a JSON manifest plus a sibling binary file.  For every field,
every frame component (C order over the index axes) and every t-node, the
binary file holds the spectral coefficients in l-major order (m = -l..l) as
little-endian float64 (re, im) pairs.  The manifest records the chart,
s0, m, the sphere grid, the t-nodes and the byte offset of each field.
"""
from __future__ import annotations

import json
import os

import numpy as np

from . import tensor as tn
from .foliation import HorizontalField, TimeGrid
from .model import (
    PHYSICAL_FIELDS,
    RENORMALIZED_FIELDS,
    AffineChart,
    PhysicalConeData,
    RenormalizedConeData,
)
from .spectral import SphereGrid

FORMAT = "nullcone/1"


class FormatError(ValueError):
    pass


def data_path(manifest_path):
    root, _ = os.path.splitext(manifest_path)
    return root + ".bin"


def _fields(data):
    if isinstance(data, PhysicalConeData):
        return "physical", data.items()
    return "renormalized", data.items(with_derived=True)


def save(data, path):
    """Write manifest ``path`` and its binary block file."""
    chart, items = _fields(data)
    grid, time = data.grid, data.time
    entries = []
    blocks = []
    offset = 0
    for name, f in items.items():
        c = np.ascontiguousarray(f.coeffs(), dtype="<c16")
        raw = c.view("<f8").astype("<f8").tobytes()
        entries.append({"name": name, "kinds": f.kinds, "offset": offset, "nbytes": len(raw)})
        blocks.append(raw)
        offset += len(raw)
    manifest = {
        "format": FORMAT,
        "chart": chart,
        "s0": data.chart.s0,
        "m": data.chart.m,
        "lmax": grid.lmax,
        "n_theta": grid.n_theta,
        "n_phi": grid.n_phi,
        "fd_order": time.order,
        "t_nodes": [float(x) for x in time.nodes],
        "data": os.path.basename(data_path(path)),
        "fields": entries,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(data_path(path), "wb") as fh:
        for b in blocks:
            fh.write(b)


def load(path):
    """Read a nullcone/1 data set; raises FormatError on malformed input."""
    try:
        with open(path) as fh:
            man = json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(man, dict) or man.get("format") != FORMAT:
        raise FormatError(f"{path} is not a {FORMAT} manifest")
    try:
        grid = SphereGrid(int(man["lmax"]), int(man["n_theta"]), int(man["n_phi"]))
        time = TimeGrid(np.asarray(man["t_nodes"], dtype=float), order=int(man.get("fd_order", 6)))
        chart = AffineChart(float(man["s0"]), float(man["m"]))
        bin_path = os.path.join(os.path.dirname(os.path.abspath(path)), man["data"])
        with open(bin_path, "rb") as fh:
            raw = fh.read()
        fields = {}
        for e in man["fields"]:
            kinds = e["kinds"]
            shape = (2,) * len(kinds) + (len(time), grid.ncoef)
            nbytes = int(np.prod(shape)) * 16
            off = int(e["offset"])
            if int(e["nbytes"]) != nbytes or off < 0 or off + nbytes > len(raw):
                raise FormatError(f"field {e['name']} is truncated or has the wrong size")
            c = np.frombuffer(raw, dtype="<f8", count=nbytes // 8, offset=off)
            c = c.view("<c16").reshape(shape).astype(complex)
            fields[e["name"]] = HorizontalField(tn.from_coeffs(c, kinds, grid), kinds, time, grid)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise FormatError(f"malformed data set {path}: {exc}") from exc
    try:
        if man["chart"] == "physical":
            return PhysicalConeData(chart=chart, **{k: fields[k] for k in PHYSICAL_FIELDS})
        if man["chart"] == "renormalized":
            extra = {"dtrH": fields["dtrH"]} if "dtrH" in fields else {}
            return RenormalizedConeData(chart=chart, **{k: fields[k] for k in RENORMALIZED_FIELDS},
                                        **extra)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"incomplete data set {path}: {exc}") from exc
    raise FormatError(f"unknown chart {man['chart']!r}")
