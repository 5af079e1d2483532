"""Station data onto a regular grid by inverse distance weighting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np

__all__ = ["StationRecord", "read_stations", "idw_grid"]


@dataclass(frozen=True)
class StationRecord:
    x: float
    y: float
    value: float


def read_stations(source) -> List[StationRecord]:
    """Parse ``x,y,value`` rows; a header line is skipped if present."""
    text = Path(source).read_text() if not (isinstance(source, str) and "\n" in source) else source
    out = []
    for row in csv.reader(io.StringIO(text)):
        if not row or not "".join(row).strip():
            continue
        try:
            x, y, v = (float(c) for c in row[:3])
        except ValueError:
            if not out:
                continue  # header
            raise
        if not (np.isfinite(x) and np.isfinite(y)):
            raise ValueError(f"non-finite station coordinates in row {row!r}")
        out.append(StationRecord(x, y, v))
    return out


def idw_grid(stations: Sequence[StationRecord], nx: int, ny: int, bbox, power: float = 2.0):
    """Interpolate station values onto an ``ny x nx`` grid.

    Nodes span ``bbox = (xmin, xmax, ymin, ymax)`` inclusively; row ``i`` of
    the result sits at the ``i``-th y node.  Weights are ``d**-power``; a node
    that coincides with a station takes that station's value.
    """
    if nx < 1 or ny < 1:
        raise ValueError("grid dimensions must be >= 1")
    if not stations:
        raise ValueError("no stations to interpolate")
    xmin, xmax, ymin, ymax = (float(v) for v in bbox)
    pts = np.array([(s.x, s.y) for s in stations])
    vals = np.array([s.value for s in stations])
    inside = (pts[:, 0] >= xmin) & (pts[:, 0] <= xmax) & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax)
    if not inside.any():
        raise ValueError("no station lies inside the bounding box")
    gx = np.linspace(xmin, xmax, nx)
    gy = np.linspace(ymin, ymax, ny)
    nodes_x, nodes_y = np.meshgrid(gx, gy)
    dist = np.hypot(nodes_x[..., None] - pts[:, 0], nodes_y[..., None] - pts[:, 1])
    hit = dist == 0.0
    with np.errstate(divide="ignore"):
        w = np.where(hit, 0.0, dist ** -float(power))
    out = (w * vals).sum(axis=-1) / np.where(w.sum(axis=-1) > 0, w.sum(axis=-1), 1.0)
    exact = hit.any(axis=-1)
    if exact.any():
        first = hit.argmax(axis=-1)
        out = np.where(exact, vals[first], out)
    return out
