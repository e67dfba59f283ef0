"""Test fields, gridded-data ingestion, and predictive scoring."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import MeshFormatError, ModelError


def atomic_write_text(path, text: str) -> None:
    """Write a file atomically: temp file in the target directory + rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- built-in test fields ----------------------------------------------


def franke_3d(x, y, z, ax: float = 0.4, ay: float = 0.4, az: float = 1.0):
    """Three-dimensional Franke function on the unit cube.

    Four exponential bumps with per-axis stretch coefficients; smooth
    and mostly within (0, 1.3) on its domain.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    t1 = 0.75 * np.exp(
        -((ax * (9 * x - 2)) ** 2 + (ay * (9 * y - 2)) ** 2 + (az * (9 * z - 2)) ** 2)
        / 4.0
    )
    t2 = 0.75 * np.exp(
        -((ax * (9 * x + 1)) ** 2) / 49.0
        - ((ay * (9 * y + 1)) ** 2) / 10.0
        - ((az * (9 * z + 1)) ** 2) / 10.0
    )
    t3 = 0.5 * np.exp(
        -((ax * (9 * x - 7)) ** 2 + (ay * (9 * y - 3)) ** 2 + (az * (9 * z - 5)) ** 2)
        / 4.0
    )
    t4 = 0.2 * np.exp(
        -((ax * (9 * x - 4)) ** 2 + (ay * (9 * y - 7)) ** 2 + (az * (9 * z - 5)) ** 2)
    )
    return t1 + t2 + t3 - t4


def franke_cylinder(theta, z):
    """Franke field on the unit-radius, height-20 cylinder.

    The cylinder point (cos theta, sin theta, z) is mapped into the unit
    cube via ((x+1)/2, (y+1)/2, z/20).  ``z`` must lie in [0, 20].
    """
    theta = np.asarray(theta, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0.0) or np.any(z > 20.0):
        raise ModelError("cylinder height coordinate must lie in [0, 20]")
    x3, y3 = np.cos(theta), np.sin(theta)
    return franke_3d((x3 + 1.0) / 2.0, (y3 + 1.0) / 2.0, z / 20.0)


def franke_sphere(points):
    """Franke field on the unit sphere via the cube map ((c+1)/2 per axis)."""
    p = np.asarray(points, dtype=np.float64)
    r = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(r - 1.0) > 1e-6):
        raise ModelError("franke_sphere expects points on the unit sphere")
    return franke_3d((p[..., 0] + 1) / 2, (p[..., 1] + 1) / 2, (p[..., 2] + 1) / 2)


# -- gridded CSV ingestion ----------------------------------------------


@dataclass(frozen=True, eq=False)
class GriddedField:
    """Regular latitude-longitude grid of values with a missing-data mask."""

    lats: np.ndarray
    lons: np.ndarray
    values: np.ndarray  # (nlat, nlon)
    mask: np.ndarray  # True where missing

    def sample_nearest(self, lat: float, lon: float) -> float:
        """Value of the nearest grid cell; nan when that cell is missing."""
        i = int(np.argmin(np.abs(self.lats - lat)))
        j = int(np.argmin(np.abs(self.lons - lon)))
        return math.nan if self.mask[i, j] else float(self.values[i, j])

    def mean(self) -> float:
        return float(self.values[~self.mask].mean())


def load_gridded_csv(path) -> GriddedField:
    """Read a ``lat,lon,value`` CSV into a regular grid.

    The grid axes are the sorted unique coordinates.  Empty value cells
    and absent (lat, lon) pairs are masked; duplicate pairs are
    rejected with their line number.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MeshFormatError("empty gridded file") from None
        if header != ["lat", "lon", "value"]:
            raise MeshFormatError("gridded header must be 'lat,lon,value'")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            try:
                lat, lon = float(row[0]), float(row[1])
                raw = row[2].strip() if len(row) > 2 else ""
                val = float(raw) if raw else math.nan
            except (IndexError, ValueError):
                raise MeshFormatError(f"malformed gridded row at line {lineno}") from None
            entries.append((lineno, lat, lon, val))
    lats = np.unique([e[1] for e in entries])
    lons = np.unique([e[2] for e in entries])
    values = np.full((lats.size, lons.size), math.nan)
    seen = np.zeros(values.shape, dtype=bool)
    for lineno, lat, lon, val in entries:
        i = int(np.searchsorted(lats, lat))
        j = int(np.searchsorted(lons, lon))
        if seen[i, j]:
            raise MeshFormatError(f"duplicate (lat, lon) pair at line {lineno}")
        seen[i, j] = True
        values[i, j] = val
    mask = ~np.isfinite(values)
    return GriddedField(lats, lons, values, mask)


def save_gridded_csv(field: GriddedField, path) -> None:
    """Write a grid back to ``lat,lon,value`` rows (missing cells empty)."""
    buf = io.StringIO()
    buf.write("lat,lon,value\n")
    for i, lat in enumerate(field.lats):
        for j, lon in enumerate(field.lons):
            val = "" if field.mask[i, j] else f"{field.values[i, j]:.17g}"
            buf.write(f"{lat:.17g},{lon:.17g},{val}\n")
    atomic_write_text(path, buf.getvalue())


# -- predictive scoring --------------------------------------------------


def predictive_score(y_hat, var_hat, y_true, convention: str = "paper"):
    """Pointwise predictive score; larger is better.

    ``paper`` uses -((y_hat - y_true) / var)^2 - log(var) with the
    predictive variance inside the square, kept verbatim from the source
    convention; ``gaussian`` uses the log-density form
    -(y_hat - y_true)^2 / var - log(var).
    """
    y_hat = np.asarray(y_hat, dtype=np.float64)
    var_hat = np.asarray(var_hat, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if np.any(var_hat <= 0.0):
        raise ModelError("predictive variance must be positive")
    if convention == "paper":
        return -(((y_hat - y_true) / var_hat) ** 2) - np.log(var_hat)
    if convention == "gaussian":
        return -((y_hat - y_true) ** 2) / var_hat - np.log(var_hat)
    raise ModelError(f"unknown score convention: {convention!r}")
