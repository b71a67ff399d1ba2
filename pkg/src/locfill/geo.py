"""Geodesic distance and rectangular grid indexing over a city bounding box.

Cells tile the bounding box on a locally flat (equirectangular) projection:
one degree of latitude is a fixed number of miles, one degree of longitude
is scaled by the cosine of the bbox center latitude.  At city scale the
distortion is far below the cell size, which is all the grid is used for.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

# Fixed for reproducibility; any constant radius serves the speed filter
# and the distance power law equally well.
EARTH_RADIUS_MILES = 3958.8

MILES_PER_DEG_LAT = 2.0 * math.pi * EARTH_RADIUS_MILES / 360.0

# Guards ceil() against float dust when an extent is an exact multiple of
# the cell size (29.000000000000004 must still give 29 rows, not 30).
_CEIL_EPS = 1e-9


class GridError(ValueError):
    """Degenerate bounding box or invalid grid parameters."""


class OutsideGridError(ValueError):
    """Point does not fall inside the grid's bounding box."""


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84-style coordinate pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class GridSpec:
    """A rectangular grid of square cells covering a bounding box.

    Cell indices are dense in ``[0, n_rows * n_cols)`` and laid out
    row-major: ``index = row * n_cols + col`` with row 0 at ``min_lat``.
    """

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float
    cell_size_miles: float
    n_rows: int
    n_cols: int

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def center_lat(self) -> float:
        return 0.5 * (self.min_lat + self.max_lat)

    @property
    def miles_per_deg_lon(self) -> float:
        return MILES_PER_DEG_LAT * math.cos(math.radians(self.center_lat))

    def to_dict(self) -> dict:
        return {
            "bbox": [self.min_lat, self.min_lon, self.max_lat, self.max_lon],
            "cell_size_miles": self.cell_size_miles,
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        bbox = tuple(d["bbox"])
        spec = build_grid_spec(bbox, d["cell_size_miles"])
        if "n_rows" in d and (spec.n_rows, spec.n_cols) != (d["n_rows"], d["n_cols"]):
            raise GridError(
                f"stored grid shape {d['n_rows']}x{d['n_cols']} does not match "
                f"recomputed {spec.n_rows}x{spec.n_cols}"
            )
        return spec

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def haversine_miles(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in miles between two points."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * math.asin(min(1.0, math.sqrt(h)))


def build_grid_spec(bbox: tuple[float, float, float, float], cell_size_miles: float) -> GridSpec:
    """Build a grid over ``bbox = (min_lat, min_lon, max_lat, max_lon)``.

    Row and column counts are ceilings of the bbox extent (in great-circle
    miles at the center latitude) over the cell size, so the cells always
    cover the full box.
    """
    min_lat, min_lon, max_lat, max_lon = bbox
    if cell_size_miles <= 0:
        raise GridError(f"cell size must be positive, got {cell_size_miles}")
    if not (max_lat > min_lat and max_lon > min_lon):
        raise GridError(f"degenerate bbox {bbox}")
    GeoPoint(min_lat, min_lon)
    GeoPoint(max_lat, max_lon)

    center_lat = 0.5 * (min_lat + max_lat)
    lat_extent = (max_lat - min_lat) * MILES_PER_DEG_LAT
    lon_extent = (max_lon - min_lon) * MILES_PER_DEG_LAT * math.cos(math.radians(center_lat))
    if lon_extent <= 0:
        raise GridError(f"bbox {bbox} collapses at latitude {center_lat}")
    n_rows = max(1, math.ceil(lat_extent / cell_size_miles - _CEIL_EPS))
    n_cols = max(1, math.ceil(lon_extent / cell_size_miles - _CEIL_EPS))
    return GridSpec(min_lat, min_lon, max_lat, max_lon, cell_size_miles, n_rows, n_cols)


def assign_grid(p: GeoPoint, spec: GridSpec) -> int:
    """Map a point inside the bbox to its cell index.

    Cells are half-open along both axes; the bbox max edges are closed so
    the far corner belongs to the last cell.
    """
    if not (spec.min_lat <= p.lat <= spec.max_lat and spec.min_lon <= p.lon <= spec.max_lon):
        raise OutsideGridError(f"point ({p.lat}, {p.lon}) outside grid bbox")
    row = int((p.lat - spec.min_lat) * MILES_PER_DEG_LAT / spec.cell_size_miles)
    col = int((p.lon - spec.min_lon) * spec.miles_per_deg_lon / spec.cell_size_miles)
    row = min(row, spec.n_rows - 1)
    col = min(col, spec.n_cols - 1)
    return row * spec.n_cols + col


def cell_bounds(spec: GridSpec, cell: int) -> tuple[float, float, float, float]:
    """Footprint of a cell as ``(min_lat, min_lon, max_lat, max_lon)``."""
    if not 0 <= cell < spec.n_cells:
        raise GridError(f"cell {cell} outside [0, {spec.n_cells})")
    row, col = divmod(cell, spec.n_cols)
    dlat = spec.cell_size_miles / MILES_PER_DEG_LAT
    dlon = spec.cell_size_miles / spec.miles_per_deg_lon
    lat0 = spec.min_lat + row * dlat
    lon0 = spec.min_lon + col * dlon
    return (lat0, lon0, lat0 + dlat, lon0 + dlon)


def cell_center(spec: GridSpec, cell: int) -> GeoPoint:
    lat0, lon0, lat1, lon1 = cell_bounds(spec, cell)
    return GeoPoint(0.5 * (lat0 + lat1), 0.5 * (lon0 + lon1))


def cell_distance_miles(spec: GridSpec, a: int, b: int) -> float:
    """Distance between two cell centers."""
    return haversine_miles(cell_center(spec, a), cell_center(spec, b))


def square_bbox(center: GeoPoint, side_miles: float) -> tuple[float, float, float, float]:
    """A bbox of the given side length centered on a point.

    The longitude span is chosen so the box is ``side_miles`` wide at the
    center latitude, matching the projection used by :func:`build_grid_spec`.
    """
    if side_miles <= 0:
        raise GridError(f"side must be positive, got {side_miles}")
    half_lat = 0.5 * side_miles / MILES_PER_DEG_LAT
    half_lon = 0.5 * side_miles / (MILES_PER_DEG_LAT * math.cos(math.radians(center.lat)))
    return (center.lat - half_lat, center.lon - half_lon,
            center.lat + half_lat, center.lon + half_lon)
