"""Spherical-earth distance and local planar coordinate helpers."""

from __future__ import annotations

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

# Meters per degree of latitude on the sphere (R * pi / 180).
M_PER_DEG_LAT = EARTH_RADIUS_M * np.pi / 180.0


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters between two lat/lon points (degrees).

    Accepts scalars or numpy arrays (broadcast elementwise).
    """
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=float))
                              for v in (lat1, lon1, lat2, lon2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    c = 2.0 * np.arctan2(np.sqrt(a), np.sqrt(1.0 - a))
    d = EARTH_RADIUS_M * c
    return float(d) if np.ndim(d) == 0 else d


def meters_per_deg_lon(lat_deg: float) -> float:
    """Local east-west scale at the given latitude."""
    return M_PER_DEG_LAT * float(np.cos(np.radians(lat_deg)))


def local_xy(lat, lon, ref_lat: float, ref_lon: float, scale_lat: float | None = None):
    """Equirectangular projection to meters east (x) / north (y) of a reference.

    `scale_lat` fixes the latitude used for the east-west scale; it defaults
    to `ref_lat`.  Passing a constant decouples the scale from the reference
    point, which makes the projection exactly translation-invariant.
    """
    if scale_lat is None:
        scale_lat = ref_lat
    x = (np.asarray(lon, dtype=float) - ref_lon) * meters_per_deg_lon(scale_lat)
    y = (np.asarray(lat, dtype=float) - ref_lat) * M_PER_DEG_LAT
    return x, y


def latlon_from_xy(x, y, anchor_lat: float, anchor_lon: float):
    """Inverse of :func:`local_xy` around an anchor (scale taken at the anchor)."""
    lat = anchor_lat + np.asarray(y, dtype=float) / M_PER_DEG_LAT
    lon = anchor_lon + np.asarray(x, dtype=float) / meters_per_deg_lon(anchor_lat)
    return lat, lon
