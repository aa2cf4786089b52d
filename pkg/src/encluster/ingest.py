"""Trip-log parsing, bounding-box filtering and uniform resampling.

Trip-log CSV schema (UTF-8, header required):

    trip_id,vehicle_id,t,lat,lon,speed,heading

with ``t`` in seconds, ``lat``/``lon`` in decimal degrees, ``speed`` in m/s
and ``heading`` in degrees [0, 360).  One row per sample.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, InsufficientDataError, ValidationError

log = logging.getLogger(__name__)

TRIP_LOG_COLUMNS = ("trip_id", "vehicle_id", "t", "lat", "lon", "speed", "heading")


@dataclass(frozen=True)
class GeoBBox:
    """Closed lon/lat rectangle used to restrict the study area."""

    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float

    def __post_init__(self):
        if not self.lon_min < self.lon_max:
            raise ValidationError("bbox: lon_min must be < lon_max")
        if not self.lat_min < self.lat_max:
            raise ValidationError("bbox: lat_min must be < lat_max")

    def contains(self, lat, lon):
        """Elementwise membership mask (closed bounds)."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        return ((lat >= self.lat_min) & (lat <= self.lat_max)
                & (lon >= self.lon_min) & (lon <= self.lon_max))

    @property
    def center_lat(self) -> float:
        return 0.5 * (self.lat_min + self.lat_max)


#: Urban study area the pipeline defaults to.
DEFAULT_BBOX = GeoBBox(lon_min=-83.82, lon_max=-83.64, lat_min=42.22, lat_max=42.34)


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    lat: float
    lon: float
    speed: float
    heading: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One vehicle's GPS trace, stored as parallel float64 arrays."""

    trip_id: str
    vehicle_id: str
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    speed: np.ndarray
    heading: np.ndarray

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @property
    def key(self) -> tuple[str, str]:
        return (self.trip_id, self.vehicle_id)

    def point(self, i: int) -> TrajectoryPoint:
        return TrajectoryPoint(float(self.t[i]), float(self.lat[i]),
                               float(self.lon[i]), float(self.speed[i]),
                               float(self.heading[i]))

    @property
    def points(self) -> list[TrajectoryPoint]:
        return [self.point(i) for i in range(len(self))]

    def slice(self, start: int, stop: int) -> "Trajectory":
        """Sub-trajectory over [start, stop) keeping identifiers."""
        return Trajectory(self.trip_id, self.vehicle_id,
                          self.t[start:stop].copy(), self.lat[start:stop].copy(),
                          self.lon[start:stop].copy(), self.speed[start:stop].copy(),
                          self.heading[start:stop].copy())


def make_trajectory(trip_id: str, vehicle_id: str, t, lat, lon, speed, heading,
                    check: bool = True) -> Trajectory:
    """Build a Trajectory from array-likes, validating the basic invariants."""
    arrays = [np.asarray(a, dtype=np.float64) for a in (t, lat, lon, speed, heading)]
    n = arrays[0].shape[0]
    if any(a.shape != (n,) for a in arrays):
        raise ValidationError(f"trajectory {trip_id}/{vehicle_id}: column lengths differ")
    if check and n:
        t_arr, lat_arr, lon_arr = arrays[0], arrays[1], arrays[2]
        if np.any(np.diff(t_arr) <= 0):
            raise ValidationError(
                f"trajectory {trip_id}/{vehicle_id}: timestamps not strictly increasing")
        if np.any((lat_arr < -90) | (lat_arr > 90)):
            raise ValidationError(f"trajectory {trip_id}/{vehicle_id}: latitude out of range")
        if np.any((lon_arr < -180) | (lon_arr > 180)):
            raise ValidationError(f"trajectory {trip_id}/{vehicle_id}: longitude out of range")
    return Trajectory(trip_id, vehicle_id, *arrays)


def _parse_row(row: Sequence[str], line_no: int):
    if len(row) != len(TRIP_LOG_COLUMNS):
        raise FormatError(f"line {line_no}: expected {len(TRIP_LOG_COLUMNS)} fields, "
                          f"got {len(row)}")
    trip_id, vehicle_id = row[0], row[1]
    try:
        t, lat, lon, speed, heading = (float(v) for v in row[2:])
    except ValueError as exc:
        raise FormatError(f"line {line_no}: non-numeric field ({exc})") from None
    if not all(np.isfinite(v) for v in (t, lat, lon, speed, heading)):
        raise FormatError(f"line {line_no}: non-finite value")
    if not -90.0 <= lat <= 90.0:
        raise FormatError(f"line {line_no}: latitude {lat} out of [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise FormatError(f"line {line_no}: longitude {lon} out of [-180, 180]")
    if speed < 0.0:
        raise FormatError(f"line {line_no}: negative speed {speed}")
    return trip_id, vehicle_id, t, lat, lon, speed, heading % 360.0


def parse_trip_log(source, strict: bool = False) -> list[Trajectory]:
    """Parse a trip-log CSV into one Trajectory per (trip_id, vehicle_id).

    `source` is a path or an open text stream.  Points are sorted by
    timestamp within each trajectory.  Malformed rows are skipped with a
    logged warning carrying the line number; with ``strict=True`` the first
    bad row aborts the parse instead.  A missing or wrong header always
    raises :class:`FormatError`.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return parse_trip_log(fh, strict=strict)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty file: missing header") from None
    if tuple(h.strip() for h in header) != TRIP_LOG_COLUMNS:
        raise FormatError(f"bad header {header!r}, expected "
                          f"{','.join(TRIP_LOG_COLUMNS)}")

    groups: dict[tuple[str, str], list[tuple]] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            trip_id, vehicle_id, t, lat, lon, speed, heading = _parse_row(row, line_no)
        except FormatError as exc:
            if strict:
                raise
            log.warning("skipping bad trip-log row: %s", exc)
            continue
        groups.setdefault((trip_id, vehicle_id), []).append(
            (t, lat, lon, speed, heading, line_no))

    trajectories = []
    for key in sorted(groups):
        rows = sorted(groups[key], key=lambda r: r[0])
        deduped = []
        for r in rows:
            if deduped and r[0] == deduped[-1][0]:
                msg = f"line {r[5]}: duplicate timestamp {r[0]} for {key[0]}/{key[1]}"
                if strict:
                    raise FormatError(msg)
                log.warning("skipping bad trip-log row: %s", msg)
                continue
            deduped.append(r)
        cols = list(zip(*deduped))[:5]
        trajectories.append(make_trajectory(key[0], key[1], *cols, check=False))
    return trajectories


def write_trip_log(trajectories: Iterable[Trajectory], path) -> None:
    """Write trajectories in the trip-log CSV schema.

    Output is canonical (trajectories sorted by (trip_id, vehicle_id), points
    by time, floats in shortest round-trip form) so parse -> write is stable.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_trip_log(trajectories))


def serialize_trip_log(trajectories: Iterable[Trajectory]) -> str:
    buf = io.StringIO()
    ordered = sorted(trajectories, key=lambda tr: tr.key)
    buf.write(",".join(TRIP_LOG_COLUMNS) + "\n")
    for tr in ordered:
        cols = [a.tolist() for a in (tr.t, tr.lat, tr.lon, tr.speed, tr.heading)]
        for t, lat, lon, speed, heading in zip(*cols):
            buf.write(f"{tr.trip_id},{tr.vehicle_id},{t!r},{lat!r},"
                      f"{lon!r},{speed!r},{heading!r}\n")
    return buf.getvalue()


def filter_bbox(traj: Trajectory, bbox: GeoBBox) -> Trajectory:
    """Keep exactly the points inside the closed bbox, order preserved."""
    mask = bbox.contains(traj.lat, traj.lon)
    return Trajectory(traj.trip_id, traj.vehicle_id, traj.t[mask], traj.lat[mask],
                      traj.lon[mask], traj.speed[mask], traj.heading[mask])


def split_gaps(traj: Trajectory, max_gap_s: float = 1.0) -> list[Trajectory]:
    """Split a trajectory wherever consecutive samples are more than
    ``max_gap_s`` apart.  Sensor dropouts become segment boundaries instead
    of being interpolated over."""
    if len(traj) == 0:
        return []
    breaks = np.flatnonzero(np.diff(traj.t) > max_gap_s + 1e-9)
    if breaks.size == 0:
        return [traj]
    bounds = [0, *(breaks + 1), len(traj)]
    return [traj.slice(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]


def _interp_heading(t_new: np.ndarray, t_old: np.ndarray, heading: np.ndarray) -> np.ndarray:
    # Unwrap so interpolation follows the shortest arc across the 0/360 seam.
    unwrapped = np.unwrap(heading, period=360.0)
    return np.interp(t_new, t_old, unwrapped) % 360.0


def resample_uniform(traj: Trajectory, rate_hz: float, align: str = "start") -> Trajectory:
    """Resample onto an arithmetic grid with step 1/rate_hz inside [t0, t_last].

    lat/lon/speed are linearly interpolated; heading is interpolated on the
    circle (shortest arc).  ``align="start"`` anchors the grid at the first
    sample; ``align="epoch"`` anchors it at integer multiples of the step so
    grids from different trajectories share tick phase (required before
    cross-trajectory proximity matching).
    """
    if rate_hz <= 0:
        raise ValidationError("rate_hz must be positive")
    if len(traj) < 2:
        raise InsufficientDataError(
            f"trajectory {traj.trip_id}/{traj.vehicle_id}: need >= 2 points to resample")
    t0, t1 = float(traj.t[0]), float(traj.t[-1])
    if align == "start":
        n_steps = int(np.floor((t1 - t0) * rate_hz + 1e-9))
        t_new = t0 + np.arange(n_steps + 1, dtype=np.float64) / rate_hz
    elif align == "epoch":
        first = int(np.ceil(t0 * rate_hz - 1e-9))
        last = int(np.floor(t1 * rate_hz + 1e-9))
        if last < first:
            raise InsufficientDataError(
                f"trajectory {traj.trip_id}/{traj.vehicle_id}: span shorter than one step")
        t_new = np.arange(first, last + 1, dtype=np.float64) / rate_hz
    else:
        raise ValidationError(f"unknown align mode {align!r}")

    return Trajectory(
        traj.trip_id, traj.vehicle_id, t_new,
        np.interp(t_new, traj.t, traj.lat),
        np.interp(t_new, traj.t, traj.lon),
        np.interp(t_new, traj.t, traj.speed),
        _interp_heading(t_new, traj.t, traj.heading),
    )
