"""Labeled synthetic two-vehicle encounters.

Five scenario families are generated from simple planar geometry around an
anchor point, then converted to GPS coordinates with optional Gaussian
position noise:

* ``intersection``        - perpendicular straight paths crossing near the anchor
* ``opposite_direction``  - antiparallel paths on a common line
* ``bypass``              - one vehicle stationary (or slow), the other passing
                            within a 10-30 m lateral offset
* ``same_road``           - leader/follower with a 10-50 m gap, optional smooth
                            lane-change perturbation on the follower
* ``merge``               - two paths converging at <= 30 degrees, then sharing
                            a lane

Every generated encounter brings the vehicles within 100 m of each other and
spans at least 50 samples at 10 Hz.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .encounter import Encounter
from .errors import FormatError, ValidationError
from .geo import M_PER_DEG_LAT, latlon_from_xy, meters_per_deg_lon
from .ingest import DEFAULT_BBOX, GeoBBox, Trajectory

CATEGORIES = ("intersection", "opposite_direction", "bypass", "same_road", "merge")

RATE_HZ = 10.0


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters for one synthetic encounter.

    ``speed_range_mps`` is the speed range for vehicle A; vehicle B uses
    ``speed_range_b_mps`` when given, otherwise the same range.  A (0, 0)
    range pins the vehicle in place.
    """

    category: str
    duration_s: float
    speed_range_mps: tuple[float, float]
    gps_noise_m: float
    anchor: tuple[float, float]
    seed: int
    speed_range_b_mps: tuple[float, float] | None = None

    def validate(self, bbox: GeoBBox = DEFAULT_BBOX) -> None:
        if self.category not in CATEGORIES:
            raise ValidationError(f"category: unknown category {self.category!r}")
        if not self.duration_s >= 5.0:
            raise ValidationError(f"duration_s: must be >= 5.0, got {self.duration_s}")
        for name, rng_ in (("speed_range_mps", self.speed_range_mps),
                           ("speed_range_b_mps", self.speed_range_b_mps)):
            if rng_ is None:
                continue
            lo, hi = rng_
            if lo < 0 or hi < 0 or lo > hi:
                raise ValidationError(f"{name}: need 0 <= min <= max, got {rng_}")
        if self.gps_noise_m < 0:
            raise ValidationError(f"gps_noise_m: must be >= 0, got {self.gps_noise_m}")
        lat, lon = self.anchor
        if not (bbox.lat_min <= lat <= bbox.lat_max and bbox.lon_min <= lon <= bbox.lon_max):
            raise ValidationError(f"anchor: ({lat}, {lon}) outside study bbox")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed: must be an unsigned 64-bit integer, got {self.seed}")


def _dir(heading_deg: float) -> np.ndarray:
    # Compass convention: 0 deg = north, clockwise positive; x east, y north.
    rad = np.radians(heading_deg)
    return np.array([np.sin(rad), np.cos(rad)])


def _perp(heading_deg: float) -> np.ndarray:
    return _dir(heading_deg + 90.0)


def _draw_speed(rng: np.random.Generator, speed_range: tuple[float, float]) -> float:
    lo, hi = speed_range
    return float(lo) if hi == lo else float(rng.uniform(lo, hi))


def _paths(spec: ScenarioSpec, rng: np.random.Generator, t: np.ndarray):
    """Ideal planar paths (meters, anchor at origin) for vehicles A and B."""
    range_a = spec.speed_range_mps
    range_b = spec.speed_range_b_mps or spec.speed_range_mps
    heading = float(rng.uniform(0.0, 360.0))
    v_a = _draw_speed(rng, range_a)
    v_b = _draw_speed(rng, range_b)
    t_mid = float(t[-1]) / 2.0
    cat = spec.category

    if cat == "intersection":
        side = 1.0 if rng.random() < 0.5 else -1.0
        delay = float(rng.uniform(0.5, 2.0))
        head_b = (heading + side * 90.0) % 360.0
        pos_a = (t - t_mid)[:, None] * v_a * _dir(heading)
        pos_b = (t - t_mid - delay)[:, None] * v_b * _dir(head_b)
        return pos_a, pos_b, heading, head_b

    if cat == "opposite_direction":
        head_b = (heading + 180.0) % 360.0
        delay = float(rng.uniform(-1.0, 1.0))
        pos_a = (t - t_mid)[:, None] * v_a * _dir(heading)
        pos_b = (t - t_mid - delay)[:, None] * v_b * _dir(head_b)
        return pos_a, pos_b, heading, head_b

    if cat == "bypass":
        offset = float(rng.uniform(10.0, 30.0)) * (1.0 if rng.random() < 0.5 else -1.0)
        head_a = float(rng.uniform(0.0, 360.0))
        pos_b = (t - t_mid)[:, None] * v_b * _dir(heading)
        pos_a = offset * _perp(heading) + (t - t_mid)[:, None] * v_a * _dir(head_a)
        return pos_a, pos_b, head_a, heading

    if cat == "same_road":
        gap = float(rng.uniform(10.0, 50.0))
        pos_a = (t - t_mid)[:, None] * v_a * _dir(heading)
        pos_b = pos_a - gap * _dir(heading)
        if rng.random() < 0.5:
            side = 1.0 if rng.random() < 0.5 else -1.0
            amp = float(rng.uniform(2.5, 4.0)) * side
            t_s, t_e = 0.3 * t[-1], 0.7 * t[-1]
            progress = np.clip((t - t_s) / (t_e - t_s), 0.0, 1.0)
            lateral = amp * 0.5 * (1.0 - np.cos(np.pi * progress))
            pos_b = pos_b + lateral[:, None] * _perp(heading)
        return pos_a, pos_b, heading, heading

    if cat == "merge":
        side = 1.0 if rng.random() < 0.5 else -1.0
        angle = float(rng.uniform(10.0, 30.0)) * side
        gap = float(rng.uniform(10.0, 30.0))
        t_m = 0.6 * float(t[-1])
        pos_a = (t - t_m)[:, None] * v_a * _dir(heading)
        join = -gap * _dir(heading)
        before = (t - t_m)[:, None] * v_b * _dir(heading + angle)
        after = (t - t_m)[:, None] * v_b * _dir(heading)
        pos_b = join + np.where((t < t_m)[:, None], before, after)
        return pos_a, pos_b, heading, heading

    raise ValidationError(f"category: unknown category {cat!r}")


def _to_trajectory(trip_id: str, vehicle_id: str, t: np.ndarray, pos: np.ndarray,
                   fallback_heading: float, noise_m: float,
                   anchor: tuple[float, float], rng: np.random.Generator) -> Trajectory:
    dt = float(t[1] - t[0])
    vel = np.gradient(pos, dt, axis=0)
    speed = np.hypot(vel[:, 0], vel[:, 1])
    heading = np.degrees(np.arctan2(vel[:, 0], vel[:, 1])) % 360.0
    heading = np.where(speed < 1e-9, fallback_heading % 360.0, heading)

    noisy = pos
    if noise_m > 0:
        noisy = pos + rng.normal(0.0, noise_m, size=pos.shape)
    lat, lon = latlon_from_xy(noisy[:, 0], noisy[:, 1], anchor[0], anchor[1])
    return Trajectory(trip_id, vehicle_id, t.copy(), lat, lon, speed, heading)


def generate_encounter(spec: ScenarioSpec, trip_id: str | None = None,
                       t0_tick: int = 0, bbox: GeoBBox = DEFAULT_BBOX) -> Encounter:
    """Generate one labeled encounter; bit-identical for a fixed spec.

    The anchor is validated against ``bbox`` (the default study area unless
    the caller generates into a different region).
    """
    spec.validate(bbox)
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * RATE_HZ))
    t = (t0_tick + np.arange(n, dtype=np.float64)) / RATE_HZ
    pos_a, pos_b, head_a, head_b = _paths(spec, rng, t - t[0])

    if trip_id is None:
        trip_id = f"trip{spec.seed:016x}"
    traj_a = _to_trajectory(trip_id, "a", t, pos_a, head_a, spec.gps_noise_m,
                            spec.anchor, rng)
    traj_b = _to_trajectory(trip_id, "b", t, pos_b, head_b, spec.gps_noise_m,
                            spec.anchor, rng)
    return Encounter(id=trip_id, traj_a=traj_a, traj_b=traj_b, label=spec.category)


def generate_dataset(counts: Mapping[str, int], base_seed: int, *,
                     duration_range: tuple[float, float] = (8.0, 15.0),
                     speed_range_mps: tuple[float, float] = (3.0, 17.0),
                     gps_noise_m: float = 2.0,
                     bbox: GeoBBox = DEFAULT_BBOX,
                     start_gap_s: float = 2.0) -> list[Encounter]:
    """Generate ``sum(counts.values())`` labeled encounters.

    Encounters are laid out on disjoint time windows (so extraction cannot
    pair vehicles from different scenarios) at anchors drawn inside the bbox
    with a safety margin.  Per-encounter randomness derives from
    ``base_seed`` only.
    """
    for cat, cnt in counts.items():
        if cat not in CATEGORIES:
            raise ValidationError(f"counts: unknown category {cat!r}")
        if cnt < 0:
            raise ValidationError(f"counts: negative count for {cat!r}")
    if duration_range[0] < 5.0:
        raise ValidationError("duration_range: minimum duration is 5.0 s")

    master = np.random.default_rng(base_seed)
    # Paths reach at most v_max * duration/2 from the anchor; keep everything
    # inside the bbox with room to spare.
    reach_m = speed_range_mps[1] * duration_range[1] / 2.0 + 200.0
    margin_lat = reach_m / M_PER_DEG_LAT
    margin_lon = reach_m / meters_per_deg_lon(bbox.center_lat)
    if (bbox.lat_min + margin_lat >= bbox.lat_max - margin_lat
            or bbox.lon_min + margin_lon >= bbox.lon_max - margin_lon):
        raise ValidationError("bbox too small for the configured speeds and "
                              "durations (trajectories would leave it)")

    encounters = []
    tick = 0
    index = 0
    for cat in CATEGORIES:
        for _ in range(counts.get(cat, 0)):
            seed = int(master.integers(0, 2 ** 63))
            anchor = (float(master.uniform(bbox.lat_min + margin_lat, bbox.lat_max - margin_lat)),
                      float(master.uniform(bbox.lon_min + margin_lon, bbox.lon_max - margin_lon)))
            duration = round(float(master.uniform(*duration_range)), 1)
            range_a = (0.0, 0.0) if cat == "bypass" else speed_range_mps
            spec = ScenarioSpec(category=cat, duration_s=duration,
                                speed_range_mps=range_a, gps_noise_m=gps_noise_m,
                                anchor=anchor, seed=seed,
                                speed_range_b_mps=speed_range_mps if cat == "bypass" else None)
            enc = generate_encounter(spec, trip_id=f"enc{index:05d}", t0_tick=tick,
                                     bbox=bbox)
            encounters.append(enc)
            tick += len(enc.traj_a) + int(round(start_gap_s * RATE_HZ))
            index += 1
    return encounters


def write_labels(encounters, path) -> None:
    """Ground-truth labels keyed by trip id: ``trip_id,category``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("trip_id,category\n")
        for enc in encounters:
            fh.write(f"{enc.traj_a.trip_id},{enc.label}\n")


def read_labels(path) -> dict[str, str]:
    labels: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["trip_id", "category"]:
            raise FormatError(f"bad labels header in {Path(path).name}")
        for row in reader:
            if len(row) != 2:
                raise FormatError(f"bad labels row {row!r}")
            labels[row[0]] = row[1]
    return labels
