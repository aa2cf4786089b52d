"""Encounter detection and featurization.

An encounter is a maximal run of shared 10 Hz ticks on which two vehicles
stay within a distance threshold (default 100 m), allowing interruptions up
to a gap tolerance, and lasting at least a minimum duration.  Durations are
counted as ticks/rate, i.e. 50 ticks == 5 s.

Each encounter is flattened to a fixed-length feature vector: both segments
are resampled to T points, translated into a local frame centered on the
midpoint of the two start positions, converted to meters and interleaved as

    [yA_0, xA_0, ..., yA_{T-1}, xA_{T-1}, yB_0, xB_0, ..., yB_{T-1}, xB_{T-1}]

(y = north/latitude axis, x = east/longitude axis), giving 2*2*T = 200
values for the default T = 50.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (DataError, FormatError, InsufficientDataError, ShapeError,
                     ValidationError)
from .geo import M_PER_DEG_LAT, haversine_m, meters_per_deg_lon
from .ingest import DEFAULT_BBOX, Trajectory

__all__ = [
    "Encounter", "NormalizationParams", "haversine_m", "detect_encounters",
    "find_encounters", "to_feature_vector", "fit_normalization",
    "apply_normalization", "invert_normalization", "write_encounters",
    "read_encounters", "write_features", "read_features",
    "write_normalization", "read_normalization",
]

#: Latitude fixed for the degree->meter east-west scale in feature space.
#: A constant (rather than a per-encounter latitude) keeps featurization
#: exactly translation-invariant.
FEATURE_SCALE_LAT = DEFAULT_BBOX.center_lat


@dataclass(frozen=True, eq=False)
class Encounter:
    """Two time-aligned trajectory segments, optionally labeled."""

    id: str
    traj_a: Trajectory
    traj_b: Trajectory
    label: str | None = None

    @property
    def n_ticks(self) -> int:
        return len(self.traj_a)


@dataclass(frozen=True)
class NormalizationParams:
    """Per-dimension min/max of the training features."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ShapeError("normalization params must be matching 1-D arrays")
        if np.any(self.lo > self.hi):
            raise ValidationError("normalization params: min > max")


def _tick_indices(traj: Trajectory, rate_hz: float) -> tuple[int, int]:
    """Start tick and count, validating the trajectory sits on the tick grid."""
    ticks = traj.t * rate_hz
    rounded = np.rint(ticks)
    if np.max(np.abs(ticks - rounded)) > 1e-6:
        raise DataError(f"trajectory {traj.trip_id}/{traj.vehicle_id} is not on "
                        f"the {rate_hz} Hz grid; resample first")
    start = int(rounded[0])
    n = len(traj)
    if n > 1 and not np.array_equal(rounded, start + np.arange(n)):
        raise DataError(f"trajectory {traj.trip_id}/{traj.vehicle_id} has gaps; "
                        "split and resample first")
    return start, n


def _runs_from_mask(mask: np.ndarray, gap_tol_ticks: int, min_ticks: int) -> list[tuple[int, int]]:
    """Maximal [start, stop) index runs of True, bridging short False gaps."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    runs: list[list[int]] = [[int(idx[0]), int(idx[0]) + 1]]
    for i in idx[1:]:
        gap = int(i) - runs[-1][1]
        if gap <= gap_tol_ticks:
            runs[-1][1] = int(i) + 1
        else:
            runs.append([int(i), int(i) + 1])
    return [(s, e) for s, e in runs if e - s >= min_ticks]


def _pair_encounters(a: Trajectory, b: Trajectory, mask: np.ndarray, off_a: int,
                     off_b: int, start_tick: int, gap_tol_ticks: int,
                     min_ticks: int) -> list[Encounter]:
    out = []
    for s, e in _runs_from_mask(mask, gap_tol_ticks, min_ticks):
        seg_a = a.slice(off_a + s, off_a + e)
        seg_b = b.slice(off_b + s, off_b + e)
        enc_id = (f"{a.trip_id}.{a.vehicle_id}--{b.trip_id}.{b.vehicle_id}"
                  f"--t{start_tick + s}")
        out.append(Encounter(id=enc_id, traj_a=seg_a, traj_b=seg_b))
    return out


def detect_encounters(a: Trajectory, b: Trajectory, threshold_m: float = 100.0,
                      min_duration_s: float = 5.0, gap_tolerance_s: float = 1.0,
                      rate_hz: float = 10.0) -> list[Encounter]:
    """Find encounters between one pair of grid-aligned trajectories.

    Returns maximal runs of shared ticks with haversine distance strictly
    below ``threshold_m``, after bridging interruptions up to
    ``gap_tolerance_s``, keeping runs of at least ``min_duration_s``.
    Trajectories without temporal overlap yield an empty list.
    """
    if threshold_m <= 0 or min_duration_s <= 0 or gap_tolerance_s < 0:
        raise ValidationError("detection thresholds must be positive (gap may be 0)")
    start_a, n_a = _tick_indices(a, rate_hz)
    start_b, n_b = _tick_indices(b, rate_hz)
    lo = max(start_a, start_b)
    hi = min(start_a + n_a, start_b + n_b)
    if hi <= lo:
        return []
    sl_a = slice(lo - start_a, hi - start_a)
    sl_b = slice(lo - start_b, hi - start_b)
    dist = haversine_m(a.lat[sl_a], a.lon[sl_a], b.lat[sl_b], b.lon[sl_b])
    mask = np.asarray(dist) < threshold_m
    gap_tol_ticks = int(round(gap_tolerance_s * rate_hz))
    min_ticks = int(round(min_duration_s * rate_hz))
    return _pair_encounters(a, b, mask, lo - start_a, lo - start_b, lo,
                            gap_tol_ticks, min_ticks)


def find_encounters(trajectories: Sequence[Trajectory], threshold_m: float = 100.0,
                    min_duration_s: float = 5.0, gap_tolerance_s: float = 1.0,
                    rate_hz: float = 10.0) -> list[Encounter]:
    """Detect encounters across a whole set of trajectories.

    Candidate pairs are enumerated per tick with a uniform spatial grid
    (cell edge = threshold) so only vehicles in neighboring cells are
    distance-checked; results are identical to the all-pairs scan.  Output
    is ordered by (trip ids, start tick).
    """
    if threshold_m <= 0 or min_duration_s <= 0 or gap_tolerance_s < 0:
        raise ValidationError("detection thresholds must be positive (gap may be 0)")
    trajs = sorted(trajectories, key=lambda tr: tr.key)
    if len(trajs) < 2:
        return []

    starts, counts = [], []
    for tr in trajs:
        s, n = _tick_indices(tr, rate_hz)
        starts.append(s)
        counts.append(n)

    # Planar meters for cell hashing only; membership still uses haversine.
    ref_lat = float(np.mean([tr.lat.mean() for tr in trajs]))
    ref_lon = float(np.mean([tr.lon.mean() for tr in trajs]))
    m_lon = meters_per_deg_lon(ref_lat)
    xs = [(tr.lon - ref_lon) * m_lon for tr in trajs]
    ys = [(tr.lat - ref_lat) * M_PER_DEG_LAT for tr in trajs]
    cell = threshold_m * 1.05  # slack for projection distortion

    tick_lo = min(starts)
    tick_hi = max(s + n for s, n in zip(starts, counts))
    begins: dict[int, list[int]] = {}
    finishes: dict[int, list[int]] = {}
    for i, (s, n) in enumerate(zip(starts, counts)):
        begins.setdefault(s, []).append(i)
        finishes.setdefault(s + n, []).append(i)

    hits: dict[tuple[int, int], list[int]] = {}
    neighbor_offsets = ((0, 0), (1, 0), (0, 1), (1, 1), (1, -1))
    active_set: set[int] = set()
    for tick in range(tick_lo, tick_hi):
        for i in begins.get(tick, ()):
            active_set.add(i)
        for i in finishes.get(tick, ()):
            active_set.discard(i)
        if len(active_set) < 2:
            continue
        active = [(i, tick - starts[i]) for i in sorted(active_set)]
        buckets: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for i, j in active:
            key = (int(np.floor(xs[i][j] / cell)), int(np.floor(ys[i][j] / cell)))
            buckets.setdefault(key, []).append((i, j))
        for (cx, cy), members in buckets.items():
            for dx, dy in neighbor_offsets:
                others = members if (dx, dy) == (0, 0) else buckets.get((cx + dx, cy + dy))
                if not others:
                    continue
                for ai, (i, j) in enumerate(members):
                    for bi, (i2, j2) in enumerate(others):
                        if (dx, dy) == (0, 0) and bi <= ai:
                            continue
                        p, q = (i, i2) if i < i2 else (i2, i)
                        if p == q:
                            continue
                        d = haversine_m(trajs[p].lat[tick - starts[p]],
                                        trajs[p].lon[tick - starts[p]],
                                        trajs[q].lat[tick - starts[q]],
                                        trajs[q].lon[tick - starts[q]])
                        if d < threshold_m:
                            hits.setdefault((p, q), []).append(tick)

    gap_tol_ticks = int(round(gap_tolerance_s * rate_hz))
    min_ticks = int(round(min_duration_s * rate_hz))
    encounters = []
    for (p, q) in sorted(hits):
        a, b = trajs[p], trajs[q]
        lo = max(starts[p], starts[q])
        hi = min(starts[p] + counts[p], starts[q] + counts[q])
        mask = np.zeros(hi - lo, dtype=bool)
        ticks = sorted(set(hits[(p, q)]))
        mask[np.asarray(ticks) - lo] = True
        encounters.extend(_pair_encounters(a, b, mask, lo - starts[p], lo - starts[q],
                                           lo, gap_tol_ticks, min_ticks))
    return encounters


def to_feature_vector(enc: Encounter, T: int = 50,
                      scale_lat: float = FEATURE_SCALE_LAT) -> np.ndarray:
    """Flatten an encounter into the raw (pre-normalization) feature vector.

    Each segment is resampled to T points by linear interpolation at source
    indices j*N/T (so a 2N-tick encounter samples every other tick), then
    translated so the midpoint of the two start positions is the origin and
    scaled to meters.  Output length is 2*2*T.
    """
    if T < 1:
        raise ValidationError("T must be >= 1")
    n = enc.n_ticks
    if n < 2 or len(enc.traj_b) < 2:
        raise InsufficientDataError(f"encounter {enc.id}: need >= 2 samples per vehicle")
    if len(enc.traj_b) != n:
        raise ShapeError(f"encounter {enc.id}: segments differ in length")

    ref_lat = 0.5 * (float(enc.traj_a.lat[0]) + float(enc.traj_b.lat[0]))
    ref_lon = 0.5 * (float(enc.traj_a.lon[0]) + float(enc.traj_b.lon[0]))
    m_lon = meters_per_deg_lon(scale_lat)

    idx = np.arange(T, dtype=np.float64) * n / T
    src = np.arange(n, dtype=np.float64)
    parts = []
    for traj in (enc.traj_a, enc.traj_b):
        y = np.interp(idx, src, (traj.lat - ref_lat) * M_PER_DEG_LAT)
        x = np.interp(idx, src, (traj.lon - ref_lon) * m_lon)
        block = np.empty(2 * T)
        block[0::2] = y
        block[1::2] = x
        parts.append(block)
    return np.concatenate(parts)


def fit_normalization(features) -> NormalizationParams:
    """Per-dimension min/max over a dataset of raw feature vectors."""
    mat = np.asarray(features, dtype=np.float64)
    if mat.size == 0:
        raise ValidationError("cannot fit normalization on an empty dataset")
    if mat.ndim == 1:
        mat = mat[None, :]
    if mat.ndim != 2:
        raise ShapeError("expected a 2-D feature matrix")
    return NormalizationParams(lo=mat.min(axis=0), hi=mat.max(axis=0))


def apply_normalization(x, params: NormalizationParams) -> np.ndarray:
    """Map features into [0, 1]^d; constant dimensions go to 0.5, values
    outside the training range are clamped."""
    x = np.asarray(x, dtype=np.float64)
    span = params.hi - params.lo
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    out = (x - params.lo) / safe_span
    out = np.clip(out, 0.0, 1.0)
    return np.where(constant, 0.5, out)


def invert_normalization(y, params: NormalizationParams) -> np.ndarray:
    """Inverse of :func:`apply_normalization` (constant dims recover their value)."""
    y = np.asarray(y, dtype=np.float64)
    span = params.hi - params.lo
    return np.where(span == 0, params.lo, params.lo + y * span)


# ---------------------------------------------------------------------------
# file formats

ENCOUNTER_COLUMNS = ("encounter_id", "label", "vehicle", "t", "lat", "lon")


def write_encounters(encounters: Iterable[Encounter], path) -> None:
    """Long-format encounter CSV: encounter_id,label,vehicle,t,lat,lon."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(ENCOUNTER_COLUMNS) + "\n")
        for enc in encounters:
            label = enc.label or ""
            for tag, traj in (("a", enc.traj_a), ("b", enc.traj_b)):
                for t, lat, lon in zip(traj.t.tolist(), traj.lat.tolist(),
                                       traj.lon.tolist()):
                    fh.write(f"{enc.id},{label},{tag},{t!r},{lat!r},{lon!r}\n")


def read_encounters(path) -> list[Encounter]:
    """Read the encounter CSV back.  Speed/heading are not stored in this
    format and come back as zeros."""
    import csv as _csv

    rows: dict[str, dict] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ENCOUNTER_COLUMNS:
            raise FormatError(f"bad encounter header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise FormatError(f"line {line_no}: expected 6 fields")
            enc_id, label, vehicle = row[0], row[1], row[2]
            if vehicle not in ("a", "b"):
                raise FormatError(f"line {line_no}: vehicle must be 'a' or 'b'")
            try:
                t, lat, lon = float(row[3]), float(row[4]), float(row[5])
            except ValueError:
                raise FormatError(f"line {line_no}: non-numeric field") from None
            if enc_id not in rows:
                rows[enc_id] = {"label": label or None, "a": [], "b": []}
                order.append(enc_id)
            rows[enc_id][vehicle].append((t, lat, lon))

    encounters = []
    for enc_id in order:
        entry = rows[enc_id]
        segs = {}
        for tag in ("a", "b"):
            pts = entry[tag]
            if not pts:
                raise FormatError(f"encounter {enc_id}: missing vehicle {tag}")
            arr = np.asarray(pts, dtype=np.float64)
            zeros = np.zeros(arr.shape[0])
            segs[tag] = Trajectory(enc_id, tag, arr[:, 0], arr[:, 1], arr[:, 2],
                                   zeros, zeros.copy())
        if len(segs["a"]) != len(segs["b"]):
            raise FormatError(f"encounter {enc_id}: segment lengths differ")
        encounters.append(Encounter(id=enc_id, traj_a=segs["a"], traj_b=segs["b"],
                                    label=entry["label"]))
    return encounters


def write_features(features, path, labels: Sequence[str] | None = None) -> None:
    """Feature matrix CSV: one row of decimal values per encounter, with an
    optional trailing label column."""
    mat = np.asarray(features, dtype=np.float64)
    if mat.ndim != 2:
        raise ShapeError("expected a 2-D feature matrix")
    if labels is not None and len(labels) != mat.shape[0]:
        raise ShapeError("labels length does not match feature rows")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(mat.shape[0]):
            row = ",".join(repr(v) for v in mat[i].tolist())
            if labels is not None:
                row += f",{labels[i]}"
            fh.write(row + "\n")


def read_features(path) -> tuple[np.ndarray, list[str] | None]:
    """Read a feature CSV; returns (matrix, labels or None)."""
    rows: list[list[float]] = []
    labels: list[str] = []
    has_labels: bool | None = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if has_labels is None:
                try:
                    float(cells[-1])
                    has_labels = False
                except ValueError:
                    has_labels = True
            try:
                if has_labels:
                    rows.append([float(v) for v in cells[:-1]])
                    labels.append(cells[-1])
                else:
                    rows.append([float(v) for v in cells])
            except ValueError:
                raise FormatError(f"line {line_no}: non-numeric feature value") from None
            if len(rows) > 1 and len(rows[-1]) != len(rows[0]):
                raise FormatError(f"line {line_no}: inconsistent row length")
    if not rows:
        return np.empty((0, 0)), None
    return np.asarray(rows, dtype=np.float64), (labels if has_labels else None)


def write_normalization(params: NormalizationParams, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(repr(v) for v in params.lo.tolist()) + "\n")
        fh.write(",".join(repr(v) for v in params.hi.tolist()) + "\n")


def read_normalization(path) -> NormalizationParams:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) != 2:
        raise FormatError("normalization file must have exactly two rows (min, max)")
    lo = np.asarray([float(v) for v in lines[0].split(",")])
    hi = np.asarray([float(v) for v in lines[1].split(",")])
    return NormalizationParams(lo=lo, hi=hi)
