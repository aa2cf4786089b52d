import io
import logging

import numpy as np
import pytest

from encluster.errors import FormatError, InsufficientDataError, ValidationError
from encluster.ingest import (DEFAULT_BBOX, GeoBBox, Trajectory, filter_bbox,
                              parse_trip_log, resample_uniform,
                              serialize_trip_log, split_gaps, write_trip_log)

HEADER = "trip_id,vehicle_id,t,lat,lon,speed,heading\n"


def parse_text(text, **kw):
    return parse_trip_log(io.StringIO(text), **kw)


class TestParse:
    def test_empty_file_with_header(self):
        assert parse_text(HEADER) == []

    def test_three_rows_one_trip(self):
        text = HEADER + "".join(
            f"t1,v1,{i / 10},42.28,-83.74,5.0,90.0\n" for i in range(3))
        trajs = parse_text(text)
        assert len(trajs) == 1
        assert len(trajs[0]) == 3
        assert trajs[0].trip_id == "t1" and trajs[0].vehicle_id == "v1"

    def test_shuffled_timestamps_sorted(self):
        ts = [0.4, 0.1, 0.3, 0.0, 0.2]
        text = HEADER + "".join(f"t1,v1,{t},42.28,-83.74,1.0,{t * 100}\n" for t in ts)
        traj = parse_text(text)[0]
        assert traj.t.tolist() == sorted(ts)
        # values travel with their timestamps
        assert traj.heading.tolist() == [t * 100 for t in sorted(ts)]

    def test_missing_header_raises(self):
        with pytest.raises(FormatError):
            parse_text("t1,v1,0.0,42.28,-83.74,5.0,90.0\n")
        with pytest.raises(FormatError):
            parse_text("")

    def test_bad_row_skipped_with_line_number(self, caplog):
        text = (HEADER
                + "t1,v1,0.0,42.28,-83.74,5.0,90.0\n"
                + "t1,v1,oops,42.28,-83.74,5.0,90.0\n"
                + "t1,v1,0.2,42.28,-83.74,5.0,90.0\n")
        with caplog.at_level(logging.WARNING):
            trajs = parse_text(text)
        assert len(trajs[0]) == 2
        assert any("line 3" in rec.message for rec in caplog.records)

    def test_strict_mode_aborts_on_bad_row(self):
        text = HEADER + "t1,v1,xx,42.28,-83.74,5.0,90.0\n"
        with pytest.raises(FormatError, match="line 2"):
            parse_text(text, strict=True)

    def test_row_validation(self):
        bad_lat = HEADER + "t1,v1,0.0,95.0,-83.74,5.0,90.0\n"
        assert parse_text(bad_lat) == []
        with pytest.raises(FormatError, match="latitude"):
            parse_text(bad_lat, strict=True)
        with pytest.raises(FormatError, match="speed"):
            parse_text(HEADER + "t1,v1,0.0,42.0,-83.74,-1.0,90.0\n", strict=True)

    def test_duplicate_timestamp_skipped(self, caplog):
        text = (HEADER
                + "t1,v1,0.0,42.28,-83.74,5.0,90.0\n"
                + "t1,v1,0.0,42.29,-83.74,5.0,90.0\n")
        with caplog.at_level(logging.WARNING):
            trajs = parse_text(text)
        assert len(trajs[0]) == 1
        assert trajs[0].lat[0] == 42.28

    def test_groups_by_trip_and_vehicle(self):
        text = (HEADER
                + "t1,a,0.0,42.28,-83.74,5.0,90.0\n"
                + "t1,b,0.0,42.28,-83.74,5.0,90.0\n"
                + "t2,a,0.0,42.28,-83.74,5.0,90.0\n")
        trajs = parse_text(text)
        assert [tr.key for tr in trajs] == [("t1", "a"), ("t1", "b"), ("t2", "a")]


class TestRoundTrip:
    def test_parse_serialize_parse_identity(self, tmp_path, rng):
        rows = []
        for trip in ("tripB", "tripA"):
            ts = np.sort(rng.uniform(0, 30, 40))
            for t in ts:
                rows.append(f"{trip},v,{t!r},{rng.uniform(42.22, 42.34)!r},"
                            f"{rng.uniform(-83.82, -83.64)!r},{rng.uniform(0, 20)!r},"
                            f"{rng.uniform(0, 360)!r}\n")
        path = tmp_path / "log.csv"
        path.write_text(HEADER + "".join(rows))

        first = parse_trip_log(path)
        out = tmp_path / "log2.csv"
        write_trip_log(first, out)
        second = parse_trip_log(out)
        assert serialize_trip_log(first) == serialize_trip_log(second)
        # write -> read -> write is byte-identical
        out2 = tmp_path / "log3.csv"
        write_trip_log(second, out2)
        assert out.read_bytes() == out2.read_bytes()


class TestBBox:
    def test_invalid_bbox(self):
        with pytest.raises(ValidationError):
            GeoBBox(1.0, -1.0, 0.0, 1.0)
        with pytest.raises(ValidationError):
            GeoBBox(-1.0, 1.0, 2.0, 1.0)

    def test_all_inside_is_identity(self):
        traj = Trajectory("t", "v", np.arange(3) / 10, np.full(3, 42.28),
                          np.full(3, -83.74), np.zeros(3), np.zeros(3))
        out = filter_bbox(traj, DEFAULT_BBOX)
        assert len(out) == 3
        assert np.array_equal(out.lat, traj.lat)

    def test_all_outside_is_empty(self):
        traj = Trajectory("t", "v", np.arange(3) / 10, np.full(3, 10.0),
                          np.full(3, 10.0), np.zeros(3), np.zeros(3))
        assert len(filter_bbox(traj, DEFAULT_BBOX)) == 0

    def test_study_area_point_retained(self):
        traj = Trajectory("t", "v", np.array([0.0]), np.array([42.28]),
                          np.array([-83.74]), np.zeros(1), np.zeros(1))
        assert len(filter_bbox(traj, DEFAULT_BBOX)) == 1

    def test_filter_is_idempotent(self, rng):
        for _ in range(20):
            n = 50
            traj = Trajectory("t", "v", np.arange(n) / 10.0,
                              rng.uniform(42.0, 42.5, n),
                              rng.uniform(-84.0, -83.5, n),
                              rng.uniform(0, 20, n), rng.uniform(0, 360, n))
            once = filter_bbox(traj, DEFAULT_BBOX)
            twice = filter_bbox(once, DEFAULT_BBOX)
            assert np.array_equal(once.lat, twice.lat)
            assert np.array_equal(once.t, twice.t)


class TestResample:
    def test_already_uniform_identity(self):
        n = 21
        traj = Trajectory("t", "v", np.arange(n) / 10.0,
                          42.0 + np.arange(n) * 1e-4, -83.7 + np.arange(n) * 1e-4,
                          np.linspace(0, 5, n), np.linspace(10, 30, n))
        out = resample_uniform(traj, 10.0)
        assert len(out) == n
        assert np.allclose(out.lat, traj.lat, atol=1e-12)
        assert np.allclose(out.heading, traj.heading, atol=1e-12)

    def test_two_point_midpoint(self):
        traj = Trajectory("t", "v", np.array([0.0, 1.0]), np.array([42.0, 42.1]),
                          np.array([-83.7, -83.7]), np.zeros(2), np.zeros(2))
        out = resample_uniform(traj, 10.0)
        assert len(out) == 11
        assert out.lat[5] == pytest.approx(42.05, abs=1e-12)

    def test_heading_interpolates_across_seam(self):
        # Circular-mean oracle: midpoint of 350 and 10 is 0, not 180.
        traj = Trajectory("t", "v", np.array([0.0, 1.0]), np.array([42.0, 42.0]),
                          np.array([-83.7, -83.7]), np.zeros(2),
                          np.array([350.0, 10.0]))
        out = resample_uniform(traj, 2.0)
        shortest = ((10.0 - 350.0 + 180.0) % 360.0) - 180.0
        oracle = (350.0 + 0.5 * shortest) % 360.0
        assert out.heading[1] == pytest.approx(oracle, abs=1e-9)
        assert out.heading[1] == pytest.approx(0.0, abs=1e-9)

    def test_endpoints_preserved(self, rng):
        n = 37
        traj = Trajectory("t", "v", np.arange(n) / 10.0,
                          rng.uniform(42.2, 42.3, n), rng.uniform(-83.8, -83.7, n),
                          rng.uniform(0, 20, n), rng.uniform(0, 360, n))
        out = resample_uniform(traj, 10.0)
        assert out.t[0] == traj.t[0]
        assert out.lat[0] == traj.lat[0]
        assert out.lat[-1] == pytest.approx(traj.lat[-1], abs=1e-12)
        assert np.allclose(np.diff(out.t), 0.1, atol=1e-9)

    def test_epoch_alignment_snaps_grid(self):
        traj = Trajectory("t", "v", np.array([0.03, 1.02]), np.array([42.0, 42.1]),
                          np.array([-83.7, -83.7]), np.zeros(2), np.zeros(2))
        out = resample_uniform(traj, 10.0, align="epoch")
        ticks = out.t * 10.0
        assert np.allclose(ticks, np.rint(ticks), atol=1e-9)
        assert out.t[0] >= traj.t[0] - 1e-12
        assert out.t[-1] <= traj.t[-1] + 1e-12

    def test_too_few_points(self):
        traj = Trajectory("t", "v", np.array([0.0]), np.array([42.0]),
                          np.array([-83.7]), np.zeros(1), np.zeros(1))
        with pytest.raises(InsufficientDataError):
            resample_uniform(traj, 10.0)


def test_split_gaps():
    t = np.array([0.0, 0.1, 0.2, 2.0, 2.1, 5.0])
    traj = Trajectory("t", "v", t, np.full(6, 42.28), np.full(6, -83.74),
                      np.zeros(6), np.zeros(6))
    parts = split_gaps(traj, max_gap_s=1.0)
    assert [len(p) for p in parts] == [3, 2, 1]
    assert split_gaps(traj.slice(0, 3), max_gap_s=1.0)[0] is not None
    assert len(split_gaps(traj.slice(0, 0))) == 0
