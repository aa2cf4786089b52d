import numpy as np
import pytest

from encluster.ingest import Trajectory


def straight_trajectory(trip_id, vehicle_id, lat0, lon0, dlat_per_s, dlon_per_s,
                        n=100, rate=10.0, t0=0.0, speed=10.0, heading=0.0):
    """Constant-velocity trajectory on the tick grid (test helper)."""
    t = t0 + np.arange(n) / rate
    rel = t - t[0]
    return Trajectory(
        trip_id, vehicle_id, t,
        lat0 + dlat_per_s * rel,
        lon0 + dlon_per_s * rel,
        np.full(n, float(speed)),
        np.full(n, float(heading)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
