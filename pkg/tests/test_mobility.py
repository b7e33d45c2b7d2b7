"""Placement and mobility tests, including the 3-sigma statistical gates."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fmesim.engine import substream
from fmesim.mobility import (
    DiscRegion,
    Position,
    RectRegion,
    in_range_neighbors,
    place_point_process,
    place_uniform,
    positions_array,
    waypoint_init,
    waypoint_step,
)


def test_uniform_rect_placement_contained_and_centered():
    region = RectRegion(2000.0, 1000.0)
    rng = substream(1, "place/rect")
    pts = place_uniform(5000, region, rng)
    assert all(region.contains(p) for p in pts)
    arr = positions_array(pts)
    # mean of U(0, L) has sd L/sqrt(12)/sqrt(n)
    for dim, length in ((0, 2000.0), (1, 1000.0)):
        sigma = length / math.sqrt(12) / math.sqrt(len(pts))
        assert abs(arr[:, dim].mean() - length / 2) < 3 * sigma


def test_uniform_disc_placement_is_area_uniform():
    region = DiscRegion(Position(0.0, 0.0), 500.0)
    rng = substream(2, "place/disc")
    pts = place_uniform(20_000, region, rng)
    assert all(region.contains(p) for p in pts)
    radii = np.hypot(*positions_array(pts).T)
    # under area uniformity r^2/R^2 is U(0,1)
    u = (radii / 500.0) ** 2
    sigma = 1 / math.sqrt(12) / math.sqrt(len(pts))
    assert abs(u.mean() - 0.5) < 3 * sigma


def test_point_process_mean_count_over_many_trials():
    region = RectRegion(1000.0, 1000.0)
    rng = substream(3, "place/ppp")
    lam = 20e-6  # per m^2 -> mean 20 per trial
    counts = [len(place_point_process(region, rng, intensity_per_m2=lam))
              for _ in range(10_000)]
    mean = np.mean(counts)
    sigma = math.sqrt(20.0) / math.sqrt(len(counts))
    assert abs(mean - 20.0) < 3 * sigma
    # Poisson spread, not a degenerate constant
    assert np.std(counts) > 3.0


def test_point_process_fixed_count_mode():
    region = DiscRegion(Position(10.0, -5.0), 200.0)
    rng = substream(4, "place/fixed")
    pts = place_point_process(region, rng, count=75)
    assert len(pts) == 75
    assert all(region.contains(p) for p in pts)


def test_point_process_requires_exactly_one_mode():
    region = RectRegion(10, 10)
    rng = substream(5, "place/bad")
    with pytest.raises(ValueError):
        place_point_process(region, rng)
    with pytest.raises(ValueError):
        place_point_process(region, rng, intensity_per_m2=1e-6, count=3)


def test_waypoint_speeds_respect_bounds_over_many_draws():
    region = RectRegion(100.0, 100.0)
    rng = substream(6, "move/speeds")
    lo, hi = 0.2, 0.7
    speeds = []
    st = waypoint_init(region, rng)
    for _ in range(10_000):
        st = waypoint_step(st, 5.0, region, rng)  # long ticks force re-draws
        speeds.append(st.speed_mps)
    speeds = np.array(speeds)
    assert speeds.min() >= lo and speeds.max() <= hi


def test_waypoint_speed_draws_are_uniform():
    # the per-leg draws themselves (not the time-sampled speeds, which are
    # biased toward slow legs) are uniform over the configured range
    region = RectRegion(100.0, 100.0)
    rng = substream(6, "move/draws")
    lo, hi = 0.2, 0.7
    draws = np.array([waypoint_init(region, rng).speed_mps for _ in range(10_000)])
    assert draws.min() >= lo and draws.max() <= hi
    sigma = (hi - lo) / math.sqrt(12) / math.sqrt(draws.size)
    assert abs(draws.mean() - (lo + hi) / 2) < 3 * sigma


def test_waypoint_stays_inside_region():
    region = DiscRegion(Position(0.0, 0.0), 50.0)
    rng = substream(7, "move/contain")
    st = waypoint_init(region, rng)
    for _ in range(5_000):
        st = waypoint_step(st, 0.1, region, rng)
        assert region.contains(st.position)


def test_waypoint_zero_pause_keeps_moving():
    # a tick that lands exactly past several waypoints must keep consuming
    # time; the walker never freezes at a waypoint
    region = RectRegion(10.0, 10.0)
    rng = substream(8, "move/pauseless")
    st = waypoint_init(region, rng)
    prev = st.position
    stuck = 0
    for _ in range(2000):
        st = waypoint_step(st, 10.0, region, rng)
        if st.position.distance_to(prev) < 1e-12:
            stuck += 1
        prev = st.position
    assert stuck == 0


def test_waypoint_trajectory_reproducible():
    region = RectRegion(100.0, 100.0)

    def run():
        rng = substream(11, "move/replay")
        st = waypoint_init(region, rng)
        out = []
        for _ in range(200):
            st = waypoint_step(st, 0.1, region, rng)
            out.append((st.position.x_m, st.position.y_m))
        return out

    assert run() == run()


def test_in_range_neighbors_inclusive_boundary():
    pts = [Position(0, 0), Position(3, 4), Position(5, 0), Position(100, 0)]
    # distance (0,0)-(3,4) is exactly 5
    assert in_range_neighbors(0, pts, 5.0) == [1, 2]
    assert in_range_neighbors(3, pts, 5.0) == []
    assert 0 not in in_range_neighbors(0, pts, 1000.0)
