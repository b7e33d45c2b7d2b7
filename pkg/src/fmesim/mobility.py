"""Terminal placement, point processes, and random-waypoint motion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_SPEED_RANGE = (0.2, 0.7)   # m/s, pedestrian
MOBILITY_TICK_MS = 100


@dataclass(frozen=True)
class Position:
    x_m: float
    y_m: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x_m - other.x_m, self.y_m - other.y_m)


class RectRegion:
    """Axis-aligned rectangle with a given origin corner."""

    def __init__(self, width_m: float, height_m: float,
                 origin: tuple[float, float] = (0.0, 0.0)):
        self.width_m = float(width_m)
        self.height_m = float(height_m)
        self.origin = origin

    @property
    def area_m2(self) -> float:
        return self.width_m * self.height_m

    def contains(self, pos: Position, tol: float = 1e-9) -> bool:
        ox, oy = self.origin
        return (ox - tol <= pos.x_m <= ox + self.width_m + tol
                and oy - tol <= pos.y_m <= oy + self.height_m + tol)

    def sample(self, rng: np.random.Generator) -> Position:
        ox, oy = self.origin
        return Position(ox + rng.uniform(0.0, self.width_m),
                        oy + rng.uniform(0.0, self.height_m))


class DiscRegion:
    """Disc of given radius around a center point."""

    def __init__(self, center: Position, radius_m: float):
        self.center = center
        self.radius_m = float(radius_m)

    @property
    def area_m2(self) -> float:
        return math.pi * self.radius_m ** 2

    def contains(self, pos: Position, tol: float = 1e-9) -> bool:
        return self.center.distance_to(pos) <= self.radius_m + tol

    def sample(self, rng: np.random.Generator) -> Position:
        # sqrt keeps the density uniform over the disc area
        r = self.radius_m * math.sqrt(rng.uniform())
        theta = rng.uniform(0.0, 2.0 * math.pi)
        return Position(self.center.x_m + r * math.cos(theta),
                        self.center.y_m + r * math.sin(theta))


def place_uniform(count: int, region, rng: np.random.Generator) -> list[Position]:
    return [region.sample(rng) for _ in range(count)]


def place_point_process(region, rng: np.random.Generator, *,
                        intensity_per_m2: float | None = None,
                        count: int | None = None) -> list[Position]:
    """Drop points in a region.

    Either a homogeneous process with the given intensity (the number of
    points is Poisson with mean intensity * area) or, with `count`, exactly
    that many independently uniform points.
    """
    if (intensity_per_m2 is None) == (count is None):
        raise ValueError("give exactly one of intensity_per_m2 or count")
    if count is None:
        count = int(rng.poisson(intensity_per_m2 * region.area_m2))
    return place_uniform(count, region, rng)


@dataclass
class WaypointState:
    position: Position
    target: Position
    speed_mps: float


def waypoint_init(region, rng: np.random.Generator,
                  speed_range: tuple[float, float] = DEFAULT_SPEED_RANGE) -> WaypointState:
    return WaypointState(
        position=region.sample(rng),
        target=region.sample(rng),
        speed_mps=rng.uniform(*speed_range),
    )


def waypoint_step(state: WaypointState, dt_s: float, region,
                  rng: np.random.Generator,
                  speed_range: tuple[float, float] = DEFAULT_SPEED_RANGE) -> WaypointState:
    """Advance one tick; on arrival a fresh target and speed are drawn
    immediately (zero pause) and the remaining tick time is spent moving."""
    remaining = float(dt_s)
    pos, target, speed = state.position, state.target, state.speed_mps
    while remaining > 0.0:
        dist = pos.distance_to(target)
        step = speed * remaining
        if step < dist:
            frac = step / dist
            pos = Position(pos.x_m + frac * (target.x_m - pos.x_m),
                           pos.y_m + frac * (target.y_m - pos.y_m))
            break
        # reach the waypoint, spend the leftover time toward a new one
        remaining -= dist / speed if speed > 0 else remaining
        pos = target
        target = region.sample(rng)
        speed = rng.uniform(*speed_range)
    state.position, state.target, state.speed_mps = pos, target, speed
    return state


def in_range_neighbors(index: int, positions: list[Position],
                       range_m: float) -> list[int]:
    """Indices of all other positions within range (inclusive boundary)."""
    me = positions[index]
    return [j for j, p in enumerate(positions)
            if j != index and me.distance_to(p) <= range_m]


def positions_array(positions: list[Position]) -> np.ndarray:
    """(n, 2) float array view of a position list for vectorized math."""
    return np.array([[p.x_m, p.y_m] for p in positions], dtype=float)
