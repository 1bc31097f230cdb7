"""Random-waypoint mobility with exact analytic positions.

Legs are generated lazily per node from a dedicated RNG substream, so a
node's trajectory is a pure function of the scenario seed and is never
perturbed by how often (or in what order) positions are queried. There is
no tick: position_at interpolates the current leg at the exact query time.
"""

import math
from dataclasses import dataclass

from .scenario import ScenarioConfig, substream


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Euclidean distance between two points in meters."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass
class Waypoint:
    """One travel leg plus the pause at its far end."""
    origin: tuple[float, float]
    destination: tuple[float, float]
    speed: float
    depart_time: float
    arrive_time: float
    pause_until: float


class RandomWaypoint:
    """Per-node waypoint trajectories over a rectangular arena.

    Nodes start paused at their initial position until pause_time, then
    alternate travel to a uniform random destination at a uniform random
    speed with a fixed pause after each arrival.
    """

    def __init__(self, cfg: ScenarioConfig,
                 initial_positions: list[tuple[float, float]] | None = None):
        self.cfg = cfg
        if initial_positions is None:
            pos_rng = substream(cfg.rng_seed, "positions")
            initial_positions = [
                (pos_rng.uniform(0.0, cfg.area_width),
                 pos_rng.uniform(0.0, cfg.area_height))
                for _ in range(cfg.node_count)
            ]
        elif len(initial_positions) != cfg.node_count:
            raise ValueError("need one initial position per node")
        self._rngs = [substream(cfg.rng_seed, f"mobility/{i}")
                      for i in range(cfg.node_count)]
        self._legs: list[list[Waypoint]] = [
            [Waypoint(origin=p, destination=p, speed=cfg.speed_min,
                      depart_time=0.0, arrive_time=0.0,
                      pause_until=cfg.pause_time)]
            for p in initial_positions
        ]
        self._cursor = [0] * cfg.node_count

    def _append_leg(self, node: int):
        legs = self._legs[node]
        rng = self._rngs[node]
        last = legs[-1]
        origin = last.destination
        dest = (rng.uniform(0.0, self.cfg.area_width),
                rng.uniform(0.0, self.cfg.area_height))
        speed = rng.uniform(self.cfg.speed_min, self.cfg.speed_max)
        depart = last.pause_until
        arrive = depart + distance(origin, dest) / speed
        legs.append(Waypoint(origin=origin, destination=dest, speed=speed,
                             depart_time=depart, arrive_time=arrive,
                             pause_until=arrive + self.cfg.pause_time))

    def position_at(self, node: int, t: float) -> tuple[float, float]:
        """Exact position of `node` at time t."""
        if not 0 <= node < self.cfg.node_count:
            raise ValueError(f"unknown node id {node}")
        legs = self._legs[node]
        while legs[-1].pause_until < t:
            self._append_leg(node)
        i = self._cursor[node]
        if t < legs[i].depart_time:
            i = 0
        while legs[i].pause_until < t:
            i += 1
        self._cursor[node] = i
        leg = legs[i]
        if t >= leg.arrive_time:
            return leg.destination
        travel = leg.arrive_time - leg.depart_time
        u = (t - leg.depart_time) / travel
        ox, oy = leg.origin
        dx, dy = leg.destination
        return (ox + (dx - ox) * u, oy + (dy - oy) * u)

    def legs_until(self, node: int, t: float) -> list[Waypoint]:
        """The generated waypoint list covering [0, t] (inspection/testing)."""
        self.position_at(node, t)
        return [leg for leg in self._legs[node] if leg.depart_time <= t]


class FixedPositions:
    """Degenerate mobility: every node pinned to a constant position."""

    def __init__(self, positions: list[tuple[float, float]]):
        self.positions = list(positions)

    def position_at(self, node: int, t: float) -> tuple[float, float]:
        if not 0 <= node < len(self.positions):
            raise ValueError(f"unknown node id {node}")
        return self.positions[node]
