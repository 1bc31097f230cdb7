"""Energy-aware route selection on top of the AODV discovery machinery.

Instead of committing to the first route reply, a collecting node holds
all replies that arrive within a t_wait window, measures the distance to
each delivering neighbor, picks the nearest one as next hop, and prices
the link at exactly the transmit power the free-space budget requires for
that distance. Broadcast control traffic stays at common-range power; the
savings come from data packets riding right-sized unicast links.
"""

from dataclasses import dataclass, field
from typing import Optional

from . import radio
from .mobility import distance
from .routing import RouteEntry, RrepMsg

# Links shorter than this are priced as if they were this long, so the
# power math never sees a zero distance.
MIN_LINK_DISTANCE = 1e-3


@dataclass
class Candidate:
    rrep: RrepMsg
    neighbor: int
    neighbor_pos: tuple[float, float]
    arrival: float


@dataclass
class RrepCollector:
    """Open reply-collection window for one (origin, destination) discovery."""
    destination: int
    origin: int
    window_start: float
    deadline: float
    candidates: list[Candidate] = field(default_factory=list)
    late: int = 0


def open_collector(destination: int, origin: int, window_start: float,
                   t_wait: float) -> RrepCollector:
    return RrepCollector(destination=destination, origin=origin,
                         window_start=window_start,
                         deadline=window_start + t_wait)


def collect_rrep(collector: RrepCollector, rrep: RrepMsg, neighbor: int,
                 neighbor_pos: tuple[float, float], arrival: float) -> bool:
    """Append a reply candidate; returns False (and counts it) if too late."""
    if arrival > collector.deadline:
        collector.late += 1
        return False
    collector.candidates.append(
        Candidate(rrep=rrep, neighbor=neighbor, neighbor_pos=neighbor_pos,
                  arrival=arrival))
    return True


def assign_link_power(dist: float, params: radio.RadioParams,
                      margin: float = 1.0) -> float:
    """Transmit power (dBm) for a data link of `dist` meters.

    The optional margin factor prices the link as if it were margin times
    longer, buying headroom against movement between pricing and delivery.
    """
    if dist <= 0:
        raise ValueError("link distance must be positive")
    return radio.required_tx_power(dist * margin, params)


def select_next_hop(collector: RrepCollector, self_pos: tuple[float, float],
                    params: radio.RadioParams,
                    margin: float = 1.0) -> Optional[RouteEntry]:
    """Pick the minimum-distance delivering neighbor and build its route entry.

    Ties break by earliest arrival, then lowest node id. Returns None when
    the window closed without candidates (callers retry discovery).
    """
    if not collector.candidates:
        return None
    best = min(collector.candidates,
               key=lambda c: (distance(self_pos, c.neighbor_pos),
                              c.arrival, c.neighbor))
    link_d = max(distance(self_pos, best.neighbor_pos), MIN_LINK_DISTANCE)
    return RouteEntry(destination=collector.destination,
                      next_hop=best.neighbor,
                      n_hop_x=best.neighbor_pos[0],
                      n_hop_y=best.neighbor_pos[1],
                      hop_count=best.rrep.hop_count + 1,
                      dest_seq=best.rrep.dest_seq,
                      link_tx_power=assign_link_power(link_d, params, margin))


def refresh_link_power(entry: RouteEntry, self_pos: tuple[float, float],
                       next_hop_pos: tuple[float, float],
                       params: radio.RadioParams, margin: float,
                       max_range: float) -> Optional[float]:
    """Reprice a link against the next hop's current position.

    Nodes keep moving after selection, so the stored power is refreshed at
    every forward. Returns the new power in dBm, or None when the next hop
    drifted beyond max_range and the forward must be treated as a break.
    """
    link_d = distance(self_pos, next_hop_pos)
    if link_d > max_range:
        return None
    entry.n_hop_x, entry.n_hop_y = next_hop_pos
    entry.link_tx_power = assign_link_power(max(link_d, MIN_LINK_DISTANCE),
                                            params, margin)
    return entry.link_tx_power
