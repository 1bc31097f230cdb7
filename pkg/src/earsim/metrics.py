"""Run post-processing: lifetime, energy and alive-node metrics.

Everything here is a pure function of finished run state. Lifetimes that
the run did not observe (fewer than k deaths) are reported as censored
lower bounds, never silently clamped, so protocol comparisons cannot
fabricate equality out of truncation.
"""

import json
import math
import os
from dataclasses import dataclass, field, asdict


def network_lifetime(death_times, k: int, sim_duration: float):
    """Time of the k-th node death, or a censored bound at sim_duration.

    Returns (seconds, censored). death_times may be a mapping or iterable
    of death instants.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    times = sorted(death_times.values() if hasattr(death_times, "values")
                   else death_times)
    if len(times) < k:
        return sim_duration, True
    return times[k - 1], False


def total_energy(per_node_energy) -> float:
    """Exact sum of per-node consumed joules."""
    values = (per_node_energy.values() if hasattr(per_node_energy, "values")
              else per_node_energy)
    return sum(values)


def alive_nodes(ledgers, threshold: float = 0.5) -> int:
    """Nodes retaining strictly more than `threshold` of their initial energy."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return sum(1 for led in ledgers
               if led.remaining > threshold * led.initial)


@dataclass
class MetricsReport:
    protocol: str
    rng_seed: int
    network_lifetime_s: float
    lifetime_censored: bool
    k_used: int
    total_energy_j: float
    alive_nodes: int
    alive_fraction_threshold: float
    death_times: dict
    packets_emitted: int
    packets_delivered: int
    packets_dropped_no_route: int
    packets_dropped_link_break: int
    packets_in_flight_at_end: int
    per_node_energy: dict
    energy_by_cause: dict
    counters: dict
    flows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def write_summary(self, directory: str):
        path = os.path.join(directory, "summary.json")
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        return path

    def write_deaths(self, directory: str):
        path = os.path.join(directory, "deaths.csv")
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write("node,death_time_s\n")
            for node, when in sorted(self.death_times.items()):
                handle.write(f"{node},{when!r}\n")
        return path


def build_report(sim) -> MetricsReport:
    """Assemble the report for a finished Simulation."""
    cfg = sim.cfg
    deaths = {node.id: node.ledger.death_time
              for node in sim.nodes if node.ledger.death_time is not None}
    k = max(1, math.ceil(cfg.node_count / 2))
    lifetime, censored = network_lifetime(deaths, k, cfg.sim_duration)
    per_node = {node.id: node.ledger.consumed() for node in sim.nodes}
    by_cause: dict[str, float] = {}
    for node in sim.nodes:
        for cause, joules in node.ledger.totals.items():
            by_cause[cause] = by_cause.get(cause, 0.0) + joules
    flows = [{"source": f.source, "destination": f.destination,
              "emitted": f.emitted, "delivered": f.delivered,
              "dropped_no_route": f.dropped_no_route,
              "dropped_link_break": f.dropped_link_break,
              "in_flight_at_end": f.in_flight_at_end}
             for f in sim.flows]
    return MetricsReport(
        protocol=cfg.protocol.value,
        rng_seed=cfg.rng_seed,
        network_lifetime_s=lifetime,
        lifetime_censored=censored,
        k_used=k,
        total_energy_j=total_energy(per_node),
        alive_nodes=alive_nodes([node.ledger for node in sim.nodes]),
        alive_fraction_threshold=0.5,
        death_times=deaths,
        packets_emitted=sum(f.emitted for f in sim.flows),
        packets_delivered=sum(f.delivered for f in sim.flows),
        packets_dropped_no_route=sum(f.dropped_no_route for f in sim.flows),
        packets_dropped_link_break=sum(f.dropped_link_break for f in sim.flows),
        packets_in_flight_at_end=sum(f.in_flight_at_end for f in sim.flows),
        per_node_energy=per_node,
        energy_by_cause=by_cause,
        counters=dict(sorted(sim.counters.items())),
        flows=flows,
    )
