"""Deterministic discrete-event simulation core.

One run is strictly single-threaded over a (time, seq) ordered event heap,
so identical configs produce bit-identical traces. The MAC is idealized:
no collisions, no retransmissions, zero propagation delay; a transmission
is received iff the receiver sits within the power-determined range at the
moment transmission starts. Airtime (bits over bandwidth) is the only
latency. Runtime anomalies never abort a run; they become counters.
"""

import csv
import heapq
import math
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from . import ear
from .energy import EnergyLedger, EnergyParams
from .mobility import FixedPositions, RandomWaypoint, distance
from .radio import RadioParams, common_range_power, dbm_to_watts
from .routing import NodeRouting, RerrMsg, RreqMsg, RrepMsg
from .scenario import (ConnectionSpec, Protocol, ScenarioConfig, WindowAnchor,
                       generate_connections, substream)

# Event kinds (heap entries are (time, seq, kind, payload); seq is unique so
# comparison never reaches the payload).
DELIVERY, CBR_EMIT, COLLECTOR_DEADLINE, DISCOVERY_RETRY, TRACE_SAMPLE = range(5)

# Delivered payload kinds.
DATA, RREQ, RREP, RERR = range(4)

_MSG_KIND = {RreqMsg: RREQ, RrepMsg: RREP, RerrMsg: RERR}
_TX_EVENT = {RREQ: "RREQ_TX", RREP: "RREP_TX", RERR: "RERR_TX"}

# Reception boundary is inclusive; this absorbs float noise in the
# power -> range -> power round trip at exactly-threshold distances.
RECEPTION_EPS = 1e-9


@dataclass(frozen=True)
class Transmission:
    """One radio emission: propagation range and accounting draw resolved."""
    sender: int
    pt_dbm: float               # link-budget power, determines range
    charge_w: float             # accounting draw under the duration model
    range_m: float
    kind: int                   # DATA / RREQ / RREP / RERR
    payload: object
    to: Optional[int]           # None = broadcast
    start: float
    airtime: float
    size_bytes: int


@dataclass
class FlowStats:
    source: int
    destination: int
    emitted: int = 0
    delivered: int = 0
    dropped_no_route: int = 0
    dropped_link_break: int = 0
    in_flight_at_end: int = 0


class Node:
    __slots__ = ("id", "ledger", "routing", "collectors")

    def __init__(self, node_id: int, ledger: EnergyLedger, routing: NodeRouting):
        self.id = node_id
        self.ledger = ledger
        self.routing = routing
        self.collectors: dict[tuple[int, int], ear.RrepCollector] = {}


class TraceWriters:
    """CSV trace files for one run; the engine owns their lifecycle."""

    def __init__(self, directory: str):
        os.makedirs(directory, exist_ok=True)
        self.directory = directory
        self._files = []
        self.mobility = self._open("mobility.csv", ["time", "node", "x", "y"])
        self.energy = self._open("energy.csv",
                                 ["time", "node", "remaining_j", "state"])
        self.routing = self._open("routing.csv",
                                  ["time", "node", "event", "detail"])
        self.ear = self._open("ear.csv",
                              ["time", "node", "destination", "chosen_neighbor",
                               "distance_m", "pt_dbm", "candidates"])

    def _open(self, name: str, header: list[str]):
        handle = open(os.path.join(self.directory, name), "w",
                      newline="", encoding="utf-8")
        self._files.append(handle)
        writer = csv.writer(handle)
        writer.writerow(header)
        return writer

    def close(self):
        for handle in self._files:
            handle.close()
        self._files = []


class Simulation:
    """One scenario execution. Build, call run(), then inspect state/report.

    positions/connections override the seeded draws for hand-built
    topologies (static tests); they are not part of the scenario file.
    """

    def __init__(self, cfg: ScenarioConfig,
                 positions: Optional[list[tuple[float, float]]] = None,
                 connections: Optional[list[ConnectionSpec]] = None,
                 static: bool = False,
                 trace_dir: Optional[str] = None,
                 trace_interval: float = 1.0):
        self.cfg = cfg
        self.radio = RadioParams(frequency=cfg.frequency,
                                 rx_threshold=cfg.rx_threshold)
        self.common_power_dbm = common_range_power(self.radio, cfg.common_range)
        if cfg.use_friis_common_power:
            self.common_charge_w = dbm_to_watts(self.common_power_dbm)
        else:
            self.common_charge_w = cfg.tx_power_common
        self.ear_mode = cfg.protocol is Protocol.EAR
        if static:
            if positions is None:
                raise ValueError("static runs need explicit positions")
            self.mobility = FixedPositions(positions)
        else:
            self.mobility = RandomWaypoint(cfg, initial_positions=positions)
        # positions are pure in (node, time); memoizing per event time saves
        # recomputing the whole arena during same-instant flood waves
        self._pos_cache: dict[int, tuple[float, float]] = {}
        self._pos_cache_time = -1.0
        if connections is None:
            connections = generate_connections(cfg, substream(cfg.rng_seed,
                                                              "connections"))
        self.connections = connections
        self.flows = [FlowStats(c.source, c.destination) for c in connections]
        self.flow_interest: dict[int, set[int]] = defaultdict(set)
        for c in connections:
            self.flow_interest[c.source].add(c.destination)

        energy_params = EnergyParams(
            initial=cfg.initial_energy, model=cfg.energy_model,
            bandwidth=cfg.bandwidth, idle_power=cfg.idle_power,
            sleep_power=cfg.sleep_power, transition_power=cfg.transition_power,
            rx_power=cfg.rx_power, tx_power_offset=cfg.tx_power_offset)
        if self.ear_mode:
            price_link = lambda d: ear.assign_link_power(d, self.radio,
                                                         cfg.power_margin)
        else:
            price_link = lambda d: self.common_power_dbm
        self.nodes = [
            Node(i, EnergyLedger(energy_params),
                 NodeRouting(i, cfg.protocol, cfg.reply_all, cfg.t_wait,
                             self.common_power_dbm, price_link,
                             buffer_limit=cfg.buffer_limit,
                             collect_at_intermediates=cfg.intermediate_collect))
            for i in range(cfg.node_count)
        ]

        self.counters: dict[str, int] = defaultdict(int)
        self.discoveries: dict[tuple[int, int], int] = {}
        self.data_airtime = cfg.traffic_packet_size * 8 / cfg.bandwidth
        self.control_airtime = cfg.control_packet_size * 8 / cfg.bandwidth
        self.ttl_limit = cfg.node_count
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.finished = False
        self.traces = TraceWriters(trace_dir) if trace_dir else None
        self.trace_interval = trace_interval

    # -- scheduling ----------------------------------------------------------

    def _push(self, time: float, kind: int, payload):
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, kind, payload))

    def _pos(self, node_id: int, t: float) -> tuple[float, float]:
        if t != self._pos_cache_time:
            self._pos_cache.clear()
            self._pos_cache_time = t
        pos = self._pos_cache.get(node_id)
        if pos is None:
            pos = self.mobility.position_at(node_id, t)
            self._pos_cache[node_id] = pos
        return pos

    # -- main loop -----------------------------------------------------------

    def run(self):
        """Execute all events in [0, sim_duration] and return the run report."""
        from .metrics import build_report
        if self.finished:
            raise RuntimeError("a Simulation instance runs exactly once")
        duration = self.cfg.sim_duration
        for idx, conn in enumerate(self.connections):
            self._push(conn.start_time, CBR_EMIT, (idx, 0))
        if self.traces:
            self._push(0.0, TRACE_SAMPLE, 0)
        heap = self._heap
        while heap and heap[0][0] <= duration:
            time, _, kind, payload = heapq.heappop(heap)
            self.now = time
            if kind == DELIVERY:
                self._handle_delivery(time, payload)
            elif kind == CBR_EMIT:
                self._handle_emit(time, payload)
            elif kind == COLLECTOR_DEADLINE:
                self._handle_deadline(time, payload)
            elif kind == DISCOVERY_RETRY:
                self._handle_retry(time, payload)
            else:
                self._handle_sample(time, payload)
        self.now = duration
        self._finalize(duration)
        return build_report(self)

    def _finalize(self, duration: float):
        for node in self.nodes:
            node.ledger.charge_elapsed(duration)
        for _, _, kind, payload in self._heap:
            if kind == DELIVERY and payload[0] == DATA:
                self.flows[payload[3][0]].in_flight_at_end += 1
        for node in self.nodes:
            for dest, queue in node.routing.buffers.items():
                for pkt in queue:
                    self.flows[pkt[0]].in_flight_at_end += 1
        if self.traces:
            self._write_sample_rows(duration)
            self.traces.close()
        self.finished = True

    # -- transmission --------------------------------------------------------

    def transmit(self, tx: Transmission):
        """Charge the sender and schedule deliveries for one emission.

        A sender that empties its battery on this very charge still gets the
        packet out; it just never transmits again. Receivers are the nodes
        inside tx.range_m at tx.start (inclusive boundary): all of them for
        a broadcast, only the addressee for a unicast.
        """
        node = self.nodes[tx.sender]
        node.ledger.charge_tx(tx.size_bytes, tx.charge_w, tx.start,
                              control=tx.kind != DATA)
        sender_pos = self._pos(tx.sender, tx.start)
        arrive = tx.start + tx.airtime
        limit = tx.range_m + RECEPTION_EPS
        if tx.to is None:
            sx, sy = sender_pos
            hypot = math.hypot
            pos = self._pos
            start = tx.start
            for other in self.nodes:
                if other.id != tx.sender and other.ledger.alive:
                    ox, oy = pos(other.id, start)
                    if hypot(sx - ox, sy - oy) <= limit:
                        self._push(arrive, DELIVERY,
                                   (tx.kind, other.id, tx.sender, tx.payload,
                                    sender_pos))
        else:
            target = self.nodes[tx.to]
            if target.ledger.alive and \
                    distance(sender_pos, self._pos(tx.to, tx.start)) <= limit:
                self._push(arrive, DELIVERY,
                           (tx.kind, tx.to, tx.sender, tx.payload, sender_pos))
            else:
                self.counters["control_undeliverable"] += 1
            if tx.kind == DATA and self.cfg.charge_overhearers:
                self._charge_overhearers(tx, sender_pos, limit)

    def _charge_overhearers(self, tx: Transmission, sender_pos, limit):
        for other in self.nodes:
            if other.id in (tx.sender, tx.to) or not other.ledger.alive:
                continue
            if distance(sender_pos, self._pos(other.id, tx.start)) <= limit:
                other.ledger.charge_elapsed(tx.start)
                if other.ledger.alive:
                    other.ledger.charge_rx(tx.size_bytes, self.cfg.rx_power,
                                           tx.start, control=False)

    def _transmit_control(self, node: Node, msg, to: Optional[int], now: float):
        led = node.ledger
        if led.alive:
            led.charge_elapsed(now)
        if not led.alive:
            return
        kind = _MSG_KIND[type(msg)]
        self.counters[_TX_EVENT[kind].lower()] += 1
        if self.traces:
            self._trace_routing(now, node.id, _TX_EVENT[kind],
                                self._describe(msg, to))
        self.transmit(Transmission(
            sender=node.id, pt_dbm=self.common_power_dbm,
            charge_w=self.common_charge_w, range_m=self.cfg.common_range,
            kind=kind, payload=msg, to=to, start=now,
            airtime=self.control_airtime,
            size_bytes=self.cfg.control_packet_size))

    # -- data path -------------------------------------------------------------

    def _forward_data(self, node: Node, pkt: list, now: float):
        """Send one data packet along the node's current route, or fail it."""
        flow = self.flows[pkt[0]]
        led = node.ledger
        if led.alive:
            led.charge_elapsed(now)
        if not led.alive:
            flow.dropped_link_break += 1
            return
        entry = node.routing.valid_route(flow.destination)
        if entry is None:
            flow.dropped_no_route += 1
            return
        pkt[1] -= 1
        if pkt[1] < 0:
            # unreachable if tables are loop-free; kept as a hard stop
            flow.dropped_no_route += 1
            self.counters["ttl_drops"] += 1
            return
        next_hop = entry.next_hop
        self_pos = self._pos(node.id, now)
        if not self.nodes[next_hop].ledger.alive:
            flow.dropped_link_break += 1
            self._break_link(node, next_hop, now)
            return
        hop_pos = self._pos(next_hop, now)
        if self.ear_mode:
            power = ear.refresh_link_power(entry, self_pos, hop_pos, self.radio,
                                           self.cfg.power_margin,
                                           self.cfg.common_range)
            if power is None:
                flow.dropped_link_break += 1
                self._break_link(node, next_hop, now)
                return
            range_m = distance(self_pos, hop_pos) * self.cfg.power_margin
            charge_w = dbm_to_watts(power)
        else:
            if distance(self_pos, hop_pos) > self.cfg.common_range:
                flow.dropped_link_break += 1
                self._break_link(node, next_hop, now)
                return
            power = self.common_power_dbm
            range_m = self.cfg.common_range
            charge_w = self.common_charge_w
        self.counters["data_tx"] += 1
        self.transmit(Transmission(
            sender=node.id, pt_dbm=power, charge_w=charge_w, range_m=range_m,
            kind=DATA, payload=pkt, to=next_hop, start=now,
            airtime=self.data_airtime, size_bytes=self.cfg.traffic_packet_size))

    def _break_link(self, node: Node, broken: int, now: float):
        rerr, recipients, invalidated = node.routing.handle_link_break(broken)
        if self.traces:
            for dest in invalidated:
                self._trace_routing(now, node.id, "ROUTE_INVALIDATE",
                                    f"dest={dest} via={broken}")
        if rerr is not None:
            self.counters["link_breaks"] += 1
            for upstream in recipients:
                self._transmit_control(node, rerr, upstream, now)
        for dest in invalidated:
            self._maybe_rediscover(node, dest, now)

    def _maybe_rediscover(self, node: Node, dest: int, now: float):
        interested = (dest in self.flow_interest.get(node.id, ()) or
                      node.routing.buffers.get(dest))
        if interested and node.routing.valid_route(dest) is None:
            self._ensure_discovery(node, dest, now)

    def _flush_buffered(self, node: Node, dest: int, now: float):
        for pkt in node.routing.take_buffered(dest):
            self._forward_data(node, pkt, now)

    # -- discovery lifecycle ---------------------------------------------------

    def _ensure_discovery(self, node: Node, dest: int, now: float):
        key = (node.id, dest)
        if key in self.discoveries or not node.ledger.alive:
            return
        self.discoveries[key] = 1
        self.counters["discoveries"] += 1
        msg = node.routing.originate_discovery(dest, now)
        self._transmit_control(node, msg, None, now)
        if self.ear_mode and self.cfg.window_anchor is WindowAnchor.RREQ_SENT:
            self._open_collector(node, node.id, dest, now)
        self._push(now + self.cfg.rreq_backoff, DISCOVERY_RETRY, key)

    def _open_collector(self, node: Node, origin: int, dest: int, now: float):
        collector = ear.open_collector(dest, origin, now, self.cfg.t_wait)
        node.collectors[(origin, dest)] = collector
        self._push(collector.deadline, COLLECTOR_DEADLINE,
                   (node.id, origin, dest))
        return collector

    def _handle_retry(self, now: float, key):
        attempts = self.discoveries.get(key)
        if attempts is None:
            return
        node_id, dest = key
        node = self.nodes[node_id]
        if not node.ledger.alive:
            del self.discoveries[key]
            return
        if node.routing.valid_route(dest) is not None:
            del self.discoveries[key]
            return
        if (node_id, dest) in node.collectors:
            # replies are being collected; check again once the window closed
            self._push(now + self.cfg.t_wait, DISCOVERY_RETRY, key)
            return
        if attempts <= self.cfg.rreq_retries:
            self.discoveries[key] = attempts + 1
            self.counters["discovery_retries"] += 1
            msg = node.routing.originate_discovery(dest, now)
            self._transmit_control(node, msg, None, now)
            if self.ear_mode and self.cfg.window_anchor is WindowAnchor.RREQ_SENT:
                self._open_collector(node, node_id, dest, now)
            self._push(now + self.cfg.rreq_backoff * 2 ** attempts,
                       DISCOVERY_RETRY, key)
        else:
            del self.discoveries[key]
            self.counters["discovery_failures"] += 1
            for pkt in node.routing.take_buffered(dest):
                self.flows[pkt[0]].dropped_no_route += 1

    # -- event handlers ----------------------------------------------------------

    def _handle_emit(self, now: float, payload):
        flow_idx, k = payload
        flow = self.flows[flow_idx]
        node = self.nodes[flow.source]
        led = node.ledger
        if led.alive:
            led.charge_elapsed(now)
        if not led.alive:
            return  # a dead source emits nothing and never reschedules
        flow.emitted += 1
        pkt = [flow_idx, self.ttl_limit]
        if node.routing.valid_route(flow.destination) is not None:
            self._forward_data(node, pkt, now)
        else:
            evicted = node.routing.buffer_packet(flow.destination, pkt)
            if evicted is not None:
                self.flows[evicted[0]].dropped_no_route += 1
            self._ensure_discovery(node, flow.destination, now)
        conn = self.connections[flow_idx]
        next_time = conn.start_time + (k + 1) / self.cfg.traffic_rate
        if next_time < self.cfg.sim_duration:
            self._push(next_time, CBR_EMIT, (flow_idx, k + 1))

    def _handle_delivery(self, now: float, payload):
        kind, receiver, sender, msg, sender_pos = payload
        node = self.nodes[receiver]
        led = node.ledger
        if led.alive:
            led.charge_elapsed(now)
        if not led.alive:
            if kind == DATA:
                self.flows[msg[0]].dropped_link_break += 1
            else:
                self.counters["control_to_dead"] += 1
            return
        led.charge_rx(self.cfg.traffic_packet_size if kind == DATA
                      else self.cfg.control_packet_size,
                      self.cfg.rx_power, now, control=kind != DATA)
        if kind == DATA:
            flow = self.flows[msg[0]]
            if flow.destination == receiver:
                flow.delivered += 1
            elif not led.alive:
                flow.dropped_link_break += 1
            else:
                node.routing.note_precursor(flow.destination, sender)
                self._forward_data(node, msg, now)
            return
        if not led.alive:
            return
        if kind == RREQ:
            self.counters["rreq_rx"] += 1
            if self.traces:
                self._trace_routing(now, receiver, "RREQ_RX",
                                    self._describe(msg, sender))
            sends = node.routing.handle_rreq(msg, sender, sender_pos,
                                             self._pos(receiver, now), now)
            for send in sends:
                self._transmit_control(node, send.msg, send.to, now)
        elif kind == RREP:
            self._handle_rrep_delivery(node, msg, sender, sender_pos, now)
        else:
            rerr, recipients, invalidated = node.routing.handle_rerr(msg, sender)
            if self.traces:
                for dest in invalidated:
                    self._trace_routing(now, receiver, "ROUTE_INVALIDATE",
                                        f"dest={dest} via={sender}")
            if rerr is not None:
                for upstream in recipients:
                    self._transmit_control(node, rerr, upstream, now)
            for dest in invalidated:
                self._maybe_rediscover(node, dest, now)

    def _handle_rrep_delivery(self, node: Node, msg: RrepMsg, sender: int,
                              sender_pos, now: float):
        self.counters["rrep_rx"] += 1
        if self.traces:
            self._trace_routing(now, node.id, "RREP_RX",
                                self._describe(msg, sender))
        outcome = node.routing.handle_rrep(msg, sender,
                                           self._pos(node.id, now), now)
        if outcome.deposit:
            self._deposit_rrep(node, msg, sender, sender_pos, now)
            return
        if outcome.no_reverse:
            self.counters["rrep_no_reverse"] += 1
        if outcome.installed is not None:
            self.counters["route_installs"] += 1
            if self.traces:
                entry = outcome.installed
                self._trace_routing(now, node.id, "ROUTE_INSTALL",
                                    f"dest={entry.destination} "
                                    f"next={entry.next_hop} hops={entry.hop_count}")
            if node.id == msg.origin:
                self.discoveries.pop((node.id, msg.destination), None)
                self._flush_buffered(node, msg.destination, now)
        for send in outcome.sends:
            self._transmit_control(node, send.msg, send.to, now)

    def _deposit_rrep(self, node: Node, msg: RrepMsg, sender: int,
                      sender_pos, now: float):
        key = (msg.origin, msg.destination)
        collector = node.collectors.get(key)
        if collector is None:
            if node.id == msg.origin:
                # at the origin a reply only opens a window while its own
                # discovery is still waiting and nothing has been selected
                if node.routing.valid_route(msg.destination) is not None or \
                        (node.id, msg.destination) not in self.discoveries:
                    self.counters["late_rrep"] += 1
                    return
            collector = self._open_collector(node, msg.origin,
                                             msg.destination, now)
        neighbor_pos = (msg.loc_x, msg.loc_y)
        if not ear.collect_rrep(collector, msg, sender, neighbor_pos, now):
            self.counters["late_rrep"] += 1

    def _handle_deadline(self, now: float, payload):
        node_id, origin, dest = payload
        node = self.nodes[node_id]
        collector = node.collectors.pop((origin, dest), None)
        if collector is None or not node.ledger.alive:
            return
        self_pos = self._pos(node_id, now)
        entry = ear.select_next_hop(collector, self_pos, self.radio,
                                    self.cfg.power_margin)
        if entry is None:
            return  # empty window; the pending retry event refloods
        node.routing.adopt_entry(entry)
        self.counters["route_installs"] += 1
        if self.traces:
            self._trace_routing(now, node_id, "ROUTE_INSTALL",
                                f"dest={dest} next={entry.next_hop} "
                                f"hops={entry.hop_count}")
            chosen_d = distance(self_pos, (entry.n_hop_x, entry.n_hop_y))
            self.traces.ear.writerow([repr(now), node_id, dest, entry.next_hop,
                                      repr(chosen_d), repr(entry.link_tx_power),
                                      len(collector.candidates)])
        if node_id == origin:
            self.discoveries.pop((node_id, dest), None)
            self._flush_buffered(node, dest, now)
        else:
            reverse = node.routing.valid_route(origin)
            if reverse is None:
                self.counters["rrep_no_reverse"] += 1
                return
            entry.precursors.add(reverse.next_hop)
            forwarded = RrepMsg(origin=origin, destination=dest,
                                dest_seq=entry.dest_seq,
                                hop_count=entry.hop_count,
                                loc_x=self_pos[0], loc_y=self_pos[1])
            self._transmit_control(node, forwarded, reverse.next_hop, now)

    def _handle_sample(self, now: float, k: int):
        self._write_sample_rows(now)
        next_time = (k + 1) * self.trace_interval
        if next_time < self.cfg.sim_duration:
            self._push(next_time, TRACE_SAMPLE, k + 1)

    # -- tracing -----------------------------------------------------------------

    def _write_sample_rows(self, now: float):
        for node in self.nodes:
            x, y = self._pos(node.id, now)
            self.traces.mobility.writerow([repr(now), node.id, repr(x), repr(y)])
            led = node.ledger
            led.charge_elapsed(now)
            self.traces.energy.writerow([repr(now), node.id,
                                         repr(led.remaining), led.state.value])

    def _trace_routing(self, now: float, node_id: int, event: str, detail: str):
        self.traces.routing.writerow([repr(now), node_id, event, detail])

    @staticmethod
    def _describe(msg, peer) -> str:
        if isinstance(msg, RreqMsg):
            return (f"origin={msg.origin} id={msg.rreq_id} "
                    f"dest={msg.destination} hops={msg.hop_count} peer={peer}")
        if isinstance(msg, RrepMsg):
            return (f"origin={msg.origin} dest={msg.destination} "
                    f"hops={msg.hop_count} peer={peer}")
        return f"unreachable={len(msg.unreachable)} peer={peer}"


def run(cfg: ScenarioConfig, **kwargs):
    """Build and execute one simulation; returns its MetricsReport."""
    return Simulation(cfg, **kwargs).run()
