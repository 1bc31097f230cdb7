"""On-demand hop-by-hop routing state machine (AODV core).

Each node owns one NodeRouting instance. Handlers are pure state
transitions: they mutate local routing state and return the messages to
send, leaving transmission, energy charging and scheduling to the engine.

Route replies carry the coordinates of the node that (re)sent them, which
is what lets the energy-aware mode measure candidate next-hop distances.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .mobility import distance
from .scenario import Protocol


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    n_hop_x: float          # next hop coordinates as last reported/observed
    n_hop_y: float
    hop_count: int
    dest_seq: int
    link_tx_power: float    # dBm used for data toward next_hop
    valid: bool = True
    precursors: set = field(default_factory=set)


@dataclass(frozen=True)
class RreqMsg:
    origin: int
    rreq_id: int            # per-origin counter; (origin, rreq_id) is unique
    origin_seq: int
    destination: int
    dest_seq_known: int
    hop_count: int


@dataclass(frozen=True)
class RrepMsg:
    origin: int             # who asked for the route (the reply travels to it)
    destination: int        # the route target that this reply vouches for
    dest_seq: int
    hop_count: int
    loc_x: float            # position of the node sending/forwarding this reply
    loc_y: float


@dataclass(frozen=True)
class RerrMsg:
    unreachable: tuple      # ((destination, dest_seq), ...), never empty


@dataclass(frozen=True)
class Send:
    """Outgoing message: to=None means broadcast at common range."""
    msg: object
    to: Optional[int] = None


@dataclass
class RrepOutcome:
    sends: list
    installed: Optional[RouteEntry]
    deposit: bool           # True: hand this reply to the candidate collector
    no_reverse: bool = False


class NodeRouting:
    """Routing table, discovery bookkeeping and message handlers for one node."""

    def __init__(self, node_id: int, protocol: Protocol, reply_all: bool,
                 t_wait: float, common_power_dbm: float,
                 price_link: Callable[[float], float],
                 buffer_limit: int = 64, collect_at_intermediates: bool = False):
        self.node_id = node_id
        self.protocol = protocol
        self.reply_all = reply_all
        self.t_wait = t_wait
        self.common_power_dbm = common_power_dbm
        self.price_link = price_link
        self.buffer_limit = buffer_limit
        self.collect_at_intermediates = collect_at_intermediates
        # Reply-from-cache is standard AODV; in EAR mode replies must come
        # from nodes actually on candidate paths so distances stay meaningful.
        self.intermediate_reply = protocol is Protocol.AODV
        self.table: dict[int, RouteEntry] = {}
        self.seen_rreqs: set[tuple[int, int]] = set()
        self.reply_windows: dict[tuple[int, int], tuple[float, int]] = {}
        self.seq = 0
        self.next_rreq_id = 0
        self.buffers: dict[int, deque] = {}

    # -- table helpers -----------------------------------------------------

    def valid_route(self, dest: int) -> Optional[RouteEntry]:
        entry = self.table.get(dest)
        if entry is not None and entry.valid:
            return entry
        return None

    def _install(self, dest: int, next_hop: int, coords: tuple[float, float],
                 hop_count: int, dest_seq: int, link_power: float) -> RouteEntry:
        entry = self.table.get(dest)
        if entry is None:
            entry = RouteEntry(dest, next_hop, coords[0], coords[1],
                               hop_count, dest_seq, link_power)
            self.table[dest] = entry
        else:
            entry.next_hop = next_hop
            entry.n_hop_x, entry.n_hop_y = coords
            entry.hop_count = hop_count
            entry.dest_seq = dest_seq
            entry.link_tx_power = link_power
            entry.valid = True
        return entry

    def _improves(self, dest: int, dest_seq: int, hop_count: int) -> bool:
        entry = self.table.get(dest)
        if entry is None or not entry.valid:
            return True
        if dest_seq != entry.dest_seq:
            return dest_seq > entry.dest_seq
        return hop_count < entry.hop_count

    def adopt_entry(self, entry: RouteEntry) -> RouteEntry:
        """Install a collector-selected route, keeping any existing precursors."""
        old = self.table.get(entry.destination)
        if old is not None:
            entry.precursors |= old.precursors
        self.table[entry.destination] = entry
        return entry

    def note_precursor(self, dest: int, upstream: int):
        entry = self.table.get(dest)
        if entry is not None and entry.valid:
            entry.precursors.add(upstream)

    # -- data buffering ----------------------------------------------------

    def buffer_packet(self, dest: int, packet) -> Optional[object]:
        """Queue a packet awaiting a route; returns the evicted packet if full."""
        queue = self.buffers.get(dest)
        if queue is None:
            queue = self.buffers[dest] = deque()
        dropped = None
        if len(queue) >= self.buffer_limit:
            dropped = queue.popleft()
        queue.append(packet)
        return dropped

    def take_buffered(self, dest: int) -> list:
        queue = self.buffers.pop(dest, None)
        return list(queue) if queue else []

    def buffered_count(self) -> int:
        return sum(len(q) for q in self.buffers.values())

    # -- discovery ---------------------------------------------------------

    def originate_discovery(self, destination: int, now: float) -> RreqMsg:
        """Build a fresh route request flood for `destination`."""
        self.seq += 1
        self.next_rreq_id += 1
        known = self.table.get(destination)
        msg = RreqMsg(origin=self.node_id, rreq_id=self.next_rreq_id,
                      origin_seq=self.seq, destination=destination,
                      dest_seq_known=known.dest_seq if known else 0,
                      hop_count=0)
        self.seen_rreqs.add((self.node_id, self.next_rreq_id))
        return msg

    # -- message handlers --------------------------------------------------

    def _update_reverse(self, msg: RreqMsg, sender: int,
                        sender_pos: tuple[float, float]):
        hop = msg.hop_count + 1
        if self._improves(msg.origin, msg.origin_seq, hop):
            self._install(msg.origin, sender, sender_pos, hop,
                          msg.origin_seq, self.common_power_dbm)

    def _make_rrep(self, origin: int, dest_seq: int,
                   self_pos: tuple[float, float]) -> RrepMsg:
        return RrepMsg(origin=origin, destination=self.node_id,
                       dest_seq=dest_seq, hop_count=0,
                       loc_x=self_pos[0], loc_y=self_pos[1])

    def handle_rreq(self, msg: RreqMsg, sender: int,
                    sender_pos: tuple[float, float],
                    self_pos: tuple[float, float], now: float) -> list[Send]:
        """Process one delivered route-request copy.

        Duplicates are dropped, except that a destination in reply-all mode
        answers every copy arriving within its t_wait reply window (each
        reply returns via the neighbor that delivered that copy).
        """
        key = (msg.origin, msg.rreq_id)
        if self.node_id == msg.destination and self.reply_all:
            window = self.reply_windows.get(key)
            if window is not None:
                start, dest_seq = window
                if now - start > self.t_wait:
                    return []
                return [Send(self._make_rrep(msg.origin, dest_seq, self_pos),
                             to=sender)]
            if key in self.seen_rreqs:
                return []
            self.seen_rreqs.add(key)
            self._update_reverse(msg, sender, sender_pos)
            self.seq = max(self.seq + 1, msg.dest_seq_known)
            self.reply_windows[key] = (now, self.seq)
            return [Send(self._make_rrep(msg.origin, self.seq, self_pos),
                         to=sender)]

        if key in self.seen_rreqs:
            return []
        self.seen_rreqs.add(key)
        self._update_reverse(msg, sender, sender_pos)
        if self.node_id == msg.destination:
            self.seq = max(self.seq + 1, msg.dest_seq_known)
            return [Send(self._make_rrep(msg.origin, self.seq, self_pos),
                         to=sender)]
        if self.intermediate_reply:
            entry = self.table.get(msg.destination)
            if entry is not None and entry.valid and entry.dest_seq >= msg.dest_seq_known:
                cached = RrepMsg(origin=msg.origin, destination=msg.destination,
                                 dest_seq=entry.dest_seq, hop_count=entry.hop_count,
                                 loc_x=self_pos[0], loc_y=self_pos[1])
                return [Send(cached, to=sender)]
        rebroadcast = RreqMsg(origin=msg.origin, rreq_id=msg.rreq_id,
                              origin_seq=msg.origin_seq, destination=msg.destination,
                              dest_seq_known=msg.dest_seq_known,
                              hop_count=msg.hop_count + 1)
        return [Send(rebroadcast, to=None)]

    def handle_rrep(self, msg: RrepMsg, sender: int,
                    self_pos: tuple[float, float], now: float) -> RrepOutcome:
        """Process one delivered route reply.

        At the requesting origin: install immediately in AODV mode, or hand
        the reply to the candidate collector in EAR mode. Elsewhere: install
        the forward route if it improves on what is known, then relay the
        reply upstream with this node's own coordinates.
        """
        at_origin = self.node_id == msg.origin
        collect = self.protocol is Protocol.EAR and (
            at_origin or self.collect_at_intermediates)
        if collect:
            return RrepOutcome(sends=[], installed=None, deposit=True)

        installed = None
        hop = msg.hop_count + 1
        if self._improves(msg.destination, msg.dest_seq, hop):
            link_d = max(distance(self_pos, (msg.loc_x, msg.loc_y)), 1e-3)
            installed = self._install(msg.destination, sender,
                                      (msg.loc_x, msg.loc_y), hop,
                                      msg.dest_seq, self.price_link(link_d))
        if at_origin:
            return RrepOutcome(sends=[], installed=installed, deposit=False)

        reverse = self.valid_route(msg.origin)
        if reverse is None:
            return RrepOutcome(sends=[], installed=installed, deposit=False,
                               no_reverse=True)
        upstream = reverse.next_hop
        entry = self.table.get(msg.destination)
        if entry is not None and entry.valid:
            entry.precursors.add(upstream)
        forwarded = RrepMsg(origin=msg.origin, destination=msg.destination,
                            dest_seq=msg.dest_seq, hop_count=msg.hop_count + 1,
                            loc_x=self_pos[0], loc_y=self_pos[1])
        return RrepOutcome(sends=[Send(forwarded, to=upstream)],
                           installed=installed, deposit=False)

    def handle_link_break(self, broken_next_hop: int):
        """Invalidate every route through a next hop that just failed.

        Returns (RerrMsg or None, recipient node ids, invalidated destinations).
        """
        unreachable = []
        recipients: set[int] = set()
        for dest, entry in self.table.items():
            if entry.valid and entry.next_hop == broken_next_hop:
                entry.valid = False
                unreachable.append((dest, entry.dest_seq))
                recipients |= entry.precursors
                entry.precursors = set()
        if not unreachable:
            return None, [], []
        recipients.discard(broken_next_hop)
        return (RerrMsg(tuple(unreachable)), sorted(recipients),
                [dest for dest, _ in unreachable])

    def handle_rerr(self, msg: RerrMsg, sender: int):
        """Propagate invalidations for routes that relied on the sender.

        Returns (RerrMsg or None, recipient node ids, invalidated destinations).
        """
        unreachable = []
        recipients: set[int] = set()
        for dest, seq in msg.unreachable:
            entry = self.table.get(dest)
            if entry is not None and entry.valid and entry.next_hop == sender:
                entry.valid = False
                entry.dest_seq = max(entry.dest_seq, seq)
                unreachable.append((dest, entry.dest_seq))
                recipients |= entry.precursors
                entry.precursors = set()
        if not unreachable:
            return None, [], []
        recipients.discard(sender)
        return (RerrMsg(tuple(unreachable)), sorted(recipients),
                [dest for dest, _ in unreachable])
