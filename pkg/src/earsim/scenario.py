"""Scenario definition, validation, JSON ingestion and connection seeding.

A scenario is a single flat record of every knob a run needs: arena,
traffic, radio, energy and protocol parameters plus the RNG seed.
Configs are immutable after validation and safe to share between runs.
"""

import json
import math
import random
from dataclasses import dataclass, field, fields, asdict
from enum import Enum
from typing import Optional


class Protocol(Enum):
    AODV = "AODV"
    EAR = "EAR"


class EnergyModel(Enum):
    PER_PACKET_EQ = "PER_PACKET_EQ"      # fixed per-packet joule cost from packet size
    POWER_DURATION = "POWER_DURATION"    # power draw (W) times airtime (s)


class WindowAnchor(Enum):
    FIRST_RREP = "first_rrep"   # reply-collection window opens at the first reply
    RREQ_SENT = "rreq_sent"     # window opens when the request is flooded


class ScenarioError(ValueError):
    """Raised for unparsable or invariant-violating scenario input."""


@dataclass(frozen=True)
class ScenarioConfig:
    node_count: int = 50
    area_width: float = 1000.0            # m
    area_height: float = 1000.0           # m
    connection_count: int = 25
    pause_time: float = 0.0               # s
    speed_min: float = 10.0               # m/s
    speed_max: float = 10.0               # m/s
    traffic_packet_size: int = 512        # bytes
    traffic_rate: float = 4.0             # packets/s
    sim_duration: float = 200.0           # s
    initial_energy: float = 100.0         # J
    tx_power_common: float = 5.0          # W, accounting draw for common-range tx
    rx_power: float = 1.0                 # W
    idle_power: float = 0.0005            # W
    sleep_power: float = 0.0002           # W
    transition_power: float = 0.03        # W, sleep -> active wakeup draw
    bandwidth: float = 2e6                # bit/s
    frequency: float = 2.4e9              # Hz
    rx_threshold: float = -84.0           # dBm
    common_range: float = 250.0           # m
    t_wait: float = 0.1                   # s, reply-collection window
    protocol: Protocol = Protocol.AODV
    energy_model: EnergyModel = EnergyModel.POWER_DURATION
    rng_seed: int = 1
    # Behavioral knobs beyond the headline parameters. Defaults are the
    # documented baseline behavior; each exists because the alternative is
    # a defensible reading of the protocol.
    control_packet_size: int = 64         # bytes for RREQ/RREP/RERR
    rreq_retries: int = 2
    rreq_backoff: float = 0.5             # s, doubles per retry
    buffer_limit: int = 64                # queued data packets per destination
    power_margin: float = 1.0             # link power priced at distance*margin
    reply_all: Optional[bool] = None      # None -> on for EAR, off for AODV
    window_anchor: WindowAnchor = WindowAnchor.FIRST_RREP
    intermediate_collect: bool = False    # forwarding nodes run their own collectors
    charge_overhearers: bool = False      # in-range bystanders pay rx for unicasts
    use_friis_common_power: bool = False  # charge common tx at link-budget watts, not tx_power_common
    tx_power_offset: float = 0.0          # W added to every duration-model tx draw

    def __post_init__(self):
        if self.reply_all is None:
            object.__setattr__(self, "reply_all", self.protocol is Protocol.EAR)
        _validate(self)

    def to_json(self, **dump_kwargs) -> str:
        """Serialize to the flat JSON document accepted by load_scenario."""
        raw = asdict(self)
        for key, value in raw.items():
            if isinstance(value, Enum):
                raw[key] = value.value
        return json.dumps(raw, indent=2, **dump_kwargs)


_FIELD_NAMES = {f.name for f in fields(ScenarioConfig)}
_ENUM_FIELDS = {"protocol": Protocol, "energy_model": EnergyModel,
                "window_anchor": WindowAnchor}
_INT_FIELDS = ("node_count", "connection_count", "traffic_packet_size",
               "control_packet_size", "rreq_retries", "buffer_limit",
               "rng_seed")


def _require(cond: bool, message: str):
    if not cond:
        raise ScenarioError(f"invalid scenario: {message}")


def _validate(cfg: "ScenarioConfig"):
    _require(cfg.node_count >= 1, "node_count must be a positive integer")
    _require(cfg.area_width > 0 and cfg.area_height > 0,
             "area_width and area_height must be > 0")
    _require(cfg.connection_count >= 0, "connection_count must be >= 0")
    _require(cfg.connection_count <= cfg.node_count * (cfg.node_count - 1),
             "connection_count exceeds the number of ordered node pairs")
    _require(cfg.pause_time >= 0, "pause_time must be >= 0")
    _require(0 < cfg.speed_min <= cfg.speed_max, "speed_min ≤ speed_max and both > 0")
    _require(cfg.traffic_packet_size >= 0, "traffic_packet_size must be >= 0")
    _require(cfg.traffic_rate > 0, "traffic_rate must be > 0")
    _require(cfg.sim_duration > 0, "sim_duration must be > 0")
    _require(cfg.initial_energy > 0, "initial_energy must be > 0")
    for name in ("tx_power_common", "rx_power", "idle_power", "sleep_power",
                 "transition_power", "tx_power_offset"):
        _require(getattr(cfg, name) >= 0, f"{name} must be >= 0")
    _require(cfg.bandwidth > 0, "bandwidth must be > 0")
    _require(cfg.frequency > 0, "frequency must be > 0")
    _require(cfg.common_range > 0, "common_range must be > 0")
    _require(cfg.t_wait > 0, "t_wait must be > 0")
    _require(cfg.control_packet_size > 0, "control_packet_size must be > 0")
    _require(cfg.rreq_retries >= 0, "rreq_retries must be >= 0")
    _require(cfg.rreq_backoff > 0, "rreq_backoff must be > 0")
    _require(cfg.buffer_limit >= 1, "buffer_limit must be >= 1")
    _require(cfg.power_margin >= 1.0, "power_margin must be >= 1.0")
    _require(cfg.rng_seed >= 0 and cfg.rng_seed < 2 ** 64,
             "rng_seed must fit in 64 unsigned bits")


def default_connection_count(node_count: int) -> int:
    """Half the nodes, clamped to the number of ordered pairs available."""
    return min(math.ceil(node_count / 2), node_count * (node_count - 1))


def build_scenario(raw: dict) -> ScenarioConfig:
    """Construct a config from a partial field dict, applying defaults.

    Derived defaults: connection_count follows the half-of-nodes rule when
    unset, and reply_all follows the protocol choice when unset.
    """
    unknown = set(raw) - _FIELD_NAMES
    if unknown:
        raise ScenarioError(
            f"unknown scenario field(s): {', '.join(sorted(unknown))}")
    values = dict(raw)
    for name, enum_cls in _ENUM_FIELDS.items():
        if name in values and not isinstance(values[name], enum_cls):
            try:
                values[name] = enum_cls(values[name])
            except ValueError:
                options = ", ".join(e.value for e in enum_cls)
                raise ScenarioError(
                    f"invalid scenario: {name} must be one of {options}") from None
    for name in _INT_FIELDS:
        value = values.get(name)
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)) or \
                (isinstance(value, float) and not value.is_integer()):
            raise ScenarioError(f"invalid scenario: {name} must be an integer")
        values[name] = int(value)
    if "connection_count" not in values:
        node_count = values.get("node_count", ScenarioConfig.node_count)
        if not isinstance(node_count, int) or node_count < 1:
            raise ScenarioError("invalid scenario: node_count must be a positive integer")
        values["connection_count"] = default_connection_count(node_count)
    return ScenarioConfig(**values)


def default_scenario() -> ScenarioConfig:
    """The baseline desk-scale setup: 50 nodes on a 1 km square arena."""
    return ScenarioConfig()


def load_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a UTF-8 JSON scenario document.

    Fields absent from the document take their defaults; unknown fields are
    rejected outright so typos cannot silently configure nothing.
    An empty document yields default_scenario().
    """
    if not text.strip():
        return default_scenario()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"scenario parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario document must be a single JSON object")
    return build_scenario(raw)


@dataclass(frozen=True)
class ConnectionSpec:
    """One CBR flow: ordered (source, destination) pair starting at t=0."""
    source: int
    destination: int
    start_time: float = 0.0

    def __post_init__(self):
        if self.source == self.destination:
            raise ScenarioError("connection source and destination must differ")


def generate_connections(cfg: ScenarioConfig, rng: random.Random) -> list[ConnectionSpec]:
    """Draw connection_count distinct ordered pairs uniformly, no self-pairs.

    Pairs are sampled without replacement from the full (src, dst) index
    space, so the result is deterministic for a given generator state.
    """
    n = cfg.node_count
    indices = rng.sample(range(n * (n - 1)), cfg.connection_count)
    connections = []
    for idx in indices:
        src, rem = divmod(idx, n - 1)
        dst = rem if rem < src else rem + 1
        connections.append(ConnectionSpec(source=src, destination=dst))
    return connections


def substream(seed: int, label: str) -> random.Random:
    """Independent deterministic RNG stream derived from the scenario seed.

    String seeding hashes through SHA-512 inside random.Random, so streams
    are stable across interpreter runs and immune to hash randomization.
    """
    return random.Random(f"{seed}/{label}")
