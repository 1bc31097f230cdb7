"""Desk-scale MANET simulator: common-range AODV vs energy-aware
variable-range routing (EAR) under a deterministic event engine."""

from .scenario import (ScenarioConfig, ConnectionSpec, Protocol, EnergyModel,
                       WindowAnchor, ScenarioError, default_scenario,
                       load_scenario, build_scenario, generate_connections)
from .radio import (RadioParams, dbm_to_watts, watts_to_dbm, received_power,
                    required_tx_power, range_for_power, common_range_power)
from .mobility import RandomWaypoint, FixedPositions, Waypoint, distance
from .energy import EnergyLedger, EnergyParams, NodeEnergyState, LedgerError
from .routing import NodeRouting, RouteEntry, RreqMsg, RrepMsg, RerrMsg
from .ear import RrepCollector, collect_rrep, select_next_hop, assign_link_power
from .engine import Simulation, Transmission, run
from .metrics import MetricsReport, network_lifetime, total_energy, alive_nodes

__version__ = "0.1.0"
