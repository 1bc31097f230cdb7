"""Per-node energy ledger.

Two accounting models coexist and are selected per run:

* PER_PACKET_EQ: a packet costs a fixed per-bit coefficient over the
  channel rate (1.65 for transmit, 1.1 for receive), independent of the
  radio power actually used.
* POWER_DURATION: a packet costs the configured power draw (W) times its
  airtime (s), so variable-range transmit power directly scales cost.

Idle/sleep drain is charged lazily over elapsed intervals; if the battery
empties mid-interval the death instant is solved exactly, not rounded to
the query time.
"""

from dataclasses import dataclass, field
from enum import Enum

from .scenario import EnergyModel


class NodeEnergyState(Enum):
    IDLE = "IDLE"
    SLEEP = "SLEEP"
    TX = "TX"
    RX = "RX"
    DEAD = "DEAD"


class LedgerError(RuntimeError):
    """Contract violation: charging a dead ledger, time running backwards, etc."""


@dataclass(frozen=True)
class EnergyParams:
    initial: float                  # J
    model: EnergyModel
    bandwidth: float                # bit/s
    idle_power: float               # W
    sleep_power: float              # W
    transition_power: float         # W
    rx_power: float                 # W (duration model)
    tx_power_offset: float = 0.0    # W added to every duration-model tx draw
    tx_coeff: float = 1.65          # per-bit tx coefficient (per-packet model)
    rx_coeff: float = 1.1           # per-bit rx coefficient (per-packet model)


# Causes tracked in the consumption split. Packet charges distinguish control
# from data so protocol comparisons can isolate the data-plane cost.
CAUSES = ("tx_control", "tx_data", "rx_control", "rx_data",
          "idle", "sleep", "transition")


class EnergyLedger:
    """Mutable battery state for one node of one run."""

    __slots__ = ("params", "initial", "remaining", "state", "state_since",
                 "totals", "death_time", "alive")

    def __init__(self, params: EnergyParams):
        self.params = params
        self.initial = params.initial
        self.remaining = params.initial
        self.state = NodeEnergyState.IDLE
        self.state_since = 0.0
        self.totals = dict.fromkeys(CAUSES, 0.0)
        self.death_time: float | None = None
        self.alive = True  # mirrors state is not DEAD; hot-path flag

    def _die(self, when: float):
        self.remaining = 0.0
        self.state = NodeEnergyState.DEAD
        self.alive = False
        self.death_time = when
        self.state_since = when

    def _drain(self, amount: float, cause: str, now: float) -> float:
        """Deduct up to `amount`, recording death at `now` on exhaustion."""
        charged = amount if amount < self.remaining else self.remaining
        self.totals[cause] += charged
        if amount < self.remaining:
            self.remaining -= amount
        else:
            self._die(now)
        return charged

    def charge_tx(self, packet_bytes: int, tx_power_w: float, now: float,
                  control: bool = False) -> float:
        """Charge one packet transmission; returns joules actually deducted.

        Under PER_PACKET_EQ the cost ignores tx_power_w entirely. The packet
        still goes out even if this charge empties the battery; the caller
        must stop scheduling the node afterwards.
        """
        if not self.alive:
            raise LedgerError("charge_tx on a dead ledger")
        bits = packet_bytes * 8
        if self.params.model is EnergyModel.PER_PACKET_EQ:
            amount = self.params.tx_coeff * bits / self.params.bandwidth
        else:
            amount = (tx_power_w + self.params.tx_power_offset) * bits / self.params.bandwidth
        return self._drain(amount, "tx_control" if control else "tx_data", now)

    def charge_rx(self, packet_bytes: int, rx_power_w: float, now: float,
                  control: bool = False) -> float:
        """Charge one packet reception; cost never depends on link distance."""
        if not self.alive:
            raise LedgerError("charge_rx on a dead ledger")
        bits = packet_bytes * 8
        if self.params.model is EnergyModel.PER_PACKET_EQ:
            amount = self.params.rx_coeff * bits / self.params.bandwidth
        else:
            amount = rx_power_w * bits / self.params.bandwidth
        return self._drain(amount, "rx_control" if control else "rx_data", now)

    def charge_elapsed(self, now: float) -> float:
        """Charge idle or sleep drain for the interval since the last charge.

        If the battery empties inside the interval, death_time is the exact
        linear crossing instant. No-op on an already-dead ledger.
        """
        if now == self.state_since or not self.alive:
            return 0.0
        if now < self.state_since:
            raise LedgerError(f"time ran backwards: {now} < {self.state_since}")
        if self.state is NodeEnergyState.SLEEP:
            rate, cause = self.params.sleep_power, "sleep"
        else:
            rate, cause = self.params.idle_power, "idle"
        amount = rate * (now - self.state_since)
        if amount < self.remaining:
            self.remaining -= amount
            self.totals[cause] += amount
            self.state_since = now
            return amount
        charged = self.remaining
        self.totals[cause] += charged
        self._die(self.state_since + (charged / rate if rate > 0 else 0.0))
        return charged

    def charge_transition(self, duration: float) -> float:
        """Wake from SLEEP to IDLE, paying the transition draw for `duration`."""
        if self.state is not NodeEnergyState.SLEEP:
            raise LedgerError("charge_transition requires the SLEEP state")
        if duration < 0:
            raise LedgerError("negative transition duration")
        rate = self.params.transition_power
        amount = rate * duration
        if amount < self.remaining:
            self.remaining -= amount
            self.totals["transition"] += amount
            self.state = NodeEnergyState.IDLE
            self.state_since += duration
            return amount
        charged = self.remaining
        self.totals["transition"] += charged
        self._die(self.state_since + (charged / rate if rate > 0 else 0.0))
        return charged

    def enter_sleep(self, now: float):
        """Switch the drain rate to the sleep draw from `now` on."""
        self.charge_elapsed(now)
        if self.alive:
            self.state = NodeEnergyState.SLEEP

    def is_alive_at_threshold(self, fraction: float) -> bool:
        """Strictly more than `fraction` of the initial energy left."""
        if not 0.0 <= fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        return self.remaining > fraction * self.initial

    def consumed(self) -> float:
        return self.initial - self.remaining

    def conservation_error(self) -> float:
        """Relative mismatch between the totals split and the balance."""
        return abs(self.initial - self.remaining - sum(self.totals.values())) / self.initial
