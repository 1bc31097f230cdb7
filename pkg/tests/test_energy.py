"""Energy ledger: both accounting models, drain intervals, death, conservation."""

import random

import pytest

from earsim.energy import (CAUSES, EnergyLedger, EnergyParams, LedgerError,
                           NodeEnergyState)
from earsim.scenario import EnergyModel


def make_ledger(model=EnergyModel.PER_PACKET_EQ, initial=100.0,
                **overrides) -> EnergyLedger:
    values = dict(initial=initial, model=model, bandwidth=2e6,
                  idle_power=0.0005, sleep_power=0.0002,
                  transition_power=0.03, rx_power=1.0)
    values.update(overrides)
    return EnergyLedger(EnergyParams(**values))


def test_per_packet_tx_constant():
    led = make_ledger()
    charged = led.charge_tx(512, tx_power_w=5.0, now=0.0)
    assert charged == pytest.approx(3.3792e-3, rel=1e-12)
    # power is irrelevant under the per-packet model
    assert led.charge_tx(512, tx_power_w=0.001, now=0.0) == pytest.approx(
        charged, rel=1e-12)


def test_per_packet_rx_constant():
    led = make_ledger()
    assert led.charge_rx(512, rx_power_w=1.0, now=0.0) == pytest.approx(
        2.2528e-3, rel=1e-12)


def test_power_duration_charges():
    led = make_ledger(model=EnergyModel.POWER_DURATION)
    assert led.charge_tx(512, 5.0, now=0.0) == pytest.approx(1.024e-2, rel=1e-12)
    assert led.charge_rx(512, 1.0, now=0.0) == pytest.approx(2.048e-3, rel=1e-12)


def test_zero_byte_packet_is_free():
    for model in EnergyModel:
        led = make_ledger(model=model)
        assert led.charge_tx(0, 5.0, now=0.0) == 0.0
        assert led.charge_rx(0, 1.0, now=0.0) == 0.0


def test_tx_power_offset_adds_to_duration_draw():
    led = make_ledger(model=EnergyModel.POWER_DURATION, tx_power_offset=1.0)
    assert led.charge_tx(512, 5.0, now=0.0) == pytest.approx(
        6.0 * 4096 / 2e6, rel=1e-12)


def test_idle_drain_over_interval():
    led = make_ledger()
    assert led.charge_elapsed(200.0) == pytest.approx(0.1, rel=1e-12)
    assert led.state_since == 200.0
    assert led.charge_elapsed(200.0) == 0.0


def test_elapsed_death_is_exact_crossing():
    led = make_ledger(initial=1e-4)
    led.charge_elapsed(1.0)
    assert not led.alive
    assert led.state is NodeEnergyState.DEAD
    # 1e-4 J at 0.0005 W lasts exactly 0.2 s
    assert led.death_time == pytest.approx(0.2, rel=1e-9)
    assert led.remaining == 0.0


def test_elapsed_rejects_backwards_time():
    led = make_ledger()
    led.charge_elapsed(5.0)
    with pytest.raises(LedgerError):
        led.charge_elapsed(4.0)


def test_dead_ledger_contract():
    led = make_ledger(initial=1e-9)
    led.charge_tx(512, 5.0, now=0.0)
    assert not led.alive
    assert led.death_time == 0.0
    with pytest.raises(LedgerError):
        led.charge_tx(512, 5.0, now=1.0)
    with pytest.raises(LedgerError):
        led.charge_rx(512, 1.0, now=1.0)
    assert led.charge_elapsed(10.0) == 0.0  # settling a corpse is a no-op


def test_sleep_and_transition():
    led = make_ledger()
    led.enter_sleep(10.0)
    assert led.state is NodeEnergyState.SLEEP
    led.charge_elapsed(110.0)
    assert led.totals["sleep"] == pytest.approx(0.0002 * 100.0, rel=1e-12)
    charged = led.charge_transition(0.01)
    assert charged == pytest.approx(3e-4, rel=1e-12)
    assert led.state is NodeEnergyState.IDLE
    with pytest.raises(LedgerError):
        led.charge_transition(0.01)  # not sleeping anymore


def test_zero_duration_transition_still_wakes():
    led = make_ledger()
    led.enter_sleep(0.0)
    assert led.charge_transition(0.0) == 0.0
    assert led.state is NodeEnergyState.IDLE


def test_alive_threshold_is_strict():
    led = make_ledger(initial=100.0)
    assert led.is_alive_at_threshold(0.5)
    led.remaining = 60.0
    assert led.is_alive_at_threshold(0.5)
    led.remaining = 50.0
    assert not led.is_alive_at_threshold(0.5)
    led.remaining = 0.0
    assert not led.is_alive_at_threshold(0.5)
    assert not led.is_alive_at_threshold(0.0)
    with pytest.raises(ValueError):
        led.is_alive_at_threshold(1.5)


def test_conservation_and_monotonicity_over_random_sequences():
    rng = random.Random(2024)
    for model in EnergyModel:
        led = make_ledger(model=model, initial=5.0)
        now = 0.0
        previous = led.remaining
        while led.alive:
            op = rng.randrange(3)
            if op == 0:
                led.charge_tx(rng.randrange(0, 1500), rng.uniform(0.001, 5.0), now)
            elif op == 1:
                led.charge_rx(rng.randrange(0, 1500), 1.0, now)
            else:
                now += rng.uniform(0.0, 50.0)
                led.charge_elapsed(now)
            assert led.remaining <= previous
            previous = led.remaining
            assert led.conservation_error() < 1e-9
        assert led.remaining == 0.0
        assert led.conservation_error() < 1e-9
        assert set(led.totals) == set(CAUSES)


def test_control_and_data_causes_are_split():
    led = make_ledger(model=EnergyModel.POWER_DURATION)
    led.charge_tx(64, 5.0, now=0.0, control=True)
    led.charge_tx(512, 5.0, now=0.0, control=False)
    led.charge_rx(64, 1.0, now=0.0, control=True)
    led.charge_rx(512, 1.0, now=0.0, control=False)
    assert led.totals["tx_control"] == pytest.approx(5.0 * 512 / 2e6)
    assert led.totals["tx_data"] == pytest.approx(5.0 * 4096 / 2e6)
    assert led.totals["rx_control"] == pytest.approx(512 / 2e6)
    assert led.totals["rx_data"] == pytest.approx(4096 / 2e6)
