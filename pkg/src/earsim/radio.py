"""Free-space link budget math.

All path-loss arithmetic is done in the log domain (dB / dBm) so that
very short and very long distances never overflow a linear power value.
The core relation is the free-space propagation law: received power
falls off as the square of distance, i.e. 20 dB per decade.
"""

import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 2.99792458e8  # m/s

_FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class RadioParams:
    """Physical-layer constants shared by every node.

    Wavelength is derived from the carrier frequency rather than stored,
    so the two can never disagree.
    """
    frequency: float = 2.4e9        # Hz
    tx_gain: float = 1.0            # linear, dimensionless
    rx_gain: float = 1.0            # linear, dimensionless
    rx_threshold: float = -84.0     # dBm, minimum decodable received power

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if self.tx_gain <= 0 or self.rx_gain <= 0:
            raise ValueError("antenna gains must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    @property
    def gain_db(self) -> float:
        return 10.0 * math.log10(self.tx_gain * self.rx_gain)


def dbm_to_watts(p_dbm: float) -> float:
    """Convert dBm to watts: 10^(p/10) mW."""
    return 10.0 ** (p_dbm / 10.0) * 1e-3


def watts_to_dbm(p_watts: float) -> float:
    """Convert watts to dBm."""
    if p_watts <= 0:
        raise ValueError("power must be positive")
    return 10.0 * math.log10(p_watts * 1e3)


def path_loss_db(r: float, params: RadioParams) -> float:
    """Free-space path loss 20·log10(4πr/λ) in dB for a link of r meters."""
    if r <= 0:
        raise ValueError("distance must be positive")
    return 20.0 * math.log10(_FOUR_PI * r / params.wavelength)


def received_power(pt_dbm: float, r: float, params: RadioParams) -> float:
    """Received power in dBm at distance r for a transmit power of pt_dbm."""
    return pt_dbm + params.gain_db - path_loss_db(r, params)


def required_tx_power(r: float, params: RadioParams) -> float:
    """Minimum transmit power (dBm) that still meets rx_threshold at r meters.

    Monotone increasing in r; doubling the distance costs exactly
    20·log10(2) ≈ 6.0206 dB.
    """
    return params.rx_threshold - params.gain_db + path_loss_db(r, params)


def range_for_power(pt_dbm: float, params: RadioParams) -> float:
    """Distance at which a pt_dbm transmission decays to exactly rx_threshold.

    Exact inverse of required_tx_power.
    """
    exponent = (pt_dbm - params.rx_threshold + params.gain_db) / 20.0
    return params.wavelength / _FOUR_PI * 10.0 ** exponent


def common_range_power(params: RadioParams, common_range: float) -> float:
    """Transmit power (dBm) used for all common-range traffic.

    Every broadcast control packet, and every data packet in plain AODV,
    is sent at the power that reaches exactly `common_range` meters.
    """
    return required_tx_power(common_range, params)
