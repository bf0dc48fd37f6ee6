"""Amplify-and-forward relay baselines with variable gain."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError


class DuplexMode(enum.Enum):
    HALF_DUPLEX = "half_duplex"
    FULL_DUPLEX_IDEAL = "full_duplex"


@dataclass(frozen=True)
class RelayConfig:
    relay_power: float
    relay_noise_sq: float
    mode: DuplexMode = DuplexMode.HALF_DUPLEX
    num_antennas: int = 1

    def __post_init__(self):
        if not self.relay_power > 0:
            raise DomainError(f"relay power must be positive, got {self.relay_power}")
        if not self.relay_noise_sq >= 0:
            raise DomainError(f"relay noise power must be non-negative, got {self.relay_noise_sq}")
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 1:
            raise DomainError(f"num_antennas must be a positive integer, got {self.num_antennas}")
        object.__setattr__(self, "mode", DuplexMode(self.mode))


def af_end_to_end_snr(gain1: float, gain2: float, P_t: float, cfg: RelayConfig,
                      sigma0_sq: float) -> float:
    """End-to-end SNR ``g1*g2 / (g1 + g2 + 1)`` of a variable-gain AF relay.

    ``g1 = N*P_t*gain1/relay_noise_sq`` is the first-hop SNR and
    ``g2 = N*relay_power*gain2/sigma0_sq`` the second-hop SNR, where ``N`` is
    the relay antenna count (maximum-ratio receive and transmit on LoS hops).
    """
    if not (gain1 > 0 and gain2 > 0):
        raise DomainError(f"hop gains must be positive, got {gain1}, {gain2}")
    if cfg.relay_noise_sq == 0 or sigma0_sq <= 0:
        raise DomainError("relay and receiver noise powers must be positive")
    n = cfg.num_antennas
    g1 = n * P_t * gain1 / cfg.relay_noise_sq
    g2 = n * cfg.relay_power * gain2 / sigma0_sq
    return g1 * g2 / (g1 + g2 + 1.0)


def relay_rate(snr: float, mode: DuplexMode) -> float:
    """Half duplex pays a 1/2 pre-log for its two transmission slots."""
    if snr < 0:
        raise DomainError(f"SNR must be non-negative, got {snr}")
    rate = math.log2(1.0 + snr)
    if DuplexMode(mode) is DuplexMode.HALF_DUPLEX:
        return 0.5 * rate
    return rate
