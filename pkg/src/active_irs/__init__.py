"""Link-level simulation and reflection optimization for active-IRS-aided links."""

from .channel import (ChannelRealization, NoisePowers, PathLossModel, Position3D, Scenario,
                      path_gain, synthesize_los)
from .errors import ConfigError, DomainError
from .reflection import (ActivePerElement, ActiveTotal, Passive, QuantizationSpec,
                         ReflectionConfig, achievable_rate, amplifier_power,
                         brute_force_oracle, effective_noise, optimize, optimize_active,
                         optimize_passive, quantize_reflection, received_snr)
from .relay import DuplexMode, RelayConfig, af_end_to_end_snr, relay_rate

__version__ = "0.1.0"
