"""Deterministic line-of-sight channels for a BS -> IRS -> user link.

All quantities are linear (power gains, watts). The IRS is a uniform linear
array along the x-axis with half-wavelength spacing, centred on ``irs_pos``.
Magnitudes use the far-field approximation: every element sees the same hop
distance, only the phases differ across elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

DEFAULT_WAVELENGTH = 0.1  # 3 GHz


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise DomainError(f"non-finite coordinate in {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "Position3D") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))


@dataclass(frozen=True)
class PathLossModel:
    """Power gain ``beta0 / d**kappa`` with ``beta0`` the gain at 1 m."""

    beta0: float = 1e-3
    kappa: float = 2.0

    def __post_init__(self):
        if not self.beta0 > 0:
            raise DomainError(f"beta0 must be positive, got {self.beta0}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True)
class NoisePowers:
    """Receiver noise ``sigma0_sq`` and per-element amplification noise ``sigmaI_sq`` (W)."""

    sigma0_sq: float
    sigmaI_sq: float

    def __post_init__(self):
        if not (self.sigma0_sq >= 0 and self.sigmaI_sq >= 0):
            raise DomainError(f"noise powers must be non-negative, got {self}")


@dataclass(frozen=True)
class Scenario:
    bs_pos: Position3D
    user_pos: Position3D
    irs_pos: Position3D
    num_elements: int
    transmit_power: float
    noise: NoisePowers
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    wavelength: float = DEFAULT_WAVELENGTH
    direct_link_blocked: bool = True

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise DomainError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.transmit_power > 0:
            raise DomainError(f"transmit_power must be positive, got {self.transmit_power}")
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength}")
        if self.bs_pos == self.irs_pos:
            raise DomainError("BS and IRS positions coincide")
        if self.irs_pos == self.user_pos:
            raise DomainError("IRS and user positions coincide")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Per-element channels ``g`` (BS->IRS), ``h`` (IRS->user) and direct link ``t``.

    The received cascaded term is ``h^H diag(...) g``, i.e. ``h`` enters conjugated.
    """

    g: np.ndarray
    h: np.ndarray
    t: complex = 0j

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex).ravel()
        h = np.asarray(self.h, dtype=complex).ravel()
        if g.shape != h.shape:
            raise DomainError(f"g and h lengths differ: {g.size} vs {h.size}")
        if g.size == 0:
            raise DomainError("empty channel")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h)) and np.isfinite(self.t)):
            raise DomainError("non-finite channel entry")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "t", complex(self.t))

    @property
    def num_elements(self) -> int:
        return self.g.size


def path_gain(d, model: PathLossModel):
    """Linear power gain at distance ``d`` metres."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > 0)):
        raise DomainError(f"distance must be positive, got {d}")
    gain = model.beta0 / d_arr**model.kappa
    return float(gain) if gain.ndim == 0 else gain


def element_offsets(num_elements: int, wavelength: float) -> np.ndarray:
    """Positions of the ULA elements along x relative to the array centre."""
    return (np.arange(num_elements) - (num_elements - 1) / 2) * (wavelength / 2)


def _hop(src: np.ndarray, dst: np.ndarray, model: PathLossModel, wavelength: float,
         offsets: np.ndarray, irs_is_dst: bool) -> np.ndarray:
    d = float(np.linalg.norm(dst - src))
    if d == 0.0:
        raise DomainError("coincident link endpoints")
    u = (dst - src) / d
    # planar wavefront: element at offset e along x shifts the path by +-e*u_x
    if irs_is_dst:
        d_m = d + offsets * u[0]
    else:
        d_m = d - offsets * u[0]
    return math.sqrt(path_gain(d, model)) * np.exp(-2j * np.pi * d_m / wavelength)


def synthesize_los(scenario: Scenario) -> ChannelRealization:
    """Build the deterministic LoS channels for ``scenario``."""
    bs = scenario.bs_pos.as_array()
    irs = scenario.irs_pos.as_array()
    user = scenario.user_pos.as_array()
    offsets = element_offsets(scenario.num_elements, scenario.wavelength)
    model = scenario.path_loss

    g = _hop(bs, irs, model, scenario.wavelength, offsets, irs_is_dst=True)
    h = _hop(irs, user, model, scenario.wavelength, offsets, irs_is_dst=False)
    if scenario.direct_link_blocked:
        t = 0j
    else:
        d = float(np.linalg.norm(user - bs))
        if d == 0.0:
            raise DomainError("BS and user positions coincide")
        t = math.sqrt(path_gain(d, model)) * complex(np.exp(-2j * np.pi * d / scenario.wavelength))
    return ChannelRealization(g=g, h=h, t=t)
