"""Received-SNR model and reflection optimization for active and passive IRS.

The received signal is ``(h^H Psi g + t) x + h^H Psi z_I + z_0`` with
``Psi = diag(alpha) diag(exp(1j*phi))``. Each amplifier drives the amplified
incident signal plus its own injected noise, so element ``m`` draws
``alpha_m**2 * (P_t |g_m|**2 + sigmaI_sq)`` watts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .channel import ChannelRealization, NoisePowers
from .errors import DomainError

TWO_PI = 2 * np.pi


@dataclass(frozen=True, eq=False)
class ReflectionConfig:
    alpha: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        phi = np.asarray(self.phi, dtype=float).ravel()
        if alpha.shape != phi.shape:
            raise DomainError(f"alpha and phi lengths differ: {alpha.size} vs {phi.size}")
        if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
            raise DomainError("amplification factors must be finite and non-negative")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "phi", np.mod(phi, TWO_PI))

    @property
    def num_elements(self) -> int:
        return self.alpha.size

    def coefficients(self) -> np.ndarray:
        """Diagonal of the reflection matrix."""
        return self.alpha * np.exp(1j * self.phi)


@dataclass(frozen=True)
class Passive:
    """Unit-amplitude, phase-only reflection without amplification noise."""


@dataclass(frozen=True)
class ActiveTotal:
    """All amplifiers share one budget ``total_power`` (W)."""

    total_power: float
    alpha_max: Optional[float] = None

    def __post_init__(self):
        if not self.total_power > 0:
            raise DomainError(f"total amplification power must be positive, got {self.total_power}")
        if self.alpha_max is not None and not self.alpha_max > 0:
            raise DomainError(f"alpha_max must be positive, got {self.alpha_max}")


@dataclass(frozen=True)
class ActivePerElement:
    """Every amplifier has its own budget ``element_power`` (W)."""

    element_power: float
    alpha_max: Optional[float] = None

    def __post_init__(self):
        if not self.element_power > 0:
            raise DomainError(f"per-element amplification power must be positive, got {self.element_power}")
        if self.alpha_max is not None and not self.alpha_max > 0:
            raise DomainError(f"alpha_max must be positive, got {self.alpha_max}")


PowerModel = Union[Passive, ActiveTotal, ActivePerElement]


@dataclass(frozen=True)
class QuantizationSpec:
    phase_bits: int
    amp_levels: int
    alpha_max: float

    def __post_init__(self):
        if self.phase_bits < 1 or int(self.phase_bits) != self.phase_bits:
            raise DomainError(f"phase_bits must be a positive integer, got {self.phase_bits}")
        if self.amp_levels < 1 or int(self.amp_levels) != self.amp_levels:
            raise DomainError(f"amp_levels must be a positive integer, got {self.amp_levels}")
        if not self.alpha_max > 0:
            raise DomainError(f"alpha_max must be positive, got {self.alpha_max}")


def _check_dims(ch: ChannelRealization, refl: ReflectionConfig):
    if ch.num_elements != refl.num_elements:
        raise DomainError(
            f"channel has {ch.num_elements} elements but reflection has {refl.num_elements}")


def received_snr(ch: ChannelRealization, refl: ReflectionConfig, P_t: float,
                 noise: NoisePowers) -> float:
    """Linear SNR ``P_t |h^H Psi g + t|^2 / (sigmaI_sq ||h^H Psi||^2 + sigma0_sq)``."""
    _check_dims(ch, refl)
    if not P_t > 0:
        raise DomainError(f"transmit power must be positive, got {P_t}")
    coef = refl.coefficients()
    signal = np.sum(np.conj(ch.h) * coef * ch.g) + ch.t
    denom = noise.sigmaI_sq * float(np.sum(np.abs(ch.h) ** 2 * refl.alpha ** 2)) + noise.sigma0_sq
    if denom <= 0:
        raise DomainError("zero total noise power: SNR is undefined")
    return P_t * abs(signal) ** 2 / denom


def achievable_rate(snr: float) -> float:
    """Shannon rate ``log2(1 + snr)`` in bits/s/Hz."""
    if snr < 0:
        raise DomainError(f"SNR must be non-negative, got {snr}")
    return math.log2(1.0 + snr)


def _drive_power(ch: ChannelRealization, P_t: float, sigmaI_sq: float) -> np.ndarray:
    """Per-element amplifier input power ``P_t |g_m|^2 + sigmaI_sq``."""
    return P_t * np.abs(ch.g) ** 2 + sigmaI_sq


def amplifier_power(ch: ChannelRealization, refl: ReflectionConfig, P_t: float,
                    sigmaI_sq: float):
    """Return ``(per_element, total)`` amplifier output power in watts."""
    _check_dims(ch, refl)
    per_element = refl.alpha ** 2 * _drive_power(ch, P_t, sigmaI_sq)
    return per_element, float(np.sum(per_element))


def aligned_phases(ch: ChannelRealization) -> np.ndarray:
    # rotate each cascaded term conj(h_m) g_m onto the direct link (phase 0 if t == 0)
    return np.mod(np.angle(ch.t) - np.angle(np.conj(ch.h) * ch.g), TWO_PI)


def optimize_passive(ch: ChannelRealization) -> ReflectionConfig:
    """Unit amplitudes with every reflected term phase-aligned to the direct link."""
    return ReflectionConfig(alpha=np.ones(ch.num_elements), phi=aligned_phases(ch))


# ---------------------------------------------------------------------------
# Amplitude allocation as a concave-convex fractional program
# ---------------------------------------------------------------------------
#
# With aligned phases the amplitude of the received signal is sum(alpha*a) + |t|
# with a = |h||g|. Writing beta_m = alpha_m sqrt(c_m) (square root of the power
# drawn by element m) and u = beta / scale, the square root of the SNR is
#
#     R(u) = (p @ u + q) / sqrt(n + u @ (w * u))
#
# which is affine over a convex norm, maximized over {0 <= u <= upper,
# ||u|| <= radius}. Dinkelbach turns this into a sequence of concave problems
#     max  p @ u + q - lam * sqrt(n + u @ (w * u))
# each solved by accelerated projected gradient ascent.


def _project(v: np.ndarray, upper: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the box [0, upper] intersected with the ball ||u|| <= radius."""
    u = np.clip(v, 0.0, upper)
    if not np.isfinite(radius) or np.dot(u, u) <= radius * radius:
        return u
    if not np.any(np.isfinite(upper)):
        # orthant and ball: clipping then scaling is exact
        return u * (radius / np.linalg.norm(u))
    # KKT: u = clip(v / (1 + mu), 0, upper) for the mu that puts u on the sphere
    lo, hi = 0.0, 1.0
    while np.linalg.norm(np.clip(v / (1.0 + hi), 0.0, upper)) > radius:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(np.clip(v / (1.0 + mid), 0.0, upper)) > radius:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * (1.0 + hi):
            break
    return np.clip(v / (1.0 + hi), 0.0, upper)


def _ratio(u, p, q, w, n):
    den = n + np.dot(w, u * u)
    if den <= 0:
        return 0.0 if np.dot(p, u) + q == 0 else np.inf
    return (np.dot(p, u) + q) / math.sqrt(den)


# variables are normalized to O(1), so larger steps only overshoot to the boundary
_MAX_STEP = 1e12
# accepted iterations without a measurable objective gain before giving up;
# near a boundary optimum the iterates can drift along directions that are flat
# to rounding precision and never meet the movement test
_STALL_LIMIT = 30


def _dinkelbach_subproblem(lam, u0, p, w, n, upper, radius, max_iter=20000, tol=1e-13):
    """Maximize p@u - lam*sqrt(n + u@(w*u)) over the feasible set (concave)."""

    def value(u):
        return np.dot(p, u) - lam * math.sqrt(n + np.dot(w, u * u))

    def grad(u):
        s = math.sqrt(n + np.dot(w, u * u))
        if s == 0.0:
            return p.copy()
        return p - lam * w * u / s

    x = u0.copy()
    y = x.copy()
    fx = value(x)
    t_k = 1.0
    lipschitz = lam * float(np.max(w)) / math.sqrt(n) if n > 0 else 1.0
    step = _MAX_STEP if lipschitz <= 1.0 / _MAX_STEP else 1.0 / lipschitz
    at_x = True
    stall = 0
    for _ in range(max_iter):
        gy = grad(y)
        fy = value(y)
        # backtracking on the quadratic minorant of the concave objective
        while True:
            x_new = _project(y + step * gy, upper, radius)
            d = x_new - y
            if value(x_new) >= fy + np.dot(gy, d) - np.dot(d, d) / (2 * step) - 1e-15 * abs(fy):
                break
            step *= 0.5
            if step < 1e-300:
                break
        f_new = value(x_new)
        if f_new < fx - 1e-15 * (1.0 + abs(fx)):
            if at_x:
                break
            # adaptive restart keeps the accelerated scheme monotone
            y = x.copy()
            t_k = 1.0
            at_x = True
            continue
        at_x = False
        stall = stall + 1 if f_new <= fx + 1e-15 * (1.0 + abs(fx)) else 0
        moved = np.linalg.norm(x_new - x)
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t_k * t_k))
        y = x_new + ((t_k - 1) / t_next) * (x_new - x)
        x, fx, t_k = x_new, f_new, t_next
        step = min(1.5 * step, _MAX_STEP)
        if moved <= tol * (1.0 + np.linalg.norm(x)) or stall >= _STALL_LIMIT:
            break
    return x


def _maximize_ratio(p, q, w, n, upper, radius, starts, rel_tol=1e-10, max_outer=200):
    best = None
    best_r = -np.inf
    for s in starts:
        s = _project(s, upper, radius)
        r = _ratio(s, p, q, w, n)
        if r > best_r:
            best, best_r = s, r
    u = best
    lam = best_r
    for _ in range(max_outer):
        u_new = _dinkelbach_subproblem(lam, u, p, w, n, upper, radius)
        r_new = _ratio(u_new, p, q, w, n)
        if r_new <= lam * (1 + rel_tol):
            if r_new > lam:
                u, lam = u_new, r_new
            break
        u, lam = u_new, r_new
    return u


def optimize_active(ch: ChannelRealization, pm: PowerModel, P_t: float,
                    noise: NoisePowers) -> ReflectionConfig:
    """Phase-align every element, then allocate amplitudes to maximize the SNR.

    Parameters
    ----------
    ch : ChannelRealization
    pm : ActiveTotal or ActivePerElement
        Amplification budget. ``alpha_max`` on the model caps each factor.
    P_t : float
        Transmit power in watts.
    noise : NoisePowers

    Returns
    -------
    ReflectionConfig
        A feasible configuration. Under a per-element budget the factors sit at
        their individual maxima whenever that is optimal, which is always the
        case for equal element gains.
    """
    if isinstance(pm, Passive):
        raise DomainError("optimize_active needs an active power model; use optimize_passive")
    if not P_t > 0:
        raise DomainError(f"transmit power must be positive, got {P_t}")
    if noise.sigma0_sq == 0 and noise.sigmaI_sq == 0:
        raise DomainError("zero total noise power: SNR is undefined")

    phi = aligned_phases(ch)
    M = ch.num_elements
    c = _drive_power(ch, P_t, noise.sigmaI_sq)
    if np.any(c <= 0):
        raise DomainError("an element receives no power and has no amplification noise")
    a = np.abs(ch.h) * np.abs(ch.g)
    sqrt_c = np.sqrt(c)

    if isinstance(pm, ActiveTotal):
        scale = math.sqrt(pm.total_power)
        radius = 1.0
        upper = np.full(M, np.inf)
    else:
        scale = math.sqrt(pm.element_power)
        radius = np.inf
        upper = np.ones(M)
    if pm.alpha_max is not None:
        upper = np.minimum(upper, pm.alpha_max * sqrt_c / scale)

    e = noise.sigmaI_sq * np.abs(ch.h) ** 2 / c
    reach = float(np.max(e)) if np.isfinite(radius) else float(np.sum(e))
    kappa = math.sqrt(noise.sigma0_sq + scale * scale * reach)
    if kappa == 0:
        raise DomainError("zero total noise power: SNR is undefined")
    p = scale * (a / sqrt_c) / kappa
    q = abs(ch.t) / kappa
    w = scale * scale * e / (kappa * kappa)
    n = noise.sigma0_sq / (kappa * kappa)

    if not np.any(p > 0):
        # nothing to gain from reflection; any amplitude only adds noise
        return ReflectionConfig(alpha=np.zeros(M), phi=phi)

    starts = []
    if np.isfinite(radius):
        starts.append(np.full(M, radius / math.sqrt(M)))
        matched = p / (w + n)
        starts.append(radius * matched / np.linalg.norm(matched))
    else:
        starts.append(upper.copy())
        starts.append(0.5 * upper)
    u = _maximize_ratio(p, q, w, n, upper, radius, starts)

    if q == 0 and np.isfinite(radius) and not np.any(np.isfinite(upper)):
        # with no direct link the SNR grows with the amplitude scale: spend the full budget
        u = u * (radius / np.linalg.norm(u))
    alpha = scale * u / sqrt_c
    return ReflectionConfig(alpha=alpha, phi=phi)


def effective_noise(pm: PowerModel, noise: NoisePowers) -> NoisePowers:
    """Noise seen with ``pm``: a passive surface injects no amplification noise."""
    if isinstance(pm, Passive):
        return NoisePowers(sigma0_sq=noise.sigma0_sq, sigmaI_sq=0.0)
    return noise


def optimize(ch: ChannelRealization, pm: PowerModel, P_t: float,
             noise: NoisePowers) -> ReflectionConfig:
    """Dispatch to the passive or active optimizer according to ``pm``."""
    if isinstance(pm, Passive):
        return optimize_passive(ch)
    return optimize_active(ch, pm, P_t, noise)


# ---------------------------------------------------------------------------
# Exhaustive grid oracle
# ---------------------------------------------------------------------------

_EXHAUSTIVE_PHASE_LIMIT = 5000


def _phase_candidates(z: np.ndarray, t: complex, G: int) -> np.ndarray:
    """Index combinations of the phase grid that can contain the grid optimum.

    For any amplitudes, the best grid combination rounds every element to the
    grid phase closest to the direction of the resulting sum, so only the
    rounding patterns of a common target direction need to be visited. When
    the full grid is small it is enumerated outright.
    """
    M = z.size
    if G ** M <= _EXHAUSTIVE_PHASE_LIMIT:
        return np.array(list(itertools.product(range(G), repeat=M)), dtype=int)
    base = np.angle(z)
    step = TWO_PI / G
    edges = np.mod((base[:, None] + step * (np.arange(G)[None, :] + 0.5)).ravel(), TWO_PI)
    edges = np.sort(np.unique(edges))
    mids = 0.5 * (edges + np.roll(edges, -1))
    mids[-1] = np.mod(0.5 * (edges[-1] + edges[0] + TWO_PI), TWO_PI)
    # nearest grid index k for each target direction psi: base + k*step ~ psi
    k = np.rint(np.mod(mids[:, None] - base[None, :], TWO_PI) / step).astype(int) % G
    return np.unique(k, axis=0)


def _sphere_directions(M: int, G: int) -> np.ndarray:
    """Non-negative unit vectors on a hyperspherical-angle grid (angles k*pi/(2G))."""
    angles = 0.5 * np.pi * np.arange(G + 1) / G
    if M == 1:
        return np.ones((1, 1))
    dirs = []
    for theta in itertools.product(angles, repeat=M - 1):
        v = np.empty(M)
        s = 1.0
        for i, th in enumerate(theta):
            v[i] = s * math.cos(th)
            s *= math.sin(th)
        v[M - 1] = s
        dirs.append(v)
    return np.array(dirs)


def _amplitude_candidates(ch, pm, P_t, noise, G):
    M = ch.num_elements
    if isinstance(pm, Passive):
        return np.ones((1, M))
    c = _drive_power(ch, P_t, noise.sigmaI_sq)
    sqrt_c = np.sqrt(c)
    levels = np.arange(G + 1) / G
    if isinstance(pm, ActiveTotal):
        dirs = _sphere_directions(M, G)
        beta = (levels[:, None, None] * dirs[None, :, :]).reshape(-1, M) * math.sqrt(pm.total_power)
        if pm.alpha_max is not None:
            beta = beta[np.all(beta <= pm.alpha_max * sqrt_c * (1 + 1e-12), axis=1)]
    else:
        cap = np.full(M, math.sqrt(pm.element_power))
        if pm.alpha_max is not None:
            cap = np.minimum(cap, pm.alpha_max * sqrt_c)
        beta = np.array(list(itertools.product(levels, repeat=M))) * cap
    return np.unique(beta, axis=0) / sqrt_c


def brute_force_oracle(ch: ChannelRealization, pm: PowerModel, P_t: float,
                       noise: NoisePowers, grid_points_per_dim: int = 64) -> ReflectionConfig:
    """Best configuration on a joint phase/amplitude grid (M <= 3 only).

    Phases take ``G`` uniform values per element. Amplitudes are gridded in the
    space of per-element output power: ``G + 1`` levels per element for a
    per-element budget, and for a total budget ``G + 1`` radii times a
    ``(G + 1)**(M - 1)`` grid of directions on the budget sphere. All grids nest
    when ``G`` doubles.
    """
    M = ch.num_elements
    G = int(grid_points_per_dim)
    if M > 3:
        raise DomainError(f"brute-force oracle refuses M={M} > 3")
    if G < 8:
        raise DomainError(f"grid_points_per_dim must be at least 8, got {G}")
    if noise.sigma0_sq == 0 and noise.sigmaI_sq == 0:
        raise DomainError("zero total noise power: SNR is undefined")

    z = np.conj(ch.h) * ch.g
    combos = _phase_candidates(z, ch.t, G)
    grid = TWO_PI * np.arange(G) / G
    rot = z[None, :] * np.exp(1j * grid[combos])  # (n_phase, M)
    alphas = _amplitude_candidates(ch, pm, P_t, noise, G)
    h2 = np.abs(ch.h) ** 2

    best_snr, best_a, best_k = -np.inf, None, None
    chunk = max(1, 2_000_000 // max(1, rot.shape[0]))
    for i in range(0, alphas.shape[0], chunk):
        A = alphas[i:i + chunk]
        num = np.abs(A @ rot.T + ch.t) ** 2
        den = noise.sigmaI_sq * (A ** 2 @ h2) + noise.sigma0_sq
        snr = P_t * num / den[:, None]
        j = np.unravel_index(int(np.argmax(snr)), snr.shape)
        if snr[j] > best_snr:
            best_snr, best_a, best_k = snr[j], A[j[0]], combos[j[1]]
    return ReflectionConfig(alpha=best_a.copy(), phi=grid[best_k])


# ---------------------------------------------------------------------------
# Discrete reflection levels
# ---------------------------------------------------------------------------

def _round_half_down(x: np.ndarray) -> np.ndarray:
    return np.ceil(x - 0.5)


def quantize_reflection(refl: ReflectionConfig, spec: QuantizationSpec) -> ReflectionConfig:
    """Round phases to ``2**phase_bits`` levels and amplitudes to ``amp_levels`` levels.

    Amplitude levels are uniform on ``[0, alpha_max]`` (a single level sits at 0).
    Ties round to the lower level.
    """
    n_phase = 2 ** int(spec.phase_bits)
    step = TWO_PI / n_phase
    k = _round_half_down(refl.phi / step) % n_phase
    phi = k * step

    alpha = np.clip(refl.alpha, 0.0, spec.alpha_max)
    if spec.amp_levels == 1:
        alpha = np.zeros_like(alpha)
    else:
        a_step = spec.alpha_max / (spec.amp_levels - 1)
        alpha = np.minimum(_round_half_down(alpha / a_step) * a_step, spec.alpha_max)
    return ReflectionConfig(alpha=alpha, phi=phi)
