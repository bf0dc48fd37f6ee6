"""Parameter sweeps, scaling-slope fits and single-IRS placement search."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence, Tuple, Union

import numpy as np

from .channel import Position3D, Scenario, path_gain, synthesize_los
from .errors import DomainError
from .reflection import (ActivePerElement, ActiveTotal, Passive, PowerModel,
                         achievable_rate, effective_noise, optimize,
                         received_snr)
from .relay import RelayConfig, af_end_to_end_snr, relay_rate


@dataclass(frozen=True)
class IRSSystem:
    power_model: PowerModel
    name: str = "irs"


@dataclass(frozen=True)
class RelaySystem:
    """AF relay sitting where the scenario places the IRS."""

    config: RelayConfig
    name: str = "relay"


System = Union[IRSSystem, RelaySystem]


@dataclass(frozen=True)
class BsUserDistance:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError(f"sweep step must be positive, got {self.step}")
        if self.stop < self.start:
            raise DomainError(f"empty distance sweep {self.start}..{self.stop}")

    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


@dataclass(frozen=True)
class NumElements:
    values: Tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if not vals:
            raise DomainError("empty element-count sweep")
        if any(v < 1 for v in vals) or any(int(v) != v for v in self.values):
            raise DomainError(f"element counts must be positive integers, got {self.values}")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SweepSpec:
    variable: Union[BsUserDistance, NumElements]
    systems: Tuple[System, ...]

    def __post_init__(self):
        object.__setattr__(self, "systems", tuple(self.systems))
        if not self.systems:
            raise DomainError("sweep needs at least one system")
        names = [s.name for s in self.systems]
        if len(set(names)) != len(names):
            raise DomainError(f"system names must be unique, got {names}")


@dataclass(frozen=True)
class SweepRow:
    value: float
    system: str
    snr: float
    rate: float


@dataclass(frozen=True)
class SweepResult:
    rows: Tuple[SweepRow, ...]

    def series(self, system: str):
        """``(values, snr, rate)`` arrays for one system, in sweep order."""
        rows = [r for r in self.rows if r.system == system]
        if not rows:
            raise KeyError(system)
        return (np.array([r.value for r in rows]), np.array([r.snr for r in rows]),
                np.array([r.rate for r in rows]))


def evaluate_system(system: System, scenario: Scenario):
    """Optimized received SNR and rate of ``system`` in ``scenario``."""
    if isinstance(system, IRSSystem):
        ch = synthesize_los(scenario)
        noise = effective_noise(system.power_model, scenario.noise)
        refl = optimize(ch, system.power_model, scenario.transmit_power, noise)
        snr = received_snr(ch, refl, scenario.transmit_power, noise)
        return snr, achievable_rate(snr)
    if isinstance(system, RelaySystem):
        model = scenario.path_loss
        gain1 = path_gain(scenario.bs_pos.distance_to(scenario.irs_pos), model)
        gain2 = path_gain(scenario.irs_pos.distance_to(scenario.user_pos), model)
        snr = af_end_to_end_snr(gain1, gain2, scenario.transmit_power, system.config,
                                scenario.noise.sigma0_sq)
        return snr, relay_rate(snr, system.config.mode)
    raise TypeError(f"unknown system descriptor {system!r}")


def place_nodes(base: Scenario, distance: float, irs_fraction: float = 0.5) -> Scenario:
    """Put the user ``distance`` metres from the BS along +x and the IRS in between.

    Altitudes are taken from ``base``: the user keeps ``base.user_pos.z`` and the
    IRS (or relay) keeps ``base.irs_pos.z``.
    """
    bs = base.bs_pos
    user = Position3D(bs.x + distance, bs.y, base.user_pos.z)
    irs = Position3D(bs.x + irs_fraction * distance, bs.y, base.irs_pos.z)
    return replace(base, user_pos=user, irs_pos=irs)


def _evaluate_point(args):
    value, scenario, systems = args
    rows = []
    for system in systems:
        try:
            snr, rate = evaluate_system(system, scenario)
        except DomainError as exc:
            raise DomainError(f"sweep value {value:g}, system '{system.name}': {exc}") from exc
        rows.append(SweepRow(float(value), system.name, float(snr), float(rate)))
    return rows


def _run(points, systems, workers):
    jobs = [(value, scenario, systems) for value, scenario in points]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_evaluate_point, jobs))
    else:
        chunks = [_evaluate_point(job) for job in jobs]
    return SweepResult(tuple(row for chunk in chunks for row in chunk))


def run_rate_vs_distance(spec: SweepSpec, base: Scenario, irs_fraction: float = 0.5,
                         workers: int = 1) -> SweepResult:
    """Rates of every system as the BS-user distance grows (rows in sweep order)."""
    if not isinstance(spec.variable, BsUserDistance):
        raise DomainError("run_rate_vs_distance needs a BsUserDistance sweep")
    points = []
    for d in spec.variable.values():
        try:
            points.append((d, place_nodes(base, float(d), irs_fraction)))
        except DomainError as exc:
            raise DomainError(f"sweep value {d:g}: {exc}") from exc
    return _run(points, spec.systems, workers)


def run_snr_vs_elements(spec: SweepSpec, base: Scenario, workers: int = 1) -> SweepResult:
    """Optimized SNR of every system for each element count, geometry held fixed."""
    if not isinstance(spec.variable, NumElements):
        raise DomainError("run_snr_vs_elements needs a NumElements sweep")
    points = [(m, replace(base, num_elements=m)) for m in spec.variable.values]
    return _run(points, spec.systems, workers)


def estimate_scaling_slope(points: Sequence[Tuple[float, float]], tail_fraction: float = 0.5) -> float:
    """Least-squares slope of log(SNR) against log(M) over the largest-M tail."""
    if not 0 < tail_fraction <= 1:
        raise DomainError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    pts = sorted((float(m), float(s)) for m, s in points)
    keep = pts[len(pts) - math.ceil(tail_fraction * len(pts)):]
    if len(keep) < 3:
        raise DomainError(f"need at least 3 points in the tail, got {len(keep)}")
    m = np.array([p[0] for p in keep])
    s = np.array([p[1] for p in keep])
    if np.any(m <= 0) or np.any(s <= 0):
        raise DomainError("element counts and SNRs must be positive for a log-log fit")
    if np.all(m == m[0]):
        raise DomainError("all element counts are equal; slope is undefined")
    slope, _ = np.polyfit(np.log(m), np.log(s), 1)
    return float(slope)


def find_crossovers(values, snr_low, snr_high):
    """Sweep values at which ``snr_low`` rises above ``snr_high``.

    Returns the first value of each run where ``snr_low > snr_high`` that is
    preceded by a point where it was not.
    """
    above = np.asarray(snr_low) > np.asarray(snr_high)
    return [values[i] for i in range(1, len(above)) if above[i] and not above[i - 1]]


# ---------------------------------------------------------------------------
# Placement
# ---------------------------------------------------------------------------

def placement_grid(base: Scenario, segment: Tuple[Position3D, Position3D], resolution: float):
    """Feasible candidate IRS positions on ``segment`` at IRS altitude ``base.irs_pos.z``.

    Points are spaced ``resolution`` apart from the segment start; the end point
    is always included. Points that coincide with the BS or user are dropped.
    """
    if not resolution > 0:
        raise DomainError(f"resolution must be positive, got {resolution}")
    start, end = (p.as_array() for p in segment)
    length = float(np.linalg.norm(end - start))
    if length == 0:
        raise DomainError("placement segment endpoints coincide")
    direction = (end - start) / length
    offsets = resolution * np.arange(int(math.floor(length / resolution + 1e-9)) + 1)
    if length - offsets[-1] > 1e-9 * max(1.0, length):
        offsets = np.append(offsets, length)
    points = []
    for off in offsets:
        x, y, _ = start + off * direction
        pos = Position3D(float(x), float(y), base.irs_pos.z)
        if pos.distance_to(base.bs_pos) < 1e-9 or pos.distance_to(base.user_pos) < 1e-9:
            continue
        points.append((float(off), pos))
    if not points:
        raise DomainError("placement grid contains no feasible point")
    return points


def placement_profile(base: Scenario, segment, resolution: float, system: System):
    """``(offsets, positions, snr)`` of ``system`` at every feasible grid point."""
    grid = placement_grid(base, segment, resolution)
    snr = np.array([evaluate_system(system, replace(base, irs_pos=pos))[0] for _, pos in grid])
    return np.array([off for off, _ in grid]), [pos for _, pos in grid], snr


def optimize_placement(base: Scenario, segment: Tuple[Position3D, Position3D],
                       resolution: float, system: System):
    """Grid search for the IRS position maximizing the optimized SNR.

    Returns ``(position, snr)``. Ties go to the candidate nearest the BS.
    """
    _, positions, snr = placement_profile(base, segment, resolution, system)
    best = np.flatnonzero(snr == snr.max())
    i = min(best, key=lambda k: positions[k].distance_to(base.bs_pos))
    return positions[i], float(snr[i])


__all__ = [
    "ActivePerElement", "ActiveTotal", "BsUserDistance", "IRSSystem", "NumElements",
    "Passive", "RelaySystem", "SweepResult", "SweepRow", "SweepSpec", "estimate_scaling_slope",
    "evaluate_system", "find_crossovers", "optimize_placement", "place_nodes",
    "placement_grid", "placement_profile", "run_rate_vs_distance", "run_snr_vs_elements",
]
