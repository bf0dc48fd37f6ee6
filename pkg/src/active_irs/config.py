"""Run-configuration files: YAML with unit-suffixed quantities.

Powers may be written as ``"20 dBm"``, ``"10 dBW"``, ``"1 mW"``, ``"0.2 W"`` or a
bare number of watts; gains as ``"-30 dB"`` or a bare linear number. Everything
is converted to linear units here and nowhere else.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import yaml

from .channel import DEFAULT_WAVELENGTH, NoisePowers, PathLossModel, Position3D, Scenario
from .errors import ConfigError, DomainError
from .experiments import BsUserDistance, IRSSystem, NumElements, RelaySystem, System
from .reflection import ActivePerElement, ActiveTotal, Passive
from .relay import DuplexMode, RelayConfig

EXPERIMENTS = ("fig5", "fig6", "placement", "snr", "quantize-sweep")


@dataclass(frozen=True)
class PlacementSpec:
    start: Position3D
    end: Position3D
    resolution: float


@dataclass(frozen=True)
class QuantizeSweepSpec:
    phase_bits: Tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    amp_levels: int = 256
    alpha_max: Optional[float] = None  # None: the largest continuous factor


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    scenario: Scenario
    systems: Tuple[System, ...]
    sweep: Union[BsUserDistance, NumElements, None] = None
    irs_fraction: float = 0.5
    tail_fraction: float = 0.5
    placement: Optional[PlacementSpec] = None
    quantize: Optional[QuantizeSweepSpec] = None
    output: Optional[str] = None


# ---------------------------------------------------------------------------
# unit conversion
# ---------------------------------------------------------------------------

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def _split(value):
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value), ""
    if isinstance(value, str):
        m = _QUANTITY.match(value)
        if m:
            return float(m.group(1)), m.group(2)
    raise ValueError(f"cannot read {value!r} as a quantity")


def parse_power(value) -> float:
    """Watts from a number (W) or a string with unit W, mW, dBm or dBW."""
    x, unit = _split(value)
    if unit in ("", "W"):
        return x
    if unit == "mW":
        return x * 1e-3
    if unit == "dBm":
        return dbm_to_watts(x)
    if unit == "dBW":
        return db_to_linear(x)
    raise ValueError(f"unknown power unit '{unit}' in {value!r} (use W, mW, dBm or dBW)")


def parse_gain(value) -> float:
    """Linear power gain from a number or a string in dB."""
    x, unit = _split(value)
    if unit == "":
        return x
    if unit == "dB":
        return db_to_linear(x)
    raise ValueError(f"unknown gain unit '{unit}' in {value!r} (use dB or a linear number)")


def _number(value) -> float:
    x, unit = _split(value)
    if unit:
        raise ValueError(f"expected a plain number, got {value!r}")
    return x


def _integer(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _boolean(value) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected true or false, got {value!r}")
    return value


def _position(value) -> Position3D:
    if not isinstance(value, list) or len(value) != 3:
        raise ValueError(f"expected [x, y, z], got {value!r}")
    return Position3D(*(_number(v) for v in value))


# ---------------------------------------------------------------------------
# YAML reading with line tracking
# ---------------------------------------------------------------------------

def _line_map(node, path=(), lines=None):
    if lines is None:
        lines = {(): node.start_mark.line + 1}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            sub = path + (str(key_node.value),)
            if sub in lines:
                raise ConfigError("duplicate key", ".".join(sub), key_node.start_mark.line + 1)
            lines[sub] = key_node.start_mark.line + 1
            _line_map(value_node, sub, lines)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            sub = path + (str(i),)
            lines[sub] = item.start_mark.line + 1
            _line_map(item, sub, lines)
    return lines


_MISSING = object()


class _Section:
    """A mapping in the config; tracks which keys were consumed."""

    def __init__(self, data, path, lines):
        self.path = path
        self.lines = lines
        if not isinstance(data, dict):
            raise ConfigError(f"expected a mapping, got {type(data).__name__}",
                              self.where(), self.line())
        self.data = data
        self.used = set()

    def where(self, key=None):
        parts = self.path + ((str(key),) if key is not None else ())
        return ".".join(parts) or "<root>"

    def line(self, key=None):
        parts = self.path + ((str(key),) if key is not None else ())
        return self.lines.get(parts, self.lines.get(self.path))

    def has(self, key):
        return key in self.data

    def get(self, key, conv, default=_MISSING):
        self.used.add(key)
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError("missing required key", self.where(key), self.line())
            return default
        try:
            return conv(self.data[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), self.where(key), self.line(key)) from None

    def section(self, key, required=True):
        self.used.add(key)
        if key not in self.data:
            if required:
                raise ConfigError("missing required section", self.where(key), self.line())
            return None
        return _Section(self.data[key], self.path + (key,), self.lines)

    def items(self, key):
        """Sections for each entry of a list of mappings."""
        self.used.add(key)
        if key not in self.data:
            raise ConfigError("missing required key", self.where(key), self.line())
        seq = self.data[key]
        if not isinstance(seq, list) or not seq:
            raise ConfigError("expected a non-empty list", self.where(key), self.line(key))
        return [_Section(item, self.path + (key, str(i)), self.lines) for i, item in enumerate(seq)]

    def finish(self):
        for key in self.data:
            if key not in self.used:
                raise ConfigError("unknown key", self.where(key), self.line(key))


def _checked(build, sec: _Section, key=None):
    try:
        return build()
    except DomainError as exc:
        raise ConfigError(str(exc), sec.where(key), sec.line(key)) from None


def _read_scenario(sec: _Section) -> Scenario:
    pl = sec.section("path_loss")
    path_loss = _checked(lambda: PathLossModel(pl.get("reference_gain", parse_gain),
                                               pl.get("exponent", _number)), pl)
    pl.finish()
    nz = sec.section("noise")
    noise = _checked(lambda: NoisePowers(nz.get("receiver", parse_power),
                                         nz.get("amplification", parse_power)), nz)
    nz.finish()
    fields = dict(
        bs_pos=sec.get("bs", _position),
        user_pos=sec.get("user", _position),
        irs_pos=sec.get("irs", _position),
        num_elements=sec.get("elements", _integer),
        transmit_power=sec.get("transmit_power", parse_power),
        wavelength=sec.get("wavelength", _number, DEFAULT_WAVELENGTH),
        direct_link_blocked=sec.get("direct_link_blocked", _boolean, True),
    )
    sec.finish()
    return _checked(lambda: Scenario(noise=noise, path_loss=path_loss, **fields), sec)


def _read_system(sec: _Section, scenario: Scenario) -> System:
    kind = sec.get("type", str)
    name = sec.get("name", str, kind)
    if kind == "passive":
        system = IRSSystem(Passive(), name)
    elif kind in ("active_total", "active_per_element"):
        power = sec.get("power", parse_power)
        alpha_max = sec.get("alpha_max", _number, None)
        cls = ActiveTotal if kind == "active_total" else ActivePerElement
        system = _checked(lambda: IRSSystem(cls(power, alpha_max), name), sec)
    elif kind == "relay":
        mode = sec.get("mode", lambda v: DuplexMode(v).value)
        power = sec.get("power", parse_power)
        noise = sec.get("noise", parse_power, scenario.noise.sigma0_sq)
        antennas = sec.get("antennas", _integer, 1)
        system = _checked(lambda: RelaySystem(RelayConfig(power, noise, DuplexMode(mode), antennas), name), sec)
    else:
        raise ConfigError(
            f"unknown system type {kind!r} (passive, active_total, active_per_element, relay)",
            sec.where("type"), sec.line("type"))
    sec.finish()
    return system


def _read_int_list(value):
    if not isinstance(value, list) or not value:
        raise ValueError(f"expected a non-empty list of integers, got {value!r}")
    return tuple(_integer(v) for v in value)


def _experiment_name(value):
    if value not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {value!r} (one of {', '.join(EXPERIMENTS)})")
    return value


def load_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text."""
    try:
        data = yaml.safe_load(text)
        root_node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"malformed syntax in {source}: {problem}", None, line) from None
    if root_node is None:
        raise ConfigError(f"{source} is empty")
    lines = _line_map(root_node)
    root = _Section(data, (), lines)

    experiment = root.get("experiment", _experiment_name)
    scenario = _read_scenario(root.section("scenario"))
    systems = tuple(_read_system(s, scenario) for s in root.items("systems"))
    names = [s.name for s in systems]
    if len(set(names)) != len(names):
        raise ConfigError(f"system names must be unique, got {names}", "systems", root.line("systems"))
    output = root.get("output", str, None)

    sweep = None
    irs_fraction = 0.5
    tail_fraction = 0.5
    placement = None
    quantize = None
    sw = root.section("sweep", required=experiment in ("fig5", "fig6"))
    if sw is not None:
        if sw.has("distance"):
            d = sw.section("distance")
            sweep = _checked(lambda: BsUserDistance(d.get("from", _number), d.get("to", _number),
                                                    d.get("step", _number)), d)
            d.finish()
        if sw.has("elements"):
            if sweep is not None:
                raise ConfigError("give either 'distance' or 'elements', not both",
                                  sw.where("elements"), sw.line("elements"))
            values = sw.get("elements", _read_int_list)
            sweep = _checked(lambda: NumElements(values), sw, "elements")
        irs_fraction = sw.get("irs_fraction", _number, 0.5)
        tail_fraction = sw.get("tail_fraction", _number, 0.5)
        sw.finish()
        if sweep is None:
            raise ConfigError("sweep needs 'distance' or 'elements'", sw.where(), sw.line())
        if not 0 < tail_fraction <= 1:
            raise ConfigError("must lie in (0, 1]", sw.where("tail_fraction"), sw.line("tail_fraction"))
    if experiment == "fig5" and not isinstance(sweep, BsUserDistance):
        raise ConfigError("fig5 needs a 'distance' sweep", "sweep", root.line("sweep"))
    if experiment == "fig6" and not isinstance(sweep, NumElements):
        raise ConfigError("fig6 needs an 'elements' sweep", "sweep", root.line("sweep"))

    pl = root.section("placement", required=experiment == "placement")
    if pl is not None:
        placement = PlacementSpec(pl.get("from", _position), pl.get("to", _position),
                                  pl.get("resolution", _number))
        pl.finish()
        if not placement.resolution > 0:
            raise ConfigError("must be positive", pl.where("resolution"), pl.line("resolution"))
        if placement.start == placement.end:
            raise ConfigError("segment endpoints coincide", pl.where(), pl.line())

    qz = root.section("quantize", required=False)
    if qz is not None:
        quantize = QuantizeSweepSpec(qz.get("phase_bits", _read_int_list, QuantizeSweepSpec.phase_bits),
                                     qz.get("amp_levels", _integer, QuantizeSweepSpec.amp_levels),
                                     qz.get("alpha_max", _number, None))
        if any(b < 1 for b in quantize.phase_bits):
            raise ConfigError("phase bits must be positive", qz.where("phase_bits"), qz.line("phase_bits"))
        if quantize.amp_levels < 1:
            raise ConfigError("must be positive", qz.where("amp_levels"), qz.line("amp_levels"))
        if quantize.alpha_max is not None and not quantize.alpha_max > 0:
            raise ConfigError("must be positive", qz.where("alpha_max"), qz.line("alpha_max"))
        qz.finish()
    elif experiment == "quantize-sweep":
        quantize = QuantizeSweepSpec()
    root.finish()

    return RunConfig(experiment=experiment, scenario=scenario, systems=systems, sweep=sweep,
                     irs_fraction=irs_fraction, tail_fraction=tail_fraction,
                     placement=placement, quantize=quantize, output=output)


def parse_config(path) -> RunConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return load_config_text(text, str(path))


# ---------------------------------------------------------------------------
# echo
# ---------------------------------------------------------------------------

def _pos(p: Position3D):
    return [float(p.x), float(p.y), float(p.z)]


def _system_dict(system: System):
    if isinstance(system, RelaySystem):
        cfg = system.config
        return {"name": system.name, "type": "relay", "mode": cfg.mode.value,
                "power": float(cfg.relay_power), "noise": float(cfg.relay_noise_sq),
                "antennas": int(cfg.num_antennas)}
    pm = system.power_model
    if isinstance(pm, Passive):
        return {"name": system.name, "type": "passive"}
    out = {"name": system.name}
    if isinstance(pm, ActiveTotal):
        out.update(type="active_total", power=float(pm.total_power))
    else:
        out.update(type="active_per_element", power=float(pm.element_power))
    if pm.alpha_max is not None:
        out["alpha_max"] = float(pm.alpha_max)
    return out


def config_to_dict(cfg: RunConfig) -> dict:
    """Linear-unit mapping that :func:`load_config_text` reads back unchanged."""
    sc = cfg.scenario
    out = {
        "experiment": cfg.experiment,
        "scenario": {
            "bs": _pos(sc.bs_pos), "user": _pos(sc.user_pos), "irs": _pos(sc.irs_pos),
            "elements": int(sc.num_elements),
            "wavelength": float(sc.wavelength),
            "direct_link_blocked": bool(sc.direct_link_blocked),
            "path_loss": {"reference_gain": float(sc.path_loss.beta0),
                          "exponent": float(sc.path_loss.kappa)},
            "transmit_power": float(sc.transmit_power),
            "noise": {"receiver": float(sc.noise.sigma0_sq),
                      "amplification": float(sc.noise.sigmaI_sq)},
        },
        "systems": [_system_dict(s) for s in cfg.systems],
    }
    if cfg.sweep is not None:
        if isinstance(cfg.sweep, BsUserDistance):
            sweep = {"distance": {"from": float(cfg.sweep.start), "to": float(cfg.sweep.stop),
                                  "step": float(cfg.sweep.step)}}
        else:
            sweep = {"elements": list(cfg.sweep.values)}
        sweep["irs_fraction"] = float(cfg.irs_fraction)
        sweep["tail_fraction"] = float(cfg.tail_fraction)
        out["sweep"] = sweep
    if cfg.placement is not None:
        out["placement"] = {"from": _pos(cfg.placement.start), "to": _pos(cfg.placement.end),
                            "resolution": float(cfg.placement.resolution)}
    if cfg.quantize is not None:
        q = {"phase_bits": list(cfg.quantize.phase_bits), "amp_levels": int(cfg.quantize.amp_levels)}
        if cfg.quantize.alpha_max is not None:
            q["alpha_max"] = float(cfg.quantize.alpha_max)
        out["quantize"] = q
    if cfg.output is not None:
        out["output"] = cfg.output
    return out


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
