"""Run configuration from INI-style files (``key = value`` under ``[section]``).

Precedence, lowest first: built-in defaults, the config file, command-line
flags. Unknown sections or keys are rejected so typos do not pass silently.
"""

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .control import TargetSchedule
from .exceptions import ConfigurationError
from .heat_input import HeatInputModel, PowerLaw
from .montecarlo import GainRange, SweepSpec
from .plant import ThermalPlantParams
from .pump import PumpParams

_HEAT_KEYS = {
    "fired_alpha_ref", "fired_alpha_exponent", "coasting_alpha_ref", "coasting_alpha_exponent",
    "speed_ref", "fired_alpha_cov", "coasting_alpha_cov", "T_gas_fired", "T_gas_coasting",
    "T_gas_fired_std", "T_gas_coasting_std", "correlation_alpha_T", "speed_min", "speed_max",
}


@dataclass(frozen=True)
class ControllerConfig:
    strategy: str = "pid"
    k_P: float = -1.4
    k_I: float = -0.05
    k_D: float = -1.0
    target_fired: float = 407.0
    target_coasting: float = None
    mechanical_ratio: float = None
    max_temperature: float = 407.0
    base_flow: float = None
    derivative_filter: float = None
    reference: str = "none"

    def __post_init__(self):
        if self.reference not in ("none", "mechanical"):
            raise ConfigurationError("reference must be 'none' or 'mechanical'")

    @property
    def schedule(self):
        coast = self.target_fired if self.target_coasting is None else self.target_coasting
        return TargetSchedule(self.target_fired, coast)


@dataclass(frozen=True)
class SimulationConfig:
    dt: float = 1e-3
    decimation: int = 10
    warmup: float = None
    periodic: bool = True
    max_laps: int = 20

    def __post_init__(self):
        if self.decimation < 1:
            raise ConfigurationError("decimation must be >= 1")
        if self.max_laps < 1:
            raise ConfigurationError("max_laps must be >= 1")

    def kwargs(self):
        return dict(dt=self.dt, warmup=self.warmup, periodic=self.periodic,
                    max_laps=self.max_laps)


@dataclass(frozen=True)
class TuneConfig:
    T_w_0: float = 373.0
    T_cyl_0: float = 419.0
    mdot_w_0: float = 2.0
    tau_c: float = 5.0


@dataclass(frozen=True)
class RangeConfig:
    target_min: float = 370.0
    target_max: float = 520.0
    target_step: float = 10.0

    def targets(self):
        if self.target_step <= 0 or self.target_max < self.target_min:
            raise ConfigurationError("range needs target_min <= target_max and target_step > 0")
        n = int(np.floor((self.target_max - self.target_min) / self.target_step + 1e-9)) + 1
        return [self.target_min + k * self.target_step for k in range(n)]


@dataclass(frozen=True)
class RunConfig:
    trace: Path = None
    output_dir: Path = Path(".")
    seed: int = 0
    jobs: int = -1
    plant: ThermalPlantParams = field(default_factory=ThermalPlantParams)
    pump: PumpParams = field(default_factory=PumpParams)
    heat: HeatInputModel = field(default_factory=HeatInputModel)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    tune: TuneConfig = field(default_factory=TuneConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    sweep_weights: tuple = (0.5, 0.5)
    range: RangeConfig = field(default_factory=RangeConfig)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def check_files(self):
        if self.trace is not None and not Path(self.trace).is_file():
            raise ConfigurationError(f"trace file not found: {self.trace}")
        return self


def _convert(raw, typ, key):
    raw = raw.strip()
    if raw.lower() in ("", "none"):
        return None
    try:
        if typ is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None
    return raw


def _floats(raw, key, n=None):
    try:
        vals = [float(x) for x in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigurationError(f"{key}: expected numbers, got {raw!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigurationError(f"{key}: expected {n} numbers, got {len(vals)}")
    return vals


def _section(cp, name, cls, types=None):
    """Build ``cls`` from a section, converting each value by the field's default type."""
    if not cp.has_section(name):
        return cls()
    defaults = cls()
    known = {f.name: f for f in fields(cls)}
    kw = {}
    for key, raw in cp.items(name):
        if key not in known:
            raise ConfigurationError(f"[{name}] unknown key {key!r}")
        typ = (types or {}).get(key)
        if typ is None:
            d = getattr(defaults, key)
            typ = type(d) if d is not None else float
        kw[key] = _convert(raw, typ, f"[{name}] {key}")
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"[{name}] {exc}") from None


def _heat(cp):
    if not cp.has_section("heat"):
        return HeatInputModel()
    d = HeatInputModel()
    items = dict(cp.items("heat"))
    unknown = set(items) - _HEAT_KEYS
    if unknown:
        raise ConfigurationError(f"[heat] unknown keys {sorted(unknown)}")
    get = lambda k, dv: float(items[k]) if k in items else dv  # noqa: E731
    try:
        speed_ref = get("speed_ref", d.fired_alpha_mean.speed_ref)
        return HeatInputModel(
            fired_alpha_mean=PowerLaw(get("fired_alpha_ref", d.fired_alpha_mean.value_at_ref),
                                      get("fired_alpha_exponent", d.fired_alpha_mean.exponent),
                                      speed_ref),
            coasting_alpha_mean=PowerLaw(
                get("coasting_alpha_ref", d.coasting_alpha_mean.value_at_ref),
                get("coasting_alpha_exponent", d.coasting_alpha_mean.exponent), speed_ref),
            fired_alpha_cov=get("fired_alpha_cov", d.fired_alpha_cov),
            coasting_alpha_cov=get("coasting_alpha_cov", d.coasting_alpha_cov),
            T_gas_fired=get("T_gas_fired", d.T_gas_fired),
            T_gas_coasting=get("T_gas_coasting", d.T_gas_coasting),
            T_gas_fired_std=get("T_gas_fired_std", d.T_gas_fired_std),
            T_gas_coasting_std=get("T_gas_coasting_std", d.T_gas_coasting_std),
            correlation_alpha_T=get("correlation_alpha_T", d.correlation_alpha_T),
            speed_range=(get("speed_min", d.speed_range[0]), get("speed_max", d.speed_range[1])),
        )
    except ValueError as exc:
        raise ConfigurationError(f"[heat] {exc}") from None


def _sweep(cp):
    if not cp.has_section("sweep"):
        return SweepSpec(), (0.5, 0.5)
    d = SweepSpec()
    items = dict(cp.items("sweep"))
    kw = {}
    for gain in ("k_P", "k_I", "k_D"):
        key = f"{gain}_range"
        if key in items:
            lo, hi, count = _floats(items.pop(key), f"[sweep] {key}", 3)
            try:
                kw[key] = GainRange(lo, hi, int(count))
            except ValueError as exc:
                raise ConfigurationError(f"[sweep] {key}: {exc}") from None
    target = items.pop("target", None)
    if target is not None:
        kw["target"] = TargetSchedule.constant(_convert(target, float, "[sweep] target"))
    weights = _floats(items.pop("weights"), "[sweep] weights", 2) if "weights" in items else (0.5, 0.5)
    for key, typ in (("strategy", str), ("mode", str), ("n_samples", int)):
        if key in items:
            kw[key] = _convert(items.pop(key), typ, f"[sweep] {key}")
    if items:
        raise ConfigurationError(f"[sweep] unknown keys {sorted(items)}")
    try:
        return replace(d, **kw), tuple(weights)
    except ValueError as exc:
        raise ConfigurationError(f"[sweep] {exc}") from None


_KNOWN_SECTIONS = {"paths", "run", "plant", "pump", "heat", "controller", "simulation", "tune",
                   "sweep", "range"}

_CONTROLLER_TYPES = {"strategy": str, "reference": str}


def load_config(path=None):
    """Read a :class:`RunConfig`; ``None`` gives the defaults.

    Relative paths in ``[paths]`` resolve against the config file's directory.
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    unknown = set(cp.sections()) - _KNOWN_SECTIONS
    if unknown:
        raise ConfigurationError(f"unknown sections {sorted(unknown)}")

    base = path.parent
    kw = {}
    if cp.has_section("paths"):
        items = dict(cp.items("paths"))
        bad = set(items) - {"trace", "output_dir"}
        if bad:
            raise ConfigurationError(f"[paths] unknown keys {sorted(bad)}")
        if items.get("trace"):
            kw["trace"] = base / items["trace"]
        if items.get("output_dir"):
            kw["output_dir"] = base / items["output_dir"]
    if cp.has_section("run"):
        items = dict(cp.items("run"))
        bad = set(items) - {"seed", "jobs"}
        if bad:
            raise ConfigurationError(f"[run] unknown keys {sorted(bad)}")
        for key in ("seed", "jobs"):
            if key in items:
                kw[key] = _convert(items[key], int, f"[run] {key}")

    kw["plant"] = _section(cp, "plant", ThermalPlantParams)
    kw["pump"] = _section(cp, "pump", PumpParams)
    kw["heat"] = _heat(cp)
    kw["controller"] = _section(cp, "controller", ControllerConfig, _CONTROLLER_TYPES)
    kw["simulation"] = _section(cp, "simulation", SimulationConfig)
    kw["tune"] = _section(cp, "tune", TuneConfig)
    kw["range"] = _section(cp, "range", RangeConfig)
    kw["sweep"], kw["sweep_weights"] = _sweep(cp)
    cfg = RunConfig(**kw)
    if "seed" in kw:
        cfg = replace(cfg, sweep=replace(cfg.sweep, seed=kw["seed"]))
    return cfg
