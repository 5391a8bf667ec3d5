"""Experiment configuration: sections, defaults, parsing, and validation.

Configuration files are JSON objects with one object per section (device,
population, weights, learning, run, sweep). Every key has a default, every
value is range checked, and unknown sections or keys are hard errors so a
typo never silently runs with defaults. The weight barrier accepts the
string "inf" (or null) for perfectly reliable weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

__all__ = [
    "ConfigError",
    "DeviceSection",
    "PopulationSection",
    "WeightsSection",
    "LearningSection",
    "RunSection",
    "SweepSection",
    "ExperimentConfig",
    "default_config",
    "config_from_dict",
    "config_to_dict",
    "load_config",
]

TARGET_CONVENTIONS = ("full-period", "literal")


class ConfigError(ValueError):
    """Raised when a configuration file fails parsing or validation."""


def _check(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _barrier(value) -> float:
    """Normalize a weight-barrier value; null or "inf" means no loss."""
    if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinity")):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid barrier value {value!r}") from None


@dataclass
class DeviceSection:
    phi0_hz: float = 1e9
    delta_e_neuron_kt: float = 6.0
    v_c_volts: float = 0.1

    def __post_init__(self):
        self.phi0_hz = float(self.phi0_hz)
        self.delta_e_neuron_kt = float(self.delta_e_neuron_kt)
        self.v_c_volts = float(self.v_c_volts)
        _check(self.phi0_hz > 0, "device.phi0_hz must be > 0")
        _check(self.delta_e_neuron_kt > 0, "device.delta_e_neuron_kt must be > 0")
        _check(self.v_c_volts > 0, "device.v_c_volts must be > 0")


@dataclass
class PopulationSection:
    n_in: int = 100
    n_out: int = 100
    bias_min_v: float = -0.15
    bias_max_v: float = 0.15
    t_obs_s: float = 1e-5

    def __post_init__(self):
        self.n_in = int(self.n_in)
        self.n_out = int(self.n_out)
        self.bias_min_v = float(self.bias_min_v)
        self.bias_max_v = float(self.bias_max_v)
        self.t_obs_s = float(self.t_obs_s)
        _check(self.n_in >= 2, "population.n_in must be >= 2")
        _check(self.n_out >= 2, "population.n_out must be >= 2")
        _check(self.bias_min_v < self.bias_max_v, "population.bias_min_v must be below bias_max_v")
        _check(self.t_obs_s > 0, "population.t_obs_s must be > 0")


@dataclass
class WeightsSection:
    n_bits: int = 8
    w_min: float = -1.0
    w_max: float = 1.0
    delta_e_weight_kt: float | str | None = None  # null or "inf" -> no loss
    analog_mode: bool = False

    def __post_init__(self):
        self.n_bits = int(self.n_bits)
        self.w_min = float(self.w_min)
        self.w_max = float(self.w_max)
        self.delta_e_weight_kt = _barrier(self.delta_e_weight_kt)
        _check(1 <= self.n_bits <= 24, "weights.n_bits must be in [1, 24]")
        _check(self.w_min < self.w_max, "weights.w_min must be below w_max")
        _check(self.delta_e_weight_kt > 0, "weights.delta_e_weight_kt must be > 0")
        _check(isinstance(self.analog_mode, bool), "weights.analog_mode must be true or false")


@dataclass
class LearningSection:
    alpha: float = 0.001
    window_fraction: float = 0.05
    step_dt_s: float = 1e-5
    f0_hz: float | None = None  # null -> phi0 * exp(-delta_e_neuron), the peak mean rate
    v_max: float = 0.1
    output_range_v: float | None = None  # null -> 2 * v_max
    target_convention: str = "full-period"
    eval_points: int = 50

    def __post_init__(self):
        self.alpha = float(self.alpha)
        self.window_fraction = float(self.window_fraction)
        self.step_dt_s = float(self.step_dt_s)
        self.f0_hz = None if self.f0_hz is None else float(self.f0_hz)
        self.v_max = float(self.v_max)
        self.output_range_v = None if self.output_range_v is None else float(self.output_range_v)
        self.eval_points = int(self.eval_points)
        _check(self.alpha > 0, "learning.alpha must be > 0")
        _check(0 < self.window_fraction < 1, "learning.window_fraction must be in (0, 1)")
        _check(self.step_dt_s > 0, "learning.step_dt_s must be > 0")
        _check(self.f0_hz is None or self.f0_hz > 0, "learning.f0_hz must be > 0 or null")
        _check(self.v_max > 0, "learning.v_max must be > 0")
        _check(
            self.output_range_v is None or self.output_range_v > 0,
            "learning.output_range_v must be > 0 or null",
        )
        _check(
            self.target_convention in TARGET_CONVENTIONS,
            f"learning.target_convention must be one of {TARGET_CONVENTIONS}",
        )
        _check(self.eval_points >= 2, "learning.eval_points must be >= 2")


@dataclass
class RunSection:
    steps: int = 4050
    eval_every: int = 50
    instances: int = 50
    seed: int = 12345
    tail_fraction: float = 0.2

    def __post_init__(self):
        self.steps = int(self.steps)
        self.eval_every = int(self.eval_every)
        self.instances = int(self.instances)
        self.seed = int(self.seed)
        self.tail_fraction = float(self.tail_fraction)
        _check(self.steps >= 1, "run.steps must be >= 1")
        _check(self.eval_every >= 1, "run.eval_every must be >= 1")
        _check(self.instances >= 1, "run.instances must be >= 1")
        _check(self.seed >= 0, "run.seed must be >= 0")
        _check(0 < self.tail_fraction <= 1, "run.tail_fraction must be in (0, 1]")


@dataclass
class SweepSection:
    n_list: list = field(default_factory=lambda: list(range(10, 151, 10)))
    delta_e_list: list = field(default_factory=lambda: list(range(8, 21)))
    bin_width: float = 0.25
    steps: int = 6000
    eval_every: int = 200

    def __post_init__(self):
        _check(
            isinstance(self.n_list, list) and len(self.n_list) > 0,
            "sweep.n_list must be a non-empty list",
        )
        _check(
            isinstance(self.delta_e_list, list) and len(self.delta_e_list) > 0,
            "sweep.delta_e_list must be a non-empty list",
        )
        self.n_list = [int(n) for n in self.n_list]
        self.delta_e_list = [float(b) for b in self.delta_e_list]
        self.bin_width = float(self.bin_width)
        self.steps = int(self.steps)
        self.eval_every = int(self.eval_every)
        _check(all(n >= 2 for n in self.n_list), "sweep.n_list entries must be >= 2")
        _check(
            all(b > 0 and math.isfinite(b) for b in self.delta_e_list),
            "sweep.delta_e_list entries must be positive and finite",
        )
        _check(self.bin_width > 0, "sweep.bin_width must be > 0")
        _check(self.steps >= 1, "sweep.steps must be >= 1")
        _check(self.eval_every >= 1, "sweep.eval_every must be >= 1")


_SECTIONS = {
    "device": DeviceSection,
    "population": PopulationSection,
    "weights": WeightsSection,
    "learning": LearningSection,
    "run": RunSection,
    "sweep": SweepSection,
}


@dataclass
class ExperimentConfig:
    device: DeviceSection = field(default_factory=DeviceSection)
    population: PopulationSection = field(default_factory=PopulationSection)
    weights: WeightsSection = field(default_factory=WeightsSection)
    learning: LearningSection = field(default_factory=LearningSection)
    run: RunSection = field(default_factory=RunSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    def resolved_f0(self) -> float:
        if self.learning.f0_hz is not None:
            return self.learning.f0_hz
        return self.device.phi0_hz * math.exp(-self.device.delta_e_neuron_kt)

    def resolved_output_range(self) -> float:
        if self.learning.output_range_v is not None:
            return self.learning.output_range_v
        return 2.0 * self.learning.v_max


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _parse_section(cls, name: str, data) -> object:
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in section '{name}': {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad value in section '{name}': {exc}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be an object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    kwargs = {
        name: _parse_section(cls, name, data.get(name, {})) for name, cls in _SECTIONS.items()
    }
    return ExperimentConfig(**kwargs)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-compatible snapshot of a fully resolved configuration."""
    data = asdict(cfg)
    if math.isinf(data["weights"]["delta_e_weight_kt"]):
        data["weights"]["delta_e_weight_kt"] = "inf"
    return data


def load_config(path) -> ExperimentConfig:
    """Load a configuration file, or the config embedded in a run manifest."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if isinstance(data, dict) and "config" in data and "outputs" in data:
        data = data["config"]  # a run manifest embeds the resolved config
    return config_from_dict(data)
