"""Flat ``key = value unit`` scenario configuration.

Every physical quantity carries an explicit unit in the file; values are
converted to SI on load. Lines starting with ``#`` are comments.

Example::

    kind = cratering
    d0 = 5 mm
    dt = 0.1 ms
    sphere_density = 2200 kg/m^3
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..errors import ConfigError

UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "density": {"kg/m^3": 1.0, "g/cm^3": 1e3},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6},
    "velocity": {"m/s": 1.0, "mm/s": 1e-3},
    "angular_velocity": {"rad/s": 1.0, "rpm": 2.0 * math.pi / 60.0},
    "acceleration": {"m/s^2": 1.0},
    "frequency": {"Hz": 1.0},
    "angle": {"deg": math.pi / 180.0, "rad": 1.0},
    "dimensionless": {"-": 1.0, "": 1.0},
}
CANONICAL = {"length": "m", "time": "s", "density": "kg/m^3", "pressure": "Pa",
             "velocity": "m/s", "angular_velocity": "rad/s", "acceleration": "m/s^2",
             "frequency": "Hz", "angle": "rad", "dimensionless": "-"}
KINDS = ("cratering", "cone", "collapse", "drum")


# key -> dimension ("str", "int", "bool" for non-physical fields)
SCHEMA = {
    "kind": "str",
    "name": "str",
    "output_dir": "str",
    "seed": "int",
    "duration": "time",
    "settle_time": "time",
    "output_hz": "frequency",
    # solver
    "d0": "length",
    "h_ratio": "dimensionless",
    "dt": "time",
    "kernel": "str",
    "viscosity": "str",
    "gamma_a": "dimensionless",
    "ps_freq": "int",
    "t_delay": "time",
    "gravity": "acceleration",
    "jitter": "length",
    # material
    "rho0": "density",
    "youngs": "pressure",
    "poisson": "dimensionless",
    "mu_s": "dimensionless",
    "mu_2": "dimensionless",
    "I0": "dimensionless",
    "cohesion": "pressure",
    "grain_d": "length",
    # container and bed
    "container_x": "length",
    "container_y": "length",
    "container_z": "length",
    "soil_depth": "length",
    # cratering
    "sphere_radius": "length",
    "sphere_density": "density",
    "drop_height": "length",
    "stop_ke_ratio": "dimensionless",
    # cone
    "cone_angle": "angle",
    "cone_diameter": "length",
    "cone_density": "density",
    # column collapse
    "column_x": "length",
    "column_z": "length",
    # drum
    "drum_radius": "length",
    "drum_length": "length",
    "drum_omega": "angular_velocity",
    "drum_speed": "velocity",
    "drum_sinkage": "length",
    # active domains
    "active": "bool",
    "active_half_x": "length",
    "active_half_y": "length",
    "active_half_z": "length",
}


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "cratering"
    name: str = ""
    output_dir: str = "output"
    seed: int = 0
    duration: float = 0.1
    settle_time: float = 0.1
    output_hz: float = 0.0
    d0: float = 0.005
    h_ratio: float = 1.3
    dt: float = 1e-4
    kernel: str = "cubic"
    viscosity: str = "bilateral"
    gamma_a: float = 0.01
    ps_freq: int = 1
    t_delay: float = 0.0
    gravity: float = -9.81
    jitter: float = 0.0
    rho0: float = 1510.0
    youngs: float = 1e6
    poisson: float = 0.3
    mu_s: float = 0.3
    mu_2: float = 0.3
    I0: float = 0.03
    cohesion: float = 0.0
    grain_d: float = 1e-3
    container_x: float = 0.14
    container_y: float = 0.10
    container_z: float = 0.15
    soil_depth: float = 0.08
    sphere_radius: float = 0.0125
    sphere_density: float = 2200.0
    drop_height: float = 0.2
    stop_ke_ratio: float = 1e-6
    cone_angle: float = math.radians(30.0)
    cone_diameter: float = 0.0092
    cone_density: float = 7800.0
    column_x: float = 0.05
    column_z: float = 0.05
    drum_radius: float = 0.05
    drum_length: float = 0.06
    drum_omega: float = 2.09
    drum_speed: float = 0.15
    drum_sinkage: float = 0.02
    active: bool = False
    active_half_x: float = 0.0
    active_half_y: float = 0.0
    active_half_z: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if self.kernel not in ("cubic", "wendland"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.viscosity not in ("bilateral", "unilateral"):
            raise ConfigError(f"unknown viscosity mode {self.viscosity!r}")
        if self.duration < 0 or self.settle_time < 0 or self.output_hz < 0:
            raise ConfigError("durations and output rate must be non-negative")

    @property
    def h(self) -> float:
        return self.h_ratio * self.d0

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            dim = SCHEMA[f.name]
            v = getattr(self, f.name)
            if dim in ("str", "int"):
                lines.append(f"{f.name} = {v}")
            elif dim == "bool":
                lines.append(f"{f.name} = {'on' if v else 'off'}")
            else:
                lines.append(f"{f.name} = {v!r} {CANONICAL[dim]}")
        return "\n".join(lines) + "\n"


def _parse_value(key: str, text: str, lineno: int):
    dim = SCHEMA[key]
    if dim == "str":
        return text
    if dim == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} expects an integer, got {text!r}") from None
    if dim == "bool":
        low = text.lower()
        if low in ("on", "true", "yes", "1"):
            return True
        if low in ("off", "false", "no", "0"):
            return False
        raise ConfigError(f"line {lineno}: {key} expects on/off, got {text!r}")
    parts = text.split(None, 1)
    unit = parts[1].strip() if len(parts) > 1 else ""
    try:
        number = float(parts[0])
    except (ValueError, IndexError):
        raise ConfigError(f"line {lineno}: {key} expects a number, got {text!r}") from None
    table = UNITS[dim]
    if unit not in table:
        if not unit:
            raise ConfigError(f"line {lineno}: {key} needs a unit ({', '.join(k for k in table if k)})")
        raise ConfigError(f"line {lineno}: unit {unit!r} is not a {dim} unit for {key}")
    return number * table[unit]


def parse_config(text: str) -> ScenarioConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value [unit]'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, value, lineno)
    return ScenarioConfig(**values)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def as_dict(cfg: ScenarioConfig) -> dict:
    return asdict(cfg)
