"""Run configuration: an INI-style file plus command-line overrides.

Every section and key is whitelisted; anything else is rejected with the
file and line where it appears.  Example::

    [run]
    mode = ensemble
    thetas = 0, 0.5, 1.0

    [model]
    coupling = dissipative
    omega = 1
    lambda = 1

    [bath]
    Gamma = 1
    gamma = 0.5
    Omega = 0

    [grid]
    t_final = 6.283185307179586
    dt = 1e-3

    [ensemble]
    n_traj = 20000
    root_seed = 1
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import asdict, dataclass, field, replace

from .core import BathSpectrum, CouplingKind, SystemModel, TimeGrid
from .ensemble import ConfigurationError
from .noise import GeneratorKind


class Mode(str, enum.Enum):
    SINGLE = "single-trajectory"
    ENSEMBLE = "ensemble"
    ANALYTIC = "analytic-only"
    FIGURE1 = "figure1"
    FIGURE2 = "figure2"
    FIGURE3 = "figure3"
    VALIDATE = "validate"


class OutputFormat(str, enum.Enum):
    CSV = "csv"
    SUMMARY = "summary"
    BOTH = "both"


@dataclass(frozen=True)
class Tolerances:
    n_sigma: float = 3.0
    density_n_sigma: float = 5.0
    solid_angle: float = 1e-2
    markov: float = 0.02
    riccati: float = 1e-7
    analytic: float = 1e-10
    # bath-fit residual accepted for the K-mode oracle, in units of Gamma*gamma/2
    bath_fit: float = 0.05
    # extra deviation allowed for the discretized bath in density checks
    bath_density: float = 1e-4
    # floor for comparisons whose standard error vanishes (deterministic points)
    deterministic: float = 1e-6


@dataclass(frozen=True)
class RunConfig:
    mode: Mode = Mode.ENSEMBLE
    coupling: CouplingKind = CouplingKind.DISSIPATIVE
    omega: float = 1.0
    lam: float = 1.0
    theta: float = 1.0
    thetas: tuple = ()
    n_theta: int = 9
    Gamma: float = 1.0
    gamma: float = 1.0
    Omega: float = 0.0
    t_final: float = 2.0 * math.pi
    dt: float = 1e-3
    n_traj: int = 20000
    root_seed: int = 0
    n_blocks: int = 100
    workers: int = 1
    generator: GeneratorKind = GeneratorKind.RECURSIVE
    checkpoint: str | None = None
    out: str = "results"
    format: OutputFormat = OutputFormat.BOTH
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.n_traj < 1:
            raise ConfigurationError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if self.n_blocks < 1:
            raise ConfigurationError(f"n_blocks must be >= 1, got {self.n_blocks}")
        if self.dt <= 0 or self.t_final <= 0:
            raise ConfigurationError("dt and t_final must be positive")
        if not 0 <= self.root_seed < 2 ** 64:
            raise ConfigurationError(f"root_seed must be an unsigned 64-bit integer, got {self.root_seed}")
        if self.n_theta < 1:
            raise ConfigurationError("n_theta must be >= 1")
        try:
            self.model()
            self.bath()
            self.grid()
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def model(self, theta: float | None = None) -> SystemModel:
        return SystemModel(self.omega, self.lam, self.coupling, self.theta if theta is None else theta)

    def bath(self) -> BathSpectrum:
        return BathSpectrum(self.Gamma, self.gamma, self.Omega)

    def grid(self) -> TimeGrid:
        return TimeGrid.from_dt(self.t_final, self.dt)

    def theta_grid(self):
        if self.thetas:
            return list(self.thetas)
        if self.n_theta == 1:
            return [self.theta]
        return [math.pi * k / (self.n_theta - 1) for k in range(self.n_theta)]

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def echo(self) -> dict:
        """Every resolved setting, defaults included."""
        d = asdict(self)
        d["thetas"] = self.theta_grid()
        d["n_steps"] = self.grid().n_steps
        for k, v in list(d.items()):
            if isinstance(v, enum.Enum):
                d[k] = v.value
        return d


def _float(v: str) -> float:
    v = v.strip().lower()
    if v in ("pi", "+pi"):
        return math.pi
    if v.endswith("*pi"):
        return float(v[:-3]) * math.pi
    return float(v)


def _thetas(v: str) -> tuple:
    return tuple(_float(x) for x in v.replace(";", ",").split(",") if x.strip())


def _seed(v: str) -> int:
    return int(v, 0)


def _opt_str(v: str):
    return v or None


# section -> key -> (RunConfig field, parser)
_SCHEMA = {
    "run": {"mode": ("mode", Mode), "out": ("out", str), "format": ("format", OutputFormat),
            "thetas": ("thetas", _thetas), "n_theta": ("n_theta", int)},
    "model": {"coupling": ("coupling", CouplingKind), "omega": ("omega", _float), "lambda": ("lam", _float),
              "theta": ("theta", _float)},
    "bath": {"Gamma": ("Gamma", _float), "gamma": ("gamma", _float), "Omega": ("Omega", _float)},
    "grid": {"t_final": ("t_final", _float), "dt": ("dt", _float), "n_steps": ("n_steps", int)},
    "ensemble": {"n_traj": ("n_traj", int), "root_seed": ("root_seed", _seed), "n_blocks": ("n_blocks", int),
                 "workers": ("workers", int), "generator": ("generator", GeneratorKind),
                 "checkpoint": ("checkpoint", _opt_str)},
    "tolerances": {f: (f, float) for f in Tolerances.__dataclass_fields__},
}


def _line_of(text: str, section: str, key: str | None) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
        elif key is not None and current == section and s.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return i
    return 0


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep Gamma/gamma distinct
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    values = {}
    n_steps = None
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigurationError(f"{source}:{_line_of(text, section, None)}: unknown section [{section}]")
        for raw_key, raw in parser.items(section):
            key = raw_key
            if key not in _SCHEMA[section]:
                raise ConfigurationError(
                    f"{source}:{_line_of(text, section, raw_key)}: unknown key '{raw_key}' in [{section}]")
            name, conv = _SCHEMA[section][key]
            try:
                val = conv(raw.strip())
            except (ValueError, TypeError) as exc:
                raise ConfigurationError(
                    f"{source}:{_line_of(text, section, raw_key)}: bad value for {section}.{raw_key}: {raw!r}"
                ) from exc
            if section == "tolerances":
                values.setdefault("tolerances", {})[name] = val
            elif name == "n_steps":
                n_steps = val
            else:
                values[name] = val
    if "tolerances" in values:
        values["tolerances"] = Tolerances(**values["tolerances"])
    if n_steps is not None:
        if "dt" in values:
            raise ConfigurationError(f"{source}: give either grid.dt or grid.n_steps, not both")
        values["dt"] = values.get("t_final", 2.0 * math.pi) / n_steps
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))
