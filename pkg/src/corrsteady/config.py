"""Run configuration: YAML file -> dataclasses, with explicit units on physical quantities.

Model rates are plain numbers in units of the collective rate gamma.  Physical
inputs (the ``physical`` block) are strings ``"<value> <unit>"`` and are turned
into rates with :func:`corrsteady.rates.derive_rates`.
"""
from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import yaml

from . import rates
from .models import ModelSpec, f1_model, full_model, two_level_model
from .spin import PolarizabilitySet

VARIANTS = ("two-level", "f1", "full")
SWEEP_VARIABLES = ("none", "theta", "w_plus", "gamma_ratio", "grid")


class ConfigError(ValueError):
    pass


# -- units -----------------------------------------------------------------------------

_UNITS = {
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6},
    "flux": {"1/s": 1.0},
    "area": {"m^2": 1.0, "cm^2": 1e-4, "mm^2": 1e-6, "um^2": 1e-12},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    # angular frequencies; "X Hz" means value/2pi in Hz
    "angular": {"rad/s": 1.0, "Hz": 2 * math.pi, "kHz": 2e3 * math.pi, "MHz": 2e6 * math.pi,
                "GHz": 2e9 * math.pi},
    # event rates; "kHz" is read as 1e3 events per second
    "rate": {"1/s": 1.0, "Hz": 1.0, "kHz": 1e3, "MHz": 1e6},
}

_QTY = re.compile(r"^\s*([-+0-9.eE]+)\s*(\S+)?\s*$")


def parse_quantity(text, kind: str) -> float:
    """``"6 mW"`` -> 0.006.  ``"(300 um)^2"`` is accepted for areas."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        raise ConfigError(f"missing unit on {kind} quantity {text!r}")
    s = str(text).strip()
    sq = re.match(r"^\(\s*([-+0-9.eE]+)\s*(\S+)\s*\)\s*\^\s*2$", s)
    if sq and kind == "area":
        v = float(sq.group(1)) * _UNITS["length"].get(sq.group(2), math.nan)
        if math.isnan(v):
            raise ConfigError(f"unknown length unit in {text!r}")
        return v * v
    m = _QTY.match(s)
    if not m or m.group(2) is None:
        raise ConfigError(f"cannot parse {kind} quantity {text!r}; expected '<value> <unit>'")
    table = _UNITS[kind]
    unit = m.group(2)
    if unit not in table:
        raise ConfigError(f"unknown {kind} unit {unit!r}; allowed: {sorted(table)}")
    return float(m.group(1)) * table[unit]


# -- config blocks ---------------------------------------------------------------------

@dataclass
class ModelConfig:
    N: float = 1e4
    theta: float = 0.0              # radians
    theta_over_pi: float | None = None
    # two-level and F=1
    w_plus: float = 0.0
    w_minus: float = 0.0
    gamma_minus: float = 1.0
    gamma_plus: float = 0.0
    nu: float = 0.0
    epsilon: float = 0.1
    s1: float = 1.0
    zeeman: list | None = None
    secular: bool = True
    # full model
    F: float = 4.0
    s0: float = 0.0
    s2: float | None = None
    gamma_dec: float = 0.0
    w: float = 0.0
    zeeman_splitting: float = 1.0

    @property
    def angle(self):
        return math.pi * self.theta_over_pi if self.theta_over_pi is not None else self.theta


@dataclass
class PhysicalConfig:
    power: str | None = None
    photon_flux: str | None = None
    area: str = "(300 um)^2"
    wavelength: str = "852 nm"
    detuning: str = "3 GHz"
    gamma0: str = "5.234 MHz"
    N: float = 1e9
    pump: str = "1 kHz"

    def to_params(self) -> rates.PhysicalParams:
        return rates.PhysicalParams(
            area=parse_quantity(self.area, "area"),
            wavelength=parse_quantity(self.wavelength, "length"),
            detuning=parse_quantity(self.detuning, "angular"),
            gamma0=parse_quantity(self.gamma0, "angular"),
            N=float(self.N),
            power=None if self.power is None else parse_quantity(self.power, "power"),
            photon_flux=None if self.photon_flux is None else parse_quantity(self.photon_flux, "flux"),
            pump=parse_quantity(self.pump, "rate"),
        )


_AXIS_UNITS = ("1", "pi", "N")


@dataclass
class SweepConfig:
    variable: str = "none"
    start: float | None = None
    stop: float | None = None
    points: int = 1
    values: list | None = None
    unit: str = "1"                # "pi" scales theta values by pi, "N" scales rates by N
    # second axis for the (w_plus, gamma_ratio) grid
    start2: float | None = None
    stop2: float | None = None
    points2: int = 1

    def axis(self, N=1.0):
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
        elif self.start is not None and self.stop is not None:
            vals = np.linspace(self.start, self.stop, int(self.points))
        else:
            vals = np.zeros(0)
        if self.unit not in _AXIS_UNITS:
            raise ConfigError(f"sweep.unit must be one of {_AXIS_UNITS}")
        return vals * {"1": 1.0, "pi": math.pi, "N": float(N)}[self.unit]

    def axis2(self):
        return np.linspace(self.start2, self.stop2, int(self.points2))


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_steps: int = 400
    init: str = "pumped"           # pumped | mixed | random
    jacobian: str = "analytic"
    newton: bool = True            # polish with Newton once the residual is small
    perturbation: float = 1e-3     # size of the random init perturbation


@dataclass
class SpectrumConfig:
    enabled: bool = True
    omega_min: float | None = None
    omega_max: float | None = None
    points: int = 4001
    scheme: str = "frozen"
    max_peaks: int = 4


@dataclass
class OracleConfig:
    N: int = 2
    cap: int = 100
    allow_large: bool = False


@dataclass
class RunConfig:
    variant: str = "two-level"
    model: ModelConfig = field(default_factory=ModelConfig)
    physical: PhysicalConfig | None = None
    sweep: SweepConfig = field(default_factory=SweepConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    seed: int = 0
    norm: str = "fro"
    name: str = "run"

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.sweep.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep.variable must be one of {SWEEP_VARIABLES}")
        if self.sweep.variable != "none":
            ax = self.sweep.axis(self.model.N)
            if ax.size == 0:
                raise ConfigError("sweep range is empty")
            if self.sweep.variable == "theta" and (ax.min() < -1e-12 or ax.max() > math.pi / 2 + 1e-12):
                raise ConfigError("theta must lie in [0, pi/2]")
            if self.sweep.variable == "grid":
                if self.sweep.start2 is None or self.sweep.stop2 is None or self.sweep.points2 < 1:
                    raise ConfigError("grid sweep needs start2, stop2, points2 for gamma_ratio")
            if self.sweep.variable in ("w_plus", "gamma_ratio", "grid") and self.variant != "two-level":
                raise ConfigError(f"sweep over {self.sweep.variable} is defined for the two-level variant")
        if self.sweep.points < 1:
            raise ConfigError("sweep.points must be positive")
        if not 0 <= self.model.angle <= math.pi / 2 + 1e-12:
            raise ConfigError("theta must lie in [0, pi/2]")
        if self.model.N < 2:
            raise ConfigError("N must be at least 2")
        if self.norm not in ("fro", "spectral"):
            raise ConfigError("norm must be 'fro' or 'spectral'")
        if self.solver.init not in ("pumped", "mixed", "random"):
            raise ConfigError("solver.init must be pumped, mixed or random")
        if self.spectrum.scheme not in ("frozen", "pair"):
            raise ConfigError("spectrum.scheme must be frozen or pair")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in ("w_plus", "w_minus", "gamma_minus", "gamma_plus", "gamma_dec", "w", "s1"):
            if getattr(self.model, name) < 0:
                raise ConfigError(f"model.{name} must be non-negative")
        return self

    def to_dict(self):
        return asdict(self)


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data = dict(data)
    blocks = dict(model=ModelConfig, sweep=SweepConfig, solver=SolverConfig,
                  spectrum=SpectrumConfig, oracle=OracleConfig)
    kw = {k: _build(cls, data.pop(k, None), k) for k, cls in blocks.items()}
    phys = data.pop("physical", None)
    kw["physical"] = None if phys is None else _build(PhysicalConfig, phys, "physical")
    top = {f.name for f in fields(RunConfig)} - set(blocks) - {"physical"}
    extra = set(data) - top
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    cfg = RunConfig(**kw, **data)
    _coerce(cfg)
    return cfg


def _coerce(cfg):
    m = cfg.model
    try:
        for name in ("N", "theta", "w_plus", "w_minus", "gamma_minus", "gamma_plus", "nu", "epsilon",
                     "s1", "F", "s0", "gamma_dec", "w", "zeeman_splitting"):
            setattr(m, name, float(getattr(m, name)))
        if m.theta_over_pi is not None:
            m.theta_over_pi = float(m.theta_over_pi)
        if m.s2 is not None:
            m.s2 = float(m.s2)
        cfg.seed = int(cfg.seed)
        cfg.sweep.unit = str(cfg.sweep.unit)
        cfg.sweep.points = int(cfg.sweep.points)
        cfg.sweep.points2 = int(cfg.sweep.points2)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric model parameter: {exc}") from exc


def load(path, variant=None, seed=None) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    cfg = from_dict(data or {})
    if variant is not None:
        cfg.variant = variant
    if seed is not None:
        cfg.seed = int(seed)
    return cfg.validate()


# -- model construction -------------------------------------------------------------------

def physical_rates(cfg: RunConfig):
    if cfg.physical is None:
        return None
    try:
        return rates.derive_rates(cfg.physical.to_params())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_model(cfg: RunConfig, **override) -> ModelSpec:
    """Model for one point; ``override`` replaces ModelConfig fields (theta in radians)."""
    m = replace(cfg.model, **override)
    theta = m.angle if "theta" not in override else override["theta"]
    if cfg.variant == "two-level":
        return two_level_model(m.N, m.w_plus, m.w_minus, m.gamma_minus, m.gamma_plus, m.nu)
    if cfg.variant == "f1":
        zeeman = m.zeeman if m.zeeman is not None else (0.0, 10.0, 30.0)
        return f1_model(m.N, theta, m.w_plus, m.w_minus, m.epsilon, m.s1, m.gamma_minus, zeeman, m.secular)
    # full model; rates from the physical block when present
    gamma_dec, w, N = m.gamma_dec, m.w, m.N
    r = physical_rates(cfg)
    if r is not None:
        gamma_dec, w, N = r["gamma_dec_units"], r["w_units"], cfg.physical.N
    pol = (PolarizabilitySet(m.s0, m.s1, m.s2) if m.s2 is not None
           else PolarizabilitySet.from_epsilon(m.epsilon, s1=m.s1, s0=m.s0))
    return full_model(m.F, N, theta, pol, 1.0, gamma_dec, w, m.w_minus, m.zeeman, m.zeeman_splitting)
