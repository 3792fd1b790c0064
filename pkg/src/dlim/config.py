"""Run configuration files.

A config is a YAML mapping with up to four sections::

    machine:      # frequencies in cycles per time unit (divided by 2 pi)
      omega0: 1.0
      omega_e: 2.003
      beta_r: 0.42
      beta_i: -0.16
    integrator:
      h: 0.05
      t_end: 1000
      frame: rotating     # or lab
    sweep:
      kind: beta-plane
      graph: mobius8
      trials_per_point: 200
      beta_r: {min: 0.1, max: 0.5, step: 0.02}
      beta_i: [-0.16, 0.0, 0.16]
    output:
      dir: results

Every field is optional. A sweep axis is either a ``{min, max, step}`` mapping
(inclusive range) or an explicit list of values. Unknown sections or keys are
rejected with the offending dotted key in the message.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .dynamics import TWO_PI, MachineParams
from .integrator import IntegratorConfig
from .sweep import AXIS_ORDER, KINDS, SweepSpec


class ConfigError(ValueError):
    pass


@dataclass
class MachineSection:
    # defaults in cycles per time unit
    omega0: float = 1.0
    omega_e: float = 2 * 1.0015
    tau: float = 10.0
    gamma0: float = 0.05
    K: float = 0.06
    kappa: float = 0.003
    Ke: float = 0.01
    p0: float = 1.0
    beta_r: float = 0.3
    beta_i: float = 0.0

    def build(self, n: int) -> MachineParams:
        return MachineParams(
            n=n, omega0=TWO_PI * self.omega0, omega_e=TWO_PI * self.omega_e, tau=self.tau,
            gamma0=TWO_PI * self.gamma0, K=TWO_PI * self.K, kappa=TWO_PI * self.kappa,
            Ke=TWO_PI * self.Ke, p0=self.p0, beta_r=self.beta_r, beta_i=self.beta_i,
        )


@dataclass
class IntegratorSection:
    h: float | None = None  # None: 0.05 rotating, 0.005 lab
    t_end: float = 1000.0
    record_stride: int | None = None
    frame: str = "rotating"

    def build(self) -> IntegratorConfig:
        if self.frame not in ("rotating", "lab"):
            raise ConfigError(f"integrator.frame must be 'rotating' or 'lab', got {self.frame!r}")
        kw = {"t_end": self.t_end}
        if self.h is not None:
            kw["h"] = self.h
        if self.record_stride is not None:
            kw["record_stride"] = self.record_stride
        return IntegratorConfig.lab(**kw) if self.frame == "lab" else IntegratorConfig(**kw)


@dataclass
class SweepSection:
    kind: str = "beta-plane"
    graph: str = "mobius8"
    trials_per_point: int = 200
    master_seed: int = 0
    dispersion_sigma: float = 0.0
    dispersion_mode: str = "per-trial"
    amplitude_scale: float = 0.01
    readout_window: float = 50.0
    relative_window: float = 300.0
    beta_r: object = field(default_factory=lambda: {"min": 0.1, "max": 0.5, "step": 0.02})
    beta_i: object = field(default_factory=lambda: {"min": -1.0, "max": 1.0, "step": 0.02})
    kappa: object = field(default_factory=lambda: [0.003, 0.006, 0.009, 0.012, 0.015, 0.018])
    Ke: object = field(default_factory=lambda: {"min": 0.002, "max": 0.02, "step": 0.002})
    detuning: object = field(default_factory=lambda: {"min": -0.005, "max": 0.005, "step": 0.001})


@dataclass
class OutputSection:
    dir: str = "results"


SECTIONS = {
    "machine": MachineSection,
    "integrator": IntegratorSection,
    "sweep": SweepSection,
    "output": OutputSection,
}


def _axis(value, name="axis"):
    """``{min, max, step}`` becomes a range tuple; a number or list is taken literally."""
    if isinstance(value, dict):
        if set(value) != {"min", "max", "step"}:
            raise ConfigError(f"sweep.{name} range needs exactly min, max and step, got {sorted(value)}")
        lo, hi, step = (float(value[k]) for k in ("min", "max", "step"))
        if not step > 0 or hi < lo:
            raise ConfigError(f"sweep.{name} range needs step > 0 and max >= min")
        return (lo, hi, step)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    try:
        values = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"sweep.{name} must be a number, a list or a {{min, max, step}} mapping") from None
    if not values:
        raise ConfigError(f"sweep.{name} is empty")
    return values


@dataclass
class RunConfig:
    machine: MachineSection = field(default_factory=MachineSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        if doc is None:
            return cls()
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping of sections")
        cfg = cls()
        for name, body in doc.items():
            if name not in SECTIONS:
                raise ConfigError(f"unknown config key {name!r}; sections are {', '.join(SECTIONS)}")
            if body is None:
                continue
            if not isinstance(body, dict):
                raise ConfigError(f"config section {name!r} must be a mapping")
            section = getattr(cfg, name)
            allowed = {f.name: f for f in fields(section)}
            for key, value in body.items():
                if key not in allowed:
                    raise ConfigError(f"unknown config key '{name}.{key}'")
                setattr(section, key, value)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        text = Path(path).read_text()
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(doc)

    def validate(self) -> None:
        m = self.machine
        for name in ("omega0", "omega_e", "tau", "gamma0", "K", "kappa", "Ke", "p0", "beta_r", "beta_i"):
            v = getattr(m, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"machine.{name} must be a finite number, got {v!r}")
        s = self.sweep
        if s.kind not in KINDS:
            raise ConfigError(f"sweep.kind must be one of {', '.join(KINDS)}, got {s.kind!r}")
        if not isinstance(s.trials_per_point, int) or s.trials_per_point < 1:
            raise ConfigError(f"sweep.trials_per_point must be an integer >= 1, got {s.trials_per_point!r}")
        if s.dispersion_mode not in ("per-trial", "fixed"):
            raise ConfigError(f"sweep.dispersion_mode must be 'per-trial' or 'fixed', got {s.dispersion_mode!r}")
        for name in ("readout_window", "relative_window"):
            v = getattr(s, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"sweep.{name} must be a positive number, got {v!r}")
        for name in ("beta_r", "beta_i", "kappa", "Ke", "detuning"):
            _axis(getattr(s, name), name)
        try:
            self.machine.build(1)
        except ValueError as exc:
            raise ConfigError(f"machine: {exc}") from exc
        try:
            self.integrator.build()
        except ValueError as exc:
            raise ConfigError(f"integrator: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def params(self, n: int) -> MachineParams:
        return self.machine.build(n)

    def integrator_config(self) -> IntegratorConfig:
        return self.integrator.build()

    def sweep_spec(self, problem, kind: str | None = None) -> SweepSpec:
        s = self.sweep
        kind = kind or s.kind
        n = 1 if kind == "arnold" else problem.n
        params = self.params(n)
        axes = {name: _axis(getattr(s, name), name) for name in AXIS_ORDER[kind]}
        return SweepSpec(
            kind, params, None if kind == "arnold" else problem, axes=axes,
            trials_per_point=s.trials_per_point if kind != "arnold" else 1,
            master_seed=s.master_seed, dispersion_sigma=s.dispersion_sigma,
            dispersion_mode=s.dispersion_mode, integrator=self.integrator_config(),
            amplitude_scale=s.amplitude_scale, readout_window=s.readout_window,
            relative_window=s.relative_window,
        )

    def with_overrides(self, section: str, **values) -> "RunConfig":
        values = {k: v for k, v in values.items() if v is not None}
        return replace(self, **{section: replace(getattr(self, section), **values)})
