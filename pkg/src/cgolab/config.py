"""Experiment configuration read from INI files.

Example (every key is optional; the defaults are the bundled demo)::

    [geometry]
    torus_cell = 3.0, 3.2
    [cylinder]
    half_length = 24.0
    h1 = 0.25
    slab_half_length = 22.0
    [potential]
    amplitude = 0.5
    sigma1 = 6.0
    shift = 0.0
    bumps = 0.25 -0.15 0.5 1.0; -0.35 0.3 0.35 0.6
    [cgo]
    tau_schedule = 16, 32
    harmonics = 16
    remainder_tol = 0.02
    [probes]
    n_omega = 48
    omega_radius = 1.6
    [lambda]
    lam_max = 0.5
    lam_step = 0.1
    lam_threshold = 0.5
    [inversion]
    grid = 32
    ridge = 1e-6
    tol = 1e-8
    [run]
    seed = 0
    noise = 0.0
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass

import numpy as np


class ConfigError(ValueError):
    pass


def _floats(s: str) -> tuple:
    return tuple(float(v) for v in s.replace(",", " ").split())


def _bumps(s: str) -> tuple:
    out = []
    for part in s.split(";"):
        if part.strip():
            vals = _floats(part)
            if len(vals) != 4:
                raise ConfigError(f"bump needs 'u v radius weight', got {part!r}")
            out.append(vals)
    return tuple(out)


@dataclass
class ExperimentConfig:
    torus_cell: tuple = (3.0, 3.2)
    half_length: float = 24.0
    h1: float = 0.25
    slab_half_length: float = 22.0
    amplitude: float = 0.5
    sigma1: float = 6.0
    shift: float = 0.0
    bumps: tuple = ((0.25, -0.15, 0.5, 1.0), (-0.35, 0.3, 0.35, 0.6))
    tau_schedule: tuple = (16.0, 32.0)
    cluster_factor: float = 1.6
    cluster_offset: int = 12
    oversample: float = 1.5
    harmonics: int = 16
    remainder_tol: float = 0.02
    n_omega: int = 48
    omega_radius: float = 1.6
    lam_max: float = 0.5
    lam_step: float = 0.1
    lam_threshold: float = 0.5
    grid: int = 32
    ridge: float = 1e-6
    tol: float = 1e-8
    seed: int = 0
    noise: float = 0.0

    _sections = {
        "geometry": ("torus_cell",),
        "cylinder": ("half_length", "h1", "slab_half_length"),
        "potential": ("amplitude", "sigma1", "shift", "bumps"),
        "cgo": ("tau_schedule", "cluster_factor", "cluster_offset", "oversample", "harmonics", "remainder_tol"),
        "probes": ("n_omega", "omega_radius"),
        "lambda": ("lam_max", "lam_step", "lam_threshold"),
        "inversion": ("grid", "ridge", "tol"),
        "run": ("seed", "noise"),
    }

    @property
    def lambdas(self) -> np.ndarray:
        m = int(round(self.lam_max / self.lam_step))
        return self.lam_step * np.arange(-m, m + 1)

    @property
    def n_x1(self) -> int:
        return int(round(2 * self.half_length / self.h1)) + 1

    def validate(self) -> "ExperimentConfig":
        if self.lam_max > self.lam_threshold + 1e-12:
            raise ConfigError(f"lambda grid reaches {self.lam_max} beyond the smallness threshold {self.lam_threshold}")
        support = 2 * self.slab_half_length
        if 2 * np.pi / self.lam_step < support:
            raise ConfigError(f"lambda step {self.lam_step} violates the Nyquist bound for support length {support}")
        if not self.slab_half_length < self.half_length:
            raise ConfigError("the slab must lie inside the x1 interval")
        if self.omega_radius <= 1.0:
            raise ConfigError("fan centers must lie outside the unit disk")
        if min(self.torus_cell) < 2.2:
            raise ConfigError("torus cell too small to contain the unit disk with margin")
        if any(abs(t) < 4 for t in self.tau_schedule):
            raise ConfigError("tau schedule entries must satisfy |tau| >= 4")
        if self.harmonics < 0 or self.n_omega < 1 or self.grid < 8:
            raise ConfigError("invalid probe or grid sizes")
        return self

    # INI round trip ----------------------------------------------------------
    @classmethod
    def from_ini(cls, path) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise ConfigError(f"cannot read config {path}")
        return cls.from_parser(cp)

    @classmethod
    def from_string(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        return cls.from_parser(cp)

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "ExperimentConfig":
        kw = {}
        defaults = cls()
        known = {k for keys in cls._sections.values() for k in keys}
        for sec in cp.sections():
            if sec not in cls._sections:
                raise ConfigError(f"unknown section [{sec}]")
            for key, raw in cp.items(sec):
                if key not in known:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                cur = getattr(defaults, key)
                if key == "bumps":
                    kw[key] = _bumps(raw)
                elif isinstance(cur, tuple):
                    kw[key] = _floats(raw)
                elif isinstance(cur, int) and not isinstance(cur, bool):
                    kw[key] = int(raw)
                else:
                    kw[key] = float(raw)
        return cls(**kw).validate()

    def to_ini(self, path) -> None:
        cp = configparser.ConfigParser()
        for sec, keys in self._sections.items():
            cp[sec] = {}
            for k in keys:
                v = getattr(self, k)
                if k == "bumps":
                    cp[sec][k] = "; ".join(" ".join(repr(float(x)) for x in b) for b in v)
                elif isinstance(v, tuple):
                    cp[sec][k] = ", ".join(repr(float(x)) for x in v)
                else:
                    cp[sec][k] = repr(v)
        with open(path, "w") as fh:
            cp.write(fh)

    def as_dict(self) -> dict:
        return asdict(self)
