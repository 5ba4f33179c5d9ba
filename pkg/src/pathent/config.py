"""Structured experiment configuration.

Flat INI-style files (key = value under section headers), diff-friendly and
fully covered by defaults that reproduce the experiment's operating point:
decoy intensities {0.0872, 0.2314, 0.9840}, photodiode transmittance 0.617,
electronic-noise-equivalent transmittance 0.6, and the 8-phase dtheta grid
from -pi to pi in pi/4 steps.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .decoy import DecoyIntensitySet
from .states import NoiseModel

DEFAULT_INTENSITIES = (0.0872, 0.2314, 0.9840)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    intensities: tuple = DEFAULT_INTENSITIES
    eta_pd: float = 0.617
    v_e: float = 2.0 / 3.0
    pipeline: str = "equivalent"
    samples_per_point: int = 1_000_000
    vacuum_samples: int = 50_000_000
    t_min: float = 0.0
    t_max: float = 2.0
    t_step: float = 0.02
    t_fixed: float = 1.0
    n_phases: int = 8
    cutoff: int = 10
    bin_width: float = 0.2
    x_range: float = 5.0
    max_iterations: int = 500
    tolerance: float = 1e-9
    seed: int = 12345
    workers: int = 1
    scale: int = 1

    def __post_init__(self):
        if self.pipeline not in ("physical", "equivalent", "ideal-fock"):
            raise ConfigError(f"unknown pipeline {self.pipeline!r}")
        if self.samples_per_point < 1 or self.vacuum_samples < 1:
            raise ConfigError("sample counts must be at least 1")
        if self.t_step <= 0 or self.t_max < self.t_min:
            raise ConfigError("threshold grid is empty")
        if self.n_phases < 1:
            raise ConfigError("phase grid is empty")
        if self.scale < 1 or self.workers < 1:
            raise ConfigError("scale and workers must be at least 1")
        try:
            DecoyIntensitySet(self.intensities)
            NoiseModel(self.eta_pd, self.v_e)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def intensity_set(self) -> DecoyIntensitySet:
        return DecoyIntensitySet(self.intensities)

    @property
    def noise(self) -> NoiseModel:
        return NoiseModel(self.eta_pd, self.v_e)

    def t_grid(self) -> np.ndarray:
        n = int(round((self.t_max - self.t_min) / self.t_step))
        return self.t_min + self.t_step * np.arange(n + 1)

    def dtheta_grid(self) -> np.ndarray:
        return -np.pi + (2.0 * np.pi / self.n_phases) * np.arange(self.n_phases)

    def scaled(self, count: int) -> int:
        return max(1, count // self.scale)

    def content_hash(self) -> str:
        payload = json.dumps(
            {k: getattr(self, k) for k in self.__dataclass_fields__}, sort_keys=True
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


_SECTION_FIELDS = {
    "source": ("intensities",),
    "noise": ("eta_pd", "v_e"),
    "sampling": ("pipeline", "samples_per_point", "vacuum_samples", "seed"),
    "chsh": ("t_min", "t_max", "t_step", "t_fixed"),
    "phases": ("n_phases",),
    "tomography": ("cutoff", "bin_width", "x_range", "max_iterations", "tolerance"),
    "run": ("workers", "scale"),
}

_INT_FIELDS = {
    "samples_per_point",
    "vacuum_samples",
    "n_phases",
    "cutoff",
    "max_iterations",
    "seed",
    "workers",
    "scale",
}


def load_config(path: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    kwargs = {}
    for section in parser.sections():
        if section not in _SECTION_FIELDS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTION_FIELDS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                if key == "intensities":
                    kwargs[key] = tuple(float(v) for v in raw.split(","))
                elif key in _INT_FIELDS:
                    kwargs[key] = int(raw)
                elif key == "pipeline":
                    kwargs[key] = raw.strip()
                else:
                    kwargs[key] = float(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
    return ExperimentConfig(**kwargs)


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **overrides) if overrides else config
