"""Experiment configuration: a strict, nested YAML document.

Unknown keys are rejected, defaults are expanded at parse time, and the
fully resolved document is embedded in every summary record.  Defaults use
normalized desk-scale units (source bandwidth 1 rad/s, dimensionless powers
and gains).
"""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError, ParameterError
from .fields import (
    AmpResponse,
    DetectionChain,
    FreqGrid,
    LayeredSample,
    Spectrum,
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _power_of_two(value: int) -> int:
    if value < 2 or value & (value - 1):
        raise ValueError(f"{value} is not a power of two")
    return value


class RangeSpec(StrictModel):
    start: float
    stop: float
    steps: int = Field(ge=2)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


class SpectrumConfig(StrictModel):
    kind: Literal["gaussian", "tabulated"] = "gaussian"
    source_power: float = 1.0
    rms_bandwidth: float = 1.0
    table: Optional[list[tuple[float, float]]] = None

    def build(self) -> Spectrum:
        if self.kind == "gaussian":
            return Spectrum.gaussian(self.source_power, self.rms_bandwidth)
        if not self.table:
            raise ConfigError("tabulated spectrum needs a table")
        omega, values = zip(*self.table)
        return Spectrum.tabulated(omega, values)


class LayerConfig(StrictModel):
    reflectivity: Union[float, tuple[float, float]] = 0.1
    delay: float = 0.0
    dispersion: list[float] = Field(default_factory=list)

    def build_reflectivity(self) -> complex:
        if isinstance(self.reflectivity, tuple):
            return complex(*self.reflectivity)
        return complex(self.reflectivity)


class SampleConfig(StrictModel):
    carrier_frequency: float = 50.0
    layers: list[LayerConfig] = Field(default_factory=lambda: [LayerConfig(delay=1.0)])

    @field_validator("layers")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("sample needs at least one layer")
        return v

    def build(self) -> LayeredSample:
        from .fields import Layer
        layers = tuple(Layer(l.build_reflectivity(), l.delay, tuple(l.dispersion))
                       for l in self.layers)
        return LayeredSample(layers=layers, carrier_frequency=self.carrier_frequency)


class AmplifierConfig(StrictModel):
    mode: Literal["conjugating", "phase_insensitive"] = "conjugating"
    peak_gain: Union[float, tuple[float, float]] = 10.0
    bandwidth: float = 1e6

    def build(self, mode: str | None = None) -> AmpResponse:
        gain = (complex(*self.peak_gain) if isinstance(self.peak_gain, tuple)
                else complex(self.peak_gain))
        return AmpResponse(mode=mode or self.mode, peak_gain=gain,
                           bandwidth=self.bandwidth)


class DetectionConfig(StrictModel):
    quantum_efficiency: float = 1.0
    current_gain: float = 1.0
    thermal_density: float = 0.0
    electron_charge: float = 1.0
    integration_time: float = 1.0

    def build(self) -> DetectionChain:
        return DetectionChain(
            quantum_efficiency=self.quantum_efficiency,
            current_gain=self.current_gain,
            thermal_current_density=self.thermal_density,
            electron_charge=self.electron_charge,
            integration_time=self.integration_time)


class GridConfig(StrictModel):
    n_points: int = 65536
    omega_max: float = 12.0
    coverage_cutoff: float = 1e-8

    @field_validator("n_points")
    @classmethod
    def _pow2(cls, v):
        return _power_of_two(v)

    def build(self) -> FreqGrid:
        return FreqGrid.from_omega_max(self.n_points, self.omega_max,
                                       self.coverage_cutoff)


class SweepConfig(StrictModel):
    reference_delay: Optional[float] = None
    delays: Optional[RangeSpec] = None
    mirror_delay: Optional[RangeSpec] = None
    modalities: Optional[list[Literal["pc_oct", "c_oct", "q_oct",
                                      "two_pass_c_oct"]]] = None
    dispersion_sets: list[dict[int, float]] = Field(default_factory=list)


class MonteCarloConfig(StrictModel):
    trials: int = Field(default=10000, ge=3)
    master_seed: int = 0
    n_time: int = 16384
    omega_max: Optional[float] = None
    ci_level: float = 0.95
    ci_max_relative_halfwidth: Optional[float] = None

    @field_validator("n_time")
    @classmethod
    def _pow2(cls, v):
        return _power_of_two(v)


class OutputConfig(StrictModel):
    directory: str = "out"


class ExperimentConfig(StrictModel):
    modality: Literal["pc_oct", "c_oct", "q_oct", "two_pass_c_oct"] = "pc_oct"
    spectrum: SpectrumConfig = Field(default_factory=SpectrumConfig)
    sample: SampleConfig = Field(default_factory=SampleConfig)
    amplifier: Optional[AmplifierConfig] = None
    detection: DetectionConfig = Field(default_factory=DetectionConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    montecarlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def resolved(self) -> dict:
        """Full document with defaults expanded, for provenance records."""
        return self.model_dump(mode="json")


def _format_validation_error(err: ValidationError) -> str:
    parts = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{loc}: {item['msg']}")
    return "; ".join(parts)


def parse_config(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration document must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation_error(err)) from err


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML in {path}: {err}") from err
    return parse_config(data)


def build_physics(cfg: ExperimentConfig):
    """Construct the physics objects, mapping invariant violations to
    configuration errors."""
    try:
        spectrum = cfg.spectrum.build()
        sample = cfg.sample.build()
        amplifier = cfg.amplifier.build() if cfg.amplifier else None
        detection = cfg.detection.build()
        grid = cfg.grid.build()
    except ParameterError as err:
        raise ConfigError(str(err)) from err
    return spectrum, sample, amplifier, detection, grid
