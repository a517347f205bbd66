"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SimulationError):
    """A constructed type violates one of its invariants."""


class NonPositiveParameter(ParameterError):
    """A strictly positive physical quantity was zero or negative."""


class GridTooNarrow(SimulationError):
    """Frequency grid does not cover the spectrum to the configured cutoff."""


class NegativeDensity(SimulationError):
    """Tabulated spectral density contains negative values."""


class WrongAmpMode(SimulationError):
    """Amplifier mode does not match the requested interferometer chain."""


class GridMismatch(SimulationError):
    """Fields passed to the detector live on different grids."""


class DelayExceedsGuardBand(SimulationError):
    """Accumulated delay would wrap content past the zero-padded guard band."""


class NoCrossing(SimulationError):
    """Envelope sweep does not bracket both attenuation crossings."""


class InsufficientTrials(SimulationError):
    """Confidence interval is wider than the requested tolerance."""


class ConfigError(SimulationError):
    """Experiment configuration failed to parse or validate."""
