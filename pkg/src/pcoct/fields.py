"""Physical parameter types and the frequency/time grids they are sampled on.

Conventions used throughout the package:

* Fields are baseband complex envelopes in photon units, i.e. ``|E(t)|**2``
  is a photon flux in photons/s.
* ``Spectrum`` is the two-sided density of detuning from the optical
  carrier; the inverse transform ``int dW/2pi S(W) exp(-i W tau)`` is the
  envelope correlation function, so ``int S dW/2pi`` equals the beam power
  in photons/s.
* Every type here is immutable after construction and safe to share
  between concurrent evaluators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import (
    GridTooNarrow,
    NegativeDensity,
    NonPositiveParameter,
    ParameterError,
)

TWO_PI = 2.0 * math.pi

# |r| at or below this bound is what the closed-form envelope analytics mean
# by a "weakly reflecting" mirror.  Informational only, never enforced.
WEAK_REFLECTION_BOUND = 0.1


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    """Even, nonnegative spectral density shared by signal and reference.

    The Gaussian form evaluates to
    ``source_power * sqrt(2*pi/rms_bandwidth**2) * exp(-W**2 / (2*rms_bandwidth**2))``
    so that ``int S dW/2pi == source_power``.

    Tabulated spectra are linear interpolations of an explicitly symmetric
    (W, S) table and evaluate to zero outside the tabulated support.
    """

    kind: str
    source_power: float = 0.0
    rms_bandwidth: float = 0.0
    table_omega: np.ndarray | None = None
    table_values: np.ndarray | None = None

    @classmethod
    def gaussian(cls, source_power: float, rms_bandwidth: float) -> "Spectrum":
        if source_power <= 0.0:
            raise NonPositiveParameter(f"source_power must be > 0, got {source_power}")
        if rms_bandwidth <= 0.0:
            raise NonPositiveParameter(f"rms_bandwidth must be > 0, got {rms_bandwidth}")
        return cls(kind="gaussian", source_power=float(source_power),
                   rms_bandwidth=float(rms_bandwidth))

    @classmethod
    def tabulated(cls, omega, values) -> "Spectrum":
        omega = np.asarray(omega, dtype=float)
        values = np.asarray(values, dtype=float)
        if omega.ndim != 1 or omega.shape != values.shape or omega.size < 2:
            raise ParameterError("tabulated spectrum needs matching 1-d (omega, value) arrays")
        order = np.argsort(omega)
        omega, values = omega[order], values[order]
        if np.any(np.diff(omega) <= 0):
            raise ParameterError("tabulated omegas must be distinct")
        if np.any(values < 0):
            raise NegativeDensity("tabulated spectral density has negative entries")
        # S(W) = S(-W): the table must mirror itself to 1e-12 relative.
        scale = max(values.max(), 1.0)
        if not np.allclose(omega, -omega[::-1], rtol=0.0, atol=1e-12 * max(abs(omega[-1]), 1.0)):
            raise ParameterError("tabulated omegas are not symmetric about zero")
        if not np.allclose(values, values[::-1], rtol=1e-12, atol=1e-12 * scale):
            raise ParameterError("tabulated density is not even to 1e-12 relative")
        return cls(kind="tabulated", table_omega=_readonly(omega),
                   table_values=_readonly(values))

    def density(self, omega) -> np.ndarray:
        """Evaluate S at the given detunings (scalar or array)."""
        omega = np.asarray(omega, dtype=float)
        if self.kind == "gaussian":
            pref = self.source_power * math.sqrt(TWO_PI / self.rms_bandwidth**2)
            return pref * np.exp(-(omega**2) / (2.0 * self.rms_bandwidth**2))
        return np.interp(omega, self.table_omega, self.table_values, left=0.0, right=0.0)

    @property
    def peak_density(self) -> float:
        return float(self.density(0.0))


# ---------------------------------------------------------------------------
# Sample
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Layer:
    """One discrete reflector: complex reflectivity, round-trip delay and a
    per-layer phase polynomial ``beta(W) = sum_k b_k W**k / k!`` whose
    coefficients are listed from order 1 upward."""

    reflectivity: complex
    delay: float
    dispersion: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "reflectivity", complex(self.reflectivity))
        object.__setattr__(self, "dispersion", tuple(float(b) for b in self.dispersion))
        if abs(self.reflectivity) > 1.0 + 1e-12:
            raise ParameterError(f"|reflectivity| must be <= 1, got {abs(self.reflectivity)}")

    def phase(self, omega) -> np.ndarray:
        """beta(W) evaluated on the given detunings."""
        omega = np.asarray(omega, dtype=float)
        out = np.zeros_like(omega)
        for k, b in enumerate(self.dispersion, start=1):
            if b != 0.0:
                out = out + b * omega**k / math.factorial(k)
        return out


@dataclass(frozen=True)
class LayeredSample:
    """Discrete-reflector sample response
    ``H(W) = sum_j r_j exp(i[(w0 + W) T_j + beta_j(W)])``."""

    layers: tuple[Layer, ...]
    carrier_frequency: float

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.carrier_frequency < 0.0:
            raise ParameterError("carrier_frequency must be >= 0")

    @classmethod
    def single_mirror(cls, reflectivity, delay, carrier_frequency,
                      dispersion=()) -> "LayeredSample":
        return cls(layers=(Layer(reflectivity, delay, tuple(dispersion)),),
                   carrier_frequency=float(carrier_frequency))

    def with_mirror_delay(self, delay: float) -> "LayeredSample":
        """Copy with the (single) mirror moved to a new round-trip delay."""
        if len(self.layers) != 1:
            raise ParameterError("with_mirror_delay requires a single-mirror sample")
        return replace(self, layers=(replace(self.layers[0], delay=float(delay)),))

    @property
    def weakly_reflecting(self) -> bool:
        return all(abs(l.reflectivity) <= WEAK_REFLECTION_BOUND for l in self.layers)

    @property
    def max_delay(self) -> float:
        return max((abs(l.delay) for l in self.layers), default=0.0)

    def response(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        out = np.zeros(omega.shape, dtype=complex)
        for layer in self.layers:
            phase = (self.carrier_frequency + omega) * layer.delay + layer.phase(omega)
            out = out + layer.reflectivity * np.exp(1j * phase)
        return out


# ---------------------------------------------------------------------------
# Amplifier / conjugator
# ---------------------------------------------------------------------------

CONJUGATING = "conjugating"
PHASE_INSENSITIVE = "phase_insensitive"

# A gain bandwidth at least this many source bandwidths wide is treated as
# effectively flat by the closed-form envelope analytics.
DEFAULT_BROADBAND_FACTOR = 20.0


@dataclass(frozen=True)
class AmpResponse:
    """Gaussian gain profile ``gain * exp(-W**2 / (4*bandwidth**2))`` of either a
    conjugating or a phase-insensitive amplifier."""

    mode: str
    peak_gain: complex
    bandwidth: float

    def __post_init__(self):
        if self.mode not in (CONJUGATING, PHASE_INSENSITIVE):
            raise ParameterError(f"unknown amplifier mode {self.mode!r}")
        object.__setattr__(self, "peak_gain", complex(self.peak_gain))
        if self.bandwidth <= 0.0:
            raise NonPositiveParameter("amplifier bandwidth must be > 0")

    def response(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return self.peak_gain * np.exp(-(omega**2) / (4.0 * self.bandwidth**2))

    def is_broadband(self, source_bandwidth: float,
                     factor: float = DEFAULT_BROADBAND_FACTOR) -> bool:
        return self.bandwidth >= factor * source_bandwidth


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionChain:
    """Photodetector pair and postamplifier: quantum efficiency, current gain,
    white thermal current density, electron charge and integration time."""

    quantum_efficiency: float
    current_gain: float = 1.0
    thermal_current_density: float = 0.0
    electron_charge: float = 1.0
    integration_time: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.quantum_efficiency <= 1.0:
            raise ParameterError("quantum_efficiency must lie in (0, 1]")
        if self.integration_time <= 0.0:
            raise NonPositiveParameter("integration_time must be > 0")
        if self.thermal_current_density < 0.0:
            raise ParameterError("thermal_current_density must be >= 0")
        if self.electron_charge <= 0.0:
            raise NonPositiveParameter("electron_charge must be > 0")
        if self.current_gain <= 0.0:
            raise NonPositiveParameter("current_gain must be > 0")

    @property
    def thermal_rate(self) -> float:
        """Thermal noise expressed as an equivalent rate,
        ``thermal_current_density / (q**2 * eta)``."""
        return self.thermal_current_density / (
            self.electron_charge**2 * self.quantum_efficiency)


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreqGrid:
    """Uniform detuning grid of ``n_points`` (a power of two) covering
    ``[-omega_max, omega_max)`` with ``omega_max = n_points * spacing / 2``.

    The companion time grid has step ``2*pi / (n_points * spacing)``, so the
    two are an exact discrete transform pair.
    """

    n_points: int
    spacing: float
    coverage_cutoff: float = 1e-8

    def __post_init__(self):
        n = self.n_points
        if n < 2 or (n & (n - 1)) != 0:
            raise ParameterError(f"n_points must be a power of two >= 2, got {n}")
        if self.spacing <= 0.0:
            raise NonPositiveParameter("grid spacing must be > 0")
        if not 0.0 < self.coverage_cutoff < 1.0:
            raise ParameterError("coverage_cutoff must lie in (0, 1)")

    @classmethod
    def from_omega_max(cls, n_points: int, omega_max: float,
                       coverage_cutoff: float = 1e-8) -> "FreqGrid":
        if omega_max <= 0.0:
            raise NonPositiveParameter("omega_max must be > 0")
        return cls(n_points=n_points, spacing=2.0 * omega_max / n_points,
                   coverage_cutoff=coverage_cutoff)

    @property
    def omega_max(self) -> float:
        return 0.5 * self.n_points * self.spacing

    @cached_property
    def omega(self) -> np.ndarray:
        """Ascending detunings, -omega_max inclusive to +omega_max exclusive."""
        return _readonly((np.arange(self.n_points) - self.n_points // 2) * self.spacing)

    @cached_property
    def omega_fft(self) -> np.ndarray:
        """Same detunings in FFT bin order."""
        return _readonly(np.fft.ifftshift(self.omega))

    @property
    def time_step(self) -> float:
        return TWO_PI / (self.n_points * self.spacing)

    @property
    def duration(self) -> float:
        return self.n_points * self.time_step

    def refined(self, factor: int = 2) -> "FreqGrid":
        """Same omega_max, ``factor`` times more points (halved spacing)."""
        return FreqGrid(self.n_points * factor, self.spacing / factor,
                        self.coverage_cutoff)

    def check_coverage(self, spectrum: Spectrum) -> None:
        edge = float(spectrum.density(self.omega_max))
        peak = spectrum.peak_density
        if peak <= 0.0:
            peak = float(np.max(spectrum.density(self.omega))) or 1.0
        if edge / peak >= self.coverage_cutoff:
            raise GridTooNarrow(
                f"S(omega_max)/S(0) = {edge / peak:.3e} exceeds the coverage "
                f"cutoff {self.coverage_cutoff:.1e}; widen the grid")

    def time_grid(self, guard_time: float = 0.0) -> "TimeGrid":
        return TimeGrid(freq=self, guard_time=guard_time)


@dataclass(frozen=True)
class TimeGrid:
    """Time-domain view of a FreqGrid plus a trailing zero-padded guard band.

    The guard band absorbs circular-convolution wrap-around: synthesized
    sources are zeroed over the final ``guard_time`` seconds, and chain
    operations refuse to accumulate more delay than the guard can hold.
    """

    freq: FreqGrid
    guard_time: float = 0.0

    def __post_init__(self):
        if self.guard_time < 0.0:
            raise ParameterError("guard_time must be >= 0")
        if 2.0 * self.guard_time >= self.freq.duration:
            raise ParameterError(
                f"guard_time {self.guard_time:g} leaves no active window in a "
                f"{self.freq.duration:g} s record; increase n_points")

    @property
    def n_points(self) -> int:
        return self.freq.n_points

    @property
    def step(self) -> float:
        return self.freq.time_step

    @property
    def duration(self) -> float:
        return self.freq.duration

    @property
    def guard_samples(self) -> int:
        return int(math.ceil(self.guard_time / self.step - 1e-12))

    @property
    def n_active(self) -> int:
        return self.n_points - self.guard_samples

    @cached_property
    def times(self) -> np.ndarray:
        return _readonly(np.arange(self.n_points) * self.step)

    def compatible_with(self, other: "TimeGrid") -> bool:
        return (self.n_points == other.n_points
                and self.step == other.step
                and self.guard_time == other.guard_time)


# ---------------------------------------------------------------------------
# Grid evaluation of the parameter types
# ---------------------------------------------------------------------------

def eval_spectrum(spectrum: Spectrum, grid: FreqGrid) -> np.ndarray:
    """Sample S on the grid after the coverage check.

    Raises GridTooNarrow when the grid edge carries more than the configured
    fraction of the peak, and NegativeDensity for bad tabulated input.
    """
    grid.check_coverage(spectrum)
    values = spectrum.density(grid.omega)
    if np.any(values < 0.0):
        raise NegativeDensity("spectral density evaluated negative on the grid")
    return values


def eval_sample_response(sample: LayeredSample, grid: FreqGrid) -> np.ndarray:
    """Sample H on the grid (exact evaluation of the layer sum)."""
    return sample.response(grid.omega)


def eval_amp_response(amp: AmpResponse, grid: FreqGrid) -> np.ndarray:
    """Sample the Gaussian gain profile on the grid."""
    return amp.response(grid.omega)


def spectral_autocorrelation(spectrum: Spectrum, grid: FreqGrid, taus) -> np.ndarray:
    """Envelope correlation function ``sum_k S(W_k) exp(-i W_k tau) dW/2pi``.

    This is the plain Riemann sum over the grid, which is exactly the
    second moment realized by the spectral Monte Carlo synthesis; at tau=0
    it recovers the beam power to within the grid coverage cutoff.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    s = eval_spectrum(spectrum, grid) * (grid.spacing / TWO_PI)
    phases = np.exp(-1j * np.outer(taus, grid.omega))
    return phases @ s
