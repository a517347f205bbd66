"""Monte Carlo synthesis, propagation and detection of the classical chains.

The source pair is drawn in the frequency domain: one circular Gaussian
per bin with variance ``S(W) dW/2pi`` becomes the signal transform, and the
reference transform is the conjugated, frequency-flipped copy of the same
draw.  That construction realizes, exactly in distribution, the largest
phase-sensitive cross-correlation a classical pair can have; the
phase-insensitive variant (reference identical to the signal) feeds the
conventional chain.  All second moments are exact by construction, so the
only approximations left in the engine are the grid truncation and the
bright-field Gaussian model of shot noise.

Circular-convolution wrap-around is controlled by a trailing zero guard
band: synthesized records are zeroed over the final ``guard_time`` seconds,
chain operations track the delay they consume and refuse to exceed the
guard, and detection windows must stay clear of both the head transient
and the zeroed tail.

Per-trial randomness comes from counter-based seed splitting
(``SeedSequence(master, spawn_key=(trial, channel))``), which makes every
aggregate bit-identical no matter what order trials run in.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import (
    DelayExceedsGuardBand,
    GridMismatch,
    InsufficientTrials,
    ParameterError,
    WrongAmpMode,
)
from .fields import (
    TWO_PI,
    AmpResponse,
    CONJUGATING,
    DetectionChain,
    FreqGrid,
    LayeredSample,
    Spectrum,
    TimeGrid,
    eval_spectrum,
)
from .signatures import C_OCT, PC_OCT, envelope_center, signature_trace
from . import snr as snr_module

PHASE_SENSITIVE = "phase_sensitive"
PHASE_INSENSITIVE_PAIR = "phase_insensitive"

# Channel indices of the per-trial seed split.
CH_SOURCE, CH_AMP, CH_DETECT = 0, 1, 2

# Filter impulse tails are budgeted at this many correlation times when the
# guard band is sized automatically.
GUARD_TAIL_FACTOR = 6.0

# The quantum-maximum pair would need a cross-spectrum sqrt(S(S+1)) > S,
# which no classical sampler can produce; name it so the error can say so.
QUANTUM_MAXIMUM = "quantum_maximum"

_SUPPORTED_CHAINS = (PC_OCT, C_OCT)


def trial_rng(master_seed: int, trial: int, channel: int) -> np.random.Generator:
    """Independent stream for one (trial, channel) pair of an experiment."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial, channel))
    return np.random.default_rng(ss)


def trial_seed_fingerprint(master_seed: int, trial: int) -> int:
    """Stable integer identifying a trial's seed material (for records)."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(trial,)).generate_state(1)[0])


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ParameterError("an rng or integer seed is required for noise draws")
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# field containers
# ---------------------------------------------------------------------------

@dataclass
class Beam:
    """One propagating complex envelope plus the delay it has accumulated
    (checked against the grid's guard band)."""

    samples: np.ndarray
    grid: TimeGrid
    delay_used: float = 0.0

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class FieldRealization:
    """One synthesized signal/reference pair in photon units."""

    signal: np.ndarray
    reference: np.ndarray
    grid: TimeGrid
    correlation: str
    seed: object = None

    def signal_beam(self) -> Beam:
        return Beam(self.signal, self.grid, 0.0)

    def reference_beam(self) -> Beam:
        return Beam(self.reference, self.grid, 0.0)


@dataclass(frozen=True)
class DetectionRecord:
    """Time-averaged difference current of one trial, with the noise
    contributions accounted separately (all after current amplification)."""

    i_avg: float
    signal_avg: float
    shot_avg: float
    thermal_avg: float
    window_start: float
    window_duration: float
    n_samples: int
    seed: object = None


# ---------------------------------------------------------------------------
# source synthesis
# ---------------------------------------------------------------------------

def synthesize_source(spectrum: Spectrum, grid: TimeGrid, rng,
                      correlation: str = PHASE_SENSITIVE) -> FieldRealization:
    """Draw one stationary Gaussian signal/reference pair on the grid.

    ``phase_sensitive`` pairs share a single spectral draw, with the
    reference transform conjugated and frequency-flipped (equivalently, the
    reference record is the complex conjugate of the signal record): both
    autocorrelations and the phase-sensitive cross-correlation equal the
    inverse transform of S, and the phase-insensitive cross-correlation is
    identically zero.  ``phase_insensitive`` pairs share the record itself.
    The trailing guard band is zeroed on both records.
    """
    if correlation == QUANTUM_MAXIMUM:
        raise ParameterError(
            "the quantum-maximum pair (cross-spectrum sqrt(S(S+1))) exceeds the "
            "classical bound and cannot be produced by this sampler")
    if correlation not in (PHASE_SENSITIVE, PHASE_INSENSITIVE_PAIR):
        raise ParameterError(f"unknown correlation kind {correlation!r}")
    rng = _as_rng(rng)
    freq = grid.freq
    s = eval_spectrum(spectrum, freq)            # also runs the coverage check
    s_fft = np.fft.ifftshift(s)
    sigma = np.sqrt(s_fft * freq.spacing / TWO_PI)
    draw = rng.standard_normal(2 * freq.n_points)
    amplitudes = sigma * (draw[0::2] + 1j * draw[1::2]) / math.sqrt(2.0)
    # E(t_m) = sum_k a_k exp(-i W_k t_m) with W_k in FFT bin order.
    signal = np.fft.fft(amplitudes)
    if grid.guard_samples:
        signal[grid.n_active:] = 0.0
    reference = np.conj(signal) if correlation == PHASE_SENSITIVE else signal.copy()
    signal.setflags(write=False)
    reference.setflags(write=False)
    return FieldRealization(signal=signal, reference=reference, grid=grid,
                            correlation=correlation, seed=rng)


# ---------------------------------------------------------------------------
# chain operations
# ---------------------------------------------------------------------------

def _filtered(samples: np.ndarray, response_fft: np.ndarray) -> np.ndarray:
    return np.fft.fft(np.fft.ifft(samples) * response_fft)


def _check_guard(new_delay: float, grid: TimeGrid, what: str) -> None:
    if new_delay > grid.guard_time + 1e-12 * max(grid.step, 1.0):
        raise DelayExceedsGuardBand(
            f"{what}: accumulated delay {new_delay:g} s exceeds the "
            f"{grid.guard_time:g} s guard band")


def apply_sample(beam: Beam, sample: LayeredSample) -> Beam:
    """One pass through the sample: multiply by H in the transform domain.

    The layer delays consume guard-band budget; exceeding it would wrap
    reflected content back into the record head.
    """
    new_delay = beam.delay_used + sample.max_delay
    _check_guard(new_delay, beam.grid, "sample pass")
    out = _filtered(beam.samples, sample.response(beam.grid.freq.omega_fft))
    return Beam(out, beam.grid, new_delay)


def conjugate_amplify(beam: Beam, conjugator: AmpResponse, rng=None,
                      include_noise: bool = True) -> Beam:
    """Conjugate the envelope, inject the amplifier's white Gaussian noise
    (delta-correlated, one photon per unit time-bandwidth: per-sample
    variance 1/dt), then filter by the gain profile."""
    if conjugator.mode != CONJUGATING:
        raise WrongAmpMode("conjugate_amplify needs a conjugating amplifier")
    x = np.conj(beam.samples)
    if include_noise:
        rng = _as_rng(rng)
        n = beam.grid.n_points
        scale = math.sqrt(1.0 / (2.0 * beam.grid.step))
        x = x + scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    out = _filtered(x, conjugator.response(beam.grid.freq.omega_fft))
    return Beam(out, beam.grid, beam.delay_used)


def delayed_reference(beam: Beam, delay: float, carrier_frequency: float) -> Beam:
    """Reference arm: delay the envelope and apply the carrier phase picked
    up by the delay line."""
    new_delay = beam.delay_used + abs(delay)
    _check_guard(new_delay, beam.grid, "reference delay")
    spec = np.fft.ifft(beam.samples) * np.exp(
        1j * beam.grid.freq.omega_fft * delay)
    out = np.fft.fft(spec) * np.exp(1j * carrier_frequency * delay)
    return Beam(out, beam.grid, new_delay)


def michelson_detect(e1: Beam, e2: Beam, detection: DetectionChain, rng=None,
                     window: tuple[float, float] | None = None,
                     shot_noise: bool = True,
                     thermal_noise: bool = True) -> DetectionRecord:
    """Difference detection of two fields, time-averaged over the window.

    The difference current is
    ``G_A * (2 q eta Re(E1 conj(E2)) + shot + thermal)`` where the shot term
    is a zero-mean Gaussian of two-sided density ``q^2 eta (|E1|^2+|E2|^2)``
    (bright-field semiclassical model) and the thermal term has the
    detector's white density; the postamplifier gain multiplies signal and
    noise alike.  With both noise draws disabled the record reproduces the
    deterministic formula exactly.
    """
    if not e1.grid.compatible_with(e2.grid):
        raise GridMismatch("detector inputs live on different grids")
    grid = e1.grid
    if window is None:
        window = (grid.guard_time, detection.integration_time)
    start, duration = float(window[0]), float(window[1])
    dt = grid.step
    m0 = int(round(start / dt))
    n_avg = int(round(duration / dt))
    if n_avg < 1:
        raise ParameterError("integration window is shorter than one sample")
    settle = max(e1.delay_used, e2.delay_used)
    if m0 * dt + 1e-12 < settle:
        raise DelayExceedsGuardBand(
            f"window start {m0 * dt:g} s lies inside the {settle:g} s transient")
    if m0 + n_avg > grid.n_active:
        raise DelayExceedsGuardBand("integration window extends into the guard band")

    q = detection.electron_charge
    eta = detection.quantum_efficiency
    gain = detection.current_gain
    seg1 = e1.samples[m0:m0 + n_avg]
    seg2 = e2.samples[m0:m0 + n_avg]
    signal_avg = gain * float(np.mean(2.0 * q * eta * np.real(seg1 * np.conj(seg2))))

    shot_avg = 0.0
    thermal_avg = 0.0
    if shot_noise or thermal_noise:
        rng = _as_rng(rng)
    if shot_noise:
        density = q * q * eta * (np.abs(seg1) ** 2 + np.abs(seg2) ** 2)
        shot = rng.standard_normal(n_avg) * np.sqrt(density / dt)
        shot_avg = gain * float(np.mean(shot))
    if thermal_noise and detection.thermal_current_density > 0.0:
        sigma = math.sqrt(detection.thermal_current_density / dt)
        thermal_avg = gain * float(np.mean(rng.standard_normal(n_avg) * sigma))

    return DetectionRecord(
        i_avg=signal_avg + shot_avg + thermal_avg, signal_avg=signal_avg,
        shot_avg=shot_avg, thermal_avg=thermal_avg, window_start=m0 * dt,
        window_duration=n_avg * dt, n_samples=n_avg, seed=rng)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def snr_with_jackknife(samples: np.ndarray, ci_level: float = 0.95):
    """mean^2/var of the trial averages with a delete-one jackknife CI.

    Returns (snr, se, (lo, hi)).  Zero variance (noise-free deterministic
    trials) reports an infinite SNR sentinel with a degenerate interval.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 3:
        raise ParameterError("jackknife needs at least 3 trials")
    mean = x.mean()
    var = x.var(ddof=1)
    if var == 0.0:
        return math.inf, 0.0, (math.inf, math.inf)
    snr = mean * mean / var
    centered = x - mean
    loo_mean = (x.sum() - x) / (n - 1)
    loo_ss = centered @ centered - centered**2 * (n / (n - 1))
    loo_var = loo_ss / (n - 2)
    with np.errstate(divide="ignore"):
        theta = np.where(loo_var > 0.0, loo_mean**2 / loo_var, np.inf)
    if not np.all(np.isfinite(theta)):
        return snr, math.inf, (-math.inf, math.inf)
    tbar = theta.mean()
    se = math.sqrt((n - 1) / n * float(((theta - tbar) ** 2).sum()))
    z = NormalDist().inv_cdf(0.5 + ci_level / 2.0)
    return snr, se, (snr - z * se, snr + z * se)


# ---------------------------------------------------------------------------
# experiment drivers
# ---------------------------------------------------------------------------

def _fringe_aligned_delay(modality: str, mirror_delay: float,
                          carrier_frequency: float,
                          amplifier: AmpResponse | None) -> float:
    """Reference delay maximizing the interference signature: the envelope
    peak, snapped to the nearest carrier fringe maximum where the two do
    not coincide (the conjugate chain's fringe phase does not track the
    mirror delay)."""
    t_env = envelope_center(modality, mirror_delay)
    if carrier_frequency == 0.0 or modality != PC_OCT:
        return t_env
    gain_phase = math.atan2(amplifier.peak_gain.imag, amplifier.peak_gain.real)
    k = round((carrier_frequency * t_env - gain_phase) / TWO_PI)
    return (gain_phase + TWO_PI * k) / carrier_frequency


def _chain_guard(modality: str, spectrum: Spectrum, mirror_delay: float,
                 reference_delay: float, amplifier: AmpResponse | None) -> float:
    shift = (2.0 if modality == PC_OCT else 1.0) * abs(mirror_delay)
    margin = GUARD_TAIL_FACTOR / spectrum.rms_bandwidth
    if amplifier is not None:
        margin += GUARD_TAIL_FACTOR / amplifier.bandwidth
    return max(shift, abs(reference_delay)) + margin


def _chain_omega_max(modality: str, spectrum: Spectrum,
                     amplifier: AmpResponse | None) -> float:
    # Cover the source to the grid cutoff and, for the conjugate chain,
    # nearly all of the injected-noise flux passed by the gain profile.
    omega_max = 12.0 * spectrum.rms_bandwidth
    if modality == PC_OCT and amplifier is not None:
        omega_max = max(omega_max, 3.5 * amplifier.bandwidth)
    return omega_max


def _chain_output(modality: str, realization: FieldRealization,
                  sample: LayeredSample, amplifier: AmpResponse | None,
                  amp_rng, amp_noise: bool) -> Beam:
    beam = realization.signal_beam()
    if modality == PC_OCT:
        beam = apply_sample(beam, sample)
        beam = conjugate_amplify(beam, amplifier, amp_rng, include_noise=amp_noise)
        beam = apply_sample(beam, sample)
        return beam
    if modality == C_OCT:
        return apply_sample(beam, sample)
    raise ParameterError(
        f"Monte Carlo chains exist for {_SUPPORTED_CHAINS}, not {modality!r}")


def _source_kind(modality: str) -> str:
    # The conjugate chain consumes the phase-sensitive pair; the
    # conventional chain interferes the beam with itself-like reference.
    return PHASE_SENSITIVE if modality == PC_OCT else PHASE_INSENSITIVE_PAIR


@dataclass(frozen=True)
class SnrExperiment:
    modality: str
    n_trials: int
    master_seed: int
    trial_averages: np.ndarray
    trial_seeds: np.ndarray
    mean: float
    variance: float
    empirical_snr: float
    snr_se: float
    ci: tuple[float, float]
    ci_level: float
    oracle_snr: float
    reference_delay: float
    window: tuple[float, float]

    @property
    def relative_error(self) -> float:
        return abs(self.empirical_snr - self.oracle_snr) / self.oracle_snr


def run_snr_experiment(op: snr_module.SnrOperatingPoint, *,
                       modality: str = PC_OCT, mirror_delay: float,
                       carrier_frequency: float = 0.0,
                       n_time: int = 16384, omega_max: float | None = None,
                       coverage_cutoff: float = 1e-8,
                       n_trials: int = 10000, master_seed: int = 0,
                       ci_level: float = 0.95,
                       ci_max_relative_halfwidth: float | None = None,
                       shot_noise: bool = True, thermal_noise: bool = True,
                       amp_noise: bool = True) -> SnrExperiment:
    """Estimate mean^2/var of the time-averaged difference current at the
    signature-maximizing reference delay, against the closed-form oracle.

    Raises InsufficientTrials when a requested relative CI half-width is
    not met.
    """
    if modality not in _SUPPORTED_CHAINS:
        raise ParameterError(
            f"Monte Carlo chains exist for {_SUPPORTED_CHAINS}, not {modality!r}")
    amplifier = op.amplifier if modality == PC_OCT else None
    if modality == PC_OCT:
        full = snr_module.snr_pc_oct(op)
        oracle = full.value
        if not full.w_dominated:
            warnings.warn(
                f"operating point is not w-dominated (passthrough/noise flux "
                f"ratio {full.w_dominance_ratio:.3g}); the closed-form SNR may "
                "not describe this chain", UserWarning, stacklevel=2)
    else:
        oracle = snr_module.snr_c_oct(op)

    spectrum = op.spectrum
    detection = op.detection
    sample = LayeredSample.single_mirror(op.reflectivity, mirror_delay,
                                         carrier_frequency)
    t_ref = _fringe_aligned_delay(modality, mirror_delay, carrier_frequency,
                                  amplifier)
    guard = _chain_guard(modality, spectrum, mirror_delay, t_ref, amplifier)
    if omega_max is None:
        omega_max = _chain_omega_max(modality, spectrum, amplifier)
    freq = FreqGrid.from_omega_max(n_time, omega_max, coverage_cutoff)
    grid = freq.time_grid(guard)
    if guard + detection.integration_time > grid.duration - guard:
        raise ParameterError(
            "record too short for the integration window plus guard bands; "
            "increase n_time or reduce integration_time")

    window = (guard, detection.integration_time)
    averages = np.empty(n_trials)
    seeds = np.empty(n_trials, dtype=np.uint32)
    kind = _source_kind(modality)
    for trial in range(n_trials):
        realization = synthesize_source(
            spectrum, grid, trial_rng(master_seed, trial, CH_SOURCE), kind)
        e1 = _chain_output(modality, realization, sample, amplifier,
                           trial_rng(master_seed, trial, CH_AMP), amp_noise)
        e2 = delayed_reference(realization.reference_beam(), t_ref,
                               carrier_frequency)
        record = michelson_detect(e1, e2, detection,
                                  rng=trial_rng(master_seed, trial, CH_DETECT),
                                  window=window, shot_noise=shot_noise,
                                  thermal_noise=thermal_noise)
        averages[trial] = record.i_avg
        seeds[trial] = trial_seed_fingerprint(master_seed, trial)

    mean = float(averages.mean())
    variance = float(averages.var(ddof=1))
    snr, se, ci = snr_with_jackknife(averages, ci_level)
    if (ci_max_relative_halfwidth is not None and math.isfinite(snr)
            and snr != 0.0):
        halfwidth = 0.5 * (ci[1] - ci[0])
        if halfwidth / abs(snr) > ci_max_relative_halfwidth:
            raise InsufficientTrials(
                f"relative CI half-width {halfwidth / abs(snr):.3g} exceeds the "
                f"requested {ci_max_relative_halfwidth:g}; run more trials")
    return SnrExperiment(
        modality=modality, n_trials=n_trials, master_seed=master_seed,
        trial_averages=averages, trial_seeds=seeds, mean=mean,
        variance=variance, empirical_snr=snr, snr_se=se, ci=ci,
        ci_level=ci_level, oracle_snr=oracle, reference_delay=t_ref,
        window=window)


@dataclass(frozen=True)
class MeanSignatureExperiment:
    modality: str
    delays: np.ndarray
    trial_mean: np.ndarray
    trial_se: np.ndarray
    oracle: np.ndarray
    n_trials: int
    master_seed: int

    @property
    def max_sigma_deviation(self) -> float:
        return float(np.max(np.abs(self.trial_mean - self.oracle) / self.trial_se))


def run_mean_signature_experiment(modality: str, spectrum: Spectrum,
                                  sample: LayeredSample,
                                  detection: DetectionChain, delays, *,
                                  amplifier: AmpResponse | None = None,
                                  integration_time: float | None = None,
                                  n_time: int = 16384,
                                  omega_max: float | None = None,
                                  n_trials: int = 10000, master_seed: int = 0,
                                  shot_noise: bool = True,
                                  thermal_noise: bool = True,
                                  amp_noise: bool = True) -> MeanSignatureExperiment:
    """Trial-mean detector trace over a reference-delay grid, with the
    analytic signature (on the same frequency grid) as the oracle."""
    if modality not in _SUPPORTED_CHAINS:
        raise ParameterError(
            f"Monte Carlo chains exist for {_SUPPORTED_CHAINS}, not {modality!r}")
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    if integration_time is None:
        integration_time = detection.integration_time
    t_i = integration_time
    guard = _chain_guard(modality, spectrum, sample.max_delay,
                         float(np.max(np.abs(delays))), amplifier)
    if omega_max is None:
        omega_max = _chain_omega_max(modality, spectrum, amplifier)
    freq = FreqGrid.from_omega_max(n_time, omega_max)
    grid = freq.time_grid(guard)
    if guard + t_i > grid.duration - guard:
        raise ParameterError("record too short for the integration window; "
                             "increase n_time")

    oracle = signature_trace(modality, spectrum, sample, delays, freq,
                             amplifier=amplifier, detection=detection).trace
    carrier = sample.carrier_frequency
    omega_fft = freq.omega_fft
    window = (guard, t_i)
    kind = _source_kind(modality)

    sums = np.zeros(delays.size)
    sumsq = np.zeros(delays.size)
    for trial in range(n_trials):
        realization = synthesize_source(
            spectrum, grid, trial_rng(master_seed, trial, CH_SOURCE), kind)
        e1 = _chain_output(modality, realization, sample, amplifier,
                           trial_rng(master_seed, trial, CH_AMP), amp_noise)
        det_rng = trial_rng(master_seed, trial, CH_DETECT)
        ref_spec = np.fft.ifft(realization.reference)
        for j, t in enumerate(delays):
            shifted = np.fft.fft(ref_spec * np.exp(1j * omega_fft * t))
            e2 = Beam(shifted * np.exp(1j * carrier * t), grid, abs(t))
            record = michelson_detect(e1, e2, detection, rng=det_rng,
                                      window=window, shot_noise=shot_noise,
                                      thermal_noise=thermal_noise)
            sums[j] += record.i_avg
            sumsq[j] += record.i_avg**2
    mean = sums / n_trials
    var = (sumsq - n_trials * mean**2) / (n_trials - 1)
    se = np.sqrt(np.maximum(var, 0.0) / n_trials)
    return MeanSignatureExperiment(modality=modality, delays=delays,
                                   trial_mean=mean, trial_se=se, oracle=oracle,
                                   n_trials=n_trials, master_seed=master_seed)


@dataclass(frozen=True)
class CorrelationEstimate:
    lag: float
    mean: complex
    se_real: float
    se_imag: float
    oracle: complex

    def consistent(self, n_sigma: float = 3.0) -> bool:
        return (abs(self.mean.real - self.oracle.real) <= n_sigma * self.se_real
                and abs(self.mean.imag - self.oracle.imag) <= n_sigma * self.se_imag)


@dataclass(frozen=True)
class SourceStatistics:
    correlation: str
    n_trials: int
    auto: tuple[CorrelationEstimate, ...]
    cross_phase_sensitive: tuple[CorrelationEstimate, ...]
    cross_phase_insensitive: tuple[CorrelationEstimate, ...]


def run_source_statistics(spectrum: Spectrum, *, lags, n_time: int = 16384,
                          omega_max: float | None = None,
                          n_trials: int = 10000, master_seed: int = 0,
                          correlation: str = PHASE_SENSITIVE) -> SourceStatistics:
    """Ensemble estimates of the three defining correlations of the source.

    ``lags`` are rounded to grid samples.  Oracles are the discrete inverse
    transform of the spectrum (exact for this synthesis); the
    phase-insensitive cross-correlation of the phase-sensitive pair is
    identically zero.
    """
    if omega_max is None:
        omega_max = 12.0 * spectrum.rms_bandwidth
    freq = FreqGrid.from_omega_max(n_time, omega_max)
    guard = GUARD_TAIL_FACTOR / spectrum.rms_bandwidth
    grid = freq.time_grid(guard)
    steps = sorted({int(round(float(t) / grid.step)) for t in np.atleast_1d(lags)})
    jmax = steps[-1]
    length = grid.n_active - jmax
    if length < 16:
        raise ParameterError("record too short for the requested lags")

    est = {name: np.empty((n_trials, len(steps)), dtype=complex)
           for name in ("auto", "ps", "pi")}
    for trial in range(n_trials):
        r = synthesize_source(spectrum, grid,
                              trial_rng(master_seed, trial, CH_SOURCE),
                              correlation)
        s, ref = r.signal, r.reference
        for col, j in enumerate(steps):
            a, b = s[j:j + length], s[:length]
            est["auto"][trial, col] = np.mean(np.conj(a) * b)
            est["ps"][trial, col] = np.mean(s[j:j + length] * ref[:length])
            est["pi"][trial, col] = np.mean(np.conj(s[j:j + length]) * ref[:length])

    taus = np.array([j * grid.step for j in steps])
    from .fields import spectral_autocorrelation
    acorr = spectral_autocorrelation(spectrum, freq, taus)
    oracle = {
        "auto": np.conj(acorr),   # <E*(t+tau) E(t)> carries the opposite phase
        "ps": acorr if correlation == PHASE_SENSITIVE else np.zeros_like(acorr),
        "pi": np.zeros_like(acorr) if correlation == PHASE_SENSITIVE else np.conj(acorr),
    }

    def rows(name):
        data = est[name]
        mean = data.mean(axis=0)
        se_r = data.real.std(axis=0, ddof=1) / math.sqrt(n_trials)
        se_i = data.imag.std(axis=0, ddof=1) / math.sqrt(n_trials)
        return tuple(CorrelationEstimate(lag=taus[i], mean=complex(mean[i]),
                                         se_real=float(se_r[i]),
                                         se_imag=float(se_i[i]),
                                         oracle=complex(oracle[name][i]))
                     for i in range(len(steps)))

    return SourceStatistics(correlation=correlation, n_trials=n_trials,
                            auto=rows("auto"), cross_phase_sensitive=rows("ps"),
                            cross_phase_insensitive=rows("pi"))
