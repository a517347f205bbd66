"""Analytic mean signatures of the four OCT modalities.

Each signature is a frequency-domain quadrature over the source spectrum:

* phase-conjugate:   z(T) = int dW/2pi  H*(-W) H(W) V*(-W) S(W) e^{-i(W-w0)T}
* conventional:      z(T) = int dW/2pi  H*(-W) S(W) e^{-i(W-w0)T}
* quantum (HOM dip): C(T) = background - Re int dW/2pi H*(-W) H(W) S(W) e^{-i 2 W T}
* two-pass conventional: the conventional integrand with H replaced by G*H**2
  (two sample passes through a phase-insensitive amplifier, no conjugation).

The quadrature is a trapezoid rule on the uniform FreqGrid; the integrands
are smooth and rapidly decaying, so accuracy is governed by the grid
coverage cutoff.  Traces store the complex pre-projection values z(T) on an
envelope-scale delay grid; the fast carrier fringe is carried analytically
by the stored values and is never sampled densely.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCrossing, ParameterError, WrongAmpMode
from .fields import (
    TWO_PI,
    AmpResponse,
    CONJUGATING,
    DetectionChain,
    FreqGrid,
    LayeredSample,
    PHASE_INSENSITIVE,
    Spectrum,
    eval_spectrum,
)

PC_OCT = "pc_oct"
C_OCT = "c_oct"
Q_OCT = "q_oct"
TWO_PASS_C_OCT = "two_pass_c_oct"

MODALITIES = (PC_OCT, C_OCT, Q_OCT, TWO_PASS_C_OCT)
MICHELSON_MODALITIES = (PC_OCT, C_OCT, TWO_PASS_C_OCT)

# Dip terms of a Hong-Ou-Mandel coincidence trace carry e^{-i 2 W T}; the
# Michelson integrands carry e^{-i W T} plus the analytic carrier factor.
_DETUNE_SCALE = {PC_OCT: 1.0, C_OCT: 1.0, TWO_PASS_C_OCT: 1.0, Q_OCT: 2.0}

_BIPHOTON_DENSITY_BOUND = 0.1

_DEFAULT_DETECTION = DetectionChain(quantum_efficiency=1.0)


@dataclass(frozen=True)
class SignatureTrace:
    """Signature of one modality over a reference-delay grid.

    ``values`` holds the complex pre-projection integral z(T).  For the
    Michelson modalities ``trace`` is ``2 q eta G_A Re z(T)``; for the
    coincidence modality it is ``background - Re z(T)`` so the dip appears
    as a minimum, and ``background`` is stored once (it is T-independent).
    ``envelope`` is |z(T)|.
    """

    modality: str
    delays: np.ndarray
    values: np.ndarray
    trace: np.ndarray
    envelope: np.ndarray
    carrier_frequency: float
    projection_gain: float
    background: float | None = None
    params: dict = field(default_factory=dict)

    def fringe(self, delays) -> np.ndarray:
        """Reconstruct the real fringe on a denser delay grid.

        The stored values are demodulated by the carrier, interpolated (the
        demodulated part varies on the envelope scale), remodulated and
        projected.  Only meaningful for the Michelson modalities.
        """
        if self.modality == Q_OCT:
            raise ParameterError("coincidence traces have no carrier fringe")
        delays = np.asarray(delays, dtype=float)
        demod = self.values * np.exp(-1j * self.carrier_frequency * self.delays)
        interp = (np.interp(delays, self.delays, demod.real)
                  + 1j * np.interp(delays, self.delays, demod.imag))
        return self.projection_gain * np.real(
            interp * np.exp(1j * self.carrier_frequency * delays))


@dataclass(frozen=True)
class ResolutionReport:
    """Full width between the e^-2 envelope attenuation points, measured as
    a function of the mirror delay at fixed reference delay."""

    modality: str
    full_width: float
    peak_delay: float
    peak_value: float
    reference_delay: float
    ratio_to_c_oct: float | None = None


@dataclass(frozen=True)
class DispersionResult:
    """Effect of one dispersion coefficient set on one modality."""

    modality: str
    coefficients: dict
    max_deviation: float          # max |env - env0| / peak(env0) over the delay grid
    cancelled: bool
    peak_shift: float             # delay shift of the envelope peak
    recentered_deviation: float   # residual after undoing the peak shift
    width: float | None = None
    width_ratio: float | None = None


# ---------------------------------------------------------------------------
# quadrature core
# ---------------------------------------------------------------------------

def _weights(grid: FreqGrid) -> np.ndarray:
    w = np.full(grid.n_points, grid.spacing / TWO_PI)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _integrand(modality: str, spectrum: Spectrum, sample: LayeredSample,
               amplifier: AmpResponse | None, grid: FreqGrid) -> np.ndarray:
    """Weighted, T-independent part of the signature integrand."""
    s = eval_spectrum(spectrum, grid)
    omega = grid.omega
    if modality == PC_OCT:
        if amplifier is None or amplifier.mode != CONJUGATING:
            raise WrongAmpMode("phase-conjugate chain needs a conjugating amplifier")
        g = (np.conj(sample.response(-omega)) * sample.response(omega)
             * np.conj(amplifier.response(-omega)) * s)
    elif modality == C_OCT:
        g = np.conj(sample.response(-omega)) * s
    elif modality == Q_OCT:
        g = np.conj(sample.response(-omega)) * sample.response(omega) * s
    elif modality == TWO_PASS_C_OCT:
        if amplifier is None or amplifier.mode != PHASE_INSENSITIVE:
            raise WrongAmpMode("two-pass chain needs a phase-insensitive amplifier")
        g = np.conj(amplifier.response(-omega) * sample.response(-omega) ** 2) * s
    else:
        raise ParameterError(f"unknown modality {modality!r}")
    return _weights(grid) * g


def _project(g: np.ndarray, grid: FreqGrid, delays: np.ndarray,
             detune_scale: float, carrier: float) -> np.ndarray:
    """z(T_i) = e^{i w0 T_i} sum_k g_k exp(-i scale W_k T_i), chunked in T."""
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    z = np.empty(delays.shape, dtype=complex)
    omega = grid.omega
    block = max(1, (1 << 22) // grid.n_points)  # cap the phase matrix at ~64 MB
    for i in range(0, delays.size, block):
        t = delays[i:i + block]
        z[i:i + block] = np.exp(-1j * detune_scale * np.outer(t, omega)) @ g
    if carrier != 0.0:
        z = z * np.exp(1j * carrier * delays)
    return z


def _signature_value(modality, spectrum, sample, amplifier, grid, delay) -> complex:
    g = _integrand(modality, spectrum, sample, amplifier, grid)
    carrier = sample.carrier_frequency if modality in MICHELSON_MODALITIES else 0.0
    return complex(_project(g, grid, np.array([delay]), _DETUNE_SCALE[modality], carrier)[0])


# ---------------------------------------------------------------------------
# signature operations
# ---------------------------------------------------------------------------

def _michelson_trace(modality, spectrum, sample, amplifier, detection,
                     delays, grid) -> SignatureTrace:
    g = _integrand(modality, spectrum, sample, amplifier, grid)
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    values = _project(g, grid, delays, 1.0, sample.carrier_frequency)
    gain = (2.0 * detection.electron_charge * detection.quantum_efficiency
            * detection.current_gain)
    params = {"modality": modality, "spectrum": spectrum, "sample": sample,
              "amplifier": amplifier, "detection": detection}
    return SignatureTrace(
        modality=modality, delays=delays, values=values,
        trace=gain * values.real, envelope=np.abs(values),
        carrier_frequency=sample.carrier_frequency,
        projection_gain=gain, params=params)


def pc_oct_signature(spectrum: Spectrum, sample: LayeredSample,
                     conjugator: AmpResponse, detection: DetectionChain,
                     delays, grid: FreqGrid) -> SignatureTrace:
    """Phase-conjugate signature: two sample passes around a conjugating
    amplifier, read out by Michelson difference detection."""
    return _michelson_trace(PC_OCT, spectrum, sample, conjugator, detection,
                            delays, grid)


def c_oct_signature(spectrum: Spectrum, sample: LayeredSample,
                    detection: DetectionChain, delays,
                    grid: FreqGrid) -> SignatureTrace:
    """Conventional signature: one sample pass against the delayed reference."""
    return _michelson_trace(C_OCT, spectrum, sample, None, detection,
                            delays, grid)


def two_pass_c_oct_signature(spectrum: Spectrum, sample: LayeredSample,
                             amplifier: AmpResponse, detection: DetectionChain,
                             delays, grid: FreqGrid) -> SignatureTrace:
    """Two-pass conventional signature: the sample is traversed twice with a
    phase-insensitive amplifier in between, no conjugation."""
    return _michelson_trace(TWO_PASS_C_OCT, spectrum, sample, amplifier,
                            detection, delays, grid)


def q_oct_signature(spectrum: Spectrum, sample: LayeredSample,
                    quantum_efficiency: float, delays, grid: FreqGrid,
                    electron_charge: float = 1.0) -> SignatureTrace:
    """Coincidence-counting signature: T-independent background minus a dip
    term, reported as ``background - dip`` so the dip is a minimum.

    Warns when the spectral density is too large for the biphoton limit the
    coincidence formula assumes.
    """
    if not 0.0 < quantum_efficiency <= 1.0:
        raise ParameterError("quantum_efficiency must lie in (0, 1]")
    s = eval_spectrum(spectrum, grid)
    if float(np.max(s)) >= _BIPHOTON_DENSITY_BOUND:
        warnings.warn(
            f"peak spectral density {np.max(s):.3g} >= {_BIPHOTON_DENSITY_BOUND}: "
            "outside the low-flux regime assumed by the coincidence signature",
            UserWarning, stacklevel=2)
    pref = 0.5 * (electron_charge * quantum_efficiency) ** 2
    omega = grid.omega
    w = _weights(grid)
    background = pref * float(np.sum(w * np.abs(sample.response(omega)) ** 2 * s).real)
    g = pref * w * np.conj(sample.response(-omega)) * sample.response(omega) * s
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    values = _project(g, grid, delays, _DETUNE_SCALE[Q_OCT], 0.0)
    params = {"modality": Q_OCT, "spectrum": spectrum, "sample": sample,
              "quantum_efficiency": quantum_efficiency,
              "electron_charge": electron_charge}
    return SignatureTrace(
        modality=Q_OCT, delays=delays, values=values,
        trace=background - values.real, envelope=np.abs(values),
        carrier_frequency=0.0, projection_gain=1.0,
        background=background, params=params)


def signature_trace(modality: str, spectrum: Spectrum, sample: LayeredSample,
                    delays, grid: FreqGrid, amplifier: AmpResponse | None = None,
                    detection: DetectionChain | None = None) -> SignatureTrace:
    """Dispatch helper used by the CLI and the sweep drivers."""
    detection = detection or _DEFAULT_DETECTION
    if modality == PC_OCT:
        return pc_oct_signature(spectrum, sample, amplifier, detection, delays, grid)
    if modality == C_OCT:
        return c_oct_signature(spectrum, sample, detection, delays, grid)
    if modality == TWO_PASS_C_OCT:
        return two_pass_c_oct_signature(spectrum, sample, amplifier, detection,
                                        delays, grid)
    if modality == Q_OCT:
        return q_oct_signature(spectrum, sample, detection.quantum_efficiency,
                               delays, grid, detection.electron_charge)
    raise ParameterError(f"unknown modality {modality!r}")


def extract_envelope(trace: SignatureTrace) -> np.ndarray:
    """|z(T)| of the stored pre-projection values (for the coincidence
    modality this is the modulus of the dip term); no demodulation of the
    real fringe is involved."""
    return np.abs(trace.values)


def envelope_center(modality: str, mirror_delay: float) -> float:
    """Reference delay at which the single-mirror envelope peaks."""
    if modality in (PC_OCT, TWO_PASS_C_OCT):
        return 2.0 * mirror_delay
    return mirror_delay


# ---------------------------------------------------------------------------
# log-envelope fitting (used by shape checks and reports)
# ---------------------------------------------------------------------------

def fit_log_envelope_quadratic(x, envelope, floor: float = math.exp(-6.0)):
    """Least-squares quadratic fit of log(envelope) over points above
    ``floor * peak``; returns (curvature, center) with
    ``log env ~ const + curvature * (x - center)**2``."""
    x = np.asarray(x, dtype=float)
    envelope = np.asarray(envelope, dtype=float)
    peak = envelope.max()
    keep = envelope > floor * peak
    if keep.sum() < 3:
        raise ParameterError("too few envelope points above the fit floor")
    coeffs = np.polyfit(x[keep], np.log(envelope[keep]), 2)
    curvature = coeffs[0]
    center = -coeffs[1] / (2.0 * coeffs[0])
    return float(curvature), float(center)


# ---------------------------------------------------------------------------
# axial resolution
# ---------------------------------------------------------------------------

def _envelope_vs_mirror_delay(modality, spectrum, mirror, amplifier, grid,
                              reference_delay):
    """Callable T0 -> |z(T_fixed)| for a single-mirror sample.

    Re-evaluates the closed quadrature at each mirror delay rather than
    rescanning the reference delay, so the sweep matches the width
    definition exactly and bisection sees a continuous function.
    """
    if len(mirror.layers) != 1:
        raise ParameterError("axial resolution is defined for a single mirror")
    s = eval_spectrum(spectrum, grid)
    omega = grid.omega
    scale = _DETUNE_SCALE[modality]
    w = _weights(grid)
    if modality == PC_OCT:
        if amplifier is None or amplifier.mode != CONJUGATING:
            raise WrongAmpMode("phase-conjugate chain needs a conjugating amplifier")
        base = w * s * np.conj(amplifier.response(-omega))
    elif modality == TWO_PASS_C_OCT:
        if amplifier is None or amplifier.mode != PHASE_INSENSITIVE:
            raise WrongAmpMode("two-pass chain needs a phase-insensitive amplifier")
        base = w * s * np.conj(amplifier.response(-omega))
    else:
        base = w * s
    base = base * np.exp(-1j * scale * omega * reference_delay)

    def envelope(t0: float) -> float:
        m = mirror.with_mirror_delay(t0)
        if modality == PC_OCT or modality == Q_OCT:
            h = np.conj(m.response(-omega)) * m.response(omega)
        elif modality == C_OCT:
            h = np.conj(m.response(-omega))
        else:
            h = np.conj(m.response(-omega)) ** 2
        return float(np.abs(np.sum(base * h)))

    return envelope


def _golden_max(f, a, b, tol):
    """Golden-section maximization of a unimodal f on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    x = 0.5 * (a + b)
    return x, f(x)


def _bisect_crossing(f, lo, hi, level, tol):
    """Bisect for f(x) == level between samples that bracket the crossing."""
    flo = f(lo) - level
    fhi = f(hi) - level
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NoCrossing("bracketing samples do not straddle the attenuation level")
    while (hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid) - level
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def axial_resolution(modality: str, spectrum: Spectrum, mirror: LayeredSample,
                     grid: FreqGrid, mirror_delay_range: tuple[float, float],
                     amplifier: AmpResponse | None = None,
                     reference_delay: float = 0.0, n_samples: int = 129,
                     refine: float = 1e-9) -> ResolutionReport:
    """Full width between the e^-2 attenuation points of the envelope,
    swept over the mirror delay at fixed reference delay.

    The sweep range must bracket both crossings of an interior, unimodal
    peak; crossings are refined by bisection on the continuous quadrature
    function to ``refine`` times the width (well inside the 1e-6 width
    accuracy the reports are quoted at).
    """
    lo, hi = float(mirror_delay_range[0]), float(mirror_delay_range[1])
    if not hi > lo:
        raise ParameterError("mirror_delay_range must be increasing")
    env = _envelope_vs_mirror_delay(modality, spectrum, mirror, amplifier,
                                    grid, reference_delay)
    t0s = np.linspace(lo, hi, int(n_samples))
    samples = np.array([env(t) for t in t0s])
    imax = int(np.argmax(samples))
    if imax == 0 or imax == len(t0s) - 1:
        raise NoCrossing("envelope peak lies at the edge of the sweep range")
    peak_t, peak = _golden_max(env, t0s[imax - 1], t0s[imax + 1],
                               tol=refine * (hi - lo) * 1e-3)
    level = peak * math.exp(-2.0)

    below_left = np.nonzero(samples[:imax] < level)[0]
    below_right = np.nonzero(samples[imax + 1:] < level)[0]
    if below_left.size == 0 or below_right.size == 0:
        raise NoCrossing("sweep range does not bracket both e^-2 crossings")
    il = below_left[-1]
    ir = imax + 1 + below_right[0]

    rough = t0s[ir] - t0s[il]
    tol = refine * rough
    left = _bisect_crossing(env, t0s[il], t0s[il + 1], level, tol)
    right = _bisect_crossing(env, t0s[ir - 1], t0s[ir], level, tol)
    return ResolutionReport(modality=modality, full_width=right - left,
                            peak_delay=peak_t, peak_value=peak,
                            reference_delay=reference_delay)


def resolution_table(spectrum: Spectrum, mirror: LayeredSample, grid: FreqGrid,
                     mirror_delay_range: tuple[float, float] | None = None,
                     modalities=MODALITIES, conjugator: AmpResponse | None = None,
                     amplifier: AmpResponse | None = None,
                     reference_delay: float | None = None,
                     n_samples: int = 129) -> dict[str, ResolutionReport]:
    """Resolution reports for several modalities with ratios to the
    conventional width filled in.

    With ``reference_delay=None`` each modality is measured at the
    reference delay that centers its envelope on the configured mirror;
    with ``mirror_delay_range=None`` the sweep spans the mirror delay
    plus/minus eight correlation times.
    """
    t0 = mirror.layers[0].delay if mirror.layers else 0.0
    if mirror_delay_range is None:
        scale = 1.0 / spectrum.rms_bandwidth if spectrum.kind == "gaussian" else 1.0
        mirror_delay_range = (t0 - 8.0 * scale, t0 + 8.0 * scale)

    def measure(modality):
        amp = None
        if modality == PC_OCT:
            amp = conjugator
        elif modality == TWO_PASS_C_OCT:
            amp = amplifier
        t_ref = (envelope_center(modality, t0) if reference_delay is None
                 else reference_delay)
        return axial_resolution(modality, spectrum, mirror, grid,
                                mirror_delay_range, amplifier=amp,
                                reference_delay=t_ref, n_samples=n_samples)

    c_report = measure(C_OCT)
    reports: dict[str, ResolutionReport] = {}
    for modality in modalities:
        rep = c_report if modality == C_OCT else measure(modality)
        reports[modality] = ResolutionReport(
            modality=rep.modality, full_width=rep.full_width,
            peak_delay=rep.peak_delay, peak_value=rep.peak_value,
            reference_delay=rep.reference_delay,
            ratio_to_c_oct=rep.full_width / c_report.full_width)
    return reports


# ---------------------------------------------------------------------------
# dispersion experiments
# ---------------------------------------------------------------------------

def _coefficients_to_tuple(coefficients: dict) -> tuple[float, ...]:
    if not coefficients:
        return ()
    top = max(int(k) for k in coefficients)
    if min(int(k) for k in coefficients) < 1:
        raise ParameterError("dispersion orders start at 1")
    out = [0.0] * top
    for k, v in coefficients.items():
        out[int(k) - 1] = float(v)
    return tuple(out)


def _auto_width(modality, spectrum, mirror, amplifier, grid, reference_delay,
                center, halfwidth=8.0, max_halfwidth=128.0):
    """Resolution with an adaptively widened sweep (internal; explicit
    ranges stay strict and raise NoCrossing)."""
    while True:
        try:
            return axial_resolution(modality, spectrum, mirror, grid,
                                    (center - halfwidth, center + halfwidth),
                                    amplifier=amplifier,
                                    reference_delay=reference_delay)
        except NoCrossing:
            halfwidth *= 2.0
            if halfwidth > max_halfwidth:
                raise


def dispersion_experiment(modality: str, spectrum: Spectrum,
                          mirror: LayeredSample, grid: FreqGrid,
                          coefficient_sets, amplifier: AmpResponse | None = None,
                          delays=None, tolerance: float = 1e-9,
                          measure_widths: bool = True) -> list[DispersionResult]:
    """Envelope sensitivity of one modality to each dispersion set.

    For every coefficient set the envelope over the delay grid is compared
    pointwise against the dispersion-free envelope; a set is classified as
    cancelled when the peak-relative deviation stays below ``tolerance``.
    The report also carries the envelope peak shift, the residual deviation
    after undoing that shift (to expose pure-delay effects of odd orders),
    and the e^-2 width ratio against the dispersion-free mirror.
    """
    if len(mirror.layers) != 1:
        raise ParameterError("dispersion experiments use a single mirror")
    t0 = mirror.layers[0].delay
    center = envelope_center(modality, t0)
    if delays is None:
        scale = 1.0 / spectrum.rms_bandwidth if spectrum.kind == "gaussian" else 1.0
        delays = np.linspace(center - 10.0 * scale, center + 10.0 * scale, 201)
    delays = np.asarray(delays, dtype=float)
    detune = _DETUNE_SCALE[modality]

    def envelope_data(sample_obj):
        # Projection prefactors cancel in peak-relative comparisons, so the
        # raw integrand is used for every modality alike.
        g = _integrand(modality, spectrum, sample_obj, amplifier, grid)
        env = np.abs(_project(g, grid, delays, detune, 0.0))

        def pointwise(t):
            return float(np.abs(_project(g, grid, np.array([t]), detune, 0.0)[0]))

        i = int(np.argmax(env))
        a = delays[max(i - 1, 0)]
        b = delays[min(i + 1, delays.size - 1)]
        t_peak, _ = _golden_max(pointwise, a, b, tol=1e-9 * max(1.0, b - a))
        return g, env, t_peak

    flat = LayeredSample.single_mirror(mirror.layers[0].reflectivity, t0,
                                       mirror.carrier_frequency)
    _, env0, t_peak0 = envelope_data(flat)
    peak0 = float(env0.max())

    width0 = None
    if measure_widths:
        width0 = _auto_width(modality, spectrum, flat, amplifier, grid,
                             reference_delay=center, center=t0).full_width

    results = []
    for coeffs in coefficient_sets:
        cdict = dict(coeffs)
        dispersive = LayeredSample.single_mirror(
            mirror.layers[0].reflectivity, t0, mirror.carrier_frequency,
            _coefficients_to_tuple(cdict))
        g_b, env_b, t_peak_b = envelope_data(dispersive)
        deviation = float(np.max(np.abs(env_b - env0)) / peak0)
        shift = t_peak_b - t_peak0
        env_b_shifted = np.abs(_project(g_b, grid, delays + shift, detune, 0.0))
        recentered = float(np.max(np.abs(env_b_shifted - env0)) / peak0)

        width = ratio = None
        if measure_widths:
            width = _auto_width(modality, spectrum, dispersive, amplifier, grid,
                                reference_delay=center, center=t0).full_width
            ratio = width / width0
        results.append(DispersionResult(
            modality=modality, coefficients=cdict, max_deviation=deviation,
            cancelled=deviation < tolerance, peak_shift=shift,
            recentered_deviation=recentered, width=width, width_ratio=ratio))
    return results
