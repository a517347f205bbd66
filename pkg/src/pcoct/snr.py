"""Closed-form SNR of the Michelson chains and noise-regime classification.

The full phase-conjugate SNR divides a signal term
``8 T_I eta r^4 |V|^2 P_S^2 W_V^2 / (W_S^2 + 2 W_V^2)`` by the sum of four
noise terms: thermal, reference-arm shot, conjugate-amplifier quantum noise
and the intrinsic noise of the signal-reference beat.  Two limiting forms
(high-gain/high-power, and reference-shot-dominated) and the conventional
SNR are provided alongside, plus the classical-versus-quantum cross-spectrum
comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveParameter, ParameterError
from .fields import TWO_PI, AmpResponse, DetectionChain, FreqGrid, Spectrum, eval_spectrum

# Budget terms in presentation order; ties in the dominance ranking break
# toward the earlier term.
BUDGET_TERMS = ("thermal", "reference_shot", "conjugator_quantum", "intrinsic")

# A limit formula is "applicable" when it sits within this fraction of the
# full expression.
LIMIT_APPLICABILITY = 0.10

# Signal passthrough is considered negligible against the injected
# conjugator noise below this flux ratio.
W_DOMINANCE_BOUND = 0.10


@dataclass(frozen=True)
class SnrOperatingPoint:
    """Gaussian source, weakly reflecting mirror, amplifier and detector
    parameters entering the closed-form SNR expressions.  The reference arm
    carries the same power as the signal arm."""

    spectrum: Spectrum
    reflectivity: float
    amplifier: AmpResponse
    detection: DetectionChain

    def __post_init__(self):
        if self.spectrum.kind != "gaussian":
            raise ParameterError("SNR formulas are stated for gaussian spectra")
        if not 0.0 < self.reflectivity <= 1.0:
            raise NonPositiveParameter("reflectivity must lie in (0, 1]")
        if abs(self.amplifier.peak_gain) <= 0.0:
            raise NonPositiveParameter("amplifier peak gain must be nonzero")


@dataclass(frozen=True)
class NoiseBudget:
    """The four denominator terms, in rate units."""

    thermal: float
    reference_shot: float
    conjugator_quantum: float
    intrinsic: float

    @property
    def total(self) -> float:
        return self.thermal + self.reference_shot + self.conjugator_quantum + self.intrinsic

    @property
    def dominant(self) -> str:
        values = [self.thermal, self.reference_shot,
                  self.conjugator_quantum, self.intrinsic]
        return BUDGET_TERMS[int(np.argmax(values))]

    def as_rows(self):
        """(term, value, share) rows for the budget table."""
        total = self.total
        values = (self.thermal, self.reference_shot,
                  self.conjugator_quantum, self.intrinsic)
        return [(name, v, v / total if total > 0 else 0.0)
                for name, v in zip(BUDGET_TERMS, values)]


@dataclass(frozen=True)
class PcOctSnr:
    value: float
    budget: NoiseBudget
    w_dominance_ratio: float   # signal-passthrough flux over injected-noise flux
    w_dominated: bool


@dataclass(frozen=True)
class RegimeReport:
    dominant: str
    full_value: float
    high_gain_value: float
    ref_shot_value: float
    high_gain_applicable: bool
    ref_shot_applicable: bool


def _unpack(op: SnrOperatingPoint):
    r2 = op.reflectivity**2
    v2 = abs(op.amplifier.peak_gain) ** 2
    bw = op.amplifier.bandwidth
    ps = op.spectrum.source_power
    os_ = op.spectrum.rms_bandwidth
    return r2, v2, bw, ps, os_


def noise_budget(op: SnrOperatingPoint) -> NoiseBudget:
    r2, v2, bw, ps, os_ = _unpack(op)
    eta = op.detection.quantum_efficiency
    rv2 = r2 * v2
    return NoiseBudget(
        thermal=op.detection.thermal_rate,
        reference_shot=ps,
        conjugator_quantum=rv2 * math.sqrt(bw**2 / TWO_PI),
        intrinsic=2.0 * eta * rv2 * ps * bw / math.sqrt(os_**2 + bw**2),
    )


def _signal_term(op: SnrOperatingPoint) -> float:
    r2, v2, bw, ps, os_ = _unpack(op)
    eta = op.detection.quantum_efficiency
    ti = op.detection.integration_time
    return 8.0 * ti * eta * r2**2 * v2 * ps**2 * bw**2 / (os_**2 + 2.0 * bw**2)


def w_dominance_ratio(op: SnrOperatingPoint) -> float:
    """Flux of the twice-reflected signal relative to the injected
    conjugator noise at the amplifier output; small means the noise term
    dominates the passthrough."""
    r2, _, bw, ps, os_ = _unpack(op)
    return r2 * ps * math.sqrt(TWO_PI) / math.sqrt(os_**2 + bw**2)


def snr_pc_oct(op: SnrOperatingPoint) -> PcOctSnr:
    """Full phase-conjugate SNR with its noise budget.

    The w-dominance flag reports whether the operating point satisfies the
    assumption behind the formula; it never blocks evaluation.
    """
    budget = noise_budget(op)
    ratio = w_dominance_ratio(op)
    return PcOctSnr(value=_signal_term(op) / budget.total, budget=budget,
                    w_dominance_ratio=ratio,
                    w_dominated=ratio < W_DOMINANCE_BOUND)


def snr_pc_oct_high_gain(op: SnrOperatingPoint) -> float:
    """High-gain, high-power limit: only the intrinsic beat noise survives
    in the denominator (the detector efficiency cancels exactly)."""
    r2, _, bw, ps, os_ = _unpack(op)
    ti = op.detection.integration_time
    return 4.0 * ti * r2 * ps * bw * math.sqrt(os_**2 + bw**2) / (os_**2 + 2.0 * bw**2)


def snr_pc_oct_ref_shot(op: SnrOperatingPoint) -> float:
    """Low-gain limit where reference-arm shot noise dominates."""
    r2, v2, bw, ps, os_ = _unpack(op)
    eta = op.detection.quantum_efficiency
    ti = op.detection.integration_time
    return 8.0 * eta * ti * r2**2 * v2 * ps * bw**2 / (os_**2 + 2.0 * bw**2)


def snr_c_oct(op: SnrOperatingPoint) -> float:
    """Conventional SNR for a reflected signal much weaker than the
    reference: ``4 eta T_I r^2 P_S``."""
    r2, _, _, ps, _ = _unpack(op)
    return 4.0 * op.detection.quantum_efficiency * op.detection.integration_time * r2 * ps


def classify_regime(op: SnrOperatingPoint) -> RegimeReport:
    """Dominant noise term plus applicability flags for the two limit
    formulas (within 10 percent of the full expression)."""
    result = snr_pc_oct(op)
    high_gain = snr_pc_oct_high_gain(op)
    ref_shot = snr_pc_oct_ref_shot(op)
    full = result.value

    def within(limit):
        return abs(limit - full) <= LIMIT_APPLICABILITY * full

    return RegimeReport(dominant=result.budget.dominant, full_value=full,
                        high_gain_value=high_gain, ref_shot_value=ref_shot,
                        high_gain_applicable=within(high_gain),
                        ref_shot_applicable=within(ref_shot))


@dataclass(frozen=True)
class CrossSpectrumGap:
    """Relative excess of the quantum-maximum cross-spectrum
    ``sqrt(S(S+1))`` over the classical maximum ``S`` on a grid."""

    omega: np.ndarray
    gap: np.ndarray
    sup: float
    sup_omega: float
    at_zero: float


def cross_spectrum_gap(spectrum: Spectrum, grid: FreqGrid) -> CrossSpectrumGap:
    """(sqrt(S(S+1)) - S) / S over the grid; tiny at the peak when the
    density is much greater than one photon per mode, growing into the
    spectral tails."""
    if spectrum.kind != "gaussian":
        raise ParameterError("cross-spectrum comparison is defined for gaussian spectra")
    s = eval_spectrum(spectrum, grid)
    # sqrt(1 + 1/S) - 1, computed stably for both huge and tiny S
    gap = np.expm1(0.5 * np.log1p(1.0 / s))
    i = int(np.argmax(gap))
    izero = grid.n_points // 2
    return CrossSpectrumGap(omega=grid.omega, gap=gap, sup=float(gap[i]),
                            sup_omega=float(grid.omega[i]),
                            at_zero=float(gap[izero]))
