"""Desk-scale simulator for phase-conjugate, conventional, quantum and
two-pass OCT: analytic axial signatures, resolution and dispersion
analysis, closed-form SNR, and a Monte Carlo engine that validates both."""

from .errors import (
    ConfigError,
    DelayExceedsGuardBand,
    GridMismatch,
    GridTooNarrow,
    InsufficientTrials,
    NegativeDensity,
    NoCrossing,
    NonPositiveParameter,
    ParameterError,
    SimulationError,
    WrongAmpMode,
)
from .fields import (
    AmpResponse,
    CONJUGATING,
    DetectionChain,
    FreqGrid,
    Layer,
    LayeredSample,
    PHASE_INSENSITIVE,
    Spectrum,
    TimeGrid,
    eval_amp_response,
    eval_sample_response,
    eval_spectrum,
    spectral_autocorrelation,
)
from .signatures import (
    C_OCT,
    MODALITIES,
    PC_OCT,
    Q_OCT,
    TWO_PASS_C_OCT,
    DispersionResult,
    ResolutionReport,
    SignatureTrace,
    axial_resolution,
    c_oct_signature,
    dispersion_experiment,
    envelope_center,
    extract_envelope,
    fit_log_envelope_quadratic,
    pc_oct_signature,
    q_oct_signature,
    resolution_table,
    signature_trace,
    two_pass_c_oct_signature,
)
from .snr import (
    CrossSpectrumGap,
    NoiseBudget,
    RegimeReport,
    SnrOperatingPoint,
    classify_regime,
    cross_spectrum_gap,
    noise_budget,
    snr_c_oct,
    snr_pc_oct,
    snr_pc_oct_high_gain,
    snr_pc_oct_ref_shot,
)
from .montecarlo import (
    Beam,
    DetectionRecord,
    FieldRealization,
    MeanSignatureExperiment,
    SnrExperiment,
    SourceStatistics,
    apply_sample,
    conjugate_amplify,
    delayed_reference,
    michelson_detect,
    run_mean_signature_experiment,
    run_snr_experiment,
    run_source_statistics,
    snr_with_jackknife,
    synthesize_source,
    trial_rng,
    trial_seed_fingerprint,
)

__version__ = "0.1.0"
