"""Command-line front end.

One experiment per invocation; all diagnostics go to stderr as single-line
JSON records, data goes only to files in the output directory.  Exit codes:
0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import montecarlo, signatures, snr
from .config import ExperimentConfig, build_physics, load_config
from .errors import ConfigError, InsufficientTrials, SimulationError
from .fields import AmpResponse, CONJUGATING, PHASE_INSENSITIVE
from .io import (
    write_budget_csv,
    write_dispersion_csv,
    write_summary,
    write_trace_csv,
    write_trials_csv,
)
from .signatures import MODALITIES, envelope_center


def _error_record(err: Exception) -> None:
    record = {"error": type(err).__name__, "message": str(err)}
    print(json.dumps(record), file=sys.stderr)


def _amp_for(cfg: ExperimentConfig, mode: str, spectrum) -> AmpResponse:
    # Resolution/dispersion compare chains at equivalent gain, so the one
    # configured amplifier serves both modes; fall back to a broadband
    # unit-gain profile when none is configured.
    if cfg.amplifier is not None:
        return cfg.amplifier.build(mode=mode)
    return AmpResponse(mode=mode, peak_gain=1.0,
                       bandwidth=1e6 * spectrum.rms_bandwidth)


def _default_delays(cfg, spectrum, sample):
    t0 = sample.layers[0].delay
    center = envelope_center(cfg.modality, t0)
    scale = 1.0 / spectrum.rms_bandwidth if spectrum.kind == "gaussian" else 1.0
    return np.linspace(center - 4.0 * scale, center + 4.0 * scale, 201)


def cmd_signature(cfg: ExperimentConfig, outdir: Path) -> int:
    spectrum, sample, amplifier, detection, grid = build_physics(cfg)
    delays = (cfg.sweep.delays.values() if cfg.sweep.delays is not None
              else _default_delays(cfg, spectrum, sample))
    trace = signatures.signature_trace(cfg.modality, spectrum, sample, delays,
                                       grid, amplifier=amplifier,
                                       detection=detection)
    write_trace_csv(outdir / "trace.csv", trace)
    peak = int(np.argmax(trace.envelope))
    summary = {
        "command": "signature",
        "modality": cfg.modality,
        "envelope_peak_delay": float(trace.delays[peak]),
        "envelope_peak_value": float(trace.envelope[peak]),
        "trace_min": float(np.min(trace.trace)),
        "trace_max": float(np.max(trace.trace)),
    }
    if trace.background is not None:
        summary["background"] = float(trace.background)
    summary["config"] = cfg.resolved()
    write_summary(outdir / "summary.yaml", summary)
    return 0


def cmd_resolution(cfg: ExperimentConfig, outdir: Path) -> int:
    spectrum, sample, _, _, grid = build_physics(cfg)
    modalities = cfg.sweep.modalities or list(MODALITIES)
    sweep_range = None
    if cfg.sweep.mirror_delay is not None:
        sweep_range = (cfg.sweep.mirror_delay.start, cfg.sweep.mirror_delay.stop)
    reports = signatures.resolution_table(
        spectrum, sample, grid, mirror_delay_range=sweep_range,
        modalities=modalities,
        conjugator=_amp_for(cfg, CONJUGATING, spectrum),
        amplifier=_amp_for(cfg, PHASE_INSENSITIVE, spectrum),
        reference_delay=cfg.sweep.reference_delay)
    summary = {
        "command": "resolution",
        "widths": {m: float(r.full_width) for m, r in reports.items()},
        "ratios_to_c_oct": {m: float(r.ratio_to_c_oct) for m, r in reports.items()},
        "peak_delays": {m: float(r.peak_delay) for m, r in reports.items()},
        "config": cfg.resolved(),
    }
    write_summary(outdir / "summary.yaml", summary)
    return 0


def cmd_dispersion(cfg: ExperimentConfig, outdir: Path) -> int:
    spectrum, sample, _, _, grid = build_physics(cfg)
    if not cfg.sweep.dispersion_sets:
        raise ConfigError("sweep.dispersion_sets is empty")
    modalities = cfg.sweep.modalities or list(MODALITIES)
    delays = cfg.sweep.delays.values() if cfg.sweep.delays is not None else None
    all_results = []
    table = {}
    for modality in modalities:
        amp = None
        if modality == signatures.PC_OCT:
            amp = _amp_for(cfg, CONJUGATING, spectrum)
        elif modality == signatures.TWO_PASS_C_OCT:
            amp = _amp_for(cfg, PHASE_INSENSITIVE, spectrum)
        results = signatures.dispersion_experiment(
            modality, spectrum, sample, grid, cfg.sweep.dispersion_sets,
            amplifier=amp, delays=delays)
        all_results.extend(results)
        table[modality] = [
            {"orders": sorted(r.coefficients), "cancelled": bool(r.cancelled),
             "max_deviation": float(r.max_deviation),
             "width_ratio": None if r.width_ratio is None else float(r.width_ratio)}
            for r in results]
    write_dispersion_csv(outdir / "dispersion.csv", all_results)
    write_summary(outdir / "summary.yaml", {
        "command": "dispersion", "cancellation": table,
        "config": cfg.resolved()})
    return 0


def _operating_point(cfg, spectrum, sample, amplifier, detection):
    if len(sample.layers) != 1:
        raise ConfigError("SNR experiments use a single-mirror sample")
    if amplifier is None:
        raise ConfigError("SNR experiments need an amplifier section")
    return snr.SnrOperatingPoint(
        spectrum=spectrum, reflectivity=abs(sample.layers[0].reflectivity),
        amplifier=amplifier, detection=detection)


def cmd_snr(cfg: ExperimentConfig, outdir: Path) -> int:
    spectrum, sample, amplifier, detection, _ = build_physics(cfg)
    op = _operating_point(cfg, spectrum, sample, amplifier, detection)
    result = snr.snr_pc_oct(op)
    regime = snr.classify_regime(op)
    write_budget_csv(outdir / "budget.csv", result.budget)
    write_summary(outdir / "summary.yaml", {
        "command": "snr",
        "snr": float(result.value),
        "regime": regime.dominant,
        "high_gain_limit": float(regime.high_gain_value),
        "high_gain_applicable": bool(regime.high_gain_applicable),
        "ref_shot_limit": float(regime.ref_shot_value),
        "ref_shot_applicable": bool(regime.ref_shot_applicable),
        "c_oct_snr": float(snr.snr_c_oct(op)),
        "w_dominance_ratio": float(result.w_dominance_ratio),
        "w_dominated": bool(result.w_dominated),
        "budget": {name: float(v) for name, v, _ in result.budget.as_rows()},
        "config": cfg.resolved(),
    })
    return 0


def cmd_montecarlo(cfg: ExperimentConfig, outdir: Path) -> int:
    spectrum, sample, amplifier, detection, _ = build_physics(cfg)
    mc = cfg.montecarlo
    op = _operating_point(cfg, spectrum, sample, amplifier, detection)
    experiment = montecarlo.run_snr_experiment(
        op, modality=cfg.modality, mirror_delay=sample.layers[0].delay,
        carrier_frequency=sample.carrier_frequency, n_time=mc.n_time,
        omega_max=mc.omega_max, n_trials=mc.trials,
        master_seed=mc.master_seed, ci_level=mc.ci_level)
    write_trials_csv(outdir / "trials.csv", experiment)
    halfwidth = 0.5 * (experiment.ci[1] - experiment.ci[0])
    summary = {
        "command": "montecarlo",
        "modality": cfg.modality,
        "trials": experiment.n_trials,
        "master_seed": experiment.master_seed,
        "mean": float(experiment.mean),
        "variance": float(experiment.variance),
        "empirical_snr": float(experiment.empirical_snr),
        "ci_level": experiment.ci_level,
        "ci": [float(experiment.ci[0]), float(experiment.ci[1])],
        "oracle_snr": float(experiment.oracle_snr),
        "relative_error": float(experiment.relative_error),
        "reference_delay": float(experiment.reference_delay),
        "config": cfg.resolved(),
    }
    write_summary(outdir / "summary.yaml", summary)
    if mc.ci_max_relative_halfwidth is not None and experiment.empirical_snr:
        if halfwidth / abs(experiment.empirical_snr) > mc.ci_max_relative_halfwidth:
            raise InsufficientTrials(
                f"relative CI half-width {halfwidth / abs(experiment.empirical_snr):.3g} "
                f"exceeds the requested {mc.ci_max_relative_halfwidth:g}")
    return 0


COMMANDS = {
    "signature": cmd_signature,
    "resolution": cmd_resolution,
    "dispersion": cmd_dispersion,
    "snr": cmd_snr,
    "montecarlo": cmd_montecarlo,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcoct",
        description="OCT modality simulator: signatures, resolution, "
                    "dispersion, SNR and Monte Carlo experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="YAML experiment config")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the Monte Carlo master seed")
        cmd.add_argument("--trials", type=int, default=None,
                         help="override the Monte Carlo trial count")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        updates = {}
        if args.seed is not None:
            updates["master_seed"] = args.seed
        if args.trials is not None:
            updates["trials"] = args.trials
        if updates:
            cfg = cfg.model_copy(
                update={"montecarlo": cfg.montecarlo.model_copy(update=updates)})
        outdir = Path(args.out) if args.out else Path(cfg.output.directory)
        outdir.mkdir(parents=True, exist_ok=True)
    except ConfigError as err:
        _error_record(err)
        return 2
    except OSError as err:
        _error_record(ConfigError(f"cannot create output directory: {err}"))
        return 2
    try:
        return COMMANDS[args.command](cfg, outdir)
    except ConfigError as err:
        _error_record(err)
        return 2
    except SimulationError as err:
        _error_record(err)
        return 3


if __name__ == "__main__":
    sys.exit(main())
