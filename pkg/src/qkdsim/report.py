"""Machine-readable run reports.

A report is a JSON document with stable field names: the full config echo
(including every seed), the outcome summary, the decoded trit string, and
the phase-by-phase transcript rows. Re-running with the echoed seeds
reproduces the report byte for byte; nothing time- or host-dependent goes
in.
"""

from __future__ import annotations

import json

from .adversary import EveConfig
from .endpoints import EndpointOutcome
from .engine import SessionConfig, SessionOutcome, bits_to_string
from .optics import PipelineConfig
from .trace_codec import DecoderConfig, trits_to_string

__all__ = ["build_report", "build_endpoint_report", "report_to_json"]

FORMAT = "qkdsim-report/1"


def _session_dict(config: SessionConfig) -> dict:
    return {
        "n_bits": config.n_bits,
        "sample_len": config.sample_len,
        "abort_mismatch_threshold": config.abort_mismatch_threshold,
        "seed_alice": int(config.seed_alice),
        "seed_bob": int(config.seed_bob),
    }


def _pipeline_dict(config: PipelineConfig) -> dict:
    return {
        "pulse_width_ns": config.pulse_width_ns,
        "slot_period_ns": config.slot_period_ns,
        "samples_per_slot": config.samples_per_slot,
        "full_scale_volts": config.full_scale_volts,
        "noise_sigma_volts": config.noise_sigma_volts,
        "drift_offset_deg": config.drift_offset_deg,
        "seed": int(config.seed),
        "photons_per_pulse": config.photons_per_pulse,
        "swap_channels": config.swap_channels,
        "wavelength_nm": config.wavelength_nm,
    }


def _decoder_dict(config: DecoderConfig) -> dict:
    return {
        "slot_period_ns": config.slot_period_ns,
        "pulse_width_ns": config.pulse_width_ns,
        "pulse_window_fraction": config.pulse_window_fraction,
        "certain_threshold": config.certain_threshold,
        "no_signal_floor_volts": config.no_signal_floor_volts,
        "expected_slots": config.expected_slots,
        "swap_channels": config.swap_channels,
    }


def _eve_dict(config: EveConfig | None) -> dict | None:
    if config is None:
        return None
    return {
        "tap_fraction": config.tap_fraction,
        "seed_eve": int(config.seed_eve),
        "mode": config.mode,
        "photon_count": config.photon_count,
    }


def build_report(
    outcome: SessionOutcome,
    session: SessionConfig,
    pipeline: PipelineConfig,
    decoder: DecoderConfig,
    eve: EveConfig | None = None,
) -> dict:
    """Assemble the full report for an in-process session."""
    report = {
        "format": FORMAT,
        "session": _session_dict(session),
        "pipeline": _pipeline_dict(pipeline),
        "decoder": _decoder_dict(decoder),
        "eve": _eve_dict(eve),
        "outcome": {
            "verdict": outcome.verdict,
            "final_key": bits_to_string(outcome.final_key),
            "final_key_len": int(outcome.final_key.shape[0]),
            "sifted_len": len(outcome.sift),
            "sample_len": outcome.sample_len,
            "sample_mismatch_rate": outcome.sample_mismatch_rate,
            "sifted_mismatch_rate": outcome.sifted_mismatch_rate,
            "uncertain_after_sample": outcome.uncertain_after_sample,
        },
        "trits": trits_to_string(outcome.bob.measured),
        "matching_indices": [int(i) for i in outcome.sift.matching_indices],
    }
    if outcome.transcript is not None:
        report["rows"] = outcome.transcript.as_dicts()
        report["events"] = outcome.transcript.events
        report["protocol_errors"] = outcome.transcript.protocol_errors
    if outcome.eve is not None:
        report["eve_transcript"] = outcome.eve.transcript_dicts()
    return report


def build_endpoint_report(outcome: EndpointOutcome, role: str) -> dict:
    """Report for one side of a networked session (shared view only)."""
    return {
        "format": FORMAT,
        "role": role,
        "outcome": {
            "verdict": outcome.verdict,
            "final_key": "".join(str(b) for b in outcome.final_key),
            "final_key_len": len(outcome.final_key),
            "sifted_len": outcome.sifted_len,
            "sample_len": outcome.sample_len,
            "mismatch_rate_milli": outcome.mismatch_rate_milli,
        },
        "n_bits": outcome.n_bits,
        "matching_indices": [int(i) for i in outcome.matching_indices],
        "protocol_version": outcome.protocol_version,
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"
