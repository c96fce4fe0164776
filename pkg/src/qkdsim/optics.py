"""Simulated optical chain: pulsed laser -> inline polarizer -> Alice's
rotator -> (optional eavesdropper tap) -> fiber drift -> Bob's rotator ->
polarizing beamsplitter -> two noisy detectors -> oscilloscope trace.

Pulses are simulated at beam level by default (relative intensity plus a
polarization angle, the many-photon regime where a basis mismatch shows up
as a 50/50 channel split). Setting photons_per_pulse switches to per-photon
Monte Carlo sampling: each photon picks a detector with Malus probability,
and the channel intensities become photon-count fractions. With one photon
per pulse every slot gives a definite (possibly random) bit, the textbook
single-photon regime.

Channel convention from the detector wiring: channel 1 carries the 1 bit,
channel 2 the 0 bit; swap_channels flips it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .polarization import (
    DEFAULT_TABLE,
    Basis,
    EncodingTable,
    Polarization,
    encode_state,
    transmission_fraction,
)

__all__ = [
    "Beam",
    "PipelineConfig",
    "Trace",
    "LengthMismatch",
    "laser_pulse",
    "inline_polarizer",
    "alice_rotator",
    "bob_rotator",
    "pbs_split",
    "detector_trace",
    "slot_intensities",
    "simulate_transmission",
    "pulse_sample_count",
    "measurement_luts",
]


class LengthMismatch(ValueError):
    """Input sequences that must be equal-length are not."""


@dataclass(frozen=True)
class Beam:
    """Many-photon pulse: relative intensity and linear polarization.

    polarization None means unpolarized (the raw laser output before the
    inline polarizer).
    """

    intensity: float
    polarization: Polarization | None = None

    def __post_init__(self):
        if not (math.isfinite(self.intensity) and self.intensity >= 0.0):
            raise ValueError(f"beam intensity must be finite and >= 0, got {self.intensity!r}")

    @property
    def is_polarized(self) -> bool:
        return self.polarization is not None


@dataclass(frozen=True)
class PipelineConfig:
    """Physical parameters of the simulated chain.

    pulse_width_ns is constrained to the laser's adjustable range (6-39 ns).
    photons_per_pulse None selects beam-level simulation; an integer selects
    per-photon sampling with that many photons per slot. wavelength_nm is
    metadata only.
    """

    pulse_width_ns: float = 20.0
    slot_period_ns: float = 100.0
    samples_per_slot: int = 64
    full_scale_volts: float = 1.0
    noise_sigma_volts: float = 0.02
    drift_offset_deg: float = 0.0
    seed: int = 0
    photons_per_pulse: int | None = None
    swap_channels: bool = False
    wavelength_nm: float = 980.0

    def __post_init__(self):
        if not 6.0 <= self.pulse_width_ns <= 39.0:
            raise ValueError(
                f"pulse_width_ns must lie in the laser's 6-39 ns range, got {self.pulse_width_ns}"
            )
        if not self.pulse_width_ns < self.slot_period_ns:
            raise ValueError("pulse_width_ns must be smaller than slot_period_ns")
        if self.samples_per_slot < 8:
            raise ValueError("samples_per_slot must be at least 8")
        if self.noise_sigma_volts < 0:
            raise ValueError("noise_sigma_volts must be >= 0")
        if self.full_scale_volts <= 0:
            raise ValueError("full_scale_volts must be > 0")
        if not math.isfinite(self.drift_offset_deg):
            raise ValueError("drift_offset_deg must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.photons_per_pulse is not None and self.photons_per_pulse < 1:
            raise ValueError("photons_per_pulse must be >= 1 when set")

    @property
    def sample_period_ns(self) -> float:
        return self.slot_period_ns / self.samples_per_slot


@dataclass
class Trace:
    """Dual-channel oscilloscope record, one voltage sample per period."""

    sample_period_ns: float
    ch1_volts: np.ndarray
    ch2_volts: np.ndarray

    def __post_init__(self):
        self.ch1_volts = np.asarray(self.ch1_volts, dtype=np.float64)
        self.ch2_volts = np.asarray(self.ch2_volts, dtype=np.float64)
        if self.ch1_volts.shape != self.ch2_volts.shape:
            raise LengthMismatch("trace channels must have identical length")

    @property
    def n_samples(self) -> int:
        return int(self.ch1_volts.shape[0])

    @property
    def duration_ns(self) -> float:
        return self.n_samples * self.sample_period_ns


def pulse_sample_count(config: PipelineConfig) -> int:
    """Samples per slot whose start time falls inside the pulse window."""
    ratio = config.pulse_width_ns / config.sample_period_ns
    return max(1, min(config.samples_per_slot, int(math.ceil(ratio - 1e-9))))


def laser_pulse(config: PipelineConfig) -> Beam:
    """One pulse from the source: full relative intensity, unpolarized."""
    return Beam(1.0, None)


def inline_polarizer(beam: Beam) -> Beam:
    """Set the reference frame: everything downstream is measured against
    the polarizer's axis (0 degrees) at normalized full intensity."""
    if beam.is_polarized and not beam.polarization.is_close(Polarization(0.0)):
        warnings.warn(
            "inline polarizer fed an already-polarized beam; projecting and renormalizing",
            stacklevel=2,
        )
    return Beam(1.0, Polarization(0.0))


def alice_rotator(beam: Beam, bit: int, basis: Basis, table: EncodingTable = DEFAULT_TABLE) -> Beam:
    """Rotate the pulse to the state encoding (bit, basis)."""
    if not beam.is_polarized:
        raise ValueError("alice_rotator requires a polarized beam")
    return Beam(beam.intensity, encode_state(bit, basis, table))


def bob_rotator(beam: Beam, basis: Basis) -> Beam:
    """Map Bob's chosen basis onto the fixed HV frame of the beamsplitter.

    HV leaves the beam alone; DAD rotates by -45 degrees so that D lands on
    the transmit axis and AD on the reflect axis.
    """
    if not beam.is_polarized:
        raise ValueError("bob_rotator requires a polarized beam")
    if Basis(basis) is Basis.HV:
        return beam
    return Beam(beam.intensity, beam.polarization.rotated(-45.0))


def pbs_split(beam: Beam) -> tuple[float, float]:
    """Split intensity onto the two detector channels.

    Channel 2 is the transmit (0-bit, 0 degree) port, channel 1 the reflect
    (1-bit, 90 degree) port; the split is lossless.
    """
    if not beam.is_polarized:
        raise ValueError("pbs_split requires a polarized beam")
    ch2 = beam.intensity * transmission_fraction(beam.polarization, 0.0)
    ch1 = beam.intensity * transmission_fraction(beam.polarization, 90.0)
    return ch1, ch2


def _snap(p: float) -> float:
    # Pin eigenstate and half-split probabilities that are within float noise
    # of their ideal values, so the batch path hits 0 / 0.5 / 1 exactly.
    for ideal in (0.0, 0.5, 1.0):
        if abs(p - ideal) < 1e-14:
            return ideal
    return p


def measurement_luts(table: EncodingTable = DEFAULT_TABLE, drift_offset_deg: float = 0.0):
    """Per-(state, basis) channel fractions for the batch kernels.

    Built by running the single-beam pipeline once per combination, so the
    batch path reproduces the object-level path.
    """
    p_ch1 = np.empty((4, 2), dtype=np.float64)
    p_ch2 = np.empty((4, 2), dtype=np.float64)
    for s in range(4):
        drifted = Beam(1.0, table.angles[s].rotated(drift_offset_deg))
        for b in range(2):
            i1, i2 = pbs_split(bob_rotator(drifted, Basis(b)))
            p_ch1[s, b] = _snap(i1)
            p_ch2[s, b] = _snap(i2)
    return p_ch1, p_ch2


def eve_luts(table: EncodingTable = DEFAULT_TABLE):
    """Probability that a tapped pulse collapses to Eve's bit-0 eigenstate,
    per (state, eve basis)."""
    p_zero = np.empty((4, 2), dtype=np.float64)
    for s in range(4):
        for b in range(2):
            p_zero[s, b] = _snap(
                transmission_fraction(table.angles[s], table.angle(0, Basis(b)))
            )
    return p_zero


def _as_state_indices(bits, bases, table: EncodingTable) -> np.ndarray:
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    bases = np.ascontiguousarray(bases, dtype=np.uint8)
    if bits.shape != bases.shape:
        raise LengthMismatch("bits and bases differ in length")
    if bits.size and (bits.max() > 1 or bases.max() > 1):
        raise ValueError("bits and bases must be 0/1 valued")
    return ((bases << 1) | bits).astype(np.uint8)


def slot_intensities(
    alice_bits,
    alice_bases,
    bob_bases,
    eve=None,
    config: PipelineConfig | None = None,
    rng=None,
    table: EncodingTable = DEFAULT_TABLE,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot (ch1, ch2) detector intensities for a whole transmission.

    Draw order is fixed for reproducibility: the eavesdropper consumes her
    own generator first (one decision per slot whether tapped or not), then
    `rng` supplies Bob's per-photon draws (photon mode only).
    """
    config = config or PipelineConfig()
    states = _as_state_indices(alice_bits, alice_bases, table)
    bob_idx = np.ascontiguousarray(bob_bases, dtype=np.uint8)
    if bob_idx.shape != states.shape:
        raise LengthMismatch("bob_bases differs in length from alice's sequences")
    if rng is None:
        rng = np.random.default_rng(config.seed)

    if eve is not None:
        states = eve.apply_batch(states, table)

    p_ch1, p_ch2 = measurement_luts(table, config.drift_offset_deg)
    if config.photons_per_pulse is None:
        ch1, ch2 = kernels.bob_pass_beam(states, bob_idx, p_ch1, p_ch2)
    else:
        u2 = rng.random((states.shape[0], config.photons_per_pulse))
        ch1, ch2 = kernels.bob_pass_photon(states, bob_idx, p_ch2, u2)
    if config.swap_channels:
        ch1, ch2 = ch2, ch1
    return ch1, ch2


def detector_trace(slot_values, config: PipelineConfig | None = None, rng=None) -> Trace:
    """Render per-slot intensity pairs into a noisy dual-channel trace.

    Within each slot the first pulse_width_ns carry intensity * full scale;
    the remainder of the slot is dark. Gaussian voltage noise is added per
    sample (channel 1 first, then channel 2); a zero noise sigma consumes no
    random draws.
    """
    config = config or PipelineConfig()
    pairs = np.asarray(slot_values, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("slot_values must be a sequence of (ch1, ch2) pairs")
    if pairs.size and (pairs.min() < 0.0 or pairs.max() > 1.0):
        raise ValueError("slot intensities must lie in [0, 1]")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    ch1 = np.ascontiguousarray(pairs[:, 0])
    ch2 = np.ascontiguousarray(pairs[:, 1])
    n_total = pairs.shape[0] * config.samples_per_slot
    if config.noise_sigma_volts > 0:
        noise1 = rng.normal(0.0, config.noise_sigma_volts, n_total)
        noise2 = rng.normal(0.0, config.noise_sigma_volts, n_total)
    else:
        noise1 = noise2 = None
    v1, v2 = kernels.render_trace(
        ch1,
        ch2,
        config.samples_per_slot,
        pulse_sample_count(config),
        config.full_scale_volts,
        noise1,
        noise2,
    )
    return Trace(config.sample_period_ns, v1, v2)


def simulate_transmission(
    alice_bits,
    alice_bases,
    bob_bases,
    eve=None,
    config: PipelineConfig | None = None,
    rng=None,
    table: EncodingTable = DEFAULT_TABLE,
) -> Trace:
    """Full chain for n slots: encode, optional tap, measure, digitize."""
    config = config or PipelineConfig()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    ch1, ch2 = slot_intensities(alice_bits, alice_bases, bob_bases, eve, config, rng, table)
    return detector_trace(np.column_stack([ch1, ch2]), config, rng)
