"""Intercept-resend eavesdropper.

Eve sits between the two rotators. On a tapped slot she measures in a
uniformly random basis and re-emits the collapsed eigenstate at full
intensity, so her presence leaves no power signature, only state damage.

Two measurement models:
  * beam: the whole pulse collapses to one eigenstate of her basis, chosen
    with Malus probability. Downstream, a wrong-basis tap turns a certain
    slot into a 50/50 split at Bob's detectors.
  * photon(k): she samples k photons off the pulse, takes the majority
    outcome (coin flip on ties) and resends that eigenstate. Small k models
    the low-information tap that stays close to undetectable per slot.

The closed-form error laws for the sifted key (tap fraction f):
  expected QBER f/4 (wrong basis with probability 1/2, then the receiver's
  single-photon remeasurement flips the bit with probability 1/2), and
  detection probability 1 - (1 - f/4)^sample_len under a zero-tolerance
  sample comparison. These hold in the single-photon pipeline regime; the
  beam pipeline shows the tap as uncertain slots instead, which a sample
  comparison counts as mismatches at rate f/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optics import Beam, eve_luts
from .polarization import DEFAULT_TABLE, Basis, EncodingTable, transmission_fraction
from . import _kernels as kernels

__all__ = [
    "EveConfig",
    "EveSlot",
    "Eavesdropper",
    "expected_qber",
    "detection_probability",
]


@dataclass(frozen=True)
class EveConfig:
    tap_fraction: float = 1.0
    seed_eve: int = 0
    mode: str = "beam"
    photon_count: int = 1

    def __post_init__(self):
        if not 0.0 <= self.tap_fraction <= 1.0:
            raise ValueError("tap_fraction must lie in [0, 1]")
        if self.mode not in ("beam", "photon"):
            raise ValueError(f"mode must be 'beam' or 'photon', got {self.mode!r}")
        if self.mode == "photon" and self.photon_count < 1:
            raise ValueError("photon_count must be >= 1 in photon mode")
        if not 0 <= int(self.seed_eve) < 2**64:
            raise ValueError("seed_eve must be a 64-bit unsigned integer")


@dataclass
class EveSlot:
    """One transcript row: what Eve did on one slot."""

    index: int
    tapped: bool
    basis: Basis | None
    bit: int | None


class Eavesdropper:
    """One eavesdropper instance per session; owns its seeded generator.

    The per-slot intercept() path and the batch apply_batch() path draw in
    different orders, so each is reproducible for a given seed but they are
    not stream-equivalent to each other.
    """

    def __init__(self, config: EveConfig | None = None, record: bool = True):
        self.config = config or EveConfig()
        self.record = record
        self._rng = np.random.default_rng(self.config.seed_eve)
        self._next_index = 0
        self.transcript: list[EveSlot] = []
        # Batch results from the most recent apply_batch call.
        self.last_tapped: np.ndarray | None = None
        self.last_bases: np.ndarray | None = None
        self.last_bits: np.ndarray | None = None

    def intercept(self, beam: Beam, rng=None, table: EncodingTable = DEFAULT_TABLE) -> Beam:
        """Tap one pulse (or pass it through) and log the slot."""
        if not beam.is_polarized:
            raise ValueError("intercept requires a polarized beam")
        rng = rng or self._rng
        index = self._next_index
        self._next_index += 1
        tapped = rng.random() < self.config.tap_fraction
        if not tapped:
            if self.record:
                self.transcript.append(EveSlot(index, False, None, None))
            return beam
        basis = Basis(int(rng.integers(0, 2)))
        p_zero = transmission_fraction(beam.polarization, table.angle(0, basis))
        if self.config.mode == "beam":
            bit = 0 if rng.random() < p_zero else 1
        else:
            k = self.config.photon_count
            zeros = int((rng.random(k) < p_zero).sum())
            if 2 * zeros > k:
                bit = 0
            elif 2 * zeros < k:
                bit = 1
            else:
                bit = 0 if rng.random() < 0.5 else 1
        if self.record:
            self.transcript.append(EveSlot(index, True, basis, bit))
        return Beam(1.0, table.angle(bit, basis))

    def apply_batch(self, states: np.ndarray, table: EncodingTable = DEFAULT_TABLE) -> np.ndarray:
        """Intercept a whole transmission of state indices at once.

        Draw order: tap decisions, then basis choices, then measurement
        draws (and tie-break draws in photon mode), each as one block.
        """
        n = states.shape[0]
        tap = (self._rng.random(n) < self.config.tap_fraction).astype(np.uint8)
        ebases = self._rng.integers(0, 2, n, dtype=np.uint8)
        p_zero = eve_luts(table)
        if self.config.mode == "beam":
            u = self._rng.random(n)
            out, bits = kernels.eve_pass_beam(states, tap, ebases, u, p_zero)
        else:
            u2 = self._rng.random((n, self.config.photon_count))
            tie = self._rng.random(n)
            out, bits = kernels.eve_pass_photon(states, tap, ebases, u2, tie, p_zero)
        self.last_tapped = tap
        self.last_bases = ebases
        self.last_bits = bits
        if self.record:
            start = self._next_index
            for i in range(n):
                if tap[i]:
                    self.transcript.append(
                        EveSlot(start + i, True, Basis(int(ebases[i])), int(bits[i]))
                    )
                else:
                    self.transcript.append(EveSlot(start + i, False, None, None))
        self._next_index += n
        return out

    def transcript_dicts(self) -> list[dict]:
        return [
            {
                "index": row.index,
                "tapped": row.tapped,
                "basis": row.basis.name if row.basis is not None else None,
                "bit": row.bit,
            }
            for row in self.transcript
        ]


def expected_qber(tap_fraction: float) -> float:
    """Expected sifted-key error rate under intercept-resend at this tap."""
    if not 0.0 <= tap_fraction <= 1.0:
        raise ValueError("tap_fraction must lie in [0, 1]")
    return tap_fraction / 4.0


def detection_probability(tap_fraction: float, sample_len: int) -> float:
    """Probability a zero-tolerance sample comparison catches the tap."""
    if sample_len < 0:
        raise ValueError("sample_len must be >= 0")
    return 1.0 - (1.0 - expected_qber(tap_fraction)) ** sample_len
