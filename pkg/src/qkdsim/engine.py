"""Four-phase key agreement: random bit/basis generation, transmission,
sifting by public basis comparison, sample-based eavesdropper detection,
and one-time-pad use of the established key.

Sessions are deterministic given their four seeds (Alice, Bob, eavesdropper,
channel). A completed session carries a transcript from which the standard
per-round tables (bits, bases, states, measurements, matches, key) can be
regenerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .adversary import Eavesdropper, EveConfig
from .optics import (
    Beam,
    LengthMismatch,
    PipelineConfig,
    Trace,
    alice_rotator,
    bob_rotator,
    detector_trace,
    inline_polarizer,
    laser_pulse,
    pbs_split,
    simulate_transmission,
)
from .polarization import DEFAULT_TABLE, Basis, EncodingTable, Polarization, Trit
from .trace_codec import (
    DecoderConfig,
    TraceFile,
    classify,
    decode_trace_array,
    segment,
)

__all__ = [
    "KEY_ESTABLISHED",
    "ABORTED",
    "SessionConfig",
    "AliceRecord",
    "BobRecord",
    "SiftResult",
    "SessionOutcome",
    "SessionTranscript",
    "TranscriptRow",
    "SlotResult",
    "IndexOutOfRange",
    "SampleTooLong",
    "KeyTooShort",
    "UnsiftableSession",
    "random_bits",
    "random_bases",
    "generate_random",
    "sift",
    "extract_key",
    "sample_compare",
    "guess_probability",
    "otp_encrypt",
    "otp_decrypt",
    "bits_from_string",
    "bits_to_string",
    "run_slot",
    "run_session",
]

KEY_ESTABLISHED = "key_established"
ABORTED = "aborted"


class IndexOutOfRange(IndexError):
    pass


class SampleTooLong(ValueError):
    pass


class KeyTooShort(ValueError):
    pass


class UnsiftableSession(RuntimeError):
    """Sifted key is not longer than the requested sample."""


@dataclass(frozen=True)
class SessionConfig:
    n_bits: int
    sample_len: int = 0
    abort_mismatch_threshold: float = 0.0
    seed_alice: int = 1
    seed_bob: int = 2

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("n_bits must be >= 1")
        if self.sample_len < 0:
            raise ValueError("sample_len must be >= 0")
        if not 0.0 <= self.abort_mismatch_threshold <= 1.0:
            raise ValueError("abort_mismatch_threshold must lie in [0, 1]")
        for name in ("seed_alice", "seed_bob"):
            if not 0 <= int(getattr(self, name)) < 2**64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer")


@dataclass(eq=False)
class AliceRecord:
    bits: np.ndarray
    bases: np.ndarray


@dataclass(eq=False)
class BobRecord:
    bases: np.ndarray
    measured: np.ndarray  # trit values, one per slot


@dataclass(eq=False)
class SiftResult:
    """Key material retained after basis comparison.

    In the undisturbed pipeline every retained measurement is certain, so
    bob_key is 0/1 valued; a beam-mode tap can leave uncertain values (2),
    which count as mismatches downstream and are surfaced as protocol errors
    if they survive into the final key.
    """

    matching_indices: np.ndarray
    alice_key: np.ndarray
    bob_key: np.ndarray

    def __len__(self) -> int:
        return int(self.matching_indices.shape[0])


@dataclass
class TranscriptRow:
    phase: str
    index: int
    alice_bit: int | None = None
    alice_basis: str | None = None
    state: str | None = None
    bob_basis: str | None = None
    trit: str | None = None
    kept: bool | None = None
    key_bit: int | None = None

    def as_dict(self) -> dict:
        return {
            "phase": self.phase,
            "index": self.index,
            "alice_bit": self.alice_bit,
            "alice_basis": self.alice_basis,
            "state": self.state,
            "bob_basis": self.bob_basis,
            "trit": self.trit,
            "kept": self.kept,
            "key_bit": self.key_bit,
        }


@dataclass
class SessionTranscript:
    """Phase-by-phase log; enough to rebuild the per-round tables."""

    rows: list[TranscriptRow] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    protocol_errors: list[dict] = field(default_factory=list)

    def rows_for_phase(self, phase: str) -> list[TranscriptRow]:
        return [r for r in self.rows if r.phase == phase]

    def as_dicts(self) -> list[dict]:
        return [r.as_dict() for r in self.rows]


@dataclass(eq=False)
class SessionOutcome:
    verdict: str
    final_key: np.ndarray
    sample_mismatch_rate: float
    transcript: SessionTranscript | None
    alice: AliceRecord
    bob: BobRecord
    sift: SiftResult
    sifted_mismatch_rate: float
    sample_len: int
    uncertain_after_sample: int
    bob_final_key: np.ndarray
    trace: Trace | None = None
    eve: Eavesdropper | None = None

    @property
    def established(self) -> bool:
        return self.verdict == KEY_ESTABLISHED


def random_bits(n: int, rng) -> np.ndarray:
    return rng.integers(0, 2, n, dtype=np.uint8)


def random_bases(n: int, rng) -> np.ndarray:
    return rng.integers(0, 2, n, dtype=np.uint8)


def generate_random(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """n uniform bits, then n uniform bases, from one seeded generator."""
    if n < 1:
        raise ValueError("n must be >= 1")
    bits = random_bits(n, rng)
    bases = random_bases(n, rng)
    return bits, bases


def sift(alice_bases, bob_bases) -> np.ndarray:
    """Indices (0-based, increasing) where the two basis choices agree."""
    a = np.asarray(alice_bases)
    b = np.asarray(bob_bases)
    if a.shape != b.shape:
        raise LengthMismatch("basis sequences differ in length")
    return np.nonzero(a == b)[0]


def extract_key(bits, matching_indices) -> np.ndarray:
    """Project a bit sequence onto the matching indices, in order."""
    arr = np.asarray(bits)
    idx = np.asarray(matching_indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= arr.shape[0]):
        raise IndexOutOfRange(f"index out of range for a length-{arr.shape[0]} sequence")
    return arr[idx]


def sample_compare(alice_key, bob_key, sample_len: int, threshold: float = 0.0):
    """Publicly compare the first sample_len bits of the two sifted keys.

    Returns (mismatch_rate, verdict, remaining_key) where remaining_key is
    the transmitter's key with the revealed sample removed (empty on abort).
    Uncertain values on the receiver side never equal a bit, so they count
    as mismatches.
    """
    a = np.asarray(alice_key)
    b = np.asarray(bob_key)
    if a.shape != b.shape:
        raise LengthMismatch("keys differ in length")
    if sample_len < 1:
        raise ValueError("sample_len must be >= 1")
    if sample_len >= a.shape[0]:
        raise SampleTooLong(f"sample_len {sample_len} >= key length {a.shape[0]}")
    mismatches = int((a[:sample_len] != b[:sample_len]).sum())
    rate = mismatches / sample_len
    if rate > threshold:
        return rate, ABORTED, a[:0]
    return rate, KEY_ESTABLISHED, a[sample_len:]


def guess_probability(key_len: int) -> float:
    """Chance of guessing a key of this length outright: 2**-key_len.

    Exact in binary floating point down to the subnormal range; longer keys
    underflow to 0.0.
    """
    if key_len < 0:
        raise ValueError("key_len must be >= 0")
    if key_len > 1100:
        return 0.0
    return math.ldexp(1.0, -int(key_len))


def bits_from_string(s: str) -> np.ndarray:
    if any(c not in "01" for c in s):
        raise ValueError(f"not a bit string: {s!r}")
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")


def bits_to_string(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def _key_bytes(key_bits, n_bytes: int) -> np.ndarray:
    key = np.asarray(key_bits, dtype=np.uint8)
    if key.shape[0] < 8 * n_bytes:
        raise KeyTooShort(f"need {8 * n_bytes} key bits, have {key.shape[0]}")
    return np.packbits(key[: 8 * n_bytes])


def otp_encrypt(message: bytes, key_bits) -> bytes:
    """XOR one-time pad; involutive, so decryption is the same operation."""
    data = np.frombuffer(bytes(message), dtype=np.uint8)
    return (data ^ _key_bytes(key_bits, data.shape[0])).tobytes()


otp_decrypt = otp_encrypt


@dataclass(eq=False)
class SlotResult:
    """Outcome of one interactive round through the object-level pipeline."""

    index: int
    state: Polarization
    state_name: str
    mean_ch1_v: float
    mean_ch2_v: float
    contrast: float
    trit: Trit
    trace: Trace


def run_slot(
    index: int,
    bit: int,
    alice_basis: Basis,
    bob_basis: Basis,
    *,
    eve: Eavesdropper | None = None,
    pipeline: PipelineConfig | None = None,
    decoder: DecoderConfig | None = None,
    rng=None,
    table: EncodingTable = DEFAULT_TABLE,
) -> SlotResult:
    """Send a single bit through the full chain and decode its slot.

    This is the stepwise path used by the interactive service and the replay
    printer; batch sessions go through the array pipeline instead.
    """
    pipeline = pipeline or PipelineConfig()
    decoder = decoder or DecoderConfig.for_pipeline(pipeline)
    if rng is None:
        rng = np.random.default_rng(pipeline.seed)
    beam = inline_polarizer(laser_pulse(pipeline))
    beam = alice_rotator(beam, bit, alice_basis, table)
    sent = beam.polarization
    if eve is not None:
        beam = eve.intercept(beam, table=table)
    beam = Beam(beam.intensity, beam.polarization.rotated(pipeline.drift_offset_deg))
    beam = bob_rotator(beam, bob_basis)
    ch1, ch2 = pbs_split(beam)
    if pipeline.photons_per_pulse is not None:
        m = pipeline.photons_per_pulse
        p_ch2 = ch2 / beam.intensity if beam.intensity > 0 else 0.0
        hits = int((rng.random(m) < p_ch2).sum())
        ch1, ch2 = (m - hits) / m, hits / m
    if pipeline.swap_channels:
        ch1, ch2 = ch2, ch1
    trace = detector_trace([(ch1, ch2)], pipeline, rng)
    stats = segment(TraceFile.from_trace(trace), decoder)[0]
    trit = classify(stats, decoder)
    return SlotResult(
        index=index,
        state=sent,
        state_name=table.state_name(sent),
        mean_ch1_v=stats.mean_ch1_v,
        mean_ch2_v=stats.mean_ch2_v,
        contrast=stats.contrast,
        trit=trit,
        trace=trace,
    )


def _build_transcript(
    abits, abases, bbases, trits, midx, sample_len, final_indices, final_bits, table
) -> SessionTranscript:
    tr = SessionTranscript()
    kept = np.zeros(abits.shape[0], dtype=bool)
    kept[midx] = True
    key_bit_by_index = {int(i): int(b) for i, b in zip(final_indices, final_bits)}
    basis_names = ("HV", "DAD")
    for i in range(abits.shape[0]):
        bit = int(abits[i])
        basis = int(abases[i])
        tr.rows.append(
            TranscriptRow(
                phase="sending",
                index=i,
                alice_bit=bit,
                alice_basis=basis_names[basis],
                state=table.state_name(table.angle(bit, Basis(basis))),
            )
        )
    for i in range(abits.shape[0]):
        tr.rows.append(
            TranscriptRow(
                phase="receiving",
                index=i,
                bob_basis=basis_names[int(bbases[i])],
                trit=Trit(int(trits[i])).char,
            )
        )
    for i in range(abits.shape[0]):
        tr.rows.append(TranscriptRow(phase="comparing", index=i, kept=bool(kept[i])))
    for i, b in key_bit_by_index.items():
        tr.rows.append(TranscriptRow(phase="key", index=i, key_bit=b))
    tr.events.append({"phase": "sift", "matching_indices": [int(i) for i in midx]})
    tr.events.append({"phase": "sample", "sample_len": int(sample_len)})
    return tr


def run_session(
    config: SessionConfig,
    pipeline: PipelineConfig | None = None,
    eve: "EveConfig | Eavesdropper | None" = None,
    decoder: DecoderConfig | None = None,
    *,
    record_transcript: bool = True,
    keep_trace: bool | None = None,
    table: EncodingTable = DEFAULT_TABLE,
) -> SessionOutcome:
    """Run the whole protocol in-process and return the joint outcome.

    Phases: both parties draw random bits/bases; the transmission is
    simulated and decoded into trits; bases are compared publicly; both
    keys are projected onto the matching indices; the first sample_len
    sifted bits are compared and discarded; the verdict follows from the
    mismatch rate against the abort threshold.
    """
    pipeline = pipeline or PipelineConfig()
    decoder = decoder or DecoderConfig.for_pipeline(pipeline)
    if keep_trace is None:
        keep_trace = record_transcript
    if isinstance(eve, EveConfig):
        eve = Eavesdropper(eve, record=record_transcript)

    alice_rng = np.random.default_rng(config.seed_alice)
    bob_rng = np.random.default_rng(config.seed_bob)
    channel_rng = np.random.default_rng(pipeline.seed)

    abits, abases = generate_random(config.n_bits, alice_rng)
    _, bbases = generate_random(config.n_bits, bob_rng)

    trace = simulate_transmission(abits, abases, bbases, eve, pipeline, channel_rng, table)
    trits = decode_trace_array(trace, decoder)

    midx = sift(abases, bbases)
    alice_key = extract_key(abits, midx).astype(np.int8)
    bob_key = extract_key(trits, midx).astype(np.int8)
    sifted = SiftResult(midx, alice_key, bob_key)

    k = config.sample_len
    if k > 0 and len(sifted) <= k:
        raise UnsiftableSession(
            f"sifted length {len(sifted)} must exceed sample_len {k}"
        )
    if k > 0:
        rate, verdict, _ = sample_compare(alice_key, bob_key, k, config.abort_mismatch_threshold)
    else:
        rate, verdict = 0.0, KEY_ESTABLISHED

    alice_final = alice_key[k:].astype(np.uint8)
    bob_final = bob_key[k:]
    uncertain_after = int((bob_final == Trit.UNCERTAIN.value).sum())
    sifted_rate = float((alice_key != bob_key).mean()) if len(sifted) else 0.0

    if verdict == KEY_ESTABLISHED:
        final_key = alice_final
        final_indices = midx[k:]
    else:
        final_key = alice_final[:0]
        final_indices = midx[:0]

    transcript = None
    if record_transcript:
        transcript = _build_transcript(
            abits, abases, bbases, trits, midx, k, final_indices, final_key, table
        )
        if k > 0:
            transcript.events[-1].update(
                {"mismatch_rate": rate, "mismatches": int(round(rate * k))}
            )
        transcript.events.append({"phase": "verdict", "verdict": verdict})
        if uncertain_after and verdict == KEY_ESTABLISHED:
            for pos in np.nonzero(bob_final == Trit.UNCERTAIN.value)[0]:
                transcript.protocol_errors.append(
                    {
                        "kind": "uncertain_in_final_key",
                        "sifted_position": int(pos + k),
                        "slot_index": int(midx[pos + k]),
                    }
                )

    return SessionOutcome(
        verdict=verdict,
        final_key=final_key,
        sample_mismatch_rate=rate,
        transcript=transcript,
        alice=AliceRecord(abits, abases),
        bob=BobRecord(bbases, trits),
        sift=sifted,
        sifted_mismatch_rate=sifted_rate,
        sample_len=k,
        uncertain_after_sample=uncertain_after,
        bob_final_key=bob_final,
        trace=trace if keep_trace else None,
        eve=eve,
    )
