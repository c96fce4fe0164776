"""Networked Alice/Bob endpoints over a reliable ordered byte stream.

Message order per session:

    Alice -> Bob   Hello{version, n_bits}
    (simulation extension, when both sides enable it:
        Bob -> Alice   SimBases     -- Bob's bases, so Alice can run the
        Alice -> Bob   SimTrits     -- optical chain and return his readout)
    Bob -> Alice   BasisAnnounce
    Alice -> Bob   MatchIndices
    Alice -> Bob   SampleBits      -- first sample_len sifted bits
    Bob -> Alice   Verdict{pass, mismatch_rate_milli}
    either side    Abort{reason}   -- at any point

The SIM_* extension exists because two separate processes have no shared
optical path; it leaks Bob's readout on the classical channel by design and
must be disabled when a real quantum channel is present (then Bob passes his
own measured trits in directly).

Both endpoints return an EndpointOutcome built only from information both
sides share, so a clean loopback run produces field-for-field identical
outcomes on the two sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adversary import Eavesdropper, EveConfig
from .engine import (
    ABORTED,
    KEY_ESTABLISHED,
    SessionConfig,
    UnsiftableSession,
    extract_key,
    generate_random,
    sift,
)
from .optics import PipelineConfig, simulate_transmission
from .trace_codec import DecoderConfig, decode_trace_array
from .wire import (
    Abort,
    BasisAnnounce,
    Hello,
    MatchIndices,
    NeedMoreData,
    PROTOCOL_VERSION,
    REASON_PROTOCOL_VIOLATION,
    SampleBits,
    SimBases,
    SimTrits,
    Verdict,
    WireError,
    decode_message,
    encode_message,
)

__all__ = [
    "EndpointOutcome",
    "MessageChannel",
    "ProtocolViolation",
    "ProtocolAborted",
    "TransportClosed",
    "VersionMismatch",
    "alice_endpoint",
    "bob_endpoint",
]

_RECV_CHUNK = 65536


class ProtocolViolation(RuntimeError):
    pass


class TransportClosed(ConnectionError):
    pass


class VersionMismatch(RuntimeError):
    pass


class ProtocolAborted(RuntimeError):
    """Peer sent an Abort frame."""

    def __init__(self, reason_code: int):
        self.reason_code = reason_code
        super().__init__(f"peer aborted the session (reason {reason_code})")


@dataclass
class EndpointOutcome:
    """The session result as visible to both parties.

    Secret per-side state (bit sequences, measured trits, transcripts) is
    carried in `local`, which is excluded from equality.
    """

    verdict: str
    final_key: tuple
    mismatch_rate_milli: int
    n_bits: int
    sifted_len: int
    sample_len: int
    matching_indices: tuple
    protocol_version: int = PROTOCOL_VERSION
    local: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def established(self) -> bool:
        return self.verdict == KEY_ESTABLISHED


class MessageChannel:
    """Framed wire messages over a socket-like transport (sendall/recv)."""

    def __init__(self, sock):
        self._sock = sock
        self._buf = bytearray()

    def send(self, msg) -> None:
        self._sock.sendall(encode_message(msg))

    def recv(self):
        while True:
            if self._buf:
                try:
                    msg, used = decode_message(self._buf)
                except NeedMoreData:
                    pass
                else:
                    del self._buf[:used]
                    return msg
            chunk = self._sock.recv(_RECV_CHUNK)
            if not chunk:
                raise TransportClosed("peer closed the transport mid-session")
            self._buf.extend(chunk)

    def expect(self, msg_type):
        """Receive the next message, requiring it to be of `msg_type`."""
        try:
            msg = self.recv()
        except WireError as exc:
            raise ProtocolViolation(f"undecodable frame from peer: {exc}") from exc
        if isinstance(msg, Abort):
            raise ProtocolAborted(msg.reason_code)
        if not isinstance(msg, msg_type):
            self.abort(REASON_PROTOCOL_VIOLATION)
            raise ProtocolViolation(
                f"expected {msg_type.__name__}, peer sent {type(msg).__name__}"
            )
        return msg

    def abort(self, reason_code: int) -> None:
        try:
            self.send(Abort(reason_code))
        except OSError:
            pass


def _violation(ch: MessageChannel, detail: str) -> ProtocolViolation:
    ch.abort(REASON_PROTOCOL_VIOLATION)
    return ProtocolViolation(detail)


def alice_endpoint(
    sock,
    config: SessionConfig,
    pipeline: PipelineConfig | None = None,
    eve: "EveConfig | Eavesdropper | None" = None,
    decoder: DecoderConfig | None = None,
    *,
    simulate_quantum: bool = True,
    bits=None,
    bases=None,
    table=None,
) -> EndpointOutcome:
    """Drive the transmitter side of a networked session.

    Bits and bases are drawn from seed_alice unless preset sequences are
    passed in (replay mode).
    """
    from .polarization import DEFAULT_TABLE

    table = table or DEFAULT_TABLE
    pipeline = pipeline or PipelineConfig()
    decoder = decoder or DecoderConfig.for_pipeline(pipeline)
    if isinstance(eve, EveConfig):
        eve = Eavesdropper(eve)
    ch = MessageChannel(sock)
    n = config.n_bits
    if bits is None or bases is None:
        rng = np.random.default_rng(config.seed_alice)
        gen_bits, gen_bases = generate_random(n, rng)
        bits = gen_bits if bits is None else bits
        bases = gen_bases if bases is None else bases
    abits = np.asarray(bits, dtype=np.uint8)
    abases = np.asarray(bases, dtype=np.uint8)
    if abits.shape[0] != n or abases.shape[0] != n:
        raise ValueError(f"preset bits/bases must hold {n} entries")

    ch.send(Hello(PROTOCOL_VERSION, n))

    trits = None
    if simulate_quantum:
        sim = ch.expect(SimBases)
        if len(sim.bases) != n:
            raise _violation(ch, f"peer sent {len(sim.bases)} simulation bases, expected {n}")
        bob_bases = np.asarray(sim.bases, dtype=np.uint8)
        channel_rng = np.random.default_rng(pipeline.seed)
        trace = simulate_transmission(abits, abases, bob_bases, eve, pipeline, channel_rng, table)
        trits = decode_trace_array(trace, decoder)
        ch.send(SimTrits(tuple(int(t) for t in trits)))

    announce = ch.expect(BasisAnnounce)
    if len(announce.bases) != n:
        raise _violation(ch, f"peer announced {len(announce.bases)} bases, expected {n}")
    bob_bases = np.asarray(announce.bases, dtype=np.uint8)

    midx = sift(abases, bob_bases)
    alice_key = extract_key(abits, midx)
    ch.send(MatchIndices(tuple(int(i) for i in midx)))

    k = config.sample_len
    if k > 0 and alice_key.shape[0] <= k:
        ch.abort(REASON_PROTOCOL_VIOLATION)
        raise UnsiftableSession(f"sifted length {alice_key.shape[0]} must exceed sample_len {k}")
    ch.send(SampleBits(0, tuple(int(b) for b in alice_key[:k])))

    verdict_msg = ch.expect(Verdict)
    established = verdict_msg.passed
    final = alice_key[k:] if established else alice_key[:0]
    return EndpointOutcome(
        verdict=KEY_ESTABLISHED if established else ABORTED,
        final_key=tuple(int(b) for b in final),
        mismatch_rate_milli=verdict_msg.mismatch_rate_milli,
        n_bits=n,
        sifted_len=int(midx.shape[0]),
        sample_len=k,
        matching_indices=tuple(int(i) for i in midx),
        local={"bits": abits, "bases": abases, "trits": trits, "eve": eve},
    )


def bob_endpoint(
    sock,
    config: SessionConfig,
    *,
    measured=None,
    bases=None,
    simulate_quantum: bool = True,
) -> EndpointOutcome:
    """Drive the receiver side of a networked session.

    Bases are drawn from seed_bob unless preset. With simulate_quantum the
    measured trits come back over the SIM_* extension; otherwise the caller
    must supply `measured` (one trit value per slot) from the actual
    detector readout.
    """
    ch = MessageChannel(sock)
    hello = ch.expect(Hello)
    if hello.protocol_version != PROTOCOL_VERSION:
        ch.abort(REASON_PROTOCOL_VIOLATION)
        raise VersionMismatch(
            f"peer speaks protocol version {hello.protocol_version}, expected {PROTOCOL_VERSION}"
        )
    n = config.n_bits
    if hello.n_bits != n:
        raise _violation(ch, f"peer session has {hello.n_bits} bits, expected {n}")

    if bases is None:
        rng = np.random.default_rng(config.seed_bob)
        _, bases = generate_random(n, rng)
    bases = np.asarray(bases, dtype=np.uint8)
    if bases.shape[0] != n:
        raise ValueError(f"preset bases must hold {n} entries")

    if simulate_quantum:
        ch.send(SimBases(tuple(int(b) for b in bases)))
        sim = ch.expect(SimTrits)
        if len(sim.trits) != n:
            raise _violation(ch, f"peer sent {len(sim.trits)} trits, expected {n}")
        measured = np.asarray(sim.trits, dtype=np.int8)
    elif measured is None:
        raise ValueError("measured trits are required when simulate_quantum is off")
    else:
        measured = np.asarray(measured, dtype=np.int8)
        if measured.shape[0] != n:
            raise ValueError(f"measured must hold {n} trits")

    ch.send(BasisAnnounce(tuple(int(b) for b in bases)))

    idx_msg = ch.expect(MatchIndices)
    midx = np.asarray(idx_msg.indices, dtype=np.int64)
    if midx.size and midx.max() >= n:
        raise _violation(ch, "matching index out of range")
    bob_key = extract_key(measured, midx)

    sample = ch.expect(SampleBits)
    k = len(sample.bits)
    if sample.start != 0:
        raise _violation(ch, "sample must start at sifted index 0")
    if k > 0 and bob_key.shape[0] <= k:
        raise _violation(ch, f"sample of {k} bits not shorter than sifted key {bob_key.shape[0]}")
    if k > 0:
        mism = int((np.asarray(sample.bits, dtype=np.int8) != bob_key[:k]).sum())
        rate = mism / k
    else:
        rate = 0.0
    passed = rate <= config.abort_mismatch_threshold
    milli = int(round(rate * 1000))
    ch.send(Verdict(passed, milli))

    final = bob_key[k:] if passed else bob_key[:0]
    return EndpointOutcome(
        verdict=KEY_ESTABLISHED if passed else ABORTED,
        final_key=tuple(int(b) for b in final),
        mismatch_rate_milli=milli,
        n_bits=n,
        sifted_len=int(midx.shape[0]),
        sample_len=k,
        matching_indices=tuple(int(i) for i in midx),
        local={"bases": bases, "trits": measured},
    )
