"""Framed messages for the public classical channel.

Frame layout (all integers big-endian):

    +-------+---------+----------+----------------+------------------+
    | magic | version | msg_type | payload_len    | payload          |
    | 2B QK | 1B 0x01 | 1B       | 4B unsigned    | payload_len B    |
    +-------+---------+----------+----------------+------------------+

Payload encoding rules: a 4-byte big-endian count precedes every packed
sequence; bases and bits pack 8 per byte with the first element in the most
significant bit and zero padding; indices are 32-bit unsigned. payload_len
is capped at 16 MiB before any allocation.

Only bases, matching indices, and the sacrificed sample bits ever cross
this channel; non-sample key bits never appear in any message. The two
SIM_* messages are a simulation-only extension that stands in for the
optical path when the endpoints run as separate processes; they are not
part of the protocol proper and leak the measured trits by design.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MAGIC",
    "PROTOCOL_VERSION",
    "MAX_PAYLOAD",
    "Hello",
    "BasisAnnounce",
    "MatchIndices",
    "SampleBits",
    "Verdict",
    "Abort",
    "SimBases",
    "SimTrits",
    "WireError",
    "BadMagic",
    "UnsupportedVersion",
    "UnknownType",
    "PayloadTooLarge",
    "MalformedPayload",
    "NeedMoreData",
    "encode_message",
    "decode_message",
    "REASON_SAMPLE_MISMATCH",
    "REASON_PROTOCOL_VIOLATION",
    "REASON_OPERATOR_ABORT",
]

MAGIC = b"QK"
PROTOCOL_VERSION = 1
MAX_PAYLOAD = 16 * 1024 * 1024
_HEADER = struct.Struct(">2sBBI")

REASON_SAMPLE_MISMATCH = 1
REASON_PROTOCOL_VIOLATION = 2
REASON_OPERATOR_ABORT = 3


class WireError(ValueError):
    pass


class BadMagic(WireError):
    pass


class UnsupportedVersion(WireError):
    pass


class UnknownType(WireError):
    pass


class PayloadTooLarge(WireError):
    pass


class MalformedPayload(WireError):
    pass


class NeedMoreData(Exception):
    """Buffer holds a prefix of a frame; `needed` more bytes at minimum."""

    def __init__(self, needed: int):
        self.needed = needed
        super().__init__(f"need at least {needed} more bytes")


@dataclass(frozen=True)
class Hello:
    protocol_version: int
    n_bits: int


@dataclass(frozen=True)
class BasisAnnounce:
    bases: tuple  # 0 = HV, 1 = DAD


@dataclass(frozen=True)
class MatchIndices:
    indices: tuple


@dataclass(frozen=True)
class SampleBits:
    start: int
    bits: tuple


@dataclass(frozen=True)
class Verdict:
    passed: bool
    mismatch_rate_milli: int


@dataclass(frozen=True)
class Abort:
    reason_code: int


@dataclass(frozen=True)
class SimBases:
    bases: tuple


@dataclass(frozen=True)
class SimTrits:
    trits: tuple


_TYPE_HELLO = 0x01
_TYPE_BASES = 0x02
_TYPE_INDICES = 0x03
_TYPE_SAMPLE = 0x04
_TYPE_VERDICT = 0x05
_TYPE_ABORT = 0x06
_TYPE_SIM_BASES = 0x10
_TYPE_SIM_TRITS = 0x11


def _pack_bitseq(values) -> bytes:
    vals = np.asarray(values, dtype=np.uint8)
    if vals.size and vals.max() > 1:
        raise WireError("bit sequence must be 0/1 valued")
    return struct.pack(">I", vals.size) + np.packbits(vals).tobytes()


def _unpack_bitseq(payload: memoryview, offset: int) -> tuple[tuple, int]:
    if len(payload) - offset < 4:
        raise MalformedPayload("truncated sequence count")
    (count,) = struct.unpack_from(">I", payload, offset)
    offset += 4
    nbytes = (count + 7) // 8
    if len(payload) - offset < nbytes:
        raise MalformedPayload("bit sequence shorter than its count")
    raw = np.frombuffer(payload, dtype=np.uint8, count=nbytes, offset=offset)
    bits = np.unpackbits(raw)[:count]
    if count % 8 and np.unpackbits(raw)[count:].any():
        raise MalformedPayload("nonzero padding bits")
    return tuple(int(b) for b in bits), offset + nbytes


def encode_message(msg) -> bytes:
    """Canonical frame bytes for a message."""
    if isinstance(msg, Hello):
        mtype, payload = _TYPE_HELLO, struct.pack(">II", msg.protocol_version, msg.n_bits)
    elif isinstance(msg, BasisAnnounce):
        mtype, payload = _TYPE_BASES, _pack_bitseq(msg.bases)
    elif isinstance(msg, MatchIndices):
        idx = list(msg.indices)
        if any(i < 0 or i > 0xFFFFFFFF for i in idx):
            raise WireError("indices must fit in 32 bits")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise WireError("indices must be strictly increasing")
        mtype = _TYPE_INDICES
        payload = struct.pack(">I", len(idx)) + struct.pack(f">{len(idx)}I", *idx)
    elif isinstance(msg, SampleBits):
        mtype, payload = _TYPE_SAMPLE, struct.pack(">I", msg.start) + _pack_bitseq(msg.bits)
    elif isinstance(msg, Verdict):
        mtype, payload = _TYPE_VERDICT, struct.pack(">BI", 1 if msg.passed else 0, msg.mismatch_rate_milli)
    elif isinstance(msg, Abort):
        mtype, payload = _TYPE_ABORT, struct.pack(">I", msg.reason_code)
    elif isinstance(msg, SimBases):
        mtype, payload = _TYPE_SIM_BASES, _pack_bitseq(msg.bases)
    elif isinstance(msg, SimTrits):
        trits = bytes(msg.trits)
        if any(t > 2 for t in trits):
            raise WireError("trits must be 0, 1 or 2")
        mtype, payload = _TYPE_SIM_TRITS, struct.pack(">I", len(trits)) + trits
    else:
        raise WireError(f"not a wire message: {type(msg).__name__}")
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds the 16 MiB cap")
    return _HEADER.pack(MAGIC, PROTOCOL_VERSION, mtype, len(payload)) + payload


def decode_message(buf) -> tuple[object, int]:
    """Decode one frame from the front of `buf`; returns (message, consumed).

    Raises NeedMoreData when the buffer holds only a prefix of a frame, and
    a WireError subclass for anything malformed. Never allocates more than
    the 16 MiB payload cap.
    """
    view = memoryview(buf)
    if len(view) >= 1 and view[0] != MAGIC[0]:
        raise BadMagic("frame does not start with the QK magic")
    if len(view) >= 2 and view[1] != MAGIC[1]:
        raise BadMagic("frame does not start with the QK magic")
    if len(view) < _HEADER.size:
        raise NeedMoreData(_HEADER.size - len(view))
    _, version, mtype, plen = _HEADER.unpack_from(view, 0)
    if version != PROTOCOL_VERSION:
        raise UnsupportedVersion(f"protocol version {version} unsupported")
    if plen > MAX_PAYLOAD:
        raise PayloadTooLarge(f"declared payload of {plen} bytes exceeds the 16 MiB cap")
    total = _HEADER.size + plen
    if len(view) < total:
        raise NeedMoreData(total - len(view))
    payload = view[_HEADER.size : total]

    if mtype == _TYPE_HELLO:
        if plen != 8:
            raise MalformedPayload(f"hello payload must be 8 bytes, got {plen}")
        pv, n_bits = struct.unpack(">II", payload)
        msg = Hello(pv, n_bits)
    elif mtype in (_TYPE_BASES, _TYPE_SIM_BASES):
        bases, end = _unpack_bitseq(payload, 0)
        if end != plen:
            raise MalformedPayload("trailing bytes after basis sequence")
        msg = BasisAnnounce(bases) if mtype == _TYPE_BASES else SimBases(bases)
    elif mtype == _TYPE_INDICES:
        if plen < 4:
            raise MalformedPayload("truncated index count")
        (count,) = struct.unpack_from(">I", payload, 0)
        if plen != 4 + 4 * count:
            raise MalformedPayload(f"index count {count} disagrees with payload length {plen}")
        idx = struct.unpack_from(f">{count}I", payload, 4)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise MalformedPayload("indices not strictly increasing")
        msg = MatchIndices(idx)
    elif mtype == _TYPE_SAMPLE:
        if plen < 4:
            raise MalformedPayload("truncated sample start")
        (start,) = struct.unpack_from(">I", payload, 0)
        bits, end = _unpack_bitseq(payload, 4)
        if end != plen:
            raise MalformedPayload("trailing bytes after sample bits")
        msg = SampleBits(start, bits)
    elif mtype == _TYPE_VERDICT:
        if plen != 5:
            raise MalformedPayload(f"verdict payload must be 5 bytes, got {plen}")
        passed, milli = struct.unpack(">BI", payload)
        if passed > 1:
            raise MalformedPayload("verdict flag must be 0 or 1")
        msg = Verdict(bool(passed), milli)
    elif mtype == _TYPE_ABORT:
        if plen != 4:
            raise MalformedPayload(f"abort payload must be 4 bytes, got {plen}")
        (reason,) = struct.unpack(">I", payload)
        msg = Abort(reason)
    elif mtype == _TYPE_SIM_TRITS:
        if plen < 4:
            raise MalformedPayload("truncated trit count")
        (count,) = struct.unpack_from(">I", payload, 0)
        if plen != 4 + count:
            raise MalformedPayload(f"trit count {count} disagrees with payload length {plen}")
        trits = bytes(payload[4:])
        if any(t > 2 for t in trits):
            raise MalformedPayload("trit values must be 0, 1 or 2")
        msg = SimTrits(tuple(trits))
    else:
        raise UnknownType(f"unknown message type 0x{mtype:02x}")
    return msg, total
