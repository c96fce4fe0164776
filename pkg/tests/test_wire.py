import numpy as np
import pytest

from qkdsim.wire import (
    Abort,
    BadMagic,
    BasisAnnounce,
    Hello,
    MalformedPayload,
    MatchIndices,
    NeedMoreData,
    PayloadTooLarge,
    SampleBits,
    SimBases,
    SimTrits,
    UnknownType,
    UnsupportedVersion,
    Verdict,
    WireError,
    decode_message,
    encode_message,
)


class TestByteLayout:
    def test_hello_exact_bytes(self):
        frame = encode_message(Hello(1, 24))
        assert frame == bytes.fromhex("514b0101" + "00000008" + "00000001" + "00000018")

    def test_basis_announce_eight_hv(self):
        frame = encode_message(BasisAnnounce((0,) * 8))
        assert frame == bytes.fromhex("514b0102" + "00000005" + "00000008" + "00")

    def test_match_indices_1_4_6(self):
        frame = encode_message(MatchIndices((1, 4, 6)))
        payload = "00000003" + "00000001" + "00000004" + "00000006"
        assert frame == bytes.fromhex("514b0103" + "00000010" + payload)

    def test_bit_packing_is_msb_first(self):
        frame = encode_message(BasisAnnounce((1, 0, 0, 0, 0, 0, 0, 0, 1)))
        # count 9, then 0b10000000, 0b10000000 >> pad
        assert frame[-2:] == bytes([0b10000000, 0b10000000])


def random_message(rng) -> object:
    kind = rng.integers(0, 8)
    if kind == 0:
        return Hello(1, int(rng.integers(0, 2**32)))
    if kind == 1:
        return BasisAnnounce(tuple(int(b) for b in rng.integers(0, 2, rng.integers(0, 64))))
    if kind == 2:
        n = int(rng.integers(0, 32))
        idx = np.sort(rng.choice(2**20, n, replace=False))
        return MatchIndices(tuple(int(i) for i in idx))
    if kind == 3:
        return SampleBits(int(rng.integers(0, 1000)),
                          tuple(int(b) for b in rng.integers(0, 2, rng.integers(0, 64))))
    if kind == 4:
        return Verdict(bool(rng.integers(0, 2)), int(rng.integers(0, 1001)))
    if kind == 5:
        return Abort(int(rng.integers(1, 4)))
    if kind == 6:
        return SimBases(tuple(int(b) for b in rng.integers(0, 2, rng.integers(0, 64))))
    return SimTrits(tuple(int(t) for t in rng.integers(0, 3, rng.integers(0, 64))))


class TestRoundTrip:
    def test_randomized_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            msg = random_message(rng)
            frame = encode_message(msg)
            decoded, used = decode_message(frame)
            assert decoded == msg
            assert used == len(frame)

    def test_concatenated_frames(self):
        rng = np.random.default_rng(8)
        msgs = [random_message(rng) for _ in range(20)]
        stream = b"".join(encode_message(m) for m in msgs)
        out = []
        while stream:
            msg, used = decode_message(stream)
            out.append(msg)
            stream = stream[used:]
        assert out == msgs

    def test_every_prefix_reports_need_more_data(self):
        frame = encode_message(MatchIndices((3, 5, 9)))
        for cut in range(len(frame)):
            with pytest.raises(NeedMoreData) as err:
                decode_message(frame[:cut])
            assert err.value.needed >= 1
            assert cut + err.value.needed <= len(frame)


class TestErrors:
    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            decode_message(b"\x00" + bytes(16))
        with pytest.raises(BadMagic):
            decode_message(b"QX" + bytes(16))

    def test_unsupported_version(self):
        frame = bytearray(encode_message(Hello(1, 3)))
        frame[2] = 2
        with pytest.raises(UnsupportedVersion):
            decode_message(bytes(frame))

    def test_unknown_type(self):
        frame = bytearray(encode_message(Abort(1)))
        frame[3] = 0x7F
        with pytest.raises(UnknownType):
            decode_message(bytes(frame))

    def test_payload_too_large_before_allocation(self):
        header = b"QK" + bytes([1, 2]) + (2**30).to_bytes(4, "big")
        with pytest.raises(PayloadTooLarge):
            decode_message(header)

    def test_non_increasing_indices_rejected(self):
        good = encode_message(MatchIndices((1, 2)))
        bad = bytearray(good)
        bad[-4:] = (1).to_bytes(4, "big")  # indices become (1, 1)
        with pytest.raises(MalformedPayload):
            decode_message(bytes(bad))
        with pytest.raises(WireError):
            encode_message(MatchIndices((4, 1)))

    def test_count_length_disagreement(self):
        frame = bytearray(encode_message(SimTrits((0, 1, 2))))
        frame[8:12] = (9).to_bytes(4, "big")  # count says 9, payload has 3
        with pytest.raises(MalformedPayload):
            decode_message(bytes(frame))

    def test_nonzero_padding_rejected(self):
        frame = bytearray(encode_message(BasisAnnounce((1,))))
        frame[-1] |= 0x01  # flip a pad bit
        with pytest.raises(MalformedPayload):
            decode_message(bytes(frame))

    def test_bad_trit_value(self):
        frame = bytearray(encode_message(SimTrits((0, 1))))
        frame[-1] = 7
        with pytest.raises(MalformedPayload):
            decode_message(bytes(frame))


class TestFuzz:
    def test_random_bytes_never_crash(self):
        rng = np.random.default_rng(99)
        for _ in range(10_000):
            blob = rng.integers(0, 256, int(rng.integers(0, 512)), dtype=np.uint8).tobytes()
            try:
                decode_message(blob)
            except (WireError, NeedMoreData):
                pass

    def test_megabyte_blobs_never_crash_or_overallocate(self):
        rng = np.random.default_rng(101)
        for _ in range(5):
            blob = rng.integers(0, 256, 1024 * 1024, dtype=np.uint8).tobytes()
            try:
                decode_message(blob)
            except (WireError, NeedMoreData):
                pass

    def test_mutated_valid_frames_never_crash(self):
        rng = np.random.default_rng(100)
        for _ in range(2_000):
            frame = bytearray(encode_message(random_message(rng)))
            for _ in range(int(rng.integers(1, 4))):
                frame[int(rng.integers(0, len(frame)))] = int(rng.integers(0, 256))
            try:
                decode_message(bytes(frame))
            except (WireError, NeedMoreData):
                pass
