import socket
import threading

import numpy as np

from qkdsim.endpoints import (
    EndpointOutcome,
    MessageChannel,
    ProtocolViolation,
    TransportClosed,
    VersionMismatch,
    alice_endpoint,
    bob_endpoint,
)
from qkdsim.engine import SessionConfig, bits_from_string, generate_random
from qkdsim.optics import PipelineConfig, simulate_transmission
from qkdsim.trace_codec import DecoderConfig, decode_trace_array
from qkdsim.wire import (
    Abort,
    BasisAnnounce,
    Hello,
    MatchIndices,
    SampleBits,
    SimBases,
    Verdict,
    decode_message,
    encode_message,
)

PAPER_KEY = "110110001001001101110100"
PAPER_IDX = [1, 4, 6, 7, 8, 10, 12, 13, 14, 15, 16, 19, 20, 22, 23]
PAPER_FINAL = "110010001101000"


def run_pair(alice_fn, bob_fn, timeout=10.0):
    """Run both endpoint callables over a socketpair; re-raise their errors."""
    a_sock, b_sock = socket.socketpair()
    results, errors = {}, {}

    def runner(name, fn, sock):
        try:
            results[name] = fn(sock)
        except BaseException as exc:  # re-raised in the test thread
            errors[name] = exc
        finally:
            sock.close()

    threads = [
        threading.Thread(target=runner, args=("alice", alice_fn, a_sock)),
        threading.Thread(target=runner, args=("bob", bob_fn, b_sock)),
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout)
        assert not t.is_alive(), "endpoint deadlocked"
    return results, errors


def noiseless(**kw) -> PipelineConfig:
    kw.setdefault("noise_sigma_volts", 0.0)
    kw.setdefault("samples_per_slot", 8)
    return PipelineConfig(**kw)


class TestLoopback:
    def test_paper_vector_replay(self):
        n = 24
        bits = bits_from_string(PAPER_KEY)
        abases = np.zeros(n, dtype=np.uint8)
        bbases = np.ones(n, dtype=np.uint8)
        bbases[PAPER_IDX] = 0
        cfg = SessionConfig(n_bits=n, sample_len=0)
        results, errors = run_pair(
            lambda s: alice_endpoint(s, cfg, noiseless(), bits=bits, bases=abases),
            lambda s: bob_endpoint(s, cfg, bases=bbases),
        )
        assert not errors
        for outcome in results.values():
            assert outcome.established
            assert "".join(str(b) for b in outcome.final_key) == PAPER_FINAL
        assert list(results["alice"].matching_indices) == PAPER_IDX

    def test_outcomes_field_for_field_identical(self):
        for seed in (0, 1, 2, 3):
            cfg = SessionConfig(
                n_bits=128, sample_len=16, seed_alice=seed * 2 + 1, seed_bob=seed * 2 + 2
            )
            results, errors = run_pair(
                lambda s: alice_endpoint(s, cfg, noiseless(seed=seed)),
                lambda s: bob_endpoint(s, cfg),
            )
            assert not errors
            assert results["alice"] == results["bob"]
            assert isinstance(results["alice"], EndpointOutcome)

    def test_hardware_path_without_sim_extension(self):
        # Bob brings his own detector readout; no SIM_* frames on the wire.
        cfg = SessionConfig(n_bits=64, sample_len=8, seed_alice=5, seed_bob=6)
        pipeline = noiseless(seed=9)
        abits, abases = generate_random(cfg.n_bits, np.random.default_rng(cfg.seed_alice))
        _, bbases = generate_random(cfg.n_bits, np.random.default_rng(cfg.seed_bob))
        trace = simulate_transmission(abits, abases, bbases, None, pipeline,
                                      np.random.default_rng(pipeline.seed))
        trits = decode_trace_array(trace, DecoderConfig.for_pipeline(pipeline))
        results, errors = run_pair(
            lambda s: alice_endpoint(s, cfg, pipeline, simulate_quantum=False),
            lambda s: bob_endpoint(s, cfg, measured=trits, simulate_quantum=False),
        )
        assert not errors
        assert results["alice"] == results["bob"]
        assert results["alice"].established


class TestSecrecy:
    def test_only_sample_bits_cross_the_wire(self):
        # Record every frame; the only key bits disclosed must be the sample.
        captured = []

        class TapSocket:
            def __init__(self, sock):
                self._sock = sock

            def sendall(self, data):
                captured.append(bytes(data))
                self._sock.sendall(data)

            def recv(self, n):
                return self._sock.recv(n)

            def close(self):
                self._sock.close()

        cfg = SessionConfig(n_bits=256, sample_len=24, seed_alice=7, seed_bob=8)
        pipeline = noiseless(seed=3)
        abits, abases = generate_random(cfg.n_bits, np.random.default_rng(cfg.seed_alice))
        _, bbases = generate_random(cfg.n_bits, np.random.default_rng(cfg.seed_bob))
        trace = simulate_transmission(abits, abases, bbases, None, pipeline,
                                      np.random.default_rng(pipeline.seed))
        trits = decode_trace_array(trace, DecoderConfig.for_pipeline(pipeline))

        results, errors = run_pair(
            lambda s: alice_endpoint(TapSocket(s), cfg, pipeline, simulate_quantum=False),
            lambda s: bob_endpoint(TapSocket(s), cfg, measured=trits, simulate_quantum=False),
        )
        assert not errors

        stream = b"".join(captured)
        disclosed_bits = []
        seen_types = set()
        while stream:
            msg, used = decode_message(stream)
            stream = stream[used:]
            seen_types.add(type(msg).__name__)
            if isinstance(msg, SampleBits):
                disclosed_bits = list(msg.bits)
        assert "SimTrits" not in seen_types and "SimBases" not in seen_types
        # The disclosed bits are exactly the discarded sample prefix ...
        key = results["alice"].final_key
        sifted_prefix = [int(b) for b in abits[np.asarray(results["alice"].matching_indices)]][:24]
        assert disclosed_bits == sifted_prefix
        # ... and the final key bits never appeared in any payload sequence.
        assert len(key) == results["alice"].sifted_len - 24


class TestMisbehavingPeers:
    def test_wrong_basis_count_is_protocol_violation(self):
        # Scripted peer announces 23 bases against a 24-bit session.
        def fake_bob(sock):
            ch = MessageChannel(sock)
            hello = ch.recv()
            assert isinstance(hello, Hello)
            ch.send(SimBases((0,) * 24))
            ch.recv()  # SimTrits
            ch.send(BasisAnnounce((0,) * 23))
            return ch.recv()  # Abort comes back

        cfg = SessionConfig(n_bits=24, sample_len=0)
        results, errors = run_pair(
            lambda s: alice_endpoint(s, cfg, noiseless()),
            fake_bob,
        )
        assert isinstance(errors["alice"], ProtocolViolation)
        assert isinstance(results["bob"], Abort)

    def test_version_skew(self):
        def fake_alice(sock):
            sock.sendall(encode_message(Hello(2, 24)))
            MessageChannel(sock).recv()  # collect the abort

        cfg = SessionConfig(n_bits=24, sample_len=0)
        _, errors = run_pair(fake_alice, lambda s: bob_endpoint(s, cfg))
        assert isinstance(errors["bob"], VersionMismatch)

    def test_disconnect_after_match_indices(self):
        def flaky_bob(sock):
            ch = MessageChannel(sock)
            ch.recv()  # Hello
            ch.send(SimBases((0,) * 24))
            ch.recv()  # SimTrits
            ch.send(BasisAnnounce((0,) * 24))
            ch.recv()  # MatchIndices
            sock.close()  # vanish before the sample exchange completes

        cfg = SessionConfig(n_bits=24, sample_len=4)
        results, errors = run_pair(
            lambda s: alice_endpoint(s, cfg, noiseless()),
            flaky_bob,
        )
        assert isinstance(errors["alice"], (TransportClosed, BrokenPipeError, ConnectionError))
        assert "alice" not in results  # no partial key emitted

    def test_out_of_order_message(self):
        def eager_bob(sock):
            ch = MessageChannel(sock)
            ch.recv()  # Hello
            ch.send(Verdict(True, 0))  # wildly out of order
            ch.recv()

        cfg = SessionConfig(n_bits=8, sample_len=0)
        _, errors = run_pair(lambda s: alice_endpoint(s, cfg, noiseless()), eager_bob)
        assert isinstance(errors["alice"], ProtocolViolation)

    def test_peer_abort_surfaces(self):
        from qkdsim.endpoints import ProtocolAborted

        def aborting_bob(sock):
            ch = MessageChannel(sock)
            ch.recv()
            ch.send(Abort(3))

        cfg = SessionConfig(n_bits=8, sample_len=0)
        _, errors = run_pair(lambda s: alice_endpoint(s, cfg, noiseless()), aborting_bob)
        assert isinstance(errors["alice"], ProtocolAborted)
        assert errors["alice"].reason_code == 3
