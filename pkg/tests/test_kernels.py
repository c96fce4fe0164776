import numpy as np
import pytest

import qkdsim._kernels as kernels
from qkdsim.engine import SessionConfig, run_session
from qkdsim.optics import PipelineConfig, eve_luts, measurement_luts
from qkdsim.adversary import EveConfig

needs_cython = pytest.mark.skipif(
    not kernels.HAVE_CYTHON, reason="compiled kernel extension not built"
)


def random_inputs(rng, n=512):
    states = rng.integers(0, 4, n, dtype=np.uint8)
    bases = rng.integers(0, 2, n, dtype=np.uint8)
    tap = (rng.random(n) < 0.7).astype(np.uint8)
    ebases = rng.integers(0, 2, n, dtype=np.uint8)
    return states, bases, tap, ebases


@needs_cython
class TestBackendParity:
    def setup_method(self):
        self.cy = kernels.backend_module("cython")
        self.np_ = kernels.backend_module("numpy")
        self.p_zero = eve_luts()
        self.p1, self.p2 = measurement_luts(drift_offset_deg=4.2)

    def test_eve_pass_beam(self):
        rng = np.random.default_rng(1)
        states, _, tap, ebases = random_inputs(rng)
        u = rng.random(len(states))
        a = self.cy.eve_pass_beam(states, tap, ebases, u, self.p_zero)
        b = self.np_.eve_pass_beam(states, tap, ebases, u, self.p_zero)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_eve_pass_photon(self):
        rng = np.random.default_rng(2)
        states, _, tap, ebases = random_inputs(rng)
        for k in (1, 2, 5):
            u2 = rng.random((len(states), k))
            tie = rng.random(len(states))
            a = self.cy.eve_pass_photon(states, tap, ebases, u2, tie, self.p_zero)
            b = self.np_.eve_pass_photon(states, tap, ebases, u2, tie, self.p_zero)
            assert np.array_equal(a[0], b[0])
            assert np.array_equal(a[1], b[1])

    def test_bob_pass_beam(self):
        rng = np.random.default_rng(3)
        states, bases, _, _ = random_inputs(rng)
        a = self.cy.bob_pass_beam(states, bases, self.p1, self.p2)
        b = self.np_.bob_pass_beam(states, bases, self.p1, self.p2)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_bob_pass_photon(self):
        rng = np.random.default_rng(4)
        states, bases, _, _ = random_inputs(rng)
        for m in (1, 3, 16):
            u2 = rng.random((len(states), m))
            a = self.cy.bob_pass_photon(states, bases, self.p2, u2)
            b = self.np_.bob_pass_photon(states, bases, self.p2, u2)
            assert np.array_equal(a[0], b[0])
            assert np.array_equal(a[1], b[1])

    def test_render_trace(self):
        rng = np.random.default_rng(5)
        n, sps, npulse = 64, 32, 7
        ch1, ch2 = rng.random(n), rng.random(n)
        noise1, noise2 = rng.normal(0, 0.02, n * sps), rng.normal(0, 0.02, n * sps)
        for noises in ((None, None), (noise1, noise2)):
            a = self.cy.render_trace(ch1, ch2, sps, npulse, 1.0, *noises)
            b = self.np_.render_trace(ch1, ch2, sps, npulse, 1.0, *noises)
            assert np.array_equal(a[0], b[0])
            assert np.array_equal(a[1], b[1])

    def test_slot_means_within_float_accumulation(self):
        rng = np.random.default_rng(6)
        volts = rng.normal(0.5, 0.1, 64 * 32)
        a = self.cy.slot_means(volts, 32, 11, 64)
        b = self.np_.slot_means(volts, 32, 11, 64)
        assert np.allclose(a, b, rtol=0, atol=1e-12)

    def test_full_session_identical_across_backends(self):
        cfg = SessionConfig(n_bits=256, sample_len=32, seed_alice=11, seed_bob=12)
        pipeline = PipelineConfig(seed=13, noise_sigma_volts=0.02)
        eve = EveConfig(tap_fraction=0.4, seed_eve=14)
        prev = kernels.use_backend("numpy")
        try:
            out_np = run_session(cfg, pipeline, eve, record_transcript=False)
            kernels.use_backend("cython")
            out_cy = run_session(cfg, pipeline, eve, record_transcript=False)
        finally:
            kernels.use_backend(prev)
        assert out_np.verdict == out_cy.verdict
        assert np.array_equal(out_np.final_key, out_cy.final_key)
        assert np.array_equal(out_np.bob.measured, out_cy.bob.measured)


class TestBackendSelection:
    def test_switching(self):
        prev = kernels.active_backend()
        try:
            assert kernels.use_backend("numpy") == prev
            assert kernels.active_backend() == "numpy"
        finally:
            kernels.use_backend(prev)

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")

    def test_numpy_backend_always_available(self):
        assert "numpy" in kernels.available_backends()
