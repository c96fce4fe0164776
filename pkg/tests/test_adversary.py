import math

import numpy as np
import pytest

from qkdsim.adversary import (
    Eavesdropper,
    EveConfig,
    detection_probability,
    expected_qber,
)
from qkdsim.engine import SessionConfig, run_session
from qkdsim.optics import Beam, PipelineConfig
from qkdsim.polarization import Polarization


def photon_pipeline(seed=0) -> PipelineConfig:
    return PipelineConfig(
        noise_sigma_volts=0.0, samples_per_slot=8, photons_per_pulse=1, seed=seed
    )


class TestEveConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            EveConfig(tap_fraction=1.5)
        with pytest.raises(ValueError):
            EveConfig(mode="laser")
        with pytest.raises(ValueError):
            EveConfig(mode="photon", photon_count=0)


class TestIntercept:
    def test_zero_tap_is_identity(self):
        eve = Eavesdropper(EveConfig(tap_fraction=0.0, seed_eve=1))
        beam = Beam(1.0, Polarization(45.0))
        for _ in range(50):
            assert eve.intercept(beam) == beam
        assert all(not row.tapped for row in eve.transcript)

    def test_matching_basis_reemits_alice_state(self):
        eve = Eavesdropper(EveConfig(tap_fraction=1.0, seed_eve=2))
        states = np.array([0, 1, 2, 3] * 200, dtype=np.uint8)
        out = eve.apply_batch(states)
        same_basis = (eve.last_bases == (states >> 1))
        assert same_basis.any()
        assert np.array_equal(out[same_basis], states[same_basis])

    def test_wrong_basis_reemits_wrong_basis_eigenstate(self):
        eve = Eavesdropper(EveConfig(tap_fraction=1.0, seed_eve=3))
        states = np.zeros(400, dtype=np.uint8)  # all H
        out = eve.apply_batch(states)
        wrong = eve.last_bases == 1
        assert wrong.any()
        assert set(np.unique(out[wrong])) <= {2, 3}  # D or AD
        # ... and her guess on those slots is a coin flip
        sigma = math.sqrt(0.25 / wrong.sum())
        assert abs(eve.last_bits[wrong].mean() - 0.5) < 4 * sigma

    def test_reemission_is_full_intensity(self):
        eve = Eavesdropper(EveConfig(tap_fraction=1.0, seed_eve=4))
        out = eve.intercept(Beam(0.7, Polarization(0.0)))
        assert out.intensity == 1.0

    def test_photon_mode_majority(self):
        # With many photons and an aligned state, the majority never misses.
        eve = Eavesdropper(EveConfig(tap_fraction=1.0, seed_eve=5, mode="photon", photon_count=51))
        states = np.zeros(300, dtype=np.uint8)
        out = eve.apply_batch(states)
        aligned = eve.last_bases == 0
        assert np.array_equal(out[aligned], states[aligned])
        assert not eve.last_bits[aligned].any()

    def test_transcript_records_slots(self):
        eve = Eavesdropper(EveConfig(tap_fraction=1.0, seed_eve=6))
        eve.apply_batch(np.array([0, 1], dtype=np.uint8))
        assert [r.index for r in eve.transcript] == [0, 1]
        assert all(r.tapped and r.basis is not None for r in eve.transcript)


class TestErrorLaws:
    def test_expected_qber_closed_form(self):
        assert expected_qber(0.0) == 0.0
        assert expected_qber(1.0) == 0.25
        assert expected_qber(0.5) == 0.125

    def test_detection_probability_closed_form(self):
        assert detection_probability(0.7, 0) == 0.0
        assert detection_probability(0.0, 100) == 0.0
        assert detection_probability(1.0, 100) == pytest.approx(1 - 0.75**100, rel=1e-12)

    def test_qber_monte_carlo_half_tap(self):
        # Smaller sibling of the acceptance run, at tap 0.5.
        total_err = total_bits = 0
        for s in range(150):
            out = run_session(
                SessionConfig(n_bits=256, seed_alice=2 * s + 1, seed_bob=2 * s + 2),
                photon_pipeline(seed=s),
                eve=EveConfig(tap_fraction=0.5, seed_eve=s + 7),
                record_transcript=False,
                keep_trace=False,
            )
            total_err += int((out.sift.alice_key != out.sift.bob_key).sum())
            total_bits += len(out.sift)
        rate = total_err / total_bits
        sigma = math.sqrt(0.125 * 0.875 / total_bits)
        assert abs(rate - expected_qber(0.5)) < 4 * sigma

    def test_eve_knowledge_rate_full_tap(self):
        # Right basis half the time (always right) + wrong basis half (coin).
        agree = total = 0
        for s in range(100):
            out = run_session(
                SessionConfig(n_bits=256, seed_alice=3 * s + 1, seed_bob=3 * s + 2),
                photon_pipeline(seed=s),
                eve=EveConfig(tap_fraction=1.0, seed_eve=s + 11),
                record_transcript=False,
                keep_trace=False,
            )
            idx = out.sift.matching_indices
            eve_bits = out.eve.last_bits[idx]
            agree += int((eve_bits == out.sift.alice_key).sum())
            total += len(idx)
        rate = agree / total
        sigma = math.sqrt(0.75 * 0.25 / total)
        assert abs(rate - 0.75) < 4 * sigma

    def test_beam_mode_uncertainty_rate_full_tap(self):
        # In the many-photon pipeline a wrong-basis tap shows up as an
        # uncertain slot, so half the sifted slots are disturbed.
        uncertain = total = 0
        for s in range(60):
            out = run_session(
                SessionConfig(n_bits=256, seed_alice=5 * s + 1, seed_bob=5 * s + 2),
                PipelineConfig(noise_sigma_volts=0.0, samples_per_slot=8, seed=s),
                eve=EveConfig(tap_fraction=1.0, seed_eve=s + 13),
                record_transcript=False,
                keep_trace=False,
            )
            uncertain += int((out.sift.bob_key == 2).sum())
            total += len(out.sift)
        rate = uncertain / total
        sigma = math.sqrt(0.25 / total)
        assert abs(rate - 0.5) < 4 * sigma

    def test_matched_eve_bases_are_invisible(self):
        # When Eve happens to measure in Alice's basis, per-slot intensities
        # are identical to the untapped channel.
        from qkdsim.optics import slot_intensities

        n = 512
        rng = np.random.default_rng(31)
        bits = rng.integers(0, 2, n, dtype=np.uint8)
        bases = rng.integers(0, 2, n, dtype=np.uint8)
        eve = Eavesdropper(EveConfig(tap_fraction=1.0, seed_eve=17), record=False)
        cfg = PipelineConfig(noise_sigma_volts=0.0, samples_per_slot=8)
        tapped = slot_intensities(bits, bases, bases, eve=eve, config=cfg)
        clean = slot_intensities(bits, bases, bases, config=cfg)
        same = eve.last_bases == bases
        assert same.any()
        assert np.array_equal(tapped[0][same], clean[0][same])
        assert np.array_equal(tapped[1][same], clean[1][same])
