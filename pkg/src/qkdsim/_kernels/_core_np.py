"""Vectorized numpy implementation of the slot kernels.

Used when the compiled extension (qkdsim._kernels._core) is not built.
Both backends implement the same contracts over the same pre-drawn random
arrays, so switching backends never changes simulation output.

Conventions shared with the compiled core:
  * polarization states are indexed s = (basis << 1) | bit:
    0 = H, 1 = V, 2 = D, 3 = AD
  * probability lookup tables are float64 arrays of shape (4, 2)
    indexed by [state, basis]
  * random inputs are uniform draws in [0, 1) supplied by the caller
"""

import numpy as np


def eve_pass_beam(states, tap, ebases, u, p_zero):
    """Intercept-resend over whole pulses.

    For tapped slots the pulse collapses to one eigenstate of Eve's basis,
    bit 0 with probability p_zero[state, ebasis]. Untapped slots pass through.
    Returns (output states, Eve's guessed bits; -1 where untapped).
    """
    n = states.shape[0]
    tapped = tap.astype(bool)
    bits = (u >= p_zero[states, ebases]).astype(np.uint8)
    collapsed = ((ebases << 1) | bits).astype(np.uint8)
    out = np.where(tapped, collapsed, states).astype(np.uint8)
    eve_bits = np.full(n, -1, dtype=np.int8)
    eve_bits[tapped] = bits[tapped]
    return out, eve_bits


def eve_pass_photon(states, tap, ebases, u2, tie, p_zero):
    """Intercept-resend sampling k photons per tapped pulse.

    Eve measures each of the k photons, takes the majority outcome as her
    bit (coin flip on ties via `tie`), and resends that eigenstate.
    """
    n = states.shape[0]
    k = u2.shape[1]
    tapped = tap.astype(bool)
    p = p_zero[states, ebases]
    zeros = (u2 < p[:, None]).sum(axis=1)
    bits = np.where(
        2 * zeros > k,
        np.uint8(0),
        np.where(2 * zeros < k, np.uint8(1), (tie >= 0.5).astype(np.uint8)),
    ).astype(np.uint8)
    collapsed = ((ebases << 1) | bits).astype(np.uint8)
    out = np.where(tapped, collapsed, states).astype(np.uint8)
    eve_bits = np.full(n, -1, dtype=np.int8)
    eve_bits[tapped] = bits[tapped]
    return out, eve_bits


def bob_pass_beam(states, bases, p_ch1, p_ch2):
    """Per-slot detector intensities for whole pulses (deterministic)."""
    return p_ch1[states, bases].copy(), p_ch2[states, bases].copy()


def bob_pass_photon(states, bases, p_ch2, u2):
    """Per-slot detector intensities from m sampled photons per pulse."""
    m = u2.shape[1]
    p = p_ch2[states, bases]
    hits = (u2 < p[:, None]).sum(axis=1)
    ch2 = hits / m
    ch1 = (m - hits) / m
    return ch1, ch2


def render_trace(ch1, ch2, samples_per_slot, pulse_samples, full_scale, noise1, noise2):
    """Expand per-slot intensities into voltage samples.

    The first `pulse_samples` samples of each slot sit at intensity *
    full_scale; the rest at 0. Pre-drawn Gaussian noise (or None) is added
    per sample.
    """
    n = ch1.shape[0]
    total = n * samples_per_slot
    v1 = np.zeros(total, dtype=np.float64)
    v2 = np.zeros(total, dtype=np.float64)
    v1.reshape(n, samples_per_slot)[:, :pulse_samples] = (ch1 * full_scale)[:, None]
    v2.reshape(n, samples_per_slot)[:, :pulse_samples] = (ch2 * full_scale)[:, None]
    if noise1 is not None:
        v1 += noise1
    if noise2 is not None:
        v2 += noise2
    return v1, v2


def slot_means(volts, samples_per_slot, window_samples, n_slots):
    """Mean voltage of the first `window_samples` samples of each slot."""
    grid = volts[: n_slots * samples_per_slot].reshape(n_slots, samples_per_slot)
    return grid[:, :window_samples].mean(axis=1)
