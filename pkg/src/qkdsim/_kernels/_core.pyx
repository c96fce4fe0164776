# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot kernels.

Same contracts as qkdsim._kernels._core_np, with explicit loops instead of
vector operations. See that module for the state-index and LUT conventions.
Outputs are bit-identical to the numpy backend except for slot_means, where
the summation order differs (numpy reduces pairwise); callers compare means
with a 1e-12 tolerance.
"""

import numpy as np


def eve_pass_beam(const unsigned char[::1] states, const unsigned char[::1] tap,
                  const unsigned char[::1] ebases, const double[::1] u,
                  const double[:, ::1] p_zero):
    cdef Py_ssize_t n = states.shape[0]
    out_arr = np.empty(n, dtype=np.uint8)
    bits_arr = np.full(n, -1, dtype=np.int8)
    cdef unsigned char[::1] out = out_arr
    cdef signed char[::1] eve_bits = bits_arr
    cdef Py_ssize_t i
    cdef unsigned char b, bit
    for i in range(n):
        if tap[i]:
            b = ebases[i]
            bit = 0 if u[i] < p_zero[states[i], b] else 1
            out[i] = (b << 1) | bit
            eve_bits[i] = <signed char> bit
        else:
            out[i] = states[i]
    return out_arr, bits_arr


def eve_pass_photon(const unsigned char[::1] states, const unsigned char[::1] tap,
                    const unsigned char[::1] ebases, const double[:, ::1] u2,
                    const double[::1] tie, const double[:, ::1] p_zero):
    cdef Py_ssize_t n = states.shape[0]
    cdef Py_ssize_t k = u2.shape[1]
    out_arr = np.empty(n, dtype=np.uint8)
    bits_arr = np.full(n, -1, dtype=np.int8)
    cdef unsigned char[::1] out = out_arr
    cdef signed char[::1] eve_bits = bits_arr
    cdef Py_ssize_t i, j, zeros
    cdef unsigned char b, bit
    cdef double p
    for i in range(n):
        if tap[i]:
            b = ebases[i]
            p = p_zero[states[i], b]
            zeros = 0
            for j in range(k):
                if u2[i, j] < p:
                    zeros += 1
            if 2 * zeros > k:
                bit = 0
            elif 2 * zeros < k:
                bit = 1
            else:
                bit = 0 if tie[i] < 0.5 else 1
            out[i] = (b << 1) | bit
            eve_bits[i] = <signed char> bit
        else:
            out[i] = states[i]
    return out_arr, bits_arr


def bob_pass_beam(const unsigned char[::1] states, const unsigned char[::1] bases,
                  const double[:, ::1] p_ch1, const double[:, ::1] p_ch2):
    cdef Py_ssize_t n = states.shape[0]
    ch1_arr = np.empty(n, dtype=np.float64)
    ch2_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] ch1 = ch1_arr
    cdef double[::1] ch2 = ch2_arr
    cdef Py_ssize_t i
    for i in range(n):
        ch1[i] = p_ch1[states[i], bases[i]]
        ch2[i] = p_ch2[states[i], bases[i]]
    return ch1_arr, ch2_arr


def bob_pass_photon(const unsigned char[::1] states, const unsigned char[::1] bases,
                    const double[:, ::1] p_ch2, const double[:, ::1] u2):
    cdef Py_ssize_t n = states.shape[0]
    cdef Py_ssize_t m = u2.shape[1]
    ch1_arr = np.empty(n, dtype=np.float64)
    ch2_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] ch1 = ch1_arr
    cdef double[::1] ch2 = ch2_arr
    cdef Py_ssize_t i, j, hits
    cdef double p
    for i in range(n):
        p = p_ch2[states[i], bases[i]]
        hits = 0
        for j in range(m):
            if u2[i, j] < p:
                hits += 1
        ch2[i] = <double> hits / m
        ch1[i] = <double> (m - hits) / m
    return ch1_arr, ch2_arr


def render_trace(const double[::1] ch1, const double[::1] ch2,
                 Py_ssize_t samples_per_slot, Py_ssize_t pulse_samples,
                 double full_scale, noise1, noise2):
    cdef Py_ssize_t n = ch1.shape[0]
    cdef Py_ssize_t total = n * samples_per_slot
    v1_arr = np.empty(total, dtype=np.float64)
    v2_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] v1 = v1_arr
    cdef double[::1] v2 = v2_arr
    cdef const double[::1] n1 = noise1 if noise1 is not None else None
    cdef const double[::1] n2 = noise2 if noise2 is not None else None
    cdef bint noisy = noise1 is not None
    cdef Py_ssize_t i, j, base
    cdef double lvl1, lvl2
    for i in range(n):
        base = i * samples_per_slot
        lvl1 = ch1[i] * full_scale
        lvl2 = ch2[i] * full_scale
        for j in range(samples_per_slot):
            if j < pulse_samples:
                v1[base + j] = lvl1
                v2[base + j] = lvl2
            else:
                v1[base + j] = 0.0
                v2[base + j] = 0.0
            if noisy:
                v1[base + j] += n1[base + j]
                v2[base + j] += n2[base + j]
    return v1_arr, v2_arr


def slot_means(const double[::1] volts, Py_ssize_t samples_per_slot,
               Py_ssize_t window_samples, Py_ssize_t n_slots):
    means_arr = np.empty(n_slots, dtype=np.float64)
    cdef double[::1] means = means_arr
    cdef Py_ssize_t i, j, base
    cdef double acc
    for i in range(n_slots):
        base = i * samples_per_slot
        acc = 0.0
        for j in range(window_samples):
            acc += volts[base + j]
        means[i] = acc / window_samples
    return means_arr
