#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times each kernel on representative sizes, then a full protocol session per
backend. Outputs are bit-identical across backends (verified here), so the
comparison is purely about speed.

Usage: python benchmarks/bench_kernels.py [--slots N] [--repeat K]
"""

import argparse
import time

import numpy as np

import qkdsim._kernels as kernels
from qkdsim.adversary import EveConfig
from qkdsim.engine import SessionConfig, run_session
from qkdsim.optics import PipelineConfig, eve_luts, measurement_luts


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def kernel_cases(n_slots):
    rng = np.random.default_rng(0)
    states = rng.integers(0, 4, n_slots, dtype=np.uint8)
    bases = rng.integers(0, 2, n_slots, dtype=np.uint8)
    tap = (rng.random(n_slots) < 0.5).astype(np.uint8)
    ebases = rng.integers(0, 2, n_slots, dtype=np.uint8)
    u = rng.random(n_slots)
    u2 = rng.random((n_slots, 5))
    tie = rng.random(n_slots)
    p_zero = eve_luts()
    p1, p2 = measurement_luts()
    sps, npulse = 64, 13
    ch1, ch2 = rng.random(n_slots), rng.random(n_slots)
    noise1 = rng.normal(0, 0.02, n_slots * sps)
    noise2 = rng.normal(0, 0.02, n_slots * sps)
    volts = rng.normal(0.5, 0.1, n_slots * sps)
    return {
        "eve_pass_beam": lambda m: m.eve_pass_beam(states, tap, ebases, u, p_zero),
        "eve_pass_photon(k=5)": lambda m: m.eve_pass_photon(states, tap, ebases, u2, tie, p_zero),
        "bob_pass_beam": lambda m: m.bob_pass_beam(states, bases, p1, p2),
        "bob_pass_photon(m=5)": lambda m: m.bob_pass_photon(states, bases, p2, u2),
        "render_trace(sps=64)": lambda m: m.render_trace(ch1, ch2, sps, npulse, 1.0, noise1, noise2),
        "slot_means(sps=64)": lambda m: m.slot_means(volts, sps, 11, n_slots),
    }


def outputs_match(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, rtol=0, atol=1e-12) for x, y in zip(a, b))


def bench_session(backend, repeat):
    prev = kernels.use_backend(backend)
    try:
        cfg = SessionConfig(n_bits=1024, sample_len=100, seed_alice=1, seed_bob=2)
        pipeline = PipelineConfig(seed=3, samples_per_slot=64)
        eve = EveConfig(tap_fraction=0.5, seed_eve=4)
        best, _ = timeit(
            lambda: run_session(cfg, pipeline, eve, record_transcript=False, keep_trace=False),
            repeat,
        )
    finally:
        kernels.use_backend(prev)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--slots", type=int, default=65536)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not kernels.HAVE_CYTHON:
        print("compiled kernels not built; numpy fallback is the only backend")
        return

    cy = kernels.backend_module("cython")
    np_ = kernels.backend_module("numpy")
    cases = kernel_cases(args.slots)

    print(f"kernel benchmark, {args.slots} slots, best of {args.repeat}\n")
    header = f"{'kernel':24s} {'numpy':>12s} {'cython':>12s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_np, out_np = timeit(lambda: call(np_), args.repeat)
        t_cy, out_cy = timeit(lambda: call(cy), args.repeat)
        assert outputs_match(out_np, out_cy), f"backend outputs diverge in {name}"
        print(f"{name:24s} {t_np * 1e3:10.2f}ms {t_cy * 1e3:10.2f}ms {t_np / t_cy:8.2f}x")

    t_np = bench_session("numpy", args.repeat)
    t_cy = bench_session("cython", args.repeat)
    print(f"\n{'full session (n=1024)':24s} {t_np * 1e3:10.2f}ms {t_cy * 1e3:10.2f}ms "
          f"{t_np / t_cy:8.2f}x")
    print(f"\nactive backend at import: {kernels.active_backend()}")


if __name__ == "__main__":
    main()
