"""Hot-path slot kernels with a compiled core and a numpy fallback.

The compiled extension (_core, Cython) is preferred when built; otherwise the
numpy implementation (_core_np) is used. The active backend can be forced with
the QKDSIM_KERNELS environment variable ("cython" or "numpy") or switched at
runtime with use_backend(), which the parity tests and the kernel benchmark
rely on.
"""

import os

from . import _core_np

try:
    from . import _core as _core_ext
except ImportError:
    _core_ext = None

_BACKENDS = {"numpy": _core_np}
if _core_ext is not None:
    _BACKENDS["cython"] = _core_ext

HAVE_CYTHON = _core_ext is not None

_active_name = os.environ.get("QKDSIM_KERNELS") or ("cython" if HAVE_CYTHON else "numpy")
if _active_name not in _BACKENDS:
    raise ImportError(f"QKDSIM_KERNELS={_active_name!r} but that backend is unavailable")
_active = _BACKENDS[_active_name]


def available_backends():
    return tuple(sorted(_BACKENDS))


def active_backend():
    return _active_name


def use_backend(name):
    """Switch the kernel backend at runtime; returns the previous name."""
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}")
    previous = _active_name
    _active_name = name
    _active = _BACKENDS[name]
    return previous


def backend_module(name):
    return _BACKENDS[name]


def eve_pass_beam(states, tap, ebases, u, p_zero):
    return _active.eve_pass_beam(states, tap, ebases, u, p_zero)


def eve_pass_photon(states, tap, ebases, u2, tie, p_zero):
    return _active.eve_pass_photon(states, tap, ebases, u2, tie, p_zero)


def bob_pass_beam(states, bases, p_ch1, p_ch2):
    return _active.bob_pass_beam(states, bases, p_ch1, p_ch2)


def bob_pass_photon(states, bases, p_ch2, u2):
    return _active.bob_pass_photon(states, bases, p_ch2, u2)


def render_trace(ch1, ch2, samples_per_slot, pulse_samples, full_scale, noise1, noise2):
    return _active.render_trace(ch1, ch2, samples_per_slot, pulse_samples, full_scale, noise1, noise2)


def slot_means(volts, samples_per_slot, window_samples, n_slots):
    return _active.slot_means(volts, samples_per_slot, window_samples, n_slots)
