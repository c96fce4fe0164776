"""Oscilloscope trace decoding: CSV parsing, slot segmentation, window
averaging, and certain/uncertain classification.

A slot decodes by contrast, the normalized channel difference
(V1 - V2) / max(V1 + V2, floor) over the pulse window mean. Contrast near
+1/-1 is a certain 1/0; near zero is the half-split signature of a basis
mismatch. Both channels below the signal floor is a dead channel, reported
as an error rather than a trit so a dark fiber cannot masquerade as data.

Trace CSV format: header `time_s,ch1_v,ch2_v`, one sample per row, UTF-8,
LF or CRLF. Simulated and captured traces are interchangeable here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .optics import PipelineConfig, Trace
from .polarization import Trit

__all__ = [
    "TraceFile",
    "SlotStats",
    "DecoderConfig",
    "TraceFormatError",
    "MalformedHeader",
    "NonMonotonicTime",
    "NonUniformSampling",
    "RowParseError",
    "SlotCountMismatch",
    "NoSignal",
    "parse_trace_csv",
    "export_trace_csv",
    "segment",
    "classify",
    "decode_trace",
    "trits_to_string",
]

HEADER = "time_s,ch1_v,ch2_v"


class TraceFormatError(ValueError):
    """Base for trace parsing/decoding failures."""


class MalformedHeader(TraceFormatError):
    pass


class NonMonotonicTime(TraceFormatError):
    pass


class NonUniformSampling(TraceFormatError):
    pass


class RowParseError(TraceFormatError):
    def __init__(self, line_number: int, detail: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {detail}")


class SlotCountMismatch(TraceFormatError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected {expected} slots, trace holds {actual}")


class NoSignal(TraceFormatError):
    """Both channels below the signal floor; dead laser or fiber."""

    def __init__(self, slot_index: int):
        self.slot_index = slot_index
        super().__init__(f"slot {slot_index}: both channels below the signal floor")


@dataclass
class TraceFile:
    """Parsed dual-channel trace; arrays are one value per sample row."""

    sample_period_ns: float
    time_s: np.ndarray
    ch1_v: np.ndarray
    ch2_v: np.ndarray

    @classmethod
    def from_trace(cls, trace: Trace) -> "TraceFile":
        period_s = trace.sample_period_ns * 1e-9
        t = np.arange(trace.n_samples, dtype=np.float64) * period_s
        return cls(trace.sample_period_ns, t, trace.ch1_volts, trace.ch2_volts)

    @property
    def n_rows(self) -> int:
        return int(self.time_s.shape[0])

    @property
    def duration_ns(self) -> float:
        return self.n_rows * self.sample_period_ns


@dataclass(frozen=True)
class SlotStats:
    """Window-averaged voltages for one bit slot.

    contrast is (bit1-channel mean - bit0-channel mean) normalized by the
    channel sum (floored to keep a dead slot from dividing by ~0), clamped
    to [-1, 1].
    """

    index: int
    mean_ch1_v: float
    mean_ch2_v: float
    contrast: float

    @classmethod
    def from_means(
        cls, index: int, mean_ch1_v: float, mean_ch2_v: float, config: "DecoderConfig"
    ) -> "SlotStats":
        m_one, m_zero = (mean_ch2_v, mean_ch1_v) if config.swap_channels else (mean_ch1_v, mean_ch2_v)
        denom = max(mean_ch1_v + mean_ch2_v, config.no_signal_floor_volts)
        contrast = (m_one - m_zero) / denom
        return cls(index, mean_ch1_v, mean_ch2_v, float(np.clip(contrast, -1.0, 1.0)))


@dataclass(frozen=True)
class DecoderConfig:
    """Decoder settings, keyed to the transmitter's slot timing.

    The pulse window is the first pulse_window_fraction * pulse_width_ns of
    each slot; trailing-edge and dark samples are excluded from the average
    as the noise filter.
    """

    slot_period_ns: float = 100.0
    pulse_width_ns: float = 20.0
    pulse_window_fraction: float = 0.8
    certain_threshold: float = 0.6
    no_signal_floor_volts: float = 0.05
    expected_slots: int | None = None
    swap_channels: bool = False

    def __post_init__(self):
        if not 0.0 < self.certain_threshold < 1.0:
            raise ValueError("certain_threshold must lie in (0, 1)")
        if not 0.0 < self.pulse_window_fraction <= 1.0:
            raise ValueError("pulse_window_fraction must lie in (0, 1]")
        if self.no_signal_floor_volts <= 0:
            raise ValueError("no_signal_floor_volts must be > 0")
        if not 0 < self.pulse_width_ns < self.slot_period_ns:
            raise ValueError("need 0 < pulse_width_ns < slot_period_ns")
        if self.expected_slots is not None and self.expected_slots < 0:
            raise ValueError("expected_slots must be >= 0 when set")

    @classmethod
    def for_pipeline(cls, pipeline: PipelineConfig, **overrides) -> "DecoderConfig":
        """Decoder matched to a pipeline's timing, full scale, and wiring."""
        params = dict(
            slot_period_ns=pipeline.slot_period_ns,
            pulse_width_ns=pipeline.pulse_width_ns,
            no_signal_floor_volts=0.05 * pipeline.full_scale_volts,
            swap_channels=pipeline.swap_channels,
        )
        params.update(overrides)
        return cls(**params)


def parse_trace_csv(data: bytes) -> TraceFile:
    """Parse trace CSV bytes; see the module docstring for the format."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedHeader(f"trace file is not UTF-8: {exc}") from None
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        found = lines[0].strip() if lines else "<empty file>"
        raise MalformedHeader(f"expected header {HEADER!r}, found {found!r}")

    times: list[float] = []
    ch1: list[float] = []
    ch2: list[float] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise RowParseError(lineno, f"expected 3 comma-separated fields, got {len(parts)}")
        try:
            t, v1, v2 = (float(p) for p in parts)
        except ValueError:
            raise RowParseError(lineno, f"non-numeric field in {line!r}") from None
        if not (math.isfinite(t) and math.isfinite(v1) and math.isfinite(v2)):
            raise RowParseError(lineno, "non-finite value")
        times.append(t)
        ch1.append(v1)
        ch2.append(v2)

    t_arr = np.asarray(times, dtype=np.float64)
    if t_arr.size >= 2:
        dt = np.diff(t_arr)
        if dt.min() <= 0:
            bad = int(np.argmax(dt <= 0))
            raise NonMonotonicTime(f"time not strictly increasing at row {bad + 2}")
        dt0 = dt[0]
        if np.abs(dt - dt0).max() > 1e-3 * dt0:
            raise NonUniformSampling("sample spacing varies by more than 0.1%")
        period_ns = dt0 * 1e9
    else:
        period_ns = 0.0
    return TraceFile(
        period_ns,
        t_arr,
        np.asarray(ch1, dtype=np.float64),
        np.asarray(ch2, dtype=np.float64),
    )


def export_trace_csv(trace: "Trace | TraceFile") -> bytes:
    """Format a trace as CSV; 9 significant digits of voltage round-trip."""
    tf = TraceFile.from_trace(trace) if isinstance(trace, Trace) else trace
    out = [HEADER]
    for t, v1, v2 in zip(tf.time_s, tf.ch1_v, tf.ch2_v):
        out.append(f"{t:.12g},{v1:.9g},{v2:.9g}")
    out.append("")
    return "\n".join(out).encode("utf-8")


def _slot_geometry(tf: TraceFile, config: DecoderConfig) -> tuple[int, int, int]:
    """(samples per slot, window samples, slot count) for this trace."""
    if tf.n_rows == 0 or tf.sample_period_ns <= 0:
        return 0, 0, 0
    ratio = config.slot_period_ns / tf.sample_period_ns
    sps = int(round(ratio))
    if sps < 1 or abs(ratio - sps) > 1e-3 * sps:
        raise TraceFormatError(
            f"slot period {config.slot_period_ns} ns is not an integer multiple "
            f"of the sample period {tf.sample_period_ns} ns"
        )
    n_slots = tf.n_rows // sps
    window_ns = config.pulse_window_fraction * config.pulse_width_ns
    nwin = int(math.ceil(window_ns / tf.sample_period_ns - 1e-9))
    nwin = max(1, min(sps, nwin))
    return sps, nwin, n_slots


def _mean_arrays(tf: TraceFile, config: DecoderConfig) -> tuple[np.ndarray, np.ndarray]:
    sps, nwin, n_slots = _slot_geometry(tf, config)
    if n_slots == 0:
        if config.expected_slots:
            raise SlotCountMismatch(config.expected_slots, 0)
        return np.empty(0), np.empty(0)
    if config.expected_slots is not None and config.expected_slots != n_slots:
        raise SlotCountMismatch(config.expected_slots, n_slots)
    ch1 = np.ascontiguousarray(tf.ch1_v, dtype=np.float64)
    ch2 = np.ascontiguousarray(tf.ch2_v, dtype=np.float64)
    m1 = kernels.slot_means(ch1, sps, nwin, n_slots)
    m2 = kernels.slot_means(ch2, sps, nwin, n_slots)
    return m1, m2


def segment(tf: TraceFile, config: DecoderConfig) -> list[SlotStats]:
    """Split a trace into per-slot window statistics."""
    m1, m2 = _mean_arrays(tf, config)
    return [
        SlotStats.from_means(i, float(a), float(b), config)
        for i, (a, b) in enumerate(zip(m1, m2))
    ]


def classify(stats: SlotStats, config: DecoderConfig) -> Trit:
    """Certain/uncertain decision for one slot."""
    if stats.mean_ch1_v + stats.mean_ch2_v < config.no_signal_floor_volts:
        raise NoSignal(stats.index)
    if stats.contrast >= config.certain_threshold:
        return Trit.ONE
    if stats.contrast <= -config.certain_threshold:
        return Trit.ZERO
    return Trit.UNCERTAIN


def _classify_arrays(m1: np.ndarray, m2: np.ndarray, config: DecoderConfig) -> np.ndarray:
    total = m1 + m2
    dead = total < config.no_signal_floor_volts
    if dead.any():
        raise NoSignal(int(np.argmax(dead)))
    m_one, m_zero = (m2, m1) if config.swap_channels else (m1, m2)
    contrast = (m_one - m_zero) / np.maximum(total, config.no_signal_floor_volts)
    trits = np.full(m1.shape[0], Trit.UNCERTAIN.value, dtype=np.int8)
    trits[contrast >= config.certain_threshold] = Trit.ONE.value
    trits[contrast <= -config.certain_threshold] = Trit.ZERO.value
    return trits


def decode_trace_array(trace: "Trace | TraceFile", config: DecoderConfig) -> np.ndarray:
    """Array-valued decode (trit values as int8); the engine's hot path."""
    tf = TraceFile.from_trace(trace) if isinstance(trace, Trace) else trace
    m1, m2 = _mean_arrays(tf, config)
    if m1.shape[0] == 0:
        return np.empty(0, dtype=np.int8)
    return _classify_arrays(m1, m2, config)


def decode_trace(trace: "Trace | TraceFile", config: DecoderConfig) -> list[Trit]:
    """Classify every slot of a trace, in order."""
    return [Trit(int(v)) for v in decode_trace_array(trace, config)]


def trits_to_string(trits) -> str:
    """One character per slot over 0 / 1 / ?."""
    return "".join(Trit(int(t)).char for t in trits)
