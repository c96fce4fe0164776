"""Desk-scale photonic BB84 simulator.

Modules:
    polarization  states, bases, encoding table, single-photon measurement
    optics        laser/polarizer/rotators/beamsplitter/detector chain
    trace_codec   oscilloscope CSV parsing and slot classification
    engine        the four-phase protocol and one-time-pad utilities
    adversary     intercept-resend eavesdropper and its error laws
    wire          framed classical-channel messages
    endpoints     networked Alice/Bob over a byte stream
    service       REST + SSE backend for the demo UI
    cli           qkdsim command line
    _kernels      compiled hot-path kernels with a numpy fallback
"""

from .adversary import EveConfig, Eavesdropper, detection_probability, expected_qber
from .engine import (
    ABORTED,
    KEY_ESTABLISHED,
    SessionConfig,
    SessionOutcome,
    guess_probability,
    otp_decrypt,
    otp_encrypt,
    run_session,
)
from .optics import Beam, PipelineConfig, Trace, simulate_transmission
from .polarization import (
    Basis,
    EncodingTable,
    Polarization,
    Trit,
    decode_state,
    encode_state,
    measure_photon,
    transmission_fraction,
)
from .trace_codec import DecoderConfig, decode_trace, parse_trace_csv

__version__ = "0.1.0"
