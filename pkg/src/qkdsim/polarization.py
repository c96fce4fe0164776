"""Linear polarization states, measurement bases, and the bit encoding.

The protocol's whole state space is a single linear polarization angle. Two
bases are used: HV (horizontal/vertical) and DAD (diagonal/antidiagonal),
offset by 45 degrees. Angle conventions are H=0, V=90, D=45, AD=135; a linear
polarization at theta and theta+180 is the same physical state, so angles are
normalized into [0, 180).

Transmitted intensity through an analyzer follows Malus's law, cos^2 of the
angle difference, which is also the single-photon passage probability.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "ANGLE_TOL",
    "Basis",
    "Trit",
    "Polarization",
    "EncodingTable",
    "DEFAULT_TABLE",
    "STATE_NAMES",
    "NotABasisState",
    "encode_state",
    "decode_state",
    "transmission_fraction",
    "measure_photon",
]

# Tolerance for deciding two angles are the same eigenstate; angles accumulate
# float error through rotations, exact comparison would be wrong.
ANGLE_TOL = 1e-9

STATE_NAMES = ("H", "V", "D", "AD")


class NotABasisState(ValueError):
    """The angle is not an eigenstate of the requested basis."""


class Basis(enum.IntEnum):
    HV = 0
    DAD = 1

    @property
    def other(self) -> "Basis":
        return Basis(1 - self.value)

    def __str__(self) -> str:
        return "H/V" if self is Basis.HV else "D/AD"


class Trit(enum.IntEnum):
    """Three-valued measurement outcome; UNCERTAIN never comes from encoding."""

    ZERO = 0
    ONE = 1
    UNCERTAIN = 2

    @property
    def char(self) -> str:
        return "01?"[self.value]

    @classmethod
    def from_char(cls, c: str) -> "Trit":
        try:
            return cls("01?".index(c))
        except ValueError:
            raise ValueError(f"not a trit character: {c!r}") from None

    @property
    def is_certain(self) -> bool:
        return self is not Trit.UNCERTAIN


@dataclass(frozen=True)
class Polarization:
    """Linear polarization orientation in degrees, normalized to [0, 180)."""

    degrees: float

    def __post_init__(self):
        d = float(self.degrees)
        if not math.isfinite(d):
            raise ValueError(f"polarization angle must be finite, got {d!r}")
        d = d % 180.0
        if d >= 180.0:  # negative values within one ulp of 0 wrap to 180.0
            d = 0.0
        object.__setattr__(self, "degrees", d)

    def rotated(self, delta_degrees: float) -> "Polarization":
        return Polarization(self.degrees + delta_degrees)

    def is_close(self, other: "Polarization | float", tol: float = ANGLE_TOL) -> bool:
        od = other.degrees if isinstance(other, Polarization) else float(other) % 180.0
        diff = abs(self.degrees - od)
        return min(diff, 180.0 - diff) <= tol

    def __str__(self) -> str:
        return f"{self.degrees:g}°"


def _degrees(angle: "Polarization | float") -> float:
    return angle.degrees if isinstance(angle, Polarization) else float(angle)


@dataclass(frozen=True)
class EncodingTable:
    """Bijection between (bit, basis) pairs and four polarization angles.

    `angles` is indexed by state id (basis << 1) | bit, so the default order
    is (H, V, D, AD). Within each basis the two angles must be orthogonal
    (90 degrees apart).
    """

    angles: tuple[Polarization, Polarization, Polarization, Polarization]

    def __post_init__(self):
        if len(self.angles) != 4:
            raise ValueError("encoding table needs exactly four angles")
        angles = tuple(
            a if isinstance(a, Polarization) else Polarization(a) for a in self.angles
        )
        object.__setattr__(self, "angles", angles)
        for basis in Basis:
            a0 = angles[basis << 1].degrees
            a1 = angles[(basis << 1) | 1].degrees
            diff = abs(a0 - a1)
            if abs(min(diff, 180.0 - diff) - 90.0) > ANGLE_TOL:
                raise ValueError(f"{basis} angles {a0} and {a1} are not orthogonal")
        degs = [a.degrees for a in angles]
        for i in range(4):
            for j in range(i + 1, 4):
                diff = abs(degs[i] - degs[j])
                if min(diff, 180.0 - diff) <= ANGLE_TOL:
                    raise ValueError("encoding table angles must be distinct")

    @classmethod
    def default(cls) -> "EncodingTable":
        """Standard convention: 0 -> H or D, 1 -> V or AD."""
        return cls((Polarization(0.0), Polarization(90.0), Polarization(45.0), Polarization(135.0)))

    def angle(self, bit: int, basis: Basis) -> Polarization:
        if bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {bit!r}")
        return self.angles[(Basis(basis) << 1) | bit]

    def state_index(self, bit: int, basis: Basis) -> int:
        if bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {bit!r}")
        return (Basis(basis) << 1) | bit

    def state_name(self, angle: "Polarization | float", tol: float = ANGLE_TOL) -> str:
        pol = angle if isinstance(angle, Polarization) else Polarization(angle)
        for idx, a in enumerate(self.angles):
            if pol.is_close(a, tol):
                return STATE_NAMES[idx]
        raise NotABasisState(f"{pol} is not one of the table's four states")


DEFAULT_TABLE = EncodingTable.default()


def encode_state(bit: int, basis: Basis, table: EncodingTable = DEFAULT_TABLE) -> Polarization:
    """Polarization state carrying `bit` in `basis`."""
    return table.angle(bit, basis)


def decode_state(
    angle: "Polarization | float",
    basis: Basis,
    table: EncodingTable = DEFAULT_TABLE,
    tol: float = ANGLE_TOL,
) -> int:
    """Bit encoded by an eigenstate of `basis`.

    Raises NotABasisState if `angle` is not one of the basis's two table
    angles within `tol`; a non-eigenstate must be measured, not decoded.
    """
    pol = angle if isinstance(angle, Polarization) else Polarization(angle)
    for bit in (0, 1):
        if pol.is_close(table.angle(bit, basis), tol):
            return bit
    raise NotABasisState(f"{pol} is not an eigenstate of the {Basis(basis)} basis")


def transmission_fraction(state: "Polarization | float", analyzer: "Polarization | float") -> float:
    """Fraction of intensity passing an analyzer: cos^2 of the angle difference.

    Equals the probability that a single photon in `state` passes an analyzer
    at `analyzer`: 1 aligned, 0 crossed, 0.5 at 45 degrees.
    """
    delta = math.radians(_degrees(state) - _degrees(analyzer))
    c = math.cos(delta)
    return c * c


def measure_photon(
    state: "Polarization | float",
    basis: Basis,
    table: EncodingTable = DEFAULT_TABLE,
    rng=None,
) -> tuple[int, Polarization]:
    """Projective measurement of one photon in `basis`.

    Collapses to the bit-0 eigenstate with probability
    transmission_fraction(state, table.angle(0, basis)), else to the
    orthogonal eigenstate. `rng` must provide uniform draws in [0, 1)
    via .random() (e.g. numpy.random.Generator).
    """
    if rng is None:
        raise ValueError("measure_photon requires an explicit seeded rng")
    p_zero = transmission_fraction(state, table.angle(0, basis))
    bit = 0 if rng.random() < p_zero else 1
    return bit, table.angle(bit, basis)
