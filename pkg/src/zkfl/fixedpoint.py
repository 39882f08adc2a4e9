"""Deterministic sign-magnitude fixed-point arithmetic.

Numbers are stored as an unsigned integer magnitude plus a sign flag and
represent magnitude / 2**scale_bits.  The same semantics (truncating
rescale after multiplication, canonical +0, hard overflow) are enforced
by the training circuit, so native and in-circuit results agree bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple


@dataclass(frozen=True)
class FxConfig:
    """Scale and width of the fixed-point representation.

    scale_bits:      value scale S = 2**scale_bits
    magnitude_bits:  any magnitude must stay below 2**magnitude_bits
    """

    scale_bits: int = 16
    magnitude_bits: int = 48

    def __post_init__(self):
        if self.scale_bits < 1:
            raise ValueError("scale_bits must be >= 1")
        # one un-rescaled product plus headroom must fit the width
        if self.magnitude_bits < 2 * self.scale_bits + 8:
            raise ValueError(
                "magnitude_bits must be >= 2*scale_bits + 8 "
                f"(got {self.magnitude_bits} for scale_bits={self.scale_bits})"
            )

    @property
    def scale(self) -> int:
        return 1 << self.scale_bits

    @property
    def magnitude_limit(self) -> int:
        return 1 << self.magnitude_bits

    def to_json(self) -> dict:
        return {"scale_bits": self.scale_bits, "magnitude_bits": self.magnitude_bits}

    @classmethod
    def from_json(cls, obj: dict) -> "FxConfig":
        return cls(scale_bits=int(obj["scale_bits"]), magnitude_bits=int(obj["magnitude_bits"]))


class FxNum(NamedTuple):
    """A fixed-point number: (-1)**negative * magnitude / S."""

    magnitude: int
    negative: bool = False


FX_ZERO = FxNum(0, False)


def fx_check(a: FxNum, cfg: FxConfig) -> FxNum:
    """Validate well-formedness (canonical zero, range); returns the value."""
    if a.magnitude < 0 or a.magnitude >= cfg.magnitude_limit:
        raise OverflowError(f"magnitude {a.magnitude} out of range")
    if a.magnitude == 0 and a.negative:
        raise ValueError("non-canonical zero (0, negative)")
    return a


def _from_signed(value: int, cfg: FxConfig) -> FxNum:
    mag = -value if value < 0 else value
    if mag >= cfg.magnitude_limit:
        raise OverflowError(f"magnitude {mag} exceeds 2**{cfg.magnitude_bits}")
    return FxNum(mag, value < 0)


def _to_signed(a: FxNum) -> int:
    return -a.magnitude if a.negative else a.magnitude


def encode(x, cfg: FxConfig) -> FxNum:
    """Encode a real number, rounding half away from zero.

    Accepts ints, floats and Fractions; floats are converted exactly.
    """
    frac = Fraction(x) * cfg.scale
    num, den = abs(frac.numerator), frac.denominator
    mag = (2 * num + den) // (2 * den)  # round half away from zero on |x|*S
    if mag >= cfg.magnitude_limit:
        raise OverflowError(f"{x} does not fit {cfg.magnitude_bits}-bit magnitude")
    if mag == 0:
        return FX_ZERO
    return FxNum(mag, frac < 0)


def decode(a: FxNum, cfg: FxConfig) -> Fraction:
    """Exact rational value represented by ``a``."""
    return Fraction(_to_signed(a), cfg.scale)


def to_float(a: FxNum, cfg: FxConfig) -> float:
    return _to_signed(a) / cfg.scale


def fx_add(a: FxNum, b: FxNum, cfg: FxConfig) -> FxNum:
    return _from_signed(_to_signed(a) + _to_signed(b), cfg)


def fx_sub(a: FxNum, b: FxNum, cfg: FxConfig) -> FxNum:
    return _from_signed(_to_signed(a) - _to_signed(b), cfg)


def fx_neg(a: FxNum) -> FxNum:
    if a.magnitude == 0:
        return FX_ZERO
    return FxNum(a.magnitude, not a.negative)


def fx_mul(a: FxNum, b: FxNum, cfg: FxConfig) -> FxNum:
    """Multiply with truncation toward zero after the rescale by S."""
    mag = (a.magnitude * b.magnitude) >> cfg.scale_bits
    if mag >= cfg.magnitude_limit:
        raise OverflowError("product magnitude overflow")
    if mag == 0:
        return FX_ZERO
    return FxNum(mag, a.negative != b.negative)


def fx_div_int(a: FxNum, k: int) -> FxNum:
    """Divide by a positive integer, truncating toward zero."""
    if k < 1:
        raise ValueError("divisor must be >= 1")
    mag = a.magnitude // k
    if mag == 0:
        return FX_ZERO
    return FxNum(mag, a.negative)


def fx_cmp(a: FxNum, b: FxNum) -> int:
    """Total order on represented values: -1, 0 or 1."""
    va, vb = _to_signed(a), _to_signed(b)
    return (va > vb) - (va < vb)


def fx_to_wire(a: FxNum) -> list:
    """Wire form used in JSON transactions: [decimal magnitude string, sign bit]."""
    return [str(a.magnitude), 1 if a.negative else 0]


def fx_from_wire(obj, cfg: FxConfig) -> FxNum:
    mag_s, sign = obj
    return fx_check(FxNum(int(mag_s), bool(sign)), cfg)
