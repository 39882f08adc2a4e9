import random
from fractions import Fraction

import pytest

from zkfl.fixedpoint import (
    FX_ZERO,
    FxConfig,
    FxNum,
    decode,
    encode,
    fx_add,
    fx_check,
    fx_cmp,
    fx_div_int,
    fx_from_wire,
    fx_mul,
    fx_neg,
    fx_sub,
    fx_to_wire,
    to_float,
)

CFG = FxConfig()
S = CFG.scale


def test_config_invariants():
    with pytest.raises(ValueError):
        FxConfig(scale_bits=0)
    with pytest.raises(ValueError):
        FxConfig(scale_bits=16, magnitude_bits=30)  # < 2*16 + 8
    assert FxConfig(scale_bits=1, magnitude_bits=10).scale == 2


def test_encode_exact_dyadic():
    assert encode(1.5, CFG) == FxNum(98304, False)
    assert encode(-0.25, CFG) == FxNum(16384, True)
    assert encode(0, CFG) == FX_ZERO


def test_encode_rounds_half_away_from_zero():
    # oracle: exact rational rounding of 0.1 * 65536 = 6553.6
    exact = Fraction(1, 10) * S
    assert exact == Fraction(65536, 10)
    assert encode(0.1, CFG) == FxNum(6554, False)
    assert encode(-0.1, CFG) == FxNum(6554, True)
    # ties go away from zero
    assert encode(Fraction(1, 2 * S), CFG).magnitude == 1
    assert encode(Fraction(-1, 2 * S), CFG) == FxNum(1, True)


def test_encode_overflow():
    with pytest.raises(OverflowError):
        encode(float(1 << 33), CFG)  # magnitude would be 2**49


def test_decode_examples():
    assert decode(FxNum(98304, False), CFG) == Fraction(3, 2) == 1.5
    assert decode(FX_ZERO, CFG) == 0
    assert decode(FxNum(6554, False), CFG) == Fraction(6554, 65536)
    assert float(decode(FxNum(6554, False), CFG)) == 0.100006103515625
    assert to_float(FxNum(98304, True), CFG) == -1.5


def test_add_examples():
    three = encode(3, CFG)
    minus_five = encode(-5, CFG)
    assert fx_add(three, minus_five, CFG) == encode(-2, CFG)
    x = FxNum(12345, True)
    assert fx_add(x, FX_ZERO, CFG) == x
    five = encode(5, CFG)
    assert fx_add(fx_neg(five), five, CFG) == FX_ZERO  # canonical zero


def test_add_overflow():
    big = FxNum(CFG.magnitude_limit - 1, False)
    with pytest.raises(OverflowError):
        fx_add(big, encode(1, CFG), CFG)


def test_mul_examples():
    assert fx_mul(encode(1.5, CFG), encode(2.0, CFG), CFG) == FxNum(196608, False)
    assert fx_mul(FxNum(777, True), FX_ZERO, CFG) == FX_ZERO
    assert fx_mul(encode(-0.5, CFG), encode(0.5, CFG), CFG) == FxNum(16384, True)


def test_mul_truncates_toward_zero():
    # 1/S * 1/S rescales to zero magnitude
    eps = FxNum(1, False)
    assert fx_mul(eps, eps, CFG) == FX_ZERO
    assert fx_mul(FxNum(1, True), eps, CFG) == FX_ZERO  # canonical, not (0, True)


def test_neg_sub_cmp_examples():
    assert fx_neg(FX_ZERO) == FX_ZERO
    assert fx_cmp(encode(-1, CFG), encode(1, CFG)) == -1
    assert fx_cmp(encode(1, CFG), encode(1, CFG)) == 0
    assert fx_sub(encode(2.0, CFG), encode(3.5, CFG), CFG) == encode(-1.5, CFG)


def test_div_int_truncates():
    assert fx_div_int(FxNum(7, False), 2) == FxNum(3, False)
    assert fx_div_int(FxNum(7, True), 2) == FxNum(3, True)
    assert fx_div_int(FxNum(1, True), 2) == FX_ZERO  # canonical zero


def test_wire_roundtrip():
    x = FxNum(98304, True)
    assert fx_to_wire(x) == ["98304", 1]
    assert fx_from_wire(["98304", 1], CFG) == x
    with pytest.raises(ValueError):
        fx_from_wire(["0", 1], CFG)  # non-canonical zero
    with pytest.raises(OverflowError):
        fx_from_wire([str(CFG.magnitude_limit), 0], CFG)


def test_check_validates():
    with pytest.raises(ValueError):
        fx_check(FxNum(0, True), CFG)
    assert fx_check(FxNum(5, True), CFG) == FxNum(5, True)


def test_homomorphism_and_truncation_direction():
    rng = random.Random(1234)
    for _ in range(2000):
        a = encode(rng.uniform(-100, 100), CFG)
        b = encode(rng.uniform(-100, 100), CFG)
        # addition and subtraction are exact
        assert decode(fx_add(a, b, CFG), CFG) == decode(a, CFG) + decode(b, CFG)
        assert decode(fx_sub(a, b, CFG), CFG) == decode(a, CFG) - decode(b, CFG)
        # multiplication is within 1/S and never rounds away from zero
        prod = fx_mul(a, b, CFG)
        exact = decode(a, CFG) * decode(b, CFG)
        assert abs(decode(prod, CFG) - exact) <= Fraction(1, S)
        assert abs(decode(prod, CFG)) <= abs(exact)
        # canonical zero everywhere
        for v in (fx_add(a, b, CFG), fx_sub(a, b, CFG), prod, fx_neg(a)):
            assert not (v.magnitude == 0 and v.negative)


def test_determinism():
    rng1, rng2 = random.Random(9), random.Random(9)
    for _ in range(200):
        x1, x2 = rng1.uniform(-50, 50), rng2.uniform(-50, 50)
        y1, y2 = rng1.uniform(-50, 50), rng2.uniform(-50, 50)
        a1, b1 = encode(x1, CFG), encode(y1, CFG)
        a2, b2 = encode(x2, CFG), encode(y2, CFG)
        assert (a1, b1) == (a2, b2)
        assert fx_mul(a1, b1, CFG) == fx_mul(a2, b2, CFG)
        assert fx_add(a1, b1, CFG) == fx_add(a2, b2, CFG)


def test_cmp_total_order():
    rng = random.Random(77)
    values = [encode(rng.uniform(-10, 10), CFG) for _ in range(50)]
    decoded = sorted(values, key=lambda v: decode(v, CFG))
    chained = sorted(values, key=lambda v: (v.magnitude if not v.negative else -v.magnitude))
    assert [decode(v, CFG) for v in decoded] == [decode(v, CFG) for v in chained]
    for a in values[:10]:
        for b in values[:10]:
            c = fx_cmp(a, b)
            diff = decode(a, CFG) - decode(b, CFG)
            assert c == (diff > 0) - (diff < 0)
