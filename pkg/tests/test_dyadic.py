from fractions import Fraction
import random

import pytest

from crystal_certificates.crystals.dyadic import (
    ONE,
    ZERO,
    DyadicInterval,
    DyadicScalar,
    Ordering,
    dyd_add,
    dyd_cmp,
    dyd_mul,
)


def random_dyadic(rng):
    return DyadicScalar(rng.randint(-(1 << 40), 1 << 40), rng.randint(-20, 60))


def test_canonical_form():
    assert DyadicScalar(4, 2) == ONE
    assert (DyadicScalar(4, 2).mantissa, DyadicScalar(4, 2).exponent) == (1, 0)
    assert (DyadicScalar(6, 3).mantissa, DyadicScalar(6, 3).exponent) == (3, 2)
    assert (DyadicScalar(0, 17).mantissa, DyadicScalar(0, 17).exponent) == (0, 0)
    assert DyadicScalar(0, 17) == ZERO


def test_pow2_and_log2():
    assert DyadicScalar.pow2(10) == 1024
    assert DyadicScalar.pow2(-3).to_fraction() == Fraction(1, 8)
    assert DyadicScalar.pow2(-3).log2() == -3
    with pytest.raises(ValueError):
        DyadicScalar(3, 1).log2()


def test_operations_match_fraction_oracle():
    rng = random.Random(20240501)
    for _ in range(2000):
        a, b = random_dyadic(rng), random_dyadic(rng)
        fa, fb = a.to_fraction(), b.to_fraction()
        assert (a + b).to_fraction() == fa + fb
        assert (a - b).to_fraction() == fa - fb
        assert (a * b).to_fraction() == fa * fb
        assert dyd_add(a, b) == a + b
        assert dyd_mul(a, b) == a * b
        assert (a < b) == (fa < fb)
        assert (a == b) == (fa == fb)
        expected = Ordering((fa > fb) - (fa < fb))
        assert dyd_cmp(a, b) is expected


def test_ordering_laws():
    rng = random.Random(7)
    values = sorted((random_dyadic(rng) for _ in range(300)), key=DyadicScalar.to_fraction)
    assert values == sorted(values)
    for a, b in zip(values, values[1:]):
        assert a <= b
        assert not b < a


def test_integers_mix_in():
    half = DyadicScalar.pow2(-1)
    assert half + 1 == DyadicScalar(3, 1)
    assert 1 - half == half
    assert 2 * half == 1
    assert 0 < half < 1
    assert DyadicScalar(7, 1).floor() == 3
    assert DyadicScalar(-7, 1).floor() == -4


def test_scale_multiplies_by_power_of_two():
    value = DyadicScalar(3, 4)
    assert value.scale(4) == 3
    assert value.scale(-2).to_fraction() == Fraction(3, 64)


def test_json_keeps_big_mantissas_exact():
    big = DyadicScalar((1 << 200) + 1, 7)
    data = big.to_json()
    assert data == {"m": str((1 << 200) + 1), "e": 7}
    assert DyadicScalar.from_json(data) == big


def test_from_fraction_rejects_non_dyadic():
    assert DyadicScalar.from_fraction(Fraction(5, 16)) == DyadicScalar(5, 4)
    with pytest.raises(ValueError):
        DyadicScalar.from_fraction(Fraction(1, 3))


def test_coerce_refuses_floats_and_bools():
    with pytest.raises(TypeError):
        DyadicScalar.coerce(0.5)
    with pytest.raises(TypeError):
        DyadicScalar.coerce(True)


def test_values_key_dicts():
    counts = {DyadicScalar(2, 1): "one"}
    assert counts[ONE] == "one"


def test_interval_geometry():
    interval = DyadicInterval(DyadicScalar(4), 2)
    assert interval.right == 8
    assert interval.on_unit_grid()
    assert interval.contains(4) and not interval.contains(8)
    assert interval.is_within(0, 8)
    assert not interval.overlaps(DyadicInterval(8, 3))
    assert interval.overlaps(DyadicInterval(7, 0))
    assert interval.translate(4).left == 8
    assert not DyadicInterval(DyadicScalar.pow2(-1), -1).on_unit_grid()
