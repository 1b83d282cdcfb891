import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fpdp.numrep import (
    BiasBoundError,
    FixedPointFormat,
    FixedPointValue,
    RangeOverflowError,
    UniformGeneratorModel,
    fx_add,
    fx_encode,
    fx_low_bits,
    fx_mul_pow2,
    named_bias,
    uniform_enumerate,
)

FMT16 = FixedPointFormat(16, 6)


class TestEncode:
    def test_zero(self):
        assert fx_encode(0, FMT16).z == 0

    def test_known_value_with_low_bits(self):
        v = fx_encode(1 + 2 ** -5, FMT16)
        assert v.z == 66
        assert fx_low_bits(v, 2) == "10"

    def test_three_sixteenths_plus(self):
        v = fx_encode(3 * 2 ** -4 + 2 ** -5, FMT16)
        assert v.z == 14

    def test_overflow(self):
        with pytest.raises(RangeOverflowError):
            fx_encode(1 << 12, FMT16)

    def test_ties_round_to_even(self):
        # 2**-7 * 2**6 = 0.5 exactly: nearest even cell is 0
        assert fx_encode(2 ** -7, FMT16).z == 0
        # 3 * 2**-7 * 2**6 = 1.5 exactly: nearest even cell is 2
        assert fx_encode(3 * 2 ** -7, FMT16).z == 2

    def test_encode_error_at_most_half_cell(self):
        for x in [0.3, -0.77, 5.001, -3.999]:
            v = fx_encode(x, FMT16)
            assert abs(v.as_fraction() - Fraction(x)) <= Fraction(1, 2 ** 7)

    @given(st.integers(min_value=-(1 << 15), max_value=(1 << 15) - 1))
    def test_round_trip(self, z):
        v = FixedPointValue(z, FMT16)
        assert fx_encode(v.as_fraction(), FMT16) == v
        assert fx_encode(v.to_float(), FMT16) == v


class TestMulPow2:
    def test_zero(self):
        assert fx_mul_pow2(FixedPointValue(0, FMT16), 2).z == 0

    def test_shift(self):
        v = fx_mul_pow2(FixedPointValue(5, FMT16), 2)
        assert v.z == 20
        assert fx_low_bits(v, 2) == "00"

    def test_negative(self):
        assert fx_mul_pow2(FixedPointValue(-3, FMT16), 3).z == -24

    def test_overflow(self):
        with pytest.raises(RangeOverflowError):
            fx_mul_pow2(FixedPointValue(FMT16.max_z, FMT16), 1)

    @given(st.integers(min_value=-(1 << 12), max_value=(1 << 12) - 1),
           st.integers(min_value=1, max_value=3))
    def test_low_bits_always_zero(self, z, n):
        v = fx_mul_pow2(FixedPointValue(z, FMT16), n)
        assert fx_low_bits(v, n) == "0" * n
        assert v.as_fraction() == FixedPointValue(z, FMT16).as_fraction() * 2 ** n


class TestLowBits:
    def test_examples(self):
        assert fx_low_bits(FixedPointValue(66, FMT16), 2) == "10"
        assert fx_low_bits(FixedPointValue(0, FMT16), 2) == "00"
        assert fx_low_bits(FixedPointValue(14, FMT16), 2) == "10"

    def test_twos_complement_negative(self):
        assert fx_low_bits(FixedPointValue(-3, FMT16), 2) == "01"
        assert fx_low_bits(FixedPointValue(-1, FMT16), 4) == "1111"

    def test_bad_n(self):
        with pytest.raises(ValueError):
            fx_low_bits(FixedPointValue(1, FMT16), 0)
        with pytest.raises(ValueError):
            fx_low_bits(FixedPointValue(1, FMT16), 17)


class TestFormat:
    def test_invariants(self):
        with pytest.raises(ValueError):
            FixedPointFormat(0, 0)
        with pytest.raises(ValueError):
            FixedPointFormat(8, 9)

    def test_range(self):
        fmt = FixedPointFormat(8, 4)
        assert fmt.min_z == -128
        assert fmt.max_z == 127
        with pytest.raises(RangeOverflowError):
            FixedPointValue(128, fmt)

    def test_add(self):
        fmt = FixedPointFormat(8, 4)
        assert fx_add(FixedPointValue(3, fmt), FixedPointValue(-5, fmt)).z == -2

    def test_json(self):
        assert FixedPointValue(66, FMT16).to_json() == {"z": 66, "d": 6}


class TestGeneratorModel:
    def test_identity_enumeration(self):
        model = UniformGeneratorModel(N=4)
        pairs = uniform_enumerate(model)
        assert pairs == [(0.25, Fraction(1, 4)), (0.5, Fraction(1, 4)),
                         (0.75, Fraction(1, 4)), (1.0, Fraction(1, 4))]
        assert sum(m for _, m in pairs) == 1

    def test_biased_enumeration(self):
        model = UniformGeneratorModel(N=2, delta0=0.01, bias=lambda u: u + 0.01)
        values = [v for v, _ in uniform_enumerate(model)]
        assert values == pytest.approx([0.51, 1.01])
        assert all(m == Fraction(1, 2) for _, m in uniform_enumerate(model))

    def test_single_point(self):
        assert uniform_enumerate(UniformGeneratorModel(N=1)) == [(1.0, Fraction(1))]

    def test_bias_bound_enforced(self):
        model = UniformGeneratorModel(N=4, delta0=0.01, bias=lambda u: u + 0.5)
        with pytest.raises(BiasBoundError):
            uniform_enumerate(model)

    def test_bound_allows_exact_delta0(self):
        d0 = 2.0 ** -16
        model = UniformGeneratorModel(N=256, delta0=d0, bias=lambda u: u - d0)
        values = [v for v, _ in uniform_enumerate(model)]
        grid = [i / 256 for i in range(1, 257)]
        assert all(abs(v - g) <= d0 * (1 + 1e-9) for v, g in zip(values, grid))

    @pytest.mark.parametrize("spec", ["outward", "inward", "quantize:4",
                                      "random:7", "random:123"])
    def test_named_biases_admissible(self, spec):
        n, d0 = 512, 1.0 / 512
        bias = named_bias(spec, n, d0)
        model = UniformGeneratorModel(N=n, delta0=d0, bias=bias)
        values = model.biased_grid_array()
        # within the bound, inside ]0, 1], endpoint pinned
        assert values[-1] == 1.0
        assert (values > 0).all() and (values <= 1).all()
        # distance-to-center ordering is preserved (norm monotonicity contract)
        grid = model.grid_array()
        order = sorted(range(n), key=lambda i: abs(grid[i] - 0.5))
        dists = [abs(values[i] - 0.5) for i in order]
        assert all(a <= b + 1e-15 for a, b in zip(dists, dists[1:]))

    def test_named_bias_identity(self):
        assert named_bias("identity", 16, 0.1) is None
