"""Bit-exact fixed-point numbers and the discretized uniform generator model.

Fixed-point values are stored as the raw cell integer ``z`` so that every
arithmetic fact about the machine representation (low bits, shifts, rounding)
is exact.  The uniform generator is modelled as ``N`` equiprobable grid draws
on ``]0, 1]``, each perturbed by a user-supplied bias map with a declared
sup-norm bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

# Absolute slack for bias-bound validation: biases built in double precision
# may overshoot the declared bound by a few ulps.
_BIAS_SLACK = 4 * np.finfo(float).eps


class RangeOverflowError(ValueError):
    """A value does not fit in the target fixed-point format."""


class BiasBoundError(ValueError):
    """A generator bias moved some grid value beyond its declared bound."""


@dataclass(frozen=True)
class FixedPointFormat:
    """Signed fixed-point layout.

    ``total_bits`` two's-complement bits, the low ``frac_bits`` of which hold
    the fractional part.  A stored integer ``z`` denotes the real number
    ``z * 2**-frac_bits`` exactly.  The representable cell range is
    ``[-2**(total_bits-1), 2**(total_bits-1) - 1]``.
    """

    total_bits: int
    frac_bits: int

    def __post_init__(self) -> None:
        if self.total_bits < 1:
            raise ValueError("total_bits must be positive")
        if not 0 <= self.frac_bits <= self.total_bits:
            raise ValueError("frac_bits must lie in [0, total_bits]")

    @property
    def min_z(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_z(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def resolution(self) -> Fraction:
        return Fraction(1, 1 << self.frac_bits)


@dataclass(frozen=True)
class FixedPointValue:
    """A fixed-point number: raw cell content ``z`` plus its format."""

    z: int
    fmt: FixedPointFormat

    def __post_init__(self) -> None:
        if not self.fmt.min_z <= self.z <= self.fmt.max_z:
            raise RangeOverflowError(
                f"z={self.z} outside [{self.fmt.min_z}, {self.fmt.max_z}]"
            )

    def as_fraction(self) -> Fraction:
        """The exact real value ``z * 2**-frac_bits``."""
        return Fraction(self.z, 1 << self.fmt.frac_bits)

    def to_float(self) -> float:
        # Exact whenever total_bits <= 53.
        return math.ldexp(self.z, -self.fmt.frac_bits)

    def to_json(self) -> dict:
        return {"z": self.z, "d": self.fmt.frac_bits}


def _round_half_even(q: Fraction) -> int:
    low = math.floor(q)
    rem = q - low
    half = Fraction(1, 2)
    if rem > half:
        return low + 1
    if rem < half:
        return low
    return low if low % 2 == 0 else low + 1


def fx_encode(x, fmt: FixedPointFormat) -> FixedPointValue:
    """Encode a real number into ``fmt``, rounding to nearest, ties to even.

    Accepts float, int, Fraction or Decimal.  Raises
    :class:`RangeOverflowError` when the rounded cell falls outside the
    format range.
    """
    q = Fraction(x) * (1 << fmt.frac_bits)
    z = _round_half_even(q)
    if not fmt.min_z <= z <= fmt.max_z:
        raise RangeOverflowError(f"{x!r} does not fit a {fmt.total_bits}-bit format")
    return FixedPointValue(z, fmt)


def fx_decode(v: FixedPointValue) -> float:
    return v.to_float()


def fx_mul_pow2(v: FixedPointValue, n: int) -> FixedPointValue:
    """Multiply by ``2**n`` (a left shift of the cell).

    The result always carries ``n`` trailing zero bits, which is what makes
    power-of-two noise scaling leak the low bits of whatever it is added to.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    z = v.z << n
    if not v.fmt.min_z <= z <= v.fmt.max_z:
        raise RangeOverflowError(f"shift by {n} overflows z={v.z}")
    return FixedPointValue(z, v.fmt)


def fx_add(a: FixedPointValue, b: FixedPointValue) -> FixedPointValue:
    """Exact fixed-point addition of two values in the same format."""
    if a.fmt != b.fmt:
        raise ValueError("operands must share a format")
    z = a.z + b.z
    if not a.fmt.min_z <= z <= a.fmt.max_z:
        raise RangeOverflowError("addition overflows the format")
    return FixedPointValue(z, a.fmt)


def fx_low_bits(v: FixedPointValue, n: int) -> str:
    """The ``n`` least significant bits of the cell, two's complement,
    printed most-significant-first."""
    if not 1 <= n <= v.fmt.total_bits:
        raise ValueError("n must lie in [1, total_bits]")
    return format(v.z & ((1 << n) - 1), f"0{n}b")


BiasFn = Callable[[float], float]


@dataclass(frozen=True)
class UniformGeneratorModel:
    """A discretized uniform source on ``]0, 1]``.

    The generator can emit exactly ``N`` values, the grid points
    ``{1/N, ..., N/N}``, each with probability exactly ``1/N``.  The bias map
    models a defective generator: grid point ``u`` is actually returned as
    ``bias(u)``, subject to ``|bias(u) - u| <= delta0`` for every grid point.
    The bias is an arbitrary callable so tests can explore worst cases.
    """

    N: int
    delta0: float = 0.0
    bias: Optional[BiasFn] = None

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.delta0 < 0:
            raise ValueError("delta0 must be non-negative")

    def grid_array(self) -> np.ndarray:
        """The unbiased grid ``{1/N, ..., N/N}`` as float64."""
        return np.arange(1, self.N + 1, dtype=np.float64) / self.N

    def biased_grid_array(self) -> np.ndarray:
        """The biased grid, validated against the declared bound."""
        grid = self.grid_array()
        if self.bias is None:
            return grid
        out = np.fromiter((self.bias(float(u)) for u in grid), dtype=np.float64,
                          count=self.N)
        dev = np.abs(out - grid)
        if dev.max(initial=0.0) > self.delta0 + _BIAS_SLACK:
            i = int(np.argmax(dev))
            raise BiasBoundError(
                f"bias moves grid point {grid[i]!r} by {dev[i]!r} > {self.delta0!r}"
            )
        return out

    def mass(self) -> Fraction:
        return Fraction(1, self.N)


def uniform_enumerate(model: UniformGeneratorModel) -> list[tuple[float, Fraction]]:
    """Enumerate the generator output: exactly ``N`` pairs ``(value, 1/N)``.

    Masses are exact rationals, so downstream verification introduces no
    rounding of its own.
    """
    values = model.biased_grid_array()
    m = model.mass()
    return [(float(u), m) for u in values]


def named_bias(spec: str, N: int, delta0: float) -> Optional[BiasFn]:
    """Build one of the admissible bias maps by name.

    All named biases preserve the ordering of distance-to-center ``|u - 1/2|``
    (so the noise pipeline keeps its norm-monotonicity contract) and leave the
    endpoint ``u = 1`` fixed.  Recognized specs:

    - ``identity`` (or empty): no bias
    - ``outward``: push every draw away from 1/2 by the full bound
    - ``inward``: pull every draw toward 1/2 by the full bound
    - ``quantize:K``: collapse draws onto a K-times-coarser grid
    - ``random:SEED``: seeded monotone jitter within the bound
    """
    if spec in ("", "identity", "none"):
        return None
    table = _center_distance_table(spec, N, delta0)
    half = 0.5

    def bias(u: float) -> float:
        t = abs(u - half)
        m = table.get(round(t * 2 * N))
        if m is None:
            return u
        return half + math.copysign(m, u - half) if u != half else half

    return bias


def _center_distance_table(spec: str, N: int, delta0: float) -> dict[int, float]:
    """Map each grid distance-to-center onto its biased distance.

    The biased distances are non-decreasing in the original distance and
    within ``delta0`` of it, which keeps the bias admissible.  Keys are
    ``round(2 * N * t)`` for grid distances ``t``.
    """
    ts = sorted({abs(i / N - 0.5) for i in range(1, N + 1)})
    cap = max(ts[:-1]) if len(ts) > 1 else ts[0]  # keep interior draws off 0 and 1
    if spec == "outward":
        ms = [min(t + delta0, cap) for t in ts[:-1]] + [ts[-1]]
    elif spec == "inward":
        ms = []
        for t in ts[:-1]:
            lo = ms[-1] if ms else 0.0
            ms.append(max(t - delta0, lo))
        ms.append(ts[-1])
    elif spec.startswith("quantize:"):
        k = int(spec.split(":", 1)[1])
        step = k / (2.0 * N)
        ms = []
        for t in ts[:-1]:
            q = math.floor(t / step) * step
            q = min(max(q, t - delta0, ms[-1] if ms else 0.0), min(t + delta0, cap))
            ms.append(q)
        ms.append(ts[-1])
    elif spec.startswith("random:"):
        seed = int(spec.split(":", 1)[1])
        rng = np.random.default_rng(seed)
        jitter = rng.uniform(-delta0, delta0, size=len(ts) - 1)
        ms = []
        for t, e in zip(ts[:-1], jitter):
            lo = ms[-1] if ms else 0.0
            ms.append(min(max(t + e, t - delta0, lo), min(t + delta0, cap)))
        ms.append(ts[-1])
    else:
        raise ValueError(f"unknown bias spec {spec!r}")
    return {round(2 * N * t): m for t, m in zip(ts, ms)}
