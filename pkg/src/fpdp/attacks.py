"""Executable demonstrations that the uncorrected mechanism leaks.

Two attacks, both evaluated by exhaustive enumeration rather than sampling:

* the fixed-point attack, where scaling machine noise by a power of two
  zeroes its low bits, so the reported answer's low bits are the secret's;
* the step-distribution attack, where quantizing the uniform source turns
  the noise law into a step function whose per-cell ratios overshoot the
  ideal privacy ratio in the tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .distributions import EXCEPTION, DiscreteDistribution, RoundingAlgebra, RoundingGrid
from .mechanisms import PrivacyParams, laplace_inv_cdf_array
from .numrep import FixedPointFormat, fx_encode

_ATTACK_FORMAT_BITS = 48


@dataclass(frozen=True)
class AttackReport:
    """Outcome of one attack run.

    ``support_r1``/``support_r2`` are the reachable reported values for the
    two secrets, ``overlap`` their intersection.  ``empirical_eps`` and
    ``distinguish_prob`` are computed on the attacker's observable cells
    (low-bit patterns for the fixed-point attack, rounding cells for the
    step attack); ``cell_masses`` carries the per-value mass tables used for
    plotting.  ``extra`` holds attack-specific metrics.
    """

    params: dict
    support_r1: tuple
    support_r2: tuple
    overlap: tuple
    empirical_eps: float
    distinguish_prob: float
    cell_masses: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def enc(v):
            if v is EXCEPTION:
                return "EXCEPTION"
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return v

        return {
            "params": self.params,
            "support_r1": [enc(v) for v in self.support_r1],
            "support_r2": [enc(v) for v in self.support_r2],
            "overlap": [enc(v) for v in self.overlap],
            "empirical_eps": enc(self.empirical_eps),
            "distinguish_prob": self.distinguish_prob,
            "extra": {k: enc(v) for k, v in self.extra.items()},
        }

    def mass_rows(self) -> list[dict]:
        """Per-reported-value masses for both secrets, for CSV export."""
        m1 = self.cell_masses.get("r1", {})
        m2 = self.cell_masses.get("r2", {})
        keys = sorted(set(m1) | set(m2), key=lambda v: (v is EXCEPTION, v))
        rows = []
        for k in keys:
            rows.append({
                "value": "EXCEPTION" if k is EXCEPTION else k,
                "mass_r1": float(m1.get(k, 0)),
                "mass_r2": float(m2.get(k, 0)),
            })
        return rows


def vulnerable_difference(n_exp: int, k_int: int, h: int, d: int) -> float:
    """A secret difference ``(2**n * k + h) / 2**d`` in the broken family.

    ``h`` must lie in ``1 .. 2**n - 1``; any pair of secrets differing by
    this amount keeps disjoint low-bit fingerprints after noise scaled by
    ``2**n`` is added at ``d`` fractional bits.
    """
    if not 1 <= h <= (1 << n_exp) - 1:
        raise ValueError(f"h must lie in [1, {(1 << n_exp) - 1}]")
    return ((1 << n_exp) * k_int + h) / float(1 << d)


def _distinguish_prob(counts1: dict, counts2: dict, total: int) -> float:
    """Bayes success of the optimal attacker under a uniform prior."""
    keys = set(counts1) | set(counts2)
    acc = Fraction(0)
    for k in keys:
        acc += max(Fraction(counts1.get(k, 0), total),
                   Fraction(counts2.get(k, 0), total))
    return float(acc / 2)


def _pattern_epsilon(counts1: dict, counts2: dict) -> float:
    keys = set(counts1) | set(counts2)
    worst = 0.0
    for k in keys:
        c1, c2 = counts1.get(k, 0), counts2.get(k, 0)
        if c1 == 0 and c2 == 0:
            continue
        if c1 == 0 or c2 == 0:
            return math.inf
        worst = max(worst, abs(math.log(c1) - math.log(c2)))
    return worst


def fixedpoint_attack(n_exp: int, d: int, r1: float, r2: float,
                      N: int = 1 << 16) -> AttackReport:
    """Reproduce the low-bit fingerprint attack by exhaustive enumeration.

    The machine noise is modelled as the unit-scale Laplace inverse CDF
    evaluated on the midpoint grid ``(2i-1)/(2N)`` and stored at ``d``
    fractional bits; scaling by ``2**n_exp`` then zeroes its ``n_exp`` low
    bits, so adding it to an encoded secret preserves the secret's low bits
    exactly.  The attacker's observable is the low-bit pattern of the
    reported value.
    """
    fmt = FixedPointFormat(_ATTACK_FORMAT_BITS, d)
    z1 = fx_encode(r1, fmt).z
    z2 = fx_encode(r2, fmt).z
    u = (2.0 * np.arange(1, N + 1, dtype=np.float64) - 1.0) / (2.0 * N)
    noise = laplace_inv_cdf_array(u, PrivacyParams(eps=1.0, sensitivity=1.0))
    # np.rint rounds halfway cases to even, matching fx_encode exactly
    z_noise = np.rint(noise * (1 << d)).astype(np.int64) << n_exp
    mask = (1 << n_exp) - 1

    reports = []
    pattern_counts = []
    value_masses = []
    for z_secret in (z1, z2):
        z_rep = z_secret + z_noise
        reports.append(z_rep)
        patterns, counts = np.unique(z_rep & mask, return_counts=True)
        pattern_counts.append({int(p): int(c) for p, c in zip(patterns, counts)})
        values, counts = np.unique(z_rep, return_counts=True)
        value_masses.append({math.ldexp(int(z), -d): Fraction(int(c), N)
                             for z, c in zip(values, counts)})

    support1 = tuple(sorted(value_masses[0]))
    support2 = tuple(sorted(value_masses[1]))
    overlap = tuple(sorted(set(support1) & set(support2)))
    eps_hat = _pattern_epsilon(pattern_counts[0], pattern_counts[1])
    dp = _distinguish_prob(pattern_counts[0], pattern_counts[1], N)
    fingerprint = [format(z1 & mask, f"0{n_exp}b"), format(z2 & mask, f"0{n_exp}b")]
    return AttackReport(
        params={"n_exp": n_exp, "d": d, "r1": r1, "r2": r2, "N": N,
                "scale": float(1 << n_exp)},
        support_r1=support1,
        support_r2=support2,
        overlap=overlap,
        empirical_eps=eps_hat,
        distinguish_prob=dp,
        cell_masses={"r1": value_masses[0], "r2": value_masses[1]},
        extra={"fingerprints": fingerprint,
               "patterns_r1": sorted(pattern_counts[0]),
               "patterns_r2": sorted(pattern_counts[1])},
    )


def step_distribution_attack(N: int, params: PrivacyParams, r1: float, r2: float,
                             grid: RoundingGrid,
                             center_window: Optional[float] = None) -> AttackReport:
    """Measure how source quantization inflates per-cell privacy ratios.

    Builds both output distributions by pushing the grid ``{1/N..1}`` through
    the exact inverse CDF (no fixed-point encoding, no truncation), bins them
    on the rounding grid and compares each cell's mass ratio to the ideal
    ratio ``exp(eps * d(r1, r2) / sensitivity)``.  Cells where exactly one
    side is empty are reported separately; the headline ratio is the largest
    finite one.  ``center_window`` restricts an additional summary to cells
    within that distance of the midpoint, where masses are healthy and the
    quantization error is the only effect.
    """
    u = np.arange(1, N + 1, dtype=np.float64) / N
    noise = laplace_inv_cdf_array(u, params)
    theoretical = math.exp(params.rate * abs(r1 - r2))
    algebra = RoundingAlgebra(grid)

    cells = []
    for r in (r1, r2):
        y = r + noise
        finite = np.isfinite(y)
        ki = np.floor((y[finite] - grid.origin[0]) / grid.side).astype(np.int64)
        uniq, cnt = np.unique(ki, return_counts=True)
        table = {int(c): int(n) for c, n in zip(uniq, cnt)}
        if int(np.count_nonzero(~finite)):
            table[EXCEPTION] = int(np.count_nonzero(~finite))
        cells.append(table)

    c1, c2 = cells
    keys = set(c1) | set(c2)
    ratios = {}
    one_sided = []
    for k in keys:
        a, b = c1.get(k, 0), c2.get(k, 0)
        if a == 0 or b == 0:
            one_sided.append(k)
            continue
        ratios[k] = max(a / b, b / a)
    max_ratio = max(ratios.values()) if ratios else 1.0
    inflated = sorted((k for k, r in ratios.items() if r > theoretical),
                      key=lambda k: (k is EXCEPTION, k))

    extra = {
        "theoretical_ratio": theoretical,
        "max_finite_ratio": max_ratio,
        "max_relative_excess": max_ratio / theoretical - 1.0,
        "inflated_cells": [k for k in inflated],
        "one_sided_cells": sorted((k for k in one_sided),
                                  key=lambda k: (k is EXCEPTION, k)),
    }
    if center_window is not None:
        mid = 0.5 * (r1 + r2)
        windowed = [r for k, r in ratios.items()
                    if k is not EXCEPTION
                    and abs(grid.point_of(k) - mid) <= center_window]
        extra["center_max_ratio"] = max(windowed) if windowed else 1.0
        extra["center_max_excess"] = (max(windowed) / theoretical - 1.0
                                      if windowed else 0.0)

    masses = [{(k if k is EXCEPTION else grid.point_of(k)): Fraction(c, N)
               for k, c in table.items()} for table in cells]
    support1 = tuple(sorted(c1, key=lambda k: (k is EXCEPTION, k)))
    support2 = tuple(sorted(c2, key=lambda k: (k is EXCEPTION, k)))
    eps_hat = _pattern_epsilon(c1, c2)
    return AttackReport(
        params={"N": N, "eps": params.eps, "sensitivity": params.sensitivity,
                "r1": r1, "r2": r2, "cell_side": grid.side},
        support_r1=support1,
        support_r2=support2,
        overlap=tuple(sorted(set(support1) & set(support2),
                             key=lambda k: (k is EXCEPTION, k))),
        empirical_eps=eps_hat,
        distinguish_prob=_distinguish_prob(c1, c2, N),
        cell_masses={"r1": masses[0], "r2": masses[1]},
        extra=extra,
    )
