"""From implementation-error bounds to a certified degraded privacy level.

The chain is: a Lipschitz constant for the exact noise map on the truncation
region, a closeness certificate tying the implementation to the exact map, the
total distribution shift ``k * gen_bias + impl_error``, the rounding mass
ratio, and finally the degraded level

    eps' = eps + ln(1 + R * exp(eps * (L + shift) / sensitivity)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import Disc, Interval, Region


class DivergenceError(RuntimeError):
    """The fixpoint construction did not stabilize: the mechanism cannot be
    certified at these parameters."""


class DegenerateGridError(ValueError):
    """The rounding cell is too small relative to the distribution shift."""


class GridTooCoarseError(ValueError):
    """The check grid cannot support a sound windowed closeness scan."""


def lipschitz_bound_1d(eps: float, sensitivity: float, diam: float) -> float:
    """Slope bound of the Laplace inverse CDF over draws landing within
    ``diam`` of the answer: ``(2 * sensitivity / eps) * exp(eps * diam / sensitivity)``."""
    if eps <= 0 or sensitivity <= 0 or diam < 0:
        raise ValueError("eps and sensitivity must be positive, diam non-negative")
    return (2.0 * sensitivity / eps) * math.exp(eps * diam / sensitivity)


def lipschitz_bound_2d(eps: float, diam: float,
                       r_override: Optional[float] = None) -> tuple[float, float]:
    """Slope bounds for the planar sampler over a region of diameter ``diam``.

    Returns ``(radial, combined)``: the radial inverse-CDF bound
    ``exp(eps * diam) / (2*eps + r*eps**2)`` with ``r`` defaulting to ``diam``
    (override available since the worst case depends on the certified radius
    range), and the combined polar-map constant
    ``sqrt(radial**2 + 2*pi*diam)``.
    """
    if eps <= 0 or diam < 0:
        raise ValueError("eps must be positive and diam non-negative")
    r = diam if r_override is None else r_override
    radial = math.exp(eps * diam) / (2.0 * eps + r * eps * eps)
    combined = math.sqrt(radial * radial + 2.0 * math.pi * diam)
    return radial, combined


def total_shift(k: float, gen_bias: float, impl_error: float) -> float:
    """Worst-case shift between exact and implemented noise distributions:
    ``k * gen_bias + impl_error``."""
    if k < 0 or gen_bias < 0 or impl_error < 0:
        raise ValueError("arguments must be non-negative")
    return k * gen_bias + impl_error


def rounding_ratio(cell_side: float, shift: float, dimension: int) -> float:
    """Worst-case cell mass ratio under a ``shift``-sized boundary move.

    One dimension: ``(L + 2s) / (L - 2s)``; two dimensions: the square of
    that.  Defined only while ``L > 2s``.
    """
    if dimension not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    if shift < 0:
        raise ValueError("shift must be non-negative")
    if cell_side <= 2.0 * shift:
        raise DegenerateGridError(
            f"cell side {cell_side} must exceed twice the shift {shift}"
        )
    r = (cell_side + 2.0 * shift) / (cell_side - 2.0 * shift)
    return r if dimension == 1 else r * r


def rounding_ratio_volume_form(cell_side: float, shift: float,
                               dimension: int) -> float:
    """The literal shell-volume ratio ``vol(S^+s \\ S^-s) / vol(S^-s)``.

    Reported alongside the closed forms used in the privacy bound; for cubic
    cells it equals ``((L+2s)/(L-2s))**d - 1``.
    """
    return rounding_ratio(cell_side, shift, dimension) - 1.0


def degraded_epsilon(eps: float, ratio: float, cell_side: float,
                     shift: float, sensitivity: float) -> float:
    """The certified privacy level of the corrected implementation:
    ``eps + ln(1 + ratio * exp(eps * (cell_side + shift) / sensitivity))``.

    Strictly greater than ``eps`` and monotone in every argument.
    """
    if eps <= 0 or sensitivity <= 0:
        raise ValueError("eps and sensitivity must be positive")
    if ratio < 1.0:
        raise ValueError("ratio must be at least 1")
    if cell_side < 0 or shift < 0:
        raise ValueError("cell_side and shift must be non-negative")
    return eps + math.log1p(ratio * math.exp(eps * (cell_side + shift) / sensitivity))


# --- closeness certification ---------------------------------------------------

HOLDS = "holds"
FAILS = "fails"
IMPOSSIBLE = "impossible"

_ALL_PAIRS_LIMIT = 1500
_WINDOW = 64


@dataclass(frozen=True)
class ClosenessCertificate:
    """Outcome of checking ``d(n(u), n'(v)) <= k * d(u, v) + delta`` on a grid.

    ``impossible`` means no implementation at all can be that close to the
    exact map: some pair of exact values already gaps by more than
    ``k * d(u, v) + 2 * delta``.
    """

    k: float
    delta: float
    domain: str
    verdict: str
    witness: Optional[tuple[float, float, float]] = None
    measured_k: float = 0.0
    measured_gap: float = 0.0


def measure_closeness(n_fn: Callable[[float], float],
                      n_impl_fn: Callable[[float], float],
                      grid: Sequence[float]) -> tuple[float, float]:
    """Measured Lipschitz slope of ``n_fn`` and sup gap to ``n_impl_fn``.

    The pair ``(k, delta)`` returned here is the tightest certificate the
    grid can witness.
    """
    us = np.asarray(sorted(grid), dtype=np.float64)
    exact = np.array([n_fn(float(u)) for u in us])
    impl = np.array([n_impl_fn(float(u)) for u in us])
    gap = float(np.max(np.abs(exact - impl))) if us.size else 0.0
    if us.size < 2:
        return 0.0, gap
    slopes = np.abs(np.diff(exact)) / np.diff(us)
    return float(np.max(slopes)), gap


def closeness_check(n_fn: Callable[[float], float],
                    n_impl_fn: Callable[[float], float],
                    domain_grid: Sequence[float],
                    k: float,
                    delta: float) -> ClosenessCertificate:
    """Certify closeness of an implementation to the exact map on a grid.

    Small grids are scanned over all pairs.  Large grids use a windowed scan
    whose soundness is guarded by the grid modulus of continuity: if every
    adjacent exact-value step fits under ``k`` times the spacing, the
    telescoped bound covers all out-of-window pairs; otherwise the grid is
    too coarse to conclude anything and :class:`GridTooCoarseError` is
    raised.  Also scans for pairs proving that no implementation can be
    ``(k, delta)``-close at all.
    """
    us = np.asarray(sorted(float(u) for u in domain_grid), dtype=np.float64)
    if us.size == 0:
        raise ValueError("empty domain grid")
    exact = np.array([n_fn(float(u)) for u in us])
    impl = np.array([n_impl_fn(float(u)) for u in us])
    domain = f"grid[{us[0]!r}, {us[-1]!r}] ({us.size} points)"

    diag = np.abs(exact - impl)
    measured_gap = float(diag.max())
    if us.size >= 2:
        measured_k = float(np.max(np.abs(np.diff(exact)) / np.diff(us)))
    else:
        measured_k = 0.0

    def cert(verdict: str, witness=None) -> ClosenessCertificate:
        return ClosenessCertificate(k=k, delta=delta, domain=domain,
                                    verdict=verdict, witness=witness,
                                    measured_k=measured_k,
                                    measured_gap=measured_gap)

    n = us.size
    small = n <= _ALL_PAIRS_LIMIT

    # impossibility first: a gap between exact values that closeness could
    # never absorb rules out every implementation
    imp = _scan_pairs(us, exact, exact, k, 2.0 * delta, small)
    if imp is not None:
        return cert(IMPOSSIBLE, imp)

    violation = _scan_pairs(us, exact, impl, k, delta, small)
    if violation is None and not small:
        # windowed scan is only conclusive when the telescoping guard holds
        if measured_k > k * (1.0 + 1e-12):
            raise GridTooCoarseError(
                "exact map exceeds the Lipschitz budget between grid points; "
                "refine the grid or raise k"
            )
        if measured_gap > delta:
            i = int(np.argmax(diag))
            violation = (float(us[i]), float(us[i]), float(diag[i]))
    if violation is not None:
        return cert(FAILS, violation)
    return cert(HOLDS)


def _scan_pairs(us: np.ndarray, left: np.ndarray, right: np.ndarray,
                k: float, slack: float, all_pairs: bool):
    """First pair with ``|left(u) - right(v)| > k|u - v| + slack``, or None."""
    tol = 1e-12 * (1.0 + abs(slack))
    n = us.size
    if all_pairs:
        for i in range(n):
            gaps = np.abs(left[i] - right) - k * np.abs(us[i] - us)
            j = int(np.argmax(gaps))
            if gaps[j] > slack + tol:
                return (float(us[i]), float(us[j]), float(np.abs(left[i] - right[j])))
        return None
    for i in range(n):
        j0, j1 = max(0, i - _WINDOW), min(n, i + _WINDOW + 1)
        gaps = np.abs(left[i] - right[j0:j1]) - k * np.abs(us[i] - us[j0:j1])
        j = int(np.argmax(gaps))
        if gaps[j] > slack + tol:
            return (float(us[i]), float(us[j0 + j]),
                    float(np.abs(left[i] - right[j0 + j])))
    # extremes catch long-range gaps the window cannot see
    i, j = int(np.argmin(left)), int(np.argmax(left))
    gap = abs(left[j] - right[i])
    if gap > k * abs(us[j] - us[i]) + slack + tol:
        return (float(us[i]), float(us[j]), float(gap))
    return None


# --- safe-preimage fixpoint -----------------------------------------------------

@dataclass(frozen=True)
class SafePreimage:
    """Description of the certified draw domain.

    Draws whose exact noise norm stays at or below ``norm_bound`` are covered
    by the closeness certificate; everything else is guaranteed to truncate.
    """

    norm_bound: float
    k: float
    impl_error: float
    shift: float
    iterations: int
    condition_margin_ok: bool

    def describe(self) -> str:
        return f"{{u : |n(u)| <= {self.norm_bound!r}}}"


def safe_preimage_fixpoint(region: Region,
                           tail_slack: float,
                           gen_bias: float,
                           closeness_oracle: Callable[[Region], tuple[float, float]],
                           tol: float = 1e-9,
                           max_iter: int = 100) -> SafePreimage:
    """Iterate the closeness domain until the region dilation stabilizes.

    Starting from the truncation region itself, each step asks the oracle for
    ``(k, impl_error)`` on the current dilated region and dilates by the
    implied shift ``k * gen_bias + impl_error``.  Stops when the dilation is
    stable within ``tol``; raises :class:`DivergenceError` when it keeps
    growing, which signals the mechanism cannot be certified at these
    parameters.

    ``tail_slack`` is the extra noise-norm margin defining the certified
    preimage; the returned flag records whether it covers the final shift
    (draws beyond the bound then provably truncate).
    """
    if tail_slack < 0 or gen_bias < 0:
        raise ValueError("tail_slack and gen_bias must be non-negative")
    diam = region.diameter()
    shift = 0.0
    k, impl_error = 0.0, 0.0
    for iteration in range(1, max_iter + 1):
        k, impl_error = closeness_oracle(region.dilate(shift))
        if k < 0 or impl_error < 0:
            raise ValueError("oracle returned a negative bound")
        new_shift = total_shift(k, gen_bias, impl_error)
        if not math.isfinite(new_shift) or new_shift > 1e12 * (1.0 + diam):
            raise DivergenceError(
                f"shift blew up to {new_shift} after {iteration} iterations"
            )
        if abs(new_shift - shift) <= tol:
            return SafePreimage(norm_bound=diam + tail_slack, k=k,
                                impl_error=impl_error, shift=new_shift,
                                iterations=iteration,
                                condition_margin_ok=tail_slack >= new_shift - tol)
        shift = new_shift
    raise DivergenceError(f"no stable dilation after {max_iter} iterations")


# --- the full budget ------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessBudget:
    """Every quantity of the certified degraded-privacy computation."""

    epsilon: float
    sensitivity: float
    lipschitz_k: float
    gen_bias_bound: float
    impl_error_bound: float
    shift: float
    cell_side: float
    mass_ratio: float
    degraded_epsilon: float
    dimension: int
    region_diameter: float
    tail_slack: float
    mass_ratio_volume_form: float
    radial_k: Optional[float] = None

    def __post_init__(self) -> None:
        expected = total_shift(self.lipschitz_k, self.gen_bias_bound,
                               self.impl_error_bound)
        if abs(self.shift - expected) > 1e-9 * (1.0 + expected):
            raise ValueError("shift is not k * gen_bias + impl_error")
        if self.cell_side <= 2.0 * self.shift:
            raise DegenerateGridError("cell side must exceed twice the shift")
        if self.mass_ratio < 1.0:
            raise ValueError("mass ratio must be at least 1")
        if self.degraded_epsilon < self.epsilon:
            raise ValueError("degraded level cannot improve on the exact level")

    def to_json(self) -> dict:
        out = {
            "epsilon": self.epsilon,
            "sensitivity": self.sensitivity,
            "lipschitz_k": self.lipschitz_k,
            "gen_bias_bound": self.gen_bias_bound,
            "impl_error_bound": self.impl_error_bound,
            "shift": self.shift,
            "cell_side": self.cell_side,
            "mass_ratio": self.mass_ratio,
            "mass_ratio_volume_form": self.mass_ratio_volume_form,
            "degraded_epsilon": self.degraded_epsilon,
            "dimension": self.dimension,
            "region_diameter": self.region_diameter,
            "tail_slack": self.tail_slack,
        }
        if self.radial_k is not None:
            out["radial_k"] = self.radial_k
        return out


def budget_1d(eps: float, sensitivity: float, region: Interval,
              gen_bias: float, impl_error: float, cell_side: float,
              tail_slack: Optional[float] = None) -> RobustnessBudget:
    """Assemble the one-dimensional budget from the closed-form bounds."""
    diam = region.diameter()
    k = lipschitz_bound_1d(eps, sensitivity, diam)
    shift = total_shift(k, gen_bias, impl_error)
    ratio = rounding_ratio(cell_side, shift, 1)
    return RobustnessBudget(
        epsilon=eps, sensitivity=sensitivity, lipschitz_k=k,
        gen_bias_bound=gen_bias, impl_error_bound=impl_error, shift=shift,
        cell_side=cell_side, mass_ratio=ratio,
        degraded_epsilon=degraded_epsilon(eps, ratio, cell_side, shift,
                                          sensitivity),
        dimension=1, region_diameter=diam,
        tail_slack=shift if tail_slack is None else tail_slack,
        mass_ratio_volume_form=rounding_ratio_volume_form(cell_side, shift, 1),
    )


def budget_2d(eps: float, sensitivity: float, region: Disc,
              gen_bias: float, impl_error: float, cell_side: float,
              tail_slack: Optional[float] = None,
              r_override: Optional[float] = None) -> RobustnessBudget:
    """Assemble the planar budget from the closed-form bounds.

    The rate driving the radial bounds is ``eps / sensitivity``, matching the
    sampler's parametrization.
    """
    diam = region.diameter()
    rate = eps / sensitivity
    radial, k = lipschitz_bound_2d(rate, diam, r_override)
    shift = total_shift(k, gen_bias, impl_error)
    ratio = rounding_ratio(cell_side, shift, 2)
    return RobustnessBudget(
        epsilon=eps, sensitivity=sensitivity, lipschitz_k=k,
        gen_bias_bound=gen_bias, impl_error_bound=impl_error, shift=shift,
        cell_side=cell_side, mass_ratio=ratio,
        degraded_epsilon=degraded_epsilon(eps, ratio, cell_side, shift,
                                          sensitivity),
        dimension=2, region_diameter=diam,
        tail_slack=shift if tail_slack is None else tail_slack,
        mass_ratio_volume_form=rounding_ratio_volume_form(cell_side, shift, 2),
        radial_k=radial,
    )
