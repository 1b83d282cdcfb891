"""Noise samplers, the additive mechanism, and its truncation and rounding
corrections.

Samplers are exact maps from a uniform draw to a noise value (inverse-CDF
form), so that driving them with an enumerated generator yields the exact
output distribution of the implemented mechanism.  ``run_mechanism`` composes
query answer + noise, truncation to a compact region, and rounding to a grid;
given a generator model instead of a single draw it returns the full reported
distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .distributions import (
    EXCEPTION,
    DiscreteDistribution,
    RoundingGrid,
)
from .geometry import Disc, Interval, PointLike, Region, as_point
from .numrep import UniformGeneratorModel


class ConvergenceError(RuntimeError):
    """Numerical inversion failed to reach the requested tolerance."""


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy level and query sensitivity.

    Everything internal works with the rate ``eps / sensitivity`` (the
    exponential decay of the noise density); the scale parameter of the
    noise is its reciprocal.
    """

    eps: float
    sensitivity: float = 1.0

    def __post_init__(self) -> None:
        if self.eps <= 0 or self.sensitivity <= 0:
            raise ValueError("eps and sensitivity must be positive")

    @property
    def rate(self) -> float:
        return self.eps / self.sensitivity

    @property
    def scale(self) -> float:
        return self.sensitivity / self.eps


@dataclass(frozen=True)
class Query:
    """A deterministic query with declared exact and implementation error.

    ``delta_f`` is the exact sensitivity; ``delta_impl`` bounds the pointwise
    difference between the exact query and its implementation.
    """

    name: str
    evaluator: Callable
    delta_f: float
    delta_impl: float = 0.0

    def __post_init__(self) -> None:
        if self.delta_f < 0 or self.delta_impl < 0:
            raise ValueError("sensitivities must be non-negative")


def inflated_sensitivity(delta_f: float, delta_impl: float) -> float:
    """Worst-case sensitivity of the implemented query: ``delta_f + 2*delta_impl``."""
    if delta_f < 0 or delta_impl < 0:
        raise ValueError("arguments must be non-negative")
    return delta_f + 2.0 * delta_impl


def count_query_eval(records: Iterable, predicate: Optional[Callable] = None) -> float:
    """Count the records matching a predicate (sensitivity-1 toy query)."""
    if predicate is None:
        return float(sum(1 for _ in records))
    return float(sum(1 for r in records if predicate(r)))


def make_count_query(name: str = "count",
                     predicate: Optional[Callable] = None) -> Query:
    return Query(name, lambda records: count_query_eval(records, predicate),
                 delta_f=1.0)


# --- reported answers ---------------------------------------------------------

VALUE = "value"
EXC = "exception"
EXC_POS = "+exception"
EXC_NEG = "-exception"


@dataclass(frozen=True)
class ReportedAnswer:
    """What the mechanism reports: a point, or an exception marker.

    Signed exception markers only arise from the one-dimensional signed
    truncation variant; they record on which side the answer escaped.
    """

    kind: str
    point: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in (VALUE, EXC, EXC_POS, EXC_NEG):
            raise ValueError(f"bad answer kind {self.kind!r}")
        if (self.kind == VALUE) != (self.point is not None):
            raise ValueError("exactly value answers carry a point")

    @classmethod
    def value(cls, point: PointLike) -> "ReportedAnswer":
        return cls(VALUE, as_point(point))

    @classmethod
    def exception(cls, sign: int = 0) -> "ReportedAnswer":
        if sign > 0:
            return cls(EXC_POS)
        if sign < 0:
            return cls(EXC_NEG)
        return cls(EXC)

    @property
    def is_exception(self) -> bool:
        return self.kind != VALUE

    def scalar(self) -> float:
        if self.point is None or len(self.point) != 1:
            raise ValueError("not a one-dimensional value")
        return self.point[0]

    def to_json(self):
        if self.kind == VALUE:
            pt = self.point
            return {"value": pt[0] if len(pt) == 1 else list(pt)}
        return {"exception": {EXC: "inf", EXC_POS: "+inf", EXC_NEG: "-inf"}[self.kind]}


# --- exact samplers -----------------------------------------------------------

def laplace_inv_cdf(u: float, params: PrivacyParams) -> float:
    """Inverse cumulative function of the centered Laplace noise.

    Strictly increasing on ``(0, 1)`` with median 0; the endpoints map to
    ``-inf`` and ``+inf`` (measure-zero draws that the truncation step turns
    into exceptions).
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    s = u - 0.5
    if s == 0.0:
        return 0.0
    arg = 1.0 - 2.0 * abs(s)
    if arg <= 0.0:
        return math.copysign(math.inf, s)
    return -params.scale * math.copysign(math.log(arg), s)


def laplace_cdf(x: float, params: PrivacyParams) -> float:
    """Forward cumulative function matching :func:`laplace_inv_cdf`."""
    t = math.exp(-params.rate * abs(x))
    return 0.5 * t if x < 0 else 1.0 - 0.5 * t


def laplace_density(x: float, params: PrivacyParams) -> float:
    """Density ``(rate / 2) * exp(-rate * |x|)``; integrates to one."""
    return 0.5 * params.rate * math.exp(-params.rate * abs(x))


def laplace_inv_cdf_array(u: np.ndarray, params: PrivacyParams) -> np.ndarray:
    """Vectorized :func:`laplace_inv_cdf`; endpoints become ``+-inf``."""
    s = np.asarray(u, dtype=np.float64) - 0.5
    with np.errstate(divide="ignore"):
        out = -params.scale * np.sign(s) * np.log1p(-2.0 * np.abs(s))
    return out


def planar_radius_cdf(r: float, eps: float) -> float:
    """Cumulative function of the planar noise radius: ``1 - (1 + eps*r) * exp(-eps*r)``."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = eps * r
    return -math.expm1(-t) - t * math.exp(-t)


def planar_radius_density(r: float, eps: float) -> float:
    """Radial density ``eps**2 * r * exp(-eps*r)``."""
    t = eps * r
    return eps * eps * r * math.exp(-t)


def planar_radius_inv(u: float, eps: float, tol: float = 1e-13,
                      max_iter: int = 200) -> float:
    """Invert the radial cumulative function to residual ``tol``.

    Bracketing by doubling, then bisection with Newton refinement (the
    derivative is available in closed form).  Raises
    :class:`ConvergenceError` if the residual tolerance is not reached
    within the iteration cap.
    """
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    if u == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0 / eps
    while planar_radius_cdf(hi, eps) < u:
        hi *= 2.0
        if hi > 1e300:
            raise ConvergenceError("bracketing failed")
    r = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f = planar_radius_cdf(r, eps) - u
        if abs(f) <= tol:
            return r
        if f > 0:
            hi = r
        else:
            lo = r
        d = planar_radius_density(r, eps)
        step = r - f / d if d > 0 else None
        r = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
    raise ConvergenceError(f"no convergence to |C(r)-u| <= {tol} after {max_iter} steps")


def planar_radius_inv_array(u: np.ndarray, eps: float, tol: float = 1e-13,
                            max_iter: int = 200) -> np.ndarray:
    """Vectorized radial inversion; ``u == 1`` maps to ``inf``."""
    u = np.asarray(u, dtype=np.float64)
    out = np.empty_like(u)
    for i, ui in enumerate(u.ravel()):
        if ui >= 1.0:
            out.ravel()[i] = math.inf
        else:
            out.ravel()[i] = planar_radius_inv(float(ui), eps, tol, max_iter)
    return out


def planar_sample(u_r: float, u_theta: float, eps: float) -> tuple[float, float]:
    """One planar noise draw from two uniforms.

    The angle is ``-pi + 2*pi*u_theta``; the radius inverts the radial
    cumulative function at ``u_r``.
    """
    if not 0.0 <= u_theta <= 1.0:
        raise ValueError("u_theta must lie in [0, 1]")
    theta = -math.pi + 2.0 * math.pi * u_theta
    r = planar_radius_inv(u_r, eps)
    return (r * math.cos(theta), r * math.sin(theta))


# --- truncation and rounding --------------------------------------------------

def truncate(y: PointLike, region: Region, signed: bool = False,
             remap: bool = False) -> ReportedAnswer:
    """Replace answers outside the region by the exception value.

    With ``signed`` (one-dimensional regions only) the exception carries the
    escape side, and with ``remap`` it is folded back onto the nearer
    endpoint, recovering the classic clamp-to-range truncation.
    """
    pt = as_point(y)
    finite = all(math.isfinite(c) for c in pt)
    if finite and region.contains(pt):
        return ReportedAnswer.value(pt)
    if not signed:
        return ReportedAnswer.exception()
    if len(pt) != 1 or not isinstance(region, Interval):
        raise ValueError("signed truncation is one-dimensional")
    sign = 1 if pt[0] > region.hi or pt[0] == math.inf else -1
    if remap:
        return ReportedAnswer.value(region.hi if sign > 0 else region.lo)
    return ReportedAnswer.exception(sign)


def round_answer(ans: ReportedAnswer, grid: RoundingGrid) -> ReportedAnswer:
    """Snap a value answer to the nearest grid point; exceptions pass through.

    Idempotent: grid points round to themselves.
    """
    if ans.is_exception:
        return ans
    return ReportedAnswer.value(grid.round_point(ans.point))


# --- the composed mechanism ---------------------------------------------------

LAPLACE = "laplace"
PLANAR = "planar"
NONE = "none"


def _noise_scalar(kind: str, params: Optional[PrivacyParams], u) -> tuple[float, ...]:
    if kind == NONE:
        return (0.0,) if isinstance(u, (int, float)) else (0.0, 0.0)
    if kind == LAPLACE:
        return (laplace_inv_cdf(float(u), params),)
    if kind == PLANAR:
        u_r, u_theta = u
        if u_r >= 1.0:
            return (math.inf, math.inf)
        return planar_sample(float(u_r), float(u_theta), params.rate)
    raise ValueError(f"unknown noise kind {kind!r}")


def run_mechanism(query_result: PointLike,
                  noise_kind: str,
                  params: Optional[PrivacyParams],
                  region: Region,
                  grid: RoundingGrid,
                  source,
                  signed: bool = False,
                  remap: bool = False,
                  cell_aligned: bool = False):
    """Run the corrected mechanism: add noise, truncate, round.

    ``source`` is either a single uniform draw (scalar for one-dimensional
    noise, a ``(u_r, u_theta)`` pair for planar noise), in which case one
    :class:`ReportedAnswer` is returned, or a
    :class:`~fpdp.numrep.UniformGeneratorModel`, in which case the exact
    distribution of reported answers (keyed by rounding-cell index) is
    returned.

    ``cell_aligned`` strengthens truncation to reject any answer whose whole
    rounding cell does not fit inside the region, which makes every
    observable event a union of full grid cells.
    """
    if isinstance(source, UniformGeneratorModel):
        return output_distribution(query_result, noise_kind, params, region,
                                   grid, source, signed=signed, remap=remap,
                                   cell_aligned=cell_aligned)
    answer = as_point(query_result)
    noise = _noise_scalar(noise_kind, params, source)
    if len(noise) != len(answer):
        raise ValueError("noise and answer dimensions differ")
    y = tuple(a + n for a, n in zip(answer, noise))
    if cell_aligned:
        trunc = _truncate_cell_aligned(y, region, grid)
    else:
        trunc = truncate(y, region, signed=signed, remap=remap)
    return round_answer(trunc, grid)


def _cell_fits_region(index, region: Region, grid: RoundingGrid) -> bool:
    """Does the rounding cell of this grid point lie entirely in the region?"""
    pt = grid.point_of(index)
    half = 0.5 * grid.side
    if grid.dim == 1:
        return region.contains(pt - half) and region.contains(pt + half)
    x, y = pt
    corners = ((x - half, y - half), (x - half, y + half),
               (x + half, y - half), (x + half, y + half))
    return all(region.contains(c) for c in corners)


def _truncate_cell_aligned(y: tuple[float, ...], region: Region,
                           grid: RoundingGrid) -> ReportedAnswer:
    if any(not math.isfinite(c) for c in y):
        return ReportedAnswer.exception()
    idx = grid.round_index(y[0] if len(y) == 1 else y)
    if _cell_fits_region(idx, region, grid):
        return ReportedAnswer.value(y)
    return ReportedAnswer.exception()


def _allowed_cell_table(region: Region, grid: RoundingGrid,
                        ki: np.ndarray, kj: Optional[np.ndarray] = None):
    """Boolean lookup of rounding cells fully inside the region."""
    if grid.dim == 1:
        lo, hi = int(ki.min()), int(ki.max())
        table = np.zeros(hi - lo + 1, dtype=bool)
        for k in range(lo, hi + 1):
            table[k - lo] = _cell_fits_region(k, region, grid)
        return table, lo
    ilo, ihi = int(ki.min()), int(ki.max())
    jlo, jhi = int(kj.min()), int(kj.max())
    table = np.zeros((ihi - ilo + 1, jhi - jlo + 1), dtype=bool)
    for i in range(ilo, ihi + 1):
        for j in range(jlo, jhi + 1):
            table[i - ilo, j - jlo] = _cell_fits_region((i, j), region, grid)
    return table, (ilo, jlo)


def noise_value_arrays(noise_kind: str,
                       params: Optional[PrivacyParams],
                       model: UniformGeneratorModel) -> tuple[np.ndarray, ...]:
    """Enumerated noise coordinates for every generator tuple.

    One-dimensional kinds use one draw (``N`` values); the planar kind uses
    the full two-draw product (``N**2`` values, radius draw crossed with
    angle draw).  Endpoint draws yield infinities, which downstream
    truncation reports as exceptions.
    """
    u = model.biased_grid_array()
    if noise_kind == LAPLACE:
        return (laplace_inv_cdf_array(u, params),)
    if noise_kind == NONE:
        return (np.zeros_like(u),)
    if noise_kind == PLANAR:
        radii = planar_radius_inv_array(u, params.rate)
        theta = -math.pi + 2.0 * math.pi * u
        nx = np.outer(radii, np.cos(theta)).ravel()
        ny = np.outer(radii, np.sin(theta)).ravel()
        return (nx, ny)
    raise ValueError(f"unknown noise kind {noise_kind!r}")


def output_distribution(query_result: PointLike,
                        noise_kind: str,
                        params: Optional[PrivacyParams],
                        region: Region,
                        grid: RoundingGrid,
                        model: UniformGeneratorModel,
                        signed: bool = False,
                        remap: bool = False,
                        cell_aligned: bool = False,
                        noise: Optional[tuple[np.ndarray, ...]] = None
                        ) -> DiscreteDistribution:
    """Exact distribution of the corrected mechanism's reported answers.

    Atom locations are rounding-cell indices (plus the exception atom), which
    is the observable sigma-algebra of the rounded mechanism.  Masses are
    exact tuple counts over the enumerated generator.  Pass ``noise`` to
    reuse the enumerated noise coordinates across answers.

    Both signed exception flavors land in the single exception cell of the
    observable algebra, so ``signed`` only changes the distribution through
    ``remap``.
    """
    answer = as_point(query_result)
    if noise is None:
        noise = noise_value_arrays(noise_kind, params, model)
    if len(noise) != len(answer):
        raise ValueError("noise and answer dimensions differ")
    total = noise[0].size
    if grid.dim != len(answer):
        raise ValueError("grid dimension must match the answer")

    if len(answer) == 1:
        y = answer[0] + noise[0]
        if remap and isinstance(region, Interval):
            # clamp variant: escaped answers fold onto the nearer endpoint
            y = np.clip(y, region.lo, region.hi)
        if isinstance(region, Interval):
            inside = (y >= region.lo) & (y <= region.hi)
        else:
            inside = np.fromiter((region.contains(float(v)) if math.isfinite(v)
                                  else False for v in y), dtype=bool, count=total)
        counts: dict = {}
        exc = int(total - np.count_nonzero(inside))
        ki = np.floor((y[inside] - grid.origin[0]) / grid.side + 0.5).astype(np.int64)
        if cell_aligned and ki.size:
            table, lo = _allowed_cell_table(region, grid, ki)
            ok = table[ki - lo]
            exc += int(ki.size - np.count_nonzero(ok))
            ki = ki[ok]
        if ki.size:
            uniq, cnt = np.unique(ki, return_counts=True)
            counts = {int(k): int(c) for k, c in zip(uniq, cnt)}
        if exc:
            counts[EXCEPTION] = exc
        return DiscreteDistribution.from_counts(counts, total)

    # planar case
    yx = answer[0] + noise[0]
    yy = answer[1] + noise[1]
    finite = np.isfinite(yx) & np.isfinite(yy)
    if isinstance(region, Disc):
        cx, cy = region.center
        inside = finite.copy()
        inside[finite] = ((yx[finite] - cx) ** 2 + (yy[finite] - cy) ** 2
                          <= region.radius ** 2)
    else:
        inside = finite.copy()
        idxs = np.nonzero(finite)[0]
        inside[idxs] = [region.contains((float(yx[i]), float(yy[i]))) for i in idxs]
    ki = np.floor((yx[inside] - grid.origin[0]) / grid.side + 0.5).astype(np.int64)
    kj = np.floor((yy[inside] - grid.origin[1]) / grid.side + 0.5).astype(np.int64)
    exc = int(total - np.count_nonzero(inside))
    if cell_aligned and ki.size:
        table, (ilo, jlo) = _allowed_cell_table(region, grid, ki, kj)
        ok = table[ki - ilo, kj - jlo]
        exc += int(ki.size - np.count_nonzero(ok))
        ki, kj = ki[ok], kj[ok]
    counts = {}
    if ki.size:
        span = int(kj.max() - kj.min() + 1)
        code = (ki - ki.min()) * span + (kj - kj.min())
        uniq, cnt = np.unique(code, return_counts=True)
        base_i, base_j = int(ki.min()), int(kj.min())
        for c, n in zip(uniq, cnt):
            counts[(base_i + int(c) // span, base_j + int(c) % span)] = int(n)
    if exc:
        counts[EXCEPTION] = exc
    return DiscreteDistribution.from_counts(counts, total)
