"""Norms, distances and compact regions on R^m (m = 1 or 2).

Regions are restricted to the three shapes the analysis needs: intervals,
axis-aligned boxes and Euclidean discs.  Dilation and erosion keep each shape
in its own family; the one exception is box dilation under L1/L2, which
returns the bounding box (the conservative enclosure used when rounding cells
are squares but the ambient norm is Euclidean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

PointLike = Union[float, int, Sequence[float]]


def as_point(x: PointLike) -> tuple[float, ...]:
    """Normalize a scalar or sequence to a coordinate tuple."""
    if isinstance(x, (int, float)):
        return (float(x),)
    t = tuple(float(c) for c in x)
    if len(t) not in (1, 2):
        raise ValueError("points must have dimension 1 or 2")
    return t


def distance(a: PointLike, b: PointLike, p: float = 2) -> float:
    """L_p distance between two points of equal dimension."""
    ta, tb = as_point(a), as_point(b)
    if len(ta) != len(tb):
        raise ValueError(f"dimension mismatch: {len(ta)} vs {len(tb)}")
    diffs = [abs(x - y) for x, y in zip(ta, tb)]
    return _norm(diffs, p)


def _norm(coords: Sequence[float], p: float) -> float:
    if p == 1:
        return sum(abs(c) for c in coords)
    if p == 2:
        return math.hypot(*coords)
    if p == math.inf:
        return max(abs(c) for c in coords)
    raise ValueError("norm must be one of 1, 2, inf")


class EmptyRegion:
    """The empty region, produced by over-erosion."""

    def contains(self, x: PointLike) -> bool:
        return False

    def diameter(self, p: float = 2) -> float:
        return 0.0

    def dilate(self, eps: float, p: float = 2) -> "EmptyRegion":
        return self

    def erode(self, eps: float, p: float = 2) -> "EmptyRegion":
        return self

    def __repr__(self) -> str:
        return "EmptyRegion()"

    def __eq__(self, other) -> bool:
        return isinstance(other, EmptyRegion)

    def __hash__(self) -> int:
        return hash("EmptyRegion")


EMPTY = EmptyRegion()


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] on the line."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError("interval needs lo <= hi")

    @property
    def dimension(self) -> int:
        return 1

    def contains(self, x: PointLike) -> bool:
        (c,) = as_point(x)
        return self.lo <= c <= self.hi

    def diameter(self, p: float = 2) -> float:
        return self.hi - self.lo

    def dilate(self, eps: float, p: float = 2) -> "Interval":
        _check_eps(eps)
        return Interval(self.lo - eps, self.hi + eps)

    def erode(self, eps: float, p: float = 2) -> Union["Interval", EmptyRegion]:
        _check_eps(eps)
        if self.hi - self.lo < 2 * eps:
            return EMPTY
        return Interval(self.lo + eps, self.hi - eps)


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box: componentwise [lower, upper]."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo, hi = as_point(self.lower), as_point(self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise ValueError("corner dimensions differ")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("box needs lower <= upper componentwise")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def contains(self, x: PointLike) -> bool:
        t = as_point(x)
        if len(t) != len(self.lower):
            raise ValueError("dimension mismatch")
        return all(a <= c <= b for a, c, b in zip(self.lower, t, self.upper))

    def diameter(self, p: float = 2) -> float:
        return _norm([b - a for a, b in zip(self.lower, self.upper)], p)

    def dilate(self, eps: float, p: float = 2) -> "Box":
        # Exact for L-inf; for L1/L2 this is the bounding box of the true
        # dilation (rounded corners are enclosed, never dropped).
        _check_eps(eps)
        return Box(tuple(a - eps for a in self.lower),
                   tuple(b + eps for b in self.upper))

    def erode(self, eps: float, p: float = 2) -> Union["Box", EmptyRegion]:
        # Exact for every p: a p-ball fits the box iff each axis margin does.
        _check_eps(eps)
        lo = tuple(a + eps for a in self.lower)
        hi = tuple(b - eps for b in self.upper)
        if any(a > b for a, b in zip(lo, hi)):
            return EMPTY
        return Box(lo, hi)


@dataclass(frozen=True)
class Disc:
    """Closed Euclidean disc in the plane."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        c = as_point(self.center)
        if len(c) != 2:
            raise ValueError("disc center must be 2-dimensional")
        object.__setattr__(self, "center", c)
        if self.radius < 0:
            raise ValueError("radius must be non-negative")

    @property
    def dimension(self) -> int:
        return 2

    def contains(self, x: PointLike) -> bool:
        t = as_point(x)
        if len(t) != 2:
            raise ValueError("dimension mismatch")
        return math.hypot(t[0] - self.center[0], t[1] - self.center[1]) <= self.radius

    def diameter(self, p: float = 2) -> float:
        self._require_l2(p)
        return 2.0 * self.radius

    def dilate(self, eps: float, p: float = 2) -> "Disc":
        _check_eps(eps)
        self._require_l2(p)
        return Disc(self.center, self.radius + eps)

    def erode(self, eps: float, p: float = 2) -> Union["Disc", EmptyRegion]:
        _check_eps(eps)
        self._require_l2(p)
        if self.radius < eps:
            return EMPTY
        return Disc(self.center, self.radius - eps)

    def _require_l2(self, p: float) -> None:
        if p != 2:
            raise ValueError("disc regions are only defined for the L2 norm")


Region = Union[Interval, Box, Disc, EmptyRegion]


def _check_eps(eps: float) -> None:
    if eps < 0:
        raise ValueError("eps must be non-negative")


def diameter(region: Region, p: float = 2) -> float:
    return region.diameter(p)


def neighbor_plus(region: Region, eps: float, p: float = 2) -> Region:
    """The set of points within ``eps`` of the region (closed dilation)."""
    return region.dilate(eps, p)


def neighbor_minus(region: Region, eps: float, p: float = 2) -> Region:
    """Points whose ``eps``-ball stays inside the region; may be empty."""
    return region.erode(eps, p)


def region_from_json(obj: dict) -> Region:
    """Parse the config encoding of a region.

    Accepted forms: ``{"interval": [lo, hi]}``, ``{"box": [[...], [...]]}``,
    ``{"disc": {"center": [x, y], "radius": r}}``.
    """
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"bad region spec: {obj!r}")
    (kind, body), = obj.items()
    if kind == "interval":
        lo, hi = body
        return Interval(float(lo), float(hi))
    if kind == "box":
        lo, hi = body
        return Box(tuple(lo), tuple(hi))
    if kind == "disc":
        return Disc(tuple(body["center"]), float(body["radius"]))
    raise ValueError(f"unknown region kind {kind!r}")


def region_to_json(region: Region) -> dict:
    if isinstance(region, Interval):
        return {"interval": [region.lo, region.hi]}
    if isinstance(region, Box):
        return {"box": [list(region.lower), list(region.upper)]}
    if isinstance(region, Disc):
        return {"disc": {"center": list(region.center), "radius": region.radius}}
    if isinstance(region, EmptyRegion):
        return {"empty": True}
    raise TypeError(f"not a region: {region!r}")
