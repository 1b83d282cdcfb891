"""Exact finitely-supported distributions and the verification toolkit.

Everything here is enumeration-based and rational-exact: distributions carry
``Fraction`` masses, pushforwards count grid tuples, and the empirical privacy
level is a max of logs of exact mass ratios.  No sampling, no quadrature.
"""

from __future__ import annotations

import csv
import itertools
import math
import os
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np

from .geometry import Region, distance
from .numrep import UniformGeneratorModel

DEFAULT_ENUM_BUDGET = 1 << 26
ENUM_BUDGET_ENV = "FPDP_ENUM_BUDGET"


class EnumerationBudgetError(RuntimeError):
    """The requested pushforward would enumerate too many tuples."""


class ExceptionMassMismatchError(ValueError):
    """Wasserstein distance is undefined when exception masses differ."""


class _ExceptionValue:
    """Distinguished outcome for answers replaced by the exception value."""

    _singleton: "_ExceptionValue | None" = None

    def __new__(cls) -> "_ExceptionValue":
        if cls._singleton is None:
            cls._singleton = super().__new__(cls)
        return cls._singleton

    def __repr__(self) -> str:
        return "EXCEPTION"


EXCEPTION = _ExceptionValue()

Location = Union[float, int, tuple, _ExceptionValue]


def _is_exception_location(loc: Location) -> bool:
    if loc is EXCEPTION:
        return True
    if isinstance(loc, float) and not math.isfinite(loc):
        return True
    if isinstance(loc, tuple) and any(
        isinstance(c, float) and not math.isfinite(c) for c in loc
    ):
        return True
    return False


def _location_sort_key(loc: Location):
    if loc is EXCEPTION:
        return (2,)
    if isinstance(loc, tuple):
        return (1, loc)
    return (0, (loc,))


class DiscreteDistribution:
    """A finitely-supported probability distribution with exact masses.

    Atom locations are scalars, coordinate tuples, integer cell indices, or
    the distinguished :data:`EXCEPTION` value.  Masses are stored as exact
    ``Fraction`` objects; duplicate locations are aggregated.  Non-finite
    float locations are normalized to the exception atom.
    """

    __slots__ = ("_atoms",)

    _TOTAL_TOL = Fraction(1, 10**12)

    def __init__(self, atoms: Iterable[tuple[Location, Union[Fraction, float, int]]]):
        agg: dict[Location, Fraction] = {}
        for loc, mass in atoms:
            m = mass if isinstance(mass, Fraction) else Fraction(mass)
            if m < 0:
                raise ValueError(f"negative mass {mass!r} at {loc!r}")
            if m == 0:
                continue
            if _is_exception_location(loc):
                loc = EXCEPTION
            elif isinstance(loc, tuple):
                loc = tuple(loc)
            agg[loc] = agg.get(loc, Fraction(0)) + m
        total = sum(agg.values(), Fraction(0))
        if abs(total - 1) > self._TOTAL_TOL:
            raise ValueError(f"masses sum to {float(total)}, not 1")
        self._atoms = agg

    @classmethod
    def point_mass(cls, loc: Location) -> "DiscreteDistribution":
        return cls([(loc, Fraction(1))])

    @classmethod
    def from_counts(cls, counts: Mapping[Location, int], denominator: int
                    ) -> "DiscreteDistribution":
        return cls([(loc, Fraction(c, denominator)) for loc, c in counts.items()])

    def atoms(self) -> list[tuple[Location, Fraction]]:
        return sorted(self._atoms.items(), key=lambda kv: _location_sort_key(kv[0]))

    def support(self) -> list[Location]:
        return [loc for loc, _ in self.atoms()]

    def mass(self, loc: Location) -> Fraction:
        if _is_exception_location(loc):
            loc = EXCEPTION
        return self._atoms.get(loc, Fraction(0))

    @property
    def exception_mass(self) -> Fraction:
        return self._atoms.get(EXCEPTION, Fraction(0))

    def real_atoms(self) -> list[tuple[Location, Fraction]]:
        """Atoms excluding the exception value."""
        return [(loc, m) for loc, m in self.atoms() if loc is not EXCEPTION]

    def __len__(self) -> int:
        return len(self._atoms)

    def __eq__(self, other) -> bool:
        return (isinstance(other, DiscreteDistribution)
                and self._atoms == other._atoms)

    def __repr__(self) -> str:
        return f"DiscreteDistribution({len(self._atoms)} atoms)"

    def mass_in(self, region: Region) -> Fraction:
        """Total mass of real atoms inside a region (exception excluded)."""
        total = Fraction(0)
        for loc, m in self._atoms.items():
            if loc is not EXCEPTION and region.contains(loc):
                total += m
        return total

    def to_rows(self) -> list[dict]:
        rows = []
        for loc, m in self.atoms():
            if loc is EXCEPTION:
                cols: dict = {"location": "EXCEPTION"}
            elif isinstance(loc, tuple):
                cols = {f"x{i}": c for i, c in enumerate(loc)}
            else:
                cols = {"location": loc}
            cols["mass"] = float(m)
            cols["mass_exact"] = f"{m.numerator}/{m.denominator}"
            rows.append(cols)
        return rows

    def to_csv(self, path: str) -> None:
        rows = self.to_rows()
        fields: list[str] = []
        for r in rows:
            for k in r:
                if k not in fields:
                    fields.append(k)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(rows)

    def to_json(self) -> list[dict]:
        return self.to_rows()


@dataclass(frozen=True)
class RoundingGrid:
    """A cubic grid of side ``side`` anchored at ``origin``.

    Binning cells are half-open, ``[k*side, (k+1)*side)`` per coordinate, so
    boundary atoms always go to the cell on the right.  Rounding maps a value
    to the nearest grid point with the same tie direction.  All grid
    arithmetic is double precision.
    """

    origin: tuple[float, ...]
    side: float
    dim: int = 1

    def __post_init__(self) -> None:
        o = self.origin
        if isinstance(o, (int, float)):
            o = (float(o),)
        else:
            o = tuple(float(c) for c in o)
        object.__setattr__(self, "origin", o)
        if self.side <= 0:
            raise ValueError("cell side must be positive")
        if len(o) != self.dim:
            raise ValueError("origin dimension must match dim")

    def cell_of(self, x) -> Union[int, tuple[int, ...]]:
        """Index of the half-open cell containing ``x``."""
        coords = (x,) if isinstance(x, (int, float)) else tuple(x)
        if len(coords) != self.dim:
            raise ValueError("dimension mismatch")
        idx = tuple(int(math.floor((c - o) / self.side))
                    for c, o in zip(coords, self.origin))
        return idx[0] if self.dim == 1 else idx

    def round_index(self, x) -> Union[int, tuple[int, ...]]:
        """Index of the nearest grid point (ties toward the larger index)."""
        coords = (x,) if isinstance(x, (int, float)) else tuple(x)
        if len(coords) != self.dim:
            raise ValueError("dimension mismatch")
        idx = tuple(int(math.floor((c - o) / self.side + 0.5))
                    for c, o in zip(coords, self.origin))
        return idx[0] if self.dim == 1 else idx

    def point_of(self, index) -> Union[float, tuple[float, ...]]:
        """The grid point with the given index."""
        idx = (index,) if isinstance(index, int) else tuple(index)
        pt = tuple(o + k * self.side for o, k in zip(self.origin, idx))
        return pt[0] if self.dim == 1 else pt

    def round_point(self, x) -> Union[float, tuple[float, ...]]:
        return self.point_of(self.round_index(x))


@dataclass(frozen=True)
class RoundingAlgebra:
    """The observable sigma-algebra: grid cells plus one exception cell."""

    grid: RoundingGrid

    def cell_key(self, loc: Location) -> Location:
        if _is_exception_location(loc):
            return EXCEPTION
        return self.grid.cell_of(loc)


def enumeration_budget() -> int:
    raw = os.environ.get(ENUM_BUDGET_ENV)
    return int(raw) if raw else DEFAULT_ENUM_BUDGET


def pushforward(model: UniformGeneratorModel,
                f: Callable,
                q: int = 1,
                budget: Optional[int] = None) -> DiscreteDistribution:
    """Exact output distribution of ``f`` applied to ``q`` generator draws.

    Enumerates all ``N**q`` grid tuples; the mass of an output location is
    ``(number of tuples mapped there) / N**q`` exactly.  ``f`` receives a
    scalar when ``q == 1`` and a tuple otherwise; non-finite outputs become
    the exception atom.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    cap = budget if budget is not None else enumeration_budget()
    total = model.N ** q
    if total > cap:
        raise EnumerationBudgetError(
            f"N**q = {total} exceeds the enumeration budget {cap}"
        )
    values = [float(u) for u in model.biased_grid_array()]
    counts: dict[Location, int] = {}
    if q == 1:
        for u in values:
            loc = f(u)
            if _is_exception_location(loc):
                loc = EXCEPTION
            elif isinstance(loc, tuple):
                loc = tuple(loc)
            counts[loc] = counts.get(loc, 0) + 1
    else:
        for tup in itertools.product(values, repeat=q):
            loc = f(tup)
            if _is_exception_location(loc):
                loc = EXCEPTION
            elif isinstance(loc, tuple):
                loc = tuple(loc)
            counts[loc] = counts.get(loc, 0) + 1
    return DiscreteDistribution.from_counts(counts, total)


def bin(dist: DiscreteDistribution, algebra: RoundingAlgebra
        ) -> DiscreteDistribution:
    """Aggregate atom masses by grid cell; total mass is preserved exactly."""
    agg: dict[Location, Fraction] = {}
    for loc, m in dist.atoms():
        key = algebra.cell_key(loc)
        agg[key] = agg.get(key, Fraction(0)) + m
    return DiscreteDistribution(agg.items())


def empirical_epsilon(p1: DiscreteDistribution,
                      p2: DiscreteDistribution,
                      algebra: Optional[RoundingAlgebra] = None) -> float:
    """Worst-case log mass ratio over the observable cells.

    Returns ``inf`` when exactly one side of some cell is empty, ``0.0`` when
    the binned distributions coincide.  Symmetric in its arguments.
    """
    if algebra is not None:
        p1 = bin(p1, algebra)
        p2 = bin(p2, algebra)
    keys = set(p1.support()) | set(p2.support())
    worst = 0.0
    for key in keys:
        m1, m2 = p1.mass(key), p2.mass(key)
        if m1 == 0 and m2 == 0:
            continue
        if m1 == 0 or m2 == 0:
            return math.inf
        ratio = m1 / m2
        worst = max(worst, abs(math.log(ratio.numerator) - math.log(ratio.denominator)))
    return worst


# --- Wasserstein-infinity distance ------------------------------------------

def _feasible_at(threshold: float,
                 supplies: list[Fraction],
                 demands: list[Fraction],
                 dist: list[list[float]]) -> bool:
    """Can all supply be routed along edges of length <= threshold?

    Max-flow (Edmonds-Karp) with exact rational capacities on the bipartite
    graph of admissible moves.
    """
    n, m = len(supplies), len(demands)
    src, snk = n + m, n + m + 1
    V = n + m + 2
    cap: list[dict[int, Fraction]] = [dict() for _ in range(V)]

    def add_edge(a: int, b: int, c: Fraction) -> None:
        cap[a][b] = cap[a].get(b, Fraction(0)) + c
        cap[b].setdefault(a, Fraction(0))

    big = Fraction(2)
    for i, s in enumerate(supplies):
        add_edge(src, i, s)
    for j, d in enumerate(demands):
        add_edge(n + j, snk, d)
    for i in range(n):
        row = dist[i]
        for j in range(m):
            if row[j] <= threshold:
                add_edge(i, n + j, big)

    need = sum(supplies, Fraction(0))
    flow = Fraction(0)
    while flow < need:
        parent = [-1] * V
        parent[src] = src
        queue = deque([src])
        while queue:
            a = queue.popleft()
            if a == snk:
                break
            for b, c in cap[a].items():
                if c > 0 and parent[b] == -1:
                    parent[b] = a
                    queue.append(b)
        if parent[snk] == -1:
            return False
        push = need
        b = snk
        while b != src:
            a = parent[b]
            push = min(push, cap[a][b])
            b = a
        b = snk
        while b != src:
            a = parent[b]
            cap[a][b] -= push
            cap[b][a] += push
            b = a
        flow += push
    return True


def wasserstein_inf(mu: DiscreteDistribution,
                    nu: DiscreteDistribution,
                    p: float = 2) -> float:
    """Exact infinity-Wasserstein distance between finite distributions.

    Computed as a threshold search over the finite set of pairwise atom
    distances, with a max-flow feasibility check at each candidate: the
    distance is the least threshold at which every supply atom can be coupled
    to demand atoms no further than the threshold away.

    Exception atoms must carry equal mass on both sides (they are coupled to
    each other at distance zero); otherwise the distance is undefined and an
    :class:`ExceptionMassMismatchError` is raised.
    """
    if mu.exception_mass != nu.exception_mass:
        raise ExceptionMassMismatchError(
            f"exception masses differ: {mu.exception_mass} vs {nu.exception_mass}"
        )
    a = mu.real_atoms()
    b = nu.real_atoms()
    if not a and not b:
        return 0.0
    supplies = [m for _, m in a]
    demands = [m for _, m in b]
    dist = [[distance(x, y, p) for y, _ in b] for x, _ in a]
    candidates = sorted({0.0} | {d for row in dist for d in row})
    lo, hi = 0, len(candidates) - 1
    if not _feasible_at(candidates[hi], supplies, demands, dist):
        raise ValueError("no feasible coupling (unequal real mass)")
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible_at(candidates[mid], supplies, demands, dist):
            hi = mid
        else:
            lo = mid + 1
    return candidates[lo]


def check_sandwich(mu: DiscreteDistribution,
                   nu: DiscreteDistribution,
                   eps: float,
                   region: Region,
                   p: float = 2) -> tuple[bool, dict]:
    """Verify the transport sandwich ``nu(S^-eps) <= mu(S) <= nu(S^+eps)``.

    Masses are evaluated exactly by summing atoms inside the eroded and
    dilated regions.  Returns the verdict together with the three measured
    masses for reporting.
    """
    mu_s = mu.mass_in(region)
    nu_plus = nu.mass_in(region.dilate(eps, p))
    nu_minus = nu.mass_in(region.erode(eps, p))
    ok = nu_minus <= mu_s <= nu_plus
    report = {
        "eps": eps,
        "mu(S)": float(mu_s),
        "nu(S+eps)": float(nu_plus),
        "nu(S-eps)": float(nu_minus),
        "lower_ok": nu_minus <= mu_s,
        "upper_ok": mu_s <= nu_plus,
    }
    return ok, report
