"""Uniform cell-centred grids, domains, grid functions and simple generators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError, UsageError


@dataclass(frozen=True)
class Grid:
    """Cells [origin + i h, origin + (i+1) h) per axis, sampled at their centres."""

    n: int
    h: float
    origin: tuple
    shape: tuple

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.n}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise DomainError(f"spacing must be positive, got {self.h}")
        if len(self.origin) != self.n or len(self.shape) != self.n:
            raise UsageError("origin and shape must have one entry per dimension")
        if any(int(m) < 1 for m in self.shape):
            raise DomainError(f"cell counts must be positive, got {self.shape}")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "shape", tuple(int(m) for m in self.shape))

    @classmethod
    def centered(cls, n: int, h: float, halfwidth: float) -> "Grid":
        """Odd number of cells per axis, one cell centred at the origin, box covering [-halfwidth, halfwidth]^n."""
        m = max(int(math.ceil(halfwidth / h - 0.5 - 1e-12)), 0)
        return cls(n, h, (-(m + 0.5) * h,) * n, (2 * m + 1,) * n)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.origin) + np.array(self.shape) * self.h

    def axes(self) -> list:
        # (i + 1/2 + origin/h) h keeps centred grids exactly symmetric
        return [(np.arange(m) + 0.5 + round(o / self.h, 9)) * self.h for o, m in zip(self.origin, self.shape)]

    def coords(self) -> tuple:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """Cell centres as an array of shape (*shape, n)."""
        return np.stack(self.coords(), axis=-1)

    def radius(self, center=None) -> np.ndarray:
        c = np.zeros(self.n) if center is None else np.asarray(center, float)
        return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(self.coords(), c)))

    def index_of(self, x) -> tuple:
        """Index of the cell containing point x."""
        x = np.atleast_1d(np.asarray(x, float))
        idx = np.floor((x - self.lower) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.shape)):
            raise ConfigurationError(f"point {x.tolist()} lies outside the grid box")
        return tuple(int(i) for i in idx)

    def contains_ball(self, center, radius) -> bool:
        c = np.asarray(center, float)
        return bool(np.all(c - radius >= self.lower - 1e-12) and np.all(c + radius <= self.upper + 1e-12))

    def metadata(self) -> dict:
        return {"n": self.n, "h": self.h, "origin": list(self.origin), "shape": list(self.shape)}


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise DomainError("grid function values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise UsageError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / self._other(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def __abs__(self):
        return self.with_values(np.abs(self.values))


@dataclass(frozen=True, eq=False)
class Domain:
    """Cells whose centres lie in an open set, plus an optional signed distance.

    ``distance`` maps points of shape (..., n) to the distance to the boundary,
    positive inside and negative outside; it lets solvers locate boundary
    crossings between cell centres.
    """

    grid: Grid
    mask: np.ndarray
    measure: float = field(init=False)
    distance: Optional[Callable] = None
    label: str = "mask"

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool, copy=True).reshape(self.grid.shape)
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)
        count = int(m.sum())
        if count == 0:
            raise DomainError("domain contains no cells")
        object.__setattr__(self, "measure", count * self.grid.cell_volume)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def indicator(self) -> GridFunction:
        return GridFunction(self.grid, self.mask.astype(float))

    def interior_points(self) -> np.ndarray:
        return self.grid.points()[self.mask]

    def boundary_distance(self) -> np.ndarray:
        """Distance from every cell centre to the boundary (positive inside)."""
        if self.distance is not None:
            return np.asarray(self.distance(self.grid.points()), float)
        from scipy.ndimage import distance_transform_edt

        crop = (slice(1, -1),) * self.grid.n
        padded = np.pad(self.mask, 1)
        inside = distance_transform_edt(padded)[crop]
        outside = distance_transform_edt(~padded)[crop]
        return np.where(self.mask, inside - 0.5, 0.5 - outside) * self.grid.h


def make_ball_domain(n: int, radius: float, h: float, halfwidth: float | None = None,
                     center=None) -> Domain:
    """Open ball sampled at cell centres on a centred grid.

    The grid box covers [-halfwidth, halfwidth]^n (default: just the ball).
    """
    if not (radius > 0 and math.isfinite(radius)):
        raise DomainError(f"radius must be positive, got {radius}")
    if not h < radius / 4:
        raise ConfigurationError(f"spacing {h} too coarse for radius {radius} (need h < radius/4)")
    c = np.zeros(n) if center is None else np.asarray(center, float).reshape(n)
    reach = radius + float(np.max(np.abs(c)))
    grid = Grid.centered(n, h, reach if halfwidth is None else max(halfwidth, reach))

    def distance(points, c=c, radius=radius):
        return radius - np.linalg.norm(np.asarray(points) - c, axis=-1)

    mask = distance(grid.points()) > 0
    return Domain(grid, mask, distance=distance, label=f"ball:{radius:g}")


def whole_grid(grid: Grid) -> Domain:
    return Domain(grid, np.ones(grid.shape, bool), label="box")


def smooth_bump(grid: Grid, center=None, radius: float = 1.0) -> GridFunction:
    """exp(-1/(1 - |x-c|^2/r^2)) inside the ball, zero outside."""
    c = np.zeros(grid.n) if center is None else np.asarray(center, float).reshape(grid.n)
    if not radius > 0:
        raise DomainError(f"bump radius must be positive, got {radius}")
    if not grid.contains_ball(c, radius):
        raise ConfigurationError("bump support exceeds the grid box")
    t = (grid.radius(c) / radius) ** 2
    inside = t < 1
    v = np.zeros(grid.shape)
    v[inside] = np.exp(-1.0 / (1.0 - t[inside]))
    return GridFunction(grid, v)


def smoothstep(t):
    """C-infinity monotone transition, 0 for t <= 0 and 1 for t >= 1."""
    t = np.asarray(t, float)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def cutoff_profile(r):
    """Radial cutoff: 1 on [0, 1/2], 0 on [1, inf)."""
    return smoothstep(2.0 * (1.0 - np.asarray(r, float)))


def cutoff_theta(grid: Grid) -> GridFunction:
    if not grid.contains_ball(np.zeros(grid.n), 1.0 - 0.5 * grid.h):
        raise ConfigurationError("grid box must contain the unit ball")
    return GridFunction(grid, cutoff_profile(grid.radius()))


def integrate(f: GridFunction, dom: Domain | None = None) -> float:
    """Midpoint rule over the domain cells (whole grid when dom is None)."""
    if dom is None:
        return float(np.sum(f.values) * f.grid.cell_volume)
    if dom.grid != f.grid:
        raise UsageError("grid function and domain live on different grids")
    return float(np.sum(f.values[dom.mask]) * f.grid.cell_volume)


def l2_norm(f: GridFunction, dom: Domain | None = None) -> float:
    return math.sqrt(integrate(f * f, dom))


def save_gridfunction(path, f: GridFunction, fmt: str = "bin") -> list:
    """Write a JSON header ``<path>.json`` plus ``<path>.bin`` (float64, C order) or ``<path>.csv``.

    Returns the list of written paths.
    """
    path = Path(path)
    header = dict(f.grid.metadata(), format=fmt, dtype="float64", order="C")
    hdr = path.with_suffix(".json")
    if fmt == "bin":
        data = path.with_suffix(".bin")
        data.write_bytes(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    elif fmt == "csv":
        data = path.with_suffix(".csv")
        lines = ["index,value"] + [f"{i},{v:.17g}" for i, v in enumerate(f.values.ravel())]
        data.write_text("\n".join(lines) + "\n")
    else:
        raise UsageError(f"unknown format {fmt!r}")
    header["data"] = data.name
    hdr.write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")
    return [hdr, data]


def load_gridfunction(path) -> GridFunction:
    path = Path(path)
    hdr = path if path.suffix == ".json" else path.with_suffix(".json")
    meta = json.loads(hdr.read_text())
    grid = Grid(meta["n"], meta["h"], tuple(meta["origin"]), tuple(meta["shape"]))
    data = hdr.parent / meta["data"]
    if meta["format"] == "bin":
        vals = np.frombuffer(data.read_bytes(), dtype="<f8")
    else:
        vals = np.loadtxt(data, delimiter=",", skiprows=1)[:, 1]
    if vals.size != grid.size:
        raise UsageError(f"{data} holds {vals.size} values, header expects {grid.size}")
    return GridFunction(grid, vals)
