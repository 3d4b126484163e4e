"""Lattice model of a randomly perforated medium.

Every cell ``z`` of the integer lattice carries an i.i.d. mark ``(k_z, r_z)``:
either empty, or shape ``k`` scaled about the cell centre by ``r``.  Marks are
derived by hashing ``(seed, z)`` into an independent random stream, so any
window of cells can be sampled without global state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractError, GeometryError

CENTRE = 0.5
EMPTY = -1


def _zigzag(n: int) -> int:
    return 2 * n if n >= 0 else -2 * n - 1


@dataclass(frozen=True)
class ShapeSpec:
    """Reference inclusion shape inside the unit cell ``Y = [0, 1)^2``.

    ``kind`` is ``"square"`` (``param`` = side), ``"disk"`` (``param`` =
    radius) or ``"raster"`` (``mask`` indexed ``[ix, iy]`` over ``Y``).
    All shapes are centred at ``(0.5, 0.5)`` and scaled about that point.
    """

    kind: str
    param: float = 0.0
    mask: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind in ("square", "disk"):
            limit = 1.0 if self.kind == "square" else 0.5
            if not 0.0 < self.param < limit:
                raise ConfigError(f"{self.kind} parameter {self.param} out of range", key="shapes")
        elif self.kind == "raster":
            if self.mask is None:
                raise ConfigError("raster shape needs a mask", key="shapes")
            arr = np.asarray(self.mask, dtype=bool)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or not arr.any():
                raise ConfigError("raster mask must be a non-empty square array", key="shapes")
            object.__setattr__(self, "mask", tuple(map(tuple, arr.tolist())))
        else:
            raise ConfigError(f"unknown shape kind {self.kind!r}", key="shapes")

    @classmethod
    def square(cls, side: float) -> "ShapeSpec":
        return cls("square", float(side))

    @classmethod
    def disk(cls, radius: float) -> "ShapeSpec":
        return cls("disk", float(radius))

    @classmethod
    def raster(cls, mask) -> "ShapeSpec":
        return cls("raster", 0.0, np.asarray(mask, dtype=bool))

    @property
    def mask_array(self) -> np.ndarray:
        return np.asarray(self.mask, dtype=bool)

    @property
    def area(self) -> float:
        """``|Y_1|`` at unit size."""
        if self.kind == "square":
            return self.param**2
        if self.kind == "disk":
            return math.pi * self.param**2
        m = self.mask_array
        return float(m.sum()) / m.size

    def bbox(self) -> tuple[float, float, float, float]:
        """Bounding box ``(x0, x1, y0, y1)`` in cell coordinates at unit size."""
        if self.kind == "square":
            h = self.param / 2
            return (CENTRE - h, CENTRE + h, CENTRE - h, CENTRE + h)
        if self.kind == "disk":
            h = self.param
            return (CENTRE - h, CENTRE + h, CENTRE - h, CENTRE + h)
        m = self.mask_array
        n = m.shape[0]
        ix = np.nonzero(m.any(axis=1))[0]
        iy = np.nonzero(m.any(axis=0))[0]
        return (ix[0] / n, (ix[-1] + 1) / n, iy[0] / n, (iy[-1] + 1) / n)

    def scaled_bbox(self, r: float) -> tuple[float, float, float, float]:
        x0, x1, y0, y1 = self.bbox()
        return (
            CENTRE + r * (x0 - CENTRE),
            CENTRE + r * (x1 - CENTRE),
            CENTRE + r * (y0 - CENTRE),
            CENTRE + r * (y1 - CENTRE),
        )

    def diameter(self) -> float:
        if self.kind == "square":
            return math.sqrt(2) * self.param
        if self.kind == "disk":
            return 2 * self.param
        x0, x1, y0, y1 = self.bbox()
        return math.hypot(x1 - x0, y1 - y0)

    def contains(self, y1, y2, r=1.0) -> np.ndarray:
        """Membership of local cell points ``(y1, y2)`` in ``Y_{1,r}`` (open set)."""
        r = np.asarray(r, dtype=float)
        u1 = CENTRE + (np.asarray(y1, dtype=float) - CENTRE) / r
        u2 = CENTRE + (np.asarray(y2, dtype=float) - CENTRE) / r
        if self.kind == "square":
            h = self.param / 2
            return (np.abs(u1 - CENTRE) < h) & (np.abs(u2 - CENTRE) < h)
        if self.kind == "disk":
            return (u1 - CENTRE) ** 2 + (u2 - CENTRE) ** 2 < self.param**2
        m = self.mask_array
        n = m.shape[0]
        inside = (u1 > 0) & (u1 < 1) & (u2 > 0) & (u2 < 1)
        i = np.clip((u1 * n).astype(int), 0, n - 1)
        j = np.clip((u2 * n).astype(int), 0, n - 1)
        return inside & m[i, j]

    def to_dict(self) -> dict:
        if self.kind == "square":
            return {"kind": "square", "side": self.param}
        if self.kind == "disk":
            return {"kind": "disk", "radius": self.param}
        return {"kind": "raster", "mask": self.mask_array.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        allowed = {"square": {"side"}, "disk": {"radius"}, "raster": {"mask"}}
        if kind not in allowed:
            raise ConfigError(f"unknown shape kind {kind!r}", key="shapes.kind")
        extra = set(d) - allowed[kind]
        if extra:
            raise ConfigError(f"unknown shape keys {sorted(extra)}", key=f"shapes.{sorted(extra)[0]}")
        if kind == "square":
            return cls.square(d["side"])
        if kind == "disk":
            return cls.disk(d["radius"])
        return cls.raster(d["mask"])


@dataclass(frozen=True)
class SizeDist:
    """Law of the inclusion scale factor ``r`` on ``[r1, r2]``.

    ``kind`` is ``"fixed"`` (``r1 == r2``), ``"uniform"`` or ``"tabulated"``
    (piecewise-linear density through ``(grid, density)``).
    """

    kind: str
    r1: float
    r2: float
    grid: tuple = ()
    density: tuple = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform", "tabulated"):
            raise ConfigError(f"unknown size distribution {self.kind!r}", key="size_dist.kind")
        if not 0.0 < self.r1 <= self.r2 <= 1.0:
            raise ConfigError(f"need 0 < r1 <= r2 <= 1, got [{self.r1}, {self.r2}]", key="size_dist")
        if self.kind == "fixed" and self.r1 != self.r2:
            raise ConfigError("fixed size needs r1 == r2", key="size_dist")
        if self.kind == "tabulated":
            g = np.asarray(self.grid, dtype=float)
            p = np.asarray(self.density, dtype=float)
            if g.shape != p.shape or g.size < 2 or np.any(np.diff(g) <= 0) or np.any(p < 0):
                raise ConfigError("tabulated density needs increasing grid and non-negative values", key="size_dist")
            if not (math.isclose(g[0], self.r1) and math.isclose(g[-1], self.r2)):
                raise ConfigError("tabulated grid must span [r1, r2]", key="size_dist")
            if np.trapezoid(p, g) <= 0:
                raise ConfigError("tabulated density has zero mass", key="size_dist")

    @classmethod
    def fixed(cls, r: float = 1.0) -> "SizeDist":
        return cls("fixed", float(r), float(r))

    @classmethod
    def uniform(cls, r1: float, r2: float) -> "SizeDist":
        return cls("uniform", float(r1), float(r2))

    @classmethod
    def tabulated(cls, grid, density) -> "SizeDist":
        g = tuple(float(x) for x in grid)
        return cls("tabulated", g[0], g[-1], g, tuple(float(x) for x in density))

    def _cdf_table(self):
        g = np.asarray(self.grid, dtype=float)
        p = np.asarray(self.density, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(g))])
        return g, p, cum / cum[-1]

    def pdf(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "uniform":
            return np.where((r >= self.r1) & (r <= self.r2), 1.0 / (self.r2 - self.r1), 0.0)
        if self.kind == "tabulated":
            g, p, _ = self._cdf_table()
            mass = np.trapezoid(p, g)
            return np.interp(r, g, p, left=0.0, right=0.0) / mass
        raise ContractError("fixed size has no density")

    def ppf(self, u) -> np.ndarray:
        """Inverse CDF, used to turn a uniform draw into a size."""
        u = np.asarray(u, dtype=float)
        if self.kind == "fixed":
            return np.full_like(u, self.r1)
        if self.kind == "uniform":
            return self.r1 + u * (self.r2 - self.r1)
        g, p, cdf = self._cdf_table()
        # exact inversion of the piecewise-quadratic CDF
        idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, g.size - 2)
        mass = np.trapezoid(p, g)
        x0, p0 = g[idx], p[idx] / mass
        slope = (p[idx + 1] - p[idx]) / mass / (g[idx + 1] - g[idx])
        t = u - cdf[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            quad = (-p0 + np.sqrt(np.maximum(p0**2 + 2 * slope * t, 0.0))) / slope
        lin = np.where(p0 > 0, t / np.where(p0 > 0, p0, 1.0), 0.0)
        step = np.where(np.abs(slope) > 1e-14, quad, lin)
        return np.clip(x0 + step, self.r1, self.r2)

    def quadrature(self, n: int = 32) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes on ``[r1, r2]`` with weights against the size density.

        Weights sum to one.  A fixed size gives the single node ``r1``.
        """
        if self.kind == "fixed":
            return np.array([self.r1]), np.array([1.0])
        x, w = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (self.r2 - self.r1)
        nodes = self.r1 + half * (x + 1.0)
        weights = w * half * self.pdf(nodes)
        return nodes, weights / weights.sum()

    def moment(self, p: int = 2) -> float:
        if self.kind == "fixed":
            return self.r1**p
        if self.kind == "uniform":
            a, b = self.r1, self.r2
            return (b ** (p + 1) - a ** (p + 1)) / ((p + 1) * (b - a))
        nodes, w = self.quadrature(64)
        return float(np.sum(w * nodes**p))

    def to_dict(self) -> dict:
        if self.kind == "fixed":
            return {"kind": "fixed", "r": self.r1}
        if self.kind == "uniform":
            return {"kind": "uniform", "r1": self.r1, "r2": self.r2}
        return {"kind": "tabulated", "r": list(self.grid), "density": list(self.density)}

    @classmethod
    def from_dict(cls, d: dict) -> "SizeDist":
        d = dict(d)
        kind = d.pop("kind", None)
        allowed = {"fixed": {"r"}, "uniform": {"r1", "r2"}, "tabulated": {"r", "density"}}
        if kind not in allowed:
            raise ConfigError(f"unknown size distribution {kind!r}", key="size_dist.kind")
        extra = set(d) - allowed[kind]
        if extra:
            raise ConfigError(f"unknown size_dist keys {sorted(extra)}", key=f"size_dist.{sorted(extra)[0]}")
        try:
            if kind == "fixed":
                return cls.fixed(d["r"])
            if kind == "uniform":
                return cls.uniform(d["r1"], d["r2"])
            return cls.tabulated(d["r"], d["density"])
        except KeyError as exc:
            raise ConfigError(f"missing size_dist key {exc.args[0]!r}", key=f"size_dist.{exc.args[0]}") from None


@dataclass(frozen=True)
class MediumSpec:
    """Probability model of the perforated medium.

    Parameters
    ----------
    shapes : sequence of ShapeSpec
        Reference shapes ``Y_k``.
    probs : sequence of float
        Selection probability of each shape; the empty-cell probability is
        ``p0 = 1 - sum(probs)``.
    size_dist : SizeDist
        Law of the scale factor, shared by all shapes.
    A1 : 2x2 array
        Symmetric positive-definite stiff-phase matrix.
    S : (x0, x1, y0, y1)
        Macroscopic rectangle.
    margin : float
        Inclusions closer than ``margin * eps`` to the boundary of ``S`` are dropped.
    """

    shapes: tuple
    probs: tuple
    size_dist: SizeDist = SizeDist.fixed(1.0)
    A1: tuple = ((1.0, 0.0), (0.0, 1.0))
    S: tuple = (0.0, 1.0, 0.0, 1.0)
    margin: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        A = np.asarray(self.A1, dtype=float)
        if A.shape != (2, 2):
            raise ConfigError("A1 must be 2x2", key="A1")
        object.__setattr__(self, "A1", tuple(map(tuple, A.tolist())))
        object.__setattr__(self, "S", tuple(float(s) for s in self.S))
        if len(self.shapes) != len(self.probs):
            raise ConfigError("one probability per shape required", key="probs")
        if any(p < 0 for p in self.probs) or sum(self.probs) > 1 + 1e-12:
            raise ConfigError(f"shape probabilities {self.probs} must be non-negative and sum to at most 1", key="probs")
        if not np.allclose(A, A.T, atol=1e-14) or np.linalg.eigvalsh(A).min() <= 0:
            raise ConfigError("A1 must be symmetric positive definite", key="A1")
        x0, x1, y0, y1 = self.S
        if not (x1 > x0 and y1 > y0):
            raise ConfigError("S must be a non-degenerate rectangle", key="S")
        if self.margin < 0:
            raise ConfigError("margin must be non-negative", key="margin")
        r2 = self.size_dist.r2
        for shp in self.shapes:
            bx0, bx1, by0, by1 = shp.scaled_bbox(r2)
            if not (bx0 > 0 and by0 > 0 and bx1 < 1 and by1 < 1):
                raise ConfigError(f"{shp.kind} shape at size r2={r2} touches the cell boundary", key="shapes")

    @property
    def p0(self) -> float:
        return max(0.0, 1.0 - sum(self.probs))

    @property
    def A1_array(self) -> np.ndarray:
        return np.asarray(self.A1, dtype=float)

    @property
    def is_degenerate(self) -> bool:
        """True when the medium has no inclusions almost surely (``p0 == 1``)."""
        return sum(self.probs) <= 0.0

    def expected_soft_fraction(self) -> float:
        """``sum_k p_k |Y_k| E[r^2]``, the ergodic limit of the soft area fraction."""
        er2 = self.size_dist.moment(2)
        return float(sum(p * s.area for p, s in zip(self.probs, self.shapes)) * er2)

    def to_dict(self) -> dict:
        return {
            "shapes": [s.to_dict() for s in self.shapes],
            "probs": list(self.probs),
            "size_dist": self.size_dist.to_dict(),
            "A1": [v for row in self.A1 for v in row],
            "S": list(self.S),
            "margin": self.margin,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MediumSpec":
        allowed = {"shapes", "probs", "size_dist", "A1", "S", "margin"}
        extra = set(d) - allowed
        if extra:
            key = sorted(extra)[0]
            raise ConfigError(f"unknown medium key {key!r}", key=key)
        for key in ("shapes", "probs"):
            if key not in d:
                raise ConfigError(f"missing medium key {key!r}", key=key)
        kwargs = {
            "shapes": tuple(ShapeSpec.from_dict(s) for s in d["shapes"]),
            "probs": tuple(d["probs"]),
        }
        if "size_dist" in d:
            kwargs["size_dist"] = SizeDist.from_dict(d["size_dist"])
        if "A1" in d:
            a = list(d["A1"])
            if len(a) != 4:
                raise ConfigError("A1 must have 4 entries (row-major)", key="A1")
            kwargs["A1"] = ((a[0], a[1]), (a[2], a[3]))
        if "S" in d:
            if len(d["S"]) != 4:
                raise ConfigError("S must be [x0, x1, y0, y1]", key="S")
            kwargs["S"] = tuple(d["S"])
        if "margin" in d:
            kwargs["margin"] = float(d["margin"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "MediumSpec":
        return cls.from_dict(json.loads(text))


def simple_example(p: float = 0.5, side: float = 0.5) -> MediumSpec:
    """Single square of fixed size present with probability ``p``, ``A1 = I``, ``S = (0,1)^2``."""
    return MediumSpec(shapes=(ShapeSpec.square(side),), probs=(p,))


def varying_size_example(p: float = 0.5, side: float = 0.5, r1: float = 0.7, r2: float = 0.9) -> MediumSpec:
    return MediumSpec(shapes=(ShapeSpec.square(side),), probs=(p,), size_dist=SizeDist.uniform(r1, r2))


@dataclass(frozen=True)
class Window:
    """Integer lattice box ``[ix0, ix1) x [iy0, iy1)``."""

    ix0: int
    ix1: int
    iy0: int
    iy1: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ix1 - self.ix0, self.iy1 - self.iy0)

    def __contains__(self, z) -> bool:
        return self.ix0 <= z[0] < self.ix1 and self.iy0 <= z[1] < self.iy1

    @classmethod
    def covering(cls, S, eps: float) -> "Window":
        """Smallest window whose scaled cells cover ``S``."""
        x0, x1, y0, y1 = S
        tol = 1e-9
        return cls(
            math.floor(x0 / eps + tol),
            math.ceil(x1 / eps - tol),
            math.floor(y0 / eps + tol),
            math.ceil(y1 / eps - tol),
        )

    def covers(self, other: "Window") -> bool:
        return (
            self.ix0 <= other.ix0 and self.ix1 >= other.ix1 and self.iy0 <= other.iy0 and self.iy1 >= other.iy1
        )


def cell_uniforms(seed: int, ix: int, iy: int, n: int = 2) -> np.ndarray:
    """``n`` uniforms from the stream owned by cell ``(ix, iy)`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(_zigzag(ix), _zigzag(iy)))
    return np.random.Generator(np.random.PCG64(ss)).random(n)


@dataclass(frozen=True)
class Realisation:
    """Seeded draw of per-cell marks over a window.

    ``shape_idx[i, j]`` is the shape index of cell ``(ix0 + i, iy0 + j)`` or
    ``EMPTY``; ``size[i, j]`` is its scale (``nan`` when empty).
    """

    spec: MediumSpec
    seed: int
    window: Window
    shape_idx: np.ndarray = field(repr=False)
    size: np.ndarray = field(repr=False)

    def mark(self, z) -> tuple[int, float]:
        i, j = z[0] - self.window.ix0, z[1] - self.window.iy0
        return int(self.shape_idx[i, j]), float(self.size[i, j])

    @property
    def n_occupied(self) -> int:
        return int((self.shape_idx != EMPTY).sum())


def sample_realisation(spec: MediumSpec, seed: int, window: Window) -> Realisation:
    """Draw the marks of every cell in ``window``.

    Each cell reads two uniforms from its own stream: the first selects the
    shape (or an empty cell), the second the size through the inverse CDF.
    """
    nx, ny = window.shape
    if nx <= 0 or ny <= 0:
        raise ContractError("window must be non-empty")
    u = np.empty((nx, ny, 2))
    for i in range(nx):
        for j in range(ny):
            u[i, j] = cell_uniforms(seed, window.ix0 + i, window.iy0 + j)
    cum = np.cumsum(spec.probs)
    idx = np.searchsorted(cum, u[..., 0], side="right")
    shape_idx = np.where(idx < len(spec.probs), idx, EMPTY).astype(int)
    size = np.where(shape_idx != EMPTY, spec.size_dist.ppf(u[..., 1]), np.nan)
    shape_idx.setflags(write=False)
    size.setflags(write=False)
    return Realisation(spec, int(seed), window, shape_idx, size)


@dataclass(frozen=True)
class InclusionInstance:
    """Inclusion ``eps * (Y_{k, r} + z)`` placed in the macroscopic domain."""

    cell: tuple[int, int]
    shape: int
    size: float
    eps: float
    shape_spec: ShapeSpec = field(repr=False)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        bx0, bx1, by0, by1 = self.shape_spec.scaled_bbox(self.size)
        zx, zy = self.cell
        e = self.eps
        return (e * (zx + bx0), e * (zx + bx1), e * (zy + by0), e * (zy + by1))

    @property
    def diameter(self) -> float:
        return self.eps * self.size * self.shape_spec.diameter()

    @property
    def area(self) -> float:
        return (self.eps * self.size) ** 2 * self.shape_spec.area

    def contains(self, x, y) -> np.ndarray:
        zx, zy = self.cell
        return self.shape_spec.contains(np.asarray(x) / self.eps - zx, np.asarray(y) / self.eps - zy, self.size)


def inclusions_in_domain(real: Realisation, eps: float, spec: MediumSpec | None = None) -> list[InclusionInstance]:
    """Inclusions lying inside ``S`` at distance more than ``margin * eps`` from its boundary."""
    spec = spec or real.spec
    if not 0 < eps <= 1:
        raise ContractError("eps must lie in (0, 1]")
    need = Window.covering(spec.S, eps)
    if not real.window.covers(need):
        raise GeometryError(f"window {real.window} does not cover S/eps = {need}")
    x0, x1, y0, y1 = spec.S
    out = []
    gap = spec.margin * eps
    for i, j in zip(*np.nonzero(real.shape_idx != EMPTY)):
        z = (real.window.ix0 + int(i), real.window.iy0 + int(j))
        if z not in need:
            continue
        k = int(real.shape_idx[i, j])
        inc = InclusionInstance(z, k, float(real.size[i, j]), eps, spec.shapes[k])
        bx0, bx1, by0, by1 = inc.bbox
        if min(bx0 - x0, x1 - bx1, by0 - y0, y1 - by1) > gap:
            out.append(inc)
    return out


def rasterise(real: Realisation, eps: float, grid, spec: MediumSpec | None = None) -> np.ndarray:
    """Soft/stiff labels of the grid elements, shape ``(nx, ny)``; ``True`` means soft.

    An element is soft iff its barycentre lies in some inclusion kept by
    :func:`inclusions_in_domain`.
    """
    spec = spec or real.spec
    if eps / max(grid.hx, grid.hy) < 4 - 1e-9:
        raise ContractError("grid must resolve the lattice with at least 4 cells per eps-cell")
    incs = inclusions_in_domain(real, eps, spec)
    xb, yb = grid.barycentres()
    soft = np.zeros(xb.shape, dtype=bool)
    if not incs:
        return soft
    win = real.window
    kept_idx = np.full(win.shape, EMPTY, dtype=int)
    kept_size = np.ones(win.shape)
    for inc in incs:
        i, j = inc.cell[0] - win.ix0, inc.cell[1] - win.iy0
        kept_idx[i, j] = inc.shape
        kept_size[i, j] = inc.size
    zx = np.floor(xb / eps).astype(int)
    zy = np.floor(yb / eps).astype(int)
    ii = np.clip(zx - win.ix0, 0, win.shape[0] - 1)
    jj = np.clip(zy - win.iy0, 0, win.shape[1] - 1)
    k = kept_idx[ii, jj]
    r = kept_size[ii, jj]
    y1 = xb / eps - zx
    y2 = yb / eps - zy
    for s, shp in enumerate(spec.shapes):
        sel = k == s
        if sel.any():
            soft[sel] = shp.contains(y1[sel], y2[sel], r[sel])
    return soft


def volume_fraction_check(
    spec: MediumSpec,
    seeds: int | Sequence[int],
    eps_list: Sequence[float],
    cells_per_eps: int = 8,
) -> list[dict]:
    """Measured soft-area fraction of ``S`` against its ergodic limit, per ``eps``.

    The measured fraction is averaged over ``seeds``; ``error`` is the absolute
    deviation of that average from :meth:`MediumSpec.expected_soft_fraction`.
    """
    from .grid_fem import Grid

    if list(eps_list) != sorted(eps_list, reverse=True):
        raise ContractError("eps_list must be descending")
    seeds = [seeds] if isinstance(seeds, (int, np.integer)) else list(seeds)
    expected = spec.expected_soft_fraction()
    x0, x1, y0, y1 = spec.S
    rows = []
    for eps in eps_list:
        grid = Grid.for_eps(spec.S, eps, cells_per_eps)
        fracs = []
        for seed in seeds:
            real = sample_realisation(spec, seed, Window.covering(spec.S, eps))
            soft = rasterise(real, eps, grid, spec)
            fracs.append(soft.sum() * grid.hx * grid.hy / ((x1 - x0) * (y1 - y0)))
        measured = float(np.mean(fracs))
        rows.append(
            {
                "eps": float(eps),
                "measured": measured,
                "expected": expected,
                "error": abs(measured - expected),
                "seed_std": float(np.std(fracs, ddof=1)) if len(fracs) > 1 else 0.0,
            }
        )
    return rows
