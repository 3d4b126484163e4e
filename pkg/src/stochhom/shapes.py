"""Dirichlet spectra of reference inclusions.

For an inclusion ``Y_1`` the tables list the Dirichlet eigenvalues ``nu`` of
``-Laplace`` together with the mean-coupling weights ``c = (int phi)^2`` of
the L2-normalised eigenfunctions.  Multiple eigenvalues are repeated, and
inside each eigenspace the basis is chosen so that at most one function has
nonzero mean.  Parseval gives ``sum c = |Y_1|``; the weight not listed is
kept as ``tail_bound``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import jv

from .errors import ContractError, GeometryError, NumericError
from .medium import ShapeSpec

log = logging.getLogger(__name__)

#: adaptive truncation target, relative to the shape area
TAIL_TARGET = 1e-3


@dataclass
class ModeTable:
    """Sorted Dirichlet modes of one reference shape.

    Attributes
    ----------
    nu : ndarray
        Eigenvalues, nondecreasing, multiple ones repeated.
    c : ndarray
        Mean-coupling weights ``(int phi_j)^2``.
    zero_mean : ndarray of bool
        True where ``c`` vanishes.
    J : int
        Number of distinct eigenvalue levels listed.
    tail_bound : float
        ``shape_area - sum(c)``, the coupling weight of all omitted modes.
    shape_area : float
    nu_err : ndarray or None
        Error estimate of ``nu`` (numeric tables only).
    meta : dict
        Provenance (shape kind and parameters, mesh size).
    """

    nu: np.ndarray
    c: np.ndarray
    zero_mean: np.ndarray
    J: int
    tail_bound: float
    shape_area: float
    nu_err: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nu = np.asarray(self.nu, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.zero_mean = np.asarray(self.zero_mean, dtype=bool)
        if self.nu_err is not None:
            self.nu_err = np.asarray(self.nu_err, dtype=float)

    def __len__(self):
        return self.nu.size

    @property
    def entries(self) -> list[tuple[float, float, bool]]:
        return list(zip(self.nu.tolist(), self.c.tolist(), self.zero_mean.tolist()))

    @property
    def levels(self) -> np.ndarray:
        """Distinct eigenvalues (clusters closer than ``1e-10`` relative are merged)."""
        if self.nu.size == 0:
            return self.nu
        new = np.r_[True, np.diff(self.nu) > 1e-10 * self.nu[1:]]
        return self.nu[new]

    def nonzero_mean(self) -> tuple[np.ndarray, np.ndarray]:
        keep = ~self.zero_mean
        return self.nu[keep], self.c[keep]

    def check(self, tol: float = 1e-6) -> None:
        """Raise :class:`ContractError` if a table invariant fails."""
        if np.any(np.diff(self.nu) < 0):
            raise ContractError("mode table not sorted")
        if np.any(self.c < 0):
            raise ContractError("negative coupling weight")
        if np.any(self.zero_mean & (self.c > 1e-12 * max(self.shape_area, 1e-300))):
            raise ContractError("zero-mean mode with nonzero coupling weight")
        total = math.fsum(self.c)
        if total > self.shape_area + tol or total + self.tail_bound < self.shape_area - tol:
            raise ContractError(f"Parseval closure violated: sum c = {total}, area = {self.shape_area}")

    def truncate(self, nu_max: float) -> "ModeTable":
        """Modes with ``nu <= nu_max``; dropped weight moves to the tail."""
        keep = self.nu <= nu_max
        c = self.c[keep]
        return ModeTable(
            self.nu[keep],
            c,
            self.zero_mean[keep],
            int(np.count_nonzero(self.levels <= nu_max)),
            self.tail_bound + math.fsum(self.c[~keep]),
            self.shape_area,
            None if self.nu_err is None else self.nu_err[keep],
            dict(self.meta),
        )

    def to_dict(self) -> dict:
        d = {
            "nu": self.nu.tolist(),
            "c": self.c.tolist(),
            "zero_mean": self.zero_mean.astype(int).tolist(),
            "J": int(self.J),
            "tail_bound": float(self.tail_bound),
            "shape_area": float(self.shape_area),
            "meta": self.meta,
        }
        if self.nu_err is not None:
            d["nu_err"] = self.nu_err.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModeTable":
        return cls(
            np.array(d["nu"], dtype=float),
            np.array(d["c"], dtype=float),
            np.array(d["zero_mean"], dtype=bool),
            int(d["J"]),
            float(d["tail_bound"]),
            float(d["shape_area"]),
            None if d.get("nu_err") is None else np.array(d["nu_err"], dtype=float),
            dict(d.get("meta", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModeTable":
        return cls.from_dict(json.loads(text))


def cache_key(shape: ShapeSpec, J, h=None) -> str:
    """Stable key for caching a table of ``shape`` at truncation ``J`` and mesh ``h``."""
    blob = json.dumps({"shape": shape.to_dict(), "J": J, "h": h}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- square ---------------------------------------------------------------


def _square_modes(a: float, level_max: int):
    nmax = int(math.isqrt(level_max - 1))
    m, n = np.meshgrid(np.arange(1, nmax + 1), np.arange(1, nmax + 1), indexing="ij")
    m, n = m.ravel(), n.ravel()
    s = m * m + n * n
    keep = s <= level_max
    m, n, s = m[keep], n[keep], s[keep]
    order = np.lexsort((n, m, s))
    m, n, s = m[order], n[order], s[order]
    odd = (m % 2 == 1) & (n % 2 == 1)
    c = np.where(odd, (8 * a / (np.pi**2 * m * n)) ** 2, 0.0)
    return s, np.pi**2 * s / a**2, c, ~odd


def _square_adaptive_level(target: float) -> int:
    # relative weights 64 / (pi^4 m^2 n^2) over odd m, n sum to exactly 1
    nmax = 64
    while True:
        odd = np.arange(1, nmax + 1, 2)
        m, n = np.meshgrid(odd, odd, indexing="ij")
        s = (m * m + n * n).ravel()
        w = (64.0 / np.pi**4 / (m * m * n * n).astype(float)).ravel()
        order = np.argsort(s, kind="stable")
        s, w = s[order], w[order]
        complete = s <= nmax * nmax
        tail = 1.0 - np.cumsum(w[complete])
        # a level is admissible once the last mode at that level is included
        last = np.r_[s[complete][1:] != s[complete][:-1], True]
        ok = np.nonzero(last & (tail <= target))[0]
        if ok.size:
            return int(s[complete][ok[0]])
        nmax *= 2


def modes_square(a: float, J: int | None = None) -> ModeTable:
    """Dirichlet modes of the square of side ``a``.

    ``nu_mn = pi^2 (m^2 + n^2) / a^2`` with ``c_mn = (8 a / (m n pi^2))^2``
    for odd ``m, n`` and zero otherwise.

    Parameters
    ----------
    a : float
        Side length, ``0 < a < 1``.
    J : int, optional
        Number of distinct eigenvalue levels to include.  By default the
        smallest level count whose Parseval tail is at most
        ``1e-3 * a^2`` is used.
    """
    if not 0 < a < 1:
        raise ContractError("square side must lie in (0, 1)")
    if J is None:
        level_max = _square_adaptive_level(TAIL_TARGET)
    else:
        if J < 1:
            raise ContractError("J must be positive")
        nmax = 4
        while True:
            m, n = np.meshgrid(np.arange(1, nmax + 1), np.arange(1, nmax + 1))
            s = np.unique(m * m + n * n)
            s = s[s <= nmax * nmax]
            if s.size >= J:
                level_max = int(s[J - 1])
                break
            nmax *= 2
    s, nu, c, zm = _square_modes(a, level_max)
    J_eff = int(np.unique(s).size)
    area = a * a
    tail = max(area - math.fsum(c), 0.0)
    return ModeTable(nu, c, zm, J_eff, tail, area, meta={"kind": "square", "a": a})


# -- disk -----------------------------------------------------------------


def bessel_zeros_below(xmax: float, orders=None, step: float = 2.5, maxiter: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """All positive zeros ``j_{m,k} < xmax`` of ``J_m`` for ``m = 0, 1, ...``.

    Sign changes on a grid finer than the zero spacing (always above 3)
    bracket every zero; each bracket is refined by safeguarded Newton steps
    using ``J_m' = J_{m-1} - (m/x) J_m``.

    Returns
    -------
    m : ndarray of int
    j : ndarray
        Zeros, ordered by order then index.
    """
    if orders is None:
        orders = np.arange(0, int(math.ceil(xmax)) + 1)
    ms, xs = [], []
    for m in orders:
        x0 = max(float(m), 0.5)
        if x0 >= xmax:
            continue
        x = np.arange(x0, xmax + step, step)
        ms.append(np.full(x.size, m))
        xs.append(x)
    if not ms:
        return np.zeros(0, dtype=int), np.zeros(0)
    mg = np.concatenate(ms)
    xg = np.concatenate(xs)
    f = jv(mg, xg)
    br = np.nonzero((mg[:-1] == mg[1:]) & (f[:-1] * f[1:] < 0))[0]
    m = mg[br].astype(float)
    lo, hi = xg[br].copy(), xg[br + 1].copy()
    flo = f[br]
    x = 0.5 * (lo + hi)
    active = np.arange(x.size)
    for _ in range(maxiter):
        xa, ma = x[active], m[active]
        fx = jv(ma, xa)
        left = np.sign(fx) == np.sign(flo[active])
        lo[active] = np.where(left, xa, lo[active])
        flo[active] = np.where(left, fx, flo[active])
        hi[active] = np.where(left, hi[active], xa)
        d = jv(ma - 1, xa) - ma / xa * fx
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - fx / d
        bad = ~np.isfinite(xn) | (xn <= lo[active]) | (xn >= hi[active])
        xn = np.where(bad, 0.5 * (lo[active] + hi[active]), xn)
        xn = np.where(fx == 0, xa, xn)
        x[active] = xn
        active = active[(np.abs(xn - xa) > 1e-14 * xa) & (fx != 0)]
        if active.size == 0:
            break
    if active.size:
        raise NumericError(f"Bessel zero iteration failed for {active.size} zeros")
    keep = x < xmax
    return m[keep].astype(int), x[keep]


def _radial_zero_count(target: float) -> int:
    # sum_k 4 / j_{0,k}^2 = 1; the tail after K terms is about 4 / (pi^2 K)
    K = int(math.ceil(4 / (np.pi**2 * target))) + 8
    _, j = bessel_zeros_below((K + 1) * np.pi, orders=[0])
    w = 4.0 / j**2
    tail = 1.0 - np.cumsum(w)
    return int(np.nonzero(tail <= target)[0][0]) + 1


def modes_disk(R: float, J: int | None = None) -> ModeTable:
    """Dirichlet modes of the disk of radius ``R``.

    ``nu = (j_{m,k} / R)^2``; radial modes (``m = 0``) carry
    ``c = 4 pi R^2 / j_{0,k}^2``, every ``m >= 1`` level appears twice with
    zero mean.

    Parameters
    ----------
    R : float
        Radius, ``0 < R < 0.5``.
    J : int, optional
        Number of distinct levels.  By default all modes up to the radial
        mode that brings the Parseval tail below ``1e-3 * pi R^2``.
    """
    if not 0 < R < 0.5:
        raise ContractError("disk radius must lie in (0, 0.5)")
    if J is None:
        K = _radial_zero_count(TAIL_TARGET)
        _, j0 = bessel_zeros_below((K + 1) * np.pi, orders=[0])
        xmax = j0[K - 1] * (1 + 1e-12)
    else:
        if J < 1:
            raise ContractError("J must be positive")
        xmax = 8.0
        while True:
            m, j = bessel_zeros_below(xmax)
            if j.size >= J:
                xmax = np.sort(j)[J - 1] * (1 + 1e-12)
                break
            xmax *= 2
    m, j = bessel_zeros_below(xmax)
    mult = np.where(m == 0, 1, 2)
    m = np.repeat(m, mult)
    j = np.repeat(j, mult)
    order = np.lexsort((m, j))
    m, j = m[order], j[order]
    radial = m == 0
    c = np.where(radial, 4 * np.pi * R**2 / j**2, 0.0)
    area = np.pi * R**2
    tail = max(area - math.fsum(c), 0.0)
    J_eff = int(np.count_nonzero(np.r_[True, np.diff(j) > 0]))
    return ModeTable((j / R) ** 2, c, ~radial, J_eff, tail, area, meta={"kind": "disk", "R": R})


# -- numeric ---------------------------------------------------------------


def raster_mask(shape: ShapeSpec, n: int, r: float = 1.0) -> np.ndarray:
    """Element mask of ``Y_{1,r}`` on an ``n x n`` grid over ``Y`` (barycentre rule)."""
    t = (np.arange(n) + 0.5) / n
    y1, y2 = np.meshgrid(t, t, indexing="ij")
    return shape.contains(y1, y2, r)


def _mean_carrier_basis(w, V, g, rtol=1e-8):
    """Rotate each eigenspace so that only its first vector has ``g . v != 0``."""
    V = V.copy()
    c = np.zeros(w.size)
    start = 0
    while start < w.size:
        stop = start + 1
        while stop < w.size and w[stop] - w[start] <= rtol * max(abs(w[start]), 1.0):
            stop += 1
        block = V[:, start:stop]
        a = g @ block
        norm = np.linalg.norm(a)
        if stop - start > 1 and norm > 0:
            # first column along a, the rest orthogonal to it
            Q, _ = np.linalg.qr(a[:, None], mode="complete")
            V[:, start:stop] = block @ Q
            c[start] = norm**2
        else:
            c[start:stop] = a**2
        start = stop
    return V, c


def discrete_modes(mask: np.ndarray, h: float, J: int | None = None):
    """Q1 Dirichlet modes of the element set ``mask`` (mesh size ``h``, any resolution).

    Returns eigenvalues, coupling weights ``(g . phi)^2`` with ``g`` the
    integrals of the nodal basis functions, the discrete Parseval total
    ``g . M^{-1} g`` and the raster area.  ``J=None`` returns all modes.
    """
    from .eigen import DENSE_LIMIT, smallest_eigenpairs
    from .grid_fem import Grid, assemble_subdomain_laplace

    mask = np.asarray(mask, dtype=bool)
    n = mask.shape[0]
    grid = Grid((0.0, n * h, 0.0, n * h), n, n)
    sub = assemble_subdomain_laplace(grid, mask)
    ones = np.ones(sub.n)
    g = h * h * ones
    if J is None or sub.n <= DENSE_LIMIT:
        w, V = sla.eigh(sub.K.toarray(), sub.M.toarray())
        if J is not None:
            k = int(np.count_nonzero(w <= w[min(J, w.size) - 1] * (1 + 1e-8)))
            w, V = w[:k], V[:, :k]
        total = float(g @ sla.solve(sub.M.toarray(), g, assume_a="pos"))
    else:
        from scipy.sparse.linalg import spsolve

        res = smallest_eigenpairs(sub.K, sub.M, min(J + 8, sub.n // 4))
        w, V = res.eigenvalues, res.eigenvectors
        k = int(np.count_nonzero(w <= w[J - 1] * (1 + 1e-8)))
        if k == w.size:
            raise NumericError("cluster at the truncation level exceeds the computed block")
        w, V = w[:k], V[:, :k]
        total = float(g @ spsolve(sub.M.tocsc(), g))
    V, c = _mean_carrier_basis(w, V, g)
    return w, c, total, float(mask.sum()) * h * h


def modes_numeric(shape, h: float, J: int = 8, richardson: bool = True) -> ModeTable:
    """Numeric Dirichlet modes of a raster shape on ``Y`` by Q1 finite elements.

    Parameters
    ----------
    shape : ShapeSpec or (n, n) bool array
        Shape to rasterise at mesh size ``h`` (a ``ShapeSpec``), or a mask
        already on an ``n x n`` grid with ``h = 1/n``.
    h : float
        Mesh size; the shape must span at least 16 cells.
    J : int
        Number of modes (a degenerate cluster at the cut is kept whole).
    richardson : bool
        Also solve at ``h/2`` and extrapolate the first ``J`` eigenvalues
        assuming an ``O(h^2)`` error; ``nu_err`` holds the correction size.

    Notes
    -----
    ``c_j = (h^2 sum phi_j)^2`` with M-orthonormal ``phi_j``; the tail is
    measured against the discrete Parseval total, so listing every mode
    closes it exactly.
    """
    n = int(round(1.0 / h))

    def mask_at(k):
        if isinstance(shape, ShapeSpec):
            return raster_mask(shape, k)
        m = np.asarray(shape, dtype=bool)
        if m.shape[0] != n:
            raise GeometryError(f"mask of size {m.shape[0]} does not match h = 1/{n}")
        return np.repeat(np.repeat(m, k // n, axis=0), k // n, axis=1)

    mask = mask_at(n)
    ix = np.nonzero(mask.any(axis=1))[0]
    iy = np.nonzero(mask.any(axis=0))[0]
    if ix.size == 0:
        raise GeometryError("empty raster shape")
    if min(ix[-1] - ix[0] + 1, iy[-1] - iy[0] + 1) < 16:
        raise ContractError("shape must span at least 16 mesh cells")
    from scipy.ndimage import label

    if label(mask)[1] != 1:
        raise ContractError("raster shape must be connected")
    w, c, total, area = discrete_modes(mask, h, J)
    nu_err = None
    meta = {"kind": "numeric", "h": h, "extrapolated": False}
    if isinstance(shape, ShapeSpec):
        meta["shape"] = shape.to_dict()
    if richardson:
        w2, _, _, _ = discrete_modes(mask_at(2 * n), h / 2, w.size)
        w2 = w2[: w.size]
        nu_ex = (4 * w2 - w) / 3
        nu_err = np.abs(nu_ex - w)
        meta["nu_extrapolated"] = nu_ex.tolist()
    zm = c <= 1e-12 * area
    c = np.where(zm, 0.0, c)
    meta["raster_area"] = area
    tail = max(total - math.fsum(c), 0.0)
    levels = np.count_nonzero(np.r_[True, np.diff(w) > 1e-8 * w[1:]])
    return ModeTable(w, c, zm, int(levels), tail, total, nu_err, meta)


def scale_modes(table: ModeTable, r: float) -> ModeTable:
    """Modes of the inclusion scaled by ``r``: ``nu / r^2``, ``r^2 c``, ``r^2`` area."""
    if not r > 0:
        raise ContractError("scale must be positive")
    r2 = r * r
    meta = dict(table.meta)
    meta["scale"] = meta.get("scale", 1.0) * r
    if "nu_extrapolated" in meta:
        meta["nu_extrapolated"] = (np.asarray(meta["nu_extrapolated"]) / r2).tolist()
    return ModeTable(
        table.nu / r2,
        table.c * r2,
        table.zero_mean.copy(),
        table.J,
        table.tail_bound * r2,
        table.shape_area * r2,
        None if table.nu_err is None else table.nu_err / r2,
        meta,
    )


def modes_for(shape: ShapeSpec, J: int | None = None, h: float | None = None) -> ModeTable:
    """Analytic table for squares and disks, numeric for raster shapes."""
    if shape.kind == "square":
        return modes_square(shape.param, J)
    if shape.kind == "disk":
        return modes_disk(shape.param, J)
    mask = shape.mask_array
    return modes_numeric(mask, h or 1.0 / mask.shape[0], J or 16, richardson=False)
