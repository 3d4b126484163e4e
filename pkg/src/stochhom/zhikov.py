"""Zhikov function, band/gap structure and the limit spectrum.

For inclusion shapes ``k`` with probabilities ``p_k`` and sizes ``r`` drawn
from a density encoded by quadrature nodes ``r_q`` and weights ``w_q``,

    beta(lam) = lam + lam^2 sum_k p_k sum_q w_q sum_j c_jk r_q^2 / (nu_jk / r_q^2 - lam).

Only modes with nonzero mean enter the series, so ``beta`` has poles on the
nonzero-mean bands only.  Its derivative is

    beta'(lam) = 1 - m + sum (weights) nu^2 / (nu - lam)^2,

with coupling mass ``m = (1 - p_0) E[r^2] |Y_1| < 1``, hence ``beta`` is
strictly increasing between consecutive poles.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ContractError, DomainError
from .medium import MediumSpec
from .shapes import ModeTable, modes_for

log = logging.getLogger(__name__)

# terms of the geometric expansion used for high modes
_N_SERIES = 12


@dataclass
class _Aggregate:
    """Nonzero-mean modes of one shape merged by eigenvalue and split into low/high parts."""

    nu_low: np.ndarray
    c_low: np.ndarray
    nu_high: np.ndarray
    c_high: np.ndarray
    moments: np.ndarray  # sum_high c / nu^(n+1), n = 0.._N_SERIES-1
    nu_split: float
    nu_last: float
    tail: float


def _aggregate(table: ModeTable, nu_split: float) -> _Aggregate:
    nu, c = table.nonzero_mean()
    if nu.size:
        uniq, inv = np.unique(nu, return_inverse=True)
        cs = np.bincount(inv, weights=c)
    else:
        uniq, cs = nu, c
    low = uniq <= nu_split
    hi_nu, hi_c = uniq[~low], cs[~low]
    powers = np.arange(1, _N_SERIES + 1)
    moments = (hi_c[None, :] / hi_nu[None, :] ** powers[:, None]).sum(axis=1) if hi_nu.size else np.zeros(_N_SERIES)
    nu_last = float(table.nu.max()) if table.nu.size else np.inf
    return _Aggregate(uniq[low], cs[low], hi_nu, hi_c, moments, nu_split, nu_last, float(table.tail_bound))


@dataclass
class ZhikovFunction:
    """Stochastic Zhikov function of a lattice medium.

    Parameters
    ----------
    tables : list of ModeTable
        Unit-size modes of every inclusion shape.
    probs : array
        Shape probabilities ``p_k``; ``p_0 = 1 - sum(probs)``.
    nodes, weights : array
        Size quadrature, weights summing to one.
    cutoff : float, optional
        Spectral window ``Lambda``.  Evaluation is fastest for
        ``|lam| <= 2 * cutoff``.
    support : (r1, r2), optional
        Support of the size law; defaults to the node range.
    """

    tables: list
    probs: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float | None = None
    support: tuple | None = None
    _agg: list = field(default=None, init=False, repr=False)
    _ref: float = field(default=0.0, init=False, repr=False)

    def __post_init__(self):
        self.probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        self.nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if len(self.tables) != self.probs.size:
            raise ContractError("one mode table per shape probability")
        if abs(self.weights.sum() - 1) > 1e-12 or np.any(self.weights < 0):
            raise ContractError("size weights must be nonnegative and sum to 1")
        if np.any(self.nodes <= 0):
            raise ContractError("size nodes must be positive")
        if not self.mass < 1:
            # monotonicity of beta between poles is no longer guaranteed
            raise ContractError(f"coupling mass {self.mass} must be below 1")
        if self.support is None:
            self.support = (float(self.nodes.min()), float(self.nodes.max()))
        self._ref = max(self.cutoff or 0.0, 1.0)
        split = 100.0 * self._ref * self.nodes.max() ** 2
        self._agg = [_aggregate(t, split) for t in self.tables]

    @classmethod
    def from_spec(cls, spec: MediumSpec, tables=None, n_quad: int = 32, cutoff: float | None = None) -> "ZhikovFunction":
        """Zhikov function of ``spec`` with analytic tables unless ``tables`` is given."""
        if tables is None:
            tables = [modes_for(s) for s in spec.shapes]
        nodes, weights = spec.size_dist.quadrature(n_quad)
        sd = spec.size_dist
        return cls(list(tables), np.asarray(spec.probs), nodes, weights, cutoff, (sd.r1, sd.r2))

    @property
    def p0(self) -> float:
        return 1.0 - float(self.probs.sum())

    @property
    def mass(self) -> float:
        """Total coupling mass ``sum_k p_k sum_q w_q r_q^2 |Y_k|``."""
        r2 = float(self.weights @ self.nodes**2)
        return float(sum(p * t.shape_area for p, t in zip(self.probs, self.tables)) * r2)

    @property
    def r_range(self) -> tuple[float, float]:
        return float(self.support[0]), float(self.support[1])

    # -- evaluation ----------------------------------------------------------

    def series(self, lam) -> tuple[np.ndarray, np.ndarray]:
        """``sum_k p_k sum_q w_q sum_j c r^2 / (nu / r^2 - lam)`` and its tail halfwidth."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        r2 = self.nodes**2
        total = np.zeros(lam.size)
        tail = np.zeros(lam.size)
        fast = np.abs(lam) <= 2 * self._ref
        for p, agg in zip(self.probs, self._agg):
            if p == 0:
                continue
            # low modes: direct sum, shape (lam, q, j)
            den = agg.nu_low[None, None, :] / r2[None, :, None] - lam[:, None, None]
            s = (agg.c_low[None, None, :] * r2[None, :, None] / den).sum(axis=2) @ self.weights
            # high modes: c r^4 / nu * sum_n (lam r^2 / nu)^n
            x = lam[:, None] * r2[None, :]
            pw = x[:, :, None] ** np.arange(_N_SERIES)[None, None, :]
            hi = (pw * agg.moments[None, None, :]).sum(axis=2) * r2[None, :] ** 2
            s = s + hi @ self.weights
            if not fast.all():
                s[~fast] = self._direct(agg, lam[~fast])
            total += p * s
            if agg.tail > 0:
                bound = agg.tail * r2[None, :] ** 2 / (agg.nu_last - x)
                tail += p * (bound @ self.weights)
        return total, 0.5 * tail

    def _direct(self, agg: _Aggregate, lam: np.ndarray) -> np.ndarray:
        # outside the expansion radius every mode is summed explicitly
        nu = np.concatenate([agg.nu_low, agg.nu_high])
        c = np.concatenate([agg.c_low, agg.c_high])
        out = np.empty(lam.size)
        for i, x in enumerate(lam):
            den = nu[None, :] / self.nodes[:, None] ** 2 - x
            out[i] = ((c[None, :] * self.nodes[:, None] ** 2 / den).sum(axis=1)) @ self.weights
        return out

    def __call__(self, lam):
        """``beta`` (midpoint of the tail interval), scalar or array."""
        lam_arr = np.asarray(lam, dtype=float)
        s, hw = self.series(lam_arr)
        beta = lam_arr.ravel() + lam_arr.ravel() ** 2 * s + lam_arr.ravel() ** 2 * hw
        return beta.reshape(lam_arr.shape) if lam_arr.ndim else float(beta[0])

    def halfwidth(self, lam):
        lam_arr = np.asarray(lam, dtype=float)
        _, hw = self.series(lam_arr)
        out = lam_arr.ravel() ** 2 * hw
        return out.reshape(lam_arr.shape) if lam_arr.ndim else float(out[0])

    def mean_response(self, lam):
        """Inclusion-averaged response ``<v>``: ``beta(lam) = lam + lam^2 <v>``."""
        s, hw = self.series(lam)
        out = s + hw
        return out if np.ndim(lam) else float(out[0])

    # -- bands ---------------------------------------------------------------

    def raw_bands(self, upto: float):
        """Unmerged bands ``[nu / r_2^2, nu / r_1^2]`` starting below ``upto``, with pole flags."""
        r1, r2 = self.r_range
        out = []
        for p, t in zip(self.probs, self.tables):
            if p == 0:
                continue
            keep = t.nu / r2**2 <= upto
            for nu, zm in zip(t.nu[keep], t.zero_mean[keep]):
                out.append((nu / r2**2, nu / r1**2, not zm))
        out.sort()
        return out

    def in_band(self, lam: float, tol: float = 0.0) -> bool:
        r1, r2 = self.r_range
        for p, t in zip(self.probs, self.tables):
            if p == 0:
                continue
            i = np.searchsorted(t.nu, lam * r1**2 - tol * r1**2)
            if i < t.nu.size and t.nu[i] <= lam * r2**2 + tol * r2**2:
                return True
        return False


def beta_fixed(tables, probs, r: float, lam: float) -> float:
    """``beta`` for a single inclusion size ``r``, summed directly over every listed mode."""
    acc = 0.0
    for p, t in zip(probs, tables):
        nu, c = t.nonzero_mean()
        acc += p * math.fsum(c * r * r / (nu / (r * r) - lam))
        tail = p * t.tail_bound * r**4 / (t.nu.max() - lam * r * r) if t.tail_bound > 0 else 0.0
        acc += 0.5 * tail
    return lam + lam * lam * acc


def beta_eval(zf: ZhikovFunction, lam: float) -> tuple[float, float]:
    """``beta(lam)`` and the halfwidth of its tail interval.

    Raises
    ------
    DomainError
        If ``lam`` lies in a band (within ``1e-9 * Lambda``).
    """
    scale = max(zf.cutoff or 0.0, abs(lam), 1.0)
    if zf.in_band(lam, 1e-9 * scale):
        raise DomainError(f"lambda={lam} lies in a band of the inclusion spectrum")
    return zf(lam), zf.halfwidth(lam)


# -- band structure -----------------------------------------------------------


@dataclass
class BandStructure:
    """Merged bands and the gaps between them inside ``(0, cutoff)``.

    ``poles[i]`` / ``zero_mean[i]`` flag bands generated by nonzero-mean /
    zero-mean modes.
    """

    bands: list
    gaps: list
    poles: list
    zero_mean: list
    cutoff: float

    @property
    def empty(self) -> bool:
        return not self.bands

    def beta_intervals(self) -> list[tuple[float, float]]:
        """Maximal intervals between consecutive pole bands, clipped to the cutoff."""
        out = []
        left = 0.0
        for (a, b), pole in zip(self.bands, self.poles):
            if pole:
                out.append((left, a))
                left = b
        if left < self.cutoff:
            out.append((left, self.cutoff))
        return out

    def contains(self, lam, tol: float = 0.0) -> np.ndarray:
        lam = np.atleast_1d(lam)
        inside = np.zeros(lam.shape, dtype=bool)
        for a, b in self.bands:
            inside |= (lam >= a - tol) & (lam <= b + tol)
        return inside

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "bands": [list(b) for b in self.bands],
            "poles": list(self.poles),
            "zero_mean": list(self.zero_mean),
            "gaps": [list(g) for g in self.gaps],
        }


def band_structure(zf: ZhikovFunction, cutoff: float | None = None) -> BandStructure:
    """Bands ``{nu / r^2 : r in [r_1, r_2]}`` of every listed mode, merged, up to ``cutoff``."""
    cutoff = cutoff if cutoff is not None else zf.cutoff
    if cutoff is None:
        raise ContractError("band structure needs a cutoff")
    for t in zf.tables:
        if t.nu.size and t.nu.max() / zf.r_range[1] ** 2 < cutoff and t.tail_bound > 0:
            log.warning("mode table ends below the cutoff; bands above %.4g are missing", t.nu.max())
    bands, poles, zms = [], [], []
    for a, b, pole in zf.raw_bands(cutoff):
        if bands and a <= bands[-1][1] * (1 + 1e-12):
            bands[-1] = (bands[-1][0], max(bands[-1][1], b))
            poles[-1] |= pole
            zms[-1] |= not pole
        else:
            bands.append((a, b))
            poles.append(pole)
            zms.append(not pole)
    gaps = []
    left = 0.0
    for a, b in bands:
        if a > left:
            gaps.append((left, a))
        left = max(left, b)
    if left < cutoff:
        gaps.append((left, cutoff))
    if not bands:
        log.info("cutoff %.4g lies below the first band", cutoff)
    return BandStructure(bands, gaps, poles, zms, float(cutoff))


def default_cutoff(zf: ZhikovFunction, gap_index: int = 4) -> float:
    """Midpoint of the ``gap_index``-th gap (counting from 1).

    When the bands overlap so much that fewer gaps exist below 100 times the
    first band, the midpoint of the last bounded gap is used instead.
    """
    first = min(t.nu[0] for t in zf.tables) / zf.r_range[1] ** 2
    upto = 2.0 * first
    while True:
        bs = band_structure(zf, upto)
        closed = [g for g in bs.gaps if g[1] < upto]
        if len(closed) >= gap_index:
            a, b = closed[gap_index - 1]
            return 0.5 * (a + b)
        if upto > 100 * first:
            if not closed:
                raise ContractError("no bounded gap below 100 times the first band")
            log.warning("only %d gaps found; using the last one for the cutoff", len(closed))
            a, b = closed[-1]
            return 0.5 * (a + b)
        upto *= 1.5


# -- roots and the limit spectrum -----------------------------------------------


@dataclass
class Root:
    lam: float
    gap: int
    k: int
    mu: float
    halfwidth: float


def beta_roots(zf: ZhikovFunction, mu_list, structure: BandStructure, rtol: float = 1e-10) -> tuple[list, list]:
    """Solutions of ``beta(lam) = mu_k`` on every interval between pole bands.

    Intervals are numbered from 1; the first starts at 0.  Returns the roots
    (sorted by value) and the ``(interval, k)`` pairs with no root because
    ``mu_k`` lies outside the range of ``beta`` there.
    """
    mu = np.asarray(mu_list, dtype=float)
    if mu.size and (np.any(mu <= 0) or np.any(np.diff(mu) < 0)):
        raise ContractError("mu_list must be positive and ascending")
    scale = structure.cutoff
    delta = 1e-9 * scale
    roots, missing = [], []
    for j, (a, b) in enumerate(structure.beta_intervals(), start=1):
        lo = a + delta if a > 0 else 0.0
        at_pole = b < structure.cutoff
        hi = b - delta if at_pole else b
        if hi <= lo:
            continue
        f_lo, f_hi = zf(lo), zf(hi)
        for k, m in enumerate(mu, start=1):
            if not f_lo < m < f_hi:
                missing.append((j, k))
                continue
            lam = brentq(lambda x: zf(x) - m, lo, hi, xtol=1e-3 * delta, rtol=max(rtol, 4e-16), maxiter=500)
            roots.append(Root(lam, j, k, float(m), zf.halfwidth(lam)))
    roots.sort(key=lambda r: r.lam)
    return roots, missing


@dataclass
class LimitSpectrum:
    """Bands plus the point eigenvalues ``lambda_{j,k}`` inside ``(0, cutoff)``."""

    structure: BandStructure
    points: list
    cutoff: float

    @property
    def bands(self):
        return self.structure.bands

    @property
    def point_values(self) -> np.ndarray:
        return np.array([r.lam for r in self.points])

    def distance(self, lam) -> np.ndarray:
        """Distance of each ``lam`` to the spectrum truncated at the cutoff."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        d = np.full(lam.shape, np.inf)
        for a, b in self.bands:
            d = np.minimum(d, np.maximum(0.0, np.maximum(a - lam, lam - b)))
        pts = self.point_values
        if pts.size:
            d = np.minimum(d, np.abs(lam[:, None] - pts[None, :]).min(axis=1))
        return d

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "structure": self.structure.to_dict(),
            "points": [
                {"lambda": r.lam, "gap": r.gap, "k": r.k, "mu": r.mu, "halfwidth": r.halfwidth} for r in self.points
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "lo", "hi", "gap", "k", "halfwidth"])
        for (a, b), pole in zip(self.bands, self.structure.poles):
            w.writerow(["band_pole" if pole else "band", repr(a), repr(b), "", "", ""])
        for r in self.points:
            w.writerow(["point", repr(r.lam), repr(r.lam), r.gap, r.k, repr(r.halfwidth)])
        return buf.getvalue()


def limit_spectrum(zf: ZhikovFunction, mu_list, cutoff: float | None = None) -> LimitSpectrum:
    """Spectrum of the limit operator inside ``(0, cutoff)``.

    Roots that fall inside a (zero-mean) band or beyond the cutoff are not
    point eigenvalues and are dropped.
    """
    cutoff = cutoff if cutoff is not None else zf.cutoff
    if cutoff is None:
        cutoff = default_cutoff(zf)
    bs = band_structure(zf, cutoff)
    if zf.p0 == 1.0:
        mu = np.asarray(mu_list, dtype=float)
        pts = [Root(float(m), 1, k, float(m), 0.0) for k, m in enumerate(mu, start=1) if m < cutoff]
        return LimitSpectrum(bs, pts, float(cutoff))
    roots, _ = beta_roots(zf, mu_list, bs)
    pts = [r for r in roots if r.lam < cutoff and not bs.contains(r.lam)[0]]
    return LimitSpectrum(bs, pts, float(cutoff))


def beta_samples(zf: ZhikovFunction, structure: BandStructure, n: int = 200, rel_margin: float = 1e-3) -> list[dict]:
    """``(gap, lambda, beta, halfwidth)`` samples on every gap, ends pulled in by ``rel_margin``."""
    rows = []
    for j, (a, b) in enumerate(structure.gaps, start=1):
        pad = rel_margin * (b - a)
        lam = np.linspace(a + pad, b - pad, n)
        beta = zf(lam)
        hw = zf.halfwidth(lam)
        rows.extend({"gap": j, "lambda": float(x), "beta": float(y), "halfwidth": float(h)} for x, y, h in zip(lam, beta, hw))
    return rows


def beta_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["gap", "lambda", "beta", "halfwidth"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
