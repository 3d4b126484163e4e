"""Numerical experiments: spectral and resolvent convergence in the high-contrast limit.

The grid resolution per lattice cell is fixed across an eps-sweep, so every
inclusion is rasterised identically at every eps.  The limit objects are
therefore built from the discrete inclusion spectrum at that resolution
(``discrete_tables``) and from the homogenised matrix of the same
discretisation; the sweep then isolates the eps-dependence.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.ndimage import label

from .eigen import eigenvalues_in_interval
from .errors import ContractError, NumericError
from .grid_fem import (
    Grid,
    assemble_eps_problem,
    assemble_full,
    assemble_subdomain_laplace,
    mask_components,
    solve_resolvent,
    assemble_laplace,
)
from .homog import ahom_estimate, macro_eigs
from .medium import MediumSpec, Window, inclusions_in_domain, rasterise, sample_realisation
from .shapes import ModeTable, discrete_modes, raster_mask, scale_modes
from .zhikov import BandStructure, LimitSpectrum, Root, ZhikovFunction, band_structure, limit_spectrum

log = logging.getLogger(__name__)

CSV_COLUMNS = ["eps", "seed", "n_dofs", "k_eigs", "d_forward", "d_backward", "outlier_frac", "wall_ms"]


# -- limit objects -------------------------------------------------------------


def discrete_table(shape, r: float, cells: int) -> ModeTable:
    """All Q1 modes of the inclusion ``Y_{1,r}`` rasterised on ``cells`` elements per cell.

    Returned at unit size (divided back by ``r``) so that the size law can be
    applied as for analytic tables.
    """
    mask = raster_mask(shape, cells, r)
    w, c, total, area = discrete_modes(mask, 1.0 / cells)
    zm = c <= 1e-12 * area
    c = np.where(zm, 0.0, c)
    levels = int(np.count_nonzero(np.r_[True, np.diff(w) > 1e-8 * w[1:]]))
    meta = {"kind": "discrete", "cells": cells, "r": r, "raster_area": area}
    table = ModeTable(w, c, zm, levels, max(total - math.fsum(c), 0.0), total, meta=meta)
    return scale_modes(table, 1.0 / r)


def study_zhikov(spec: MediumSpec, cells_per_eps: int = 8, cutoff: float | None = None, n_quad: int = 32) -> ZhikovFunction:
    """Zhikov function for the sweep: discrete tables for fixed sizes, analytic otherwise."""
    if spec.size_dist.kind == "fixed":
        r = spec.size_dist.r1
        tables = [discrete_table(s, r, cells_per_eps) for s in spec.shapes]
        return ZhikovFunction(tables, np.asarray(spec.probs), [r], [1.0], cutoff, (r, r))
    log.warning("random sizes: using continuum inclusion spectra in the limit")
    return ZhikovFunction.from_spec(spec, n_quad=n_quad, cutoff=cutoff)


def mu_list(A_hom, S, cutoff: float, beta_max: float, N: int = 128, k_min: int = 20) -> np.ndarray:
    """Macroscopic eigenvalues covering ``max(cutoff, beta_max)`` (at least ``k_min``)."""
    A = np.asarray(A_hom, dtype=float)
    area = (S[1] - S[0]) * (S[3] - S[2])
    top = 2.0 * max(cutoff, beta_max)
    weyl = area * top / (4 * np.pi * math.sqrt(np.linalg.det(A)))
    K = max(k_min, int(1.3 * weyl) + 10)
    while True:
        mu = macro_eigs(A, S, N, K)
        if mu[-1] > top or K >= 400:
            return mu[mu <= max(top, mu[k_min - 1])]
        K *= 2


@dataclass
class StudySetup:
    spec: MediumSpec
    cells_per_eps: int
    cutoff: float
    cutoff_trim: float
    A_hom: np.ndarray
    mu: np.ndarray
    zf: ZhikovFunction = field(repr=False)
    limit: LimitSpectrum = field(repr=False)


def prepare(
    spec: MediumSpec,
    cutoff: float | None = None,
    cells_per_eps: int = 8,
    A_hom=None,
    rve_L: int = 16,
    rve_samples: int = 32,
    rve_seed: int = 0,
    macro_N: int = 128,
) -> StudySetup:
    """Limit spectrum, homogenised matrix and cutoffs for a sweep.

    ``cutoff`` defaults to the midpoint of the second gap.  The trimmed
    cutoff ``Lambda'`` sits one tenth of the enclosing gap below ``cutoff``.
    """
    if A_hom is None:
        if spec.is_degenerate:
            A_hom = spec.A1_array
        else:
            A_hom = ahom_estimate(spec, rve_L, rve_samples, rve_seed, cells_per_eps).mean
    A_hom = np.asarray(A_hom, dtype=float)
    if spec.is_degenerate:
        top = cutoff if cutoff is not None else 10 * np.pi**2 * np.linalg.eigvalsh(A_hom).max()
        mu = mu_list(A_hom, spec.S, top, top, macro_N)
        if cutoff is None:
            # midpoint between the fourth and fifth distinct levels
            levels = mu[np.r_[True, np.diff(mu) > 1e-6 * mu[1:]]]
            cutoff = 0.5 * (levels[3] + levels[4])
        zf = ZhikovFunction([], np.zeros(0), [1.0], [1.0], cutoff)
        trim = cutoff - 0.1 * _enclosing_gap(cutoff, [], mu)
        limit = limit_spectrum(zf, mu, cutoff)
        return StudySetup(spec, cells_per_eps, cutoff, trim, A_hom, mu, zf, limit)
    zf = study_zhikov(spec, cells_per_eps)
    if cutoff is None:
        bs = band_structure(zf, 4 * zf.tables[0].nu[0] / zf.r_range[1] ** 2 + 1.0)
        a, b = bs.gaps[1]
        cutoff = 0.5 * (a + b)
    zf = ZhikovFunction(zf.tables, zf.probs, zf.nodes, zf.weights, cutoff, zf.support)
    bs = band_structure(zf, cutoff)
    if bs.contains(cutoff)[0]:
        raise ContractError(f"cutoff {cutoff} lies in a band")
    mu = mu_list(A_hom, spec.S, cutoff, max(zf(cutoff), 0.0), macro_N)
    limit = limit_spectrum(zf, mu, cutoff)
    a, b = next(g for g in band_structure(zf, 4 * cutoff).gaps if g[0] < cutoff < g[1])
    trim = cutoff - 0.1 * (b - a)
    return StudySetup(spec, cells_per_eps, cutoff, trim, A_hom, mu, zf, limit)


def _enclosing_gap(lam, bands, points) -> float:
    edges = sorted([0.0] + [x for b in bands for x in b] + list(points))
    below = [x for x in edges if x < lam]
    above = [x for x in edges if x > lam]
    lo = below[-1] if below else 0.0
    hi = above[0] if above else 2 * lam
    return hi - lo


# -- Hausdorff deviations ----------------------------------------------------------


def _sup_dist_interval(a: float, b: float, pts: np.ndarray) -> float:
    """``sup_{x in [a, b]} dist(x, pts)`` for a sorted finite set ``pts``."""
    if pts.size == 0:
        return np.inf
    cand = [a, b]
    inner = pts[(pts >= a) & (pts <= b)]
    mids = 0.5 * (inner[1:] + inner[:-1]) if inner.size > 1 else np.zeros(0)
    cand.extend(mids.tolist())
    cand = np.array(cand)
    return float(np.abs(cand[:, None] - pts[None, :]).min(axis=1).max())


def hausdorff_parts(computed, bands, points, window: float, window_back: float | None = None) -> tuple[float, float]:
    """One-sided deviations between a finite set and a union of bands and points.

    ``d_forward = max_{x in computed} dist(x, L)`` and
    ``d_backward = sup_{y in L} dist(y, computed)`` with ``L`` the limit set
    truncated to ``[0, window]`` (``[0, window_back]`` for the backward part).
    Swapping the roles of the sets swaps the two numbers.
    """
    window_back = window if window_back is None else window_back
    x = np.sort(np.asarray(computed, dtype=float))
    bands_f = [(a, min(b, window)) for a, b in bands if a <= window]
    pts_f = np.array([p for p in points if p <= window])
    if x.size:
        d = np.full(x.size, np.inf)
        for a, b in bands_f:
            d = np.minimum(d, np.maximum(0.0, np.maximum(a - x, x - b)))
        if pts_f.size:
            d = np.minimum(d, np.abs(x[:, None] - pts_f[None, :]).min(axis=1))
        d_fwd = float(d.max())
    else:
        d_fwd = 0.0
    back = [_sup_dist_interval(a, min(b, window_back), x) for a, b in bands if a <= window_back]
    back += [_sup_dist_interval(p, p, x) for p in points if p <= window_back]
    d_bwd = float(max(back)) if back else 0.0
    return d_fwd, d_bwd


def outlier_fraction(computed, limit: LimitSpectrum, delta: float) -> float:
    x = np.asarray(computed, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.mean(limit.distance(x) > delta))


# -- one realisation -------------------------------------------------------------------


def eps_problem(spec: MediumSpec, eps: float, seed: int, cells_per_eps: int = 8):
    """Grid, soft labels and assembled high-contrast problem of one realisation."""
    grid = Grid.for_eps(spec.S, eps, cells_per_eps)
    real = sample_realisation(spec, seed, Window.covering(spec.S, eps))
    soft = rasterise(real, eps, grid, spec)
    return grid, real, soft, assemble_eps_problem(grid, soft, spec.A1_array, eps)


def _spectrum_row(args) -> dict:
    spec, eps, seed, cells, cutoff, trim, limit_d, tol = args
    t0 = time.perf_counter()
    grid, real, soft, prob = eps_problem(spec, eps, seed, cells)
    row = {"eps": eps, "seed": seed, "n_dofs": prob.n}
    try:
        res = eigenvalues_in_interval(prob.K, prob.M, 0.0, cutoff, tol=tol, seed=seed)
    except NumericError as exc:
        row.update(error=str(exc), k_eigs=0, eigenvalues=[], d_forward=np.nan, d_backward=np.nan, outlier_frac=np.nan)
        row["wall_ms"] = int(1000 * (time.perf_counter() - t0))
        return row
    ev = res.eigenvalues
    bands = limit_d["structure"]["bands"]
    pts = [p["lambda"] for p in limit_d["points"]]
    d_fwd, d_bwd = hausdorff_parts(ev, bands, pts, cutoff, trim)
    lim = _limit_from_dict(limit_d)
    row.update(
        k_eigs=int(ev.size),
        eigenvalues=ev.tolist(),
        max_residual=float(res.residuals.max()) if res.residuals.size else 0.0,
        d_forward=d_fwd,
        d_backward=d_bwd,
        outlier_frac=outlier_fraction(ev, lim, 0.05 * cutoff),
        wall_ms=int(1000 * (time.perf_counter() - t0)),
    )
    return row


def _limit_from_dict(d: dict) -> LimitSpectrum:
    st = d["structure"]
    bs = BandStructure([tuple(b) for b in st["bands"]], [tuple(g) for g in st["gaps"]], st["poles"], st["zero_mean"], st["cutoff"])
    pts = [Root(p["lambda"], p["gap"], p["k"], p["mu"], p["halfwidth"]) for p in d["points"]]
    return LimitSpectrum(bs, pts, d["cutoff"])


def _run_tasks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# -- reports ------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    """Rows keyed by ``(eps, seed)`` plus the limit spectrum they were measured against."""

    rows: list
    cutoff: float
    cutoff_trim: float
    limit: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = [(r["eps"], r["seed"]) for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ContractError("report rows must be unique in (eps, seed)")

    def eps_values(self) -> list[float]:
        return sorted({r["eps"] for r in self.rows}, reverse=True)

    def seed_average(self, key: str) -> dict:
        """``{eps: mean of key over seeds}`` (failed rows skipped)."""
        out = {}
        for e in self.eps_values():
            vals = [r[key] for r in self.rows if r["eps"] == e and not np.isnan(r[key])]
            out[e] = float(np.mean(vals)) if vals else float("nan")
        return out

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "cutoff_trim": self.cutoff_trim,
            "limit": self.limit,
            "meta": self.meta,
            "rows": self.rows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        return cls(d["rows"], d["cutoff"], d["cutoff_trim"], d["limit"], d.get("meta", {}))


def spectrum_convergence(
    spec: MediumSpec,
    eps_list,
    seeds,
    cutoff: float | None = None,
    cells_per_eps: int = 8,
    setup: StudySetup | None = None,
    tol: float = 1e-8,
    jobs: int = 1,
) -> ConvergenceReport:
    """Hausdorff deviations between eps-spectra below ``cutoff`` and the limit spectrum.

    Parameters
    ----------
    spec : MediumSpec
    eps_list : sequence of float
        Lattice periods; ``1/eps`` times the domain size must be an integer.
    seeds : sequence of int
    cutoff : float, optional
        Spectral window; must lie in a gap.  Defaults to the midpoint of the
        second gap (see :func:`prepare`).
    setup : StudySetup, optional
        Reuse precomputed limit objects.
    jobs : int
        Worker processes for the independent ``(eps, seed)`` rows.
    """
    setup = setup or prepare(spec, cutoff, cells_per_eps)
    limit_d = setup.limit.to_dict()
    tasks = [
        (spec, float(e), int(s), cells_per_eps, setup.cutoff, setup.cutoff_trim, limit_d, tol)
        for e in sorted(eps_list, reverse=True)
        for s in seeds
    ]
    rows = _run_tasks(_spectrum_row, tasks, jobs)
    meta = {
        "cells_per_eps": cells_per_eps,
        "A_hom": setup.A_hom.tolist(),
        "mu": setup.mu.tolist(),
        "spec": spec.to_dict(),
    }
    return ConvergenceReport(rows, setup.cutoff, setup.cutoff_trim, limit_d, meta)


def band_cluster_histogram(report: ConvergenceReport, delta: float | None = None) -> dict:
    """Per-eps counts of computed eigenvalues near each band and point, and the outlier fraction.

    An eigenvalue is an outlier if it is farther than ``delta``
    (default ``0.05 * cutoff``) from the limit spectrum.
    """
    if not report.rows:
        raise ContractError("empty report")
    delta = 0.05 * report.cutoff if delta is None else delta
    lim = _limit_from_dict(report.limit)
    out = {}
    for e in report.eps_values():
        ev = np.concatenate([np.asarray(r["eigenvalues"]) for r in report.rows if r["eps"] == e] or [np.zeros(0)])
        band_counts = []
        for a, b in lim.bands:
            band_counts.append(int(np.count_nonzero((ev >= a - delta) & (ev <= b + delta))))
        pts = lim.point_values
        near_pts = int(np.count_nonzero(np.abs(ev[:, None] - pts[None, :]).min(axis=1) <= delta)) if pts.size and ev.size else 0
        out[e] = {
            "n": int(ev.size),
            "band_counts": band_counts,
            "near_points": near_pts,
            "outlier_frac": outlier_fraction(ev, lim, delta),
        }
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def emit_report(report: ConvergenceReport, formats, out_dir, stem: str = "convergence") -> list[str]:
    """Write the report as CSV, JSON and/or SVG; returns the paths written.

    File content depends on the report only, so identical reports give
    byte-identical files.
    """
    formats = set(formats)
    unknown = formats - {"csv", "json", "svg"}
    if unknown:
        raise ContractError(f"unknown formats {sorted(unknown)}")
    if not formats:
        return []
    if not report.rows:
        raise ContractError("empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if "csv" in formats:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
        p = out / f"{stem}.csv"
        p.write_text(buf.getvalue())
        paths.append(str(p))
    if "json" in formats:
        p = out / f"{stem}.json"
        p.write_text(json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=True) + "\n")
        paths.append(str(p))
    if "svg" in formats:
        from .plotting import plot_convergence

        p = out / f"{stem}.svg"
        plot_convergence(p, report)
        paths.append(str(p))
    return paths


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if np.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# -- soft-subdomain decomposition -------------------------------------------------------


def soft_spectrum_split(spec: MediumSpec, eps: float, seed: int, cells_per_eps: int = 8) -> dict:
    """Spectrum of the soft-subdomain operator against the union of per-inclusion spectra.

    The global operator ``eps^2 (-Laplace)`` with Dirichlet conditions on the
    soft set is solved densely; every inclusion is rasterised again on its
    own reference cell and solved separately.
    """
    grid, real, soft, _ = eps_problem(spec, eps, seed, cells_per_eps)
    sub = assemble_subdomain_laplace(grid, soft)
    glob = sla.eigh(eps**2 * sub.K.toarray(), sub.M.toarray(), eigvals_only=True)
    local = []
    incs = inclusions_in_domain(real, eps, spec)
    for inc in incs:
        mask = raster_mask(inc.shape_spec, cells_per_eps, inc.size)
        w, _, _, _ = discrete_modes(mask, 1.0 / cells_per_eps)
        local.append(w)
    union = np.sort(np.concatenate(local)) if local else np.zeros(0)
    comps = mask_components(grid, sub)
    return {
        "n_inclusions": len(incs),
        "n_components": len(comps),
        "global": glob,
        "union": union,
        "max_rel_diff": float(np.max(np.abs(glob - union) / np.abs(union))) if glob.size == union.size and glob.size else np.inf,
    }


# -- resolvent ---------------------------------------------------------------------------


def _element_integrals(grid: Grid, u_full: np.ndarray) -> np.ndarray:
    """``int_e u`` for every element (bilinear interpolation is exact: mean of corners)."""
    en = grid.element_nodes()
    return u_full[en].mean(axis=1) * grid.hx * grid.hy


def classical_solution(A1, lam: float, S, x, y, terms: int = 199) -> np.ndarray:
    """Series solution of ``-div A1 grad u - lam u = 1`` on a rectangle, ``A1`` diagonal."""
    A = np.asarray(A1, dtype=float)
    if abs(A[0, 1]) > 0 or abs(A[1, 0]) > 0:
        raise ContractError("series oracle needs a diagonal A1")
    x0, x1, y0, y1 = S
    a, b = x1 - x0, y1 - y0
    u = np.zeros(np.broadcast(x, y).shape)
    k = np.arange(1, terms + 1, 2)
    sx = np.sin(np.pi * np.multiply.outer(np.asarray(x) - x0, k) / a)
    sy = np.sin(np.pi * np.multiply.outer(np.asarray(y) - y0, k) / b)
    for i, m in enumerate(k):
        lam_mn = A[0, 0] * (np.pi * m / a) ** 2 + A[1, 1] * (np.pi * k / b) ** 2
        coef = 16.0 / (np.pi**2 * m * k) / (lam_mn - lam)
        u += sx[..., i] * (sy * coef).sum(axis=-1)
    return u


def _resolvent_row(args) -> dict:
    spec, eps, seed, cells, lam, A_hom, beta, vbar_tables = args
    t0 = time.perf_counter()
    grid, real, soft, prob = eps_problem(spec, eps, seed, cells)
    f = np.ones(prob.n)
    u_eps = solve_resolvent(prob, lam, f, rtol=1e-10)
    # u0: -div A_hom grad u0 - beta u0 = (beta / lam) f
    macro = assemble_laplace(grid, A_hom)
    u0 = solve_resolvent_shifted(macro, beta, (beta / lam) * f)
    ue_full, u0_full = prob.expand(u_eps), prob.expand(u0)
    # stiff-region L2 error
    stiff = np.nonzero(~soft.ravel(order="F"))[0]
    Ks, Ms = assemble_full(grid, np.zeros((stiff.size, 2, 2)), stiff)
    diff = ue_full - u0_full
    err_stiff = math.sqrt(diff @ (Ms @ diff))
    norm_stiff = math.sqrt(u0_full @ (Ms @ u0_full))
    # inclusion averages
    labels = _inclusion_labels(grid, soft)
    ie = _element_integrals(grid, ue_full)
    i0 = _element_integrals(grid, u0_full)
    soft_f = soft.ravel(order="F")
    n_inc = labels.max() + 1 if labels.size else 0
    area = np.bincount(labels[soft_f], minlength=n_inc) * grid.hx * grid.hy
    avg_e = np.bincount(labels[soft_f], weights=ie[soft_f], minlength=n_inc) / area
    avg_0 = np.bincount(labels[soft_f], weights=i0[soft_f], minlength=n_inc) / area
    # each inclusion's mean response from its own table
    incs = inclusions_in_domain(real, eps, spec)
    vbar = np.array([vbar_tables[(inc.shape, round(inc.size, 12))] for inc in incs]) if incs else np.zeros(0)
    order = _match_inclusions(grid, labels, soft_f, incs, eps)
    avg_lim = avg_0 + (1.0 + lam * avg_0) * vbar[order] if n_inc else avg_0
    err_inc = math.sqrt(np.sum(area * (avg_e - avg_lim) ** 2)) if n_inc else 0.0
    norm_inc = math.sqrt(np.sum(area * avg_lim**2)) if n_inc else 1.0
    M_all = assemble_full(grid, np.zeros((grid.nx * grid.ny, 2, 2)))[1]
    row = {
        "eps": eps,
        "seed": seed,
        "n_dofs": prob.n,
        "n_inclusions": int(n_inc),
        "err_stiff": err_stiff / norm_stiff,
        "err_inclusion": err_inc / norm_inc if n_inc else 0.0,
        "norm_u": math.sqrt(ue_full @ (M_all @ ue_full)),
    }
    A1 = spec.A1_array
    if spec.is_degenerate and A1[0, 1] == 0 and A1[1, 0] == 0:
        x, y = grid.node_coords()
        uc = classical_solution(A1, lam, spec.S, x, y)
        d = ue_full - uc
        row["err_classical"] = math.sqrt(d @ (M_all @ d)) / math.sqrt(uc @ (M_all @ uc))
    row["wall_ms"] = int(1000 * (time.perf_counter() - t0))
    return row


def solve_resolvent_shifted(problem, shift: float, rhs_f: np.ndarray) -> np.ndarray:
    """Solve ``(K - shift M) u = M rhs_f`` for ``shift`` below the spectrum."""
    A = (problem.K - shift * problem.M).tocsc()
    return spla.splu(A).solve(problem.M @ rhs_f)


def _inclusion_labels(grid: Grid, soft: np.ndarray) -> np.ndarray:
    """Connected soft element clusters (4-neighbour), label per element in ``F`` order."""
    lab, n = label(soft)
    return (lab.ravel(order="F") - 1).astype(int)


def _match_inclusions(grid, labels, soft_f, incs, eps) -> np.ndarray:
    """Index into ``incs`` for every soft cluster label, matched through the lattice cell."""
    xb, yb = grid.barycentres()
    xb, yb = xb.ravel(order="F"), yb.ravel(order="F")
    n = labels.max() + 1
    cell_of = {inc.cell: i for i, inc in enumerate(incs)}
    out = np.zeros(n, dtype=int)
    first = np.unique(labels[soft_f], return_index=True)[1]
    idx = np.nonzero(soft_f)[0][first]
    x0, _, y0, _ = grid.S
    for lab, e in zip(range(n), idx):
        cell = (int(math.floor(xb[e] / eps)), int(math.floor(yb[e] / eps)))
        out[lab] = cell_of[cell]
    return out


def resolvent_convergence(
    spec: MediumSpec,
    eps_list,
    seeds,
    lam: float = -1.0,
    cells_per_eps: int = 8,
    A_hom=None,
    jobs: int = 1,
    rve_samples: int = 32,
) -> list[dict]:
    """Errors of the eps-resolvent against the two-scale limit for constant ``f = 1``.

    The limit is ``u0`` from ``-div A_hom grad u0 - beta(lam) u0 = beta(lam)/lam``
    in the stiff region and ``u0 + (1 + lam u0) v`` averaged over every
    inclusion, where ``-Laplace v - lam v = 1`` on the inclusion.

    Returns rows with relative ``err_stiff`` (L2 over the stiff set) and
    ``err_inclusion`` (area-weighted l2 over inclusion averages).
    """
    if not lam < 0:
        raise ContractError("resolvent study requires lambda < 0")
    if A_hom is None:
        A_hom = spec.A1_array if spec.is_degenerate else ahom_estimate(spec, 16, rve_samples, 0, cells_per_eps).mean
    A_hom = np.asarray(A_hom, dtype=float)
    vbar = {}
    beta = lam
    if not spec.is_degenerate:
        zf = study_zhikov(spec, cells_per_eps, cutoff=max(1.0, abs(lam)))
        beta = zf(lam)
        # per-inclusion mean response <v> / |Y_1,r| for every occurring size
        sizes = _occurring_sizes(spec, eps_list, seeds)
        for k, shp in enumerate(spec.shapes):
            for r in sizes:
                if spec.size_dist.kind == "fixed":
                    t = scale_modes(zf.tables[k], r)
                else:
                    t = scale_modes(discrete_table(shp, r, cells_per_eps), r)
                nu, c = t.nonzero_mean()
                vbar[(k, round(r, 12))] = float(np.sum(c / (nu - lam)) / _raster_area(shp, r, cells_per_eps))
    tasks = [(spec, float(e), int(s), cells_per_eps, lam, A_hom, beta, vbar) for e in sorted(eps_list, reverse=True) for s in seeds]
    return _run_tasks(_resolvent_row, tasks, jobs)


def _raster_area(shape, r, cells) -> float:
    return float(raster_mask(shape, cells, r).sum()) / cells**2


def _occurring_sizes(spec: MediumSpec, eps_list, seeds) -> list[float]:
    if spec.size_dist.kind == "fixed":
        return [spec.size_dist.r1]
    sizes = set()
    for e in eps_list:
        for s in seeds:
            real = sample_realisation(spec, s, Window.covering(spec.S, e))
            sizes.update(round(float(v), 12) for v in real.size[~np.isnan(real.size)])
    return sorted(sizes)
