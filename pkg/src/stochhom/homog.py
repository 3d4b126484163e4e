"""Homogenised stiff-phase matrix and macroscopic Dirichlet eigenvalues.

The quadratic form ``A_hom xi . xi`` is the infimum of the stiff-phase energy
of ``xi + grad p`` over stationary correctors ``p``.  It is estimated by
solving periodic corrector problems on ``L x L`` tori of unit cells, drawn
from the medium law, and averaging the energies.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .eigen import smallest_eigenpairs
from .errors import ContractError, GeometryError, NumericError
from .grid_fem import Grid, assemble_corrector, assemble_laplace, solve_corrector
from .medium import EMPTY, MediumSpec, Window, sample_realisation

log = logging.getLogger(__name__)

MAX_REJECTIONS = 10


def spec_hash(spec: MediumSpec) -> str:
    return hashlib.sha256(spec.to_json().encode()).hexdigest()[:16]


@dataclass
class AhomEstimate:
    """Monte-Carlo estimate of the homogenised matrix.

    Attributes
    ----------
    mean : (2, 2) ndarray
    stderr : (2, 2) ndarray
        Entrywise standard errors of ``mean`` (``nan`` for one sample).
    L, n_samples, h_per_cell : int
    samples : (n, 2, 2) ndarray
        Per-sample matrices.
    seeds : list of int
        Seeds of the accepted samples.
    """

    mean: np.ndarray
    stderr: np.ndarray
    L: int
    n_samples: int
    h_per_cell: int = 8
    samples: np.ndarray = field(default=None, repr=False)
    seeds: list = field(default_factory=list, repr=False)
    provenance: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        def clean(a):
            return [[None if np.isnan(v) else float(v) for v in row] for row in np.asarray(a)]

        return {
            "mean": clean(self.mean),
            "stderr": clean(self.stderr),
            "L": self.L,
            "n_samples": self.n_samples,
            "h_per_cell": self.h_per_cell,
            "seeds": list(self.seeds),
            "samples": [clean(s) for s in self.samples] if self.samples is not None else [],
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "AhomEstimate":
        def arr(a):
            return np.array([[np.nan if v is None else v for v in row] for row in a], dtype=float)

        return cls(
            arr(d["mean"]),
            arr(d["stderr"]),
            int(d["L"]),
            int(d["n_samples"]),
            int(d.get("h_per_cell", 8)),
            np.array([arr(s) for s in d.get("samples", [])]) if d.get("samples") else None,
            list(d.get("seeds", [])),
            dict(d.get("provenance", {})),
        )


def torus_phases(spec: MediumSpec, seed: int, L: int, h_per_cell: int) -> np.ndarray:
    """Soft labels of an ``L x L`` torus of unit cells, ``h_per_cell`` elements per cell.

    Every drawn inclusion is kept: on the torus there is no boundary to clear.
    """
    real = sample_realisation(spec, seed, Window(0, L, 0, L))
    t = (np.arange(h_per_cell) + 0.5) / h_per_cell
    y1, y2 = np.meshgrid(t, t, indexing="ij")
    soft = np.zeros((L, h_per_cell, L, h_per_cell), dtype=bool)
    for i, j in zip(*np.nonzero(real.shape_idx != EMPTY)):
        shp = spec.shapes[real.shape_idx[i, j]]
        soft[i, :, j, :] = shp.contains(y1, y2, real.size[i, j])
    return soft.reshape(L * h_per_cell, L * h_per_cell)


def corrector_energies(soft: np.ndarray, A1, h_per_cell: int = 8, rtol: float = 1e-10) -> np.ndarray:
    """Matrix of stiff-phase corrector energies per unit area for one torus."""
    A1 = np.asarray(A1, dtype=float)
    xis = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    loads = []
    for xi in xis:
        K, b, info = assemble_corrector(soft, A1, xi, h_per_cell)
        loads.append(b)
    B = np.column_stack(loads)
    P = solve_corrector(K, B)
    res = np.linalg.norm(K @ P - B, axis=0) / np.maximum(np.linalg.norm(B, axis=0), 1e-300)
    if np.any(res > rtol):
        raise NumericError(f"corrector residual {res.max():.2e} exceeds {rtol:.1e}", residuals=res)
    Q = {}
    for name, xi, b, p in zip(("e1", "e2", "e12"), xis, B.T, P.T):
        Q[name] = (xi @ A1 @ xi * info["stiff_area"] - b @ p) / info["area"]
        if Q[name] > xi @ A1 @ xi * (1 + 1e-8):
            raise ContractError(f"corrector energy {Q[name]} exceeds the stiff bound")
    a12 = 0.5 * (Q["e12"] - Q["e1"] - Q["e2"])
    return np.array([[Q["e1"], a12], [a12, Q["e2"]]])


def ahom_estimate(
    spec: MediumSpec,
    L: int = 16,
    n_samples: int = 32,
    base_seed: int = 0,
    h_per_cell: int = 8,
    rtol: float = 1e-10,
) -> AhomEstimate:
    """Monte-Carlo RVE estimate of the homogenised stiff matrix.

    Sample ``i`` uses seed ``base_seed + i``; an all-soft torus is replaced
    by the next unused seed, at most ``MAX_REJECTIONS`` times in total.

    Parameters
    ----------
    spec : MediumSpec
    L : int
        Torus size in unit cells, at least 4.
    n_samples : int
    base_seed : int
    h_per_cell : int
        Elements per unit cell and direction.
    """
    if L < 4:
        raise ContractError("RVE needs L >= 4")
    if n_samples < 1:
        raise ContractError("need at least one sample")
    mats, seeds = [], []
    seed = base_seed
    rejected = 0
    while len(mats) < n_samples:
        soft = torus_phases(spec, seed, L, h_per_cell)
        if soft.all():
            rejected += 1
            log.warning("seed %d gives an all-soft torus; resampling", seed)
            if rejected > MAX_REJECTIONS:
                raise GeometryError(f"more than {MAX_REJECTIONS} all-soft RVE samples")
            seed += 1
            continue
        mats.append(corrector_energies(soft, spec.A1_array, h_per_cell, rtol))
        seeds.append(seed)
        seed += 1
    mats = np.array(mats)
    mean = mats.mean(axis=0)
    if n_samples > 1:
        stderr = mats.std(axis=0, ddof=1) / np.sqrt(n_samples)
    else:
        stderr = np.full((2, 2), np.nan)
    prov = {"spec_hash": spec_hash(spec), "base_seed": base_seed, "rejected": rejected, "rtol": rtol}
    return AhomEstimate(mean, stderr, L, n_samples, h_per_cell, mats, seeds, prov)


def macro_eigs(A_hom, S=(0.0, 1.0, 0.0, 1.0), N: int = 128, K: int = 20, tol: float = 1e-8) -> np.ndarray:
    """Smallest ``K`` Dirichlet eigenvalues of ``-div A_hom grad`` on the rectangle ``S``.

    Q1 elements on an ``N``-cell grid along the longer side.
    """
    A = np.asarray(A_hom, dtype=float)
    A = 0.5 * (A + A.T)
    if np.linalg.eigvalsh(A).min() <= 0:
        raise ContractError("A_hom must be positive definite")
    x0, x1, y0, y1 = S
    wx, wy = x1 - x0, y1 - y0
    nx = N if wx >= wy else max(2, int(round(N * wx / wy)))
    ny = N if wy >= wx else max(2, int(round(N * wy / wx)))
    prob = assemble_laplace(Grid(tuple(S), nx, ny), A)
    return smallest_eigenpairs(prob.K, prob.M, K, tol=tol, keep_vectors=False).eigenvalues
