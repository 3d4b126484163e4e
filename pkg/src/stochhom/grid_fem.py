"""Q1 finite elements on uniform rectangular grids.

Nodes are numbered ``i + (nx + 1) * j`` (Dirichlet grids) or
``(i % nx) + nx * (j % ny)`` (periodic grids); element ``(i, j)`` spans
``[x0 + i hx, x0 + (i+1) hx] x [y0 + j hy, y0 + (j+1) hy]``.  Local node
``a = ax + 2 ay`` sits at corner ``(i + ax, j + ay)``.

Sparse operators are ``scipy.sparse.csr_matrix`` instances; every assembly
sums symmetric element matrices, so the results are symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import ContractError, GeometryError
from .linalg import pcg


@dataclass(frozen=True)
class Grid:
    S: tuple
    nx: int
    ny: int
    bc: str = "dirichlet"

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ContractError("grid needs at least 2 cells per direction")
        if self.bc not in ("dirichlet", "periodic"):
            raise ContractError(f"unknown boundary condition {self.bc!r}")
        ratio = self.hx / self.hy
        if not 0.25 <= ratio <= 4:
            raise ContractError("cell aspect ratio exceeds 4")

    @classmethod
    def for_eps(cls, S, eps: float, cells_per_eps: int = 8, bc: str = "dirichlet") -> "Grid":
        """Grid aligned with the eps-lattice, ``cells_per_eps`` elements per lattice cell."""
        x0, x1, y0, y1 = S
        nx = int(round((x1 - x0) / eps * cells_per_eps))
        ny = int(round((y1 - y0) / eps * cells_per_eps))
        return cls(tuple(S), nx, ny, bc)

    @property
    def hx(self) -> float:
        return (self.S[1] - self.S[0]) / self.nx

    @property
    def hy(self) -> float:
        return (self.S[3] - self.S[2]) / self.ny

    @property
    def n_nodes(self) -> int:
        if self.bc == "periodic":
            return self.nx * self.ny
        return (self.nx + 1) * (self.ny + 1)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of all nodes in global numbering (periodic: one per class)."""
        nxn = self.nx if self.bc == "periodic" else self.nx + 1
        nyn = self.ny if self.bc == "periodic" else self.ny + 1
        i, j = np.meshgrid(np.arange(nxn), np.arange(nyn), indexing="xy")
        x = self.S[0] + i.ravel() * self.hx
        y = self.S[2] + j.ravel() * self.hy
        return x, y

    def barycentres(self) -> tuple[np.ndarray, np.ndarray]:
        """Element barycentres as ``(nx, ny)`` arrays."""
        xc = self.S[0] + (np.arange(self.nx) + 0.5) * self.hx
        yc = self.S[2] + (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(xc, yc, indexing="ij")

    def element_nodes(self) -> np.ndarray:
        """``(nx * ny, 4)`` global node ids; elements ordered ``i + nx * j`` (i.e. ``ravel(order='F')``)."""
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        i = i.ravel(order="F")
        j = j.ravel(order="F")
        out = np.empty((i.size, 4), dtype=np.int64)
        for a, (ax, ay) in enumerate(((0, 0), (1, 0), (0, 1), (1, 1))):
            if self.bc == "periodic":
                out[:, a] = (i + ax) % self.nx + self.nx * ((j + ay) % self.ny)
            else:
                out[:, a] = (i + ax) + (self.nx + 1) * (j + ay)
        return out

    def interior_nodes(self) -> np.ndarray:
        if self.bc == "periodic":
            return np.arange(self.n_nodes)
        i, j = np.meshgrid(np.arange(1, self.nx), np.arange(1, self.ny), indexing="xy")
        return (i + (self.nx + 1) * j).ravel()


def _reference_matrices(hx: float, hy: float):
    """Element matrices: ``Kxx, Kyy, Dxy`` (``Dxy[a, b] = int dx(phi_a) dy(phi_b)``) and mass."""
    k1x = np.array([[1.0, -1.0], [-1.0, 1.0]]) / hx
    k1y = np.array([[1.0, -1.0], [-1.0, 1.0]]) / hy
    m1x = hx / 6 * np.array([[2.0, 1.0], [1.0, 2.0]])
    m1y = hy / 6 * np.array([[2.0, 1.0], [1.0, 2.0]])
    c = np.array([[-0.5, -0.5], [0.5, 0.5]])  # int phi_a' phi_b, scale-free
    Kxx = np.kron(m1y, k1x)
    Kyy = np.kron(k1y, m1x)
    Dxy = np.kron(c.T, c)
    M = np.kron(m1y, m1x)
    return Kxx, Kyy, Dxy, M


def _element_stiffness(A, hx, hy) -> np.ndarray:
    Kxx, Kyy, Dxy, _ = _reference_matrices(hx, hy)
    A = np.asarray(A, dtype=float)
    return A[0, 0] * Kxx + A[1, 1] * Kyy + A[0, 1] * Dxy + A[1, 0] * Dxy.T


def _assemble(grid: Grid, elem_mats: np.ndarray, elements: np.ndarray) -> sp.csr_matrix:
    """Sum element matrices ``elem_mats[e]`` (shape ``(ne, 4, 4)``) over ``elements``."""
    nodes = grid.element_nodes()[elements]
    rows = np.repeat(nodes, 4, axis=1).ravel()
    cols = np.tile(nodes, (1, 4)).ravel()
    n = grid.n_nodes
    return sp.coo_matrix((elem_mats.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_full(grid: Grid, coeffs: np.ndarray, elements: np.ndarray | None = None):
    """Stiffness and mass on all nodes for per-element 2x2 coefficients.

    ``coeffs`` has shape ``(ne, 2, 2)`` matching ``elements`` (default: all
    elements in ``i + nx * j`` order).
    """
    if elements is None:
        elements = np.arange(grid.nx * grid.ny)
    Kxx, Kyy, Dxy, M = _reference_matrices(grid.hx, grid.hy)
    c = np.asarray(coeffs, dtype=float)
    Ke = (
        c[:, 0, 0, None, None] * Kxx
        + c[:, 1, 1, None, None] * Kyy
        + c[:, 0, 1, None, None] * Dxy
        + c[:, 1, 0, None, None] * Dxy.T
    )
    Me = np.broadcast_to(M, (len(elements), 4, 4))
    return _assemble(grid, Ke, elements), _assemble(grid, np.ascontiguousarray(Me), elements)


@dataclass(frozen=True)
class DiscreteProblem:
    """Stiffness ``K`` and mass ``M`` restricted to the free nodes ``dofs``."""

    K: sp.csr_matrix = field(repr=False)
    M: sp.csr_matrix = field(repr=False)
    dofs: np.ndarray = field(repr=False)
    grid: Grid

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def expand(self, u: np.ndarray) -> np.ndarray:
        """Nodal vector on the whole grid (zeros on eliminated nodes)."""
        full = np.zeros(self.grid.n_nodes)
        full[self.dofs] = u
        return full

    def restrict(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[self.dofs]

    def dump(self, prefix) -> list[str]:
        """Write ``K`` and ``M`` in Matrix Market coordinate format."""
        paths = [f"{prefix}_K.mtx", f"{prefix}_M.mtx"]
        scipy.io.mmwrite(paths[0], self.K, symmetry="symmetric")
        scipy.io.mmwrite(paths[1], self.M, symmetry="symmetric")
        return paths


def _restrict(K, M, dofs, grid) -> DiscreteProblem:
    K = K[dofs][:, dofs].tocsr()
    M = M[dofs][:, dofs].tocsr()
    K.eliminate_zeros()
    return DiscreteProblem(K, M, np.asarray(dofs), grid)


def eps_coefficients(phases: np.ndarray, A1, eps: float) -> np.ndarray:
    """Per-element coefficient ``A1`` (stiff) or ``eps^2 I`` (soft); input ``(nx, ny)`` labels."""
    soft = np.asarray(phases, dtype=bool).ravel(order="F")
    coeffs = np.empty((soft.size, 2, 2))
    coeffs[:] = np.asarray(A1, dtype=float)
    coeffs[soft] = eps**2 * np.eye(2)
    return coeffs


def assemble_eps_problem(grid: Grid, phases: np.ndarray, A1, eps: float) -> DiscreteProblem:
    """High-contrast problem ``-div A^eps grad u`` with Dirichlet conditions on the boundary of ``S``."""
    phases = np.asarray(phases, dtype=bool)
    if phases.shape != (grid.nx, grid.ny):
        raise GeometryError(f"phase labels {phases.shape} do not match grid {(grid.nx, grid.ny)}")
    K, M = assemble_full(grid, eps_coefficients(phases, A1, eps))
    return _restrict(K, M, grid.interior_nodes(), grid)


def assemble_laplace(grid: Grid, A=None) -> DiscreteProblem:
    """Constant-coefficient Dirichlet problem on ``S`` (``A`` defaults to the identity)."""
    A = np.eye(2) if A is None else np.asarray(A, dtype=float)
    coeffs = np.broadcast_to(A, (grid.nx * grid.ny, 2, 2))
    K, M = assemble_full(grid, coeffs)
    return _restrict(K, M, grid.interior_nodes(), grid)


def assemble_subdomain_laplace(grid: Grid, mask: np.ndarray) -> DiscreteProblem:
    """Dirichlet Laplacian on the open set covered by the masked elements.

    Free nodes are those whose four neighbouring elements all lie in the
    mask, so disjoint components decouple exactly.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (grid.nx, grid.ny):
        raise GeometryError("mask does not match grid")
    if not mask.any():
        raise GeometryError("empty mask")
    elements = np.nonzero(mask.ravel(order="F"))[0]
    coeffs = np.broadcast_to(np.eye(2), (elements.size, 2, 2))
    K, M = assemble_full(grid, coeffs, elements)
    # count masked elements around every node
    touch = np.bincount(grid.element_nodes()[elements].ravel(), minlength=grid.n_nodes)
    dofs = np.intersect1d(np.nonzero(touch == 4)[0], grid.interior_nodes())
    if dofs.size == 0:
        raise GeometryError("mask has no interior nodes")
    return _restrict(K, M, dofs, grid)


def mask_components(grid: Grid, problem: DiscreteProblem) -> list[np.ndarray]:
    """Split the dofs of a subdomain problem into connected components (local indices)."""
    n, labels = connected_components(problem.K, directed=False)
    return [np.nonzero(labels == c)[0] for c in range(n)]


def assemble_corrector(cells: np.ndarray, A1, xi, h_per_cell: int = 8):
    """Periodic corrector problem on an ``L x L`` torus of unit cells.

    Parameters
    ----------
    cells : (L*h, L*h) bool array
        Soft labels of the torus elements (already rasterised).
    A1 : 2x2 array
    xi : length-2 vector

    Returns
    -------
    K : csr_matrix
        Stiffness over stiff elements only, on the nodes touched by them.
    b : ndarray
        ``-int_stiff A1 xi . grad(phi_i)``; orthogonal to constants.
    info : dict
        ``nodes`` (global ids kept), ``stiff_area`` and ``area``.
    """
    soft = np.asarray(cells, dtype=bool)
    n = soft.shape[0]
    if soft.shape[0] != soft.shape[1]:
        raise GeometryError("corrector torus must be square")
    L = n / h_per_cell
    if L < 2:
        raise ContractError("corrector needs L >= 2")
    grid = Grid((0.0, L, 0.0, L), n, n, "periodic")
    stiff = np.nonzero(~soft.ravel(order="F"))[0]
    if stiff.size == 0:
        raise GeometryError("fully soft RVE has no stiff phase")
    A1 = np.asarray(A1, dtype=float)
    xi = np.asarray(xi, dtype=float)
    Ke = _element_stiffness(A1, grid.hx, grid.hy)
    K = _assemble(grid, np.broadcast_to(Ke, (stiff.size, 4, 4)).copy(), stiff)
    # load: -int A1 xi . grad phi_a over an element, gradients integrate to edge averages
    flux = A1 @ xi
    gx = np.array([-1, 1, -1, 1]) * grid.hy / 2
    gy = np.array([-1, -1, 1, 1]) * grid.hx / 2
    be = -(flux[0] * gx + flux[1] * gy)
    nodes = grid.element_nodes()[stiff]
    b = np.bincount(nodes.ravel(), weights=np.tile(be, stiff.size), minlength=grid.n_nodes)
    keep = np.unique(nodes)
    K = K[keep][:, keep].tocsr()
    info = {
        "nodes": keep,
        "stiff_area": stiff.size * grid.hx * grid.hy,
        "area": L * L,
        "grid": grid,
    }
    return K, b[keep], info


def solve_corrector(K, b):
    """Solve the singular periodic system ``K p = b`` (one or several right-hand sides).

    One node per connected component of the stiff phase is pinned to zero
    and the rest is factorised by sparse LU; the solution is then shifted to
    zero mean on every component.  ``b`` must be orthogonal to the kernel.
    """
    K = sp.csr_matrix(K)
    b = np.asarray(b, dtype=float)
    n_comp, labels = connected_components(K, directed=False)
    pinned = np.unique(labels, return_index=True)[1]
    free = np.setdiff1d(np.arange(K.shape[0]), pinned)
    lu = spla.splu(sp.csc_matrix(K[free][:, free]))
    p = np.zeros(b.shape)
    p[free] = lu.solve(b[free])
    for c in range(n_comp):
        sel = labels == c
        p[sel] -= p[sel].mean(axis=0)
    return p


def solve_resolvent(problem: DiscreteProblem, lam: float, f: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Solve ``(K - lam M) u = M f`` for ``lam < 0`` by preconditioned CG."""
    if not lam < 0:
        raise ContractError("resolvent requires lambda < 0")
    f = np.asarray(f, dtype=float)
    rhs = problem.M @ f
    if not np.any(rhs):
        return np.zeros_like(rhs)
    A = (problem.K - lam * problem.M).tocsr()
    return pcg(A, rhs, rtol=rtol)
