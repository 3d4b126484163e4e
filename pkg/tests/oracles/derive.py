"""Derive the frozen oracle values in ``values.json``.

Nothing here imports the package under test.  Closed forms are evaluated in
high precision with mpmath; the finite-difference cross-check uses a plain
five-point Laplacian built from scratch.  Run from the repository root::

    python tests/oracles/derive.py
"""

import json
from pathlib import Path

import mpmath as mp
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

mp.mp.dps = 30


def fd_square_nu1(a, h):
    """Lowest eigenvalue of the five-point Dirichlet Laplacian on a square of side ``a``."""
    n = int(round(a / h)) - 1
    T = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h**2
    I = sp.identity(n)
    L = (sp.kron(T, I) + sp.kron(I, T)).tocsc()
    return float(spla.eigsh(L, k=1, sigma=0, which="LM")[0][0])


def q1_1d(n, h, k):
    """Eigenvalue ``k`` of the 1D linear-element pencil with consistent mass, ``n`` elements."""
    th = mp.pi * k / n
    return 6 / h**2 * (1 - mp.cos(th)) / (2 + mp.cos(th))


def main():
    pi2 = mp.pi**2
    out = {}
    out["square_a05_nu1"] = float(8 * pi2)
    out["square_a05_c1"] = float((4 / pi2) ** 2)
    out["square_a05_level2"] = float(20 * pi2)
    out["square_a025_nu1"] = float(32 * pi2)
    out["fd_square_a05_h256_nu1"] = fd_square_nu1(0.5, 1 / 256)
    out["bessel_zeros"] = {
        str(m): [float(mp.besseljzero(m, k)) for k in range(1, 6)] for m in range(4)
    }
    out["disk_R025_nu1"] = float((mp.besseljzero(0, 1) / mp.mpf("0.25")) ** 2)
    out["disk_R025_area"] = float(mp.pi / 16)
    # raster square of side 0.5 with 4 elements per side, cell width 1/8
    h = mp.mpf(1) / 8
    out["q1_square_4x4_nu1_unit"] = float(2 * q1_1d(4, h, 1))
    out["unit_square_dirichlet"] = sorted(
        float(pi2 * (m * m + n * n)) for m in range(1, 8) for n in range(1, 8)
    )[:20]
    out["diag14_mu1"] = float(5 * pi2)
    out["varying_band1"] = [float(8 * pi2 / mp.mpf("0.81")), float(8 * pi2 / mp.mpf("0.49"))]
    out["simple_soft_fraction"] = 0.125
    # binomial 3-sigma interval for 64*64 cells at p=0.5, two seeds pooled
    n = 2 * 64 * 64
    out["binomial_3sigma_halfwidth"] = float(3 * mp.sqrt(0.25 / n))
    path = Path(__file__).with_name("values.json")
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(path.read_text())


if __name__ == "__main__":
    main()
