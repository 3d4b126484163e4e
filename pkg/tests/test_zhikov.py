import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import bisect

from stochhom.errors import ContractError, DomainError
from stochhom.medium import MediumSpec, ShapeSpec, simple_example, varying_size_example
from stochhom.shapes import modes_square
from stochhom.zhikov import (
    ZhikovFunction,
    band_structure,
    beta_csv,
    beta_eval,
    beta_fixed,
    beta_roots,
    beta_samples,
    default_cutoff,
    limit_spectrum,
)

PI2 = np.pi**2
MU_IDENTITY = PI2 * np.array([2.0, 5.0, 5.0, 8.0, 10.0, 10.0])


@pytest.fixture(scope="module")
def simple_zf():
    spec = simple_example()
    zf = ZhikovFunction.from_spec(spec)
    return ZhikovFunction.from_spec(spec, tables=zf.tables, cutoff=default_cutoff(zf))


def test_fixed_size_point_bands(simple_zf):
    bs = band_structure(simple_zf, 25 * PI2)
    assert bs.bands[0] == pytest.approx((8 * PI2, 8 * PI2), rel=1e-14)
    assert bs.bands[1] == pytest.approx((20 * PI2, 20 * PI2), rel=1e-14)
    assert bs.poles[:2] == [True, False]


def test_varying_size_first_band(oracle):
    zf = ZhikovFunction.from_spec(varying_size_example())
    bs = band_structure(zf, 200.0)
    np.testing.assert_allclose(bs.bands[0], oracle["varying_band1"], rtol=1e-12)


def test_identical_shapes_merge():
    one = ZhikovFunction.from_spec(simple_example())
    two_spec = MediumSpec(shapes=(ShapeSpec.square(0.5), ShapeSpec.square(0.5)), probs=(0.25, 0.25))
    two = ZhikovFunction.from_spec(two_spec)
    a = band_structure(one, 400.0)
    b = band_structure(two, 400.0)
    assert a.bands == b.bands and a.poles == b.poles and a.gaps == b.gaps
    lam = np.array([-3.0, 10.0, 120.0, 300.0])
    np.testing.assert_allclose(one(lam), two(lam), rtol=1e-13)


def test_default_cutoff_simple(simple_zf):
    assert simple_zf.cutoff == pytest.approx(36 * PI2, rel=1e-12)


def test_beta_at_zero_and_small_lambda():
    zf = ZhikovFunction.from_spec(varying_size_example())
    assert zf(0.0) == 0.0
    assert abs(zf(1e-4) / 1e-4 - 1) < 1e-3


def test_truncations_agree_within_halfwidth():
    lam = 4 * PI2
    J = 40
    coarse = ZhikovFunction([modes_square(0.5, J)], [0.5], [1.0], [1.0])
    fine = ZhikovFunction([modes_square(0.5, 4 * J)], [0.5], [1.0], [1.0])
    assert abs(coarse(lam) - fine(lam)) <= coarse.halfwidth(lam) + fine.halfwidth(lam)
    assert fine.halfwidth(lam) < coarse.halfwidth(lam)


def test_fixed_path_matches_generic(simple_zf):
    for lam in (-20.0, 5.0, 70.0, 150.0, 300.0):
        assert simple_zf(lam) == pytest.approx(beta_fixed(simple_zf.tables, simple_zf.probs, 1.0, lam), rel=1e-12)


def test_beta_eval_rejects_band(simple_zf):
    with pytest.raises(DomainError):
        beta_eval(simple_zf, 8 * PI2)
    b, hw = beta_eval(simple_zf, 50.0)
    assert hw >= 0 and b > 50.0


def test_mass_contract():
    t = modes_square(0.5, 4)
    with pytest.raises(ContractError):
        ZhikovFunction([t], [5.0], [1.0], [1.0])
    with pytest.raises(ContractError):
        ZhikovFunction([t], [0.5], [1.0, 0.9], [0.7, 0.7])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.3, 0.7))
def test_monotone_between_poles(p, side):
    zf = ZhikovFunction([modes_square(side, 60)], [p], [1.0], [1.0])
    nu1 = 2 * PI2 / side**2
    lam = np.linspace(-nu1, nu1 * (1 - 1e-6), 300)
    assert np.all(np.diff(zf(lam)) > 0)


def test_first_root_against_bisection(simple_zf):
    bs = band_structure(simple_zf)
    roots, _ = beta_roots(simple_zf, MU_IDENTITY[:1], bs)
    first = [r for r in roots if r.gap == 1]
    assert len(first) == 1
    ref = bisect(lambda x: beta_fixed(simple_zf.tables, simple_zf.probs, 1.0, x) - MU_IDENTITY[0], 1e-9, 8 * PI2 * (1 - 1e-12), xtol=1e-12)
    assert first[0].lam == pytest.approx(ref, rel=1e-9)
    assert 0 < first[0].lam < 8 * PI2


def test_roots_increase_towards_gap_end(simple_zf):
    mu = PI2 * np.array(sorted(m * m + n * n for m in range(1, 8) for n in range(1, 8)))[:20]
    roots, _ = beta_roots(simple_zf, mu, band_structure(simple_zf))
    first = [r.lam for r in roots if r.gap == 1]
    assert len(first) == 20
    assert np.all(np.diff(first) >= 0)
    assert first[-1] < 8 * PI2


def test_vanishing_coupling_gives_classical_values():
    zf = ZhikovFunction([modes_square(0.5, 40)], [1e-9], [1.0], [1.0], cutoff=60.0)
    roots, _ = beta_roots(zf, MU_IDENTITY[:3], band_structure(zf, 60.0))
    first = sorted(r.lam for r in roots if r.gap == 1)
    np.testing.assert_allclose(first, MU_IDENTITY[:3], rtol=1e-6)


def test_degenerate_limit_is_mu():
    zf = ZhikovFunction([modes_square(0.5, 4)], [0.0], [1.0], [1.0])
    lim = limit_spectrum(zf, MU_IDENTITY, cutoff=60.0)
    assert not lim.bands
    np.testing.assert_allclose(lim.point_values, MU_IDENTITY[MU_IDENTITY < 60.0])


def test_simple_limit_structure(simple_zf):
    lim = limit_spectrum(simple_zf, MU_IDENTITY)
    # bands are exactly the listed levels; every point lies in a gap
    levels = {round(b[0] / PI2, 9) for b in lim.bands}
    assert levels == {8.0, 20.0, 32.0}
    assert not lim.structure.contains(lim.point_values).any()
    assert np.all(lim.point_values < simple_zf.cutoff)


def test_varying_size_roots_outside_bands():
    zf = ZhikovFunction.from_spec(varying_size_example())
    zf = ZhikovFunction(zf.tables, zf.probs, zf.nodes, zf.weights, default_cutoff(zf), zf.support)
    lim = limit_spectrum(zf, MU_IDENTITY)
    assert lim.points
    assert not lim.structure.contains(lim.point_values).any()


def test_limit_serialisation(simple_zf):
    lim = limit_spectrum(simple_zf, MU_IDENTITY)
    d = json.loads(lim.to_json())
    assert len(d["points"]) == len(lim.points)
    rows = lim.to_csv().strip().splitlines()
    assert len(rows) == 1 + len(lim.bands) + len(lim.points)


def test_beta_samples_csv(simple_zf):
    rows = beta_samples(simple_zf, band_structure(simple_zf), n=20)
    assert len(rows) == 20 * len(band_structure(simple_zf).gaps)
    assert beta_csv(rows).count("\n") == len(rows) + 1
