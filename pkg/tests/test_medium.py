import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochhom.errors import ConfigError, GeometryError
from stochhom.grid_fem import Grid
from stochhom.medium import (
    EMPTY,
    MediumSpec,
    ShapeSpec,
    SizeDist,
    Window,
    inclusions_in_domain,
    rasterise,
    sample_realisation,
    simple_example,
    varying_size_example,
    volume_fraction_check,
)


def full_spec(**kw):
    return MediumSpec(shapes=(ShapeSpec.square(0.5),), probs=(1.0,), **kw)


# -- sampling -------------------------------------------------------------------------


def test_p0_one_gives_no_inclusions():
    spec = simple_example(p=0.0)
    real = sample_realisation(spec, 3, Window(0, 10, 0, 10))
    assert real.n_occupied == 0
    assert inclusions_in_domain(real, 1 / 8) == []


def test_periodic_medium_has_identical_marks():
    real = sample_realisation(full_spec(), 7, Window(0, 10, 0, 10))
    assert real.n_occupied == 100
    assert np.all(real.shape_idx == 0) and np.all(real.size == 1.0)


def test_empirical_frequency_within_binomial_band(oracle):
    spec = varying_size_example()
    occ = [sample_realisation(spec, s, Window(0, 64, 0, 64)).shape_idx != EMPTY for s in (0, 1)]
    freq = np.mean(occ)
    assert abs(freq - 0.5) < oracle["binomial_3sigma_halfwidth"]


def test_sizes_follow_uniform_law():
    real = sample_realisation(varying_size_example(), 2, Window(0, 64, 0, 64))
    r = real.size[real.shape_idx != EMPTY]
    assert r.min() >= 0.7 and r.max() <= 0.9
    assert abs(r.mean() - 0.8) < 0.01


def test_marks_are_window_independent():
    spec = varying_size_example()
    big = sample_realisation(spec, 5, Window(-4, 12, -4, 12))
    small = sample_realisation(spec, 5, Window(2, 6, 3, 9))
    for z in [(2, 3), (5, 8), (3, 4)]:
        a, b = big.mark(z), small.mark(z)
        assert a[0] == b[0]
        assert a[1] == b[1] or (np.isnan(a[1]) and np.isnan(b[1]))


def test_seeds_give_different_realisations():
    spec = simple_example()
    a = sample_realisation(spec, 0, Window(0, 16, 0, 16)).shape_idx
    b = sample_realisation(spec, 1, Window(0, 16, 0, 16)).shape_idx
    assert np.any(a != b)


# -- margin rule ---------------------------------------------------------------------


def test_margin_excludes_everything_at_unit_eps():
    real = sample_realisation(full_spec(), 0, Window(0, 1, 0, 1))
    assert inclusions_in_domain(real, 1.0) == []


def test_margin_keeps_interior_cells():
    eps = 1 / 8
    real = sample_realisation(full_spec(), 0, Window(0, 8, 0, 8))
    incs = inclusions_in_domain(real, eps)
    # direct enumeration: bbox of cell z is eps*(z + [0.25, 0.75]); keep if every side is > eps from the boundary
    expected = {
        (i, j)
        for i in range(8)
        for j in range(8)
        if min(eps * (i + 0.25), 1 - eps * (i + 0.75), eps * (j + 0.25), 1 - eps * (j + 0.75)) > eps
    }
    assert len(incs) == 36
    assert {inc.cell for inc in incs} == expected


def test_window_too_small_raises():
    real = sample_realisation(full_spec(), 0, Window(0, 4, 0, 4))
    with pytest.raises(GeometryError):
        inclusions_in_domain(real, 1 / 8)


# -- rasterisation ---------------------------------------------------------------------


def test_no_inclusions_all_stiff():
    spec = simple_example(p=0.0)
    grid = Grid.for_eps(spec.S, 1 / 8, 8)
    real = sample_realisation(spec, 0, Window.covering(spec.S, 1 / 8))
    assert not rasterise(real, 1 / 8, grid).any()


def test_aligned_square_area_is_exact():
    eps = 1 / 8
    spec = full_spec()
    grid = Grid.for_eps(spec.S, eps, 8)
    real = sample_realisation(spec, 0, Window.covering(spec.S, eps))
    soft = rasterise(real, eps, grid)
    n = len(inclusions_in_domain(real, eps))
    assert soft.sum() * grid.hx * grid.hy == pytest.approx(n * (0.5 * eps) ** 2, rel=1e-14)


def test_disk_raster_area_converges():
    spec = MediumSpec(shapes=(ShapeSpec.disk(0.3),), probs=(1.0,), margin=0.0)
    eps = 0.25
    real = sample_realisation(spec, 0, Window.covering(spec.S, eps))
    exact = 16 * np.pi * (0.3 * eps) ** 2
    errs = []
    for cells in (8, 16, 32, 64):
        grid = Grid.for_eps(spec.S, eps, cells)
        errs.append(abs(rasterise(real, eps, grid).sum() * grid.hx * grid.hy - exact) / exact)
    assert all(b <= 0.5 * a for a, b in zip(errs, errs[1:]))


# -- Birkhoff --------------------------------------------------------------------------


def test_volume_fraction_degenerate():
    rows = volume_fraction_check(simple_example(p=0.0), [0, 1], [1 / 8, 1 / 16])
    assert all(r["measured"] == 0 and r["expected"] == 0 for r in rows)


def test_full_occupancy_expectation():
    assert full_spec().expected_soft_fraction() == pytest.approx(0.25)


def test_simple_expectation(oracle):
    assert simple_example().expected_soft_fraction() == pytest.approx(oracle["simple_soft_fraction"])


# -- configuration -----------------------------------------------------------------------


def test_json_round_trip():
    spec = MediumSpec(
        shapes=(ShapeSpec.square(0.4), ShapeSpec.disk(0.2)),
        probs=(0.3, 0.2),
        size_dist=SizeDist.tabulated([0.5, 0.7, 0.9], [1.0, 2.0, 1.0]),
        A1=((2.0, 0.5), (0.5, 1.0)),
        S=(0.0, 2.0, 0.0, 1.0),
    )
    again = MediumSpec.from_json(spec.to_json())
    assert again == spec
    assert again.to_json() == spec.to_json()


@pytest.mark.parametrize(
    "patch, key",
    [
        ({"probs": [0.7, 0.5]}, "probs"),
        ({"A1": [1.0, 2.0, 2.0, 1.0]}, "A1"),
        ({"colour": "red"}, "colour"),
    ],
)
def test_invalid_specs_name_the_key(patch, key):
    d = simple_example().to_dict()
    if key == "probs":
        d["shapes"] = d["shapes"] * 2
    d.update(patch)
    with pytest.raises(ConfigError) as exc:
        MediumSpec.from_json(json.dumps(d))
    assert key in str(exc.value.key)


def test_shape_touching_cell_boundary_rejected():
    with pytest.raises(ConfigError):
        MediumSpec(shapes=(ShapeSpec.raster(np.ones((8, 8), dtype=bool)),), probs=(1.0,), size_dist=SizeDist.fixed(1.0))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 1.0))
def test_scaled_square_area(side, r):
    shp = ShapeSpec.square(side)
    n = 400
    t = (np.arange(n) + 0.5) / n
    y1, y2 = np.meshgrid(t, t, indexing="ij")
    frac = shp.contains(y1, y2, r).mean()
    assert abs(frac - (side * r) ** 2) <= 4 * side * r / n + 1e-12
