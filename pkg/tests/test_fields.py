import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvsparse.fields import (PRESETS, STRATEGIES, FieldMap, choose_references, local_maxima,
                             make_field, nearest_neighbor_map, preset_field, sample_field,
                             strategy_points)


def brute_force_maxima(v):
    h, w = v.shape
    out = []
    for i in range(h):
        for j in range(w):
            nb = [v[a, b] for a in range(max(0, i - 1), min(h, i + 2))
                  for b in range(max(0, j - 1), min(w, j + 2)) if (a, b) != (i, j)]
            if all(v[i, j] > x for x in nb):
                out.append((i, j))
    return out


def test_single_bump_argmax_and_range():
    f = make_field([((0.5, 0.5), 0.2, 1.0, 1)], 21, 21)
    assert np.unravel_index(np.argmax(f.values), f.values.shape) == (10, 10)
    assert f.values.min() == 0.0 and f.values.max() == 1.0


def interior(points, n=100):
    return [p for p in points if 0 < p[0] < n - 1 and 0 < p[1] < n - 1]


@pytest.mark.parametrize("name,count", [("single", 1), ("triple", 3)])
def test_preset_local_maxima(name, count):
    v = preset_field(name).values
    found = local_maxima(v)
    assert sorted(found) == sorted(brute_force_maxima(v))
    assert len(found) == count
    assert v.min() == 0.0 and v.max() == 1.0 and v.shape == (100, 100)


def test_double_preset_has_one_interior_max_and_min():
    v = preset_field("double").values
    assert sorted(local_maxima(v)) == sorted(brute_force_maxima(v))
    assert len(interior(local_maxima(v))) == 1
    assert len(interior(local_maxima(-v))) == 1


def test_make_field_errors():
    with pytest.raises(ValueError):
        make_field([])
    with pytest.raises(ValueError):
        make_field([((0.5, 0.5), 0.0, 1.0, 1)])
    with pytest.raises(KeyError):
        preset_field("quad")


def test_sample_at_pixel_centers_and_midpoints():
    v = np.random.default_rng(0).uniform(size=(6, 8))
    f = FieldMap(v)
    xx, yy = f.pixel_centers()
    assert np.allclose(sample_field(f, np.column_stack([xx.ravel(), yy.ravel()])), v.ravel())
    mid = sample_field(f, [((xx[2, 3] + xx[2, 4]) / 2, yy[2, 3])])
    assert mid[0] == pytest.approx((v[2, 3] + v[2, 4]) / 2)
    const = FieldMap(np.full((5, 5), 0.4))
    assert np.allclose(sample_field(const, np.random.default_rng(1).uniform(size=(20, 2))), 0.4)
    with pytest.raises(ValueError):
        sample_field(f, [(1.2, 0.5)])


def test_physical_window_affine():
    f = FieldMap(np.zeros((2, 2)), 40.0, 90.0)
    assert f.to_physical(0.0) == 40.0 and f.to_physical(1.0) == 90.0
    assert f.to_normalized(f.to_physical(0.37)) == pytest.approx(0.37)
    with pytest.raises(ValueError):
        FieldMap(np.zeros((2, 2)), 1.0, 1.0).to_normalized(1.0)


def test_unperturbed_grid():
    pts = strategy_points("grid", 25, bound=0.0)
    assert sorted(set(np.round(pts[:, 0], 12))) == [0.1, 0.3, 0.5, 0.7, 0.9]
    assert len(pts) == 25 and len({tuple(p) for p in pts}) == 25


def test_grid_with_remainder():
    rng = np.random.default_rng(2)
    pts = strategy_points("grid", 30, rng=rng)
    assert pts.shape == (30, 2)
    base = np.array([(x, y) for y in (0.1, 0.3, 0.5, 0.7, 0.9) for x in (0.1, 0.3, 0.5, 0.7, 0.9)])
    assert np.all(np.abs(pts[:25] - base) <= 0.3 + 1e-12)


@given(st.sampled_from(STRATEGIES), st.integers(1, 120), st.integers(0, 2**32 - 1),
       st.sampled_from(["uniform", "normal"]))
def test_strategy_points_in_extent_and_reproducible(kind, n, seed, pert):
    a = strategy_points(kind, n, rng=np.random.default_rng(seed), perturbation=pert)
    b = strategy_points(kind, n, rng=np.random.default_rng(seed), perturbation=pert)
    assert a.shape == (n, 2) and np.all((a >= 0) & (a <= 1))
    assert np.array_equal(a, b)


def test_strategy_errors():
    with pytest.raises(ValueError):
        strategy_points("zigzag", 5)
    with pytest.raises(ValueError):
        strategy_points("grid", 0)
    with pytest.raises(ValueError):
        strategy_points("grid", 9, perturbation="cauchy")


def test_references_span_samples():
    f = preset_field("triple")
    sv = np.random.default_rng(3).uniform(0.2, 0.8, 25)
    refs = choose_references(sv, f, 10)
    assert refs.count == 10
    assert np.all(np.diff(refs.nominal) >= 0)
    assert refs.nominal.min() >= sv.min() and refs.nominal.max() <= sv.max()
    two = choose_references(sv, f, 2)
    assert two.nominal[0] == pytest.approx(sv.min(), abs=2e-3)
    assert two.nominal[1] == pytest.approx(sv.max(), abs=2e-3)
    assert np.allclose(sample_field(f, refs.coords), refs.nominal)
    with pytest.raises(ValueError):
        choose_references(np.full(5, 0.5), f)


def test_nearest_neighbor_map():
    m = nearest_neighbor_map([(0.25, 0.5), (0.75, 0.5)], [1.0, 2.0], 4, 4)
    assert np.array_equal(m[:, :2], np.ones((4, 2))) and np.array_equal(m[:, 2:], np.full((4, 2), 2.0))


def test_presets_declared():
    assert set(PRESETS) == {"single", "double", "triple"}
