import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from dirverb.interp import idw_weights, interpolate_map, weights_from_distances
from dirverb.spherical import default_grid
from dirverb.synth import synthetic_map

coords = st.floats(-50, 50)
points = arrays(float, st.tuples(st.integers(1, 12), st.just(3)), elements=coords)
targets = arrays(float, 3, elements=coords)


@given(points, targets, st.integers(1, 8))
def test_weights_form_a_partition_of_unity(pos, target, m):
    q = idw_weights(target, pos, m)
    assert abs(q.weights.sum() - 1) < 1e-12
    assert np.all(q.weights >= 0)
    assert q.M == min(m, len(pos)) or q.M == 1


@given(points, targets)
def test_closer_neighbours_weigh_more(pos, target):
    q = idw_weights(target, pos, None)
    order = np.argsort(q.distances, kind="stable")
    assert np.all(np.diff(q.weights[order]) <= 1e-15)
    # the selected neighbours are the nearest ones
    d_all = np.linalg.norm(pos - target, axis=1)
    assert q.distances.max() <= np.sort(d_all)[q.M - 1] + 1e-12


@given(points, st.data())
def test_exact_hit_returns_that_point(pos, data):
    i = data.draw(st.integers(0, len(pos) - 1))
    # the hit must be the unique nearest point, or ties resolve to the first
    q = idw_weights(pos[i], pos)
    assert q.M == 1 and q.weights[0] == 1.0
    assert np.linalg.norm(pos[q.neighbor_ids[0]] - pos[i]) < 1e-6


@given(st.floats(0.01, 100), st.integers(1, 6))
def test_equidistant_neighbours_share_equally(r, n):
    angles = 2 * np.pi * np.arange(n) / n
    pos = np.stack([r * np.cos(angles), r * np.sin(angles), np.zeros(n)], axis=1)
    q = idw_weights(np.zeros(3), pos, n)
    np.testing.assert_allclose(q.weights, 1 / n, atol=1e-12)


@given(arrays(float, st.integers(1, 10), elements=st.floats(1e-3, 1e3)))
def test_weights_are_inverse_distance(d):
    w = weights_from_distances(d)
    np.testing.assert_allclose(w * d, (w * d)[0], rtol=1e-9)


def test_ties_resolve_by_input_order():
    pos = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], [0, 0, 5.0]])
    assert idw_weights(np.zeros(3), pos, 2).neighbor_ids == [0, 1]


def test_invalid_queries():
    with pytest.raises(ValueError):
        idw_weights(np.zeros(3), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        idw_weights(np.zeros(3), np.ones((2, 3)), 0)
    with pytest.raises(ValueError):
        weights_from_distances([1.0, 0.0])


def maps_at(positions, rng):
    g = default_grid(12)
    return [synthetic_map(rng.uniform(0.5, 3, (3, 12)), g, edc0_db=rng.normal(size=12),
                          position=p) for p in positions]


@given(st.integers(0, 2**31 - 1), targets)
def test_interpolated_values_stay_within_neighbour_range(seed, target):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-10, 10, (6, 3))
    assume(np.linalg.norm(pos - target, axis=1).min() > 1e-3)
    maps = maps_at(pos, rng)
    q = idw_weights(target, pos, 4)
    m = interpolate_map(maps, q)
    stack = np.stack([maps[i].t60_s for i in q.neighbor_ids])
    assert np.all(m.t60_s >= stack.min(0) - 1e-12) and np.all(m.t60_s <= stack.max(0) + 1e-12)
    np.testing.assert_allclose(m.position, target)
    np.testing.assert_allclose(m.mean_t60_s, m.t60_s.mean(axis=1))


def test_interpolation_is_exact_at_data_points():
    rng = np.random.default_rng(0)
    pos = rng.uniform(-5, 5, (4, 3))
    maps = maps_at(pos, rng)
    assert interpolate_map(maps, idw_weights(pos[2], pos)) == maps[2]


def test_constant_field_is_reproduced():
    g = default_grid(12)
    pos = np.random.default_rng(1).uniform(-5, 5, (5, 3))
    maps = [synthetic_map(1.7, g, position=p) for p in pos]
    m = interpolate_map(maps, idw_weights([0.1, 0.2, 0.3], pos, 4))
    np.testing.assert_allclose(m.t60_s, 1.7, rtol=1e-14)


def test_flags_propagate_and_grids_must_match():
    rng = np.random.default_rng(2)
    pos = rng.uniform(-5, 5, (3, 3))
    maps = maps_at(pos, rng)
    maps[1].flags[0, 5] = 1
    m = interpolate_map(maps, idw_weights([0, 0, 0], pos, 3))
    assert m.flags[0, 5] == 1
    maps[2] = synthetic_map(1.0, default_grid(24), position=pos[2])
    with pytest.raises(ValueError):
        interpolate_map(maps, idw_weights([0, 0, 0], pos, 3))


def test_two_map_blend_by_hand():
    g = default_grid(12)
    a = synthetic_map(1.0, g, position=(0, 0, 0))
    b = synthetic_map(2.0, g, position=(1, 0, 0))
    # 1/d weights 0.25, 0.75 need d_a : d_b = 3 : 1
    q = idw_weights([0.75, 0, 0], [a.position, b.position], 2)
    assert q.neighbor_ids == [1, 0]
    np.testing.assert_allclose(q.weights, [0.75, 0.25])
    np.testing.assert_allclose(interpolate_map([a, b], q).t60_s, 1.75)


def test_worked_example_geometry_blends_four_maps():
    d = np.array([2.909, 3.926, 2.883, 3.608])
    pos = np.array([[d[0], 0, 0], [-d[1], 0, 0], [0, d[2], 0], [0, -d[3], 0]])
    far = np.array([[20.0, 20, 0], [-20, 20, 0]])
    rng = np.random.default_rng(3)
    maps = maps_at(np.vstack([pos, far]), rng)
    q = idw_weights(np.zeros(3), np.vstack([pos, far]), 4)
    assert sorted(q.neighbor_ids) == [0, 1, 2, 3]
    w = np.empty(4)
    w[q.neighbor_ids] = q.weights
    blended = interpolate_map(maps, q)
    np.testing.assert_allclose(blended.t60_s, np.tensordot(w, [m.t60_s for m in maps[:4]], 1))
    np.testing.assert_allclose(w, [0.2812, 0.2084, 0.2837, 0.2267], atol=5e-4)


def test_single_map_passes_through():
    m = maps_at([[1.0, 2.0, 3.0]], np.random.default_rng(0))
    out = interpolate_map(m, idw_weights([4.0, 5.0, 6.0], [m[0].position], 4))
    np.testing.assert_array_equal(out.t60_s, m[0].t60_s)
