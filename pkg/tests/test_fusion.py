import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densify.core import DepthMap, PipelineConfig
from densify.errors import DimensionMismatch, EmptyInput
from densify.fusion import fill, fill_morphological, fill_nn_jbf, median_fuse


def test_median_rules():
    m = lambda v: DepthMap(np.array([[v]], dtype=float))
    assert median_fuse([m(4000), m(9000), m(5000)]).values[0, 0] == 5000
    assert median_fuse([m(0), m(5000)]).values[0, 0] == 5000
    assert median_fuse([m(0), m(0)]).values[0, 0] == 0
    assert median_fuse([m(4000), m(6000)]).values[0, 0] == 4000       # lower middle
    single = DepthMap(np.random.default_rng(0).uniform(0, 10, (3, 3)))
    assert median_fuse([single]) == single
    with pytest.raises(DimensionMismatch):
        median_fuse([DepthMap.empty(2, 2), DepthMap.empty(2, 3)])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6))
def test_median_is_an_input_value_within_bounds(n, seed):
    rng = np.random.default_rng(seed)
    maps = [DepthMap(np.where(rng.random((5, 5)) < 0.4, 0, rng.integers(1, 9, (5, 5)) * 1000.0))
            for _ in range(n)]
    fused = median_fuse(maps).values
    stack = np.stack([m.values for m in maps])
    for v in range(5):
        for u in range(5):
            vals = sorted(x for x in stack[:, v, u] if x > 0)
            if not vals:
                assert fused[v, u] == 0
            else:
                assert fused[v, u] == vals[(len(vals) - 1) // 2]


def test_jbf_uniform_and_symmetric():
    d = np.zeros((9, 9))
    d[::4, ::4] = 7000
    out = fill_nn_jbf(DepthMap(d), np.zeros((9, 9, 3)), neighbors=4)
    np.testing.assert_allclose(out.values, 7000)
    d = np.zeros((1, 5))
    d[0, 0], d[0, 4] = 4000, 6000
    out = fill_nn_jbf(DepthMap(d), np.zeros((1, 5, 1)), neighbors=2)
    assert out.values[0, 2] == pytest.approx(5000)
    assert out.values[0, 0] == 4000 and out.values[0, 4] == 6000


def jbf_oracle(d, guide, k, ss, sc):
    """All-pairs weighted mean; None for holes whose k-th neighbour distance is tied."""
    H, W = d.shape
    sv, su = np.nonzero(d > 0)
    out = {}
    for v in range(H):
        for u in range(W):
            if d[v, u] > 0:
                continue
            d2 = (su - u) ** 2 + (sv - v) ** 2
            order = np.argsort(d2, kind="stable")
            if len(order) > k and d2[order[k - 1]] == d2[order[k]]:
                continue
            num = den = 0.0
            for i in order[:k]:
                c2 = float(((guide[v, u] - guide[sv[i], su[i]]) ** 2).sum())
                w = np.exp(-d2[i] / (2 * ss * ss)) * np.exp(-c2 / (2 * sc * sc))
                num += w * d[sv[i], su[i]]
                den += w
            out[(v, u)] = num / den
    return out


@pytest.mark.parametrize("seed", range(5))
def test_jbf_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    d = np.where(rng.random((8, 8)) < 0.25, rng.uniform(2000, 20000, (8, 8)), 0)
    d[0, 0] = 5000
    guide = rng.uniform(0, 100, (8, 8, 3))
    out = fill_nn_jbf(DepthMap(d), guide, neighbors=4, sigma_spatial=2.0, sigma_color=30.0).values
    oracle = jbf_oracle(d, guide, 4, 2.0, 30.0)
    assert len(oracle) > 10
    for (v, u), z in oracle.items():
        assert out[v, u] == pytest.approx(z, rel=1e-9)


def test_jbf_far_support_does_not_underflow():
    d = np.zeros((1, 400))
    d[0, 0] = 3000
    out = fill_nn_jbf(DepthMap(d), np.zeros((1, 400, 3)), neighbors=9, sigma_spatial=1.0)
    np.testing.assert_allclose(out.values, 3000)


def test_fill_errors():
    with pytest.raises(EmptyInput):
        fill_nn_jbf(DepthMap.empty(3, 3), np.zeros((3, 3, 3)))
    with pytest.raises(EmptyInput):
        fill_morphological(DepthMap.empty(3, 3))
    with pytest.raises(DimensionMismatch):
        fill_nn_jbf(DepthMap(np.ones((3, 3))), np.zeros((2, 3, 3)))


def test_morph_single_and_dense():
    d = np.zeros((6, 7))
    d[2, 3] = 1234
    np.testing.assert_array_equal(fill_morphological(DepthMap(d)).values, 1234)
    dense = DepthMap(np.arange(1, 13, dtype=float).reshape(3, 4))
    assert fill_morphological(dense) == dense


def chebyshev_oracle(d):
    H, W = d.shape
    sv, su = np.nonzero(d > 0)
    out = np.empty_like(d)
    for v in range(H):
        for u in range(W):
            dist = np.maximum(np.abs(sv - v), np.abs(su - u))
            near = dist == dist.min()
            out[v, u] = d[sv[near], su[near]].min()
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_morph_matches_nearest_measurement_oracle(seed):
    rng = np.random.default_rng(seed)
    d = np.where(rng.random((9, 11)) < 0.08, rng.integers(1, 50, (9, 11)) * 100.0, 0)
    d[rng.integers(9), rng.integers(11)] = 2500
    np.testing.assert_array_equal(fill_morphological(DepthMap(d)).values, chebyshev_oracle(d))


def test_two_measurements_split_with_min_tie_break():
    d = np.zeros((1, 5))
    d[0, 0], d[0, 4] = 9000, 3000
    np.testing.assert_array_equal(fill_morphological(DepthMap(d)).values,
                                  [[9000, 9000, 3000, 3000, 3000]])


def test_fill_dispatch():
    d = DepthMap(np.array([[0, 5000.0]]))
    g = np.zeros((1, 2, 3))
    assert fill(d, g, PipelineConfig(fill_method="none")) == d
    assert fill(d, g, PipelineConfig(fill_method="morph")).count == 2
    assert fill(d, g, PipelineConfig()).count == 2
