import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from focusfuse.imgcore import gaussian_blur
from focusfuse.ssf import decompose
from focusfuse.texture import (
    build_pyramid,
    compose_focused_texture,
    consistency_verify,
    focus_decision,
    fuse_texture,
    grad_maps,
    local_spatial_frequency,
    salient_feature_map,
    significance_map,
    texture_weights,
)
from oracles import local_sf_brute

R = 0.8 * math.exp(-0.6)

masks = arrays(np.bool_, st.tuples(st.integers(8, 24), st.integers(8, 24)))


class TestGradMaps:
    def test_flat_texture_constant(self):
        gx, gy = grad_maps(np.zeros((5, 5)))
        np.testing.assert_allclose(gx, -0.025119, atol=1e-6)
        np.testing.assert_allclose(gy, -0.025119, atol=1e-6)

    def test_unit_step(self):
        t = np.array([[0.0, 1.0]])
        gx, _ = grad_maps(t)
        # 0.8*e^-0.6 - 2.01^0.8 = 0.439049 - 1.748061
        assert gx[0, 0] == pytest.approx(-1.309013, abs=1e-6)
        assert gx[0, 0] == pytest.approx(R - 2.01**0.8, abs=1e-12)

    def test_steep_negative_difference_uses_floor(self):
        gx, _ = grad_maps(np.array([[1.0, 0.0]]))
        assert np.isfinite(gx).all()
        assert gx[0, 0] == pytest.approx(-R - 1e-6**0.8, abs=1e-12)

    def test_axes(self):
        t = np.zeros((4, 4))
        t[:, 2:] = 0.5
        gx, gy = grad_maps(t)
        assert gx[0, 1] != gx[0, 0]
        np.testing.assert_allclose(gy, gy[0, 0])

    def test_rejects_bad_exponent(self):
        with pytest.raises(ValueError):
            grad_maps(np.zeros((3, 3)), p=0.0)


class TestPyramid:
    def test_sizes(self):
        pyr = build_pyramid(np.zeros((64, 64)), 3)
        assert [g.shape[0] for g in pyr.gaussian] == [64, 32, 16, 8]
        assert [l.shape for l in pyr.laplacian] == [(64, 64), (32, 32), (16, 16)]

    @pytest.mark.parametrize("shape", [(64, 64), (67, 81), (97, 64)])
    @pytest.mark.parametrize("levels", [2, 3, 4])
    def test_collapse(self, rng, shape, levels):
        t = rng.random(shape) - 0.5
        pyr = build_pyramid(t, levels)
        assert np.max(np.abs(pyr.collapse() - t)) <= 1e-12

    def test_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            build_pyramid(np.zeros((20, 40)), 3)


class TestLocalSF:
    def test_matches_oracle(self, rng):
        img = rng.random((11, 14))
        np.testing.assert_allclose(local_spatial_frequency(img, 5), local_sf_brute(img, 5), atol=1e-12)

    def test_checkerboard_interior(self):
        y, x = np.mgrid[:21, :21]
        board = ((x + y) % 2).astype(float)
        sf = local_spatial_frequency(board, 7)
        assert sf[10, 10] == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_constant_is_zero(self):
        assert np.all(local_spatial_frequency(np.full((9, 9), 0.4)) == 0.0)

    def test_window_validation(self):
        with pytest.raises(ValueError):
            local_spatial_frequency(np.zeros((9, 9)), 4)


class TestSaliency:
    def test_single_level_significance_is_neutral(self, rng):
        pyr = build_pyramid(rng.random((32, 32)), 1)
        np.testing.assert_array_equal(significance_map(pyr), 1.0)

    def test_significance_prefers_detailed_half(self, rng):
        t = np.zeros((64, 64))
        t[:, :32] = rng.random((64, 32)) - 0.5
        sm = significance_map(build_pyramid(t, 3))
        assert sm[:, :24].mean() > sm[:, 40:].mean()

    def test_sharp_texture_more_salient_than_blurred(self, camera):
        _, t_sharp = decompose(camera)
        _, t_blur = decompose(gaussian_blur(camera, 3))
        tm_s = salient_feature_map(t_sharp).tm
        tm_b = salient_feature_map(t_blur).tm
        assert tm_s.mean() > tm_b.mean()
        assert np.mean(tm_s > tm_b) > 0.5

    def test_nonnegative(self, rng):
        maps = salient_feature_map(rng.random((40, 48)) - 0.5)
        assert np.all(maps.sm >= 0) and np.all(maps.tm >= 0)


class TestDecision:
    def test_ties_go_to_second(self):
        a = np.array([[1.0, 2.0, 3.0]])
        b = np.array([[1.0, 1.0, 4.0]])
        np.testing.assert_array_equal(focus_decision(a, b), [[False, True, False]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            focus_decision(np.zeros((3, 3)), np.zeros((3, 4)))

    @pytest.mark.parametrize("value", [True, False])
    def test_uniform_maps_are_fixed_points(self, value):
        m = np.full((30, 30), value)
        np.testing.assert_array_equal(consistency_verify(m), m)

    def test_half_split_survives(self):
        m = np.zeros((40, 40), dtype=bool)
        m[:, :20] = True
        np.testing.assert_array_equal(consistency_verify(m), m)

    def test_isolated_speckle_removed(self):
        m = np.zeros((50, 50), dtype=bool)
        m[:, :25] = True
        m[10, 40] = True
        m[30, 5] = False
        expected = np.zeros((50, 50), dtype=bool)
        expected[:, :25] = True
        np.testing.assert_array_equal(consistency_verify(m), expected)

    @settings(max_examples=25, deadline=None)
    @given(masks)
    def test_output_is_binary(self, m):
        once = consistency_verify(m)
        assert once.shape == m.shape and once.dtype == bool

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0, 2 * math.pi), st.floats(-0.2, 0.2))
    def test_verified_half_plane_is_fixed(self, angle, offset):
        y, x = np.mgrid[:48, :48] / 47.0 - 0.5
        m = x * math.cos(angle) + y * math.sin(angle) > offset
        once = consistency_verify(m)
        np.testing.assert_array_equal(consistency_verify(once), once)

    def test_compose(self):
        t1 = np.full((2, 2), 1.0)
        t2 = np.full((2, 2), -1.0)
        omp = np.array([[True, False], [False, True]])
        np.testing.assert_array_equal(compose_focused_texture(t1, t2, omp), [[1, -1], [-1, 1]])
        np.testing.assert_array_equal(compose_focused_texture(t1, t2, np.ones((2, 2), bool)), t1)


class TestTextureFusion:
    @settings(max_examples=40, deadline=None)
    @given(
        arrays(np.float64, (6, 7), elements=st.floats(0, 1e3)),
        arrays(np.float64, (6, 7), elements=st.floats(0, 1e3)),
    )
    def test_weights_sum_to_one(self, tm4, tm3):
        w4, w3 = texture_weights(tm4, tm3)
        assert np.all(w4 + w3 == 1.0)
        assert np.all((w4 >= 0) & (w4 <= 1))

    def test_fallback_is_even_split(self):
        w4, w3 = texture_weights(np.zeros((3, 3)), np.zeros((3, 3)))
        np.testing.assert_array_equal(w4, 0.5)
        np.testing.assert_array_equal(w3, 0.5)

    def test_proportional_weights(self):
        w4, _ = texture_weights(np.array([[3.0]]), np.array([[1.0]]))
        assert w4[0, 0] == pytest.approx(0.75)

    def test_convexity(self, rng):
        t4, t3 = rng.normal(size=(2, 20, 20))
        tm4, tm3 = rng.random((2, 20, 20))
        ft = fuse_texture(t4, t3, tm4, tm3)
        assert np.all(ft >= np.minimum(t3, t4)) and np.all(ft <= np.maximum(t3, t4))

    def test_identical_inputs(self, rng):
        t = rng.normal(size=(10, 10))
        tm = rng.random((10, 10))
        np.testing.assert_array_equal(fuse_texture(t, t, tm, tm), t)

    def test_dominant_saliency_selects_source(self):
        t4, t3 = np.full((2, 2), 0.3), np.full((2, 2), -0.1)
        ft = fuse_texture(t4, t3, np.ones((2, 2)), np.zeros((2, 2)))
        np.testing.assert_array_equal(ft, t4)
