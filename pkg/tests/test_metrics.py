import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import natural
from focusfuse.datagen import simulate_defocus
from focusfuse.imgcore import gaussian_blur
from focusfuse.metrics import (
    FusionReport,
    avg_gradient,
    evaluate,
    haar2,
    mean_report,
    psnr,
    psnr_fusion,
    q_g,
    q_m,
    q_s,
    spatial_frequency,
)
from oracles import ag_brute, psnr_brute, qs_brute, sf_brute

QM_PERFECT = 1.0
QM_CAMERA_HALVES = 0.958968875571315

small = arrays(np.float64, (16, 16), elements=st.floats(0, 1))


@pytest.fixture(scope="module")
def halves():
    cam = natural("camera")
    m1 = np.zeros(cam.shape, dtype=bool)
    m1[:, :64] = True
    a, b = simulate_defocus(cam, m1, ~m1)
    return cam, a, b


def random_triples(seed, correlated):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        base = rng.random((16, 16))
        if correlated:
            a = np.clip(base + 0.1 * rng.normal(size=base.shape), 0, 1)
            b = np.clip(base + 0.1 * rng.normal(size=base.shape), 0, 1)
            yield base, a, b
        else:
            yield base, rng.random((16, 16)), rng.random((16, 16))


class TestOracles:
    @pytest.mark.parametrize("correlated", [False, True])
    def test_simple_metrics(self, correlated):
        for f, a, b in random_triples(1, correlated):
            assert avg_gradient(f) == pytest.approx(ag_brute(f), abs=1e-9)
            assert spatial_frequency(f) == pytest.approx(sf_brute(f), abs=1e-9)
            assert psnr_fusion(f, [a, b]) == pytest.approx(psnr_brute(f, [a, b]), abs=1e-9)

    @pytest.mark.parametrize("correlated", [False, True])
    def test_qs(self, correlated):
        for f, a, b in random_triples(2, correlated):
            # the score is reported clipped to [0, 1]
            expected = min(1.0, max(0.0, qs_brute(f, a, b)))
            assert q_s(f, a, b) == pytest.approx(expected, abs=1e-6)


class TestSimpleMetrics:
    def test_checkerboard_sf(self):
        y, x = np.mgrid[:16, :16]
        board = ((x + y) % 2).astype(float)
        assert spatial_frequency(board) == pytest.approx(255 * math.sqrt(2), abs=1e-9)
        assert spatial_frequency(board) == pytest.approx(360.62, abs=0.01)

    def test_ramp_ag(self):
        ramp = np.tile(np.arange(10) / 255.0, (6, 1))
        assert avg_gradient(ramp) == pytest.approx(math.sqrt(0.5), abs=1e-12)

    def test_constants(self):
        c = np.full((6, 6), 0.3)
        assert avg_gradient(c) == 0.0 and spatial_frequency(c) == 0.0

    @settings(max_examples=30, deadline=None)
    @given(small, st.floats(-0.5, 0.5))
    def test_translation_invariance(self, f, c):
        assert avg_gradient(f + c) == pytest.approx(avg_gradient(f), abs=1e-9)
        assert spatial_frequency(f + c) == pytest.approx(spatial_frequency(f), abs=1e-9)

    def test_psnr_cap_and_offset(self, camera):
        assert psnr_fusion(camera, [camera]) == 100.0
        shifted = camera + 1 / 255.0
        assert psnr(shifted, camera) == pytest.approx(20 * math.log10(255), abs=1e-9)
        assert psnr(shifted, camera) == pytest.approx(48.13, abs=0.005)
        avg = psnr_fusion(shifted, [shifted, camera])
        assert avg == pytest.approx((100 + 20 * math.log10(255)) / 2, abs=1e-9)

    def test_psnr_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestQG:
    def test_perfect_transfer(self, camera):
        assert q_g(camera, camera, camera) >= 0.95

    def test_constant_fused(self, camera):
        assert q_g(np.full(camera.shape, 0.5), camera, camera) <= 0.05

    def test_symmetry_and_range(self, halves):
        cam, a, b = halves
        assert q_g(cam, a, b) == q_g(cam, b, a)
        assert 0.0 <= q_g(cam, a, b) <= 1.0

    def test_blur_lowers_score(self, halves):
        cam, a, b = halves
        assert q_g(gaussian_blur(cam, 2), a, b) < q_g(cam, a, b)


class TestQS:
    def test_perfect(self, camera):
        assert q_s(camera, camera, camera) == pytest.approx(1.0, abs=1e-6)

    def test_symmetry(self, halves):
        cam, a, b = halves
        assert q_s(cam, a, b) == pytest.approx(q_s(cam, b, a), abs=1e-12)

    def test_flat_windows(self):
        c = np.full((12, 12), 0.4)
        assert q_s(c, c, c) == pytest.approx(1.0, abs=1e-12)


class TestQM:
    def test_haar_is_orthonormal(self, rng):
        img = rng.random((8, 6))
        approx, details = haar2(img)
        energy = np.sum(approx**2) + sum(np.sum(d**2) for d in details)
        assert energy == pytest.approx(np.sum(img**2), rel=1e-12)

    def test_golden_perfect(self, camera):
        assert q_m(camera, camera, camera) == pytest.approx(QM_PERFECT, abs=1e-12)

    def test_golden_regression(self, halves):
        assert q_m(*halves) == pytest.approx(QM_CAMERA_HALVES, abs=1e-9)

    def test_symmetry(self, halves):
        cam, a, b = halves
        assert q_m(cam, a, b) == pytest.approx(q_m(cam, b, a), abs=1e-12)

    def test_blur_monotone(self, halves):
        cam, a, b = halves
        scores = [q_m(gaussian_blur(cam, s) if s else cam, a, b) for s in (0, 0.5, 1.0, 2.0)]
        assert all(x >= y for x, y in zip(scores, scores[1:])), scores

    def test_odd_dimensions_padded(self, rng):
        f = rng.random((13, 18))
        assert 0.0 <= q_m(f, f, f) <= 1.0


class TestReport:
    def test_evaluate_fields(self, halves):
        cam, a, b = halves
        rep = evaluate(cam, a, b, ident="x")
        assert tuple(rep.row()) == FusionReport.FIELDS
        assert rep.psnr == pytest.approx(psnr_fusion(cam, [a, b]))

    def test_mean(self):
        r1 = FusionReport("a", 1, 2, 3, 4, 5, 6, 7)
        r2 = FusionReport("b", 3, 2, 1, 0, 5, 8, 9)
        m = mean_report([r1, r2])
        assert m.id == "MEAN" and (m.q_g, m.q_s, m.psnr) == (2, 2, 7)
        with pytest.raises(ValueError):
            mean_report([])
