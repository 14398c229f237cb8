import numpy as np
import pytest
from sklearn.base import clone

from darktrack._validation import DarkPatchError
from darktrack.enhance import (LowLightEnhancer, box_slices, build_mask, enhance_patch,
                               global_adaptation, illumination_change,
                               illumination_change_closed_form, log_average_luminance,
                               pretreat, world_illumination)
from darktrack.imgproc import BBox


def test_world_illumination_weights():
    px = np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]])
    np.testing.assert_allclose(world_illumination(px)[0], [0.299, 0.587, 0.114])


def test_world_illumination_rejects_bad_alpha():
    with pytest.raises(ValueError, match="sum to 1"):
        world_illumination(np.zeros((2, 2, 3)), (0.5, 0.5, 0.5))
    with pytest.raises(ValueError, match="non-negative"):
        world_illumination(np.zeros((2, 2, 3)), (1.5, -0.5, 0.0))


def test_log_average_of_constant():
    lw = np.full((4, 4), 0.2)
    assert log_average_luminance(lw, 1e-4) == pytest.approx(0.2 + 1e-4)


def test_global_adaptation_hand_example():
    lw = np.array([[0.0, 0.5], [1.0, 0.25]])
    la = np.exp(np.mean(np.log(1e-4 + lw)))
    expected = np.log(lw / la + 1) / np.log(1.0 / la + 1)
    np.testing.assert_allclose(global_adaptation(lw), expected, rtol=1e-14)


def test_enhancement_brightens_dark_pixels(rng):
    patch = 0.05 * rng.random((16, 16, 3))
    out = enhance_patch(patch)
    assert out.mean() > 3 * patch.mean()
    assert out.min() >= 0 and out.max() <= 1


def test_enhancement_keeps_black_black():
    patch = np.zeros((4, 4, 3))
    patch[0, 0] = 0.3
    out = enhance_patch(patch)
    assert np.all(out[1:] == 0)


def test_uniformly_dark_patch_raises():
    with pytest.raises(DarkPatchError, match="uniformly dark"):
        enhance_patch(np.zeros((8, 8, 3)))


def test_closed_form_matches_direct(rng):
    patch = rng.random((10, 12, 3)) ** 3
    np.testing.assert_allclose(illumination_change(patch),
                               illumination_change_closed_form(patch), atol=1e-12)


def test_pretreat_matches_separate_calls(rng):
    patch = rng.random((10, 12, 3)) * 0.2
    enhanced, theta = pretreat(patch)
    np.testing.assert_allclose(enhanced, enhance_patch(patch), atol=1e-15)
    np.testing.assert_allclose(theta, illumination_change(patch), atol=1e-15)


def test_float32_is_preserved(rng):
    patch = rng.random((8, 8, 3)).astype(np.float32)
    enhanced, theta = pretreat(patch)
    assert enhanced.dtype == np.float32 and theta.dtype == np.float32


def test_box_slices_rounding_and_clipping():
    rows, cols = box_slices(BBox(5.0, 5.0, 4.0, 2.0), (10, 10))
    assert (rows, cols) == (slice(4, 6), slice(3, 7))
    rows, cols = box_slices(BBox(0.0, 0.0, 6.0, 6.0), (10, 10))
    assert (rows, cols) == (slice(0, 3), slice(0, 3))


def test_box_outside_patch():
    with pytest.raises(ValueError, match="does not overlap"):
        box_slices(BBox(50.0, 50.0, 4.0, 4.0), (10, 10))


def test_mask_constant_theta_fills_box():
    theta = np.full((20, 20), 0.3)
    mask, stats = build_mask(theta, BBox(10, 10, 8, 6), return_stats=True)
    assert stats.sigma == pytest.approx(0.0, abs=1e-15)
    assert mask.sum() == 48
    assert mask[7:13, 6:14].all()


def test_mask_zero_outside_box(rng):
    theta = rng.standard_normal((30, 40))
    box = BBox(20, 15, 10, 8)
    mask = build_mask(theta, box)
    rows, cols = box_slices(box, theta.shape)
    outside = np.ones_like(mask)
    outside[rows, cols] = False
    assert not mask[outside].any()


def test_mask_drops_outliers(rng):
    theta = 0.01 * rng.standard_normal((40, 40))
    theta[20, 20] = 5.0
    theta[18, 22] = -5.0
    mask = build_mask(theta, BBox(20, 20, 30, 30))
    assert not mask[20, 20] and not mask[18, 22]
    rows, cols = box_slices(BBox(20, 20, 30, 30), theta.shape)
    assert mask[rows, cols].sum() == 30 * 30 - 2


def test_estimator_matches_function(rng):
    patch = rng.random((12, 12, 3)) * 0.1
    est = LowLightEnhancer().fit(patch)
    np.testing.assert_allclose(est.transform(patch), enhance_patch(patch), atol=1e-15)
    np.testing.assert_allclose(est.illumination_change(patch), illumination_change(patch),
                               atol=1e-15)
    assert clone(est).get_params() == est.get_params()


def test_estimator_dark_fit_raises():
    with pytest.raises(DarkPatchError):
        LowLightEnhancer().fit(np.zeros((4, 4, 3)))
