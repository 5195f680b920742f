import numpy as np
import pytest

from egoflow import (CameraIntrinsics, InvalidInputError, SceneConfig,
                     StereoRig, Twist, generate, perturb, predict_flow_field,
                     score_inliers)


def _rig(w=64, h=64):
    intr = CameraIntrinsics(f=60.0, cx=(w - 1) / 2, cy=(h - 1) / 2,
                            width=w, height=h)
    return StereoRig(intr, 0.5)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        SceneConfig(rig=_rig(), depth_range=(5.0, 2.0))
    with pytest.raises(InvalidInputError):
        SceneConfig(rig=_rig(), outlier_fraction=1.0)
    with pytest.raises(InvalidInputError):
        SceneConfig(rig=_rig(), noise_sigma_flow=-1.0)


def test_clean_scene_satisfies_forward_model():
    sc = generate(SceneConfig(rig=_rig(), seed=0, object_count=2))
    model = predict_flow_field(sc.rig, sc.twist_gt, sc.disparity_gt)
    bg = ~sc.object_mask
    np.testing.assert_array_equal(sc.flow_gt.u[bg], model.u[bg])
    np.testing.assert_array_equal(sc.flow_gt.v[bg], model.v[bg])


def test_clean_scene_all_inliers():
    sc = generate(SceneConfig(rig=_rig(), seed=1))
    mask = score_inliers(sc.rig, sc.twist_gt, sc.flow_gt, sc.disparity_gt, 1.0)
    assert mask.inlier.all()


def test_zero_twist_zero_flow():
    sc = generate(SceneConfig(rig=_rig(), seed=2, twist=Twist.zero(),
                              object_count=1))
    bg = ~sc.object_mask
    assert np.all(sc.flow_gt.u[bg] == 0) and np.all(sc.flow_gt.v[bg] == 0)
    assert sc.object_mask.any()


def test_depth_range_respected():
    rig = _rig()
    sc = generate(SceneConfig(rig=rig, seed=3, depth_range=(5.0, 12.0)))
    z = rig.intrinsics.f * rig.baseline / sc.disparity_gt.d
    assert z.min() >= 5.0 - 1e-9 and z.max() <= 12.0 + 1e-9


def test_determinism():
    cfg = SceneConfig(rig=_rig(), seed=7, object_count=2,
                      noise_sigma_flow=0.1, outlier_fraction=0.1,
                      with_images=True)
    a = generate(cfg)
    b = generate(cfg)
    np.testing.assert_array_equal(a.flow_gt.u, b.flow_gt.u)
    np.testing.assert_array_equal(a.disparity_gt.d, b.disparity_gt.d)
    np.testing.assert_array_equal(a.object_mask, b.object_mask)
    np.testing.assert_array_equal(a.outlier_mask, b.outlier_mask)
    np.testing.assert_array_equal(a.images.left_t0.intensity,
                                  b.images.left_t0.intensity)
    assert np.array_equal(a.twist_gt.as_vector(), b.twist_gt.as_vector())


def test_object_flow_separation():
    for seed in range(5):
        sc = generate(SceneConfig(rig=_rig(), seed=seed, object_count=3))
        model = predict_flow_field(sc.rig, sc.twist_gt, sc.disparity_gt)
        diff = np.hypot(sc.flow_gt.u - model.u, sc.flow_gt.v - model.v)
        assert diff[sc.object_mask].min() >= 3.0


def test_perturb_identity():
    sc = generate(SceneConfig(rig=_rig(), seed=4))
    out = perturb(sc, 0.0, 0.0, 0.0, seed=9)
    np.testing.assert_array_equal(out.flow_gt.u, sc.flow_gt.u)
    np.testing.assert_array_equal(out.disparity_gt.d, sc.disparity_gt.d)
    assert not out.outlier_mask.any()


def test_perturb_outlier_count():
    sc = generate(SceneConfig(rig=_rig(), seed=5))
    frac = 0.4
    out = perturb(sc, 0.0, 0.0, frac, seed=10)
    assert out.outlier_mask.sum() == int(frac * 64 * 64)


def test_perturb_noise_statistics():
    rig = _rig(w=128, h=128)
    sc = generate(SceneConfig(rig=rig, seed=6))
    sigma = 0.1
    out = perturb(sc, sigma, 0.0, 0.0, seed=11)
    resid = out.flow_gt.u - sc.flow_gt.u
    assert resid.size >= 10**4
    assert abs(resid.std() - sigma) < 0.1 * sigma


def test_perturb_invalidates_nonpositive_disparity():
    sc = generate(SceneConfig(rig=_rig(), seed=8, depth_range=(50.0, 80.0)))
    out = perturb(sc, 0.0, 2.0, 0.0, seed=12)
    assert not out.disparity_gt.valid.all()
    assert np.all(out.disparity_gt.d[out.disparity_gt.valid] > 0)


def test_clean_mask_excludes_objects_and_outliers():
    sc = generate(SceneConfig(rig=_rig(), seed=9, object_count=2,
                              outlier_fraction=0.1))
    clean = sc.clean_mask
    assert not (clean & sc.object_mask).any()
    assert not (clean & sc.outlier_mask).any()


def test_images_consistent_with_warps():
    from egoflow import WarpField, warp_image
    sc = generate(SceneConfig(rig=_rig(), seed=10, with_images=True))
    warped, oob = warp_image(sc.images.left_t1,
                             WarpField.from_flow(sc.flow_gt))
    err = np.abs(warped.intensity - sc.images.left_t0.intensity)[~oob]
    assert np.mean(err) < 0.01
    warped_s, oob_s = warp_image(sc.images.right_t0,
                                 WarpField.from_disparity(sc.disparity_gt))
    err_s = np.abs(warped_s.intensity - sc.images.left_t0.intensity)[~oob_s]
    assert np.mean(err_s) < 0.01
