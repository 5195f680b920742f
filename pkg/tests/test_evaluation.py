import math

import numpy as np
import pytest

from egoflow import (DegenerateScaleError, FlowField, InsufficientDataError,
                     InvalidInputError, SE3Pose, Trajectory, Twist,
                     depth_errors, flow_errors, integrate_trajectory,
                     kitti_odometry_errors, scale_align, twist_exp)


def _straight_line(n, step=1.0):
    return integrate_trajectory([Twist([0, 0, step], [0, 0, 0])] * n)


def test_integrate_zero_twists():
    traj = integrate_trajectory([Twist.zero()] * 5)
    assert len(traj) == 6
    for p in traj.poses:
        np.testing.assert_array_equal(p.rotation, np.eye(3))
        np.testing.assert_array_equal(p.translation, np.zeros(3))


def test_integrate_straight_line():
    traj = _straight_line(10)
    for k, p in enumerate(traj.poses):
        np.testing.assert_allclose(p.translation, [0, 0, k], atol=1e-12)


def test_integrate_circular_arc():
    # Constant planar twist: positions lie on a circle of radius |v|/|w|.
    w = 0.1
    traj = integrate_trajectory([Twist([1, 0, 0], [0, 0, w])] * 40)
    center = np.array([0.0, 1.0 / w, 0.0])
    for p in traj.poses:
        r = np.linalg.norm(p.translation - center)
        assert r == pytest.approx(1.0 / w, rel=1e-9)


def test_integrate_empty():
    with pytest.raises(InvalidInputError):
        integrate_trajectory([])


def test_odometry_identical_trajectories():
    traj = _straight_line(500)
    errs = kitti_odometry_errors(traj, traj)
    assert errs.t_rel == 0.0
    assert errs.r_rel == 0.0


def test_odometry_scaled_straight_path():
    gt = _straight_line(1000)  # 1 km, 1 m steps
    scaled = Trajectory([SE3Pose(p.rotation, 1.05 * p.translation)
                         for p in gt.poses])
    errs = kitti_odometry_errors(scaled, gt)
    assert errs.t_rel == pytest.approx(5.0, abs=0.01)
    assert errs.r_rel == pytest.approx(0.0, abs=1e-9)


def test_odometry_constant_yaw_drift():
    delta_deg = 0.01
    delta = math.radians(delta_deg)
    gt = _straight_line(1000)
    yaws = [twist_exp(Twist([0, 0, 0], [0, delta * k, 0]))
            for k in range(len(gt))]
    drifted = Trajectory([SE3Pose(p.rotation @ y.rotation, p.translation)
                          for p, y in zip(gt.poses, yaws)])
    errs = kitti_odometry_errors(drifted, gt)
    expected = 100.0 * delta_deg
    assert errs.r_rel == pytest.approx(expected, rel=1e-3)


def test_odometry_rigid_invariance():
    rng = np.random.default_rng(0)
    twists = [Twist(rng.normal(size=3) * 0.5 + [0, 0, 1],
                    rng.normal(size=3) * 0.01) for _ in range(300)]
    gt = integrate_trajectory(twists)
    pred = integrate_trajectory(
        [Twist(t.v + rng.normal(size=3) * 0.01, t.omega) for t in twists])
    base = kitti_odometry_errors(pred, gt)
    g = twist_exp(Twist([3.0, -2.0, 1.0], [0.3, 0.2, -0.4]))
    moved_gt = Trajectory([g.compose(p) for p in gt.poses])
    moved_pred = Trajectory([g.compose(p) for p in pred.poses])
    moved = kitti_odometry_errors(moved_pred, moved_gt)
    assert moved.t_rel == pytest.approx(base.t_rel, abs=1e-9)
    assert moved.r_rel == pytest.approx(base.r_rel, abs=1e-9)


def test_odometry_too_short():
    traj = _straight_line(10)
    with pytest.raises(InsufficientDataError):
        kitti_odometry_errors(traj, traj)


def test_scale_align_examples():
    gt = _straight_line(50)
    half = Trajectory([SE3Pose(p.rotation, 0.5 * p.translation)
                       for p in gt.poses])
    s, aligned = scale_align(half, gt)
    assert s == pytest.approx(2.0, rel=1e-12)
    np.testing.assert_allclose(aligned.translations(), gt.translations(),
                               atol=1e-9)
    s2, _ = scale_align(gt, gt)
    assert s2 == pytest.approx(1.0, rel=1e-12)


def test_scale_align_idempotent():
    rng = np.random.default_rng(1)
    gt = integrate_trajectory([Twist(rng.normal(size=3), rng.normal(size=3) * 0.02)
                               for _ in range(20)])
    pred = Trajectory([SE3Pose(p.rotation, 0.37 * p.translation)
                       for p in gt.poses])
    _, aligned = scale_align(pred, gt)
    s, _ = scale_align(aligned, gt)
    assert s == pytest.approx(1.0, abs=1e-12)


def test_scale_align_monte_carlo():
    rng = np.random.default_rng(2)
    gt = _straight_line(200)
    noise = rng.normal(0, 0.01, (201, 3))  # ~1% of the 1 m steps
    pred = Trajectory([SE3Pose(p.rotation, 0.5 * (p.translation + n))
                       for p, n in zip(gt.poses, noise)])
    s, _ = scale_align(pred, gt)
    assert s == pytest.approx(2.0, rel=0.01)


def test_scale_align_degenerate():
    zero = Trajectory([SE3Pose.identity()] * 5)
    with pytest.raises(DegenerateScaleError):
        scale_align(zero, _straight_line(4))


def _flow(u, v, valid=None):
    u = np.asarray(u, dtype=float)
    valid = np.ones_like(u, dtype=bool) if valid is None else valid
    return FlowField(u, np.asarray(v, dtype=float), valid)


def test_flow_errors_exact():
    gt = _flow(np.full((4, 4), 2.0), np.full((4, 4), 1.0))
    errs = flow_errors(gt, gt)
    assert errs.epe_all == 0.0 and errs.outlier_pct_all == 0.0


def test_flow_errors_small_magnitude_outliers():
    gt = _flow(np.full((4, 4), 6.0), np.full((4, 4), 8.0))  # magnitude 10
    pred = _flow(gt.u + 3.0, gt.v + 4.0)  # EPE 5 > 3 and > 0.5
    errs = flow_errors(pred, gt)
    assert errs.epe_all == pytest.approx(5.0)
    assert errs.outlier_pct_all == 100.0


def test_flow_errors_large_magnitude_not_outliers():
    gt = _flow(np.full((4, 4), 120.0), np.full((4, 4), 160.0))  # magnitude 200
    pred = _flow(gt.u + 3.0, gt.v + 4.0)  # EPE 5 < 10 = 5% of 200
    errs = flow_errors(pred, gt)
    assert errs.epe_all == pytest.approx(5.0)
    assert errs.outlier_pct_all == 0.0


def test_flow_errors_masks():
    rng = np.random.default_rng(3)
    gt = _flow(rng.uniform(-20, 20, (8, 8)), rng.uniform(-20, 20, (8, 8)))
    pred = _flow(gt.u + rng.uniform(0, 6, (8, 8)),
                 gt.v + rng.uniform(0, 6, (8, 8)))
    noc = np.zeros((8, 8), dtype=bool)
    noc[:4] = True
    extra = np.zeros((8, 8), dtype=bool)
    extra[:, :4] = True
    errs = flow_errors(pred, gt, noc_mask=noc, extra_mask=extra)
    # Scalar-loop oracle over the restricted masks.
    epe = np.hypot(pred.u - gt.u, pred.v - gt.v)
    mag = np.hypot(gt.u, gt.v)
    sel_all = extra
    sel_noc = extra & noc
    assert errs.epe_all == pytest.approx(epe[sel_all].mean(), abs=1e-12)
    assert errs.epe_noc == pytest.approx(epe[sel_noc].mean(), abs=1e-12)
    out = (epe > 3.0) & (epe > 0.05 * mag)
    assert errs.outlier_pct_noc == pytest.approx(
        100.0 * out[sel_noc].mean(), abs=1e-12)


def test_depth_errors_exact():
    gt = np.full((4, 4), 10.0)
    errs = depth_errors(gt, gt)
    assert errs.rmse == 0.0 and errs.abs_rel == 0.0
    assert errs.delta1 == 1.0 and errs.delta3 == 1.0


def test_depth_errors_uniform_scale():
    gt = np.full((4, 4), 10.0)
    errs = depth_errors(1.5 * gt, gt)
    assert errs.abs_rel == pytest.approx(0.5)
    assert errs.delta1 == 0.0
    assert errs.delta2 == 1.0  # 1.5 < 1.5625


def test_depth_errors_brute_force_oracle():
    rng = np.random.default_rng(4)
    gt = rng.uniform(1.0, 60.0, (8, 8))
    pred = gt * rng.uniform(0.7, 1.4, (8, 8))
    cap = 50.0
    errs = depth_errors(pred, gt, cap=cap)
    # Scalar accumulation loop, written independently of depth_errors.
    se = sl = ar = sr = 0.0
    d1 = d2 = d3 = n = 0
    for r in range(8):
        for c in range(8):
            g = gt[r, c]
            if not (0 < g <= cap):
                continue
            p = pred[r, c]
            n += 1
            se += (p - g) ** 2
            sl += (math.log(p) - math.log(g)) ** 2
            ar += abs(p - g) / g
            sr += (p - g) ** 2 / g
            ratio = max(p / g, g / p)
            d1 += ratio < 1.25
            d2 += ratio < 1.25**2
            d3 += ratio < 1.25**3
    assert errs.rmse == pytest.approx(math.sqrt(se / n), abs=1e-12)
    assert errs.rmse_log == pytest.approx(math.sqrt(sl / n), abs=1e-12)
    assert errs.abs_rel == pytest.approx(ar / n, abs=1e-12)
    assert errs.sq_rel == pytest.approx(sr / n, abs=1e-12)
    assert (errs.delta1, errs.delta2, errs.delta3) == (d1 / n, d2 / n, d3 / n)
    assert errs.delta1 <= errs.delta2 <= errs.delta3


def test_depth_errors_crop_and_mask():
    rng = np.random.default_rng(5)
    gt = rng.uniform(1.0, 40.0, (8, 8))
    pred = gt * 1.2
    mask = np.zeros((8, 8), dtype=bool)
    mask[::2] = True
    errs = depth_errors(pred, gt, cap=50.0, crop=(2, 6, 1, 7), mask=mask)
    sel = np.zeros((8, 8), dtype=bool)
    sel[2:6, 1:7] = True
    sel &= mask
    diff = (pred - gt)[sel]
    assert errs.rmse == pytest.approx(np.sqrt(np.mean(diff**2)), abs=1e-12)


def test_depth_errors_no_pixels():
    gt = np.full((4, 4), 100.0)
    with pytest.raises(InsufficientDataError):
        depth_errors(gt, gt, cap=50.0)
