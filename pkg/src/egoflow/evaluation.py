"""Trajectory integration and odometry / flow / depth metrics."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (DegenerateScaleError, InsufficientDataError,
                         InvalidInputError)
from .fields import check_same_shape
from .geometry import SE3Pose, twist_exp

SEGMENT_LENGTHS_M = tuple(range(100, 900, 100))


@dataclass
class Trajectory:
    """World-from-camera poses, one per frame."""

    poses: list

    def __len__(self):
        return len(self.poses)

    def translations(self):
        return np.array([p.translation for p in self.poses])


@dataclass
class OdometryErrors:
    t_rel: float  # percent
    r_rel: float  # degrees per 100 m
    per_length: dict  # length (m) -> (t_rel %, r_rel deg/100m)


@dataclass
class FlowErrors:
    epe_noc: float
    epe_all: float
    outlier_pct_noc: float
    outlier_pct_all: float


@dataclass
class DepthErrors:
    rmse: float
    rmse_log: float
    abs_rel: float
    sq_rel: float
    delta1: float
    delta2: float
    delta3: float


def integrate_trajectory(twists):
    """Chain per-frame displacements into a trajectory starting at identity."""
    if not twists:
        raise InvalidInputError("need at least one twist")
    poses = [SE3Pose.identity()]
    for t in twists:
        poses.append(poses[-1].compose(twist_exp(t)))
    return Trajectory(poses)


def _rotation_angle(R):
    return math.acos(min(1.0, max(-1.0, (np.trace(R) - 1.0) / 2.0)))


def _path_distances(traj):
    t = traj.translations()
    steps = np.linalg.norm(np.diff(t, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def kitti_odometry_errors(traj, gt):
    """Average relative drift over {100..800} m sub-segments.

    Dense evaluation: every frame is a segment start. Path length is
    measured along the ground-truth trajectory; errors are normalized by
    the nominal segment length.
    """
    if len(traj) != len(gt):
        raise InvalidInputError("trajectory lengths differ")
    if len(gt) < 2:
        raise InvalidInputError("need at least 2 poses")
    dist = _path_distances(gt)
    t_errs = []
    r_errs = []
    per_length = {}
    for length in SEGMENT_LENGTHS_M:
        ends = np.searchsorted(dist, dist + length)
        lt, lr = [], []
        for i, j in enumerate(ends):
            if j >= len(gt):
                continue
            rel_gt = gt.poses[i].inverse().compose(gt.poses[j])
            rel_pr = traj.poses[i].inverse().compose(traj.poses[j])
            err = rel_gt.inverse().compose(rel_pr)
            lt.append(np.linalg.norm(err.translation) / length)
            lr.append(_rotation_angle(err.rotation) / length)
        if lt:
            per_length[length] = (100.0 * float(np.mean(lt)),
                                  100.0 * math.degrees(float(np.mean(lr))))
            t_errs.extend(lt)
            r_errs.extend(lr)
    if not t_errs:
        raise InsufficientDataError(
            "ground-truth path is shorter than every segment length")
    return OdometryErrors(t_rel=100.0 * float(np.mean(t_errs)),
                          r_rel=100.0 * math.degrees(float(np.mean(r_errs))),
                          per_length=per_length)


def scale_align(traj, gt):
    """Globally scale trajectory translations onto the ground truth dodging
    the monocular scale ambiguity; rotations are unchanged."""
    if len(traj) != len(gt):
        raise InvalidInputError("trajectory lengths differ")
    t = traj.translations()
    g = gt.translations()
    denom = float((t * t).sum())
    if denom == 0.0:
        raise DegenerateScaleError("all translations are zero")
    s = float((t * g).sum()) / denom
    aligned = Trajectory([SE3Pose(p.rotation, s * p.translation)
                          for p in traj.poses])
    return s, aligned


def flow_errors(pred, gt, noc_mask=None, extra_mask=None):
    """Endpoint error and KITTI outlier percentage.

    Evaluated over valid ground-truth pixels; a pixel is an outlier iff
    its EPE exceeds 3 px and 5% of the true flow magnitude. noc_mask
    restricts the "noc" statistics; extra_mask restricts everything (e.g.
    inlier-only evaluation).
    """
    check_same_shape(pred, gt)
    sel = gt.valid.copy()
    if extra_mask is not None:
        sel &= np.asarray(extra_mask, dtype=bool)
    epe = np.hypot(pred.u - gt.u, pred.v - gt.v)
    mag = np.hypot(gt.u, gt.v)
    outlier = (epe > 3.0) & (epe > 0.05 * mag)

    def stats(mask):
        n = int(mask.sum())
        if n == 0:
            return 0.0, 0.0
        return float(epe[mask].mean()), 100.0 * float(outlier[mask].mean())

    epe_all, out_all = stats(sel)
    if noc_mask is not None:
        epe_noc, out_noc = stats(sel & np.asarray(noc_mask, dtype=bool))
    else:
        epe_noc, out_noc = epe_all, out_all
    return FlowErrors(epe_noc=epe_noc, epe_all=epe_all,
                      outlier_pct_noc=out_noc, outlier_pct_all=out_all)


def depth_errors(pred, gt, cap=50.0, crop=None, mask=None):
    """Standard monocular-depth error suite over 0 < gt <= cap.

    crop is an optional (row0, row1, col0, col1) evaluation window; mask
    optionally restricts to e.g. inlier pixels.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise InvalidInputError("depth grids have different shapes")
    sel = (gt > 0) & (gt <= cap)
    if crop is not None:
        r0, r1, c0, c1 = crop
        window = np.zeros_like(sel)
        window[r0:r1, c0:c1] = True
        sel &= window
    if mask is not None:
        sel &= np.asarray(mask, dtype=bool)
    if not sel.any():
        raise InsufficientDataError("no pixels in evaluation range")
    p = pred[sel]
    g = gt[sel]
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return DepthErrors(
        rmse=float(np.sqrt(np.mean(diff**2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
    )
