"""3-point RANSAC over the motion-field model.

Hypotheses are minimal 6x6 solves from 3 sampled pixels; inliers are
scored by the pixel-space distance between the input flow and the flow
predicted from disparity under the hypothesis twist.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import (EstimationFailedError, InsufficientDataError,
                         InvalidInputError)
from .fields import InlierMask, check_same_shape
from .geometry import Twist
from .motion_field import (CONDITION_LIMIT, _design_matrix, _pixel_grids,
                           _solve_design, predict_flow_field)

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 100
    threshold_px: float = 1.0
    seed: int = 0
    min_inliers: int = 6
    refit: bool = True
    # "l2": Euclidean norm of the 2-vector residual; "linf": max component.
    residual_norm: str = "l2"

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if not (self.threshold_px > 0):
            raise InvalidInputError("threshold_px must be positive")
        if self.min_inliers < 3:
            raise InvalidInputError("min_inliers must be >= 3")
        if self.residual_norm not in ("l2", "linf"):
            raise InvalidInputError(f"unknown residual norm {self.residual_norm!r}")


@dataclass
class PoseEstimate:
    twist: Twist
    mask: InlierMask
    inlier_count: int
    inlier_fraction: float
    mean_residual_px: float


def _residual_norm_px(ru, rv, norm):
    if norm == "l2":
        return np.hypot(ru, rv)
    return np.maximum(np.abs(ru), np.abs(rv))


def score_inliers(rig, t, flow, disp, threshold_px, norm="l2"):
    """Mask of pixels whose flow agrees with the rigid model under t.

    A pixel is an inlier iff it is valid in both fields and the predicted
    flow is within threshold_px of the input flow.
    """
    check_same_shape(flow, disp)
    pred = predict_flow_field(rig, t, disp)
    resid = _residual_norm_px(pred.u - flow.u, pred.v - flow.v, norm)
    return InlierMask(flow.valid & disp.valid & (resid < threshold_px))


def estimate_pose_ransac(rig, flow, disp, cfg=RansacConfig()):
    """Robust twist estimate with inlier mask and residual statistics.

    Deterministic for a fixed seed: iteration i draws from a generator
    seeded with seed XOR i, so the result is independent of evaluation
    order. The best hypothesis (most inliers, ties broken by lower mean
    residual then earlier iteration) is refit on its inlier set unless
    cfg.refit is off, and the final mask is re-scored with the final twist.
    """
    check_same_shape(flow, disp)
    intr = rig.intrinsics
    if (flow.height, flow.width) != (intr.height, intr.width):
        raise InvalidInputError("field dimensions do not match intrinsics")

    joint = flow.valid & disp.valid
    idx = np.flatnonzero(joint)
    n = idx.size
    if n < cfg.min_inliers:
        raise InsufficientDataError(
            f"{n} jointly-valid pixels, need at least {cfg.min_inliers}")

    xg, yg = _pixel_grids(intr)
    x = xg.ravel()[idx]
    y = yg.ravel()[idx]
    inv_z = disp.d.ravel()[idx] / (intr.f * rig.baseline)
    fu = flow.u.ravel()[idx] / intr.f
    fv = flow.v.ravel()[idx] / intr.f
    design = _design_matrix(x, y, inv_z)
    rhs = np.empty(2 * n)
    rhs[0::2] = fu
    rhs[1::2] = fv

    def score(theta):
        resid_n = design @ theta - rhs
        resid_px = intr.f * _residual_norm_px(resid_n[0::2], resid_n[1::2],
                                              cfg.residual_norm)
        inl = resid_px < cfg.threshold_px
        count = int(inl.sum())
        mean = float(resid_px[inl].mean()) if count else np.inf
        return inl, count, mean

    best = None  # (count, mean_residual, iteration, theta, inliers)
    for i in range(cfg.iterations):
        rng = np.random.default_rng((cfg.seed ^ i) & _SEED_MASK)
        pick = rng.choice(n, size=3, replace=False)
        rows = np.empty(6, dtype=int)
        rows[0::2] = 2 * pick
        rows[1::2] = 2 * pick + 1
        sub = design[rows]
        if np.linalg.cond(sub) > CONDITION_LIMIT:
            continue
        theta = np.linalg.solve(sub, rhs[rows])
        inl, count, mean = score(theta)
        if best is None or count > best[0] or (count == best[0] and mean < best[1]):
            best = (count, mean, i, theta, inl)

    if best is None:
        raise EstimationFailedError("no non-degenerate hypothesis found")
    count, mean, _, theta, inl = best
    if count < cfg.min_inliers:
        raise EstimationFailedError(
            f"best hypothesis has {count} inliers, need {cfg.min_inliers}")

    if cfg.refit:
        rows = np.empty(2 * count, dtype=int)
        sel = np.flatnonzero(inl)
        rows[0::2] = 2 * sel
        rows[1::2] = 2 * sel + 1
        refit = _solve_design(design[rows], rhs[rows])
        theta = refit.as_vector()
        inl, count, mean = score(theta)

    twist = Twist(theta[:3], theta[3:])
    mask = np.zeros(joint.shape, dtype=bool)
    mask.ravel()[idx[inl]] = True
    return PoseEstimate(twist=twist,
                        mask=InlierMask(mask),
                        inlier_count=count,
                        inlier_fraction=count / n,
                        mean_residual_px=mean if count else 0.0)
