"""Image warping and the unsupervised loss suite.

All losses are value-only per-pixel maps plus deterministic scalar
aggregates (row-major compensated summation); no gradients are provided.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .exceptions import InvalidInputError
from .fields import ScalarImage, WarpField, check_same_shape
from .motion_field import disparity_from_flow, predict_flow_field


@dataclass(frozen=True)
class LossConfig:
    epsilon: float = 1e-3
    alpha: float = 0.85
    lambda1: float = 1.0
    lambda2: float = 0.1
    ssim_window: int = 3
    ssim_c1: float = 0.01**2
    ssim_c2: float = 0.03**2
    # Default treats the SSIM term as a dissimilarity (1 - SSIM)/2 so the
    # combined objective is minimized at perfect similarity; turn off to
    # use the raw similarity value instead.
    ssim_dissimilarity: bool = True

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise InvalidInputError("epsilon must be positive")
        if not (0 <= self.alpha <= 1):
            raise InvalidInputError("alpha must be in [0, 1]")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidInputError("lambda weights must be non-negative")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise InvalidInputError("ssim_window must be odd and >= 3")


def charbonnier(x, epsilon):
    """Robust penalty sqrt(x^2 + eps^2); accepts scalars or arrays."""
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    x = np.asarray(x, dtype=float)
    out = np.sqrt(x * x + epsilon * epsilon)
    return out if out.ndim else float(out)


def _sample_positions(w):
    """Warp target coordinates and their out-of-bounds mask."""
    h, wd = w.height, w.width
    cols = np.arange(wd, dtype=float)[None, :]
    rows = np.arange(h, dtype=float)[:, None]
    px = cols + w.du
    py = rows + w.dv
    oob = (px < 0) | (px > wd - 1) | (py < 0) | (py > h - 1)
    return px, py, oob


def _bilinear(grid, px, py):
    """Bilinear sample of a 2-D grid at (px, py); caller masks OOB."""
    h, w = grid.shape
    x0 = np.clip(np.floor(px).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(py).astype(int), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = np.clip(px - x0, 0.0, 1.0)
    ay = np.clip(py - y0, 0.0, 1.0)
    top = grid[y0, x0] * (1 - ax) + grid[y0, x1] * ax
    bot = grid[y1, x0] * (1 - ax) + grid[y1, x1] * ax
    return top * (1 - ay) + bot * ay


def warp_image(img, w):
    """Bilinear warp of img by w; OOB samples are zero and flagged.

    Returns (warped image, out-of-bounds boolean mask).
    """
    check_same_shape(img, w)
    px, py, oob = _sample_positions(w)
    out = _bilinear(img.intensity, px, py)
    out[oob] = 0.0
    return ScalarImage(out), oob


def occlusion_mask(w):
    """1 where the warp target stays inside the image, 0 where it leaves.

    Computed directly from the warp; contains no learnable component, and
    is exactly the complement of warp_image's out-of-bounds mask.
    """
    _, _, oob = _sample_positions(w)
    return ~oob


def photometric_loss(img_i, img_j, w, cfg=LossConfig()):
    """Charbonnier penalty on I_i(x) - I_j(x + w(x)), per pixel.

    OOB pixels are computed against a zero sample; mask them with
    occlusion_mask when aggregating.
    """
    check_same_shape(img_i, img_j, w)
    warped, _ = warp_image(img_j, w)
    return charbonnier(img_i.intensity - warped.intensity, cfg.epsilon)


def ssim_map(img1, img2, cfg=LossConfig()):
    """Windowed structural similarity in [-1, 1]."""
    check_same_shape(img1, img2)
    k = cfg.ssim_window
    if img1.width < k or img1.height < k:
        raise InvalidInputError("image smaller than the SSIM window")
    a = img1.intensity
    b = img2.intensity
    mu_a = uniform_filter(a, size=k, mode="reflect")
    mu_b = uniform_filter(b, size=k, mode="reflect")
    var_a = uniform_filter(a * a, size=k, mode="reflect") - mu_a * mu_a
    var_b = uniform_filter(b * b, size=k, mode="reflect") - mu_b * mu_b
    cov = uniform_filter(a * b, size=k, mode="reflect") - mu_a * mu_b
    num = (2 * mu_a * mu_b + cfg.ssim_c1) * (2 * cov + cfg.ssim_c2)
    den = (mu_a * mu_a + mu_b * mu_b + cfg.ssim_c1) * (var_a + var_b + cfg.ssim_c2)
    return np.clip(num / den, -1.0, 1.0)


def appearance_loss(img_i, img_j, w, cfg=LossConfig()):
    """Mix of SSIM dissimilarity and the Charbonnier photometric penalty."""
    photo = photometric_loss(img_i, img_j, w, cfg)
    if cfg.alpha == 1.0:
        return photo
    warped, _ = warp_image(img_j, w)
    s = ssim_map(img_i, warped, cfg)
    term = np.clip((1.0 - s) / 2.0, 0.0, 1.0) if cfg.ssim_dissimilarity else s
    return (1.0 - cfg.alpha) * term + cfg.alpha * photo


def consistency_loss(w_fwd, w_bwd, cfg=LossConfig()):
    """Cycle penalty rho(w_fwd(x) + w_bwd(x + w_fwd(x))), both components."""
    check_same_shape(w_fwd, w_bwd)
    px, py, oob = _sample_positions(w_fwd)
    bu = _bilinear(w_bwd.du, px, py)
    bv = _bilinear(w_bwd.dv, px, py)
    bu[oob] = 0.0
    bv[oob] = 0.0
    return (charbonnier(w_fwd.du + bu, cfg.epsilon)
            + charbonnier(w_fwd.dv + bv, cfg.epsilon))


def smoothness_loss(w, img, cfg=LossConfig()):
    """Edge-aware first-order smoothness of the warp.

    Forward differences; image-gradient weights e^{-|dI|} damp the penalty
    at edges. The last column (x terms) and last row (y terms) carry no
    contribution.
    """
    check_same_shape(w, img)
    eps = cfg.epsilon
    out = np.zeros_like(w.du)
    gx = np.exp(-np.abs(np.diff(img.intensity, axis=1)))
    gy = np.exp(-np.abs(np.diff(img.intensity, axis=0)))
    out[:, :-1] += charbonnier(np.diff(w.du, axis=1) * gx, eps)
    out[:, :-1] += charbonnier(np.diff(w.dv, axis=1) * gx, eps)
    out[:-1, :] += charbonnier(np.diff(w.du, axis=0) * gy, eps)
    out[:-1, :] += charbonnier(np.diff(w.dv, axis=0) * gy, eps)
    return out


def _ksum(a):
    """Deterministic row-major compensated sum."""
    return math.fsum(np.asarray(a, dtype=float).ravel())


def total_warp_loss_components(img_i, img_j, w_fwd, w_bwd, cfg=LossConfig()):
    """Per-pixel maps entering the single-warp total, plus the bounds mask."""
    return {
        "appearance": appearance_loss(img_i, img_j, w_fwd, cfg),
        "consistency": consistency_loss(w_fwd, w_bwd, cfg),
        "smoothness": smoothness_loss(w_fwd, img_i, cfg),
        "occlusion": occlusion_mask(w_fwd),
    }


def total_warp_loss(img_i, img_j, w_fwd, w_bwd, cfg=LossConfig()):
    """Scalar total for one warp: masked appearance + consistency, plus
    unmasked smoothness."""
    c = total_warp_loss_components(img_i, img_j, w_fwd, w_bwd, cfg)
    m = c["occlusion"].astype(float)
    return (_ksum(m * (c["appearance"] + cfg.lambda1 * c["consistency"]))
            + cfg.lambda2 * _ksum(c["smoothness"]))


def multi_warp_total_loss(terms, cfg=LossConfig()):
    """Sum of total_warp_loss over (I_i, I_j, w_fwd, w_bwd) tuples.

    Covers the stereo-temporal quadruple aggregate (four flow and four
    disparity warps per training sample).
    """
    return math.fsum(total_warp_loss(ii, ij, wf, wb, cfg)
                     for ii, ij, wf, wb in terms)


@dataclass(frozen=True)
class RefinementLosses:
    stereo_loss: float
    temporal_loss: float
    stereo_count: int
    temporal_count: int

    def __iter__(self):
        yield self.stereo_loss
        yield self.temporal_loss


def refinement_losses(rig, twist, flow, disp, temporal_pair, stereo_pair,
                      inliers, cfg=LossConfig()):
    """Cross-modality appearance losses driven by the estimated twist.

    The stereo loss warps the stereo pair by the disparity recovered from
    flow + twist; the temporal loss warps the temporal pair by the flow
    predicted from disparity + twist. Each is summed only over pixels that
    are RANSAC inliers, valid under the respective conversion, and in
    bounds.
    """
    img_t0, img_t1 = temporal_pair
    img_l, img_r = stereo_pair
    check_same_shape(img_t0, img_t1, img_l, img_r, flow, disp, inliers)

    d_hat = disparity_from_flow(rig, twist, flow)
    w_stereo = WarpField.from_disparity(d_hat)
    stereo_sel = inliers.inlier & d_hat.valid & occlusion_mask(w_stereo)
    stereo_map = appearance_loss(img_l, img_r, w_stereo, cfg)

    f_hat = predict_flow_field(rig, twist, disp)
    w_temp = WarpField.from_flow(f_hat)
    temp_sel = inliers.inlier & f_hat.valid & occlusion_mask(w_temp)
    temp_map = appearance_loss(img_t0, img_t1, w_temp, cfg)

    return RefinementLosses(
        stereo_loss=_ksum(stereo_map[stereo_sel]),
        temporal_loss=_ksum(temp_map[temp_sel]),
        stereo_count=int(stereo_sel.sum()),
        temporal_count=int(temp_sel.sum()),
    )
