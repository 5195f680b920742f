"""Ground-truth scene generator for tests and benchmarks.

Produces rigid scenes with a known twist, smooth depth, exact flow and
disparity under the forward model, optional independently moving
rectangular objects, optional noise/outliers, and optional textured image
quadruples consistent with the warps. Everything is deterministic given
the seed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidInputError
from .fields import DisparityField, FlowField, ScalarImage
from .geometry import StereoRig, Twist
from .motion_field import _flow_terms, predict_flow_field

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SceneConfig:
    rig: StereoRig
    depth_range: tuple = (4.0, 20.0)
    twist: Optional[Twist] = None  # None draws a random twist
    v_magnitude: tuple = (0.3, 1.5)      # meters, for random twists
    omega_magnitude: tuple = (0.0, 0.02)  # radians, for random twists
    object_count: int = 0
    # Objects are re-sampled until their flow differs from the background
    # by at least this much at every object pixel.
    object_min_separation_px: float = 3.0
    noise_sigma_flow: float = 0.0
    noise_sigma_disp: float = 0.0
    outlier_fraction: float = 0.0
    with_images: bool = False
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.depth_range
        if not (0 < lo < hi):
            raise InvalidInputError("depth_range must satisfy 0 < min < max")
        if not (0 <= self.outlier_fraction < 1):
            raise InvalidInputError("outlier_fraction must be in [0, 1)")
        if self.noise_sigma_flow < 0 or self.noise_sigma_disp < 0:
            raise InvalidInputError("noise sigmas must be non-negative")
        if self.object_count < 0:
            raise InvalidInputError("object_count must be non-negative")

    @property
    def width(self):
        return self.rig.intrinsics.width

    @property
    def height(self):
        return self.rig.intrinsics.height


@dataclass
class SceneImages:
    left_t0: ScalarImage
    left_t1: ScalarImage
    right_t0: ScalarImage
    right_t1: ScalarImage


@dataclass
class SyntheticScene:
    rig: StereoRig
    twist_gt: Twist
    disparity_gt: DisparityField
    flow_gt: FlowField
    object_mask: np.ndarray
    outlier_mask: Optional[np.ndarray] = None
    images: Optional[SceneImages] = None

    @property
    def clean_mask(self):
        """Pixels untouched by objects and injected outliers."""
        clean = ~self.object_mask
        if self.outlier_mask is not None:
            clean &= ~self.outlier_mask
        return clean


class _Surface:
    """Sum of random low-frequency sinusoids, rescaled to a target range.

    Evaluated analytically at arbitrary (sub-)pixel positions, which lets
    image construction stay consistent with the warp fields.
    """

    def __init__(self, rng, width, height, n_terms, freq_cycles, out_range):
        scale = max(width, height)
        self.kx = rng.uniform(freq_cycles[0], freq_cycles[1], n_terms) / scale
        self.ky = rng.uniform(freq_cycles[0], freq_cycles[1], n_terms) / scale
        self.kx *= rng.choice([-1.0, 1.0], n_terms)
        self.ky *= rng.choice([-1.0, 1.0], n_terms)
        self.amp = rng.uniform(0.5, 1.0, n_terms)
        self.phase = rng.uniform(0.0, 2.0 * np.pi, n_terms)
        # Conservative bound keeps the affine map inside out_range.
        total = self.amp.sum()
        lo, hi = out_range
        self.offset = 0.5 * (lo + hi)
        self.gain = 0.5 * (hi - lo) / total

    def __call__(self, px, py):
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        out = np.zeros(np.broadcast(px, py).shape)
        for kx, ky, a, ph in zip(self.kx, self.ky, self.amp, self.phase):
            out += a * np.sin(2.0 * np.pi * (kx * px + ky * py) + ph)
        return self.offset + self.gain * out


def _random_twist(rng, cfg):
    v_dir = rng.normal(size=3)
    v_dir /= np.linalg.norm(v_dir)
    # Bias toward forward motion, the dominant driving mode.
    v_dir[2] = abs(v_dir[2]) + 1.0
    v_dir /= np.linalg.norm(v_dir)
    v = v_dir * rng.uniform(*cfg.v_magnitude)
    w_dir = rng.normal(size=3)
    w_dir /= np.linalg.norm(w_dir)
    w = w_dir * rng.uniform(*cfg.omega_magnitude)
    return Twist(v, w)


def generate(cfg: SceneConfig) -> SyntheticScene:
    """Build a deterministic synthetic scene from the config."""
    rng = np.random.default_rng(cfg.seed & _SEED_MASK)
    intr = cfg.rig.intrinsics
    h, w = intr.height, intr.width

    depth_fn = _Surface(rng, w, h, n_terms=8, freq_cycles=(0.2, 1.2),
                        out_range=cfg.depth_range)
    cols = np.arange(w, dtype=float)[None, :]
    rows = np.arange(h, dtype=float)[:, None]
    depth = depth_fn(np.broadcast_to(cols, (h, w)), np.broadcast_to(rows, (h, w)))
    d = intr.f * cfg.rig.baseline / depth
    disp = DisparityField(d, np.ones((h, w), dtype=bool))

    twist = cfg.twist if cfg.twist is not None else _random_twist(rng, cfg)
    flow = predict_flow_field(cfg.rig, twist, disp)
    object_mask = np.zeros((h, w), dtype=bool)

    scene = SyntheticScene(rig=cfg.rig, twist_gt=twist, disparity_gt=disp,
                           flow_gt=flow, object_mask=object_mask)

    if cfg.object_count:
        _inject_scene_objects(rng, cfg, scene)

    if cfg.with_images:
        scene.images = _render_images(rng, cfg, twist, depth_fn)

    if cfg.noise_sigma_flow or cfg.noise_sigma_disp or cfg.outlier_fraction:
        scene = perturb(scene, cfg.noise_sigma_flow, cfg.noise_sigma_disp,
                        cfg.outlier_fraction, seed=(cfg.seed ^ 0xA5A5A5A5))
    return scene


def _inject_scene_objects(rng, cfg, scene):
    """Overwrite rectangles with flow from an offset (independent) twist."""
    intr = cfg.rig.intrinsics
    h, w = intr.height, intr.width
    flow = scene.flow_gt
    for _ in range(cfg.object_count):
        rh = int(rng.integers(max(2, h // 6), max(3, h // 3) + 1))
        rw = int(rng.integers(max(2, w // 6), max(3, w // 3) + 1))
        r0 = int(rng.integers(0, h - rh + 1))
        c0 = int(rng.integers(0, w - rw + 1))
        region = (slice(r0, r0 + rh), slice(c0, c0 + rw))
        for _attempt in range(100):
            dv = rng.normal(size=3)
            dv *= rng.uniform(1.0, 3.0) / np.linalg.norm(dv)
            obj_twist = Twist(scene.twist_gt.v + dv, scene.twist_gt.omega)
            obj_flow = predict_flow_field(cfg.rig, obj_twist, scene.disparity_gt)
            diff = np.hypot(obj_flow.u[region] - flow.u[region],
                            obj_flow.v[region] - flow.v[region])
            if diff.min() >= cfg.object_min_separation_px:
                flow.u[region] = obj_flow.u[region]
                flow.v[region] = obj_flow.v[region]
                scene.object_mask[region] = True
                break
        else:
            raise InvalidInputError(
                "could not find an object twist separated from the background")


def _continuous_flow(cfg, twist, depth_fn, px, py):
    """Analytic background flow (pixels) at arbitrary pixel positions."""
    intr = cfg.rig.intrinsics
    x = (px - intr.cx) / intr.f
    y = (py - intr.cy) / intr.f
    av_u, av_v, bw_u, bw_v = _flow_terms(x, y, twist)
    z = depth_fn(px, py)
    return intr.f * (av_u / z + bw_u), intr.f * (av_v / z + bw_v)


def _render_images(rng, cfg, twist, depth_fn):
    """Textured quadruple consistent with the background warps.

    left_t0 is defined analytically as the t1 texture pulled back through
    the flow, so warping left_t1 by the ground-truth flow reproduces
    left_t0 up to bilinear interpolation error. The right images are the
    left continuous definitions pulled back through the disparity via a
    fixed-point inverse.
    """
    intr = cfg.rig.intrinsics
    h, w = intr.height, intr.width
    fb = intr.f * cfg.rig.baseline
    texture = _Surface(rng, w, h, n_terms=24, freq_cycles=(0.5, 6.0),
                       out_range=(0.05, 0.95))
    cols = np.broadcast_to(np.arange(w, dtype=float)[None, :], (h, w))
    rows = np.broadcast_to(np.arange(h, dtype=float)[:, None], (h, w))

    def left_t0(px, py):
        fu, fv = _continuous_flow(cfg, twist, depth_fn, px, py)
        return texture(px + fu, py + fv)

    def pull_through_disparity(left_fn):
        # Solve x = y + d(x) per pixel so right(y) = left(x), d = fb/Z.
        x = cols + fb / depth_fn(cols, rows)
        for _ in range(30):
            x = cols + fb / depth_fn(x, rows)
        return left_fn(x, rows)

    return SceneImages(
        left_t0=ScalarImage(left_t0(cols, rows)),
        left_t1=ScalarImage(texture(cols, rows)),
        right_t0=ScalarImage(pull_through_disparity(left_t0)),
        right_t1=ScalarImage(pull_through_disparity(texture)),
    )


def perturb(scene, noise_sigma_flow, noise_sigma_disp, outlier_fraction,
            seed=0):
    """Noise + gross-outlier injection; everything else is untouched."""
    if noise_sigma_flow < 0 or noise_sigma_disp < 0:
        raise InvalidInputError("noise sigmas must be non-negative")
    if not (0 <= outlier_fraction < 1):
        raise InvalidInputError("outlier_fraction must be in [0, 1)")
    rng = np.random.default_rng(seed & _SEED_MASK)
    h, w = scene.flow_gt.height, scene.flow_gt.width

    u = scene.flow_gt.u.copy()
    v = scene.flow_gt.v.copy()
    fvalid = scene.flow_gt.valid.copy()
    d = scene.disparity_gt.d.copy()
    dvalid = scene.disparity_gt.valid.copy()

    if noise_sigma_flow:
        u += rng.normal(0.0, noise_sigma_flow, (h, w))
        v += rng.normal(0.0, noise_sigma_flow, (h, w))
    if noise_sigma_disp:
        d += rng.normal(0.0, noise_sigma_disp, (h, w))
        # Noise can push disparities non-positive; those become invalid.
        dvalid &= d > 0
        d[~dvalid] = 0.0

    outlier_mask = np.zeros((h, w), dtype=bool)
    n_out = int(outlier_fraction * h * w)
    if n_out:
        pick = rng.choice(h * w, size=n_out, replace=False)
        outlier_mask.ravel()[pick] = True
        u[outlier_mask] = rng.uniform(-50.0, 50.0, n_out)
        v[outlier_mask] = rng.uniform(-50.0, 50.0, n_out)

    if scene.outlier_mask is not None:
        outlier_mask |= scene.outlier_mask

    return SyntheticScene(rig=scene.rig, twist_gt=scene.twist_gt,
                          disparity_gt=DisparityField(d, dvalid),
                          flow_gt=FlowField(u, v, fvalid),
                          object_mask=scene.object_mask.copy(),
                          outlier_mask=outlier_mask,
                          images=scene.images)


def invert_flow_field(flow, iterations=30):
    """Approximate backward warp: offsets at y such that y + b(y) lands at
    the source pixel x with x + flow(x) = y. Fixed-point, assumes a smooth
    moderate-magnitude flow."""
    from .losses import _bilinear

    h, w = flow.height, flow.width
    cols = np.broadcast_to(np.arange(w, dtype=float)[None, :], (h, w))
    rows = np.broadcast_to(np.arange(h, dtype=float)[:, None], (h, w))
    x = cols.copy()
    y = rows.copy()
    for _ in range(iterations):
        x = cols - _bilinear(flow.u, x, y)
        y = rows - _bilinear(flow.v, x, y)
    from .fields import WarpField
    return WarpField(x - cols, y - rows)
