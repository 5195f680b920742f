"""Dense per-pixel field containers: flow, disparity, intensity, warps, masks."""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError


def _as_float_grid(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D grid, got shape {a.shape}")
    return a


def _as_bool_grid(a, shape, name):
    a = np.asarray(a, dtype=bool)
    if a.shape != shape:
        raise InvalidInputError(f"{name} shape {a.shape} does not match {shape}")
    return a


@dataclass
class FlowField:
    """Dense optical flow in pixels, with a per-pixel validity mask."""

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.u = _as_float_grid(self.u, "u")
        self.v = _as_float_grid(self.v, "v")
        if self.v.shape != self.u.shape:
            raise InvalidInputError("u and v shapes differ")
        self.valid = _as_bool_grid(self.valid, self.u.shape, "valid")

    @property
    def width(self):
        return self.u.shape[1]

    @property
    def height(self):
        return self.u.shape[0]

    @staticmethod
    def zeros(height, width):
        return FlowField(np.zeros((height, width)), np.zeros((height, width)),
                         np.ones((height, width), dtype=bool))


@dataclass
class DisparityField:
    """Dense stereo disparity in pixels; valid pixels must have d > 0."""

    d: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.d = _as_float_grid(self.d, "d")
        self.valid = _as_bool_grid(self.valid, self.d.shape, "valid")
        if np.any(self.d[self.valid] <= 0):
            raise InvalidInputError("valid disparity pixels must be positive")

    @property
    def width(self):
        return self.d.shape[1]

    @property
    def height(self):
        return self.d.shape[0]


@dataclass
class ScalarImage:
    """Grayscale intensity grid with values in [0, 1]."""

    intensity: np.ndarray

    def __post_init__(self):
        self.intensity = _as_float_grid(self.intensity, "intensity")
        if not np.all(np.isfinite(self.intensity)):
            raise InvalidInputError("intensities must be finite")
        if self.intensity.min() < 0 or self.intensity.max() > 1:
            raise InvalidInputError("intensities must lie in [0, 1]")

    @property
    def width(self):
        return self.intensity.shape[1]

    @property
    def height(self):
        return self.intensity.shape[0]


@dataclass
class WarpField:
    """Generic per-pixel warp x -> x + offset(x), offsets in pixels.

    Both optical flow and (negated horizontal) disparity instantiate it.
    """

    du: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        self.du = _as_float_grid(self.du, "du")
        self.dv = _as_float_grid(self.dv, "dv")
        if self.dv.shape != self.du.shape:
            raise InvalidInputError("du and dv shapes differ")
        if not (np.all(np.isfinite(self.du)) and np.all(np.isfinite(self.dv))):
            raise InvalidInputError("warp offsets must be finite")

    @property
    def width(self):
        return self.du.shape[1]

    @property
    def height(self):
        return self.du.shape[0]

    @staticmethod
    def from_flow(flow):
        return WarpField(flow.u.copy(), flow.v.copy())

    @staticmethod
    def from_disparity(disp):
        """Left-to-right stereo warp: purely horizontal offset of -d."""
        return WarpField(-disp.d, np.zeros_like(disp.d))


@dataclass
class InlierMask:
    inlier: np.ndarray

    def __post_init__(self):
        self.inlier = np.asarray(self.inlier, dtype=bool)
        if self.inlier.ndim != 2:
            raise InvalidInputError("inlier mask must be a 2-D grid")

    @property
    def width(self):
        return self.inlier.shape[1]

    @property
    def height(self):
        return self.inlier.shape[0]

    @property
    def count(self):
        return int(self.inlier.sum())


def check_same_shape(*grids):
    """Raise unless every (height, width) matches."""
    shapes = {(g.height, g.width) for g in grids}
    if len(shapes) > 1:
        raise InvalidInputError(f"field dimensions differ: {sorted(shapes)}")
