"""Pinhole camera model, normalized coordinates, motion-field matrices, SE(3).

Conventions: angles in radians, lengths in meters, image quantities in
pixels unless a name says "normalized". A single focal length is used
(square pixels).
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError

# Below this rotation magnitude the Rodrigues coefficients switch to their
# Taylor expansions to avoid 0/0.
SMALL_ANGLE = 1e-8


@dataclass(frozen=True)
class CameraIntrinsics:
    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.f > 0):
            raise InvalidInputError(f"focal length must be positive, got {self.f}")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInputError("principal point must lie inside the image")


@dataclass(frozen=True)
class StereoRig:
    intrinsics: CameraIntrinsics
    baseline: float

    def __post_init__(self):
        if not (self.baseline > 0):
            raise InvalidInputError(f"baseline must be positive, got {self.baseline}")


@dataclass(frozen=True)
class Twist:
    """Per-frame linear (v, meters) and angular (omega, radians) displacement."""

    v: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(3)
        omega = np.asarray(self.omega, dtype=float).reshape(3)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(omega))):
            raise InvalidInputError("twist components must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "omega", omega)

    @staticmethod
    def zero():
        return Twist(np.zeros(3), np.zeros(3))

    def as_vector(self):
        """Stacked 6-vector (v, omega)."""
        return np.concatenate([self.v, self.omega])


@dataclass(frozen=True)
class NormalizedPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise InvalidInputError("normalized point must be finite")


@dataclass(frozen=True)
class SE3Pose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-9:
            raise InvalidInputError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise InvalidInputError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity():
        return SE3Pose(np.eye(3), np.zeros(3))

    def compose(self, other):
        """self * other (apply other first, then self)."""
        return SE3Pose(self.rotation @ other.rotation,
                       self.rotation @ other.translation + self.translation)

    def inverse(self):
        return SE3Pose(self.rotation.T, -self.rotation.T @ self.translation)


def normalize_pixel(intr, u, v):
    """Map pixel coordinates to the normalized camera frame."""
    return NormalizedPoint((u - intr.cx) / intr.f, (v - intr.cy) / intr.f)


def denormalize_point(intr, p):
    """Inverse of normalize_pixel."""
    return p.x * intr.f + intr.cx, p.y * intr.f + intr.cy


def motion_matrices(p):
    """Translational (A) and rotational (B) 2x3 coefficient matrices at p.

    The image motion at p for a camera twist (v, omega) and depth Z is
    (1/Z) A v + B omega, in normalized units.
    """
    x, y = p.x, p.y
    A = np.array([[-1.0, 0.0, x],
                  [0.0, -1.0, y]])
    B = np.array([[x * y, -(1.0 + x * x), y],
                  [1.0 + y * y, -x * y, -x]])
    return A, B


def disparity_to_depth(rig, d):
    """Depth Z = f*b/d for a rectified stereo pair."""
    if not (d > 0):
        raise InvalidInputError(f"disparity must be positive, got {d}")
    return rig.intrinsics.f * rig.baseline / d


def depth_to_disparity(rig, z):
    """Disparity d = f*b/Z; inverse of disparity_to_depth."""
    if not (z > 0):
        raise InvalidInputError(f"depth must be positive, got {z}")
    return rig.intrinsics.f * rig.baseline / z


def _skew(w):
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


def twist_exp(t: Twist) -> SE3Pose:
    """SE(3) exponential of a twist.

    Rodrigues rotation from omega, V-matrix applied to v. Falls back to the
    second-order Taylor coefficients below SMALL_ANGLE.
    """
    w = t.omega
    theta = float(np.linalg.norm(w))
    K = _skew(w)
    K2 = K @ K
    if theta < SMALL_ANGLE:
        # sin(t)/t -> 1, (1-cos t)/t^2 -> 1/2, (t-sin t)/t^3 -> 1/6
        R = np.eye(3) + K + 0.5 * K2
        V = np.eye(3) + 0.5 * K + K2 / 6.0
    else:
        s = np.sin(theta)
        c = np.cos(theta)
        R = np.eye(3) + (s / theta) * K + ((1.0 - c) / theta**2) * K2
        V = (np.eye(3) + ((1.0 - c) / theta**2) * K
             + ((theta - s) / theta**3) * K2)
    # Re-symmetrize against accumulated roundoff for angles near pi.
    u, _, vh = np.linalg.svd(R)
    R = u @ vh
    if np.linalg.det(R) < 0:
        u[:, -1] = -u[:, -1]
        R = u @ vh
    return SE3Pose(R, V @ t.v)
