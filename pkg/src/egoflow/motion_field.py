"""Forward and inverse rigid-motion model on dense fields.

The core relation is the per-pixel linear system
F = (1/Z) A v + B omega in normalized camera coordinates; this module
predicts flow from disparity and a twist, solves for the twist from
point samples, and recovers disparity from flow and a twist.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateConfigurationError, InvalidInputError
from .fields import DisparityField, FlowField, check_same_shape
from .geometry import NormalizedPoint, Twist, motion_matrices

# Conditioning threshold for the stacked design matrix.
CONDITION_LIMIT = 1e10
# Minimum translational-basis norm (normalized units) below which the
# per-pixel disparity projection is unobservable.
EPSILON_V1 = 1e-12


@dataclass(frozen=True)
class MotionSample:
    """One pixel's contribution to the twist solve: point, depth, flow.

    Flow is in normalized units per frame (pixels / focal length).
    """

    point: NormalizedPoint
    depth: float
    flow: np.ndarray

    def __post_init__(self):
        if not (self.depth > 0):
            raise InvalidInputError(f"sample depth must be positive, got {self.depth}")
        flow = np.asarray(self.flow, dtype=float).reshape(2)
        if not np.all(np.isfinite(flow)):
            raise InvalidInputError("sample flow must be finite")
        object.__setattr__(self, "flow", flow)


def predict_flow_point(t, p, depth):
    """Normalized image motion at one point: (1/Z) A v + B omega."""
    if not (depth > 0):
        raise InvalidInputError(f"depth must be positive, got {depth}")
    A, B = motion_matrices(p)
    return (A @ t.v) / depth + B @ t.omega


def _pixel_grids(intr):
    """Normalized x, y coordinate grids for every pixel center."""
    cols = np.arange(intr.width, dtype=float)
    rows = np.arange(intr.height, dtype=float)
    x = (cols[None, :] - intr.cx) / intr.f
    y = (rows[:, None] - intr.cy) / intr.f
    return np.broadcast_to(x, (intr.height, intr.width)).copy(), \
        np.broadcast_to(y, (intr.height, intr.width)).copy()


def _flow_terms(x, y, t):
    """Vectorized A v and B omega over coordinate grids."""
    vx, vy, vz = t.v
    wx, wy, wz = t.omega
    av_u = -vx + x * vz
    av_v = -vy + y * vz
    bw_u = x * y * wx - (1.0 + x * x) * wy + y * wz
    bw_v = (1.0 + y * y) * wx - x * y * wy - x * wz
    return av_u, av_v, bw_u, bw_v


def predict_flow_field(rig, t, disp):
    """Flow field in pixels implied by a twist and a disparity field.

    Invalid disparity pixels yield invalid flow pixels.
    """
    intr = rig.intrinsics
    if (disp.height, disp.width) != (intr.height, intr.width):
        raise InvalidInputError("disparity dimensions do not match intrinsics")
    x, y = _pixel_grids(intr)
    av_u, av_v, bw_u, bw_v = _flow_terms(x, y, t)
    valid = disp.valid
    inv_z = np.zeros_like(disp.d)
    inv_z[valid] = disp.d[valid] / (intr.f * rig.baseline)
    u = intr.f * (av_u * inv_z + bw_u)
    v = intr.f * (av_v * inv_z + bw_v)
    u[~valid] = 0.0
    v[~valid] = 0.0
    return FlowField(u, v, valid.copy())


def _design_matrix(x, y, inv_z):
    """Stacked 2N x 6 design for flattened sample arrays.

    Row pair per sample: [A/Z | B] against the unknown (v, omega).
    """
    n = x.size
    one = np.ones(n)
    rows_u = np.column_stack([-inv_z, np.zeros(n), x * inv_z,
                              x * y, -(one + x * x), y])
    rows_v = np.column_stack([np.zeros(n), -inv_z, y * inv_z,
                              one + y * y, -x * y, -x])
    design = np.empty((2 * n, 6))
    design[0::2] = rows_u
    design[1::2] = rows_v
    return design


def _solve_design(design, rhs):
    """Solve the stacked system, raising on poor conditioning."""
    if np.linalg.cond(design) > CONDITION_LIMIT:
        raise DegenerateConfigurationError(
            "motion-field system is rank deficient")
    if design.shape[0] == design.shape[1]:
        sol = np.linalg.solve(design, rhs)
    else:
        sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return Twist(sol[:3], sol[3:])


def solve_twist_ls(samples):
    """Least-squares twist from >= 3 motion samples.

    With exactly 3 non-degenerate samples this is the exact 6x6 solve used
    inside RANSAC; larger sets use an orthogonal-factorization fit.
    """
    if len(samples) < 3:
        raise InvalidInputError(f"need at least 3 samples, got {len(samples)}")
    x = np.array([s.point.x for s in samples])
    y = np.array([s.point.y for s in samples])
    inv_z = np.array([1.0 / s.depth for s in samples])
    rhs = np.concatenate([s.flow for s in samples])
    return _solve_design(_design_matrix(x, y, inv_z), rhs)


def disparity_from_flow(rig, t, flow):
    """Per-pixel disparity that best explains the flow under the twist.

    Projects v2 = F - B omega onto v1 = A v / (f b); pixels where v1 is
    negligible or the projected disparity is non-positive are invalid.
    """
    intr = rig.intrinsics
    if (flow.height, flow.width) != (intr.height, intr.width):
        raise InvalidInputError("flow dimensions do not match intrinsics")
    x, y = _pixel_grids(intr)
    av_u, av_v, bw_u, bw_v = _flow_terms(x, y, t)
    fb = intr.f * rig.baseline
    v1_u = av_u / fb
    v1_v = av_v / fb
    v2_u = flow.u / intr.f - bw_u
    v2_v = flow.v / intr.f - bw_v
    den = v1_u * v1_u + v1_v * v1_v
    num = v2_u * v1_u + v2_v * v1_v
    observable = np.sqrt(den) >= EPSILON_V1
    d = np.zeros_like(den)
    np.divide(num, den, out=d, where=observable)
    valid = flow.valid & observable & (d > 0)
    d[~valid] = 0.0
    return DisparityField(d, valid)
