"""Robust egomotion estimation from dense optical flow and stereo disparity.

The pipeline: dense flow and disparity fields go into a 3-point RANSAC
over the rigid motion-field model, producing a per-frame twist and an
inlier mask; the twist drives flow<->disparity conversions, refinement
photometric losses, trajectory integration, and standard odometry / flow
/ depth metrics.
"""

from .exceptions import (DegenerateConfigurationError, DegenerateScaleError,
                         EgoflowError, EstimationFailedError, FormatError,
                         InsufficientDataError, InvalidInputError)
from .fields import (DisparityField, FlowField, InlierMask, ScalarImage,
                     WarpField)
from .geometry import (CameraIntrinsics, NormalizedPoint, SE3Pose, StereoRig,
                       Twist, denormalize_point, depth_to_disparity,
                       disparity_to_depth, motion_matrices, normalize_pixel,
                       twist_exp)
from .motion_field import (MotionSample, disparity_from_flow,
                           predict_flow_field, predict_flow_point,
                           solve_twist_ls)
from .ransac import (PoseEstimate, RansacConfig, estimate_pose_ransac,
                     score_inliers)
from .losses import (LossConfig, RefinementLosses, appearance_loss,
                     charbonnier, consistency_loss, multi_warp_total_loss,
                     occlusion_mask, photometric_loss, refinement_losses,
                     smoothness_loss, ssim_map, total_warp_loss,
                     total_warp_loss_components, warp_image)
from .synthetic import (SceneConfig, SceneImages, SyntheticScene, generate,
                        invert_flow_field, perturb)
from .evaluation import (DepthErrors, FlowErrors, OdometryErrors, Trajectory,
                         depth_errors, flow_errors, integrate_trajectory,
                         kitti_odometry_errors, scale_align)
from .fileio import (atomic_write_bytes, atomic_write_text, read_calibration,
                     read_disparity, read_disparity_text, read_flow,
                     read_flow_text, read_image, read_mask, read_poses,
                     write_calibration, write_disparity, write_disparity_text,
                     write_flow, write_flow_text, write_image, write_mask,
                     write_poses)

__version__ = "0.1.0"
