"""Command-line surface for the estimation pipeline.

Exit codes: 0 success, 1 usage error, 2 data error, 3 estimation failure.
All emitted numbers use fixed 9-significant-digit formatting so output is
byte-stable across runs, locales, and thread counts.
"""

import argparse
import os
import sys

import cv2
import numpy as np

from . import evaluation, fileio, losses, ransac, synthetic
from .exceptions import (DegenerateConfigurationError, DegenerateScaleError,
                         EstimationFailedError, FormatError,
                         InsufficientDataError, InvalidInputError)
from .fields import InlierMask, ScalarImage, WarpField
from .geometry import Twist
from .motion_field import disparity_from_flow, predict_flow_field

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ESTIMATION = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _fmt(x):
    return f"{float(x):.9g}"


def _print_kv(key, value):
    if isinstance(value, (int, np.integer)):
        print(f"{key}={int(value)}")
    else:
        print(f"{key}={_fmt(value)}")


def _parse_twist(values):
    return Twist(np.array(values[:3], dtype=float),
                 np.array(values[3:], dtype=float))


def _add_twist_arg(p):
    p.add_argument("--twist", type=float, nargs=6, required=True,
                   metavar=("VX", "VY", "VZ", "WX", "WY", "WZ"),
                   help="linear (m) and angular (rad) displacement")


def _maybe_resize(img, spec):
    if spec is None:
        return img
    h, w = spec
    out = cv2.resize(img.intensity, (w, h), interpolation=cv2.INTER_LINEAR)
    return ScalarImage(np.clip(out, 0.0, 1.0))


def _parse_resize(text):
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(
            "resize must look like HEIGHTxWIDTH, e.g. 128x448")


def _ransac_args(p):
    p.add_argument("--ransac-iters", type=int, default=100)
    p.add_argument("--inlier-threshold", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-inliers", type=int, default=6)
    p.add_argument("--no-refit", action="store_true")
    p.add_argument("--residual-norm", choices=["l2", "linf"], default="l2")


def _build_parser():
    p = _Parser(prog="egoflow",
                description="Robust egomotion from dense flow and disparity")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="RANSAC twist from flow + disparity")
    e.add_argument("--flow", required=True)
    e.add_argument("--disparity", required=True)
    e.add_argument("--calib", required=True)
    e.add_argument("--mask-out", help="write the inlier mask as 8-bit PNG")
    _ransac_args(e)

    pf = sub.add_parser("predict-flow", help="flow from disparity + twist")
    pf.add_argument("--disparity", required=True)
    pf.add_argument("--calib", required=True)
    pf.add_argument("--out", required=True)
    _add_twist_arg(pf)

    df = sub.add_parser("disparity-from-flow",
                        help="disparity from flow + twist")
    df.add_argument("--flow", required=True)
    df.add_argument("--calib", required=True)
    df.add_argument("--out", required=True)
    _add_twist_arg(df)

    lo = sub.add_parser("losses", help="unsupervised loss components")
    lo.add_argument("--image-i", required=True)
    lo.add_argument("--image-j", required=True)
    lo.add_argument("--flow", required=True, help="forward warp field")
    lo.add_argument("--flow-bwd", help="backward warp for the consistency term")
    lo.add_argument("--resize", type=_parse_resize,
                    help="bilinear resize of image inputs, HEIGHTxWIDTH")
    lo.add_argument("--alpha", type=float, default=0.85)
    lo.add_argument("--lambda1", type=float, default=1.0)
    lo.add_argument("--lambda2", type=float, default=0.1)
    lo.add_argument("--epsilon", type=float, default=1e-3)
    lo.add_argument("--ssim-similarity", action="store_true",
                    help="use the raw SSIM value instead of (1-SSIM)/2")
    lo.add_argument("--maps-dir", help="also write per-pixel maps as PNGs")

    sy = sub.add_parser("synth", help="generate a synthetic scene")
    sy.add_argument("--out-dir", required=True)
    sy.add_argument("--calib", help="calibration file; default built-in rig")
    sy.add_argument("--width", type=int, default=64)
    sy.add_argument("--height", type=int, default=64)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--objects", type=int, default=0)
    sy.add_argument("--noise-flow", type=float, default=0.0)
    sy.add_argument("--noise-disp", type=float, default=0.0)
    sy.add_argument("--outlier-fraction", type=float, default=0.0)
    sy.add_argument("--images", action="store_true")

    eo = sub.add_parser("eval-odometry", help="relative drift metrics")
    eo.add_argument("--pred", required=True)
    eo.add_argument("--gt", required=True)
    eo.add_argument("--align-scale", action="store_true")
    eo.add_argument("--plot-data", help="write 'frame x y z' lines per trajectory")

    ef = sub.add_parser("eval-flow", help="EPE and outlier percentage")
    ef.add_argument("--pred", required=True)
    ef.add_argument("--gt", required=True)
    ef.add_argument("--noc-mask")
    ef.add_argument("--inlier-mask")

    ed = sub.add_parser("eval-depth", help="depth error suite from disparities")
    ed.add_argument("--pred", required=True, help="predicted disparity PNG")
    ed.add_argument("--gt", required=True, help="ground-truth disparity PNG")
    ed.add_argument("--calib", required=True)
    ed.add_argument("--cap", type=float, default=50.0)
    ed.add_argument("--crop", type=int, nargs=4,
                    metavar=("ROW0", "ROW1", "COL0", "COL1"))
    ed.add_argument("--inlier-mask")

    rs = sub.add_parser("run-sequence",
                        help="per-frame estimates -> pose file")
    rs.add_argument("--flow-dir", required=True)
    rs.add_argument("--disp-dir", required=True)
    rs.add_argument("--calib", required=True)
    rs.add_argument("--out", required=True)
    _ransac_args(rs)
    return p


def _ransac_config(args):
    return ransac.RansacConfig(iterations=args.ransac_iters,
                               threshold_px=args.inlier_threshold,
                               seed=args.seed,
                               min_inliers=args.min_inliers,
                               refit=not args.no_refit,
                               residual_norm=args.residual_norm)


def _cmd_estimate(args):
    rig = fileio.read_calibration(args.calib)
    flow = fileio.read_flow(args.flow)
    disp = fileio.read_disparity(args.disparity)
    est = ransac.estimate_pose_ransac(rig, flow, disp, _ransac_config(args))
    for k, val in zip(("vx", "vy", "vz"), est.twist.v):
        _print_kv(k, val)
    for k, val in zip(("wx", "wy", "wz"), est.twist.omega):
        _print_kv(k, val)
    _print_kv("inlier_count", est.inlier_count)
    _print_kv("inlier_fraction", est.inlier_fraction)
    _print_kv("mean_residual_px", est.mean_residual_px)
    if args.mask_out:
        fileio.write_mask(args.mask_out, est.mask.inlier)


def _cmd_predict_flow(args):
    rig = fileio.read_calibration(args.calib)
    disp = fileio.read_disparity(args.disparity)
    flow = predict_flow_field(rig, _parse_twist(args.twist), disp)
    fileio.write_flow(args.out, flow)


def _cmd_disparity_from_flow(args):
    rig = fileio.read_calibration(args.calib)
    flow = fileio.read_flow(args.flow)
    disp = disparity_from_flow(rig, _parse_twist(args.twist), flow)
    fileio.write_disparity(args.out, disp)


def _cmd_losses(args):
    cfg = losses.LossConfig(epsilon=args.epsilon, alpha=args.alpha,
                            lambda1=args.lambda1, lambda2=args.lambda2,
                            ssim_dissimilarity=not args.ssim_similarity)
    img_i = _maybe_resize(fileio.read_image(args.image_i), args.resize)
    img_j = _maybe_resize(fileio.read_image(args.image_j), args.resize)
    w_fwd = WarpField.from_flow(fileio.read_flow(args.flow))
    if args.flow_bwd:
        w_bwd = WarpField.from_flow(fileio.read_flow(args.flow_bwd))
    else:
        w_bwd = WarpField(np.zeros_like(w_fwd.du), np.zeros_like(w_fwd.dv))
    comp = losses.total_warp_loss_components(img_i, img_j, w_fwd, w_bwd, cfg)
    m = comp["occlusion"].astype(float)
    photo = losses.photometric_loss(img_i, img_j, w_fwd, cfg)
    _print_kv("photometric", losses._ksum(m * photo))
    _print_kv("appearance", losses._ksum(m * comp["appearance"]))
    if args.flow_bwd:
        _print_kv("consistency", losses._ksum(m * comp["consistency"]))
    _print_kv("smoothness", losses._ksum(comp["smoothness"]))
    _print_kv("occlusion_count", int(m.sum()))
    total = losses.total_warp_loss(img_i, img_j, w_fwd, w_bwd, cfg)
    if not args.flow_bwd:
        total -= cfg.lambda1 * losses._ksum(m * comp["consistency"])
    _print_kv("total", total)
    if args.maps_dir:
        os.makedirs(args.maps_dir, exist_ok=True)
        for name in ("appearance", "consistency", "smoothness"):
            arr = comp[name]
            scale = arr.max() if arr.max() > 0 else 1.0
            img = ScalarImage(np.clip(arr / scale, 0.0, 1.0))
            fileio.write_image(os.path.join(args.maps_dir, f"{name}.png"), img)
        fileio.write_mask(os.path.join(args.maps_dir, "occlusion.png"),
                          comp["occlusion"])


def _default_rig(width, height):
    from .geometry import CameraIntrinsics, StereoRig
    intr = CameraIntrinsics(f=0.9 * max(width, height),
                            cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                            width=width, height=height)
    return StereoRig(intrinsics=intr, baseline=0.5)


def _cmd_synth(args):
    if args.calib:
        rig = fileio.read_calibration(args.calib)
    else:
        rig = _default_rig(args.width, args.height)
    cfg = synthetic.SceneConfig(rig=rig, seed=args.seed,
                                object_count=args.objects,
                                noise_sigma_flow=args.noise_flow,
                                noise_sigma_disp=args.noise_disp,
                                outlier_fraction=args.outlier_fraction,
                                with_images=args.images)
    scene = synthetic.generate(cfg)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    fileio.write_flow(os.path.join(out, "flow.png"), scene.flow_gt)
    fileio.write_disparity(os.path.join(out, "disparity.png"),
                           scene.disparity_gt)
    fileio.write_mask(os.path.join(out, "object_mask.png"), scene.object_mask)
    fileio.write_calibration(os.path.join(out, "calib.txt"), rig)
    if scene.images is not None:
        fileio.write_image(os.path.join(out, "left_t0.png"), scene.images.left_t0)
        fileio.write_image(os.path.join(out, "left_t1.png"), scene.images.left_t1)
        fileio.write_image(os.path.join(out, "right_t0.png"), scene.images.right_t0)
        fileio.write_image(os.path.join(out, "right_t1.png"), scene.images.right_t1)
    meta = [f"seed={args.seed}",
            "twist_v=" + " ".join(_fmt(x) for x in scene.twist_gt.v),
            "twist_omega=" + " ".join(_fmt(x) for x in scene.twist_gt.omega),
            f"objects={args.objects}",
            f"noise_flow={_fmt(args.noise_flow)}",
            f"noise_disp={_fmt(args.noise_disp)}",
            f"outlier_fraction={_fmt(args.outlier_fraction)}"]
    fileio.atomic_write_text(os.path.join(out, "metadata.txt"),
                             "\n".join(meta) + "\n")


def _cmd_eval_odometry(args):
    pred = fileio.read_poses(args.pred)
    gt = fileio.read_poses(args.gt)
    if args.align_scale:
        s, pred = evaluation.scale_align(pred, gt)
        _print_kv("scale", s)
    errs = evaluation.kitti_odometry_errors(pred, gt)
    _print_kv("t_rel_pct", errs.t_rel)
    _print_kv("r_rel_deg_per_100m", errs.r_rel)
    for length in sorted(errs.per_length):
        t, r = errs.per_length[length]
        _print_kv(f"t_rel_pct_{length}m", t)
        _print_kv(f"r_rel_deg_per_100m_{length}m", r)
    if args.plot_data:
        lines = []
        for i, p in enumerate(pred.poses):
            x, y, z = p.translation
            lines.append(f"{i} {_fmt(x)} {_fmt(y)} {_fmt(z)}")
        fileio.atomic_write_text(args.plot_data, "\n".join(lines) + "\n")


def _cmd_eval_flow(args):
    pred = fileio.read_flow(args.pred)
    gt = fileio.read_flow(args.gt)
    noc = fileio.read_mask(args.noc_mask) if args.noc_mask else None
    extra = fileio.read_mask(args.inlier_mask) if args.inlier_mask else None
    errs = evaluation.flow_errors(pred, gt, noc_mask=noc, extra_mask=extra)
    _print_kv("epe_noc", errs.epe_noc)
    _print_kv("epe_all", errs.epe_all)
    _print_kv("outlier_pct_noc", errs.outlier_pct_noc)
    _print_kv("outlier_pct_all", errs.outlier_pct_all)


def _cmd_eval_depth(args):
    rig = fileio.read_calibration(args.calib)
    fb = rig.intrinsics.f * rig.baseline
    pred = fileio.read_disparity(args.pred)
    gt = fileio.read_disparity(args.gt)
    pred_z = np.where(pred.valid, fb / np.where(pred.valid, pred.d, 1.0), 0.0)
    gt_z = np.where(gt.valid, fb / np.where(gt.valid, gt.d, 1.0), 0.0)
    mask = fileio.read_mask(args.inlier_mask) if args.inlier_mask else None
    crop = tuple(args.crop) if args.crop else None
    errs = evaluation.depth_errors(pred_z, gt_z, cap=args.cap, crop=crop,
                                   mask=mask)
    _print_kv("rmse", errs.rmse)
    _print_kv("rmse_log", errs.rmse_log)
    _print_kv("abs_rel", errs.abs_rel)
    _print_kv("sq_rel", errs.sq_rel)
    _print_kv("delta1", errs.delta1)
    _print_kv("delta2", errs.delta2)
    _print_kv("delta3", errs.delta3)


def _cmd_run_sequence(args):
    rig = fileio.read_calibration(args.calib)
    flows = sorted(f for f in os.listdir(args.flow_dir) if f.endswith(".png"))
    disps = sorted(f for f in os.listdir(args.disp_dir) if f.endswith(".png"))
    if len(flows) != len(disps):
        raise InvalidInputError(
            f"{len(flows)} flow files but {len(disps)} disparity files")
    if not flows:
        raise InvalidInputError("no input frames found")
    cfg = _ransac_config(args)
    twists = []
    for fname, dname in zip(flows, disps):
        flow = fileio.read_flow(os.path.join(args.flow_dir, fname))
        disp = fileio.read_disparity(os.path.join(args.disp_dir, dname))
        est = ransac.estimate_pose_ransac(rig, flow, disp, cfg)
        twists.append(est.twist)
    traj = evaluation.integrate_trajectory(twists)
    fileio.write_poses(args.out, traj)
    _print_kv("frames", len(twists))


_COMMANDS = {
    "estimate": _cmd_estimate,
    "predict-flow": _cmd_predict_flow,
    "disparity-from-flow": _cmd_disparity_from_flow,
    "losses": _cmd_losses,
    "synth": _cmd_synth,
    "eval-odometry": _cmd_eval_odometry,
    "eval-flow": _cmd_eval_flow,
    "eval-depth": _cmd_eval_depth,
    "run-sequence": _cmd_run_sequence,
}


def cli_main(argv=None):
    # Honored for interface compatibility; the compute modules are
    # vectorized and give identical results at any thread count.
    os.environ.setdefault("EGOFLOW_THREADS", "1")
    args = _build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except FileNotFoundError as e:
        print(f"error: missing file: {e.filename or e}", file=sys.stderr)
        return EXIT_DATA
    except (FormatError, InvalidInputError, InsufficientDataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (EstimationFailedError, DegenerateConfigurationError,
            DegenerateScaleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
