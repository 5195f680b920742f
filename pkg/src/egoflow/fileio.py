"""Interchange codecs: 16-bit PNG fields, pose/calibration text, plain-text
fields, plus atomic file writes.

Flow PNG: 3-channel 16-bit, channels (u_enc, v_enc, valid) with
u = (u_enc - 2^15)/64. Disparity PNG: 1-channel 16-bit, d = d_enc/256,
d_enc = 0 meaning invalid. Both codecs are exact inverses on their
quantization lattice.
"""

import os
import struct
import tempfile

import cv2
import numpy as np

from .exceptions import FormatError, InvalidInputError
from .fields import DisparityField, FlowField, InlierMask, ScalarImage
from .geometry import CameraIntrinsics, SE3Pose, StereoRig
from .evaluation import Trajectory

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def atomic_write_bytes(path, data):
    """Write-temp-then-rename so readers never see a partial file."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".egoflow-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode())


def _check_png_header(data, bit_depth, color_type):
    """Validate the IHDR fields before handing bytes to the decoder."""
    if len(data) < 26 or data[:8] != _PNG_SIG:
        raise FormatError("not a PNG file", offset=0)
    if data[12:16] != b"IHDR":
        raise FormatError("first chunk is not IHDR", offset=12)
    depth = data[24]
    ctype = data[25]
    if depth != bit_depth:
        raise FormatError(f"expected bit depth {bit_depth}, found {depth}",
                          offset=24)
    if ctype != color_type:
        raise FormatError(f"expected color type {color_type}, found {ctype}",
                          offset=25)


def _decode_png(data):
    img = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError("PNG decode failed", offset=0)
    return img


def _encode_png(img):
    ok, buf = cv2.imencode(".png", img)
    if not ok:
        raise InvalidInputError("PNG encode failed")
    return buf.tobytes()


def write_flow(path, flow):
    u_enc = np.round(flow.u * 64.0) + 32768.0
    v_enc = np.round(flow.v * 64.0) + 32768.0
    if np.any((u_enc < 0) | (u_enc > 65535) | (v_enc < 0) | (v_enc > 65535)):
        raise InvalidInputError("flow exceeds the encodable range [-512, 511.98] px")
    u_enc = u_enc.astype(np.uint16)
    v_enc = v_enc.astype(np.uint16)
    invalid = ~flow.valid
    u_enc[invalid] = 32768
    v_enc[invalid] = 32768
    valid = flow.valid.astype(np.uint16)
    rgb = np.dstack([u_enc, v_enc, valid])
    atomic_write_bytes(path, _encode_png(rgb[:, :, ::-1]))  # encoder wants BGR


def read_flow(path):
    with open(path, "rb") as fh:
        data = fh.read()
    _check_png_header(data, bit_depth=16, color_type=2)  # 16-bit RGB
    img = _decode_png(data)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint16:
        raise FormatError("flow PNG must be 3-channel 16-bit", offset=24)
    rgb = img[:, :, ::-1]
    valid = rgb[:, :, 2] > 0
    u = (rgb[:, :, 0].astype(float) - 32768.0) / 64.0
    v = (rgb[:, :, 1].astype(float) - 32768.0) / 64.0
    u[~valid] = 0.0
    v[~valid] = 0.0
    return FlowField(u, v, valid)


def write_disparity(path, disp):
    enc = np.round(disp.d * 256.0)
    if np.any(enc[disp.valid] < 1) or np.any(enc > 65535):
        raise InvalidInputError(
            "disparity exceeds the encodable range (0, 255.996] px")
    enc = enc.astype(np.uint16)
    enc[~disp.valid] = 0
    atomic_write_bytes(path, _encode_png(enc))


def read_disparity(path):
    with open(path, "rb") as fh:
        data = fh.read()
    _check_png_header(data, bit_depth=16, color_type=0)  # 16-bit gray
    img = _decode_png(data)
    if img.ndim != 2 or img.dtype != np.uint16:
        raise FormatError("disparity PNG must be 1-channel 16-bit", offset=24)
    valid = img > 0
    d = img.astype(float) / 256.0
    return DisparityField(d, valid)


def write_mask(path, mask):
    m = np.asarray(mask, dtype=bool)
    atomic_write_bytes(path, _encode_png((m * np.uint8(255))))


def read_mask(path):
    with open(path, "rb") as fh:
        data = fh.read()
    _check_png_header(data, bit_depth=8, color_type=0)
    img = _decode_png(data)
    if img.ndim != 2:
        raise FormatError("mask PNG must be 1-channel", offset=25)
    return img > 127


def write_image(path, img):
    enc = np.round(img.intensity * 65535.0).astype(np.uint16)
    atomic_write_bytes(path, _encode_png(enc))


def read_image(path):
    with open(path, "rb") as fh:
        data = fh.read()
    _check_png_header(data, bit_depth=16, color_type=0)
    img = _decode_png(data)
    if img.ndim != 2 or img.dtype != np.uint16:
        raise FormatError("image PNG must be 1-channel 16-bit", offset=24)
    return ScalarImage(img.astype(float) / 65535.0)


def read_calibration(path):
    """One line: f cx cy width height baseline."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) != 6:
        raise FormatError(
            f"calibration needs 6 values (f cx cy width height baseline), "
            f"found {len(tokens)}")
    try:
        f, cx, cy, w, h, b = (float(t) for t in tokens)
    except ValueError as e:
        raise FormatError(f"calibration parse error: {e}") from e
    intr = CameraIntrinsics(f=f, cx=cx, cy=cy, width=int(w), height=int(h))
    return StereoRig(intrinsics=intr, baseline=b)


def write_calibration(path, rig):
    i = rig.intrinsics
    atomic_write_text(path, f"{i.f:.17g} {i.cx:.17g} {i.cy:.17g} "
                            f"{i.width} {i.height} {rig.baseline:.17g}\n")


def _orthonormalize(R):
    u, _, vh = np.linalg.svd(R)
    out = u @ vh
    if np.linalg.det(out) < 0:
        u[:, -1] = -u[:, -1]
        out = u @ vh
    return out


def read_poses(path):
    """Pose file: 12 numbers per line, row-major 3x4 [R | t].

    Rotations must be orthonormal within 1e-6 and are re-orthonormalized
    on load.
    """
    poses = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != 12:
                raise FormatError(
                    f"line {lineno}: expected 12 values, found {len(vals)}")
            try:
                m = np.array([float(v) for v in vals]).reshape(3, 4)
            except ValueError as e:
                raise FormatError(f"line {lineno}: {e}") from e
            R = m[:, :3]
            if np.abs(R.T @ R - np.eye(3)).max() > 1e-6:
                raise FormatError(f"line {lineno}: rotation is not orthonormal")
            poses.append(SE3Pose(_orthonormalize(R), m[:, 3]))
    if not poses:
        raise FormatError("pose file is empty")
    return Trajectory(poses)


def write_poses(path, traj):
    lines = []
    for p in traj.poses:
        m = np.hstack([p.rotation, p.translation[:, None]])
        lines.append(" ".join(f"{v:.17g}" for v in m.ravel()))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_flow_text(path, flow):
    """Debug escape hatch: header then row-major `u v valid` triples."""
    lines = [f"flow {flow.width} {flow.height}"]
    for r in range(flow.height):
        lines.append(" ".join(
            f"{flow.u[r, c]:.17g} {flow.v[r, c]:.17g} {int(flow.valid[r, c])}"
            for c in range(flow.width)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_flow_text(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "flow":
            raise FormatError("expected 'flow <width> <height>' header")
        w, h = int(header[1]), int(header[2])
        u = np.zeros((h, w))
        v = np.zeros((h, w))
        valid = np.zeros((h, w), dtype=bool)
        for r in range(h):
            vals = fh.readline().split()
            if len(vals) != 3 * w:
                raise FormatError(f"row {r}: expected {3 * w} values")
            row = np.array([float(x) for x in vals]).reshape(w, 3)
            u[r] = row[:, 0]
            v[r] = row[:, 1]
            valid[r] = row[:, 2] != 0
    return FlowField(u, v, valid)


def write_disparity_text(path, disp):
    lines = [f"disp {disp.width} {disp.height}"]
    for r in range(disp.height):
        lines.append(" ".join(
            f"{disp.d[r, c]:.17g} {int(disp.valid[r, c])}"
            for c in range(disp.width)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_disparity_text(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "disp":
            raise FormatError("expected 'disp <width> <height>' header")
        w, h = int(header[1]), int(header[2])
        d = np.zeros((h, w))
        valid = np.zeros((h, w), dtype=bool)
        for r in range(h):
            vals = fh.readline().split()
            if len(vals) != 2 * w:
                raise FormatError(f"row {r}: expected {2 * w} values")
            row = np.array([float(x) for x in vals]).reshape(w, 2)
            d[r] = row[:, 0]
            valid[r] = row[:, 1] != 0
    return DisparityField(d, valid)
