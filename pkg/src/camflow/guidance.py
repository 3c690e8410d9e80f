"""Point-cloud guidance: lift the input frame to 3D, render it along the
camera trajectory into reference frames with hole masks, and classify
camera motion by the final-frame hole ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .camera import CameraPose, Intrinsics, PointCloud, Trajectory, Z_NEAR, unproject

EXTENSIVE = "extensive"
LIMITED = "limited"

# Final-frame hole ratios strictly above this are extensive camera motion.
MOTION_THRESHOLD = 0.35


@dataclass(frozen=True, eq=False)
class GuidanceSequence:
    """Rendered reference frames along a trajectory.

    frames[0] is the input image verbatim and masks[0] is all false; for
    f >= 1, frames[f] is the point cloud splatted at pose f, with holes
    (pixels no point reached) flagged in masks[f] and colored 0.
    """

    frames: np.ndarray  # (N, H, W, 3) float32 in [0, 1]
    masks: np.ndarray  # (N, H, W) bool, true = hole

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float32)
        m = np.asarray(self.masks, dtype=bool)
        if f.ndim != 4 or f.shape[-1] != 3 or m.shape != f.shape[:3]:
            raise ValueError(f"inconsistent guidance shapes {f.shape} / {m.shape}")
        object.__setattr__(self, "frames", f)
        object.__setattr__(self, "masks", m)

    @property
    def mask_ratio_final(self) -> float:
        return float(np.mean(self.masks[-1]))

    def __len__(self) -> int:
        return self.frames.shape[0]


def render_pointcloud(pc: PointCloud, pose: CameraPose, k: Intrinsics,
                      return_depth: bool = False):
    """Z-buffer splat a point cloud; returns (frame, mask) or (frame, mask, depth)."""
    frame, mask, depth = kernels.splat_points(
        pc.positions, pc.colors, pose.rotation, pose.translation,
        k.fx, k.fy, k.cx, k.cy, k.width, k.height, Z_NEAR)
    if return_depth:
        return frame, mask, depth
    return frame, mask


def build_guidance(input_image: np.ndarray, input_depth: np.ndarray,
                   traj: Trajectory, k: Intrinsics) -> GuidanceSequence:
    """Render the lifted input frame at every trajectory pose.

    The depth map must be expressed in traj[0]'s camera. Frame 0 of the
    result is the input image itself (exact), not a render.
    """
    img = np.asarray(input_image, dtype=np.float32)
    if img.shape != (k.height, k.width, 3):
        raise ValueError(f"input image shape {img.shape} does not match intrinsics")
    cloud = unproject(input_depth, traj[0], k, img)
    n = len(traj)
    frames = np.zeros((n, k.height, k.width, 3), dtype=np.float32)
    masks = np.zeros((n, k.height, k.width), dtype=bool)
    frames[0] = img
    for f in range(1, n):
        frames[f], masks[f] = render_pointcloud(cloud, traj[f], k)
    return GuidanceSequence(frames, masks)


def classify_motion(mask_ratio_final: float) -> str:
    """Threshold the final-frame hole ratio into extensive/limited motion."""
    if not 0.0 <= mask_ratio_final <= 1.0:
        raise ValueError(f"mask ratio must be in [0, 1], got {mask_ratio_final}")
    return EXTENSIVE if mask_ratio_final > MOTION_THRESHOLD else LIMITED


def save_ply(pc: PointCloud, path) -> None:
    """Write an ASCII PLY file, one 'x y z r g b' vertex per line (r,g,b in 0..255)."""
    rgb = np.floor(pc.colors.astype(np.float64) * 255.0 + 0.5).astype(np.int64)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pc)}\n")
        for prop in ("x", "y", "z"):
            fh.write(f"property float {prop}\n")
        for prop in ("red", "green", "blue"):
            fh.write(f"property uchar {prop}\n")
        fh.write("end_header\n")
        for (x, y, z), (r, g, b) in zip(pc.positions, rgb):
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r} {r} {g} {b}\n")
