"""Rigid camera poses, pinhole projection, and trajectory interpolation.

Coordinate conventions (fixed for the whole package):

- World and camera frames are right-handed; the camera looks along +z in
  its own frame.
- A pose maps world to camera coordinates: ``x_cam = R @ x_world + t``.
- Image coordinates: u grows to the right, v grows downward, and pixel
  (row r, col c) has its center at continuous coordinates (u, v) = (c, r).
- Depth of a point is its camera-frame z coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

# Camera-frame depths at or below this count as behind the lens.
Z_NEAR = 1e-4

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"[0,{self.width})x[0,{self.height})"
            )


@dataclass(frozen=True, eq=False)
class CameraPose:
    """World-to-camera rigid transform: ``x_cam = rotation @ x_world + translation``."""

    rotation: np.ndarray  # (3, 3), orthonormal, det +1
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"rotation not orthonormal (max |R^T R - I| = {err:.3g})")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation has negative determinant (reflection)")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_rt(cls, rotation, translation, normalize: bool = False) -> "CameraPose":
        """Build a pose, optionally snapping ``rotation`` to the nearest rotation matrix."""
        r = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        if normalize:
            u, _, vt = np.linalg.svd(r)
            r = u @ vt
            if np.linalg.det(r) < 0:
                u[:, -1] *= -1.0
                r = u @ vt
        return cls(r, np.asarray(translation, dtype=np.float64).reshape(3))

    def compose(self, other: "CameraPose") -> "CameraPose":
        """Transform applying ``other`` first, then ``self``."""
        return CameraPose(self.rotation @ other.rotation,
                          self.rotation @ other.translation + self.translation)

    def inverse(self) -> "CameraPose":
        return CameraPose(self.rotation.T, -(self.rotation.T @ self.translation))

    def camera_center(self) -> np.ndarray:
        """Camera origin expressed in world coordinates."""
        return -(self.rotation.T @ self.translation)

    def rotation_angle_to(self, other: "CameraPose") -> float:
        """Relative rotation angle in radians between two poses."""
        rel = self.rotation @ other.rotation.T
        cos = (np.trace(rel) - 1.0) / 2.0
        return float(np.arccos(np.clip(cos, -1.0, 1.0)))

    def allclose(self, other: "CameraPose", atol: float = 1e-6) -> bool:
        return bool(np.allclose(self.rotation, other.rotation, atol=atol)
                    and np.allclose(self.translation, other.translation, atol=atol))

    def to_floats(self) -> np.ndarray:
        """Serialize as 12 float64: row-major rotation, then translation."""
        return np.concatenate([self.rotation.reshape(9), self.translation])

    @classmethod
    def from_floats(cls, values) -> "CameraPose":
        v = np.asarray(values, dtype=np.float64).reshape(12)
        return cls(v[:9].reshape(3, 3), v[9:])


@dataclass(frozen=True)
class Trajectory:
    """Ordered camera path; first pose is the reference view, last the target view."""

    poses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.poses) < 2:
            raise ValueError(f"trajectory needs at least 2 poses, got {len(self.poses)}")

    def __len__(self) -> int:
        return len(self.poses)

    def __getitem__(self, i) -> CameraPose:
        return self.poses[i]


def _quat_from_pose(pose: CameraPose) -> np.ndarray:
    # scipy order (x, y, z, w)
    return Rotation.from_matrix(pose.rotation).as_quat()


def _canonical_pair(q0: np.ndarray, q1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pick the representative of q1 giving the shortest arc from q0.

    At exactly 180 degrees the two arcs tie; the tie is broken by preferring
    the representative with non-negative scalar part (then by the sign of the
    first nonzero component) so interpolation is deterministic.
    """
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        return q0, -q1
    if dot == 0.0:
        w = q1[3]
        if w < 0.0:
            return q0, -q1
        if w == 0.0:
            for c in q1[:3]:
                if c != 0.0:
                    return (q0, q1) if c > 0.0 else (q0, -q1)
    return q0, q1


def _slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    q0, q1 = _canonical_pair(q0, q1)
    dot = min(float(np.dot(q0, q1)), 1.0)
    if dot > 1.0 - 1e-12:
        q = (1.0 - u) * q0 + u * q1  # arcs this short: lerp is exact to fp precision
        return q / np.linalg.norm(q)
    omega = np.arccos(dot)
    s = np.sin(omega)
    return (np.sin((1.0 - u) * omega) * q0 + np.sin(u * omega) * q1) / s


def interpolate_trajectory(start: CameraPose, end: CameraPose, n: int) -> Trajectory:
    """Constant-velocity rigid interpolation between two poses.

    Translations are interpolated linearly and rotations along the geodesic
    (shortest-arc quaternion slerp), giving constant angular velocity. The
    first and last poses are the inputs themselves, bit for bit.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 interpolation steps, got {n}")
    q0, q1 = _quat_from_pose(start), _quat_from_pose(end)
    poses = [start]
    for i in range(1, n - 1):
        u = i / (n - 1)
        rot = Rotation.from_quat(_slerp(q0, q1, u)).as_matrix()
        t = (1.0 - u) * start.translation + u * end.translation
        poses.append(CameraPose(rot, t))
    poses.append(end)
    return Trajectory(tuple(poses))


def project(points: np.ndarray, pose: CameraPose, k: Intrinsics):
    """Project world points through a pinhole camera.

    Returns ``(uv, depth, visible)`` where ``uv`` is (M, 2) continuous pixel
    coordinates, ``depth`` the camera-frame z, and ``visible`` marks points
    with depth > Z_NEAR that project inside [0, width) x [0, height).
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    r, t = pose.rotation, pose.translation
    px, py, pz = p[:, 0], p[:, 1], p[:, 2]
    # Written out per component; the splatting kernels use the same expressions.
    x = ((px * r[0, 0] + py * r[0, 1]) + pz * r[0, 2]) + t[0]
    y = ((px * r[1, 0] + py * r[1, 1]) + pz * r[1, 2]) + t[1]
    z = ((px * r[2, 0] + py * r[2, 1]) + pz * r[2, 2]) + t[2]
    in_front = z > Z_NEAR
    safe_z = np.where(in_front, z, 1.0)
    u = k.cx + k.fx * (x / safe_z)
    v = k.cy + k.fy * (y / safe_z)
    visible = in_front & (u >= 0.0) & (u < k.width) & (v >= 0.0) & (v < k.height)
    return np.stack([u, v], axis=1), z, visible


@dataclass(frozen=True, eq=False)
class PointCloud:
    """World-space points with per-point RGB colors in [0, 1]."""

    positions: np.ndarray  # (M, 3) float64
    colors: np.ndarray  # (M, 3) float32

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        col = np.ascontiguousarray(self.colors, dtype=np.float32).reshape(-1, 3)
        if pos.shape[0] != col.shape[0]:
            raise ValueError(f"{pos.shape[0]} positions vs {col.shape[0]} colors")
        if not np.isfinite(pos).all():
            raise ValueError("point positions contain non-finite values")
        if col.size and (col.min() < 0.0 or col.max() > 1.0):
            raise ValueError("point colors must lie in [0, 1]")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)

    def __len__(self) -> int:
        return self.positions.shape[0]


def unproject(depth_map: np.ndarray, pose: CameraPose, k: Intrinsics,
              colors: np.ndarray) -> PointCloud:
    """Lift a depth map to a world-space point cloud, one point per valid pixel.

    Pixels with non-positive depth are sentinels and are skipped. Points are
    emitted in row-major pixel order.
    """
    d = np.asarray(depth_map, dtype=np.float64)
    img = np.asarray(colors, dtype=np.float32)
    if d.shape != (k.height, k.width):
        raise ValueError(f"depth map shape {d.shape} does not match intrinsics "
                         f"({k.height}, {k.width})")
    if img.shape != (k.height, k.width, 3):
        raise ValueError(f"color image shape {img.shape} does not match intrinsics")
    rows, cols = np.nonzero(d > 0.0)
    z = d[rows, cols]
    x = (cols - k.cx) / k.fx * z
    y = (rows - k.cy) / k.fy * z
    cam = np.stack([x, y, z], axis=1)
    world = (cam - pose.translation) @ pose.rotation  # == R^T (cam - t), row-wise
    return PointCloud(world, img[rows, cols])
