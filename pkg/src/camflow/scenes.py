"""Procedural synthetic RGB-D clips with exact ground-truth geometry.

A scene is a handful of flat-colored analytic primitives (spheres and
axis-aligned boxes) inside a large room box, ray-cast at 64x64 by default.
Colors sit on the 255 grid so PNG round trips are lossless. Everything is a
pure function of the seed.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np

from . import images, kernels
from .camera import CameraPose, Intrinsics, Trajectory, Z_NEAR

# Scene-generation and motion-magnitude RNG substreams.
_SCENE_STREAM = 0
_MOTION_STREAM = 1

CAMERA_DISTANCE = 6.0  # reference camera sits at (0, 0, -CAMERA_DISTANCE)
ROOM_HALF = 10.0

PROFILES = ("dolly", "orbit", "truck", "mixed")

DEPTH_SENTINEL = -1.0


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    color: tuple  # RGB in [0, 1], on the 255 grid


@dataclass(frozen=True)
class Box:
    center: tuple
    size: tuple  # full edge lengths
    color: tuple


@dataclass(frozen=True)
class Scene:
    primitives: tuple
    background_color: tuple

    def __post_init__(self):
        if len(self.primitives) < 1:
            raise ValueError("scene needs at least one primitive")
        for p in self.primitives:
            if np.linalg.norm(p.center) > 10.0:
                raise ValueError(f"primitive center {p.center} outside bounded region")


def default_intrinsics(width: int = 64, height: int = 64) -> Intrinsics:
    return Intrinsics(fx=float(width), fy=float(width), cx=width / 2.0,
                      cy=height / 2.0, width=width, height=height)


def reference_pose() -> CameraPose:
    """Canonical first pose: camera on the -z axis looking at the origin."""
    return CameraPose(np.eye(3), np.array([0.0, 0.0, CAMERA_DISTANCE]))


def _distinct_grid_colors(rng: np.random.Generator, n: int) -> list:
    seen = set()
    out = []
    while len(out) < n:
        c = tuple(int(v) for v in rng.integers(0, 256, size=3))
        if c in seen:
            continue
        seen.add(c)
        out.append(tuple(v / 255.0 for v in c))
    return out


def generate_scene(seed: int) -> Scene:
    """Deterministic scene with 3-8 distinctly colored primitives (room included)."""
    rng = np.random.default_rng([int(seed), _SCENE_STREAM])
    total = int(rng.integers(3, 9))
    colors = _distinct_grid_colors(rng, total + 1)  # last one is the background
    prims = []
    for i in range(total - 1):
        kind = int(rng.integers(0, 2))
        center = (float(rng.uniform(-2.6, 2.6)), float(rng.uniform(-2.2, 2.2)),
                  float(rng.uniform(-1.5, 3.0)))
        if kind == 0:
            prims.append(Sphere(center, float(rng.uniform(0.5, 1.2)), colors[i]))
        else:
            size = tuple(float(rng.uniform(0.7, 2.2)) for _ in range(3))
            prims.append(Box(center, size, colors[i]))
    room = Box((0.0, 0.0, 0.0), (2 * ROOM_HALF,) * 3, colors[total - 1])
    prims.append(room)
    return Scene(tuple(prims), colors[total])


def _pack_scene(scene: Scene):
    spheres = [p for p in scene.primitives if isinstance(p, Sphere)]
    boxes = [p for p in scene.primitives if isinstance(p, Box)]
    sphere_geom = np.array([[*s.center, s.radius] for s in spheres],
                           dtype=np.float64).reshape(-1, 4)
    sphere_rgb = np.array([s.color for s in spheres], dtype=np.float32).reshape(-1, 3)
    centers = np.array([b.center for b in boxes], dtype=np.float64).reshape(-1, 3)
    sizes = np.array([b.size for b in boxes], dtype=np.float64).reshape(-1, 3)
    box_min = centers - sizes / 2.0
    box_max = centers + sizes / 2.0
    box_rgb = np.array([b.color for b in boxes], dtype=np.float32).reshape(-1, 3)
    bg = np.asarray(scene.background_color, dtype=np.float32)
    return sphere_geom, sphere_rgb, box_min, box_max, box_rgb, bg


def raycast_render(scene: Scene, pose: CameraPose, k: Intrinsics):
    """Exact per-pixel nearest-intersection render: (frame, depth), sentinel -1."""
    packed = _pack_scene(scene)
    return kernels.raycast_frame(pose.rotation, pose.translation,
                                 k.fx, k.fy, k.cx, k.cy, k.width, k.height,
                                 *packed, Z_NEAR)


def _rot_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _profile_pose(profile: str, u: float, dolly: float, truck: float,
                  orbit_rad: float) -> CameraPose:
    """Pose at path fraction u in [0, 1] for the given motion profile."""
    if u == 0.0:
        return reference_pose()
    rot = np.eye(3)
    t = np.array([0.0, 0.0, CAMERA_DISTANCE])
    if profile in ("orbit", "mixed"):
        rot = _rot_y(-orbit_rad * u)
    if profile in ("dolly", "mixed"):
        t[2] -= dolly * u
    if profile in ("truck", "mixed"):
        t[0] -= truck * u
    return CameraPose(rot, t)


def _draw_magnitudes(rng: np.random.Generator, profile: str):
    sign = float(rng.choice((-1.0, 1.0)))
    if profile == "dolly":
        return float(rng.uniform(1.2, 3.6)) * sign, 0.0, 0.0
    if profile == "truck":
        return 0.0, float(rng.uniform(1.0, 3.0)) * sign, 0.0
    if profile == "orbit":
        return 0.0, 0.0, float(np.deg2rad(rng.uniform(8.0, 45.0))) * sign
    # mixed
    return (float(rng.uniform(-1.5, 2.5)), float(rng.uniform(-2.0, 2.0)),
            float(np.deg2rad(rng.uniform(-28.0, 28.0))))


@dataclass(frozen=True, eq=False)
class Clip:
    """Ray-cast ground-truth video: frames, exact depths, and the camera path."""

    frames: np.ndarray  # (T, H, W, 3) float32
    depths: np.ndarray  # (T, H, W) float32, -1 where no hit
    trajectory: Trajectory
    intrinsics: Intrinsics
    seed: int
    profile: str

    def __len__(self) -> int:
        return self.frames.shape[0]


def generate_clip(seed: int, t_frames: int, profile: str,
                  k: Intrinsics | None = None, magnitude=None) -> Clip:
    """Render a clip along a seed-derived motion path.

    ``magnitude`` overrides the seed-derived (dolly, truck, orbit_radians)
    triple; a scalar applies to the profile's own axis.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown motion profile {profile!r}; choose from {PROFILES}")
    if t_frames < 2:
        raise ValueError(f"clip needs at least 2 frames, got {t_frames}")
    k = k or default_intrinsics()
    scene = generate_scene(seed)
    rng = np.random.default_rng([int(seed), _MOTION_STREAM])
    dolly, truck, orbit = _draw_magnitudes(rng, profile)
    if magnitude is not None:
        if np.isscalar(magnitude):
            dolly = magnitude if profile == "dolly" else 0.0
            truck = magnitude if profile == "truck" else 0.0
            orbit = magnitude if profile == "orbit" else 0.0
            if profile == "mixed":
                dolly = truck = orbit = float(magnitude)
        else:
            dolly, truck, orbit = (float(v) for v in magnitude)
    poses = [_profile_pose(profile, i / (t_frames - 1), dolly, truck, orbit)
             for i in range(t_frames)]
    frames = np.zeros((t_frames, k.height, k.width, 3), dtype=np.float32)
    depths = np.zeros((t_frames, k.height, k.width), dtype=np.float32)
    for i, pose in enumerate(poses):
        frames[i], depths[i] = raycast_render(scene, pose, k)
    return Clip(frames, depths, Trajectory(tuple(poses)), k, int(seed), profile)


# ---------------------------------------------------------------------------
# Dataset container: one directory per clip with
#   meta            key=value text (seed, frames, profile, intrinsics)
#   poses.bin       T x 12 little-endian float64 (row-major rotation, translation)
#   depths.bin      T x H x W little-endian float32, -1 sentinel
#   frames/%04d.png RGB renders
# ---------------------------------------------------------------------------

def save_clip(clip: Clip, clip_dir) -> None:
    os.makedirs(clip_dir, exist_ok=True)
    k = clip.intrinsics
    meta = (f"seed={clip.seed}\nframes={len(clip)}\nprofile={clip.profile}\n"
            f"fx={k.fx!r}\nfy={k.fy!r}\ncx={k.cx!r}\ncy={k.cy!r}\n"
            f"width={k.width}\nheight={k.height}\n")
    with open(os.path.join(clip_dir, "meta"), "w", encoding="utf-8") as fh:
        fh.write(meta)
    poses = np.stack([p.to_floats() for p in clip.trajectory.poses])
    poses.astype("<f8").tofile(os.path.join(clip_dir, "poses.bin"))
    clip.depths.astype("<f4").tofile(os.path.join(clip_dir, "depths.bin"))
    frame_dir = os.path.join(clip_dir, "frames")
    os.makedirs(frame_dir, exist_ok=True)
    for i in range(len(clip)):
        images.save_image(clip.frames[i], os.path.join(frame_dir, f"{i:04d}.png"))


def parse_meta(text: str) -> dict:
    meta = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    return meta


def load_clip(clip_dir) -> Clip:
    with open(os.path.join(clip_dir, "meta"), encoding="utf-8") as fh:
        meta = parse_meta(fh.read())
    k = Intrinsics(fx=float(meta["fx"]), fy=float(meta["fy"]),
                   cx=float(meta["cx"]), cy=float(meta["cy"]),
                   width=int(meta["width"]), height=int(meta["height"]))
    t = int(meta["frames"])
    poses = np.fromfile(os.path.join(clip_dir, "poses.bin"), dtype="<f8").reshape(t, 12)
    depths = np.fromfile(os.path.join(clip_dir, "depths.bin"),
                         dtype="<f4").reshape(t, k.height, k.width)
    frames = np.stack([images.load_image(os.path.join(clip_dir, "frames", f"{i:04d}.png"))
                       for i in range(t)])
    traj = Trajectory(tuple(CameraPose.from_floats(row) for row in poses))
    return Clip(frames, depths.astype(np.float32), traj, k,
                int(meta["seed"]), meta["profile"])


def list_clips(dataset_dir) -> list:
    """Sorted clip subdirectories of a dataset directory."""
    names = [n for n in os.listdir(dataset_dir)
             if re.fullmatch(r"clip_\d+", n)
             and os.path.isdir(os.path.join(dataset_dir, n))]
    return sorted(names, key=lambda n: int(n.split("_")[1]))
