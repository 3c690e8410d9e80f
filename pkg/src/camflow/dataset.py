"""Dataset access and per-clip preparation of model inputs.

A prepared clip carries the sparse-sampled, endpoint-extended target frames
and the matching guidance renders; both are deterministic functions of the
clip and the frame layout, so they are computed once and reused across
training iterations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import scenes
from .camera import Trajectory
from .config import RunConfig
from .errors import DataError
from .guidance import GuidanceSequence, build_guidance, classify_motion
from .supervision import extension_indices, sparse_sample_indices


@dataclass(frozen=True, eq=False)
class PreparedClip:
    name: str
    seed: int
    targets: np.ndarray  # (N, H, W, 3) float32, frame 0 = input image
    guidance: GuidanceSequence
    poses: tuple  # extended pose sequence, len N
    motion_class: str
    endpoint_index: int  # timestep of the last unique trajectory frame


def load_dataset(dataset_dir) -> list:
    if not os.path.isdir(dataset_dir):
        raise DataError(f"dataset directory {dataset_dir!r} does not exist")
    names = scenes.list_clips(dataset_dir)
    if not names:
        raise DataError(f"no clips found under {dataset_dir!r}")
    return [(name, scenes.load_clip(os.path.join(dataset_dir, name))) for name in names]


def prepare_clip(name: str, clip: scenes.Clip, cfg: RunConfig) -> PreparedClip:
    """Sparse-sample the raw clip, extend the endpoint, render guidance."""
    if (clip.intrinsics.height, clip.intrinsics.width) != (cfg.height, cfg.width):
        raise DataError(f"clip {name} is {clip.intrinsics.width}x"
                        f"{clip.intrinsics.height}, config wants "
                        f"{cfg.width}x{cfg.height}")
    idx = sparse_sample_indices(len(clip), cfg.n_unique)
    ext = extension_indices(cfg.n_unique, cfg.n_extension)
    take = idx[ext]
    targets = clip.frames[take]
    poses = tuple(clip.trajectory[int(i)] for i in take)
    guid = build_guidance(clip.frames[0], clip.depths[0],
                          Trajectory(poses), clip.intrinsics)
    return PreparedClip(name=name, seed=clip.seed, targets=targets,
                        guidance=guid, poses=poses,
                        motion_class=classify_motion(guid.mask_ratio_final),
                        endpoint_index=cfg.n_frames - cfg.n_extension)


def prepare_dataset(dataset_dir, cfg: RunConfig) -> list:
    return [prepare_clip(name, clip, cfg) for name, clip in load_dataset(dataset_dir)]
