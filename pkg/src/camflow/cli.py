"""Command-line entry points.

Commands: gen-data, train, sample, eval, classify, render-guidance.
Exit codes: 0 success, 1 usage error, 2 data/checkpoint error, 3 numerical
failure. Every command takes --seed and is bit-deterministic given it.
"""

from __future__ import annotations

import argparse
import os
import re
import sys

import numpy as np
import torch

from . import flow, images, metrics, scenes, training
from .camera import CameraPose, Trajectory, interpolate_trajectory, unproject
from .config import RunConfig, load_config
from .dataset import load_dataset, prepare_clip
from .errors import DataError, NumericalError, UsageError
from .guidance import build_guidance, save_ply
from .supervision import extension_indices

_INSTRUCTION_RE = re.compile(r"(dolly|truck|pedestal|orbit)([+-])(\d+(?:\.\d+)?)")


def parse_instruction(text: str):
    m = _INSTRUCTION_RE.fullmatch(text.strip())
    if not m:
        raise UsageError(
            f"bad camera instruction {text!r}; expected e.g. dolly+1.5, "
            "truck-0.8, pedestal+0.5, orbit-20 (orbit amounts in degrees)")
    kind, sign, mag = m.group(1), m.group(2), float(m.group(3))
    return kind, mag if sign == "+" else -mag


def apply_instruction(pose: CameraPose, kind: str, amount: float,
                      scene_centroid: np.ndarray) -> CameraPose:
    """Target pose for a camera move expressed in the current camera frame.

    dolly/truck/pedestal translate along the camera's +z/+x/+y axes; orbit
    rotates about the vertical axis through the scene centroid, keeping the
    camera's framing of the centroid fixed.
    """
    r, t = pose.rotation, pose.translation
    if kind == "dolly":
        return CameraPose(r, t - np.array([0.0, 0.0, amount]))
    if kind == "truck":
        return CameraPose(r, t - np.array([amount, 0.0, 0.0]))
    if kind == "pedestal":
        return CameraPose(r, t - np.array([0.0, amount, 0.0]))
    if kind == "orbit":
        theta = np.deg2rad(amount)
        a_inv = scenes._rot_y(-theta)
        c = np.asarray(scene_centroid, dtype=np.float64)
        return CameraPose(r @ a_inv, r @ (c - a_inv @ c) + t)
    raise UsageError(f"unknown instruction {kind!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    g = p.add_argument_group("config overrides")
    g.add_argument("--seed", type=int)
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--clip-frames", dest="clip_frames", type=int)
    g.add_argument("--profile", choices=(*scenes.PROFILES, "varied"))
    g.add_argument("--patch", type=int)
    g.add_argument("--dim", type=int)
    g.add_argument("--heads", type=int)
    g.add_argument("--blocks", type=int)
    g.add_argument("--n-frames", dest="n_frames", type=int)
    g.add_argument("--n-extension", dest="n_extension", type=int)
    g.add_argument("--sparse-source-len", dest="sparse_source_len", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--lr", type=float)
    g.add_argument("--batch-size", dest="batch_size", type=int)
    g.add_argument("--iterations", type=int)
    g.add_argument("--sample-steps", dest="sample_steps", type=int)
    g.add_argument("--mode", choices=("scratch", "anchor_only"))
    g.add_argument("--init-from", dest="init_from")
    g.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    for flag in ("disable-guidance", "disable-anchor", "disable-tegs",
                 "intermediate-weights-zero"):
        g.add_argument(f"--{flag}", dest=flag.replace("-", "_"),
                       action="store_const", const=True, default=None)


def _config_from_args(args) -> RunConfig:
    fields = RunConfig.__dataclass_fields__
    overrides = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    try:
        return load_config(args.config, overrides)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc


def _write_config_echo(cfg: RunConfig, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.effective"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())


def cmd_gen_data(args) -> int:
    cfg = _config_from_args(args)
    if args.n_clips < 1:
        raise UsageError(f"--n-clips must be >= 1, got {args.n_clips}")
    out = args.out
    if os.path.isdir(out) and os.listdir(out) and not args.force:
        raise DataError(f"output directory {out!r} is not empty (use --force)")
    os.makedirs(out, exist_ok=True)
    k = scenes.default_intrinsics(cfg.width, cfg.height)
    for i in range(args.n_clips):
        seed = args.seed0 + i
        profile = cfg.profile
        if profile == "varied":
            profile = scenes.PROFILES[seed % len(scenes.PROFILES)]
        clip = scenes.generate_clip(seed, cfg.clip_frames, profile, k)
        scenes.save_clip(clip, os.path.join(out, f"clip_{i:04d}"))
    _write_config_echo(cfg, out)
    print(f"wrote {args.n_clips} clips to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    result = training.train(cfg, args.dataset, args.out, progress=not args.quiet)
    print(f"final loss {result['last_loss']:.6f} "
          f"(first {result['first_loss']:.6f}); checkpoint: {result['checkpoint']}")
    return 0


def _load_input(args, cfg: RunConfig):
    """Input image/depth/pose/intrinsics for sample and render-guidance."""
    if args.clip:
        clip = scenes.load_clip(args.clip)
        return clip.frames[0], clip.depths[0], clip.trajectory[0], clip.intrinsics
    if not (args.image and args.depth):
        raise UsageError("need either --clip or both --image and --depth")
    img = images.load_image(args.image)
    depth = np.load(args.depth).astype(np.float32)
    k = scenes.default_intrinsics(cfg.width, cfg.height)
    if img.shape[:2] != (k.height, k.width) or depth.shape != (k.height, k.width):
        raise DataError(f"input image/depth shape does not match configured "
                        f"{k.width}x{k.height}")
    return img, depth, scenes.reference_pose(), k


def _guidance_for_instruction(img, depth, pose0, k, cfg, instruction):
    kind, amount = parse_instruction(instruction)
    cloud = unproject(depth, pose0, k, img)
    centroid = (cloud.positions.mean(axis=0) if len(cloud)
                else np.zeros(3))
    target = apply_instruction(pose0, kind, amount, centroid)
    traj = interpolate_trajectory(pose0, target, cfg.n_unique)
    ext = extension_indices(cfg.n_unique, cfg.n_extension)
    poses = tuple(traj[int(i)] for i in ext)
    return build_guidance(img, depth, Trajectory(poses), k), cloud


def cmd_sample(args) -> int:
    if args.checkpoint:
        model, cfg = training.load_model(args.checkpoint)
    else:
        raise UsageError("sample requires --checkpoint")
    for key in ("seed", "sample_steps"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    img, depth, pose0, k = _load_input(args, cfg)
    if (k.height, k.width) != (cfg.height, cfg.width):
        raise DataError("input resolution does not match the checkpoint config")
    guid, cloud = _guidance_for_instruction(img, depth, pose0, k, cfg,
                                            args.instruction)
    guid_t = None if cfg.disable_guidance else torch.from_numpy(guid.frames)[None]
    cond = torch.from_numpy(img)[None]
    shape = (1, cfg.n_frames, cfg.height, cfg.width, 3)
    out = flow.sample(model, guid_t, cond, shape, steps=cfg.sample_steps,
                      seed=cfg.seed)
    frames = np.clip(out[0].numpy(), 0.0, 1.0)
    os.makedirs(args.out, exist_ok=True)
    for i in range(frames.shape[0]):
        images.save_image(frames[i], os.path.join(args.out, f"frame_{i:04d}.png"))
        images.save_image(guid.frames[i], os.path.join(args.out, f"guidance_{i:04d}.png"))
        images.save_mask(guid.masks[i], os.path.join(args.out, f"mask_{i:04d}.png"))
    if args.ply:
        save_ply(cloud, args.ply)
    _write_config_echo(cfg, args.out)
    print(f"wrote {frames.shape[0]} frames to {args.out} "
          f"(final mask ratio {guid.mask_ratio_final:.4f})")
    return 0


def cmd_render_guidance(args) -> int:
    cfg = _config_from_args(args)
    img, depth, pose0, k = _load_input(args, cfg)
    guid, cloud = _guidance_for_instruction(img, depth, pose0, k, cfg,
                                            args.instruction)
    os.makedirs(args.out, exist_ok=True)
    for i in range(len(guid)):
        images.save_image(guid.frames[i], os.path.join(args.out, f"guidance_{i:04d}.png"))
        images.save_mask(guid.masks[i], os.path.join(args.out, f"mask_{i:04d}.png"))
    if args.ply:
        save_ply(cloud, args.ply)
    _write_config_echo(cfg, args.out)
    print(f"final mask ratio {guid.mask_ratio_final!r} "
          f"({len(guid)} guidance frames in {args.out})")
    return 0


def cmd_classify(args) -> int:
    cfg = _config_from_args(args)
    counts = {"extensive": 0, "limited": 0}
    for name, clip in load_dataset(args.dataset):
        prep = prepare_clip(name, clip, cfg)
        counts[prep.motion_class] += 1
        print(f"{name} {prep.guidance.mask_ratio_final!r} {prep.motion_class}")
    print(f"# extensive={counts['extensive']} limited={counts['limited']}")
    return 0


def cmd_eval(args) -> int:
    if args.copy_guidance:
        model, cfg = None, _config_from_args(args)
    else:
        if not args.checkpoint:
            raise UsageError("eval requires --checkpoint or --copy-guidance")
        model, cfg = training.load_model(args.checkpoint)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.sample_steps is not None:
            cfg.sample_steps = args.sample_steps
    report, outputs = metrics.evaluate(model, cfg, args.dataset, split=args.split,
                                       seed=cfg.seed,
                                       copy_guidance=args.copy_guidance,
                                       keep_outputs=True)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    if not args.no_strips:
        preps = {p.name: p for p in outputs["preps"]}
        for clip_id, gen in outputs["generated"].items():
            p = preps[clip_id]
            e = p.endpoint_index
            strip = np.concatenate([p.targets[0], p.guidance.frames[e],
                                    gen[e], p.targets[e]], axis=1)
            images.save_image(strip, os.path.join(args.out, f"strip_{clip_id}.png"))
    _write_config_echo(cfg, args.out)
    print(report.summary_table())
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="camflow",
                     description="Point-cloud-guided camera-controllable "
                                 "video generation on synthetic scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic clip dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-clips", dest="n_clips", type=int, required=True)
    p.add_argument("--seed0", type=int, default=0)
    p.add_argument("--force", action="store_true")
    _add_config_args(p)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a clip dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    _add_config_args(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sample", help="generate frames for a camera instruction")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clip", help="dataset clip directory supplying frame 0")
    p.add_argument("--image", help="input RGB PNG (with --depth)")
    p.add_argument("--depth", help="input depth .npy (with --image)")
    p.add_argument("--instruction", required=True,
                   help="dolly|truck|pedestal|orbit with signed magnitude, "
                        "e.g. dolly+1.5 or orbit-20")
    p.add_argument("--out", required=True)
    p.add_argument("--ply", help="also export the lifted point cloud (ASCII PLY)")
    p.add_argument("--seed", type=int)
    p.add_argument("--sample-steps", dest="sample_steps", type=int)
    p.set_defaults(fn=cmd_sample, config=None)

    p = sub.add_parser("render-guidance", help="render guidance frames only")
    p.add_argument("--clip")
    p.add_argument("--image")
    p.add_argument("--depth")
    p.add_argument("--instruction", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ply")
    _add_config_args(p)
    p.set_defaults(fn=cmd_render_guidance)

    p = sub.add_parser("classify", help="motion class per clip by final mask ratio")
    p.add_argument("--dataset", required=True)
    _add_config_args(p)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("eval", help="score a checkpoint against ground truth")
    p.add_argument("--checkpoint")
    p.add_argument("--copy-guidance", dest="copy_guidance", action="store_true",
                   help="score the guidance renders themselves (bypass baseline)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("extensive", "limited", "all"), default="all")
    p.add_argument("--out", required=True)
    p.add_argument("--no-strips", dest="no_strips", action="store_true")
    _add_config_args(p)
    p.set_defaults(fn=cmd_eval)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
