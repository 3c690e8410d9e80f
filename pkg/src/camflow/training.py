"""Training loop: sample clips, blend toward noise, regress velocities with
endpoint-weighted per-frame losses, Adam updates.
"""

from __future__ import annotations

import os

import numpy as np
import torch

from . import flow
from .backbone import VideoDiT
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .dataset import prepare_dataset
from .errors import DataError, NumericalError
from .supervision import build_weight_vector


def build_model(cfg: RunConfig) -> VideoDiT:
    """Deterministically initialized model for a config (seeded construction)."""
    torch.manual_seed(cfg.seed)
    return VideoDiT(dim=cfg.dim, n_heads=cfg.heads, depth=cfg.blocks,
                    patch=cfg.patch, frames=cfg.n_frames, height=cfg.height,
                    width=cfg.width, alpha=cfg.alpha,
                    anchor_enabled=not cfg.disable_anchor,
                    mlp_ratio=cfg.mlp_ratio)


def load_model(checkpoint_path) -> tuple:
    """Rebuild a model (and its RunConfig) from a checkpoint archive."""
    from .config import config_from_text
    if not os.path.isfile(checkpoint_path):
        raise DataError(f"checkpoint {checkpoint_path!r} does not exist")
    try:
        state, config_text = load_checkpoint(checkpoint_path)
        cfg = config_from_text(config_text)
    except ValueError as exc:
        raise DataError(f"cannot read checkpoint {checkpoint_path!r}: {exc}") from exc
    model = build_model(cfg)
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise DataError(f"checkpoint/config mismatch in {checkpoint_path!r}: {exc}") from exc
    model.eval()
    return model, cfg


def loss_weights_for(cfg: RunConfig) -> np.ndarray:
    return build_weight_vector(cfg.n_frames, cfg.n_extension, cfg.effective_gamma,
                               intermediate_zero=cfg.intermediate_weights_zero)


def train(cfg: RunConfig, dataset_dir, out_dir, progress: bool = False,
          stop_fn=None, stop_every: int = 100) -> dict:
    """Run the full loop; writes checkpoints, a loss log, and the effective
    config under out_dir. Returns summary statistics.

    ``stop_fn(iteration, model)`` is polled every ``stop_every`` iterations;
    returning True ends training early (used by convergence-gated runs)."""
    os.makedirs(out_dir, exist_ok=True)
    clips = prepare_dataset(dataset_dir, cfg)
    targets = torch.stack([torch.from_numpy(c.targets) for c in clips])
    guidance = None
    if not cfg.disable_guidance:
        guidance = torch.stack([torch.from_numpy(c.guidance.frames) for c in clips])

    model = build_model(cfg)
    if cfg.init_from:
        state, _ = load_checkpoint(cfg.init_from)
        try:
            model.load_state_dict(state)
        except RuntimeError as exc:
            raise DataError(f"init checkpoint does not match model: {exc}") from exc
    model.train()

    if cfg.mode == "anchor_only":
        if cfg.disable_anchor:
            raise DataError("anchor_only training requires the anchor path")
        anchor = set(id(p) for p in model.anchor_parameters())
        for p in model.parameters():
            p.requires_grad_(id(p) in anchor)
        trainable = list(model.anchor_parameters())
    else:
        trainable = list(model.parameters())
    opt = torch.optim.Adam(trainable, lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8)

    weights = loss_weights_for(cfg)
    gen = torch.Generator().manual_seed(cfg.seed)
    config_text = cfg.to_text()
    with open(os.path.join(out_dir, "config.effective"), "w", encoding="utf-8") as fh:
        fh.write(config_text)

    log_path = os.path.join(out_dir, "loss.log")
    first_loss = last_loss = None
    iterations_run = 0
    with open(log_path, "w", encoding="utf-8") as log:
        log.write("# iteration loss mse_per_frame[1..N-1]\n")
        for it in range(cfg.iterations):
            ids = torch.randint(0, len(clips), (cfg.batch_size,), generator=gen)
            z0 = targets[ids]
            guid = guidance[ids] if guidance is not None else None
            cond = z0[:, 0]
            t = torch.rand(cfg.batch_size, generator=gen)
            eps = torch.randn(z0.shape, generator=gen)
            zt = flow.blend(z0, eps, t)
            pred = model(zt, guid, cond, t)
            loss, per_frame = flow.flow_loss_components(pred, z0, eps, weights)
            if not torch.isfinite(loss):
                _dump_diagnostics(out_dir, cfg, it, ids)
                raise NumericalError(
                    f"non-finite loss at iteration {it} (clip ids "
                    f"{ids.tolist()}, run seed {cfg.seed}); "
                    f"diagnostics in {out_dir}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            lval = float(loss.detach())
            first_loss = lval if first_loss is None else first_loss
            last_loss = lval
            if it % cfg.log_every == 0 or it == cfg.iterations - 1:
                mses = " ".join(repr(float(v)) for v in per_frame.detach())
                log.write(f"{it} {lval!r} {mses}\n")
            if progress and it % 50 == 0:
                print(f"iter {it}: loss {lval:.6f}", flush=True)
            if cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0 \
                    and it + 1 < cfg.iterations:
                save_checkpoint(os.path.join(out_dir, f"checkpoint_{it + 1:06d}.ckpt"),
                                model.state_dict(), config_text)
            iterations_run = it + 1
            if stop_fn is not None and iterations_run % stop_every == 0 \
                    and stop_fn(iterations_run, model):
                model.train()
                break

    final = os.path.join(out_dir, "checkpoint_final.ckpt")
    save_checkpoint(final, model.state_dict(), config_text)
    return {"checkpoint": final, "loss_log": log_path,
            "first_loss": first_loss, "last_loss": last_loss,
            "iterations": iterations_run}


def _dump_diagnostics(out_dir, cfg: RunConfig, iteration: int, clip_ids) -> None:
    path = os.path.join(out_dir, "failure_diagnostics.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"iteration={iteration}\nrun_seed={cfg.seed}\n"
                 f"batch_clip_ids={','.join(str(int(i)) for i in clip_ids)}\n")
