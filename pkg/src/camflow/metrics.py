"""PSNR/SSIM and the per-split evaluation protocol."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy.signal import convolve2d

from . import flow
from .config import RunConfig
from .dataset import PreparedClip, prepare_dataset
from .errors import DataError

PSNR_CAP_DB = 100.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/MSE) for images in [0, 1]; identical images report 100 dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(1.0 / mse)), PSNR_CAP_DB)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
    dynamic range 1; channels scored independently and averaged."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    if min(a.shape[0], a.shape[1]) < _SSIM_WINDOW:
        raise ValueError(f"image {a.shape[:2]} smaller than the "
                         f"{_SSIM_WINDOW}x{_SSIM_WINDOW} SSIM window")
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = _SSIM_K1 ** 2
    c2 = _SSIM_K2 ** 2
    scores = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mu_x = convolve2d(x, win, mode="valid")
        mu_y = convolve2d(y, win, mode="valid")
        var_x = convolve2d(x * x, win, mode="valid") - mu_x ** 2
        var_y = convolve2d(y * y, win, mode="valid") - mu_y ** 2
        cov = convolve2d(x * y, win, mode="valid") - mu_x * mu_y
        s = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) \
            / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
        scores.append(s.mean())
    return float(np.mean(scores))


@dataclass(frozen=True)
class ClipResult:
    clip_id: str
    motion_class: str
    psnr_endpoint: float
    ssim_endpoint: float
    psnr_mean: float
    ssim_mean: float


@dataclass(frozen=True)
class EvalReport:
    split: str
    results: tuple
    aggregates: dict  # metric -> (mean, std)
    config_text: str

    def machine_lines(self) -> list:
        return [f"{r.clip_id} {r.motion_class} {r.psnr_endpoint!r} "
                f"{r.ssim_endpoint!r} {r.psnr_mean!r} {r.ssim_mean!r}"
                for r in self.results]

    def summary_table(self) -> str:
        rows = [f"split={self.split}  clips={len(self.results)}",
                f"{'metric':<16}{'mean':>12}{'std':>12}"]
        for key, (mean, std) in self.aggregates.items():
            rows.append(f"{key:<16}{mean:>12.4f}{std:>12.4f}")
        return "\n".join(rows)

    def to_text(self) -> str:
        body = "\n".join(self.machine_lines())
        return (f"# clip_id class psnr_endpoint ssim_endpoint psnr_mean ssim_mean\n"
                f"{body}\n\n{self.summary_table()}\n")


def _aggregate(results) -> dict:
    agg = {}
    for key in ("psnr_endpoint", "ssim_endpoint", "psnr_mean", "ssim_mean"):
        vals = np.array([getattr(r, key) for r in results], dtype=np.float64)
        agg[key] = (float(vals.mean()), float(vals.std()))
    return agg


def score_clip(prep: PreparedClip, generated: np.ndarray) -> ClipResult:
    """Endpoint metrics on the last unique trajectory frame; means over all
    supervised timesteps (frame 0 is conditioning and excluded)."""
    gt = prep.targets
    e = prep.endpoint_index
    psnrs = [psnr(generated[i], gt[i]) for i in range(1, gt.shape[0])]
    ssims = [ssim(generated[i], gt[i]) for i in range(1, gt.shape[0])]
    return ClipResult(clip_id=prep.name, motion_class=prep.motion_class,
                      psnr_endpoint=psnr(generated[e], gt[e]),
                      ssim_endpoint=ssim(generated[e], gt[e]),
                      psnr_mean=float(np.mean(psnrs)),
                      ssim_mean=float(np.mean(ssims)))


def generate_for_clip(model, prep: PreparedClip, steps: int, seed: int,
                      use_guidance: bool = True) -> np.ndarray:
    """Sample the model along the clip's own guidance; returns (N, H, W, 3)."""
    guid = torch.from_numpy(prep.guidance.frames)[None] if use_guidance else None
    cond = torch.from_numpy(prep.targets[0])[None]
    shape = (1, *prep.targets.shape)
    out = flow.sample(model, guid, cond, shape, steps=steps, seed=seed)
    return np.clip(out[0].numpy(), 0.0, 1.0)


def evaluate(model, cfg: RunConfig, dataset_dir, split: str = "all",
             seed: int = 0, copy_guidance: bool = False,
             keep_outputs: bool = False):
    """Score generated frames against ray-cast ground truth, per motion split.

    With copy_guidance the guidance renders themselves stand in for the
    model output (the model-free bypass baseline). With keep_outputs, also
    returns the prepared clips and generated frames for visualization.
    """
    if split not in ("extensive", "limited", "all"):
        raise DataError(f"unknown split {split!r}")
    preps = prepare_dataset(dataset_dir, cfg)
    if split != "all":
        preps = [p for p in preps if p.motion_class == split]
    if not preps:
        raise DataError(f"split {split!r} is empty for dataset {dataset_dir!r}")
    if model is not None and hasattr(model, "eval"):
        model.eval()
    results = []
    generated_by_clip = {}
    for i, prep in enumerate(preps):
        if copy_guidance:
            generated = prep.guidance.frames
        else:
            if model is None:
                raise DataError("no checkpoint given and copy_guidance not set")
            generated = generate_for_clip(model, prep, cfg.sample_steps, seed + i,
                                          use_guidance=not cfg.disable_guidance)
        if keep_outputs:
            generated_by_clip[prep.name] = generated
        results.append(score_clip(prep, generated))
    report = EvalReport(split=split, results=tuple(results),
                        aggregates=_aggregate(results), config_text=cfg.to_text())
    if keep_outputs:
        return report, {"preps": preps, "generated": generated_by_clip}
    return report
