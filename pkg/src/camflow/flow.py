"""Rectified-flow objective and Euler sampler.

The forward process blends data toward noise along a straight line,
z_t = (1 - t) z_0 + t eps, and the model regresses the constant velocity
v = eps - z_0 of that line. Sampling integrates dz/dt = v from t=1 to t=0
with uniform Euler steps.
"""

from __future__ import annotations

import torch
from torch import Tensor


def _check_shapes(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def _expand_t(t, like: Tensor) -> Tensor:
    t = torch.as_tensor(t, dtype=like.dtype, device=like.device)
    if t.ndim == 0:
        t = t.expand(like.shape[0])
    if torch.any(t < 0) or torch.any(t > 1):
        raise ValueError("timestep t must lie in [0, 1]")
    return t.view(-1, *([1] * (like.ndim - 1)))


def blend(z0: Tensor, eps: Tensor, t) -> Tensor:
    """z_t = (1 - t) z_0 + t eps, elementwise; t is scalar or per batch item."""
    _check_shapes(z0, eps)
    tb = _expand_t(t, z0)
    return (1.0 - tb) * z0 + tb * eps

def velocity_target(z0: Tensor, eps: Tensor) -> Tensor:
    """The regression target eps - z_0."""
    _check_shapes(z0, eps)
    return eps - z0


def flow_loss_components(pred_v: Tensor, z0: Tensor, eps: Tensor,
                         per_frame_weights) -> tuple:
    """Weighted flow-matching loss plus the raw per-frame MSE terms.

    ``pred_v`` has frame axis 1; frame 0 is conditioning and excluded. The
    loss is sum_i w_i * mse_i over supervised frames i = 1..F-1, where mse_i
    averages over batch and pixel dimensions.
    """
    _check_shapes(pred_v, z0)
    _check_shapes(z0, eps)
    w = torch.as_tensor(per_frame_weights, dtype=pred_v.dtype, device=pred_v.device)
    n_sup = pred_v.shape[1] - 1
    if w.shape != (n_sup,):
        raise ValueError(f"expected {n_sup} frame weights, got shape {tuple(w.shape)}")
    if torch.any(w < 0):
        raise ValueError("frame weights must be non-negative")
    err = (pred_v - velocity_target(z0, eps)) ** 2
    dims = (0, *range(2, err.ndim))
    per_frame = err.mean(dim=dims)[1:]  # (F-1,)
    return (w * per_frame).sum(), per_frame


def flow_loss(pred_v: Tensor, z0: Tensor, eps: Tensor, per_frame_weights) -> Tensor:
    loss, _ = flow_loss_components(pred_v, z0, eps, per_frame_weights)
    return loss


@torch.no_grad()
def sample(velocity_model, guidance_frames, conditioning_frame: Tensor,
           shape: tuple, steps: int, seed: int,
           device=None, dtype=torch.float32) -> Tensor:
    """Euler-integrate the learned flow from noise at t=1 down to t=0.

    ``velocity_model(z, guidance, cond, t) -> v`` predicts velocities for all
    target frames; frame 0 stays pinned to the conditioning image throughout.
    Returns the generated target frames, shape = (B, F, H, W, C).
    """
    if steps < 1:
        raise ValueError(f"need at least 1 integration step, got {steps}")
    gen = torch.Generator(device="cpu").manual_seed(int(seed))
    z = torch.randn(shape, generator=gen, dtype=dtype).to(device or "cpu")
    cond = conditioning_frame.to(z.dtype)
    z[:, 0] = cond
    dt = 1.0 / steps
    for k in range(steps):
        t = 1.0 - k * dt
        t_batch = torch.full((shape[0],), t, dtype=z.dtype, device=z.device)
        v = velocity_model(z, guidance_frames, cond, t_batch)
        z = z - dt * v
        z[:, 0] = cond
    return z
