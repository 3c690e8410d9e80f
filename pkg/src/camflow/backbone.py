"""Video diffusion transformer with frame-decoupled guidance injection and
anchor-frame cross attention.

Rendered guidance frames are patchified like target frames and concatenated
along the frame axis (doubling the frame count), distinguished only by a
learned segment embedding. Every block runs global self-attention over all
tokens plus an auxiliary attention path in which each frame queries the
first target frame's features (the geometric anchor); that path enters
through a zero-initialized output projection so a fresh model is exactly
equivalent to one without it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

SEGMENT_TARGET = 0
SEGMENT_CONTEXT = 1


# ---------------------------------------------------------------------------
# Token-level operations
# ---------------------------------------------------------------------------

@dataclass
class TokenSequence:
    """Patch tokens (B, F, S, D) with per-frame segment and frame-index tags."""

    tokens: Tensor
    segment: Tensor  # (F,) long, SEGMENT_TARGET or SEGMENT_CONTEXT
    frame_index: Tensor  # (F,) long, aligned target/context frames share an index

    @property
    def n_frames(self) -> int:
        return self.tokens.shape[1]


def extract_patches(frames: Tensor, patch: int) -> Tensor:
    """(B, F, H, W, C) -> (B, F, S, patch*patch*C), row-major patch order."""
    b, f, h, w, c = frames.shape
    if h % patch or w % patch:
        raise ValueError(f"frame size {h}x{w} not divisible by patch {patch}")
    gh, gw = h // patch, w // patch
    x = frames.reshape(b, f, gh, patch, gw, patch, c)
    x = x.permute(0, 1, 2, 4, 3, 5, 6)
    return x.reshape(b, f, gh * gw, patch * patch * c)


def assemble_patches(patches: Tensor, patch: int, height: int, width: int) -> Tensor:
    """Exact inverse of extract_patches."""
    b, f, s, pd = patches.shape
    gh, gw = height // patch, width // patch
    if s != gh * gw or pd % (patch * patch) != 0:
        raise ValueError(f"patch tensor shape {tuple(patches.shape)} does not match "
                         f"{height}x{width} with patch {patch}")
    c = pd // (patch * patch)
    x = patches.reshape(b, f, gh, gw, patch, patch, c)
    x = x.permute(0, 1, 2, 4, 3, 5, 6)
    return x.reshape(b, f, height, width, c)


def attach_guidance(target: TokenSequence, guidance: TokenSequence) -> TokenSequence:
    """Concatenate guidance tokens after target tokens along the frame axis."""
    if target.tokens.shape[0] != guidance.tokens.shape[0] \
            or target.tokens.shape[2:] != guidance.tokens.shape[2:]:
        raise ValueError(f"token shape mismatch: {tuple(target.tokens.shape)} vs "
                         f"{tuple(guidance.tokens.shape)}")
    if target.n_frames != guidance.n_frames:
        raise ValueError(f"guidance frame count {guidance.n_frames} must equal "
                         f"target frame count {target.n_frames}")
    return TokenSequence(
        tokens=torch.cat([target.tokens, guidance.tokens], dim=1),
        segment=torch.cat([target.segment, guidance.segment]),
        frame_index=torch.cat([target.frame_index, guidance.frame_index]),
    )


def detach_targets(seq: TokenSequence, n_target: int) -> TokenSequence:
    """Slice back the first n_target frames (the generation targets)."""
    return TokenSequence(seq.tokens[:, :n_target], seq.segment[:n_target],
                         seq.frame_index[:n_target])


# ---------------------------------------------------------------------------
# Attention paths
# ---------------------------------------------------------------------------

def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    *lead, d = x.shape
    return x.reshape(*lead, n_heads, d // n_heads).transpose(-3, -2)


def _merge_heads(x: Tensor) -> Tensor:
    x = x.transpose(-3, -2)
    *lead, h, dh = x.shape
    return x.reshape(*lead, h * dh)


def global_self_attention(x: Tensor, w_q: nn.Linear, w_k: nn.Linear,
                          w_v: nn.Linear, n_heads: int,
                          return_probs: bool = False):
    """Multi-head attention over the full token sequence, pre output-projection.

    x: (B, L, D). The fused kernel is used unless attention probabilities are
    requested, in which case the math is done explicitly.
    """
    q = _split_heads(w_q(x), n_heads)
    k = _split_heads(w_k(x), n_heads)
    v = _split_heads(w_v(x), n_heads)
    if return_probs:
        probs = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1]), dim=-1)
        return _merge_heads(probs @ v), probs
    return _merge_heads(F.scaled_dot_product_attention(q, k, v))


def anchor_attention(features: Tensor, w_q_prime: nn.Linear, w_k: nn.Linear,
                     w_v: nn.Linear, n_heads: int, anchor_frame: int = 0,
                     return_probs: bool = False):
    """Every frame's tokens query the anchor frame's keys/values.

    features: (B, F, S, D), per-frame block features. Keys and values come
    from the anchor frame through the block's shared projections; queries use
    the dedicated query projection. The anchor frame itself receives no
    anchor message (its output row is zero). Returns pre-projection values.
    """
    b, f, s, d = features.shape
    anchor = features[:, anchor_frame]
    q = _split_heads(w_q_prime(features), n_heads)  # (B, F, H, S, dh)
    k = _split_heads(w_k(anchor), n_heads)  # (B, H, S, dh)
    v = _split_heads(w_v(anchor), n_heads)
    scores = q @ k.unsqueeze(1).transpose(-1, -2) / math.sqrt(d // n_heads)
    probs = torch.softmax(scores, dim=-1)  # (B, F, H, S, S)
    out = _merge_heads(probs @ v.unsqueeze(1))  # (B, F, S, D)
    keep = torch.ones(f, 1, 1, dtype=features.dtype, device=features.device)
    keep[anchor_frame] = 0.0
    out = out * keep
    if return_probs:
        return out, probs
    return out


def combine_outputs(self_attn_raw: Tensor, anchor_raw, w_o: nn.Linear,
                    w_o_prime: nn.Linear, alpha: float) -> Tensor:
    """Project and sum the two attention paths: base @ W_O + alpha * anchor @ W'_O."""
    out = w_o(self_attn_raw)
    if anchor_raw is not None:
        out = out + alpha * w_o_prime(anchor_raw)
    return out


class AttentionBlock(nn.Module):
    """Pre-norm transformer block: global self-attention (+ anchor path) and MLP."""

    def __init__(self, dim: int, n_heads: int, mlp_ratio: float = 4.0,
                 anchor_enabled: bool = True):
        super().__init__()
        self.n_heads = n_heads
        self.anchor_enabled = anchor_enabled
        self.norm1 = nn.LayerNorm(dim, bias=False)
        self.w_q = nn.Linear(dim, dim, bias=False)
        self.w_k = nn.Linear(dim, dim, bias=False)
        self.w_v = nn.Linear(dim, dim, bias=False)
        self.w_o = nn.Linear(dim, dim, bias=False)
        self.w_q_prime = nn.Linear(dim, dim, bias=False)
        self.w_o_prime = nn.Linear(dim, dim, bias=False)
        self.norm2 = nn.LayerNorm(dim, bias=False)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(),
                                 nn.Linear(hidden, dim))

    def reset_anchor_parameters(self) -> None:
        """Anchor query starts as a copy of the base query; output projection at zero."""
        with torch.no_grad():
            self.w_q_prime.weight.copy_(self.w_q.weight)
            self.w_o_prime.weight.zero_()

    def forward(self, x: Tensor, alpha: float) -> Tensor:
        b, f, s, d = x.shape
        h = self.norm1(x)
        base_raw = global_self_attention(h.reshape(b, f * s, d),
                                         self.w_q, self.w_k, self.w_v, self.n_heads)
        anchor_raw = None
        if self.anchor_enabled:
            anchor_raw = anchor_attention(h, self.w_q_prime, self.w_k, self.w_v,
                                          self.n_heads).reshape(b, f * s, d)
        attn = combine_outputs(base_raw, anchor_raw, self.w_o, self.w_o_prime, alpha)
        x = x + attn.reshape(b, f, s, d)
        return x + self.mlp(self.norm2(x))


class TimestepEmbedder(nn.Module):
    """Sinusoidal features of t in [0, 1] pushed through a small MLP."""

    def __init__(self, dim: int, max_period: float = 10000.0):
        super().__init__()
        self.dim = dim
        self.max_period = max_period
        self.mlp = nn.Sequential(nn.Linear(dim, dim), nn.SiLU(), nn.Linear(dim, dim))

    def forward(self, t: Tensor) -> Tensor:
        half = self.dim // 2
        freqs = torch.exp(-math.log(self.max_period)
                          * torch.arange(half, dtype=t.dtype, device=t.device) / half)
        args = t[:, None] * 1000.0 * freqs[None]  # spread [0,1] over the bands
        emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
        return self.mlp(emb)


# ---------------------------------------------------------------------------
# Full model
# ---------------------------------------------------------------------------

class VideoDiT(nn.Module):
    """Velocity-predicting video transformer conditioned on a clean first frame
    and (optionally) rendered guidance frames."""

    def __init__(self, dim: int = 128, n_heads: int = 4, depth: int = 6,
                 patch: int = 4, frames: int = 9, height: int = 64,
                 width: int = 64, channels: int = 3, alpha: float = 1.0,
                 anchor_enabled: bool = True, mlp_ratio: float = 4.0):
        super().__init__()
        if height % patch or width % patch:
            raise ValueError(f"{height}x{width} not divisible by patch {patch}")
        if dim % n_heads:
            raise ValueError(f"dim {dim} not divisible by {n_heads} heads")
        self.dim = dim
        self.n_heads = n_heads
        self.patch = patch
        self.frames = frames
        self.height = height
        self.width = width
        self.channels = channels
        self.alpha = float(alpha)
        self.anchor_enabled = anchor_enabled

        patch_dim = patch * patch * channels
        self.patch_embed = nn.Linear(patch_dim, dim)
        self.patch_unembed = nn.Linear(dim, patch_dim)
        self.frame_pos = nn.Parameter(torch.zeros(frames, dim))
        self.row_pos = nn.Parameter(torch.zeros(height // patch, dim))
        self.col_pos = nn.Parameter(torch.zeros(width // patch, dim))
        self.segment_pos = nn.Parameter(torch.zeros(2, dim))
        self.time_embed = TimestepEmbedder(dim)
        self.blocks = nn.ModuleList(
            AttentionBlock(dim, n_heads, mlp_ratio, anchor_enabled)
            for _ in range(depth))
        self.norm_out = nn.LayerNorm(dim, bias=False)
        self._init_weights()

    def _init_weights(self) -> None:
        def init_fn(m):
            if isinstance(m, nn.Linear):
                nn.init.normal_(m.weight, std=0.02)
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
        self.apply(init_fn)
        for table in (self.frame_pos, self.row_pos, self.col_pos, self.segment_pos):
            nn.init.normal_(table, std=0.02)
        # note: the unembed head stays randomly initialized; a zeroed head
        # would make every upstream gradient (anchor projections included)
        # vanish at the first step
        for blk in self.blocks:
            blk.reset_anchor_parameters()

    def anchor_parameters(self):
        """The two trainable matrices of the anchor path in every block."""
        for blk in self.blocks:
            yield blk.w_q_prime.weight
            yield blk.w_o_prime.weight

    def embed_frames(self, frames_pix: Tensor, segment: int, t: Tensor) -> TokenSequence:
        """Patchify + linear embed + frame/row/col/segment/timestep encodings."""
        b, f, h, w, c = frames_pix.shape
        if f != self.frames:
            raise ValueError(f"expected {self.frames} frames, got {f}")
        if (h, w, c) != (self.height, self.width, self.channels):
            raise ValueError(f"frame shape {(h, w, c)} does not match model "
                             f"{(self.height, self.width, self.channels)}")
        tok = self.patch_embed(extract_patches(frames_pix, self.patch))
        spatial = (self.row_pos[:, None, :] + self.col_pos[None, :, :]).reshape(1, 1, -1, self.dim)
        tok = tok + spatial
        tok = tok + self.frame_pos[None, :, None, :]
        tok = tok + self.segment_pos[segment].reshape(1, 1, 1, self.dim)
        tok = tok + self.time_embed(t)[:, None, None, :]
        seg = torch.full((f,), segment, dtype=torch.long)
        return TokenSequence(tok, seg, torch.arange(f))

    def unembed_tokens(self, tokens: Tensor) -> Tensor:
        pix = self.patch_unembed(self.norm_out(tokens))
        return assemble_patches(pix, self.patch, self.height, self.width)

    def forward(self, noisy_target: Tensor, guidance_frames, conditioning_frame: Tensor,
                t: Tensor) -> Tensor:
        """Predict per-pixel velocities for the target frames.

        noisy_target: (B, F, H, W, C) at blend time t; its frame 0 is replaced
        by the clean conditioning frame. guidance_frames: (B, F, H, W, C)
        clean renders or None; they join as context tokens at t=0 and receive
        no output. t: (B,) in [0, 1].
        """
        t = torch.as_tensor(t, dtype=noisy_target.dtype, device=noisy_target.device)
        if t.ndim == 0:
            t = t.expand(noisy_target.shape[0])
        if torch.any(t < 0) or torch.any(t > 1):
            raise ValueError("timestep t must lie in [0, 1]")
        target = torch.cat([conditioning_frame[:, None], noisy_target[:, 1:]], dim=1)
        seq = self.embed_frames(target, SEGMENT_TARGET, t)
        if guidance_frames is not None:
            ctx = self.embed_frames(guidance_frames.to(noisy_target.dtype),
                                    SEGMENT_CONTEXT, torch.zeros_like(t))
            seq = attach_guidance(seq, ctx)
        x = seq.tokens
        for blk in self.blocks:
            x = blk(x, self.alpha)
        x = detach_targets(TokenSequence(x, seq.segment, seq.frame_index),
                           self.frames).tokens
        return self.unembed_tokens(x)
