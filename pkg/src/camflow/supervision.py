"""Endpoint-weighted supervision: quadratic per-frame loss weights, sparse
temporal frame selection, and duplication of the target view over the final
timesteps.
"""

from __future__ import annotations

import numpy as np


def loss_weight(i: int, n: int, gamma: float) -> float:
    """Weight 1 + gamma * (2i/(n-1) - 1)^2 for supervised frame i in 1..n-1.

    The weight is 1 at the temporal center and 1 + gamma at both ends; frame 0
    is conditioning and carries no loss, so asking for it is an error.
    """
    if n < 2:
        raise ValueError(f"sequence length must be >= 2, got {n}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if not 1 <= i <= n - 1:
        raise ValueError(f"frame index {i} outside supervised range 1..{n - 1}")
    x = 2.0 * i / (n - 1) - 1.0
    return 1.0 + gamma * x * x


def build_weight_vector(n: int, k_extension: int, gamma: float,
                        intermediate_zero: bool = False) -> np.ndarray:
    """Per-frame weights for supervised frames 1..n-1.

    The final k_extension timesteps are duplicates of the target view and all
    receive the endpoint weight. With ``intermediate_zero`` (the
    endpoint-only ablation) non-extension frames get 0 and extension frames 1.
    """
    if not 1 <= k_extension < n:
        raise ValueError(f"need 1 <= k_extension < n, got k={k_extension}, n={n}")
    w = np.empty(n - 1, dtype=np.float64)
    endpoint = loss_weight(n - 1, n, gamma)
    for i in range(1, n):
        if i >= n - k_extension:
            w[i - 1] = 1.0 if intermediate_zero else endpoint
        else:
            w[i - 1] = 0.0 if intermediate_zero else loss_weight(i, n, gamma)
    return w


def sparse_sample_indices(t_raw: int, n: int) -> np.ndarray:
    """Uniformly spread n frame indices over 0..t_raw-1, endpoints pinned.

    Uses round-half-away-from-zero so results are platform independent.
    """
    if n < 2:
        raise ValueError(f"need at least 2 sampled frames, got {n}")
    if n > t_raw:
        raise ValueError(f"cannot sample {n} frames from a {t_raw}-frame clip")
    i = np.arange(n, dtype=np.float64)
    return np.floor(i * (t_raw - 1) / (n - 1) + 0.5).astype(np.int64)


def extension_indices(n_traj: int, k_extension: int) -> np.ndarray:
    """Index map duplicating the last of n_traj frames over the final
    k_extension timesteps; output length n_traj + k_extension - 1."""
    if n_traj < 1:
        raise ValueError("cannot extend an empty sequence")
    if k_extension < 1:
        raise ValueError(f"extension count must be >= 1, got {k_extension}")
    return np.concatenate([np.arange(n_traj, dtype=np.int64),
                           np.full(k_extension - 1, n_traj - 1, dtype=np.int64)])


def apply_temporal_extension(frame_sequence: np.ndarray, k_extension: int) -> np.ndarray:
    """Repeat the final frame so it occupies the last k_extension timesteps."""
    seq = np.asarray(frame_sequence)
    return seq[extension_indices(seq.shape[0], k_extension)]
