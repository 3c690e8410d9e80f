"""PNG helpers: float [0,1] RGB frames and boolean masks."""

from __future__ import annotations

import numpy as np
from PIL import Image


def to_u8(frame: np.ndarray) -> np.ndarray:
    arr = np.asarray(frame, dtype=np.float64)
    return np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def from_u8(arr: np.ndarray) -> np.ndarray:
    return (np.asarray(arr, dtype=np.float32) / np.float32(255.0)).astype(np.float32)


def save_image(frame: np.ndarray, path) -> None:
    Image.fromarray(to_u8(frame), mode="RGB").save(path, format="PNG")


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return from_u8(np.asarray(im.convert("RGB"), dtype=np.uint8))


def save_mask(mask: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(mask, dtype=bool), mode="1").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("1"), dtype=bool)
