"""Conversions between the numpy frame layout and torch tensors.

Numpy frames are (T, H, W, 3) or batched (B, T, H, W, 3) in [0, 1];
network tensors are (B, 3, T, H, W) float32 (channels first, time as depth).
"""

from __future__ import annotations

import numpy as np
import torch


def frames_to_tensor(frames: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    frames = np.asarray(frames)
    if frames.ndim == 4:
        frames = frames[None]
    if frames.ndim != 5 or frames.shape[-1] != 3:
        raise ValueError(f"expected (B, T, H, W, 3) frames, got {frames.shape}")
    t = torch.from_numpy(np.ascontiguousarray(frames))
    return t.permute(0, 4, 1, 2, 3).contiguous().to(dtype)


def batch_to_tensor(triplet_frames: list[np.ndarray], dtype=torch.float32) -> torch.Tensor:
    """Stack per-sample (3, H, W, 3) arrays into a (B, 3, 3, H, W) tensor."""
    return frames_to_tensor(np.stack(triplet_frames), dtype=dtype)


def image_to_tensor(image: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """(H, W, 3) or (B, H, W, 3) image -> (B, 3, H, W) tensor."""
    image = np.asarray(image)
    if image.ndim == 3:
        image = image[None]
    t = torch.from_numpy(np.ascontiguousarray(image))
    return t.permute(0, 3, 1, 2).contiguous().to(dtype)


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """(B, 3, H, W) tensor -> (B, H, W, 3) float32 array clipped to [0, 1]."""
    arr = t.detach().permute(0, 2, 3, 1).cpu().numpy()
    return np.clip(arr, 0.0, 1.0).astype(np.float32)
