"""Restoration networks: the pluggable interface plus a small reference model.

Any nn.Module that maps a (B, 3, 3, h, w) input triplet to the restored
(B, 3, scale*h, scale*w) center frame, and exposes `scale`, `arch_id` and
`receptive_frames`, trains end-to-end in this framework; the trainer never
looks past that surface.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeMismatch

LEAKY_SLOPE = 0.1


class ReferenceGenerator(nn.Module):
    """Tiny residual restorer so the full pipeline runs on a CPU in minutes.

    The 3 input frames are channel-concatenated, passed through `depth`
    conv blocks of `width` channels, and projected to a residual image
    (sub-pixel shuffle for scale 4).  The residual is added to the
    bicubically upsampled center frame (the center frame itself for
    scale 1); the projection is zero-initialized, so the net starts out as
    the plain upsampler.  Output is clamped to [0, 1] only in eval mode.
    """

    arch_id = "reference"
    receptive_frames = 3
    CHECKPOINT_KEYS = ("scale", "width", "depth")

    def __init__(self, scale: int = 4, width: int = 32, depth: int = 4):
        super().__init__()
        if scale not in (1, 4):
            raise ValueError(f"scale must be 1 or 4, got {scale}")
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        self.scale = scale
        self.width = width
        self.depth = depth
        blocks = [nn.Conv2d(9, width, 3, padding=1)]
        for _ in range(depth - 1):
            blocks.append(nn.Conv2d(width, width, 3, padding=1))
        self.blocks = nn.ModuleList(blocks)
        self.project = nn.Conv2d(width, 3 * scale * scale, 3, padding=1)
        nn.init.zeros_(self.project.weight)
        nn.init.zeros_(self.project.bias)

    def arch_args(self) -> dict:
        return {k: getattr(self, k) for k in self.CHECKPOINT_KEYS}

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        if frames.ndim != 5 or frames.shape[1] != 3 or frames.shape[2] != 3:
            raise ShapeMismatch(
                f"expected (B, 3, 3, h, w) input triplet, got {tuple(frames.shape)}"
            )
        b, _, _, h, w = frames.shape
        x = frames.reshape(b, 9, h, w)
        for block in self.blocks:
            x = F.leaky_relu(block(x), LEAKY_SLOPE)
        delta = self.project(x)
        if self.scale > 1:
            delta = F.pixel_shuffle(delta, self.scale)
            base = F.interpolate(
                frames[:, :, 1], scale_factor=self.scale, mode="bicubic", align_corners=False
            )
        else:
            base = frames[:, :, 1]
        out = base + delta
        return out if self.training else out.clamp(0.0, 1.0)


def reference_generator(
    scale: int = 4, width: int = 32, depth: int = 4, rng_seed: int = 0
) -> ReferenceGenerator:
    """Seeded construction so weight init is reproducible."""
    torch.manual_seed(rng_seed)
    return ReferenceGenerator(scale=scale, width=width, depth=depth)


def generate(gen: nn.Module, input_triplet: torch.Tensor) -> torch.Tensor:
    """Run a generator on one input triplet, checking the scale contract."""
    if input_triplet.ndim != 5:
        raise ShapeMismatch(
            f"expected (B, 3, 3, h, w) input triplet, got {tuple(input_triplet.shape)}"
        )
    h, w = input_triplet.shape[-2:]
    out = gen(input_triplet)
    want = (input_triplet.shape[0], 3, h * gen.scale, w * gen.scale)
    if tuple(out.shape) != want:
        raise ShapeMismatch(f"generator produced {tuple(out.shape)}, expected {want}")
    return out
