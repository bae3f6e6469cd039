"""The loss network: per-frame feature pyramids and a 3-frame sequence classifier.

The feature extractor applies four space-only conv stages to each frame of a
3-frame stack; kernels never span time, so a frame's features depend on that
frame alone.  Batch norm is the single cross-frame coupling: in train mode
its statistics pool over (batch, time, height, width) per channel.  The
classifier fuses the deepest features of the three frames with a true
3x3x3 convolution (no temporal padding, depth 3 -> 1) and emits a PatchGAN
style grid of real/fake logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeMismatch

LEAKY_SLOPE = 0.1
NUM_LEVELS = 4


@dataclass
class FeaturePyramid:
    """Multi-scale feature maps of one frame: level j is (B, c_j, H/2^(j+1), W/2^(j+1))."""

    levels: list[torch.Tensor]

    def __post_init__(self):
        if len(self.levels) != NUM_LEVELS:
            raise ShapeMismatch(f"expected {NUM_LEVELS} levels, got {len(self.levels)}")

    def __getitem__(self, j):
        return self.levels[j]

    def __len__(self):
        return len(self.levels)


class FeatureExtractor(nn.Module):
    """Four stride-2 conv+bn stages per frame; channel widths double each stage.

    Input (B, 3, T, H, W); stage outputs are the pyramid levels, taken after
    batch norm (the next stage starts with the leaky relu).
    """

    def __init__(self, base_width: int = 64, bn_momentum: float = 0.1, bn_eps: float = 1e-5):
        super().__init__()
        widths = [base_width * m for m in (1, 2, 4, 8)]
        self.widths = tuple(widths)
        convs, bns = [], []
        in_ch = 3
        for i, out_ch in enumerate(widths):
            k = 7 if i == 0 else 3
            convs.append(
                nn.Conv3d(in_ch, out_ch, (1, k, k), stride=(1, 2, 2), padding=(0, k // 2, k // 2))
            )
            bns.append(nn.BatchNorm3d(out_ch, eps=bn_eps, momentum=bn_momentum))
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        self.bns = nn.ModuleList(bns)

    def forward(self, frames: torch.Tensor) -> list[torch.Tensor]:
        if frames.ndim != 5 or frames.shape[1] != 3:
            raise ShapeMismatch(f"expected (B, 3, T, H, W) frames, got {tuple(frames.shape)}")
        x = frames
        levels = []
        for i, (conv, bn) in enumerate(zip(self.convs, self.bns)):
            if i > 0:
                x = F.leaky_relu(x, LEAKY_SLOPE)
            x = bn(conv(x))
            levels.append(x)
        return levels


class SequenceClassifier(nn.Module):
    """Real/fake patch logits from the stacked deepest features of 3 frames."""

    def __init__(self, in_channels: int = 512, hidden: int = 256):
        super().__init__()
        self.conv1 = nn.Conv3d(in_channels, hidden, (3, 3, 3), stride=(1, 2, 2), padding=(0, 1, 1))
        self.conv2 = nn.Conv3d(hidden, 1, (1, 1, 1), stride=1)

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        if feats.ndim != 5 or feats.shape[2] != 3:
            raise ShapeMismatch(
                f"expected (B, C, 3, h, w) feature stack, got {tuple(feats.shape)}"
            )
        x = self.conv1(F.leaky_relu(feats, LEAKY_SLOPE))
        x = self.conv2(F.leaky_relu(x, LEAKY_SLOPE))
        return x.squeeze(2)  # depth collapsed 3 -> 1; logits (B, 1, h', w')


class LossNetwork(nn.Module):
    """Feature extractor + sequence classifier, trained jointly via BCE."""

    CHECKPOINT_KEYS = ("base_width", "bn_momentum", "bn_eps")

    def __init__(self, base_width: int = 64, bn_momentum: float = 0.1, bn_eps: float = 1e-5):
        super().__init__()
        self.base_width = base_width
        self.bn_momentum = bn_momentum
        self.bn_eps = bn_eps
        self.features = FeatureExtractor(base_width, bn_momentum, bn_eps)
        self.classifier = SequenceClassifier(in_channels=base_width * 8, hidden=base_width * 4)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(frames)[-1])

    def arch_args(self) -> dict:
        return {k: getattr(self, k) for k in self.CHECKPOINT_KEYS}


def make_loss_network(rng_seed: int = 0, **kwargs) -> LossNetwork:
    """Seeded construction so weight init is reproducible."""
    torch.manual_seed(rng_seed)
    return LossNetwork(**kwargs)


def extract_features(net, frames: torch.Tensor, mode: str = "train") -> tuple[FeaturePyramid, ...]:
    """Per-frame pyramids for a (B, 3, T, H, W) stack.

    mode selects batch-norm behavior: "train" pools statistics over the
    whole stack (and updates running stats), "eval" uses stored running
    statistics.  Returns one FeaturePyramid per input frame; slices share
    the autograd graph of the joint forward pass.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    extractor = net.features if isinstance(net, LossNetwork) else net
    extractor.train(mode == "train")
    levels = extractor(frames)
    n_frames = frames.shape[2]
    return tuple(
        FeaturePyramid([lv[:, :, t] for lv in levels]) for t in range(n_frames)
    )


def classify_sequence(net, pyramids) -> torch.Tensor:
    """Patch logits for a 3-pyramid sequence (uses the deepest level of each)."""
    if len(pyramids) != 3:
        raise ShapeMismatch(f"classifier consumes 3 pyramids, got {len(pyramids)}")
    top = [p[-1] for p in pyramids]
    if not (top[0].shape == top[1].shape == top[2].shape):
        raise ShapeMismatch("pyramids come from frames of different sizes")
    classifier = net.classifier if isinstance(net, LossNetwork) else net
    return classifier(torch.stack(top, dim=2))


def make_fake_input(
    gt_frames: torch.Tensor,
    gen_center: torch.Tensor,
    gen_neighbors: tuple[torch.Tensor, torch.Tensor] | None = None,
) -> torch.Tensor:
    """Build the fake 3-frame stack for classifier training.

    Default: ground-truth neighbors around the generated center, so only one
    frame of the sequence is fake.  Passing gen_neighbors=(prev, next)
    switches to the legacy all-generated sequence.
    """
    if gt_frames.ndim != 5 or gt_frames.shape[2] != 3:
        raise ShapeMismatch(f"expected (B, 3, 3, H, W) gt stack, got {tuple(gt_frames.shape)}")
    if gen_center.shape != gt_frames[:, :, 1].shape:
        raise ShapeMismatch(
            f"generated center {tuple(gen_center.shape)} does not match "
            f"gt center {tuple(gt_frames[:, :, 1].shape)}"
        )
    if gen_neighbors is None:
        prev, nxt = gt_frames[:, :, 0], gt_frames[:, :, 2]
    else:
        prev, nxt = gen_neighbors
    return torch.stack([prev, gen_center, nxt], dim=2)


def t_objective(net, real_frames: torch.Tensor, fake_frames: torch.Tensor) -> torch.Tensor:
    """BCE objective for the loss network, in stable logit form.

    -log(sigmoid(real_logits)) - log(1 - sigmoid(fake_logits)), averaged
    over the patch grid and batch.
    """
    if real_frames.shape != fake_frames.shape:
        raise ShapeMismatch(
            f"real {tuple(real_frames.shape)} vs fake {tuple(fake_frames.shape)}"
        )
    real_logits = net(real_frames)
    fake_logits = net(fake_frames)
    return F.softplus(-real_logits).mean() + F.softplus(fake_logits).mean()
