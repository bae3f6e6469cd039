"""Generator-side objectives: Huber distance, content/relation/pixel matching,
the weighted total, and the adversarial baseline used for comparison runs.

All targets (ground-truth frames, their features, and the reference
relations) are detached: gradients reach the generator only through its own
output and the feature extractor's forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import torch
import torch.nn.functional as F

from .errors import MissingNeighbor, NonpositiveDelta, ShapeMismatch
from .lossnet import NUM_LEVELS, FeaturePyramid


@dataclass(frozen=True)
class LossConfig:
    """Weights, Huber threshold, temporal radius, and ablation switches."""

    delta: float = 0.01
    radius: int = 1            # neighbor offsets n in {-radius..-1, 1..radius}
    num_levels: int = NUM_LEVELS
    w_content: float = 1.0
    w_relation: float = 1.0
    w_pixel: float = 1.0
    layer_mask: tuple[int, ...] = (1, 2, 3, 4)   # 1-based pyramid levels
    use_content: bool = True
    use_relation: bool = True
    new_fake: bool = True
    adversarial_baseline: bool = False
    huber_elementwise: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise NonpositiveDelta(f"delta must be > 0, got {self.delta}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")
        if not self.layer_mask:
            raise ValueError("layer_mask must not be empty")
        bad = [j for j in self.layer_mask if not 1 <= j <= self.num_levels]
        if bad:
            raise ValueError(f"layer_mask entries out of range 1..{self.num_levels}: {bad}")

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(n for n in range(-self.radius, self.radius + 1) if n)


def huber(a, b, delta: float, elementwise: bool = False) -> torch.Tensor:
    """Huber distance between two arrays (scalar result).

    Aggregate form (default): with d1 the mean absolute difference and d2
    the mean squared difference, returns 0.5*d2 when d1 <= delta, else
    delta*d1 - 0.5*delta^2.  Both norms are normalized by element count so
    delta keeps its meaning for any array size.  elementwise=True applies
    the classic per-element Huber before averaging.
    """
    if delta <= 0:
        raise NonpositiveDelta(f"delta must be > 0, got {delta}")
    a = torch.as_tensor(a)
    b = torch.as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"huber inputs {tuple(a.shape)} vs {tuple(b.shape)}")
    diff = a - b
    if elementwise:
        ad = diff.abs()
        per = torch.where(ad <= delta, 0.5 * diff * diff, delta * ad - 0.5 * delta * delta)
        return per.mean()
    d1 = diff.abs().mean()
    if d1 <= delta:
        return 0.5 * (diff * diff).mean()
    return delta * d1 - 0.5 * delta * delta


def _detached(pyr: FeaturePyramid) -> FeaturePyramid:
    return FeaturePyramid([lv.detach() for lv in pyr.levels])


def content_loss(gen_pyr: FeaturePyramid, gt_pyr: FeaturePyramid, cfg: LossConfig) -> dict[int, torch.Tensor]:
    """Per-level feature distance between generated and GT center frames."""
    gt_pyr = _detached(gt_pyr)
    out = {}
    for j in cfg.layer_mask:
        gen_lv, gt_lv = gen_pyr[j - 1], gt_pyr[j - 1]
        if gen_lv.shape != gt_lv.shape:
            raise ShapeMismatch(
                f"level {j}: {tuple(gen_lv.shape)} vs {tuple(gt_lv.shape)}"
            )
        out[j] = huber(gen_lv, gt_lv, cfg.delta, cfg.huber_elementwise)
    return out


def relation_loss(
    gen_pyr_t: FeaturePyramid,
    gt_pyr_t: FeaturePyramid,
    gt_neighbors: dict[int, FeaturePyramid],
    cfg: LossConfig,
):
    """Match generated-to-neighbor feature distances to the GT ones.

    For each level j and offset n, the generated relation is the Huber
    distance between the generated center features and the GT neighbor
    features; the reference relation swaps in the GT center.  Both the
    neighbor features and the reference relation are constants; gradient
    reaches the generator only through the generated relation.

    Returns (losses, gen_rel, gt_rel), each keyed by (n, j).
    """
    for n in cfg.offsets:
        if n not in gt_neighbors:
            raise MissingNeighbor(f"relation needs GT neighbor at offset {n:+d}")
    gt_pyr_t = _detached(gt_pyr_t)
    losses, gen_rel, gt_rel = {}, {}, {}
    for n in cfg.offsets:
        nb = _detached(gt_neighbors[n])
        for j in cfg.layer_mask:
            rel_g = huber(gen_pyr_t[j - 1], nb[j - 1], cfg.delta, cfg.huber_elementwise)
            rel_t = huber(gt_pyr_t[j - 1], nb[j - 1], cfg.delta, cfg.huber_elementwise).detach()
            losses[(n, j)] = huber(rel_g, rel_t, cfg.delta)
            gen_rel[(n, j)] = rel_g
            gt_rel[(n, j)] = rel_t
    return losses, gen_rel, gt_rel


def pixel_loss(gen_frame: torch.Tensor, gt_frame: torch.Tensor, cfg: LossConfig) -> torch.Tensor:
    """Huber distance in pixel space (anchors color and absolute intensity)."""
    if gen_frame.shape != gt_frame.shape:
        raise ShapeMismatch(
            f"pixel loss: {tuple(gen_frame.shape)} vs {tuple(gt_frame.shape)}"
        )
    return huber(gen_frame, gt_frame.detach(), cfg.delta, cfg.huber_elementwise)


def total_loss(
    content: dict[int, torch.Tensor],
    relation: dict[tuple[int, int], torch.Tensor],
    pixel: torch.Tensor,
    cfg: LossConfig,
) -> torch.Tensor:
    """Weighted sum: w_C * mean_j(content) + w_R * mean_{n,j}(relation) + w_P * pixel.

    Means run over the masked levels (and 2*radius offsets), so with the
    full mask and unit weights this is the plain 1/J, 1/(2NJ) combination.
    """
    n_levels = len(cfg.layer_mask)
    total = cfg.w_pixel * pixel
    if cfg.use_content and content:
        total = total + cfg.w_content * sum(content.values()) / n_levels
    if cfg.use_relation and relation:
        total = total + cfg.w_relation * sum(relation.values()) / (2 * cfg.radius * n_levels)
    return total


def adversarial_g_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator loss -log(sigmoid(logits)), mean over the grid."""
    return F.softplus(-fake_logits).mean()


_CSV_FLOAT = "{:.10e}"


@dataclass
class LossBreakdown:
    """Scalar record of one step's loss terms (floats, detached)."""

    iteration: int
    pixel: float = 0.0
    content: dict[int, float] = field(default_factory=dict)
    relation: dict[tuple[int, int], float] = field(default_factory=dict)
    gen_rel: dict[tuple[int, int], float] = field(default_factory=dict)
    gt_rel: dict[tuple[int, int], float] = field(default_factory=dict)
    total: float = 0.0
    t_loss: float = 0.0
    adv: float = 0.0

    @staticmethod
    def csv_header(radius: int = 1, num_levels: int = NUM_LEVELS) -> list[str]:
        cols = ["iter", "L_P"]
        cols += [f"L_C_{j}" for j in range(1, num_levels + 1)]
        for n in range(-radius, radius + 1):
            if n == 0:
                continue
            cols += [f"L_R_{n:+d}_{j}" for j in range(1, num_levels + 1)]
        cols += ["L_G", "L_FC", "L_Adv"]
        return cols

    def csv_row(self, radius: int = 1, num_levels: int = NUM_LEVELS) -> list[str]:
        vals = [self.pixel]
        vals += [self.content.get(j, 0.0) for j in range(1, num_levels + 1)]
        for n in range(-radius, radius + 1):
            if n == 0:
                continue
            vals += [self.relation.get((n, j), 0.0) for j in range(1, num_levels + 1)]
        vals += [self.total, self.t_loss, self.adv]
        return [str(self.iteration)] + [_CSV_FLOAT.format(v) for v in vals]

    def recombine(self, cfg: LossConfig) -> float:
        """Recompute the total from the recorded parts (consistency checks)."""
        total = cfg.w_pixel * self.pixel
        if cfg.use_content and self.content:
            total += cfg.w_content * sum(self.content.values()) / len(cfg.layer_mask)
        if cfg.use_relation and self.relation:
            total += cfg.w_relation * sum(self.relation.values()) / (
                2 * cfg.radius * len(cfg.layer_mask)
            )
        return total
