"""Frame-sequence ingestion, synthetic degradations, and patch sampling.

Datasets are directories of scenes, each scene a directory of frames named
``frame_00000.png`` (``.ppm`` also accepted) with consecutive indices.
Frames are 8-bit files decoded to float32 in [0, 1] by /255.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .errors import (
    EmptySequence,
    IndivisibleSize,
    MissingFrame,
    PatchTooLarge,
    ShapeMismatch,
)

_FRAME_RE = re.compile(r"^frame_(\d{5})\.(png|ppm)$")

DOWNSCALE_X4 = "downscale_x4"
GAUSSIAN_BLUR = "gaussian_blur"


@dataclass
class FrameSequence:
    """One scene: frames (T, H, W, 3) float32 in [0, 1], T >= 3."""

    scene_id: str
    frames: np.ndarray
    frame_rate: float | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ShapeMismatch(
                f"frames must be (T, H, W, 3), got {self.frames.shape}"
            )
        if len(self.frames) < 3:
            raise EmptySequence(
                f"scene {self.scene_id!r} has {len(self.frames)} frames, need >= 3"
            )
        lo, hi = float(self.frames.min()), float(self.frames.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"frame values outside [0, 1]: min={lo}, max={hi}")

    def __len__(self):
        return len(self.frames)

    @property
    def height(self):
        return self.frames.shape[1]

    @property
    def width(self):
        return self.frames.shape[2]


@dataclass(frozen=True)
class DegradationSpec:
    """How ground-truth frames are turned into network inputs."""

    kind: str = DOWNSCALE_X4
    blur_sigma: float = 1.5
    antialias_window: int = 4

    def __post_init__(self):
        if self.kind not in (DOWNSCALE_X4, GAUSSIAN_BLUR):
            raise ValueError(f"unknown degradation kind {self.kind!r}")
        if self.kind == GAUSSIAN_BLUR and self.blur_sigma <= 0:
            raise ValueError("blur_sigma must be > 0")
        if self.kind == DOWNSCALE_X4:
            if self.antialias_window < 2 or self.antialias_window % 2:
                raise ValueError("antialias_window must be an even integer >= 2")

    @property
    def scale(self) -> int:
        return 4 if self.kind == DOWNSCALE_X4 else 1


@dataclass
class VideoTriplet:
    """Aligned (t-1, t, t+1) crops: gt (3, Hg, Wg, 3), input (3, Hi, Wi, 3)."""

    gt: np.ndarray
    input: np.ndarray
    scale: int
    t_index: int

    def __post_init__(self):
        if self.gt.shape[0] != 3 or self.input.shape[0] != 3:
            raise ShapeMismatch("triplets hold exactly 3 frames")
        hg, wg = self.gt.shape[1:3]
        hi, wi = self.input.shape[1:3]
        if hg != self.scale * hi or wg != self.scale * wi:
            raise ShapeMismatch(
                f"gt {hg}x{wg} is not {self.scale}x the input {hi}x{wi}"
            )
        if hg % 16 or wg % 16:
            raise IndivisibleSize(f"gt patch {hg}x{wg} must be divisible by 16")


def load_sequence(dir_path) -> FrameSequence:
    """Load one scene directory into a FrameSequence.

    Frames must be named frame_%05d.png (or .ppm) with consecutive indices.
    """
    dir_path = Path(dir_path)
    indexed = []
    for p in dir_path.iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            indexed.append((int(m.group(1)), p))
    indexed.sort()
    if len(indexed) < 3:
        raise EmptySequence(f"{dir_path} holds {len(indexed)} frames, need >= 3")
    indices = [i for i, _ in indexed]
    for prev, cur in zip(indices, indices[1:]):
        if cur != prev + 1:
            raise MissingFrame(
                f"{dir_path}: frame index jumps {prev} -> {cur}"
            )
    frames = []
    shape = None
    for _, p in indexed:
        arr = np.asarray(Image.open(p).convert("RGB"), dtype=np.float32) / 255.0
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ShapeMismatch(
                f"{p.name} is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}"
            )
        frames.append(arr)
    return FrameSequence(scene_id=dir_path.name, frames=np.stack(frames))


def save_sequence(seq: FrameSequence, dir_path) -> None:
    """Write a FrameSequence as 8-bit PNGs in the standard layout."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(seq.frames):
        img = Image.fromarray(
            np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)
        )
        img.save(dir_path / f"frame_{t:05d}.png")


def _cubic_kernel(x: np.ndarray) -> np.ndarray:
    # Catmull-Rom cubic (a = -0.5), support [-2, 2].
    ax = np.abs(x)
    out = np.zeros_like(ax)
    near = ax <= 1.0
    far = (ax > 1.0) & (ax < 2.0)
    out[near] = 1.5 * ax[near] ** 3 - 2.5 * ax[near] ** 2 + 1.0
    out[far] = -0.5 * ax[far] ** 3 + 2.5 * ax[far] ** 2 - 4.0 * ax[far] + 2.0
    return out


def _downscale_weights(window: int) -> np.ndarray:
    """Filter taps for one 4x-decimated output sample.

    The source point sits halfway between the two central input samples, so
    the tap weights are the same for every output pixel.  window=4 is the
    plain Catmull-Rom interpolant; wider windows stretch the kernel by
    window/4 for stronger antialiasing.  Weights are normalized to sum to 1
    so constant signals pass through unchanged.
    """
    half = window // 2
    offsets = np.arange(-half + 1, half + 1, dtype=np.float64)  # around floor(x)
    dist = offsets - 0.5  # source point is at floor(x) + 0.5
    w = _cubic_kernel(dist / (window / 4.0))
    return w / w.sum()


def _downscale_axis(arr: np.ndarray, axis: int, weights: np.ndarray) -> np.ndarray:
    n = arr.shape[axis]
    half = len(weights) // 2
    pad = max(0, half - 2)
    if pad:
        spec = [(0, 0)] * arr.ndim
        spec[axis] = (pad, pad)
        arr = np.pad(arr, spec, mode="symmetric")
    arr = np.moveaxis(arr, axis, 0)
    base = np.arange(n // 4) * 4 + 1 + pad  # floor of each source point
    out = np.zeros((n // 4,) + arr.shape[1:], dtype=np.float64)
    for k, w in enumerate(weights):
        out += w * arr[base + (k - half + 1)]
    return np.moveaxis(out, 0, axis)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled, normalized 1-D Gaussian with radius round(3*sigma)."""
    radius = max(1, int(round(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _blur_frames(frames: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    out = frames.astype(np.float64)
    out = correlate1d(out, k, axis=1, mode="reflect")
    out = correlate1d(out, k, axis=2, mode="reflect")
    return out


def degrade(seq: FrameSequence, spec: DegradationSpec) -> FrameSequence:
    """Produce the network-input version of a ground-truth sequence."""
    if spec.kind == DOWNSCALE_X4:
        if seq.height % 4 or seq.width % 4:
            raise IndivisibleSize(
                f"{seq.height}x{seq.width} frames cannot be downscaled by 4"
            )
        w = _downscale_weights(spec.antialias_window)
        out = _downscale_axis(seq.frames.astype(np.float64), 1, w)
        out = _downscale_axis(out, 2, w)
    else:
        out = _blur_frames(seq.frames, spec.blur_sigma)
    out = np.clip(out, 0.0, 1.0).astype(np.float32)
    return FrameSequence(seq.scene_id, out, seq.frame_rate)


def sample_triplets(
    seq: FrameSequence,
    spec: DegradationSpec,
    gt_patch: int,
    count: int,
    rng_seed,
    input_seq: FrameSequence | None = None,
) -> list[VideoTriplet]:
    """Draw aligned GT/input patch triplets, deterministic in rng_seed.

    input_seq, when given (pre-degraded data), replaces the synthetic
    degradation; it must be the scale-reduced companion of seq.
    """
    if gt_patch % 16:
        raise IndivisibleSize(f"gt_patch {gt_patch} must be divisible by 16")
    if gt_patch > min(seq.height, seq.width):
        raise PatchTooLarge(
            f"gt_patch {gt_patch} exceeds {seq.height}x{seq.width} frames"
        )
    scale = spec.scale
    if input_seq is None:
        input_seq = degrade(seq, spec)
    if (
        input_seq.height * scale != seq.height
        or input_seq.width * scale != seq.width
        or len(input_seq) != len(seq)
    ):
        raise ShapeMismatch("input sequence does not pair with the GT sequence")

    in_patch = gt_patch // scale
    rng = np.random.default_rng(rng_seed)
    out = []
    for _ in range(count):
        t = int(rng.integers(1, len(seq) - 1))
        oy = int(rng.integers(0, input_seq.height - in_patch + 1))
        ox = int(rng.integers(0, input_seq.width - in_patch + 1))
        gy, gx = oy * scale, ox * scale
        gt = seq.frames[t - 1 : t + 2, gy : gy + gt_patch, gx : gx + gt_patch]
        inp = input_seq.frames[t - 1 : t + 2, oy : oy + in_patch, ox : ox + in_patch]
        out.append(VideoTriplet(gt=gt.copy(), input=inp.copy(), scale=scale, t_index=t))
    return out


def make_synthetic_corpus(
    n_scenes: int,
    frames_per_scene: int,
    size: int,
    rng_seed: int,
    motion_px: int = 1,
) -> list[FrameSequence]:
    """Procedural moving-texture clips with known global motion.

    Each scene is band-limited noise plus a few rigid shapes painted on a
    wide canvas; frame t is a window that slides so image content translates
    by exactly +motion_px along x per frame.  Scene s depends only on
    (rng_seed, s), so parallel prefetch keeps the assignment stable.
    """
    if size % 16:
        raise IndivisibleSize(f"size {size} must be divisible by 16")
    scenes = []
    travel = motion_px * (frames_per_scene - 1)
    for s in range(n_scenes):
        rng = np.random.default_rng([rng_seed, s])
        h, w = size, size + travel
        canvas = np.empty((h, w, 3), dtype=np.float64)
        base = _blur_frames(rng.standard_normal((1, h, w, 1)), 1.2)[0, :, :, 0]
        for c in range(3):
            chroma = _blur_frames(rng.standard_normal((1, h, w, 1)), 1.2)[0, :, :, 0]
            canvas[:, :, c] = base + 0.35 * chroma
        lo, hi = canvas.min(), canvas.max()
        canvas = 0.08 + 0.84 * (canvas - lo) / (hi - lo)

        yy, xx = np.mgrid[0:h, 0:w]
        for _ in range(3):
            color = rng.uniform(0.1, 0.9, size=3)
            cy = rng.integers(0, h)
            cx = rng.integers(0, w)
            r = int(rng.integers(size // 16, size // 6))
            if rng.integers(0, 2):
                mask = (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
            else:
                mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
            canvas[mask] = 0.7 * color + 0.3 * canvas[mask]

        frames = np.empty((frames_per_scene, size, size, 3), dtype=np.float32)
        for t in range(frames_per_scene):
            x0 = travel - t * motion_px
            frames[t] = canvas[:, x0 : x0 + size]
        scenes.append(FrameSequence(scene_id=f"scene_{s:03d}", frames=frames))
    return scenes
