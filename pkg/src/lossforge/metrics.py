"""Evaluation protocol: PSNR, SSIM, dense-flow temporal consistency (tOF),
temporal profiles, and the per-scene report.

Protocol bookkeeping is applied by cropping inputs first (drop the first
two and last two frames, trim the 8-pixel border), so protocol-on results
over full inputs equal protocol-off results over pre-cropped inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .data import FrameSequence, load_sequence
from .errors import (
    FrameTooSmall,
    LengthMismatch,
    RowOutOfRange,
    ScenePairMissing,
    ShapeMismatch,
)

LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class EvalProtocol:
    """Frame and border exclusions applied before any metric."""

    skip_first: int = 2
    skip_last: int = 2
    border_px: int = 8

    @classmethod
    def disabled(cls) -> "EvalProtocol":
        return cls(0, 0, 0)


@dataclass(frozen=True)
class FlowParams:
    """Dense polynomial-expansion flow settings (recorded in every report)."""

    pyr_scale: float = 0.5
    levels: int = 3
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1


@dataclass
class FlowField:
    """Per-pixel displacement in pixels: u along x, v along y."""

    u: np.ndarray
    v: np.ndarray


def psnr(gen: np.ndarray, gt: np.ndarray) -> float:
    """10*log10(1/MSE) over all RGB values jointly; inf when MSE is 0."""
    gen = np.asarray(gen, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if gen.shape != gt.shape:
        raise ShapeMismatch(f"psnr inputs {gen.shape} vs {gt.shape}")
    mse = float(np.mean((gen - gt) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _ssim_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _valid_filter(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    # Separable window, 'valid' support only.
    out = np.apply_along_axis(lambda r: np.convolve(r, k, mode="valid"), 1, img)
    out = np.apply_along_axis(lambda c: np.convolve(c, k, mode="valid"), 0, out)
    return out


def _ssim_single(x: np.ndarray, y: np.ndarray, k1: float, k2: float, window: np.ndarray) -> float:
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    mu_x = _valid_filter(x, window)
    mu_y = _valid_filter(y, window)
    sxx = _valid_filter(x * x, window) - mu_x * mu_x
    syy = _valid_filter(y * y, window) - mu_y * mu_y
    sxy = _valid_filter(x * y, window) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(
    gen: np.ndarray,
    gt: np.ndarray,
    channel_mode: str = "per_channel",
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Windowed SSIM: 11x11 Gaussian (sigma 1.5), dynamic range 1, valid windows.

    channel_mode "per_channel" averages channel-wise SSIM over RGB;
    "gray_mean" converts to grayscale by channel mean first.
    """
    gen = np.asarray(gen, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if gen.shape != gt.shape:
        raise ShapeMismatch(f"ssim inputs {gen.shape} vs {gt.shape}")
    window = _ssim_window()
    if gen.ndim == 2:
        return _ssim_single(gen, gt, k1, k2, window)
    if channel_mode == "gray_mean":
        return _ssim_single(gen.mean(axis=2), gt.mean(axis=2), k1, k2, window)
    if channel_mode != "per_channel":
        raise ValueError(f"unknown channel_mode {channel_mode!r}")
    vals = [_ssim_single(gen[:, :, c], gt[:, :, c], k1, k2, window) for c in range(gen.shape[2])]
    return float(np.mean(vals))


def _to_gray_u8(frame: np.ndarray) -> np.ndarray:
    luma = LUMA[0] * frame[:, :, 0] + LUMA[1] * frame[:, :, 1] + LUMA[2] * frame[:, :, 2]
    return np.clip(np.rint(luma * 255.0), 0, 255).astype(np.uint8)


def farneback_flow(prev: np.ndarray, nxt: np.ndarray, params: FlowParams | None = None) -> FlowField:
    """Dense displacement field from prev to nxt (polynomial-expansion pyramid)."""
    params = params or FlowParams()
    prev = np.asarray(prev)
    nxt = np.asarray(nxt)
    if prev.shape != nxt.shape:
        raise ShapeMismatch(f"flow inputs {prev.shape} vs {nxt.shape}")
    h, w = prev.shape[:2]
    if min(h, w) < params.winsize:
        raise FrameTooSmall(f"{h}x{w} frame smaller than flow window {params.winsize}")
    flow = cv2.calcOpticalFlowFarneback(
        _to_gray_u8(prev), _to_gray_u8(nxt), None,
        params.pyr_scale, params.levels, params.winsize,
        params.iterations, params.poly_n, params.poly_sigma, 0,
    )
    return FlowField(u=flow[:, :, 0].astype(np.float64), v=flow[:, :, 1].astype(np.float64))


def _crop_frames(frames: np.ndarray, protocol: EvalProtocol) -> np.ndarray:
    t_lo = protocol.skip_first
    t_hi = len(frames) - protocol.skip_last
    if t_hi - t_lo < 1:
        raise LengthMismatch(
            f"protocol excludes all {len(frames)} frames "
            f"(skip {protocol.skip_first}+{protocol.skip_last})"
        )
    b = protocol.border_px
    out = frames[t_lo:t_hi]
    if b:
        out = out[:, b:-b, b:-b]
    return out


def tof(
    gen_seq: FrameSequence,
    gt_seq: FrameSequence,
    protocol: EvalProtocol | None = None,
    flow_params: FlowParams | None = None,
    norm: str = "l1_mean",
) -> float:
    """Motion mismatch: per consecutive pair, the difference between the flow
    field of the outputs and the flow field of the ground truth, averaged.

    norm "l1_mean": mean over pixels of |du| + |dv|;
    norm "l2_mean": mean over pixels of sqrt(du^2 + dv^2).
    """
    if len(gen_seq) != len(gt_seq):
        raise LengthMismatch(f"{len(gen_seq)} vs {len(gt_seq)} frames")
    if gen_seq.frames.shape != gt_seq.frames.shape:
        raise ShapeMismatch(
            f"{gen_seq.frames.shape} vs {gt_seq.frames.shape}"
        )
    if norm not in ("l1_mean", "l2_mean"):
        raise ValueError(f"unknown tof norm {norm!r}")
    protocol = protocol or EvalProtocol()
    gen = _crop_frames(gen_seq.frames, protocol)
    gt = _crop_frames(gt_seq.frames, protocol)
    if len(gen) < 2:
        raise LengthMismatch("need at least 2 included frames for flow pairs")
    vals = []
    for t in range(1, len(gen)):
        fg = farneback_flow(gen[t - 1], gen[t], flow_params)
        ft = farneback_flow(gt[t - 1], gt[t], flow_params)
        du, dv = fg.u - ft.u, fg.v - ft.v
        if norm == "l1_mean":
            vals.append(float(np.mean(np.abs(du) + np.abs(dv))))
        else:
            vals.append(float(np.mean(np.sqrt(du * du + dv * dv))))
    return float(np.mean(vals))


def temporal_profile(seq: FrameSequence, row_y: int) -> np.ndarray:
    """x-t slice: row t of the output is frame t's row row_y.  (T, W, 3)."""
    if not 0 <= row_y < seq.height:
        raise RowOutOfRange(f"row {row_y} outside height {seq.height}")
    return seq.frames[:, row_y].copy()


@dataclass
class SceneMetrics:
    psnr_db: float
    ssim: float
    tof: float


@dataclass
class MetricReport:
    per_scene: dict[str, SceneMetrics]
    protocol: EvalProtocol
    flow_params: FlowParams
    tof_norm: str
    lpips_column: str = ""   # reserved; filled by an external tool

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([m.psnr_db for m in self.per_scene.values()]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([m.ssim for m in self.per_scene.values()]))

    @property
    def mean_tof(self) -> float:
        return float(np.mean([m.tof for m in self.per_scene.values()]))

    def has_infinite_psnr(self) -> bool:
        return any(math.isinf(m.psnr_db) for m in self.per_scene.values())

    def to_text(self) -> str:
        lines = [
            f"{'scene':<20} {'psnr':>10} {'ssim':>8} {'tof':>10} {'lpips':>7}",
        ]
        for sid in sorted(self.per_scene):
            m = self.per_scene[sid]
            lines.append(
                f"{sid:<20} {m.psnr_db:>10.4f} {m.ssim:>8.4f} {m.tof:>10.6f} {'':>7}"
            )
        lines.append(
            f"{'mean':<20} {self.mean_psnr:>10.4f} {self.mean_ssim:>8.4f} "
            f"{self.mean_tof:>10.6f} {'':>7}"
        )
        lines.append("")
        lines.append(
            f"protocol: skip_first={self.protocol.skip_first} "
            f"skip_last={self.protocol.skip_last} border_px={self.protocol.border_px}"
        )
        lines.append(f"tof_norm: {self.tof_norm}; flow: {self.flow_params}")
        if self.has_infinite_psnr():
            lines.append("note: infinite PSNR (zero error) in at least one scene")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scene", "psnr", "ssim", "tof", "lpips"])
            for sid in sorted(self.per_scene):
                m = self.per_scene[sid]
                w.writerow([sid, repr(m.psnr_db), repr(m.ssim), repr(m.tof), self.lpips_column])
        (out_dir / "report.txt").write_text(self.to_text())


def evaluate_sequences(
    pairs: dict[str, tuple[FrameSequence, FrameSequence]],
    protocol: EvalProtocol | None = None,
    flow_params: FlowParams | None = None,
    tof_norm: str = "l1_mean",
    channel_mode: str = "per_channel",
) -> MetricReport:
    """Metrics for already-loaded (gen, gt) pairs keyed by scene id."""
    protocol = protocol or EvalProtocol()
    flow_params = flow_params or FlowParams()
    per_scene = {}
    for sid, (gen_seq, gt_seq) in pairs.items():
        if len(gen_seq) != len(gt_seq):
            raise LengthMismatch(f"scene {sid}: {len(gen_seq)} vs {len(gt_seq)} frames")
        gen = _crop_frames(gen_seq.frames, protocol)
        gt = _crop_frames(gt_seq.frames, protocol)
        frame_psnr = [psnr(g, t) for g, t in zip(gen, gt)]
        frame_ssim = [ssim(g, t, channel_mode) for g, t in zip(gen, gt)]
        scene_tof = tof(gen_seq, gt_seq, protocol, flow_params, tof_norm)
        per_scene[sid] = SceneMetrics(
            psnr_db=float(np.mean(frame_psnr)),
            ssim=float(np.mean(frame_ssim)),
            tof=scene_tof,
        )
    return MetricReport(
        per_scene=per_scene, protocol=protocol,
        flow_params=flow_params, tof_norm=tof_norm,
    )


def evaluate(
    gen_root,
    gt_root,
    protocol: EvalProtocol | None = None,
    out_dir=None,
    flow_params: FlowParams | None = None,
    tof_norm: str = "l1_mean",
    channel_mode: str = "per_channel",
) -> MetricReport:
    """Pair scenes by directory name under two roots and compute the report."""
    gen_root, gt_root = Path(gen_root), Path(gt_root)
    ids = sorted(p.name for p in gt_root.iterdir() if p.is_dir())
    if not ids:
        raise ScenePairMissing(f"no scene directories under {gt_root}")
    pairs = {}
    for sid in ids:
        gen_dir = gen_root / sid
        if not gen_dir.is_dir():
            raise ScenePairMissing(f"scene {sid!r} missing under {gen_root}")
        pairs[sid] = (load_sequence(gen_dir), load_sequence(gt_root / sid))
    report = evaluate_sequences(pairs, protocol, flow_params, tof_norm, channel_mode)
    if out_dir is not None:
        report.write(out_dir)
    return report
