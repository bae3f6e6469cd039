"""End-to-end run orchestration: corpus loading, the training phases in
order, and the run directory layout (losses.csv, checkpoints/, samples/,
config.resolved is written by the CLI before this module runs).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from . import trainer
from .config import RunConfig
from .data import FrameSequence, load_sequence
from .errors import ConfigError, ShapeMismatch
from .generator import ReferenceGenerator, generate
from .lossnet import LossNetwork
from .objectives import LossBreakdown, LossConfig
from .tensors import batch_to_tensor, tensor_to_image

INPUT_SUFFIX = "_input"


def load_corpus(root, manifest: str = "") -> tuple[list[FrameSequence], list[FrameSequence] | None]:
    """Load all scenes under root; <scene>_input dirs override degradation.

    Returns (gt_scenes, input_scenes or None).  Scene order follows the
    manifest when given, else sorted directory names.
    """
    root = Path(root)
    if manifest:
        ids = [ln.strip() for ln in Path(manifest).read_text().splitlines() if ln.strip()]
    else:
        ids = sorted(
            p.name for p in root.iterdir()
            if p.is_dir() and not p.name.endswith(INPUT_SUFFIX)
        )
    if not ids:
        raise ConfigError(f"no scenes found under {root}")
    scenes = [load_sequence(root / sid) for sid in ids]
    input_dirs = [root / (sid + INPUT_SUFFIX) for sid in ids]
    have = [d.is_dir() for d in input_dirs]
    if any(have):
        if not all(have):
            missing = [d.name for d, h in zip(input_dirs, have) if not h]
            raise ConfigError(f"partial pre-degraded corpus, missing: {missing}")
        return scenes, [load_sequence(d) for d in input_dirs]
    return scenes, None


class RunSink:
    """Collects run outputs: loss CSV rows, checkpoints, progress triptychs."""

    def __init__(self, run_dir, cfg: LossConfig, monitor=None):
        self.run_dir = Path(run_dir)
        self.cfg = cfg
        self.monitor = monitor
        (self.run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
        (self.run_dir / "samples").mkdir(parents=True, exist_ok=True)
        self._fh = open(self.run_dir / "losses.csv", "w", newline="")
        self._csv = csv.writer(self._fh)
        self._csv.writerow(LossBreakdown.csv_header(cfg.radius))

    def step(self, state, bd: LossBreakdown, sched):
        done = bd.iteration + 1
        if done % sched.log_every == 0:
            self._csv.writerow(bd.csv_row(self.cfg.radius))
            self._fh.flush()
        if done % sched.ckpt_every == 0:
            trainer.save_checkpoint(state, self.run_dir / "checkpoints" / f"iter_{done:07d}.pt")
            if self.monitor is not None:
                save_triptych(
                    state.generator, self.monitor,
                    self.run_dir / "samples" / f"iter_{done:07d}.png",
                )

    def close(self, state):
        trainer.save_checkpoint(state, self.run_dir / "checkpoints" / "final.pt")
        self._fh.close()


def save_triptych(gen, triplet, path) -> None:
    """input | output | ground truth, side by side, for one monitor triplet."""
    inp = batch_to_tensor([triplet.input])
    gen.eval()
    with torch.no_grad():
        out = tensor_to_image(gen(inp))[0]
    gen.train()
    scale = triplet.scale
    shown_in = np.repeat(np.repeat(triplet.input[1], scale, axis=0), scale, axis=1)
    gt = triplet.gt[1]
    sep = np.ones((gt.shape[0], 2, 3), dtype=np.float32)
    panel = np.concatenate([shown_in, sep, out, sep, gt], axis=1)
    img = Image.fromarray(np.clip(np.rint(panel * 255.0), 0, 255).astype(np.uint8))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path)


def build_networks(cfg: RunConfig) -> tuple[ReferenceGenerator, LossNetwork]:
    """Seeded construction of both networks from a resolved config."""
    if cfg["gen.arch"] not in trainer.GENERATOR_REGISTRY:
        raise ConfigError(f"unknown generator arch {cfg['gen.arch']!r}")
    torch.manual_seed(cfg["train.seed"])
    gen = trainer.GENERATOR_REGISTRY[cfg["gen.arch"]](
        scale=cfg.degradation().scale, width=cfg["gen.width"], depth=cfg["gen.depth"]
    )
    t_net = LossNetwork(
        base_width=cfg["lossnet.width"],
        bn_momentum=cfg["lossnet.bn_momentum"],
        bn_eps=cfg["lossnet.bn_eps"],
    )
    return gen, t_net


def run_training(
    cfg: RunConfig,
    corpus: list[FrameSequence] | None = None,
    inputs: list[FrameSequence] | None = None,
) -> trainer.TrainState:
    """Execute the configured phases; returns the final state.

    corpus/inputs may be passed directly (tests, library use); otherwise
    they are loaded from data.root.
    """
    torch.set_num_threads(cfg["train.threads"])
    if corpus is None:
        corpus, inputs = load_corpus(cfg["data.root"], cfg["data.manifest"])
    loss_cfg = cfg.loss_config()
    if loss_cfg.radius != 1:
        raise ConfigError("triplet sampling supplies neighbors at offsets -1/+1 only")
    sched = cfg.schedule()
    stream = trainer.TripletStream(
        corpus, cfg.degradation(), cfg["data.gt_patch"],
        sched.batch_size, sched.seed, inputs=inputs,
    )
    gen, t_net = build_networks(cfg)
    state = trainer.new_train_state(gen, t_net, sched)
    sink = RunSink(cfg["run.dir"], loss_cfg, monitor=stream.monitor_batch()[0])
    try:
        if cfg["phases.skip_pretrain"]:
            trainer.skip_phase(state)
        else:
            trainer.pretrain_g(state, stream, sched, loss_cfg, sink)
        if cfg["phases.skip_init_t"]:
            trainer.skip_phase(state)
        else:
            trainer.init_t(state, stream, sched, loss_cfg, sink)
        trainer.alternate(
            state, stream, sched, loss_cfg, sink,
            t_bn_eval_for_g=cfg["lossnet.bn_eval_for_g"],
        )
    finally:
        sink.close(state)
    return state


def restore_sequence(gen, input_seq: FrameSequence, scene_id: str | None = None) -> FrameSequence:
    """Run a generator over a whole degraded sequence.

    Each output frame uses the 3-frame window around its position,
    edge-replicated at the sequence ends.
    """
    frames = input_seq.frames
    t_count = len(frames)
    windows = []
    for t in range(t_count):
        lo, hi = max(t - 1, 0), min(t + 1, t_count - 1)
        windows.append(np.stack([frames[lo], frames[t], frames[hi]]))
    gen.eval()
    out = []
    with torch.no_grad():
        for w in windows:
            out.append(tensor_to_image(generate(gen, batch_to_tensor([w])))[0])
    gen.train()
    return FrameSequence(
        scene_id=scene_id or input_seq.scene_id, frames=np.stack(out),
        frame_rate=input_seq.frame_rate,
    )
