"""Command-line entry point.

Subcommands: synth | train | eval | plot | profile.  The LOSSFORGE_RUN_DIR
environment variable, when set, overrides the training output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import metrics, pipeline, plots
from .config import load_config
from .data import load_sequence, make_synthetic_corpus, save_sequence
from .errors import LossforgeError

RUN_DIR_ENV = "LOSSFORGE_RUN_DIR"


def cmd_synth(args) -> int:
    corpus = make_synthetic_corpus(
        args.scenes, args.frames, args.size, args.seed, motion_px=args.motion
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seq in corpus:
        save_sequence(seq, out / seq.scene_id)
    manifest = "".join(seq.scene_id + "\n" for seq in corpus)
    (out / "manifest.txt").write_text(manifest)
    print(f"wrote {len(corpus)} scenes x {args.frames} frames to {out}")
    return 0


def cmd_train(args) -> int:
    overrides = {}
    flag_map = {
        "data": "data.root",
        "out": "run.dir",
        "seed": "train.seed",
        "gt_patch": "data.gt_patch",
        "degrade": "degrade.kind",
        "blur_sigma": "degrade.blur_sigma",
        "batch": "train.batch_size",
        "pretrain_iters": "train.pretrain_iters",
        "t_init_iters": "train.t_init_iters",
        "alt_iters": "train.alt_iters",
        "log_every": "train.log_every",
        "ckpt_every": "train.ckpt_every",
        "threads": "train.threads",
        "wc": "loss.w_content",
        "wr": "loss.w_relation",
        "wp": "loss.w_pixel",
    }
    for flag, key in flag_map.items():
        val = getattr(args, flag)
        if val is not None:
            overrides[key] = val
    if args.skip_pretrain:
        overrides["phases.skip_pretrain"] = True
    if args.skip_init_t:
        overrides["phases.skip_init_t"] = True
    if args.adv_baseline:
        overrides["loss.adversarial_baseline"] = True
    if args.no_content:
        overrides["loss.use_content"] = False
    if args.no_relation:
        overrides["loss.use_relation"] = False
    if args.old_fake:
        overrides["loss.new_fake"] = False
    if args.layer is not None:
        overrides["loss.layers"] = (args.layer,)
    if args.bn_eval_for_g:
        overrides["lossnet.bn_eval_for_g"] = True

    cfg = load_config(args.config, overrides)
    env_dir = os.environ.get(RUN_DIR_ENV)
    if env_dir:
        cfg.values["run.dir"] = env_dir
    if not cfg["data.root"]:
        raise LossforgeError("no data root: pass --data or set data.root in the config")

    run_dir = Path(cfg["run.dir"])
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.resolved").write_text(cfg.to_text())
    state = pipeline.run_training(cfg)
    print(f"finished at iteration {state.iteration}; outputs in {run_dir}")
    return 0


def cmd_eval(args) -> int:
    protocol = metrics.EvalProtocol.disabled() if args.no_protocol else metrics.EvalProtocol(
        skip_first=args.skip, skip_last=args.skip, border_px=args.border
    )
    report = metrics.evaluate(
        args.gen_dir, args.gt_dir, protocol,
        out_dir=args.out, tof_norm=args.tof_norm,
    )
    print(report.to_text(), end="")
    return 0


def cmd_plot(args) -> int:
    n = plots.plot_losses(args.losses_csv, args.out)
    print(f"wrote {n} panels to {args.out}")
    return 0


def cmd_profile(args) -> int:
    seq = load_sequence(args.scene_dir)
    prof = metrics.temporal_profile(seq, args.row)
    img = Image.fromarray(np.clip(np.rint(prof * 255.0), 0, 255).astype(np.uint8))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    img.save(args.out)
    print(f"wrote {prof.shape[0]}x{prof.shape[1]} profile to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lossforge")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    sp.add_argument("--scenes", type=int, default=4)
    sp.add_argument("--frames", type=int, default=10)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--motion", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("train", help="run the training phases")
    tp.add_argument("--config", default=None)
    tp.add_argument("--data", default=None)
    tp.add_argument("--out", default=None)
    tp.add_argument("--seed", type=int, default=None)
    tp.add_argument("--gt-patch", dest="gt_patch", type=int, default=None)
    tp.add_argument("--degrade", choices=["downscale_x4", "gaussian_blur"], default=None)
    tp.add_argument("--blur-sigma", dest="blur_sigma", type=float, default=None)
    tp.add_argument("--batch", type=int, default=None)
    tp.add_argument("--pretrain-iters", dest="pretrain_iters", type=int, default=None)
    tp.add_argument("--t-init-iters", dest="t_init_iters", type=int, default=None)
    tp.add_argument("--alt-iters", dest="alt_iters", type=int, default=None)
    tp.add_argument("--log-every", dest="log_every", type=int, default=None)
    tp.add_argument("--ckpt-every", dest="ckpt_every", type=int, default=None)
    tp.add_argument("--threads", type=int, default=None)
    tp.add_argument("--wc", type=float, default=None, help="content term weight")
    tp.add_argument("--wr", type=float, default=None, help="relation term weight")
    tp.add_argument("--wp", type=float, default=None, help="pixel term weight")
    tp.add_argument("--layer", type=int, default=None,
                    help="restrict matching losses to one pyramid level")
    tp.add_argument("--skip-pretrain", action="store_true")
    tp.add_argument("--skip-init-t", action="store_true")
    tp.add_argument("--adv-baseline", action="store_true")
    tp.add_argument("--no-content", action="store_true")
    tp.add_argument("--no-relation", action="store_true")
    tp.add_argument("--old-fake", action="store_true",
                    help="fake sequences use three generated frames")
    tp.add_argument("--bn-eval-for-g", action="store_true")
    tp.set_defaults(func=cmd_train)

    ep = sub.add_parser("eval", help="PSNR/SSIM/tOF report for paired scene dirs")
    ep.add_argument("gen_dir")
    ep.add_argument("gt_dir")
    ep.add_argument("--out", default=None)
    ep.add_argument("--no-protocol", action="store_true")
    ep.add_argument("--skip", type=int, default=2, help="frames dropped at each end")
    ep.add_argument("--border", type=int, default=8)
    ep.add_argument("--tof-norm", dest="tof_norm", choices=["l1_mean", "l2_mean"],
                    default="l1_mean")
    ep.set_defaults(func=cmd_eval)

    pp = sub.add_parser("plot", help="render loss curves from losses.csv")
    pp.add_argument("losses_csv")
    pp.add_argument("out")
    pp.set_defaults(func=cmd_plot)

    fp = sub.add_parser("profile", help="x-t temporal profile of one scene")
    fp.add_argument("scene_dir")
    fp.add_argument("--row", type=int, required=True)
    fp.add_argument("--out", required=True)
    fp.set_defaults(func=cmd_profile)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LossforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
