"""Three-phase training: pixel-pretrain the generator, initialize the loss
network on real-vs-fake sequences, then alternate one step of each.

Determinism contract: batch content depends only on (seed, step index), all
parameter updates are driven by those batches, and no other RNG is consumed
during stepping.  A checkpoint therefore resumes bit-for-bit in
single-threaded mode.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np
import torch

from . import objectives
from .data import DegradationSpec, FrameSequence, VideoTriplet, degrade, sample_triplets
from .errors import CorruptCheckpoint, DataExhausted, ShapeMismatch, VersionMismatch
from .generator import ReferenceGenerator
from .lossnet import LossNetwork, classify_sequence, extract_features, make_fake_input, t_objective
from .objectives import LossBreakdown, LossConfig
from .tensors import batch_to_tensor, tensor_to_image

CHECKPOINT_VERSION = 1

PHASE_PRETRAIN = "pretrain_g"
PHASE_INIT_T = "init_t"
PHASE_ALTERNATE = "alternate"
PHASE_DONE = "done"
_PHASE_ORDER = (PHASE_PRETRAIN, PHASE_INIT_T, PHASE_ALTERNATE, PHASE_DONE)

GENERATOR_REGISTRY = {"reference": ReferenceGenerator}


@dataclass(frozen=True)
class TrainSchedule:
    """Iteration counts and optimizer settings.  Defaults are the desk-scale
    preset; paper_scale() gives the full-size schedule."""

    pretrain_iters: int = 2000
    t_init_iters: int = 2000
    alt_iters: int = 3000
    lr_t: float = 1e-5
    lr_g: float = 1e-5
    lr_g_pretrain: float = 1e-4
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    batch_size: int = 4
    seed: int = 0
    log_every: int = 10
    ckpt_every: int = 1000
    t_steps_per_g: int = 1

    def __post_init__(self):
        if min(self.pretrain_iters, self.t_init_iters, self.alt_iters) < 0:
            raise ValueError("iteration counts must be >= 0")
        if min(self.lr_t, self.lr_g, self.lr_g_pretrain) <= 0:
            raise ValueError("learning rates must be > 0")
        if self.batch_size < 1 or self.log_every < 1 or self.ckpt_every < 1:
            raise ValueError("batch_size, log_every, ckpt_every must be >= 1")
        if self.t_steps_per_g < 1:
            raise ValueError("t_steps_per_g must be >= 1")

    @classmethod
    def paper_scale(cls, **overrides) -> "TrainSchedule":
        base = dict(
            pretrain_iters=100_000, t_init_iters=100_000, alt_iters=30_000,
            lr_t=1e-5, lr_g=1e-5,
        )
        base.update(overrides)
        return cls(**base)


class TripletStream:
    """Deterministic infinite batch source over a corpus.

    Ground-truth scenes are degraded once up front; batch(step) depends only
    on (seed, step), so any step can be recomputed after a resume.
    """

    def __init__(
        self,
        corpus: list[FrameSequence],
        spec: DegradationSpec,
        gt_patch: int,
        batch_size: int,
        seed: int,
        inputs: list[FrameSequence] | None = None,
    ):
        if not corpus:
            raise ValueError("corpus is empty")
        self.corpus = corpus
        self.spec = spec
        self.gt_patch = gt_patch
        self.batch_size = batch_size
        self.seed = seed
        self.inputs = inputs if inputs is not None else [degrade(s, spec) for s in corpus]
        if len(self.inputs) != len(corpus):
            raise ShapeMismatch("one input sequence per GT scene required")

    def batch(self, step: int, sub: int = 0) -> list[VideoTriplet]:
        if step < 0 or sub < 0:
            raise ValueError("step and sub must be >= 0")
        rng = np.random.default_rng([self.seed, step, sub])
        out = []
        for _ in range(self.batch_size):
            s = int(rng.integers(0, len(self.corpus)))
            sub_seed = int(rng.integers(0, 2**31))
            out += sample_triplets(
                self.corpus[s], self.spec, self.gt_patch, 1, sub_seed,
                input_seq=self.inputs[s],
            )
        return out

    def monitor_batch(self) -> list[VideoTriplet]:
        """A fixed batch for progress images, far outside the training index range."""
        return self.batch(2**31 - 1, sub=1)


class FiniteStream:
    """Adapter for a pre-built list of batches; raises when it runs out."""

    def __init__(self, batches: list[list[VideoTriplet]]):
        self.batches = batches

    def batch(self, step: int, sub: int = 0) -> list[VideoTriplet]:
        if step >= len(self.batches) or sub:
            raise DataExhausted(f"stream has {len(self.batches)} batches, step {step} requested")
        return self.batches[step]


@dataclass
class TrainState:
    phase: str
    iteration: int
    generator: torch.nn.Module
    lossnet: LossNetwork
    g_opt: torch.optim.Adam
    t_opt: torch.optim.Adam
    seed: int


def new_train_state(generator, lossnet, sched: TrainSchedule) -> TrainState:
    g_opt = torch.optim.Adam(
        generator.parameters(), lr=sched.lr_g_pretrain,
        betas=sched.adam_betas, eps=sched.adam_eps,
    )
    t_opt = torch.optim.Adam(
        lossnet.parameters(), lr=sched.lr_t,
        betas=sched.adam_betas, eps=sched.adam_eps,
    )
    return TrainState(
        phase=PHASE_PRETRAIN, iteration=0,
        generator=generator, lossnet=lossnet,
        g_opt=g_opt, t_opt=t_opt, seed=sched.seed,
    )


def skip_phase(state: TrainState) -> TrainState:
    """Advance past the current phase without running it (ablations)."""
    state.phase = _PHASE_ORDER[_PHASE_ORDER.index(state.phase) + 1]
    return state


def _require_phase(state: TrainState, phase: str):
    if state.phase != phase:
        raise RuntimeError(f"expected phase {phase!r}, state is in {state.phase!r}")


def _batch_tensors(batch: list[VideoTriplet]):
    gt = batch_to_tensor([tr.gt for tr in batch])
    inp = batch_to_tensor([tr.input for tr in batch])
    return gt, inp


def _set_lr(opt: torch.optim.Optimizer, lr: float):
    for group in opt.param_groups:
        group["lr"] = lr


def _generate_all(gen, inp: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Generated frames for all three triplet positions.

    The triplet only carries inputs t-1..t+1, so the outer positions use
    edge-replicated 3-frame windows: (i0,i0,i1) for t-1 and (i1,i2,i2) for t+1.
    """
    i0, i1, i2 = inp[:, :, 0], inp[:, :, 1], inp[:, :, 2]
    prev = gen(torch.stack([i0, i0, i1], dim=2))
    cen = gen(inp)
    nxt = gen(torch.stack([i1, i2, i2], dim=2))
    return prev, cen, nxt


def _fake_stack(state: TrainState, gt, inp, cfg: LossConfig) -> torch.Tensor:
    """Fake sequence from the frozen generator (no grad into G)."""
    state.generator.train()
    with torch.no_grad():
        if cfg.new_fake:
            gen_center = state.generator(inp)
            return make_fake_input(gt, gen_center)
        prev, cen, nxt = _generate_all(state.generator, inp)
        return make_fake_input(gt, cen, gen_neighbors=(prev, nxt))


def _t_step(state: TrainState, gt, inp, cfg: LossConfig) -> float:
    fake = _fake_stack(state, gt, inp, cfg)
    state.lossnet.train()
    loss = t_objective(state.lossnet, gt, fake)
    state.t_opt.zero_grad(set_to_none=True)
    loss.backward()
    state.t_opt.step()
    state.t_opt.zero_grad(set_to_none=True)
    return float(loss.detach())


def _g_step(
    state: TrainState, gt, inp, cfg: LossConfig, t_bn_eval: bool = False
) -> LossBreakdown:
    t_net = state.lossnet
    gen = state.generator
    for p in t_net.parameters():
        p.requires_grad_(False)
    mode = "eval" if t_bn_eval else "train"
    try:
        gen.train()
        out = gen(inp)
        gt_center = gt[:, :, 1]
        lp = objectives.pixel_loss(out, gt_center, cfg)
        bd = LossBreakdown(iteration=state.iteration, pixel=float(lp.detach()))
        if cfg.adversarial_baseline:
            fake = make_fake_input(gt, out)
            fake_pyrs = extract_features(t_net, fake, mode=mode)
            adv = objectives.adversarial_g_loss(classify_sequence(t_net, fake_pyrs))
            lg = adv + cfg.w_pixel * lp
            bd.adv = float(adv.detach())
        else:
            fake = make_fake_input(gt, out)
            fake_pyrs = extract_features(t_net, fake, mode=mode)
            with torch.no_grad():
                real_pyrs = extract_features(t_net, gt, mode=mode)
            content = (
                objectives.content_loss(fake_pyrs[1], real_pyrs[1], cfg)
                if cfg.use_content else {}
            )
            relation, gen_rel, gt_rel = {}, {}, {}
            if cfg.use_relation:
                relation, gen_rel, gt_rel = objectives.relation_loss(
                    fake_pyrs[1], real_pyrs[1],
                    {-1: real_pyrs[0], +1: real_pyrs[2]}, cfg,
                )
            lg = objectives.total_loss(content, relation, lp, cfg)
            bd.content = {j: float(v.detach()) for j, v in content.items()}
            bd.relation = {k: float(v.detach()) for k, v in relation.items()}
            bd.gen_rel = {k: float(v.detach()) for k, v in gen_rel.items()}
            bd.gt_rel = {k: float(v) for k, v in gt_rel.items()}
        bd.total = float(lg.detach())
        state.g_opt.zero_grad(set_to_none=True)
        lg.backward()
        state.g_opt.step()
        state.g_opt.zero_grad(set_to_none=True)
    finally:
        for p in t_net.parameters():
            p.requires_grad_(True)
    return bd


def pretrain_g(state: TrainState, data, sched: TrainSchedule, cfg: LossConfig, sink=None) -> TrainState:
    """Phase one: generator alone, pixel loss only."""
    _require_phase(state, PHASE_PRETRAIN)
    _set_lr(state.g_opt, sched.lr_g_pretrain)
    gen = state.generator
    for local in range(sched.pretrain_iters):
        gt, inp = _batch_tensors(data.batch(state.iteration))
        gen.train()
        out = gen(inp)
        lp = objectives.pixel_loss(out, gt[:, :, 1], cfg)
        state.g_opt.zero_grad(set_to_none=True)
        lp.backward()
        state.g_opt.step()
        state.g_opt.zero_grad(set_to_none=True)
        bd = LossBreakdown(
            iteration=state.iteration,
            pixel=float(lp.detach()),
            total=cfg.w_pixel * float(lp.detach()),
        )
        state.iteration += 1
        if sink is not None:
            sink.step(state, bd, sched)
    state.phase = PHASE_INIT_T
    return state


def init_t(state: TrainState, data, sched: TrainSchedule, cfg: LossConfig, sink=None) -> TrainState:
    """Phase two: loss network alone, generator frozen."""
    _require_phase(state, PHASE_INIT_T)
    _set_lr(state.t_opt, sched.lr_t)
    for local in range(sched.t_init_iters):
        gt, inp = _batch_tensors(data.batch(state.iteration))
        t_loss = _t_step(state, gt, inp, cfg)
        bd = LossBreakdown(iteration=state.iteration, t_loss=t_loss)
        state.iteration += 1
        if sink is not None:
            sink.step(state, bd, sched)
    state.phase = PHASE_ALTERNATE
    return state


def alternate(
    state: TrainState, data, sched: TrainSchedule, cfg: LossConfig,
    sink=None, t_bn_eval_for_g: bool = False,
) -> TrainState:
    """Phase three: one loss-network step, then one generator step, per iteration."""
    _require_phase(state, PHASE_ALTERNATE)
    _set_lr(state.g_opt, sched.lr_g)
    _set_lr(state.t_opt, sched.lr_t)
    for local in range(sched.alt_iters):
        t_loss = 0.0
        for sub in range(sched.t_steps_per_g):
            gt, inp = _batch_tensors(data.batch(state.iteration, sub=sub))
            t_loss = _t_step(state, gt, inp, cfg)
        bd = _g_step(state, gt, inp, cfg, t_bn_eval=t_bn_eval_for_g)
        bd.t_loss = t_loss
        state.iteration += 1
        if sink is not None:
            sink.step(state, bd, sched)
    state.phase = PHASE_DONE
    return state


def save_checkpoint(state: TrainState, path) -> None:
    gen = state.generator
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "phase": state.phase,
        "iteration": state.iteration,
        "seed": state.seed,
        "generator_arch_id": gen.arch_id,
        "generator_args": gen.arch_args(),
        "generator_state": gen.state_dict(),
        "lossnet_args": state.lossnet.arch_args(),
        "lossnet_state": state.lossnet.state_dict(),
        "g_opt_state": state.g_opt.state_dict(),
        "t_opt_state": state.t_opt.state_dict(),
    }
    torch.save(payload, path)


def load_checkpoint(path) -> TrainState:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CorruptCheckpoint(f"{path} is not a training checkpoint")
    if payload["format_version"] != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint format {payload['format_version']}, "
            f"this build reads {CHECKPOINT_VERSION}"
        )
    arch_id = payload["generator_arch_id"]
    if arch_id not in GENERATOR_REGISTRY:
        raise CorruptCheckpoint(f"unknown generator arch {arch_id!r}")
    gen = GENERATOR_REGISTRY[arch_id](**payload["generator_args"])
    gen.load_state_dict(payload["generator_state"])
    t_net = LossNetwork(**payload["lossnet_args"])
    t_net.load_state_dict(payload["lossnet_state"])
    state = new_train_state(gen, t_net, TrainSchedule(seed=payload["seed"]))
    state.g_opt.load_state_dict(payload["g_opt_state"])
    state.t_opt.load_state_dict(payload["t_opt_state"])
    state.phase = payload["phase"]
    state.iteration = payload["iteration"]
    return state


def params_fingerprint(module: torch.nn.Module) -> str:
    """SHA-256 over all parameter bytes, for isolation checks."""
    h = hashlib.sha256()
    for name, p in sorted(module.named_parameters()):
        h.update(name.encode())
        h.update(p.detach().numpy().tobytes())
    return h.hexdigest()


def grads_absent(module: torch.nn.Module) -> bool:
    """True when no parameter carries a gradient buffer (or all are zero)."""
    for p in module.parameters():
        if p.grad is not None and float(p.grad.abs().max()) != 0.0:
            return False
    return True
