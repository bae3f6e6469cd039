"""Declarative run configuration: a flat key=value text file.

Every key has a typed default; files list only what they change, CLI flag
overrides win over the file, and the fully resolved set is written to
run_dir/config.resolved before any compute starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import DOWNSCALE_X4, GAUSSIAN_BLUR, DegradationSpec
from .errors import ConfigError
from .objectives import LossConfig
from .trainer import TrainSchedule


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _str(text: str) -> str:
    return text.strip()


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "data.root": (_str, ""),
    "data.manifest": (_str, ""),
    "data.gt_patch": (int, 64),
    "degrade.kind": (_str, DOWNSCALE_X4),
    "degrade.blur_sigma": (float, 1.5),
    "degrade.window": (int, 4),
    "loss.delta": (float, 0.01),
    "loss.radius": (int, 1),
    "loss.layers": (_int_list, (1, 2, 3, 4)),
    "loss.w_content": (float, 1.0),
    "loss.w_relation": (float, 1.0),
    "loss.w_pixel": (float, 1.0),
    "loss.use_content": (_bool, True),
    "loss.use_relation": (_bool, True),
    "loss.new_fake": (_bool, True),
    "loss.adversarial_baseline": (_bool, False),
    "loss.huber_elementwise": (_bool, False),
    "lossnet.width": (int, 64),
    "lossnet.bn_momentum": (float, 0.1),
    "lossnet.bn_eps": (float, 1e-5),
    "lossnet.bn_eval_for_g": (_bool, False),
    "gen.arch": (_str, "reference"),
    "gen.width": (int, 32),
    "gen.depth": (int, 4),
    "train.pretrain_iters": (int, 2000),
    "train.t_init_iters": (int, 2000),
    "train.alt_iters": (int, 3000),
    "train.lr_t": (float, 1e-5),
    "train.lr_g": (float, 1e-5),
    "train.lr_g_pretrain": (float, 1e-4),
    "train.adam_beta1": (float, 0.9),
    "train.adam_beta2": (float, 0.999),
    "train.adam_eps": (float, 1e-8),
    "train.batch_size": (int, 4),
    "train.seed": (int, 0),
    "train.log_every": (int, 10),
    "train.ckpt_every": (int, 1000),
    "train.t_steps_per_g": (int, 1),
    "train.threads": (int, 1),
    "phases.skip_pretrain": (_bool, False),
    "phases.skip_init_t": (_bool, False),
    "run.dir": (_str, "runs/run0"),
}


def parse_config_text(text: str) -> dict:
    """Parse key=value lines ('#' starts a comment) into typed values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            out[key] = parser(value.strip())
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return out


@dataclass
class RunConfig:
    """Fully resolved configuration; every schema key is present."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        resolved = {k: default for k, (_, default) in SCHEMA.items()}
        for k, v in self.values.items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k!r}")
            resolved[k] = v
        self.values = resolved
        # fail fast on inconsistent combinations
        self.degradation()
        self.loss_config()
        self.schedule()
        if self["data.gt_patch"] % 16:
            raise ConfigError("data.gt_patch must be divisible by 16")

    def __getitem__(self, key: str):
        return self.values[key]

    def degradation(self) -> DegradationSpec:
        kind = self["degrade.kind"]
        if kind not in (DOWNSCALE_X4, GAUSSIAN_BLUR):
            raise ConfigError(f"degrade.kind must be {DOWNSCALE_X4} or {GAUSSIAN_BLUR}")
        return DegradationSpec(
            kind=kind,
            blur_sigma=self["degrade.blur_sigma"],
            antialias_window=self["degrade.window"],
        )

    def loss_config(self) -> LossConfig:
        try:
            return LossConfig(
                delta=self["loss.delta"],
                radius=self["loss.radius"],
                layer_mask=tuple(self["loss.layers"]),
                w_content=self["loss.w_content"],
                w_relation=self["loss.w_relation"],
                w_pixel=self["loss.w_pixel"],
                use_content=self["loss.use_content"],
                use_relation=self["loss.use_relation"],
                new_fake=self["loss.new_fake"],
                adversarial_baseline=self["loss.adversarial_baseline"],
                huber_elementwise=self["loss.huber_elementwise"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def schedule(self) -> TrainSchedule:
        try:
            return TrainSchedule(
                pretrain_iters=self["train.pretrain_iters"],
                t_init_iters=self["train.t_init_iters"],
                alt_iters=self["train.alt_iters"],
                lr_t=self["train.lr_t"],
                lr_g=self["train.lr_g"],
                lr_g_pretrain=self["train.lr_g_pretrain"],
                adam_betas=(self["train.adam_beta1"], self["train.adam_beta2"]),
                adam_eps=self["train.adam_eps"],
                batch_size=self["train.batch_size"],
                seed=self["train.seed"],
                log_every=self["train.log_every"],
                ckpt_every=self["train.ckpt_every"],
                t_steps_per_g=self["train.t_steps_per_g"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_text(self) -> str:
        """Serialize every key (the config.resolved format)."""
        lines = []
        for key in sorted(self.values):
            v = self.values[key]
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """defaults < file < overrides."""
    values = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    if overrides:
        for k, v in overrides.items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k!r}")
            values[k] = v
    return RunConfig(values)
