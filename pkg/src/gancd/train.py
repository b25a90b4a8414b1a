"""Adversarial training on the expanded pair.

The critic maximizes

    E[(D(x_r) - D(x_g)) - lam * (D(x_r) - D(x_g))**2 / (d(I0, x_g) + d(I1, x_g))]

where ``d`` is the summed squared pixel error against the two original
images; the generator minimizes ``E[D(x_r) - D(G(z))]``. The critic only ever
sees square clips, and within one step the real and generated clips are cut
at the same random coordinate. The distance denominator is always computed on
the full generated image.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .core import l2_distance
from .expand import ExpansionConfig, TrainingSetSampler
from .nets import (
    ArchitectureConfig,
    Discriminator,
    Generator,
    build_discriminator,
    build_generator,
    load_networks,
    load_state_dict,
    sample_latent,
    save_networks,
    save_state_dict,
)

log = logging.getLogger(__name__)

MONITOR_FIELDS = ("step", "loss_d", "loss_g", "dist_term", "lipschitz_ratio")


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    lam: float = 0.2
    batch_size: int = 64
    learning_rate_g: float = 1e-4
    learning_rate_d: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 500
    steps_per_epoch: int = 50
    seed: int = 0
    checkpoint_every: int = 0

    def validate(self) -> None:
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.learning_rate_g < 0 or self.learning_rate_d < 0:
            raise ValueError("learning rates must be non-negative")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.epochs < 0 or self.steps_per_epoch < 1 or self.checkpoint_every < 0:
            raise ValueError("epochs >= 0, steps_per_epoch >= 1 and checkpoint_every >= 0 required")

    @property
    def total_steps(self) -> int:
        return self.epochs * self.steps_per_epoch


def split_seed(root: int, name: str) -> int:
    """Deterministic child seed for one subsystem."""
    tag = [ord(c) for c in name]
    return int(np.random.SeedSequence([root, *tag]).generate_state(1)[0])


def discriminator_loss(d_real, d_fake, dist0, dist1, lam: float) -> torch.Tensor:
    """Negated critic objective, so that minimizing it maximizes the objective."""
    d_real, d_fake, dist0, dist1 = (torch.as_tensor(t) for t in (d_real, d_fake, dist0, dist1))
    if not d_real.shape == d_fake.shape == dist0.shape == dist1.shape:
        raise ValueError("critic scores and distances must have equal lengths")
    denom = dist0 + dist1
    if torch.any(denom <= 0):
        raise ZeroDivisionError("d(I0, x_g) + d(I1, x_g) must be positive")
    gap = d_real - d_fake
    return -torch.mean(gap - lam * gap * gap / denom)


def generator_loss(d_real, d_fake_on_g) -> torch.Tensor:
    d_real, d_fake_on_g = torch.as_tensor(d_real), torch.as_tensor(d_fake_on_g)
    if d_real.shape != d_fake_on_g.shape:
        raise ValueError("critic score batches must have equal lengths")
    return torch.mean(d_real.detach() - d_fake_on_g)


def lipschitz_ratio(d_real: float, d_fake: float, x_r, x_g, lam: float) -> float:
    """``lam * |D(x_r) - D(x_g)| / d(x_r, x_g)``; at most 1 when the bound holds."""
    dist = l2_distance(x_r, x_g)
    if dist == 0:
        raise ValueError("lipschitz ratio undefined for identical images")
    return lam * abs(float(d_real) - float(d_fake)) / dist


@dataclass
class TrainMonitor:
    records: list[dict] = field(default_factory=list)

    def append(self, record: dict) -> None:
        if self.records and record["step"] <= self.records[-1]["step"]:
            raise ValueError("monitor steps must increase")
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.records)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=MONITOR_FIELDS, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(self.records)

    @classmethod
    def read_csv(cls, path) -> "TrainMonitor":
        with open(path, newline="") as fh:
            rows = [
                {k: (int(v) if k == "step" else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)
            ]
        return cls(rows)


@dataclass
class TrainState:
    gen: Generator
    disc: Discriminator
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    rng: torch.Generator
    step: int = 0
    monitor: TrainMonitor = field(default_factory=TrainMonitor)


def _adam(params, lr: float, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=lr, betas=(cfg.adam_beta1, cfg.adam_beta2), eps=cfg.adam_epsilon)


def init_state(arch: ArchitectureConfig, cfg: TrainConfig, disc_arch: ArchitectureConfig | None = None) -> TrainState:
    arch.validate()
    cfg.validate()
    gen = build_generator(arch, split_seed(cfg.seed, "generator"))
    disc = build_discriminator(disc_arch or arch, split_seed(cfg.seed, "discriminator"))
    rng = torch.Generator().manual_seed(split_seed(cfg.seed, "train-rng"))
    return TrainState(
        gen,
        disc,
        _adam(gen.parameters(), cfg.learning_rate_g, cfg),
        _adam(disc.parameters(), cfg.learning_rate_d, cfg),
        rng,
    )


def draw_clip_origin(rng: torch.Generator, image_size: int, clip_size: int) -> tuple[int, int]:
    hw = torch.randint(0, image_size - clip_size + 1, (2,), generator=rng)
    return int(hw[0]), int(hw[1])


def _sq_dist(x: torch.Tensor, ref: torch.Tensor) -> torch.Tensor:
    return ((x - ref) ** 2).flatten(1).sum(1)


def train_step(state: TrainState, real_batch, pair, cfg: TrainConfig) -> dict:
    """One critic update followed by one generator update.

    ``real_batch`` is ``B x H x W x C``; ``pair`` holds the two original
    images. Returns the monitor record for this step (also appended to
    ``state.monitor``).
    """
    gen, disc = state.gen, state.disc
    dtype = next(gen.parameters()).dtype
    real = torch.as_tensor(np.asarray(real_batch), dtype=dtype).permute(0, 3, 1, 2)
    i0, i1 = (torch.as_tensor(np.asarray(p), dtype=dtype).permute(2, 0, 1)[None] for p in pair)
    m = real.shape[0]
    size, clip = gen.cfg.image_size, disc.cfg.clip_size
    if real.shape[2:] != (size, size):
        raise ValueError(f"training images must be {size}x{size}, got {tuple(real.shape[2:])}")
    gen.train()
    disc.train()

    z = sample_latent(m, gen.cfg.latent_dim, state.rng, dtype)
    h, w = draw_clip_origin(state.rng, size, clip)
    with torch.no_grad():
        x_g = gen(z)
    real_clip = real[:, :, h : h + clip, w : w + clip]
    # real and fake clips share one forward pass so batch norm sees both
    d_real, d_fake = disc(torch.cat([real_clip, x_g[:, :, h : h + clip, w : w + clip]])).split(m)
    dist0, dist1 = _sq_dist(x_g, i0), _sq_dist(x_g, i1)
    loss_d = discriminator_loss(d_real, d_fake, dist0, dist1, cfg.lam)
    state.opt_d.zero_grad(set_to_none=True)
    loss_d.backward()
    state.opt_d.step()

    z = sample_latent(m, gen.cfg.latent_dim, state.rng, dtype)
    fake = gen(z)
    d_real_g, d_fake_g = disc(torch.cat([real_clip, fake[:, :, h : h + clip, w : w + clip]])).split(m)
    loss_g = generator_loss(d_real_g, d_fake_g)
    state.opt_g.zero_grad(set_to_none=True)
    loss_g.backward()
    state.opt_g.step()

    with torch.no_grad():
        gap = (d_real - d_fake).abs()
        ratio = torch.mean(cfg.lam * gap / _sq_dist(real, x_g).clamp_min(1e-12))
    state.step += 1
    record = {
        "step": state.step,
        "loss_d": loss_d.item(),
        "loss_g": loss_g.item(),
        "dist_term": float(torch.mean(dist0 + dist1)),
        "lipschitz_ratio": float(ratio),
    }
    bad = [k for k, v in record.items() if not math.isfinite(v)]
    if bad:
        raise TrainingDiverged(f"non-finite {', '.join(bad)} at step {state.step}: {record}")
    state.monitor.append(record)
    return record


def _optim_arrays(opt: torch.optim.Optimizer) -> tuple[dict, list]:
    sd = opt.state_dict()
    arrays = {f"{idx}.{name}": val for idx, slot in sd["state"].items() for name, val in slot.items()}
    return arrays, sd["param_groups"]


def _restore_optim(opt: torch.optim.Optimizer, arrays: dict, groups: list) -> None:
    state: dict = {}
    for key, val in arrays.items():
        idx, name = key.split(".", 1)
        state.setdefault(int(idx), {})[name] = val
    opt.load_state_dict({"state": state, "param_groups": groups})


def save_checkpoint(state: TrainState, directory, cfg: TrainConfig, expansion: ExpansionConfig | None = None) -> Path:
    directory = Path(directory)
    save_networks(directory, state.gen, state.disc)
    meta = {"step": state.step, "train": asdict(cfg)}
    if expansion is not None:
        meta["expansion"] = asdict(expansion)
    for role, opt in (("optim_g", state.opt_g), ("optim_d", state.opt_d)):
        arrays, groups = _optim_arrays(opt)
        save_state_dict(arrays, directory / role)
        meta[f"{role}_groups"] = groups
    (directory / "state.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    np.save(directory / "rng.npy", state.rng.get_state().numpy(), allow_pickle=False)
    state.monitor.write_csv(directory / "monitor.csv")
    return directory


def load_checkpoint(directory, cfg: TrainConfig | None = None) -> TrainState:
    """Rebuild the full training state written by :func:`save_checkpoint`.

    ``cfg`` overrides the stored optimizer hyperparameters when given.
    """
    directory = Path(directory)
    gen, disc = load_networks(directory)
    meta = json.loads((directory / "state.json").read_text())
    stored = TrainConfig(**meta["train"])
    cfg = cfg or stored
    opt_g = _adam(gen.parameters(), cfg.learning_rate_g, cfg)
    opt_d = _adam(disc.parameters(), cfg.learning_rate_d, cfg)
    _restore_optim(opt_g, load_state_dict(directory / "optim_g"), meta["optim_g_groups"])
    _restore_optim(opt_d, load_state_dict(directory / "optim_d"), meta["optim_d_groups"])
    for opt, lr in ((opt_g, cfg.learning_rate_g), (opt_d, cfg.learning_rate_d)):
        for group in opt.param_groups:
            group["lr"] = lr
    rng = torch.Generator()
    rng.set_state(torch.from_numpy(np.load(directory / "rng.npy")))
    monitor = TrainMonitor.read_csv(directory / "monitor.csv")
    return TrainState(gen, disc, opt_g, opt_d, rng, meta["step"], monitor)


@dataclass
class TrainResult:
    gen: Generator
    disc: Discriminator
    monitor: TrainMonitor
    state: TrainState


def train(
    i0,
    i1,
    expansion: ExpansionConfig,
    arch: ArchitectureConfig,
    cfg: TrainConfig,
    *,
    disc_arch: ArchitectureConfig | None = None,
    state: TrainState | None = None,
    checkpoint_dir=None,
    log_path=None,
) -> TrainResult:
    """Run ``cfg.epochs * cfg.steps_per_epoch`` steps, resuming from ``state`` if given.

    ``disc_arch`` lets the critic use a different clip size than ``arch``.
    Checkpoints go to ``checkpoint_dir/epoch_NNNN`` every
    ``cfg.checkpoint_every`` epochs plus ``checkpoint_dir/final``; each step's
    record is appended to ``log_path`` as one JSON line.
    """
    cfg.validate()
    expansion.validate()
    if state is None:
        state = init_state(arch, cfg, disc_arch)
    sampler = TrainingSetSampler(i0, i1, expansion)
    pair = (sampler.i0, sampler.i1)
    log_fh = open(log_path, "a") if log_path else None
    try:
        while state.step < cfg.total_steps:
            epoch, step_in_epoch = divmod(state.step, cfg.steps_per_epoch)
            batch = sampler.batch(epoch, step_in_epoch, cfg.batch_size)
            record = train_step(state, batch, pair, cfg)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
            if state.step % cfg.steps_per_epoch == 0:
                done = state.step // cfg.steps_per_epoch
                log.info("epoch %d: loss_d=%.4g loss_g=%.4g dist=%.4g", done, record["loss_d"], record["loss_g"], record["dist_term"])
                if checkpoint_dir and cfg.checkpoint_every and done % cfg.checkpoint_every == 0:
                    save_checkpoint(state, Path(checkpoint_dir) / f"epoch_{done:04d}", cfg, expansion)
    finally:
        if log_fh:
            log_fh.close()
    if checkpoint_dir:
        save_checkpoint(state, Path(checkpoint_dir) / "final", cfg, expansion)
    return TrainResult(state.gen, state.disc, state.monitor, state)
