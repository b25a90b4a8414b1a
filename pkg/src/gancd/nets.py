"""Generator and discriminator networks.

The generator projects a latent vector to a 4x4 feature map and doubles the
resolution with stride-2 transposed convolutions until it reaches the image
size; the discriminator mirrors that with stride-2 convolutions on square
clips and ends in a single linear unit. Public arrays are channels-last
(``B x H x W x C``); the modules work channels-first internally.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

KERNEL = 4
STRIDE = 2


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass
class ArchitectureConfig:
    latent_dim: int = 64
    image_size: int = 128
    clip_size: int = 64
    channels: int = 3
    base_channels: int = 64
    use_batch_norm: bool = True
    # cap on discriminator width, as a multiple of base_channels
    max_channel_mult: int = 8

    def validate(self) -> None:
        for name in ("image_size", "clip_size"):
            size = getattr(self, name)
            if not _is_pow2(size) or size < 8:
                raise ValueError(f"{name} must be a power of two >= 8, got {size}")
        if self.clip_size > self.image_size:
            raise ValueError("clip_size cannot exceed image_size")
        if self.latent_dim < 1 or self.base_channels < 1 or self.channels < 1 or self.max_channel_mult < 1:
            raise ValueError("latent_dim, channels and widths must be positive")

    @property
    def generator_depth(self) -> int:
        return int(math.log2(self.image_size // 4))

    @property
    def discriminator_depth(self) -> int:
        return int(math.log2(self.clip_size // 4))

    def generator_widths(self) -> list[int]:
        """Channels of the 4x4 projection followed by each hidden upsampling layer."""
        top = self.base_channels * 8
        return [max(1, top >> i) for i in range(self.generator_depth)]

    def discriminator_widths(self) -> list[int]:
        cap = self.base_channels * self.max_channel_mult
        return [min(cap, self.base_channels << i) for i in range(self.discriminator_depth)]


def _init_weights(module: nn.Module, gen: torch.Generator) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            with torch.no_grad():
                nn.init.normal_(m.weight, 0.0, 0.02, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.BatchNorm2d):
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()


def _norm(ch: int, cfg: ArchitectureConfig) -> nn.Module:
    return nn.BatchNorm2d(ch) if cfg.use_batch_norm else nn.Identity()


class Generator(nn.Module):
    def __init__(self, cfg: ArchitectureConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        widths = cfg.generator_widths()
        self.project = nn.Linear(cfg.latent_dim, widths[0] * 16)
        layers: list[nn.Module] = [_norm(widths[0], cfg), nn.ReLU()]
        for c_in, c_out in zip(widths, widths[1:]):
            layers += [nn.ConvTranspose2d(c_in, c_out, KERNEL, STRIDE, 1), _norm(c_out, cfg), nn.ReLU()]
        layers += [nn.ConvTranspose2d(widths[-1], cfg.channels, KERNEL, STRIDE, 1), nn.Sigmoid()]
        self.body = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        x = self.project(z).view(z.shape[0], -1, 4, 4)
        return self.body(x)


class Discriminator(nn.Module):
    def __init__(self, cfg: ArchitectureConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        widths = cfg.discriminator_widths()
        layers: list[nn.Module] = [nn.Conv2d(cfg.channels, widths[0], KERNEL, STRIDE, 1), nn.LeakyReLU(0.2)]
        for c_in, c_out in zip(widths, widths[1:]):
            layers += [nn.Conv2d(c_in, c_out, KERNEL, STRIDE, 1), _norm(c_out, cfg), nn.LeakyReLU(0.2)]
        self.body = nn.Sequential(*layers)
        self.head = nn.Linear(widths[-1] * 16, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.body(x).flatten(1)).squeeze(1)


def build_generator(cfg: ArchitectureConfig, seed: int = 0) -> Generator:
    net = Generator(cfg)
    _init_weights(net, torch.Generator().manual_seed(seed))
    return net


def build_discriminator(cfg: ArchitectureConfig, seed: int = 0) -> Discriminator:
    net = Discriminator(cfg)
    _init_weights(net, torch.Generator().manual_seed(seed))
    return net


def generate(gen: Generator, z) -> torch.Tensor:
    """Images ``B x H x W x C`` for latent batch ``z``; differentiable."""
    z = torch.as_tensor(z, dtype=next(gen.parameters()).dtype)
    if z.ndim != 2 or z.shape[1] != gen.cfg.latent_dim:
        raise ValueError(f"latent batch must be B x {gen.cfg.latent_dim}, got {tuple(z.shape)}")
    return gen(z).permute(0, 2, 3, 1)


def discriminate(disc: Discriminator, clips) -> torch.Tensor:
    """One score per clip of a ``B x S x S x C`` batch."""
    clips = torch.as_tensor(clips, dtype=next(disc.parameters()).dtype)
    cfg = disc.cfg
    if clips.ndim != 4 or tuple(clips.shape[1:]) != (cfg.clip_size, cfg.clip_size, cfg.channels):
        raise ValueError(
            f"clips must be B x {cfg.clip_size} x {cfg.clip_size} x {cfg.channels}, got {tuple(clips.shape)}"
        )
    return disc(clips.permute(0, 3, 1, 2))


def sample_latent(n: int, latent_dim: int, gen: torch.Generator, dtype=torch.float32) -> torch.Tensor:
    """``n`` draws from U[0, 1]^latent_dim."""
    return torch.rand(n, latent_dim, generator=gen, dtype=dtype)


def parameter_count(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


# checkpoint layout: <dir>/arch.json and <dir>/<role>/<state-key>.npy


def save_state_dict(state: dict, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = {}
    for key, value in state.items():
        arr = value.detach().cpu().numpy() if torch.is_tensor(value) else np.asarray(value)
        fname = f"{key}.npy"
        np.save(directory / fname, arr, allow_pickle=False)
        index[key] = {"file": fname, "shape": list(arr.shape), "dtype": str(arr.dtype)}
    (directory / "index.json").write_text(json.dumps(index, indent=2))


def load_state_dict(directory) -> dict:
    directory = Path(directory)
    index = json.loads((directory / "index.json").read_text())
    state = {}
    for key, meta in index.items():
        arr = np.load(directory / meta["file"], allow_pickle=False)
        if list(arr.shape) != meta["shape"]:
            raise ValueError(f"{directory / meta['file']}: shape {arr.shape} != recorded {meta['shape']}")
        state[key] = torch.from_numpy(arr)
    return state


def save_networks(directory, gen: Generator, disc: Discriminator) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arch = {"generator": asdict(gen.cfg), "discriminator": asdict(disc.cfg)}
    (directory / "arch.json").write_text(json.dumps(arch, indent=2, sort_keys=True))
    save_state_dict(gen.state_dict(), directory / "generator")
    save_state_dict(disc.state_dict(), directory / "discriminator")


def load_networks(directory) -> tuple[Generator, Discriminator]:
    directory = Path(directory)
    arch_path = directory / "arch.json"
    if not arch_path.is_file():
        raise FileNotFoundError(f"no checkpoint at {directory}")
    arch = json.loads(arch_path.read_text())
    gen = Generator(ArchitectureConfig(**arch["generator"]))
    disc = Discriminator(ArchitectureConfig(**arch["discriminator"]))
    gen.load_state_dict(load_state_dict(directory / "generator"))
    disc.load_state_dict(load_state_dict(directory / "discriminator"))
    return gen, disc
