"""Central finite-difference checks of both training losses on a tiny config."""
import torch

from gancd.nets import ArchitectureConfig
from gancd.train import TrainConfig, discriminator_loss, generator_loss, init_state

# 8x8 images: one transposed conv in G and one conv in D after/before the dense layer
TINY = ArchitectureConfig(latent_dim=4, image_size=8, clip_size=8, base_channels=2)
BATCH = 4
STEP = 1e-3


def loss_closures(seed):
    """Generator, critic and the two losses as closures over fixed data.

    Parameters are redrawn at scale 0.3: at the 0.02 init scale batch norm
    sees nearly constant activations and the loss is too curved for a 1e-3
    central difference.
    """
    state = init_state(TINY, TrainConfig(seed=seed, batch_size=BATCH))
    gen, disc = state.gen.double(), state.disc.double()
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in list(gen.parameters()) + list(disc.parameters()):
            p.copy_(torch.randn(p.shape, generator=g, dtype=p.dtype) * 0.3)
    real = torch.rand(BATCH, 3, 8, 8, generator=g, dtype=torch.float64)
    i0 = torch.rand(1, 3, 8, 8, generator=g, dtype=torch.float64)
    i1 = torch.rand(1, 3, 8, 8, generator=g, dtype=torch.float64)
    z = torch.rand(BATCH, TINY.latent_dim, generator=g, dtype=torch.float64)

    def d_loss():
        x_g = gen(z).detach()
        dist0 = ((x_g - i0) ** 2).flatten(1).sum(1)
        dist1 = ((x_g - i1) ** 2).flatten(1).sum(1)
        d_real, d_fake = disc(torch.cat([real, x_g])).split(BATCH)
        return discriminator_loss(d_real, d_fake, dist0, dist1, 0.2)

    def g_loss():
        d_real, d_fake = disc(torch.cat([real, gen(z)])).split(BATCH)
        return generator_loss(d_real, d_fake)

    return gen, disc, d_loss, g_loss


def worst_relative_error(net, loss_fn, probes, gen):
    """Largest relative gap between autograd and central differences over random scalar probes."""
    net.zero_grad()
    loss_fn().backward()
    params = list(net.parameters())
    worst = 0.0
    for _ in range(probes):
        p = params[int(torch.randint(len(params), (1,), generator=gen))]
        idx = int(torch.randint(p.numel(), (1,), generator=gen))
        flat = p.data.view(-1)
        orig = flat[idx].item()
        with torch.no_grad():
            flat[idx] = orig + STEP
            up = loss_fn().item()
            flat[idx] = orig - STEP
            down = loss_fn().item()
            flat[idx] = orig
        numeric = (up - down) / (2 * STEP)
        analytic = p.grad.view(-1)[idx].item()
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-8))
    return worst
