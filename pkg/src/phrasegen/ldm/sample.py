"""Single-pass ancestral sampling of a full latent song."""

import torch

from .schedule import DiffusionSchedule, ddpm_step


@torch.no_grad()
def generate(model, schedule=None, seed=0, n_steps=None, length_bucket=None,
             sections=None, context=None):
    """One full reverse-diffusion pass -> (context, io_channels) tensor.

    The whole latent sequence is denoised jointly; nothing is generated
    incrementally or fed back in. Deterministic for a fixed seed.
    """
    model.eval()
    cfg = model.config
    schedule = schedule or DiffusionSchedule.linear(cfg.T, cfg.beta_start,
                                                    cfg.beta_end)
    context = context or cfg.context
    gen = torch.Generator().manual_seed(seed)
    x = torch.randn(1, context, cfg.io_channels, generator=gen)
    bucket = None
    if length_bucket is not None:
        bucket = torch.tensor([length_bucket], dtype=torch.long)
    memory = model.structure_encoder(sections) if sections else None
    steps = schedule.sampling_timesteps(n_steps)
    for i, t in enumerate(steps):
        t_prev = steps[i + 1] if i + 1 < len(steps) else 0
        eps = model(x, torch.tensor([t]), bucket, memory)
        noise = torch.randn(x.shape, generator=gen) if t_prev > 0 else None
        x = ddpm_step(x, eps, t, t_prev, schedule, noise)
    return x[0]
