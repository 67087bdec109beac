"""Diffusion training over cached latent songs.

Noise-prediction MSE over every position of the fixed-length sequence,
padding included; conditions follow the configured mode, with dropout to
the learned null embeddings so one checkpoint can also sample
unconditionally.
"""

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from ..latent_cache import padded_latent_song
from .model import bucket_of
from .schedule import DiffusionSchedule, q_sample

MODES = ("unconditional", "length", "length+structure")


@dataclass
class LdmTrainResult:
    mode: str
    losses: list = field(default_factory=list)

    def smoothed_final(self, window=50):
        tail = self.losses[-window:]
        return float(np.mean(tail)) if tail else float("nan")


def train_ldm(model, records, eos_latent, mode="unconditional", steps=None,
              context=None, seed=0, log=None, log_every=200):
    """Train in place; returns the per-step loss history."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; pick from {MODES}")
    cfg = model.config
    context = context or cfg.context
    steps = steps if steps is not None else cfg.train_steps
    schedule = DiffusionSchedule.linear(cfg.T, cfg.beta_start, cfg.beta_end)
    data = torch.tensor(np.stack(
        [padded_latent_song(r, context, eos_latent) for r in records]))
    buckets = torch.tensor([bucket_of(r.n_bars) for r in records])
    struct_memories = None
    if mode == "length+structure":
        struct_memories = [tuple(r.sections) for r in records]
    rng = np.random.default_rng(seed)
    gen = torch.Generator().manual_seed(seed + 1)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr)
    result = LdmTrainResult(mode=mode)
    model.train()
    for step in range(steps):
        idx = rng.integers(0, len(records), size=min(cfg.batch_size, len(records)))
        x0 = data[idx]
        B = x0.shape[0]
        t = torch.randint(1, cfg.T + 1, (B,), generator=gen)
        noise = torch.randn(x0.shape, generator=gen)
        x_t = q_sample(x0, t, noise, schedule).float()
        drop = torch.rand(B, generator=gen) < cfg.cond_dropout
        bucket = None
        if mode != "unconditional":
            bucket = buckets[idx].clone()
            bucket[drop] = model.null_bucket
        memory = None
        if struct_memories is not None:
            # batch members may carry different prompts; encode per row
            rows = []
            for j, i in enumerate(idx):
                if drop[j] or not struct_memories[i]:
                    rows.append(model.null_memory[0])
                else:
                    rows.append(model.structure_encoder(
                        list(struct_memories[i]))[0])
            S = max(r.shape[0] for r in rows)
            memory = torch.zeros(B, S, cfg.cross_attn_dim)
            for j, r in enumerate(rows):
                memory[j, : r.shape[0]] = r
        eps = model(x_t, t, bucket, memory)
        loss = F.mse_loss(eps, noise.float())
        opt.zero_grad()
        loss.backward()
        opt.step()
        result.losses.append(loss.item())
        if log and (step % log_every == 0 or step == steps - 1):
            log(f"[ldm/{mode}] step {step}: mse {loss.item():.4f}")
    return result
