"""DDPM noise schedule and forward/reverse transition arithmetic.

Linear beta schedule by default; t is 1-indexed (t in [1, T], array index
t-1). The ancestral sampler may run on a subsampled timestep sequence,
with transition coefficients recomputed from alpha-bar ratios.
"""

from dataclasses import dataclass

import numpy as np
import torch


class ScheduleError(ValueError):
    pass


@dataclass
class DiffusionSchedule:
    betas: torch.Tensor
    alphas: torch.Tensor
    alpha_bars: torch.Tensor

    @classmethod
    def linear(cls, T=1000, beta_start=1e-4, beta_end=0.02):
        if T < 1:
            raise ScheduleError("need at least one diffusion step")
        if not 0 < beta_start <= beta_end < 1:
            raise ScheduleError(
                f"invalid beta range ({beta_start}, {beta_end})")
        if T == 1:
            betas = torch.tensor([beta_start], dtype=torch.float64)
        else:
            betas = torch.linspace(beta_start, beta_end, T, dtype=torch.float64)
        alphas = 1.0 - betas
        alpha_bars = torch.cumprod(alphas, dim=0)
        return cls(betas, alphas, alpha_bars)

    @property
    def T(self):
        return len(self.betas)

    def abar(self, t):
        """alpha_bar at (possibly batched) 1-indexed t."""
        t = torch.as_tensor(t, dtype=torch.long)
        return self.alpha_bars[t - 1]

    def sampling_timesteps(self, n_steps=None):
        """Descending 1-indexed timesteps for the reverse chain."""
        if n_steps is None or n_steps >= self.T:
            return list(range(self.T, 0, -1))
        ts = np.linspace(1, self.T, n_steps).round().astype(int)
        return sorted(set(ts.tolist()), reverse=True)


def q_sample(x0, t, noise, schedule):
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    abar = schedule.abar(t).to(x0.dtype)
    while abar.dim() < x0.dim():
        abar = abar.unsqueeze(-1)
    return torch.sqrt(abar) * x0 + torch.sqrt(1.0 - abar) * noise


def ddpm_step(x_t, eps_pred, t, t_prev, schedule, noise=None):
    """One ancestral posterior step from t to t_prev (t_prev < t; 0 = data).

    Coefficients come from the alpha-bar ratio so subsampled chains are
    handled uniformly; the final step (t_prev == 0) adds no noise.
    """
    abar_t = float(schedule.abar(t))
    abar_prev = float(schedule.abar(t_prev)) if t_prev > 0 else 1.0
    alpha_eff = abar_t / abar_prev
    beta_eff = 1.0 - alpha_eff
    mean = (x_t - beta_eff / np.sqrt(1.0 - abar_t) * eps_pred) / np.sqrt(alpha_eff)
    if t_prev == 0:
        return mean
    var = beta_eff * (1.0 - abar_prev) / (1.0 - abar_t)
    if noise is None:
        noise = torch.randn_like(x_t)
    return mean + np.sqrt(max(var, 0.0)) * noise
