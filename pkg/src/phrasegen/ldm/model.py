"""Encoder-only diffusion transformer over phrase-latent sequences.

Self-attention uses rotary position embeddings and no attention mask;
timestep and length-bucket conditions are added to every position, and
the structure prompt enters only through cross-attention against a small
transformer encoder's output (a learned null memory when absent).
"""

import math
import warnings
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..synthetic import SECTION_TYPES

BUCKET_SIZE = 10
N_BUCKETS = 13  # covers 0..129 bars at B=10


def bucket_of(n_bars, bucket_size=BUCKET_SIZE):
    """Half-open length bucket id: n_bars in [kB, (k+1)B) -> k."""
    if n_bars < 0:
        raise ValueError("negative bar count")
    return n_bars // bucket_size


@dataclass
class LdmConfig:
    d_model: int = 512
    io_channels: int = 64
    layers: int = 6
    heads: int = 16
    d_ff: int = 3072
    context: int = 512
    cross_attn_dim: int = 128
    cross_heads: int = 4
    time_proj_dim: int = 128
    length_emb_dim: int = 128
    n_buckets: int = N_BUCKETS
    struct_layers: int = 3
    struct_heads: int = 4
    max_sections: int = 64
    max_section_bars: int = 128
    # diffusion
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    # training
    batch_size: int = 128
    lr: float = 5e-4
    train_steps: int = 200_000
    cond_dropout: float = 0.1

    def validate(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.d_model < 2 * self.io_channels:
            # narrow models are known to fail even single-song fits; they
            # stay constructible for exactly that comparison
            warnings.warn(
                f"d_model={self.d_model} is below twice the latent width "
                f"({self.io_channels}); training is expected to underfit")


class RotaryEmbedding(nn.Module):
    def __init__(self, head_dim, base=10000.0):
        super().__init__()
        inv_freq = 1.0 / base ** (torch.arange(0, head_dim, 2).float() / head_dim)
        self.register_buffer("inv_freq", inv_freq, persistent=False)

    def forward(self, seq_len, device):
        t = torch.arange(seq_len, device=device, dtype=torch.float32)
        freqs = torch.outer(t, self.inv_freq.to(device))
        return freqs.cos(), freqs.sin()


def apply_rotary(x, cos, sin):
    """x: (B, H, T, D); rotate pairs of channels by position-dependent angles."""
    x1, x2 = x[..., 0::2], x[..., 1::2]
    cos = cos[None, None]
    sin = sin[None, None]
    out = torch.empty_like(x)
    out[..., 0::2] = x1 * cos - x2 * sin
    out[..., 1::2] = x1 * sin + x2 * cos
    return out


class RotarySelfAttention(nn.Module):
    def __init__(self, d_model, heads):
        super().__init__()
        if d_model % heads:
            raise ValueError("heads must divide d_model")
        self.heads = heads
        self.head_dim = d_model // heads
        self.qkv = nn.Linear(d_model, 3 * d_model, bias=False)
        self.out = nn.Linear(d_model, d_model, bias=False)
        self.rope = RotaryEmbedding(self.head_dim)

    def forward(self, x):
        B, T, _ = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        shape = (B, T, self.heads, self.head_dim)
        q = q.view(shape).transpose(1, 2)
        k = k.view(shape).transpose(1, 2)
        v = v.view(shape).transpose(1, 2)
        cos, sin = self.rope(T, x.device)
        q = apply_rotary(q, cos, sin)
        k = apply_rotary(k, cos, sin)
        attn = F.scaled_dot_product_attention(q, k, v)
        return self.out(attn.transpose(1, 2).reshape(B, T, -1))


class CrossAttention(nn.Module):
    """Cross-attention computed at the (narrow) conditioning width."""

    def __init__(self, d_model, cond_dim, heads):
        super().__init__()
        self.heads = heads
        self.head_dim = cond_dim // heads
        self.q = nn.Linear(d_model, cond_dim, bias=False)
        self.k = nn.Linear(cond_dim, cond_dim, bias=False)
        self.v = nn.Linear(cond_dim, cond_dim, bias=False)
        self.out = nn.Linear(cond_dim, d_model, bias=False)

    def forward(self, x, memory):
        B, T, _ = x.shape
        S = memory.shape[1]
        q = self.q(x).view(B, T, self.heads, self.head_dim).transpose(1, 2)
        k = self.k(memory).view(B, S, self.heads, self.head_dim).transpose(1, 2)
        v = self.v(memory).view(B, S, self.heads, self.head_dim).transpose(1, 2)
        attn = F.scaled_dot_product_attention(q, k, v)
        return self.out(attn.transpose(1, 2).reshape(B, T, -1))


class DiTBlock(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.self_attn = RotarySelfAttention(cfg.d_model, cfg.heads)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.cross_attn = CrossAttention(cfg.d_model, cfg.cross_attn_dim,
                                         cfg.cross_heads)
        self.norm3 = nn.LayerNorm(cfg.d_model)
        self.ff = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.d_ff), nn.GELU(),
            nn.Linear(cfg.d_ff, cfg.d_model))

    def forward(self, x, memory):
        x = x + self.self_attn(self.norm1(x))
        x = x + self.cross_attn(self.norm2(x), memory)
        return x + self.ff(self.norm3(x))


def sinusoidal_embedding(t, dim):
    """(B,) timesteps -> (B, dim) sinusoidal features."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) *
                      torch.arange(half, device=t.device).float() / half)
    args = t.float()[:, None] * freqs[None]
    return torch.cat([args.sin(), args.cos()], dim=-1)


class StructureEncoder(nn.Module):
    """Section layout prompt -> one contextualized memory vector per section."""

    def __init__(self, cfg):
        super().__init__()
        d = cfg.cross_attn_dim
        self.type_vocab = list(SECTION_TYPES) + ["UNK"]
        self.type_emb = nn.Embedding(len(self.type_vocab), d // 2)
        self.len_emb = nn.Embedding(cfg.max_section_bars + 1, d // 2)
        self.pos_emb = nn.Embedding(cfg.max_sections, d)
        layer = nn.TransformerEncoderLayer(
            d_model=d, nhead=cfg.struct_heads, dim_feedforward=4 * d,
            batch_first=True, dropout=0.0, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, cfg.struct_layers,
                                             enable_nested_tensor=False)

    def type_id(self, kind):
        try:
            return self.type_vocab.index(kind)
        except ValueError:
            raise ValueError(f"unknown section type {kind!r}") from None

    def forward(self, sections):
        """sections: list of (type, n_bars) -> (1, n_sections, cond_dim)."""
        if not sections:
            raise ValueError("empty structure prompt; use the null memory")
        types = torch.tensor([self.type_id(k) for k, _ in sections])
        lens = torch.tensor([min(n, self.len_emb.num_embeddings - 1)
                             for _, n in sections])
        x = torch.cat([self.type_emb(types), self.len_emb(lens)], dim=-1)
        x = x + self.pos_emb(torch.arange(len(sections)))
        return self.encoder(x[None])


class LatentDiffusionModel(nn.Module):
    def __init__(self, config: LdmConfig):
        super().__init__()
        config.validate()
        self.config = config
        d = config.d_model
        self.in_proj = nn.Linear(config.io_channels, d)
        self.blocks = nn.ModuleList(DiTBlock(config) for _ in range(config.layers))
        self.final_norm = nn.LayerNorm(d)
        self.out_proj = nn.Linear(d, config.io_channels)
        nn.init.zeros_(self.out_proj.weight)
        nn.init.zeros_(self.out_proj.bias)
        self.time_mlp = nn.Sequential(
            nn.Linear(config.time_proj_dim, d), nn.SiLU(), nn.Linear(d, d))
        # bucket table + one extra row acting as the learned null embedding
        self.length_emb = nn.Embedding(config.n_buckets + 1, config.length_emb_dim)
        self.length_proj = nn.Linear(config.length_emb_dim, d)
        self.null_memory = nn.Parameter(
            torch.randn(1, 1, config.cross_attn_dim) * 0.02)
        self.structure_encoder = StructureEncoder(config)

    @property
    def null_bucket(self):
        return self.config.n_buckets

    def condition_embeddings(self, t, length_bucket=None):
        """Additive (B, d_model) embeddings for timestep and length."""
        t_emb = self.time_mlp(sinusoidal_embedding(t, self.config.time_proj_dim))
        if length_bucket is None:
            length_bucket = torch.full_like(t, self.null_bucket)
        len_emb = self.length_proj(self.length_emb(length_bucket))
        return t_emb, len_emb

    def apply_conditions(self, hidden, t_emb, len_emb):
        """Timestep and length are added to every sequence position."""
        return hidden + t_emb[:, None, :] + len_emb[:, None, :]

    def forward(self, x_t, t, length_bucket=None, struct_memory=None):
        """Predict the noise in x_t: (B, S, io_channels) -> same shape."""
        B = x_t.shape[0]
        if struct_memory is None:
            struct_memory = self.null_memory.expand(B, -1, -1)
        elif struct_memory.shape[0] == 1 and B > 1:
            struct_memory = struct_memory.expand(B, -1, -1)
        t_emb, len_emb = self.condition_embeddings(t, length_bucket)
        h = self.apply_conditions(self.in_proj(x_t), t_emb, len_emb)
        for block in self.blocks:
            h = block(h, struct_memory)
        return self.out_proj(self.final_norm(h))

    def parameter_count(self):
        return sum(p.numel() for p in self.parameters())
