"""Sequence compression model: encoder-decoder transformer with a
multi-query bottleneck and a Gaussian latent head.

Three stages share one set of weights and differ only in what the decoder
cross-attends to:
  pretrain  -> all encoder states (span-infilling denoising)
  ae        -> the m query-position encoder outputs
  vae       -> m memory vectors expanded from the sampled latent

Attention uses explicit head width (inner dim = n_heads * d_head) so head
count need not divide the hidden size.
"""

import warnings
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .. import vocab

STAGES = ("pretrain", "ae", "vae")


@dataclass
class VaeConfig:
    enc_layers: int = 3
    dec_layers: int = 3
    d_hidden: int = 512
    n_heads: int = 6
    d_head: int = 64
    d_ff: int = 1024
    n_queries: int = 4
    latent_dim: int = 64
    kl_weight: float = 0.01
    max_len: int = 64  # token context limit, excluding query slots
    logvar_min: float = -12.0
    logvar_max: float = 6.0
    dropout: float = 0.0
    # training
    batch_size: int = 128
    lr: float = 1e-4
    warmup_steps: int = 1000
    weight_decay: float = 0.01
    early_stop_patience: int = 20

    def validate(self):
        if self.latent_dim not in (32, 64, 128):
            raise ValueError(f"unsupported latent_dim {self.latent_dim}")
        if self.n_queries < 1:
            raise ValueError("need at least one query")
        if self.kl_weight < 0:
            raise ValueError("kl_weight must be >= 0")


class Attention(nn.Module):
    def __init__(self, d_model, n_heads, d_head, dropout=0.0):
        super().__init__()
        inner = n_heads * d_head
        self.n_heads = n_heads
        self.d_head = d_head
        self.q = nn.Linear(d_model, inner, bias=False)
        self.k = nn.Linear(d_model, inner, bias=False)
        self.v = nn.Linear(d_model, inner, bias=False)
        self.out = nn.Linear(inner, d_model, bias=False)
        self.dropout = dropout

    def forward(self, x, memory=None, key_padding_mask=None, causal=False):
        mem = x if memory is None else memory
        B, Tq, _ = x.shape
        Tk = mem.shape[1]
        q = self.q(x).view(B, Tq, self.n_heads, self.d_head).transpose(1, 2)
        k = self.k(mem).view(B, Tk, self.n_heads, self.d_head).transpose(1, 2)
        v = self.v(mem).view(B, Tk, self.n_heads, self.d_head).transpose(1, 2)
        mask = None
        if key_padding_mask is not None:
            # True marks padding
            mask = ~key_padding_mask[:, None, None, :]
        attn = F.scaled_dot_product_attention(
            q, k, v, attn_mask=mask, is_causal=causal,
            dropout_p=self.dropout if self.training else 0.0)
        attn = attn.transpose(1, 2).reshape(B, Tq, -1)
        return self.out(attn)


class FeedForward(nn.Module):
    def __init__(self, d_model, d_ff, dropout=0.0):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_model, d_ff), nn.GELU(),
            nn.Dropout(dropout), nn.Linear(d_ff, d_model))

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.d_hidden)
        self.attn = Attention(cfg.d_hidden, cfg.n_heads, cfg.d_head, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.d_hidden)
        self.ff = FeedForward(cfg.d_hidden, cfg.d_ff, cfg.dropout)

    def forward(self, x, pad_mask):
        x = x + self.attn(self.norm1(x), key_padding_mask=pad_mask)
        return x + self.ff(self.norm2(x))


class DecoderLayer(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.d_hidden)
        self.self_attn = Attention(cfg.d_hidden, cfg.n_heads, cfg.d_head, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.d_hidden)
        self.cross_attn = Attention(cfg.d_hidden, cfg.n_heads, cfg.d_head, cfg.dropout)
        self.norm3 = nn.LayerNorm(cfg.d_hidden)
        self.ff = FeedForward(cfg.d_hidden, cfg.d_ff, cfg.dropout)

    def forward(self, x, memory, memory_pad_mask):
        x = x + self.self_attn(self.norm1(x), causal=True)
        x = x + self.cross_attn(self.norm2(x), memory=memory,
                                key_padding_mask=memory_pad_mask)
        return x + self.ff(self.norm3(x))


def kl_divergence(mean, log_var):
    """KL(q || N(0, I)) per sequence, summed over latent dims."""
    return -0.5 * torch.sum(1 + log_var - mean ** 2 - torch.exp(log_var), dim=-1)


class PhraseCompressor(nn.Module):
    def __init__(self, config: VaeConfig):
        super().__init__()
        config.validate()
        self.config = config
        d = config.d_hidden
        m = config.n_queries
        self.token_emb = nn.Embedding(vocab.VOCAB_SIZE, d)
        self.enc_pos = nn.Embedding(config.max_len + m, d)
        self.dec_pos = nn.Embedding(config.max_len + 2, d)
        self.enc_layers = nn.ModuleList(
            EncoderLayer(config) for _ in range(config.enc_layers))
        self.enc_norm = nn.LayerNorm(d)
        self.dec_layers = nn.ModuleList(
            DecoderLayer(config) for _ in range(config.dec_layers))
        self.dec_norm = nn.LayerNorm(d)
        self.lm_head = nn.Linear(d, vocab.VOCAB_SIZE, bias=False)
        self.bottleneck_proj = nn.Linear(m * d, 2 * config.latent_dim)
        self.latent_expand = nn.Linear(config.latent_dim, m * d)
        self.query_ids = nn.Parameter(
            torch.tensor([vocab.QUERIES[i % vocab.N_QUERY] for i in range(m)],
                         dtype=torch.long), requires_grad=False)

    # ------------------------------------------------------------------
    # encoder side

    def encode_states(self, tokens, pad_mask, with_queries):
        """Run the encoder; optionally with query slots prepended."""
        B, T = tokens.shape
        limit = self.config.max_len
        if T > limit:
            raise ValueError(f"input length {T} exceeds context limit {limit}")
        if with_queries:
            q = self.query_ids.unsqueeze(0).expand(B, -1)
            tokens = torch.cat([q, tokens], dim=1)
            pad_mask = torch.cat(
                [torch.zeros(B, q.shape[1], dtype=torch.bool,
                             device=tokens.device), pad_mask], dim=1)
        x = self.token_emb(tokens) + self.enc_pos(
            torch.arange(tokens.shape[1], device=tokens.device))
        for layer in self.enc_layers:
            x = layer(x, pad_mask)
        return self.enc_norm(x), pad_mask

    def encode(self, tokens, pad_mask):
        """Query bundle (B, m, d_hidden) for a batch of phrase sequences."""
        states, _ = self.encode_states(tokens, pad_mask, with_queries=True)
        return states[:, : self.config.n_queries]

    def bottleneck_project(self, bundle):
        """Bundle -> (mean, log_var), each (B, latent_dim)."""
        B = bundle.shape[0]
        moments = self.bottleneck_proj(bundle.reshape(B, -1))
        mean, log_var = moments.chunk(2, dim=-1)
        log_var = log_var.clamp(self.config.logvar_min, self.config.logvar_max)
        return mean, log_var

    def reparameterize(self, mean, log_var, generator=None):
        eps = torch.randn(mean.shape, generator=generator, device=mean.device,
                          dtype=mean.dtype)
        return mean + torch.exp(0.5 * log_var) * eps

    def latent_memory(self, z):
        B = z.shape[0]
        return self.latent_expand(z).view(B, self.config.n_queries, -1)

    # ------------------------------------------------------------------
    # decoder side

    def decode_logits(self, dec_tokens, memory, memory_pad_mask=None):
        x = self.token_emb(dec_tokens) + self.dec_pos(
            torch.arange(dec_tokens.shape[1], device=dec_tokens.device))
        for layer in self.dec_layers:
            x = layer(x, memory, memory_pad_mask)
        return self.lm_head(self.dec_norm(x))

    def forward(self, enc_tokens, enc_pad_mask, dec_tokens, stage,
                generator=None):
        """Logits (and VAE moments) for one training step."""
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        moments = None
        if stage == "pretrain":
            memory, mem_mask = self.encode_states(
                enc_tokens, enc_pad_mask, with_queries=False)
        elif stage == "ae":
            memory = self.encode(enc_tokens, enc_pad_mask)
            mem_mask = None
        else:
            bundle = self.encode(enc_tokens, enc_pad_mask)
            mean, log_var = self.bottleneck_project(bundle)
            moments = (mean, log_var)
            if self.training:
                z = self.reparameterize(mean, log_var, generator)
            else:
                z = mean
            memory = self.latent_memory(z)
            mem_mask = None
        logits = self.decode_logits(dec_tokens, memory, mem_mask)
        return logits, moments

    @torch.no_grad()
    def greedy_decode(self, memory, memory_pad_mask=None, max_len=None):
        """Batched greedy decoding from BOS; returns (token lists, truncated)."""
        self.eval()
        max_len = max_len or self.config.max_len
        B = memory.shape[0]
        device = memory.device
        tokens = torch.full((B, 1), vocab.BOS, dtype=torch.long, device=device)
        done = torch.zeros(B, dtype=torch.bool, device=device)
        for _ in range(max_len + 1):
            logits = self.decode_logits(tokens, memory, memory_pad_mask)
            nxt = logits[:, -1].argmax(dim=-1)
            nxt = torch.where(done, torch.full_like(nxt, vocab.PAD), nxt)
            tokens = torch.cat([tokens, nxt[:, None]], dim=1)
            done = done | (nxt == vocab.EOS)
            if done.all():
                break
        out, truncated = [], []
        for row, fin in zip(tokens[:, 1:].tolist(), done.tolist()):
            seq = []
            for t in row:
                if t in (vocab.EOS, vocab.PAD):
                    break
                seq.append(t)
            out.append(seq)
            truncated.append(not fin)
        if any(truncated):
            warnings.warn("greedy decode hit the length cap without EOS")
        return out, truncated

    # ------------------------------------------------------------------
    # eval-mode conveniences on raw python token lists

    def _batchify(self, seqs, device):
        lens = [len(s) for s in seqs]
        T = max(lens) if lens else 1
        tokens = torch.full((len(seqs), T), vocab.PAD, dtype=torch.long,
                            device=device)
        for i, s in enumerate(seqs):
            tokens[i, : len(s)] = torch.tensor(s, dtype=torch.long, device=device)
        pad = tokens == vocab.PAD
        return tokens, pad

    @torch.no_grad()
    def encode_means(self, seqs):
        """Token lists -> latent means, (n, latent_dim) float32."""
        self.eval()
        device = next(self.parameters()).device
        tokens, pad = self._batchify(seqs, device)
        mean, _ = self.bottleneck_project(self.encode(tokens, pad))
        return mean.float()

    @torch.no_grad()
    def decode_latents(self, z, max_len=None):
        """Latents (n, latent_dim) -> token lists via greedy decoding."""
        self.eval()
        z = torch.as_tensor(z, dtype=torch.float32,
                            device=next(self.parameters()).device)
        memory = self.latent_memory(z)
        return self.greedy_decode(memory, max_len=max_len)

    def parameter_count(self):
        return sum(p.numel() for p in self.parameters())
