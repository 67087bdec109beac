"""Staged training for the phrase compression model.

Stage order is fixed: span-infilling pretrain -> multi-query AE -> VAE.
Each stage early-stops on validation loss and keeps its best weights.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .. import vocab
from .corruption import corrupt_spans
from .model import STAGES, PhraseCompressor, VaeConfig, kl_divergence


class DivergenceError(RuntimeError):
    pass


class StageOrderError(RuntimeError):
    pass


@dataclass
class TrainResult:
    stage: str
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_val: float = math.inf
    best_epoch: int = -1


def collate(pairs, device="cpu"):
    """(enc_seq, target_seq) pairs -> padded tensors for one step."""
    enc_len = max(len(e) for e, _ in pairs)
    dec_len = max(len(t) for _, t in pairs) + 1
    B = len(pairs)
    enc = torch.full((B, enc_len), vocab.PAD, dtype=torch.long)
    dec_in = torch.full((B, dec_len), vocab.PAD, dtype=torch.long)
    labels = torch.full((B, dec_len), vocab.PAD, dtype=torch.long)
    for i, (e, t) in enumerate(pairs):
        enc[i, : len(e)] = torch.tensor(e, dtype=torch.long)
        dec_in[i, 0] = vocab.BOS
        dec_in[i, 1 : len(t) + 1] = torch.tensor(t, dtype=torch.long)
        labels[i, : len(t)] = torch.tensor(t, dtype=torch.long)
        labels[i, len(t)] = vocab.EOS
    return (enc.to(device), (enc == vocab.PAD).to(device),
            dec_in.to(device), labels.to(device))


def step_loss(model, batch, stage, generator=None):
    enc, enc_pad, dec_in, labels = batch
    logits, moments = model(enc, enc_pad, dec_in, stage, generator)
    # per-sequence summed CE (batch-averaged), matching the per-sequence
    # summed KL term so kl_weight keeps its meaning across phrase lengths
    token_ce = F.cross_entropy(logits.transpose(1, 2), labels,
                               ignore_index=vocab.PAD, reduction="none")
    recon = token_ce.sum(dim=1).mean()
    loss = recon
    kl = None
    if stage == "vae":
        kl = kl_divergence(*moments).mean()
        loss = recon + model.config.kl_weight * kl
    return loss, recon, kl


def _epoch_pairs(seqs, stage, rng, mask_ratio, mean_span):
    if stage == "pretrain":
        return [corrupt_spans(s, rng, mask_ratio, mean_span) for s in seqs]
    return [(s, s) for s in seqs]


def train_stage(model, stage, train_seqs, val_seqs, max_epochs,
                seed=0, mask_ratio=0.3, mean_span=3.0, log=None):
    """Run one stage; restores the best-validation weights before returning."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    cfg = model.config
    rng = np.random.default_rng([seed, STAGES.index(stage)])
    generator = torch.Generator().manual_seed(seed + 17)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr,
                            weight_decay=cfg.weight_decay)
    sched = torch.optim.lr_scheduler.LambdaLR(
        opt, lambda s: min(1.0, (s + 1) / max(1, cfg.warmup_steps)))
    result = TrainResult(stage=stage)
    best_state = None
    since_best = 0
    for epoch in range(max_epochs):
        model.train()
        pairs = _epoch_pairs(train_seqs, stage, rng, mask_ratio, mean_span)
        order = rng.permutation(len(pairs))
        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [pairs[i] for i in order[lo:lo + cfg.batch_size]]
            batch = collate(chunk)
            loss, _, _ = step_loss(model, batch, stage, generator)
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at stage {stage}, epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
            opt.step()
            sched.step()
            losses.append(loss.item())
        result.train_loss.append(float(np.mean(losses)))
        val = evaluate_loss(model, val_seqs, stage, rng=np.random.default_rng(
            [seed, 99, epoch]), mask_ratio=mask_ratio, mean_span=mean_span)
        result.val_loss.append(val)
        if log:
            log(f"[{stage}] epoch {epoch}: train {result.train_loss[-1]:.4f} "
                f"val {val:.4f}")
        if val < result.best_val:
            result.best_val = val
            result.best_epoch = epoch
            best_state = {k: v.detach().clone()
                          for k, v in model.state_dict().items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    return result


@torch.no_grad()
def evaluate_loss(model, seqs, stage, rng=None, mask_ratio=0.3, mean_span=3.0):
    if not seqs:
        return math.nan
    model.eval()
    rng = rng or np.random.default_rng(0)
    pairs = _epoch_pairs(seqs, stage, rng, mask_ratio, mean_span)
    total, count = 0.0, 0
    for lo in range(0, len(pairs), model.config.batch_size):
        chunk = pairs[lo:lo + model.config.batch_size]
        loss, _, _ = step_loss(model, collate(chunk), stage)
        total += loss.item() * len(chunk)
        count += len(chunk)
    return total / count


@torch.no_grad()
def reconstruct(model, seqs, stage):
    """Greedy reconstructions of token sequences under a trained stage."""
    model.eval()
    device = next(model.parameters()).device
    out = []
    for lo in range(0, len(seqs), model.config.batch_size):
        chunk = seqs[lo:lo + model.config.batch_size]
        tokens, pad = model._batchify(chunk, device)
        if stage == "pretrain":
            memory, mem_mask = model.encode_states(tokens, pad, with_queries=False)
            decoded, _ = model.greedy_decode(memory, mem_mask)
        elif stage == "ae":
            decoded, _ = model.greedy_decode(model.encode(tokens, pad))
        else:
            mean, _ = model.bottleneck_project(model.encode(tokens, pad))
            decoded, _ = model.greedy_decode(model.latent_memory(mean))
        out.extend(decoded)
    return out


@torch.no_grad()
def teacher_forced_accuracy(model, seqs, stage):
    model.eval()
    correct, total = 0, 0
    for lo in range(0, len(seqs), model.config.batch_size):
        chunk = [(s, s) for s in seqs[lo:lo + model.config.batch_size]]
        enc, enc_pad, dec_in, labels = collate(chunk)
        logits, _ = model(enc, enc_pad, dec_in, stage)
        mask = labels != vocab.PAD
        correct += (logits.argmax(-1)[mask] == labels[mask]).sum().item()
        total += mask.sum().item()
    return correct / max(1, total)


# ---------------------------------------------------------------------------
# checkpoints

NEXT_STAGE = {"pretrain": "ae", "ae": "vae"}


def save_checkpoint(path, model, stage, extra=None):
    payload = {
        "config": vars(model.config),
        "stage": stage,
        "state_dict": model.state_dict(),
        "vocab_hash": vocab.vocab_hash(),
    }
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("vocab_hash") != vocab.vocab_hash():
        raise RuntimeError(f"vocabulary hash mismatch in checkpoint {path}")
    model = PhraseCompressor(VaeConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    return model, payload["stage"], payload.get("extra", {})


def require_stage(found, expected, action):
    if found != expected:
        raise StageOrderError(
            f"{action} requires a {expected!r}-stage checkpoint, got {found!r}")
