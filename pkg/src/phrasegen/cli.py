"""Pipeline orchestration CLI.

Subcommands: prepare | train-vae | cache-latents | train-ldm | generate |
evaluate | interpolate. Every command takes --config/--seed/--out, locks
its output directory and appends to the run manifest.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import torch

from . import grammar, latent_cache, midi_io, synthetic, vocab
from .configs import RunConfig
from .ldm import model as ldm_model
from .ldm import sample as ldm_sample
from .ldm.decode import truncate_and_decode
from .ldm.train import train_ldm
from .manifest import RunManifest, missing_artifact, output_lock
from .metrics import (bar_ssm, length_accuracy, memorization_report,
                      phrase_fid, srs)
from .metrics.report import MetricReport, save_ssm_image
from .metrics.structure import pool_bar_latents
from .score import Song
from .vae import PhraseCompressor
from .vae import train as vae_train


# ---------------------------------------------------------------------------
# corpus persistence


def save_corpus(directory, songs, annotations):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "songs.jsonl", "w") as f:
        for song, ann in zip(songs, annotations):
            f.write(json.dumps({
                "song_id": ann.song_id,
                "melody_instrument": song.melody_instrument,
                "tokens": vocab.to_text(grammar.tokenize_song(song)),
            }) + "\n")
    with open(directory / "annotations.jsonl", "w") as f:
        for ann in annotations:
            f.write(json.dumps({
                "song_id": ann.song_id,
                "sections": [[k, n] for k, n in ann.sections],
            }) + "\n")


def load_corpus(directory):
    directory = Path(directory)
    if not (directory / "songs.jsonl").exists():
        raise missing_artifact("corpus", directory / "songs.jsonl", "prepare")
    songs = {}
    for line in (directory / "songs.jsonl").read_text().splitlines():
        entry = json.loads(line)
        song = grammar.detokenize_song(vocab.from_text(entry["tokens"]),
                                       entry["melody_instrument"])
        songs[entry["song_id"]] = song
    sections = {}
    ann_path = directory / "annotations.jsonl"
    if ann_path.exists():
        for line in ann_path.read_text().splitlines():
            entry = json.loads(line)
            sections[entry["song_id"]] = [tuple(s) for s in entry["sections"]]
    return songs, sections


def load_split(out_dir):
    path = Path(out_dir) / "corpus" / "split.json"
    if not path.exists():
        raise missing_artifact("train/val split", path, "prepare")
    return json.loads(path.read_text())


def phrase_training_sequences(songs):
    """Deduplicated phrase + terminator token sequences from songs."""
    seqs = []
    seen = set()
    for song in songs:
        for seq, _ in latent_cache.song_token_units(song):
            key = tuple(seq)
            if key not in seen:
                seen.add(key)
                seqs.append(seq)
    return seqs


def parse_structure(text):
    """'i-8,A-8,B-4' -> [('i', 8), ('A', 8), ('B', 4)]."""
    sections = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        kind, _, n = item.partition("-")
        sections.append((kind, int(n)))
    return sections


# ---------------------------------------------------------------------------
# commands


def cmd_prepare(cfg: RunConfig):
    out = Path(cfg.out_dir)
    manifest = RunManifest(out)
    rejected = []
    if cfg.midi_dir:
        songs, annotations = [], []
        ingest = midi_io.IngestConfig(truncate=cfg.truncate_long_songs)
        for path in sorted(Path(cfg.midi_dir).glob("*.mid*")):
            try:
                song = midi_io.ingest_midi(path.read_bytes(), ingest)
            except (midi_io.MidiParseError, midi_io.UnsupportedMeterError) as e:
                rejected.append({"song_id": path.stem, "reason": str(e)})
                continue
            songs.append(song)
            annotations.append(
                synthetic.SectionAnnotation(path.stem, ()))
    else:
        songs, annotations = synthetic.generate_corpus(
            cfg.seed, cfg.n_songs, cfg.corpus)
    if not songs:
        raise RuntimeError("prepared corpus is empty")
    save_corpus(out / "corpus", songs, annotations)
    ids = [a.song_id for a in annotations]
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(ids))
    n_val = max(1, round(cfg.val_fraction * len(ids)))
    val = sorted(ids[i] for i in order[:n_val])
    train = sorted(ids[i] for i in order[n_val:])
    split = {"train": train, "val": val}
    (out / "corpus" / "split.json").write_text(json.dumps(split, indent=1))
    manifest.record(
        "prepare",
        artifacts={"songs": out / "corpus" / "songs.jsonl",
                   "split": out / "corpus" / "split.json"},
        n_songs=len(songs), n_train=len(train), n_val=len(val),
        rejected=rejected, vocab_hash=vocab.vocab_hash())
    print(f"prepared {len(songs)} songs ({len(train)} train / {len(val)} val)")


STAGE_SEQUENCE = ("pretrain", "ae", "vae")


def cmd_train_vae(cfg: RunConfig, stage=None, from_ckpt=None, log=print):
    out = Path(cfg.out_dir)
    manifest = RunManifest(out)
    songs, _ = load_corpus(out / "corpus")
    split = load_split(out)
    train_seqs = phrase_training_sequences([songs[i] for i in split["train"]])
    val_seqs = phrase_training_sequences([songs[i] for i in split["val"]])
    (out / "vae").mkdir(parents=True, exist_ok=True)

    if stage is None:
        stages = STAGE_SEQUENCE
        model = PhraseCompressor(cfg.vae)
    else:
        if stage not in STAGE_SEQUENCE:
            raise ValueError(f"unknown stage {stage!r}")
        if stage == "pretrain":
            if from_ckpt:
                raise ValueError("pretrain starts from scratch; drop --from")
            model = PhraseCompressor(cfg.vae)
        else:
            if not from_ckpt:
                raise vae_train.StageOrderError(
                    f"--stage {stage} needs --from <checkpoint of the "
                    f"previous stage>")
            model, found, _ = vae_train.load_checkpoint(from_ckpt)
            prev = STAGE_SEQUENCE[STAGE_SEQUENCE.index(stage) - 1]
            vae_train.require_stage(found, prev, f"--stage {stage}")
        stages = (stage,)

    paths = {}
    for st in stages:
        result = vae_train.train_stage(
            model, st, train_seqs, val_seqs, cfg.vae_epochs,
            seed=cfg.seed, log=log)
        path = out / "vae" / f"{st}.pt"
        vae_train.save_checkpoint(path, model, st,
                                  extra={"best_val": result.best_val,
                                         "best_epoch": result.best_epoch})
        paths[st] = path
        manifest.record(f"train-vae/{st}", artifacts={st: path},
                        best_val=result.best_val,
                        best_epoch=result.best_epoch)
        log(f"stage {st}: best val {result.best_val:.4f} "
            f"(epoch {result.best_epoch}) -> {path}")
    return paths


def cmd_cache_latents(cfg: RunConfig, vae_ckpt=None):
    out = Path(cfg.out_dir)
    manifest = RunManifest(out)
    vae_ckpt = Path(vae_ckpt or out / "vae" / "vae.pt")
    if not vae_ckpt.exists():
        raise missing_artifact("VAE checkpoint", vae_ckpt, "train-vae")
    model, stage, _ = vae_train.load_checkpoint(vae_ckpt)
    vae_train.require_stage(stage, "vae", "cache-latents")
    songs, sections = load_corpus(out / "corpus")
    records = [
        latent_cache.encode_song(model, song, song_id,
                                 sections.get(song_id, ()))
        for song_id, song in songs.items()
    ]
    cache_dir = out / "latent_cache"
    latent_cache.save_cache(cache_dir, records)
    avg = latent_cache.average_units_per_bar(records)
    manifest.record("cache-latents",
                    artifacts={"manifest": cache_dir / "manifest.json"},
                    avg_phrases_per_bar=avg,
                    avg_latent_floats_per_bar=avg * model.config.latent_dim)
    print(f"cached {len(records)} songs "
          f"(avg {avg:.2f} phrase latents/bar)")
    return cache_dir


def _save_ldm(path, model, mode, context):
    torch.save({
        "config": vars(model.config),
        "mode": mode,
        "context": context,
        "state_dict": model.state_dict(),
        "vocab_hash": vocab.vocab_hash(),
    }, path)


def load_ldm(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("vocab_hash") != vocab.vocab_hash():
        raise RuntimeError(f"vocabulary hash mismatch in checkpoint {path}")
    model = ldm_model.LatentDiffusionModel(
        ldm_model.LdmConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    return model, payload["mode"], payload["context"]


def cmd_train_ldm(cfg: RunConfig, cache_dir=None, log=print):
    out = Path(cfg.out_dir)
    manifest = RunManifest(out)
    cache_dir = Path(cache_dir or out / "latent_cache")
    if not (cache_dir / "manifest.json").exists():
        raise missing_artifact("latent cache", cache_dir, "cache-latents")
    records = latent_cache.load_cache(cache_dir)
    split = load_split(out)
    train_records = [r for r in records if r.song_id in set(split["train"])]
    vae_model, _, _ = vae_train.load_checkpoint(out / "vae" / "vae.pt")
    eos = latent_cache.end_of_song_latent(vae_model)
    model = ldm_model.LatentDiffusionModel(cfg.ldm)
    result = train_ldm(model, train_records, eos, mode=cfg.conditioning,
                       steps=cfg.ldm_steps, context=cfg.ldm.context,
                       seed=cfg.seed, log=log)
    path = out / "ldm.pt"
    _save_ldm(path, model, cfg.conditioning, cfg.ldm.context)
    manifest.record("train-ldm", artifacts={"ldm": path},
                    mode=cfg.conditioning, steps=cfg.ldm_steps,
                    final_loss=result.smoothed_final())
    log(f"trained LDM ({cfg.conditioning}) -> {path}")
    return path


def cmd_generate(cfg: RunConfig, ckpt=None, vae_ckpt=None, seed=None,
                 bars_bucket=None, structure=None, steps=None, tag=None):
    out = Path(cfg.out_dir)
    manifest = RunManifest(out)
    ckpt = Path(ckpt or out / "ldm.pt")
    if not ckpt.exists():
        raise missing_artifact("LDM checkpoint", ckpt, "train-ldm")
    vae_ckpt = Path(vae_ckpt or out / "vae" / "vae.pt")
    if not vae_ckpt.exists():
        raise missing_artifact("VAE checkpoint", vae_ckpt, "train-vae")
    model, mode, context = load_ldm(ckpt)
    vae_model, _, _ = vae_train.load_checkpoint(vae_ckpt)
    seed = cfg.seed if seed is None else seed
    steps = steps or cfg.sampling_steps
    sections = parse_structure(structure) if structure else None
    latents = ldm_sample.generate(
        model, seed=seed, n_steps=steps, length_bucket=bars_bucket,
        sections=sections, context=context)
    gen_dir = out / "generated" / (tag or f"seed{seed}")
    gen_dir.mkdir(parents=True, exist_ok=True)
    # keep the raw sample and request even if decoding fails below
    np.save(gen_dir / "latents.npy", latents.numpy())
    request = {
        "checkpoint": str(ckpt), "mode": mode, "bucket": bars_bucket,
        "structure": structure, "seed": seed, "sampler_steps": steps,
    }
    (gen_dir / "request.json").write_text(json.dumps(request, indent=1))
    song, info = truncate_and_decode(latents.numpy(), vae_model)
    (gen_dir / "song.tokens").write_text(
        vocab.to_text(grammar.tokenize_song(song)) + "\n")
    (gen_dir / "song.mid").write_bytes(midi_io.write_midi(song))
    manifest.record("generate",
                    artifacts={"latents": gen_dir / "latents.npy",
                               "midi": gen_dir / "song.mid"},
                    request=request, n_bars=len(song.bars),
                    decode_flags=info.flags)
    print(f"generated {len(song.bars)} bars -> {gen_dir}")
    return gen_dir, song


def cmd_evaluate(cfg: RunConfig, gen_dir=None, n_reference=100,
                 bars_bucket=None, ssm_images=4):
    out = Path(cfg.out_dir)
    manifest = RunManifest(out)
    gen_root = Path(gen_dir or out / "generated")
    gen_dirs = sorted(d for d in gen_root.iterdir() if
                      (d / "song.tokens").exists()) if gen_root.exists() else []
    if not gen_dirs:
        raise missing_artifact("generated songs", gen_root, "generate")
    vae_model, _, _ = vae_train.load_checkpoint(out / "vae" / "vae.pt")
    gen_songs, gen_phrase_latents, gen_srs = [], [], []
    report_dir = out / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    for i, d in enumerate(gen_dirs):
        song = grammar.detokenize_song(
            vocab.from_text((d / "song.tokens").read_text()))
        gen_songs.append(song)
        record = latent_cache.encode_song(vae_model, song, d.name)
        gen_phrase_latents.append(record.phrase_latents())
        pooled = pool_bar_latents(record.latents, record.bar_phrase_indices())
        ssm = bar_ssm(pooled)
        gen_srs.append(srs(ssm))
        if i < ssm_images:
            save_ssm_image(ssm, report_dir / f"ssm_{d.name}.png")
    # reference set: training songs, FID subset capped at n_reference
    songs, _ = load_corpus(out / "corpus")
    split = load_split(out)
    train_songs = [songs[i] for i in split["train"]]
    rng = np.random.default_rng(cfg.seed)
    ref_ids = rng.permutation(len(train_songs))[:n_reference]
    records = latent_cache.load_cache(out / "latent_cache")
    by_id = {r.song_id: r for r in records}
    ref_latents = [by_id[split["train"][i]].phrase_latents() for i in ref_ids
                   if split["train"][i] in by_id]
    mem = memorization_report(gen_songs, train_songs)
    report = MetricReport(
        phrase_fid=phrase_fid(np.concatenate(gen_phrase_latents),
                              np.concatenate(ref_latents)),
        srs_mean=float(np.mean(gen_srs)),
        srs_std=float(np.std(gen_srs)),
        srs_values=[float(s) for s in gen_srs],
        mmr=mem.mmr, t2r=mem.t2r, mr=mem.mr,
        length_accuracy=(length_accuracy(gen_songs, bars_bucket)
                         if bars_bucket is not None else float("nan")),
        length_bucket=bars_bucket,
        n_generated=len(gen_songs), n_reference=len(ref_latents),
    )
    report.to_json(report_dir / "metrics.json")
    (report_dir / "metrics.txt").write_text(report.to_table() + "\n")
    manifest.record("evaluate",
                    artifacts={"metrics": report_dir / "metrics.json"},
                    n_generated=len(gen_songs))
    print(report.to_table())
    return report


def cmd_interpolate(cfg: RunConfig, phrase_a, phrase_b, alphas, vae_ckpt=None):
    out = Path(cfg.out_dir)
    manifest = RunManifest(out)
    vae_ckpt = Path(vae_ckpt or out / "vae" / "vae.pt")
    if not vae_ckpt.exists():
        raise missing_artifact("VAE checkpoint", vae_ckpt, "train-vae")
    model, stage, _ = vae_train.load_checkpoint(vae_ckpt)
    vae_train.require_stage(stage, "vae", "interpolate")
    seq_a = vocab.from_text(phrase_a)
    seq_b = vocab.from_text(phrase_b)
    z = model.encode_means([seq_a, seq_b])
    z1, z2 = z[0], z[1]
    interp_dir = out / "interpolation"
    interp_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for alpha in alphas:
        zi = (1 - alpha) * z1 + alpha * z2
        decoded, _ = model.decode_latents(zi[None])
        lines.append(f"alpha={alpha}: {vocab.to_text(decoded[0])}")
        try:
            phrase = grammar.detokenize_phrase(decoded[0])
            song = Song((synthetic.Bar.from_phrases([phrase]),),
                        phrase.instrument)
            (interp_dir / f"alpha_{alpha:.2f}.mid").write_bytes(
                midi_io.write_midi(song))
        except grammar.GrammarError:
            pass
    (interp_dir / "phrases.tokens").write_text("\n".join(lines) + "\n")
    manifest.record("interpolate",
                    artifacts={"tokens": interp_dir / "phrases.tokens"},
                    alphas=list(alphas))
    print("\n".join(lines))
    return interp_dir


# ---------------------------------------------------------------------------
# argparse wiring


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phrasegen",
        description="Phrase-latent diffusion pipeline for full songs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--out", help="override output directory")
        return p

    common(sub.add_parser("prepare", help="build corpus and train/val split"))
    p = common(sub.add_parser("train-vae", help="run the 3 VAE stages"))
    p.add_argument("--stage", choices=STAGE_SEQUENCE)
    p.add_argument("--from", dest="from_ckpt",
                   help="checkpoint of the previous stage")
    p = common(sub.add_parser("cache-latents", help="encode corpus latents"))
    p.add_argument("--vae", dest="vae_ckpt")
    common(sub.add_parser("train-ldm", help="train the diffusion model"))
    p = common(sub.add_parser("generate", help="sample one song"))
    p.add_argument("--ckpt")
    p.add_argument("--vae", dest="vae_ckpt")
    p.add_argument("--bars-bucket", type=int)
    p.add_argument("--structure", help="e.g. 'i-8,A-8,A-8,B-4'")
    p.add_argument("--steps", type=int)
    p.add_argument("--tag")
    p = common(sub.add_parser("evaluate", help="metric report over outputs"))
    p.add_argument("--gen-dir")
    p.add_argument("--bars-bucket", type=int)
    p.add_argument("--n-reference", type=int, default=100)
    p = common(sub.add_parser("interpolate", help="latent interpolation demo"))
    p.add_argument("--vae", dest="vae_ckpt")
    p.add_argument("--phrase-a", required=True, help="token text of phrase A")
    p.add_argument("--phrase-b", required=True, help="token text of phrase B")
    p.add_argument("--alphas", default="0,0.3,0.4,0.5,0.6,0.7,0.8,1.0")
    return parser


def load_run_config(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.config:
        return RunConfig.from_yaml(args.config, overrides)
    cfg = RunConfig(**overrides) if overrides else RunConfig()
    cfg.validate()
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = load_run_config(args)
    with output_lock(cfg.out_dir):
        if args.command == "prepare":
            cmd_prepare(cfg)
        elif args.command == "train-vae":
            cmd_train_vae(cfg, stage=args.stage, from_ckpt=args.from_ckpt)
        elif args.command == "cache-latents":
            cmd_cache_latents(cfg, vae_ckpt=args.vae_ckpt)
        elif args.command == "train-ldm":
            cmd_train_ldm(cfg)
        elif args.command == "generate":
            cmd_generate(cfg, ckpt=args.ckpt, vae_ckpt=args.vae_ckpt,
                         seed=args.seed, bars_bucket=args.bars_bucket,
                         structure=args.structure, steps=args.steps,
                         tag=args.tag)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, gen_dir=args.gen_dir,
                         bars_bucket=args.bars_bucket,
                         n_reference=args.n_reference)
        elif args.command == "interpolate":
            alphas = [float(a) for a in args.alphas.split(",")]
            cmd_interpolate(cfg, args.phrase_a, args.phrase_b, alphas,
                            vae_ckpt=args.vae_ckpt)
    return 0


if __name__ == "__main__":
    sys.exit(main())
