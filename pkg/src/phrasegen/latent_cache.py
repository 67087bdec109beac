"""Per-song latent cache: binary arrays with a JSON sidecar manifest.

Each record holds the ordered latent means of every phrase, end-of-bar
and end-of-song unit of one song, plus the unit kinds needed to recover
bar boundaries.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import vocab
from .grammar import tokenize_phrase

KIND_PHRASE = "phrase"
KIND_EOB = "eob"
KIND_EOS = "eos"


class CacheIntegrityError(RuntimeError):
    pass


@dataclass
class SongLatentRecord:
    song_id: str
    latents: np.ndarray  # (n_units, latent_dim) float32
    kinds: list  # per unit: phrase | eob | eos
    n_bars: int
    sections: list = field(default_factory=list)  # (type, n_bars) pairs

    def bar_phrase_indices(self):
        """Per bar, indices of its phrase latents (terminators excluded)."""
        bars = []
        current = []
        for i, kind in enumerate(self.kinds):
            if kind == KIND_PHRASE:
                current.append(i)
            elif kind == KIND_EOB:
                bars.append(current)
                current = []
        return bars

    def phrase_latents(self):
        idx = [i for i, k in enumerate(self.kinds) if k == KIND_PHRASE]
        return self.latents[idx]


def song_token_units(song):
    """(token seq, kind) units of a song in latent-sequence order."""
    units = []
    for bar in song.bars:
        for phrase in bar.phrases:
            units.append((tokenize_phrase(phrase), KIND_PHRASE))
        units.append(([vocab.END_OF_BAR], KIND_EOB))
    units.append(([vocab.END_OF_SONG], KIND_EOS))
    return units


def encode_song(vae_model, song, song_id, sections=()):
    units = song_token_units(song)
    latents = vae_model.encode_means([seq for seq, _ in units]).numpy()
    return SongLatentRecord(
        song_id=song_id,
        latents=latents.astype(np.float32),
        kinds=[kind for _, kind in units],
        n_bars=len(song.bars),
        sections=list(sections),
    )


def end_of_song_latent(vae_model):
    return vae_model.encode_means([[vocab.END_OF_SONG]]).numpy()[0]


def padded_latent_song(record, context, eos_latent):
    """Fixed-length (context, dim) array, padded with the end-of-song latent."""
    n = len(record.latents)
    if n > context:
        raise ValueError(f"song needs {n} latents, context is {context}")
    out = np.tile(eos_latent.astype(np.float32), (context, 1))
    out[:n] = record.latents
    return out


def average_units_per_bar(records, include_terminators=False):
    phrases = sum(sum(1 for k in r.kinds if k == KIND_PHRASE) for r in records)
    if include_terminators:
        phrases += sum(sum(1 for k in r.kinds if k == KIND_EOB) for r in records)
    bars = sum(r.n_bars for r in records)
    return phrases / max(1, bars)


# ---------------------------------------------------------------------------
# persistence


def save_cache(directory, records, vae_vocab_hash=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {r.song_id: r.latents for r in records}
    np.savez_compressed(directory / "latents.npz", **arrays)
    manifest = {
        "vocab_hash": vae_vocab_hash or vocab.vocab_hash(),
        "latent_dim": int(records[0].latents.shape[1]) if records else 0,
        "songs": [
            {
                "song_id": r.song_id,
                "n_units": len(r.kinds),
                "kinds": r.kinds,
                "n_bars": r.n_bars,
                "sections": [[k, n] for k, n in r.sections],
            }
            for r in records
        ],
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))


def load_cache(directory, expect_vocab_hash=None):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    expected = expect_vocab_hash or vocab.vocab_hash()
    if manifest["vocab_hash"] != expected:
        raise CacheIntegrityError(
            f"latent cache vocab hash {manifest['vocab_hash']} != {expected}")
    with np.load(directory / "latents.npz") as arrays:
        records = []
        for entry in manifest["songs"]:
            records.append(SongLatentRecord(
                song_id=entry["song_id"],
                latents=arrays[entry["song_id"]],
                kinds=entry["kinds"],
                n_bars=entry["n_bars"],
                sections=[tuple(s) for s in entry["sections"]],
            ))
    return records
