"""Turn a generated latent sequence back into a Song.

Each latent decodes independently through the compression model; the
stream is truncated at the first end-of-song decode, phrases are grouped
into bars at end-of-bar decodes, and ungrammatical decodes are dropped
(flagged) rather than aborting the song.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import vocab
from ..grammar import GrammarError, detokenize_phrase
from ..score import Bar, Song


class EmptySongError(RuntimeError):
    pass


@dataclass
class DecodeInfo:
    n_latents_used: int = 0
    found_end_of_song: bool = True
    dropped_invalid: int = 0
    flags: list = field(default_factory=list)


def truncate_and_decode(latents, vae_model,
                        melody_instrument=vocab.MELODY_PROGRAM):
    """Latent sequence -> (Song, DecodeInfo)."""
    latents = np.asarray(latents, dtype=np.float32)
    decoded, _ = vae_model.decode_latents(latents)
    info = DecodeInfo()
    bars = []
    current = []

    def close_bar():
        by_instr = {}
        for p in current:
            # one phrase per instrument per bar: keep the first decode
            by_instr.setdefault(p.instrument, p)
        bars.append(Bar.from_phrases(list(by_instr.values())))

    end_index = None
    for i, seq in enumerate(decoded):
        if seq == [vocab.END_OF_SONG]:
            end_index = i
            break
        if seq == [vocab.END_OF_BAR]:
            close_bar()
            current = []
            continue
        try:
            current.append(detokenize_phrase(seq))
        except GrammarError as e:
            info.dropped_invalid += 1
            info.flags.append(f"latent {i}: {e}")
    if end_index is None:
        info.found_end_of_song = False
        info.flags.append("no end-of-song latent decoded; used full sequence")
        info.n_latents_used = len(decoded)
        if current:
            close_bar()
    else:
        info.n_latents_used = end_index
        # phrases after the last end-of-bar but before end-of-song are kept
        if current:
            close_bar()
    if not bars:
        raise EmptySongError("no decodable bars in latent sequence")
    return Song(tuple(bars), melody_instrument), info
