"""Phrase-level latent diffusion for full-song multitrack symbolic music.

Pipeline: tokenize bars into per-instrument phrases, compress each phrase
to a 64-dim latent with a staged bottleneck model, then model whole songs
as fixed-length latent sequences with a diffusion transformer.
"""

from .score import Bar, Note, Phrase, SectionAnnotation, Song
from .vocab import VOCAB_SIZE, vocab_hash

__all__ = [
    "Bar", "Note", "Phrase", "SectionAnnotation", "Song",
    "VOCAB_SIZE", "vocab_hash",
]
