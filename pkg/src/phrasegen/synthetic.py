"""Deterministic structured synthetic corpus.

Songs have three tracks (monophonic melody, sparse lead, polyphonic
accompaniment) and an explicit section layout. Bar material is drawn from
global motif banks so phrase vocabulary stays compact, while per-song motif
sequences make full melodies distinct. Repeated sections within one song
reuse their material literally, so structural self-similarity is real.
"""

from dataclasses import dataclass, field

import numpy as np

from . import vocab
from .score import (MAX_SONG_BARS, Bar, Note, Phrase, SectionAnnotation,
                    Song)

SECTION_TYPES = ("i", "A", "B", "x", "X", "o")

# Which instruments play in each section type.
SECTION_ACTIVITY = {
    "i": (vocab.ACCOMP_PROGRAM,),
    "A": (vocab.MELODY_PROGRAM, vocab.ACCOMP_PROGRAM),
    "B": (vocab.MELODY_PROGRAM, vocab.LEAD_PROGRAM, vocab.ACCOMP_PROGRAM),
    "x": (vocab.LEAD_PROGRAM, vocab.ACCOMP_PROGRAM),
    "X": (vocab.MELODY_PROGRAM, vocab.LEAD_PROGRAM, vocab.ACCOMP_PROGRAM),
    "o": (vocab.ACCOMP_PROGRAM,),
}

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)

_RHYTHMS = (
    (0, 12, 24, 36),
    (0, 6, 12, 24, 30, 36),
    (0, 12, 18, 24, 36, 42),
    (0, 24),
    (0, 8, 16, 24, 32, 40),
    (0, 12, 24, 30, 36),
    (0, 6, 12, 18, 24, 36),
    (0, 12, 24, 36, 42),
)


class CorpusConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusSpec:
    """Section layouts (with sampling weights) and motif bank sizes."""
    layouts: tuple = (
        (("i", 2), ("A", 4), ("o", 2)),
        (("i", 2), ("B", 4), ("x", 2), ("B", 4), ("o", 2)),
        (("i", 4), ("A", 8), ("A", 8), ("o", 4)),
    )
    layout_weights: tuple = (0.4, 0.2, 0.4)
    melody_bank_size: int = 48
    lead_bank_size: int = 24
    accomp_bank_size: int = 24

    def validate(self):
        if len(self.layouts) != len(self.layout_weights):
            raise CorpusConfigError("one weight per layout required")
        for layout in self.layouts:
            total = sum(n for _, n in layout)
            if not 1 <= total <= MAX_SONG_BARS:
                raise CorpusConfigError(
                    f"layout spans {total} bars, outside [1, {MAX_SONG_BARS}]"
                )
            for kind, n in layout:
                if kind not in SECTION_TYPES:
                    raise CorpusConfigError(f"unknown section type {kind!r}")
                if n < 1:
                    raise CorpusConfigError("sections need at least one bar")


# ---------------------------------------------------------------------------
# motif banks


def _melody_motif(rng):
    rhythm = _RHYTHMS[rng.integers(len(_RHYTHMS))]
    degree = int(rng.integers(0, 7))
    octave = int(rng.integers(5, 7))  # around C5..B6
    notes = []
    for k, onset in enumerate(rhythm):
        nxt = rhythm[k + 1] if k + 1 < len(rhythm) else vocab.N_ONSET
        degree = int(np.clip(degree + rng.integers(-2, 3), 0, 6))
        pitch = 12 * octave + MAJOR_SCALE[degree]
        notes.append(Note(onset, pitch, nxt - onset))
    return Phrase.from_notes(vocab.MELODY_PROGRAM, notes)


def _lead_motif(rng):
    n = int(rng.integers(1, 4))
    onsets = sorted(rng.choice((0, 12, 24, 36), size=n, replace=False).tolist())
    notes = []
    for k, onset in enumerate(onsets):
        nxt = onsets[k + 1] if k + 1 < len(onsets) else vocab.N_ONSET
        degree = int(rng.integers(0, 7))
        pitch = 48 + 12 + MAJOR_SCALE[degree]
        # monophonic: never ring past the next onset (MIDI channels cannot
        # carry two copies of one pitch at once)
        dur = min(int(rng.choice((12, 18, 24))), nxt - onset)
        notes.append(Note(onset, pitch, dur))
    return Phrase.from_notes(vocab.LEAD_PROGRAM, notes)


def _accomp_motif(rng, sparse=False):
    root = 36 + MAJOR_SCALE[int(rng.integers(0, 7))]
    third = root + (4 if rng.random() < 0.7 else 3)
    triad = (root, third, root + 7)
    notes = []
    if sparse:
        notes = [Note(0, p, vocab.MAX_DUR) for p in triad]
    else:
        style = rng.integers(3)
        if style == 0:  # block chords, half notes
            for onset in (0, 24):
                notes += [Note(onset, p, 24) for p in triad]
        elif style == 1:  # block chords, quarter notes
            for onset in (0, 12, 24, 36):
                notes += [Note(onset, p, 12) for p in triad]
        else:  # arpeggio over a pedal bass
            for k, onset in enumerate((0, 12, 24, 36)):
                notes.append(Note(onset, triad[k % 3], 12))
                notes.append(Note(onset, root - 12, 12))
    return Phrase.from_notes(vocab.ACCOMP_PROGRAM, notes)


@dataclass
class MotifBanks:
    melody: list = field(default_factory=list)
    lead: list = field(default_factory=list)
    accomp: list = field(default_factory=list)
    accomp_sparse: list = field(default_factory=list)

    @classmethod
    def build(cls, seed, spec):
        rng = np.random.default_rng([seed, 0xBA])
        banks = cls()
        seen = set()

        def add(bank, make, size):
            while len(bank) < size:
                phrase = make(rng)
                if phrase not in seen:  # keep bank entries distinct
                    seen.add(phrase)
                    bank.append(phrase)

        add(banks.melody, _melody_motif, spec.melody_bank_size)
        add(banks.lead, _lead_motif, spec.lead_bank_size)
        add(banks.accomp, lambda r: _accomp_motif(r), spec.accomp_bank_size)
        add(banks.accomp_sparse, lambda r: _accomp_motif(r, sparse=True),
            max(4, spec.accomp_bank_size // 4))
        return banks

    def phrase_inventory(self):
        return self.melody + self.lead + self.accomp + self.accomp_sparse


# ---------------------------------------------------------------------------
# songs


def _section_material(rng, banks, kind, n_bars):
    """Per-bar phrases for one section; reused literally on recurrence."""
    bars = []
    for _ in range(n_bars):
        phrases = []
        for instr in SECTION_ACTIVITY[kind]:
            if instr == vocab.MELODY_PROGRAM:
                phrases.append(banks.melody[rng.integers(len(banks.melody))])
            elif instr == vocab.LEAD_PROGRAM:
                phrases.append(banks.lead[rng.integers(len(banks.lead))])
            elif kind in ("i", "o"):
                phrases.append(
                    banks.accomp_sparse[rng.integers(len(banks.accomp_sparse))])
            else:
                phrases.append(banks.accomp[rng.integers(len(banks.accomp))])
        bars.append(Bar.from_phrases(phrases))
    return bars


def generate_song(seed, song_idx, layout, banks):
    rng = np.random.default_rng([seed, 1, song_idx])
    material = {}
    bars = []
    for kind, n_bars in layout:
        key = (kind, n_bars)
        if key not in material:
            material[key] = _section_material(rng, banks, kind, n_bars)
        bars.extend(material[key])
    song = Song(tuple(bars), vocab.MELODY_PROGRAM)
    annotation = SectionAnnotation(f"synth-{seed}-{song_idx:05d}", tuple(layout))
    return song, annotation


def generate_corpus(seed, n_songs, spec=None):
    """Deterministic corpus: (songs, annotations), byte-identical per seed."""
    spec = spec or CorpusSpec()
    spec.validate()
    banks = MotifBanks.build(seed, spec)
    weights = np.asarray(spec.layout_weights, dtype=float)
    weights = weights / weights.sum()
    rng = np.random.default_rng([seed, 2])
    layout_ids = rng.choice(len(spec.layouts), size=n_songs, p=weights)
    songs, annotations = [], []
    for idx in range(n_songs):
        song, ann = generate_song(seed, idx, spec.layouts[layout_ids[idx]], banks)
        songs.append(song)
        annotations.append(ann)
    return songs, annotations
