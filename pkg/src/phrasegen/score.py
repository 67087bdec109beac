"""Quantized score types: Note, Phrase, Bar, Song.

All times live on a fixed 48-positions-per-bar grid (4/4 only). A phrase is
everything one instrument plays in one bar; a bar orders its phrases by
average pitch, descending; a song is a list of bars plus a designated
melody instrument.
"""

from dataclasses import dataclass, field

from . import vocab

MAX_SONG_BARS = 128


class ScoreError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Note:
    onset: int  # 48th-note position within the bar, 0..47
    pitch: int  # 1..128
    duration: int  # 48th-note units, 1..MAX_DUR

    def validate(self):
        if not 0 <= self.onset < vocab.N_ONSET:
            raise ScoreError(f"note onset out of range: {self.onset}")
        if not 1 <= self.pitch <= vocab.N_PITCH:
            raise ScoreError(f"note pitch out of range: {self.pitch}")
        if not 1 <= self.duration <= vocab.MAX_DUR:
            raise ScoreError(f"note duration out of range: {self.duration}")


def phrase_note_order(notes):
    """Canonical order: onset ascending, then pitch descending."""
    return sorted(notes, key=lambda n: (n.onset, -n.pitch, n.duration))


@dataclass(frozen=True)
class Phrase:
    instrument: int
    notes: tuple = ()

    @classmethod
    def from_notes(cls, instrument, notes):
        """Build a phrase with notes put into canonical order."""
        return cls(instrument, tuple(phrase_note_order(notes)))

    def validate(self):
        if not 0 <= self.instrument < vocab.N_INSTRUMENT:
            raise ScoreError(f"instrument out of range: {self.instrument}")
        if not self.notes:
            raise ScoreError("phrase has no notes")
        for n in self.notes:
            n.validate()
        if list(self.notes) != phrase_note_order(self.notes):
            raise ScoreError("phrase notes not in canonical order")
        keys = [(n.onset, n.pitch) for n in self.notes]
        if len(set(keys)) != len(keys):
            raise ScoreError("duplicate (onset, pitch) within phrase")

    def average_pitch(self):
        return sum(n.pitch for n in self.notes) / len(self.notes)


def bar_phrase_order(phrases):
    """Average pitch descending; ties broken by instrument id ascending."""
    return sorted(phrases, key=lambda p: (-p.average_pitch(), p.instrument))


@dataclass(frozen=True)
class Bar:
    phrases: tuple = ()

    @classmethod
    def from_phrases(cls, phrases):
        return cls(tuple(bar_phrase_order(phrases)))

    def validate(self):
        seen = set()
        for p in self.phrases:
            p.validate()
            if p.instrument in seen:
                raise ScoreError(f"duplicate instrument in bar: {p.instrument}")
            seen.add(p.instrument)
        if list(self.phrases) != bar_phrase_order(self.phrases):
            raise ScoreError("bar phrases not in average-pitch order")

    def phrase_for(self, instrument):
        for p in self.phrases:
            if p.instrument == instrument:
                return p
        return None

    def instruments(self):
        return frozenset(p.instrument for p in self.phrases)


@dataclass(frozen=True)
class Song:
    bars: tuple = ()
    melody_instrument: int = vocab.MELODY_PROGRAM

    def validate(self, ldm_bound=False):
        if ldm_bound and not 1 <= len(self.bars) <= MAX_SONG_BARS:
            raise ScoreError(f"song length unsupported: {len(self.bars)} bars")
        for b in self.bars:
            b.validate()

    def n_notes(self):
        return sum(len(p.notes) for b in self.bars for p in b.phrases)


@dataclass(frozen=True)
class SectionAnnotation:
    """Section layout for one song: ordered (type, n_bars) pairs."""
    song_id: str
    sections: tuple = field(default=())

    def n_bars(self):
        return sum(n for _, n in self.sections)

    def section_of_bar(self, bar_idx):
        """(section index, type) that covers a bar index."""
        pos = 0
        for i, (kind, n) in enumerate(self.sections):
            if bar_idx < pos + n:
                return i, kind
            pos += n
        raise IndexError(bar_idx)
