"""Tokenizer/detokenizer for the bar-structured phrase grammar.

Phrase sequence: one instrument head, then per onset group a single onset
token followed by (pitch, duration) pairs in pitch-descending order. Bars
concatenate their phrase sequences in average-pitch-descending order and
close with END_OF_BAR; a song closes with END_OF_SONG. Special one-token
phrases exist for the bar and song terminators so they can pass through
the compression model like any other phrase.
"""

import itertools

from . import vocab
from .score import Bar, Note, Phrase, Song

# Sentinel "phrases" for the two structural terminators.
END_OF_BAR_PHRASE = ("END_OF_BAR",)
END_OF_SONG_PHRASE = ("END_OF_SONG",)


class GrammarError(ValueError):
    def __init__(self, msg, index=None):
        if index is not None:
            msg = f"{msg} (token index {index})"
        super().__init__(msg)
        self.index = index


def tokenize_phrase(phrase):
    """Phrase -> token ids. Raises GrammarError on invariant violations."""
    try:
        phrase.validate()
    except ValueError as e:
        raise GrammarError(str(e)) from e
    out = [vocab.instrument_token(phrase.instrument)]
    for onset, group in itertools.groupby(phrase.notes, key=lambda n: n.onset):
        out.append(vocab.onset_token(onset))
        for n in group:
            out.append(vocab.pitch_token(n.pitch))
            out.append(vocab.duration_token(n.duration))
    return out


def detokenize_phrase(tokens):
    """Token ids -> Phrase; exact inverse of tokenize_phrase."""
    if not tokens:
        raise GrammarError("empty phrase sequence")
    if not vocab.is_instrument(tokens[0]):
        raise GrammarError("phrase must start with an instrument token", 0)
    instrument = vocab.instrument_value(tokens[0])
    notes = []
    onset = None
    last_onset = -1
    last_pitch_in_group = None
    i = 1
    while i < len(tokens):
        tok = tokens[i]
        if vocab.is_onset(tok):
            onset = vocab.onset_value(tok)
            if onset <= last_onset:
                raise GrammarError("onsets must strictly increase", i)
            last_onset = onset
            last_pitch_in_group = None
            if i + 1 >= len(tokens) or not vocab.is_pitch(tokens[i + 1]):
                raise GrammarError("onset token not followed by a pitch", i)
            i += 1
        elif vocab.is_pitch(tok):
            if onset is None:
                raise GrammarError("pitch token before any onset", i)
            pitch = vocab.pitch_value(tok)
            if last_pitch_in_group is not None and pitch >= last_pitch_in_group:
                raise GrammarError("same-onset pitches must strictly decrease", i)
            last_pitch_in_group = pitch
            if i + 1 >= len(tokens) or not vocab.is_duration(tokens[i + 1]):
                raise GrammarError("pitch token without a following duration", i)
            notes.append(Note(onset, pitch, vocab.duration_value(tokens[i + 1])))
            i += 2
        else:
            raise GrammarError(
                f"unexpected token {vocab.token_name(tok)} in phrase", i
            )
    if not notes:
        raise GrammarError("phrase contains no notes")
    return Phrase(instrument, tuple(notes))


def is_special_phrase(tokens):
    return list(tokens) in ([vocab.END_OF_BAR], [vocab.END_OF_SONG])


def tokenize_bar(bar):
    """Bar -> token ids, terminated by END_OF_BAR. Empty bars emit only it."""
    try:
        bar.validate()
    except ValueError as e:
        raise GrammarError(str(e)) from e
    out = []
    for phrase in bar.phrases:
        out.extend(tokenize_phrase(phrase))
    out.append(vocab.END_OF_BAR)
    return out


def tokenize_song(song):
    out = []
    for bar in song.bars:
        out.extend(tokenize_bar(bar))
    out.append(vocab.END_OF_SONG)
    return out


def split_phrases(tokens):
    """Split a bar/song token stream into per-phrase chunks.

    Structural terminators come out as their one-token special phrases.
    """
    chunks = []
    current = []
    for i, tok in enumerate(tokens):
        if tok in (vocab.END_OF_BAR, vocab.END_OF_SONG):
            if current:
                chunks.append(current)
                current = []
            chunks.append([tok])
        elif vocab.is_instrument(tok):
            if current:
                chunks.append(current)
            current = [tok]
        else:
            if not current:
                raise GrammarError("note token outside any phrase", i)
            current.append(tok)
    if current:
        chunks.append(current)
    return chunks


def detokenize_bar(tokens):
    """Token ids (ending in END_OF_BAR) -> Bar."""
    if not tokens or tokens[-1] != vocab.END_OF_BAR:
        raise GrammarError("bar sequence must end with END_OF_BAR",
                           len(tokens) - 1 if tokens else None)
    phrases = []
    for chunk in split_phrases(tokens[:-1]):
        if chunk == [vocab.END_OF_BAR] or chunk == [vocab.END_OF_SONG]:
            raise GrammarError("unexpected terminator inside bar")
        phrases.append(detokenize_phrase(chunk))
    bar = Bar(tuple(phrases))
    try:
        bar.validate()
    except ValueError as e:
        raise GrammarError(str(e)) from e
    return bar


def detokenize_song(tokens, melody_instrument=vocab.MELODY_PROGRAM):
    if not tokens or tokens[-1] != vocab.END_OF_SONG:
        raise GrammarError("song sequence must end with END_OF_SONG",
                           len(tokens) - 1 if tokens else None)
    bars = []
    current = []
    for i, tok in enumerate(tokens[:-1]):
        if tok == vocab.END_OF_SONG:
            raise GrammarError("END_OF_SONG before end of sequence", i)
        current.append(tok)
        if tok == vocab.END_OF_BAR:
            bars.append(detokenize_bar(current))
            current = []
    if current:
        raise GrammarError("trailing tokens after last END_OF_BAR")
    return Song(tuple(bars), melody_instrument)


def validate_phrase_tokens(tokens):
    """True iff tokens form a valid phrase sequence (incl. specials)."""
    if is_special_phrase(tokens):
        return True
    try:
        detokenize_phrase(list(tokens))
        return True
    except GrammarError:
        return False


def validate_song_tokens(tokens):
    try:
        detokenize_song(list(tokens))
        return True
    except GrammarError:
        return False
