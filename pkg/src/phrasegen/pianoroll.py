"""Bar-level piano roll: sparse (instrument, onset, pitch) -> duration map."""

from .score import Bar, Song


def bar_to_pianoroll(bar):
    """Lossless sparse roll for one bar.

    Duplicate (instrument, onset, pitch) keys collapse to the max duration;
    valid bars never contain duplicates, this only matters for raw input.
    """
    cells = {}
    for phrase in bar.phrases:
        for n in phrase.notes:
            key = (phrase.instrument, n.onset, n.pitch)
            cells[key] = max(cells.get(key, 0), n.duration)
    return cells


def song_to_pianorolls(song):
    return [bar_to_pianoroll(b) for b in song.bars]
