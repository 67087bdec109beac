"""Minimal standard-MIDI (format 0/1) reading and writing.

Only what the pipeline needs: note on/off, program change, tempo and
time-signature metas. Ingestion quantizes onto the 48-per-bar grid and
builds Song values; writing emits fixed-tempo files with one track per
instrument.
"""

import struct
from dataclasses import dataclass

from . import vocab
from .score import MAX_SONG_BARS, Bar, Note, Phrase, Song

DRUM_INSTRUMENT = 128


class MidiParseError(ValueError):
    pass


class UnsupportedMeterError(ValueError):
    pass


@dataclass
class IngestConfig:
    melody_instrument: int | None = None  # inferred (highest mean pitch) if None
    truncate: bool = False  # truncate songs longer than 128 bars vs reject
    max_bars: int = MAX_SONG_BARS


# ---------------------------------------------------------------------------
# low-level parsing


def _read_varlen(data, i):
    value = 0
    while True:
        b = data[i]
        i += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, i


def _parse_track(data, tpq):
    """One MTrk payload -> list of (abs_tick, kind, payload)."""
    events = []
    i = 0
    tick = 0
    status = None
    while i < len(data):
        delta, i = _read_varlen(data, i)
        tick += delta
        b = data[i]
        if b == 0xFF:
            meta_type = data[i + 1]
            length, j = _read_varlen(data, i + 2)
            payload = data[j:j + length]
            events.append((tick, "meta", (meta_type, payload)))
            i = j + length
            status = None
        elif b in (0xF0, 0xF7):
            length, j = _read_varlen(data, i + 1)
            i = j + length
            status = None
        else:
            if b & 0x80:
                status = b
                i += 1
            elif status is None:
                raise MidiParseError(f"running status without prior status at byte {i}")
            kind = status & 0xF0
            channel = status & 0x0F
            if kind in (0xC0, 0xD0):
                events.append((tick, "channel", (kind, channel, data[i], 0)))
                i += 1
            else:
                events.append((tick, "channel", (kind, channel, data[i], data[i + 1])))
                i += 2
    return events


def parse_midi(data: bytes):
    """Raw SMF bytes -> (tpq, list of per-track event lists)."""
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("missing MThd header")
    hlen, fmt, ntrks, division = struct.unpack(">IHHH", data[4:14])
    if hlen != 6:
        raise MidiParseError(f"bad header length {hlen}")
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported MIDI format {fmt}")
    if division & 0x8000:
        raise MidiParseError("SMPTE division not supported")
    tracks = []
    i = 14
    while i < len(data) and len(tracks) < ntrks:
        if data[i:i + 4] != b"MTrk":
            raise MidiParseError(f"expected MTrk chunk at byte {i}")
        length = struct.unpack(">I", data[i + 4:i + 8])[0]
        try:
            tracks.append(_parse_track(data[i + 8:i + 8 + length], division))
        except IndexError:
            raise MidiParseError("truncated track chunk") from None
        i += 8 + length
    if len(tracks) != ntrks:
        raise MidiParseError("track count mismatch")
    return division, tracks


# ---------------------------------------------------------------------------
# ingestion


def _extract_notes(tpq, tracks):
    """All tracks -> list of (instrument, onset_tick, dur_ticks, pitch)."""
    notes = []
    for events in tracks:
        program = {ch: 0 for ch in range(16)}
        open_notes = {}  # (channel, pitch) -> (start_tick, instrument)
        for tick, kind, payload in events:
            if kind == "meta":
                meta_type, body = payload
                if meta_type == 0x58 and len(body) >= 2:
                    num, denom_pow = body[0], body[1]
                    if (num, 1 << denom_pow) != (4, 4):
                        raise UnsupportedMeterError(
                            f"only 4/4 supported, got {num}/{1 << denom_pow}"
                        )
                continue
            msg, channel, d1, d2 = payload
            if msg == 0xC0:
                program[channel] = d1
            elif msg == 0x90 and d2 > 0:
                instr = DRUM_INSTRUMENT if channel == 9 else program[channel]
                open_notes.setdefault((channel, d1), (tick, instr))
            elif msg == 0x80 or (msg == 0x90 and d2 == 0):
                started = open_notes.pop((channel, d1), None)
                if started is not None:
                    start, instr = started
                    if tick > start:
                        notes.append((instr, start, tick - start, d1))
        # drop notes never closed
    return notes


def quantize_note(tpq, onset_tick, dur_ticks, pitch):
    """Map raw ticks to (bar, grid onset, duration, pitch) on the 48 grid."""
    unit = tpq * 4 / vocab.N_ONSET  # ticks per 48th of a 4/4 bar
    pos = round(onset_tick / unit)
    bar, onset = divmod(pos, vocab.N_ONSET)
    dur = max(1, min(vocab.MAX_DUR, round(dur_ticks / unit)))
    pitch = max(1, min(vocab.N_PITCH, pitch))
    return bar, onset, dur, pitch


def song_from_notes(quantized, melody_instrument, n_bars=None):
    """(bar, onset, dur, pitch, instrument) tuples -> Song.

    Duplicate (instrument, onset, pitch) cells collapse to max duration.
    """
    if n_bars is None:
        n_bars = 1 + max((b for b, *_ in quantized), default=0)
    per_bar = [{} for _ in range(n_bars)]
    for bar, onset, dur, pitch, instr in quantized:
        if bar >= n_bars:
            continue
        key = (instr, onset, pitch)
        per_bar[bar][key] = max(per_bar[bar].get(key, 0), dur)
    bars = []
    for cells in per_bar:
        by_instr = {}
        for (instr, onset, pitch), dur in cells.items():
            by_instr.setdefault(instr, []).append(Note(onset, pitch, dur))
        phrases = [Phrase.from_notes(i, ns) for i, ns in sorted(by_instr.items())]
        bars.append(Bar.from_phrases(phrases))
    return Song(tuple(bars), melody_instrument)


def ingest_midi(data: bytes, config: IngestConfig | None = None) -> Song:
    """Parse, quantize and structure a MIDI file into a Song."""
    config = config or IngestConfig()
    tpq, tracks = parse_midi(data)
    raw = _extract_notes(tpq, tracks)
    quantized = []
    for instr, start, dur, pitch in raw:
        bar, onset, qdur, qpitch = quantize_note(tpq, start, dur, pitch)
        quantized.append((bar, onset, qdur, qpitch, instr))
    n_bars = 1 + max((b for b, *_ in quantized), default=0)
    if n_bars > config.max_bars:
        if not config.truncate:
            raise MidiParseError(
                f"song spans {n_bars} bars (> {config.max_bars}); "
                "pass truncate=True to clip"
            )
        n_bars = config.max_bars
    melody = config.melody_instrument
    if melody is None:
        by_instr = {}
        for _, _, _, pitch, instr in quantized:
            by_instr.setdefault(instr, []).append(pitch)
        if by_instr:
            melody = max(by_instr, key=lambda i: sum(by_instr[i]) / len(by_instr[i]))
        else:
            melody = vocab.MELODY_PROGRAM
    return song_from_notes(quantized, melody, n_bars)


# ---------------------------------------------------------------------------
# writing


def _varlen(value):
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def _track_chunk(events):
    """(abs_tick, bytes) events -> MTrk chunk, with end-of-track appended."""
    # note-offs before note-ons at the same tick; program/meta first of all
    order = {0xC0: 0, 0xFF: 0, 0x80: 1, 0x90: 2}
    events = sorted(events, key=lambda e: (e[0], order.get(e[1][0] & 0xF0, 3)))
    payload = bytearray()
    last = 0
    for tick, msg in events:
        payload += _varlen(tick - last) + msg
        last = tick
    payload += _varlen(0) + bytes([0xFF, 0x2F, 0x00])
    return b"MTrk" + struct.pack(">I", len(payload)) + bytes(payload)


def write_midi(song: Song, tpq=480, tempo_us=500_000, velocity=80) -> bytes:
    """Song -> SMF format-1 bytes, fixed tempo, one track per instrument."""
    unit = tpq * 4 // vocab.N_ONSET
    instruments = sorted({p.instrument for b in song.bars for p in b.phrases})
    meta = [
        (0, bytes([0xFF, 0x51, 0x03]) + struct.pack(">I", tempo_us)[1:]),
        (0, bytes([0xFF, 0x58, 0x04, 4, 2, 24, 8])),
    ]
    chunks = [_track_chunk(meta)]
    for idx, instr in enumerate(instruments):
        channel = 9 if instr == DRUM_INSTRUMENT else idx % 16
        if channel == 9 and instr != DRUM_INSTRUMENT:
            channel = (idx + 1) % 16
        events = []
        if instr != DRUM_INSTRUMENT:
            events.append((0, bytes([0xC0 | channel, instr])))
        for bar_idx, bar in enumerate(song.bars):
            phrase = bar.phrase_for(instr)
            if phrase is None:
                continue
            base = bar_idx * vocab.N_ONSET * unit
            for n in phrase.notes:
                start = base + n.onset * unit
                end = start + n.duration * unit
                pitch = min(127, n.pitch)
                events.append((start, bytes([0x90 | channel, pitch, velocity])))
                events.append((end, bytes([0x80 | channel, pitch, 0])))
        chunks.append(_track_chunk(events))
    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), tpq)
    return header + b"".join(chunks)
