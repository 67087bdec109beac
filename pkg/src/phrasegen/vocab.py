"""Token vocabulary for the bar-structured phrase grammar.

The vocabulary covers instrument heads (128 GM programs plus a drum id),
onset positions on a 48-per-bar grid, pitches 1..128, durations 1..48,
and the special/control tokens used by the compression model.
"""

import hashlib

N_ONSET = 48
N_PITCH = 128
MAX_DUR = 48
N_INSTRUMENT = 129  # 128 GM programs + drum flag
N_SENTINEL = 16  # span-mask sentinels
N_QUERY = 4

# Fixed instrument ids used by the synthetic corpus (melody, lead, accomp).
MELODY_PROGRAM = 72
LEAD_PROGRAM = 25
ACCOMP_PROGRAM = 0
SYNTH_PROGRAMS = (MELODY_PROGRAM, LEAD_PROGRAM, ACCOMP_PROGRAM)


def _build_names():
    names = []
    names += [f"I-{i}" for i in range(N_INSTRUMENT)]
    names += [f"o-{i}" for i in range(N_ONSET)]
    names += [f"p-{i}" for i in range(1, N_PITCH + 1)]
    names += [f"d-{i}" for i in range(1, MAX_DUR + 1)]
    names += ["BOS", "EOS", "PAD"]
    names += [f"SENTINEL_{i}" for i in range(N_SENTINEL)]
    names += [f"Q{i}" for i in range(1, N_QUERY + 1)]
    names += ["END_OF_BAR", "END_OF_SONG"]
    return names


TOKEN_NAMES = _build_names()
TOKEN_IDS = {name: i for i, name in enumerate(TOKEN_NAMES)}
VOCAB_SIZE = len(TOKEN_NAMES)

_INSTRUMENT_BASE = 0
_ONSET_BASE = N_INSTRUMENT
_PITCH_BASE = _ONSET_BASE + N_ONSET
_DUR_BASE = _PITCH_BASE + N_PITCH

BOS = TOKEN_IDS["BOS"]
EOS = TOKEN_IDS["EOS"]
PAD = TOKEN_IDS["PAD"]
END_OF_BAR = TOKEN_IDS["END_OF_BAR"]
END_OF_SONG = TOKEN_IDS["END_OF_SONG"]
SENTINELS = tuple(TOKEN_IDS[f"SENTINEL_{i}"] for i in range(N_SENTINEL))
QUERIES = tuple(TOKEN_IDS[f"Q{i}"] for i in range(1, N_QUERY + 1))


def instrument_token(program):
    if not 0 <= program < N_INSTRUMENT:
        raise ValueError(f"instrument id out of range: {program}")
    return _INSTRUMENT_BASE + program


def onset_token(pos):
    if not 0 <= pos < N_ONSET:
        raise ValueError(f"onset out of range: {pos}")
    return _ONSET_BASE + pos


def pitch_token(pitch):
    if not 1 <= pitch <= N_PITCH:
        raise ValueError(f"pitch out of range: {pitch}")
    return _PITCH_BASE + (pitch - 1)


def duration_token(dur):
    if not 1 <= dur <= MAX_DUR:
        raise ValueError(f"duration out of range: {dur}")
    return _DUR_BASE + (dur - 1)


def is_instrument(tok):
    return _INSTRUMENT_BASE <= tok < _INSTRUMENT_BASE + N_INSTRUMENT


def is_onset(tok):
    return _ONSET_BASE <= tok < _ONSET_BASE + N_ONSET


def is_pitch(tok):
    return _PITCH_BASE <= tok < _PITCH_BASE + N_PITCH


def is_duration(tok):
    return _DUR_BASE <= tok < _DUR_BASE + MAX_DUR


def instrument_value(tok):
    return tok - _INSTRUMENT_BASE


def onset_value(tok):
    return tok - _ONSET_BASE


def pitch_value(tok):
    return tok - _PITCH_BASE + 1


def duration_value(tok):
    return tok - _DUR_BASE + 1


def token_name(tok):
    return TOKEN_NAMES[tok]


def token_id(name):
    try:
        return TOKEN_IDS[name]
    except KeyError:
        raise ValueError(f"unknown token name: {name!r}") from None


def to_text(tokens):
    """Render ids as the whitespace-separated token-name text format."""
    return " ".join(TOKEN_NAMES[t] for t in tokens)


def from_text(text):
    return [token_id(name) for name in text.split()]


def vocab_hash():
    """Stable hash of the vocabulary layout, recorded in every artifact."""
    h = hashlib.sha256("\n".join(TOKEN_NAMES).encode()).hexdigest()
    return h[:16]
