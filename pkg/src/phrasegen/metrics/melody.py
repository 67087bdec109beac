"""Melody-similarity metrics: WER, memorization report, length accuracy.

A song's melody string is the bar-delimited concatenation of (onset,
pitch) token names of its melody-instrument phrases, e.g. "o-0 p-60 |".
Memorization follows a top-2 nearest-distance rule: a sample counts as
memorized when its closest training melody is less than a third as far
away as the second-closest.
"""

import warnings
from dataclasses import dataclass, field

T2R_MEMORIZED = 1.0 / 3.0


def melody_string(song):
    """Bar-delimited onset/pitch token string of the melody track."""
    parts = []
    any_melody = False
    for bar in song.bars:
        phrase = bar.phrase_for(song.melody_instrument)
        if phrase is not None:
            any_melody = True
            for n in phrase.notes:
                parts.append(f"o-{n.onset}")
                parts.append(f"p-{n.pitch}")
        parts.append("|")
    if not any_melody:
        warnings.warn("song has no melody phrases; empty melody string")
        return ""
    return " ".join(parts)


def edit_distance(hyp, ref):
    """Token-level Levenshtein distance (two-row DP)."""
    if not hyp:
        return len(ref)
    if not ref:
        return len(hyp)
    prev = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, start=1):
        cur = [i]
        for j, r in enumerate(ref, start=1):
            cur.append(min(prev[j] + 1,
                           cur[j - 1] + 1,
                           prev[j - 1] + (h != r)))
        prev = cur
    return prev[-1]


def wer(hyp, ref):
    """Edit distance over tokens, normalized by reference length."""
    ref_tokens = ref.split()
    if not ref_tokens:
        raise ValueError("WER reference must be non-empty")
    return edit_distance(hyp.split(), ref_tokens) / len(ref_tokens)


def melody_similarity(hyp, ref):
    """max(0, 1 - WER); clipped so long hypotheses stay interpretable."""
    return max(0.0, 1.0 - wer(hyp, ref))


@dataclass
class MemorizationReport:
    mmr: list = field(default_factory=list)  # per generated song
    t2r: list = field(default_factory=list)
    memorized: list = field(default_factory=list)
    mr: float = 0.0
    flags: list = field(default_factory=list)


def memorization_report(gen_songs, train_songs):
    """MMR/T2R per generated song and the batch memorization ratio.

    Distances are WERs of the generated melody against each training
    melody (the training melody is the WER reference).
    """
    if not train_songs:
        raise ValueError("training set must be non-empty")
    train_strs = [melody_string(s) for s in train_songs]
    report = MemorizationReport()
    for song in gen_songs:
        gen_str = melody_string(song)
        dists = [wer(gen_str, ref) for ref in train_strs]
        sims = [max(0.0, 1.0 - d) for d in dists]
        report.mmr.append(max(sims))
        order = sorted(dists)
        flag = None
        if len(order) < 2:
            t2r = 1.0
            flag = "single-song training set; T2R undefined"
        else:
            d1, d2 = order[0], order[1]
            if d2 == 0:
                t2r = 1.0
            else:
                t2r = d1 / d2
        if flag:
            warnings.warn(flag)
        report.t2r.append(t2r)
        report.memorized.append(t2r < T2R_MEMORIZED)
        report.flags.append(flag)
    report.mr = sum(report.memorized) / len(report.memorized) if gen_songs else 0.0
    return report


def length_accuracy(gen_songs, bucket_k, bucket_size=10):
    """Fraction of songs whose bar count falls in [kB, (k+1)B)."""
    if not gen_songs:
        return 0.0
    lo = bucket_k * bucket_size
    hi = lo + bucket_size
    hits = sum(1 for s in gen_songs if lo <= len(s.bars) < hi)
    return hits / len(gen_songs)
