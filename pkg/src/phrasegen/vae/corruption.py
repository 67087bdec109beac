"""Span corruption for the denoising pretrain stage.

Random-length spans (lengths ~ Poisson, at least 1) covering roughly a
target fraction of the sequence are each replaced by a distinct sentinel
token; the reconstruction target is always the full original sequence.
"""

import numpy as np

from .. import vocab

MIN_CORRUPTIBLE_LEN = 2


def corrupt_spans(tokens, rng, mask_ratio=0.3, mean_span=3.0):
    """(corrupted input, reconstruction target) for one sequence.

    rng is a numpy Generator; identical seeds give identical corruptions.
    Sequences shorter than the minimum span come back uncorrupted.
    """
    tokens = list(tokens)
    target = list(tokens)
    n = len(tokens)
    budget = int(round(mask_ratio * n))
    if n < MIN_CORRUPTIBLE_LEN or budget == 0:
        return tokens, target

    # Sample span lengths until the masking budget is spent, then place the
    # spans at random without overlap.
    lengths = []
    remaining = budget
    while remaining > 0:
        span = max(1, int(rng.poisson(mean_span)))
        span = min(span, remaining)
        lengths.append(span)
        remaining -= span

    masked = np.zeros(n, dtype=bool)
    spans = []
    for span in lengths:
        free = [i for i in range(n - span + 1) if not masked[i:i + span].any()]
        if not free:
            continue
        start = int(rng.choice(free))
        masked[start:start + span] = True
        spans.append((start, span))

    out = []
    spans.sort()
    pos = 0
    for k, (start, span) in enumerate(spans):
        out.extend(tokens[pos:start])
        out.append(vocab.SENTINELS[k % vocab.N_SENTINEL])
        pos = start + span
    out.extend(tokens[pos:])
    return out, target


def masked_fraction(original, corrupted):
    """Fraction of original tokens removed by corruption."""
    n_sentinels = sum(1 for t in corrupted if t in vocab.SENTINELS)
    kept = len(corrupted) - n_sentinels
    return (len(original) - kept) / len(original)
