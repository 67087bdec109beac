"""Reconstruction F1 at three strictness levels: op, opd, iopd.

Songs are compared bar-by-bar on their piano rolls. A predicted cell
matches a reference cell when the criterion's attributes agree; matched
count per bar is the multiset intersection under the criterion's key,
which makes the stricter criteria provably never score higher.
"""

from collections import Counter
from dataclasses import dataclass, field

from ..pianoroll import bar_to_pianoroll
from ..score import Bar

# cell = (instrument, onset, pitch) -> duration
_KEYS = {
    "op": lambda cell, dur: (cell[1], cell[2]),
    "opd": lambda cell, dur: (cell[1], cell[2], dur),
    "iopd": lambda cell, dur: (cell[0], cell[1], cell[2], dur),
}


@dataclass
class F1Report:
    f1_op: float
    f1_opd: float
    f1_iopd: float
    per_bar: list = field(default_factory=list)  # one (op, opd, iopd) per bar


def _f1(matched, n_pred, n_ref):
    if n_pred == 0 and n_ref == 0:
        return 1.0
    if n_pred == 0 or n_ref == 0:
        return 0.0
    precision = matched / n_pred
    recall = matched / n_ref
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _bar_counts(pred_bar, ref_bar):
    pred = bar_to_pianoroll(pred_bar)
    ref = bar_to_pianoroll(ref_bar)
    counts = {}
    for level, key in _KEYS.items():
        pc = Counter(key(c, d) for c, d in pred.items())
        rc = Counter(key(c, d) for c, d in ref.items())
        matched = sum((pc & rc).values())
        counts[level] = (matched, len(pred), len(ref))
    return counts


def f1_scores(pred, ref):
    """F1Report between two songs, aligned bar-by-bar.

    The shorter song is padded with empty bars.
    """
    n = max(len(pred.bars), len(ref.bars))
    empty = Bar()
    totals = {level: [0, 0, 0] for level in _KEYS}
    per_bar = []
    for i in range(n):
        pb = pred.bars[i] if i < len(pred.bars) else empty
        rb = ref.bars[i] if i < len(ref.bars) else empty
        counts = _bar_counts(pb, rb)
        per_bar.append(tuple(_f1(*counts[level]) for level in ("op", "opd", "iopd")))
        for level, triple in counts.items():
            for k in range(3):
                totals[level][k] += triple[k]
    return F1Report(
        f1_op=_f1(*totals["op"]),
        f1_opd=_f1(*totals["opd"]),
        f1_iopd=_f1(*totals["iopd"]),
        per_bar=per_bar,
    )
