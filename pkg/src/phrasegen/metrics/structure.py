"""Structural metrics: bar-level self-similarity and section recurrence.

The SSM holds cosine similarity between average-pooled phrase latents of
each bar. SRS sums the lengths of qualifying bright off-diagonal runs
(length >= 4, not clustered with an adjacent diagonal) in the upper
triangle and divides by the number of bars.
"""

import warnings

import numpy as np


def pool_bar_latents(latents, bar_phrase_indices):
    """Average phrase latents within each bar.

    bar_phrase_indices: per bar, the indices of its phrase latents
    (structural terminator latents excluded from pooling).
    """
    latents = np.asarray(latents, dtype=np.float64)
    bars = []
    for idx in bar_phrase_indices:
        if len(idx) == 0:
            bars.append(np.zeros(latents.shape[1]))
        else:
            bars.append(latents[list(idx)].mean(axis=0))
    return np.stack(bars) if bars else np.zeros((0, latents.shape[1]))


def bar_ssm(bar_latents):
    """Pairwise cosine similarity matrix; zero-vector bars get similarity 0."""
    x = np.asarray(bar_latents, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need at least one bar latent")
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0
    if zero.any():
        warnings.warn("zero-vector bar latent; its similarities are set to 0")
    safe = np.where(zero, 1.0, norms)
    unit = x / safe[:, None]
    s = unit @ unit.T
    s[zero, :] = 0.0
    s[:, zero] = 0.0
    np.fill_diagonal(s, 1.0)
    return np.clip(s, -1.0, 1.0)


def _diagonal_runs(bright, offset):
    """Maximal runs of bright cells along one upper diagonal.

    Returns (row_start, length) pairs; cell (i, i+offset).
    """
    n = bright.shape[0]
    runs = []
    i = 0
    while i < n - offset:
        if bright[i, i + offset]:
            j = i
            while j < n - offset and bright[j, j + offset]:
                j += 1
            runs.append((i, j - i))
            i = j
        else:
            i += 1
    return runs


def srs(ssm, threshold=0.5, min_run=4, neighbor_min=2):
    """Section Recurrence Score.

    Candidate runs (length >= min_run) are dropped when any bright run of
    length >= neighbor_min on an adjacent diagonal overlaps their row range;
    such clusters are consecutive-bar similarity, not section recurrence.
    """
    s = np.asarray(ssm)
    n = s.shape[0]
    if n == 0:
        return 0.0
    bright = s >= threshold
    runs = {k: _diagonal_runs(bright, k) for k in range(1, n)}
    kept_total = 0
    for k in range(1, n):
        for start, length in runs[k]:
            if length < min_run:
                continue
            clustered = False
            for nk in (k - 1, k + 1):
                for nstart, nlength in runs.get(nk, []):
                    if nlength < neighbor_min:
                        continue
                    if nstart < start + length and start < nstart + nlength:
                        clustered = True
                        break
                if clustered:
                    break
            if not clustered:
                kept_total += length
    return kept_total / n
