"""Reuse-distance (LRU stack distance) analytics and miss metrics.

The reuse distance of an access is the number of distinct blocks touched
since the previous access to the same block; back-to-back accesses to one
block have distance 0 and first accesses have no distance (``FIRST_ACCESS``).
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_addresses, check_block_bits, check_blocks

FIRST_ACCESS = -1

# Inclusive upper edges of the reuse buckets; the last bucket is open-ended.
BUCKET_EDGES = (0, 16, 512, 1024, 10000)
BUCKET_LABELS = ("0", "1-16", "17-512", "513-1024", "1025-10000", ">10000")
FIRST_ACCESS_LABEL = "first_access"
OVERALL = "[0,inf)"
N_BUCKETS = len(BUCKET_LABELS)


def bucket_index(distance):
    """Bucket of a non-negative distance: {0}, [1,16], (16,512], (512,1024], (1024,10000], (10000,inf)."""
    for i, edge in enumerate(BUCKET_EDGES):
        if distance <= edge:
            return i
    return N_BUCKETS - 1


def bucket_indices(distances):
    """Vectorised ``bucket_index``; FIRST_ACCESS maps to -1."""
    d = np.asarray(distances, dtype=np.int64)
    idx = np.searchsorted(np.array(BUCKET_EDGES, dtype=np.int64), d, side="left")
    return np.where(d < 0, -1, idx)


def naive_stack_distance(blocks, i):
    """Backward rescan from ``i`` to the previous access of ``blocks[i]``."""
    target = blocks[i]
    seen = set()
    for j in range(i - 1, -1, -1):
        b = blocks[j]
        if b == target:
            return len(seen)
        seen.add(b)
    return FIRST_ACCESS


def stack_distance(blocks, i):
    seq = check_blocks(blocks)
    if not 0 <= i < len(seq):
        raise IndexError(f"position {i} outside trace of length {len(seq)}")
    return naive_stack_distance(seq, i)


def stack_distances(blocks):
    """Reuse distance of every access in O(n log n).

    A Fenwick tree over positions marks the most recent access of each block;
    the distance at ``i`` is the number of marks strictly between the previous
    access to ``blocks[i]`` and ``i``.
    """
    seq = check_blocks(blocks)
    n = len(seq)
    tree = [0] * (n + 1)
    out = [FIRST_ACCESS] * n
    last = {}
    marked = 0
    for i, b in enumerate(seq):
        p = last.get(b)
        if p is not None:
            # marks at positions <= p (1-based p + 1)
            k = p + 1
            below = 0
            while k:
                below += tree[k]
                k &= k - 1
            out[i] = marked - below
            k = p + 1
            while k <= n:
                tree[k] -= 1
                k += k & -k
            marked -= 1
        k = i + 1
        while k <= n:
            tree[k] += 1
            k += k & -k
        marked += 1
        last[b] = i
    return np.array(out, dtype=np.int64)


def histogram(blocks, distances=None):
    """Access counts per reuse bucket plus ``first_access``."""
    d = stack_distances(blocks) if distances is None else np.asarray(distances)
    idx = bucket_indices(d)
    counts = np.bincount(idx[idx >= 0], minlength=N_BUCKETS)
    out = {label: int(c) for label, c in zip(BUCKET_LABELS, counts)}
    out[FIRST_ACCESS_LABEL] = int(np.count_nonzero(idx < 0))
    return out


@dataclass
class MarkovMatrix:
    """Transition counts between buckets of successive reuse distances of a block."""

    counts: np.ndarray

    @property
    def labels(self):
        return BUCKET_LABELS

    @property
    def probabilities(self):
        totals = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(totals > 0, self.counts / np.maximum(totals, 1), 0.0)
        return p

    @property
    def empty(self):
        return not self.counts.any()

    def probability(self, src, dst):
        return float(self.probabilities[BUCKET_LABELS.index(src), BUCKET_LABELS.index(dst)])

    def rows(self):
        """``(from, to, count, probability)`` for every nonzero transition."""
        p = self.probabilities
        return [
            (BUCKET_LABELS[i], BUCKET_LABELS[j], int(self.counts[i, j]), float(p[i, j]))
            for i in range(N_BUCKETS)
            for j in range(N_BUCKETS)
            if self.counts[i, j]
        ]


def markov(blocks, distances=None):
    seq = np.asarray(check_blocks(blocks), dtype=np.uint64)
    d = stack_distances(seq) if distances is None else np.asarray(distances)
    reuse = d >= 0
    b = seq[reuse]
    idx = bucket_indices(d[reuse])
    counts = np.zeros((N_BUCKETS, N_BUCKETS), dtype=np.int64)
    if len(b) >= 2:
        order = np.argsort(b, kind="stable")
        b, idx = b[order], idx[order]
        same = b[1:] == b[:-1]
        np.add.at(counts, (idx[:-1][same], idx[1:][same]), 1)
    return MarkovMatrix(counts)


def mpki(stats):
    if stats.instructions <= 0:
        raise ValueError("MPKI is undefined for a zero-instruction run")
    return stats.misses * 1000.0 / stats.instructions


def mpki_reduction(policy, baseline):
    """Percent miss reduction of ``policy`` relative to ``baseline``."""
    if baseline.misses <= 0:
        raise ValueError("baseline has no misses; reduction is undefined")
    return (baseline.misses - policy.misses) * 100.0 / baseline.misses


def opt_fraction(policy, baseline, opt):
    """Share (percent) of OPT's miss reduction that ``policy`` achieves; None if OPT gains nothing."""
    gap = baseline.misses - opt.misses
    if gap == 0:
        return None
    return (baseline.misses - policy.misses) * 100.0 / gap


class ReuseDistanceTransformer(TransformerMixin, BaseEstimator):
    """Map an address trace to per-access reuse distances (or bucket ids)."""

    def __init__(self, block_bits=6, bucketize=False):
        self.block_bits = block_bits
        self.bucketize = bucketize

    def fit(self, X, y=None):
        check_block_bits(self.block_bits)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        frames = check_addresses(X) >> np.uint64(check_block_bits(self.block_bits))
        d = stack_distances(frames)
        return bucket_indices(d) if self.bucketize else d
