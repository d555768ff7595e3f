"""Future-knowledge machinery: next-use index, Belady OPT, OPT-bypass, scoring."""

from dataclasses import dataclass

import numpy as np

from .analysis import BUCKET_LABELS, OVERALL, bucket_index
from .cache import INVALID
from .engine import BaseEngine, FilteredEngine, RunStats
from .validation import check_addresses, check_blocks, check_positive_int

INFINITE = np.iinfo(np.int64).max


def build_next_use(blocks):
    """``next_use[i]``: position of the next access to ``blocks[i]``, else INFINITE."""
    seq = check_blocks(blocks)
    out = [INFINITE] * len(seq)
    last_seen = {}
    for i in range(len(seq) - 1, -1, -1):
        b = seq[i]
        out[i] = last_seen.get(b, INFINITE)
        last_seen[b] = i
    return np.array(out, dtype=np.int64)


class NextUseIndex:
    """Next-use array plus random-access "next access of frame after t" queries."""

    def __init__(self, blocks):
        self.blocks = np.asarray(blocks, dtype=np.uint64)
        self.next_use = build_next_use(self.blocks)
        self._uniq = None

    def __len__(self):
        return len(self.next_use)

    def __getitem__(self, i):
        return self.next_use[i]

    def _build_lookup(self):
        self._uniq, ids = np.unique(self.blocks, return_inverse=True)
        n = len(self.blocks)
        self._stride = n + 1
        self._keys = np.sort(ids.astype(np.int64) * self._stride + np.arange(n, dtype=np.int64))

    def next_access(self, frames, after):
        """Vectorised: first position > ``after`` accessing each frame (INFINITE if none)."""
        if self._uniq is None:
            self._build_lookup()
        frames = np.atleast_1d(np.asarray(frames, dtype=np.uint64))
        after = np.broadcast_to(np.asarray(after, dtype=np.int64), frames.shape)
        ids = np.searchsorted(self._uniq, frames)
        known = (ids < len(self._uniq)) & (self._uniq[np.minimum(ids, len(self._uniq) - 1)] == frames)
        ids = np.where(known, ids, 0)
        q = ids * self._stride + after + 1
        j = np.searchsorted(self._keys, q)
        out = np.full(frames.shape, INFINITE, dtype=np.int64)
        ok = known & (j < len(self._keys))
        hit = self._keys[np.minimum(j, len(self._keys) - 1)]
        ok &= hit // self._stride == ids
        out[ok] = hit[ok] % self._stride
        return out


def run_opt(blocks, geometry, next_use=None, record_evictions=False, warmup=0):
    """Belady OPT over block frames: evict the resident reused furthest ahead.

    Ties (including several never-reused blocks) go to the lowest way index.
    The first ``warmup`` accesses update the cache but are not counted.
    Returns ``RunStats``, or ``(RunStats, events)`` with ``record_evictions``.
    """
    seq = check_blocks(blocks)
    if next_use is None:
        next_use = build_next_use(seq)
    nu = next_use.tolist() if isinstance(next_use, np.ndarray) else list(next_use)
    ways = geometry.ways
    mask = geometry.sets - 1
    tags = [[INVALID] * ways for _ in range(geometry.sets)]
    nxt = [[-1] * ways for _ in range(geometry.sets)]
    hits = misses = 0
    events = []
    for t, f in enumerate(seq):
        s = f & mask
        row = tags[s]
        if t == warmup:
            hits = misses = 0
            events = []
        if f in row:
            nxt[s][row.index(f)] = nu[t]
            hits += 1
            continue
        misses += 1
        if INVALID in row:
            w = row.index(INVALID)
        else:
            nx = nxt[s]
            w = nx.index(max(nx))
            if record_evictions:
                events.append((t, tuple(row), row[w]))
        row[w] = f
        nxt[s][w] = nu[t]
    if warmup >= len(seq):
        hits = misses = 0
        events = []
    stats = RunStats(instructions=hits + misses, icache_hits=hits, misses=misses)
    return (stats, events) if record_evictions else stats


class OPTEngine(BaseEngine):
    """Estimator wrapper around ``run_opt``."""

    def __init__(self, size_bytes=32768, ways=8, block_bits=6, warmup=0, record_evictions=False):
        self.size_bytes = size_bytes
        self.ways = ways
        self.block_bits = block_bits
        self.warmup = warmup
        self.record_evictions = record_evictions

    def fit(self, X, y=None):
        frames = check_addresses(X) >> np.uint64(self.block_bits)
        warmup = check_positive_int("warmup", self.warmup, minimum=0)
        result = run_opt(frames.tolist(), self.geometry, record_evictions=self.record_evictions,
                         warmup=warmup)
        if self.record_evictions:
            self.stats_, self.evictions_ = result
        else:
            self.stats_, self.evictions_ = result, []
        return self


class OPTBypassEngine(FilteredEngine):
    """ACIC datapath with the predictor replaced by oracle comparison.

    An i-Filter victim facing a full set is inserted only if its next use is
    strictly earlier than that of the set's LRU contender (ties keep the
    contender). Empty ways are always filled. No CSHR, no training.
    """

    _has_before_fetch = True

    def __init__(self, ifilter_capacity=16, size_bytes=32768, ways=8, block_bits=6,
                 warmup=0, check_every=0, record_decisions=False):
        self.ifilter_capacity = ifilter_capacity
        self.size_bytes = size_bytes
        self.ways = ways
        self.block_bits = block_bits
        self.warmup = warmup
        self.check_every = check_every
        self.record_decisions = record_decisions

    prefetch = False

    def fit(self, X, y=None):
        frames = check_addresses(X) >> np.uint64(self.block_bits)
        self._next_use = build_next_use(frames.tolist()).tolist()
        return super().fit(X, y)

    def _reset(self):
        self._reset_filtered()
        self._pos = {}
        self.decisions_ = []

    def _before_fetch(self, f, t, st):
        self._pos[f] = t

    def _place_victim(self, v, t, st):
        ic = self.icache_
        s = v & ic.set_mask
        if INVALID in ic.tags[s]:
            ic.insert(v)
            st.free_way_fills += 1
            return
        c = ic.lru_frame(s)
        # Both were last fetched before t, so next_use at that position is their next use after t.
        nu, pos = self._next_use, self._pos
        admit = nu[pos[v]] < nu[pos[c]]
        if self.record_decisions:
            self.decisions_.append((t, v, c, admit))
        if admit:
            ic.insert(v)
            st.inserts_to_icache += 1
        else:
            st.bypasses += 1


def run_opt_bypass(blocks, geometry, ifilter_capacity=16):
    """OPT-bypass over block frames; returns ``RunStats``."""
    frames = np.asarray(check_blocks(blocks), dtype=np.uint64)
    engine = OPTBypassEngine(ifilter_capacity, geometry.size_bytes, geometry.ways, geometry.block_bits)
    return engine.fit(frames << np.uint64(geometry.block_bits)).stats_


@dataclass(frozen=True)
class DecisionRecord:
    position: int
    victim: int
    contender: int
    decision: bool
    oracle_decision: bool
    victim_distance: int
    contender_distance: int


def annotate_decisions(raw, index):
    """Attach oracle verdicts to ``(position, victim, contender, admitted)`` tuples.

    Distances are measured in trace positions from the decision point; the
    oracle admits iff the victim's next use is strictly earlier.
    """
    if not raw:
        return []
    pos = np.array([r[0] for r in raw], dtype=np.int64)
    nv = index.next_access([r[1] for r in raw], pos)
    nc = index.next_access([r[2] for r in raw], pos)
    out = []
    for (t, v, c, admit), a, b in zip(raw, nv.tolist(), nc.tolist()):
        out.append(DecisionRecord(
            t, v, c, bool(admit), a < b,
            INFINITE if a == INFINITE else a - t,
            INFINITE if b == INFINITE else b - t,
        ))
    return out


@dataclass
class AccuracyReport:
    """Correct/total decision counts overall and per reuse bucket."""

    correct: dict
    total: dict

    def accuracy(self, bucket=OVERALL):
        n = self.total.get(bucket, 0)
        return float("nan") if n == 0 else self.correct[bucket] * 100.0 / n

    def rows(self):
        return [
            (b, self.correct[b], self.total[b], self.accuracy(b))
            for b in (OVERALL,) + BUCKET_LABELS
        ]


def score_decisions(records):
    """Share of admission decisions that agree with the oracle.

    Records are bucketed by ``min(victim_distance, contender_distance)``.
    """
    correct = dict.fromkeys((OVERALL,) + BUCKET_LABELS, 0)
    total = dict.fromkeys((OVERALL,) + BUCKET_LABELS, 0)
    for r in records:
        label = BUCKET_LABELS[bucket_index(min(r.victim_distance, r.contender_distance))]
        ok = r.decision == r.oracle_decision
        for key in (OVERALL, label):
            total[key] += 1
            correct[key] += ok
    return AccuracyReport(correct, total)


def replacement_accuracy(events, index):
    """Percent of evictions whose victim OPT would also have picked.

    ``events`` are ``(position, set_contents, victim)``. A victim counts as
    OPT's choice when no other resident is reused later than it (so ties
    among equally-distant blocks all count). Returns NaN with no events.
    """
    if not events:
        return float("nan")
    ways = len(events[0][1])
    contents = np.array([e[1] for e in events], dtype=np.uint64).reshape(len(events), ways)
    pos = np.repeat(np.array([e[0] for e in events], dtype=np.int64), ways)
    nxt = index.next_access(contents.ravel(), pos).reshape(len(events), ways)
    victim_way = np.argmax(contents == np.array([e[2] for e in events], dtype=np.uint64)[:, None], axis=1)
    victim_next = nxt[np.arange(len(events)), victim_way]
    return float(np.mean(victim_next == nxt.max(axis=1)) * 100.0)
