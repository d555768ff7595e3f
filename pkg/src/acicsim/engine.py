"""Simulation engines as scikit-learn style estimators.

``engine.fit(X)`` folds the engine's per-fetch transition over the address
trace ``X`` and leaves the counters in ``engine.stats_``. Engines are plain
``BaseEstimator`` subclasses, so ``get_params``/``set_params``/``clone`` and
``ParameterGrid`` sweeps work unchanged.

Every engine shares the same hot-loop shortcut: a fetch of the same frame as
the previous fetch, when that previous fetch hit, is guaranteed to hit the
same structure with no state change, so only the counter is bumped.
"""

from dataclasses import asdict, dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cache import INVALID, LRU, CacheGeometry, SetAssociativeCache, VictimCache
from .cshr import SQUEEZED, Cshr, CshrConfig, cshr_shift
from .ifilter import IFilter
from .predictor import AdmissionPredictor, Outcome, PredictorConfig
from .validation import check_addresses, check_positive_int

CHUNK = 1 << 20

# Hit kinds remembered for the repeat-fetch shortcut.
_MISS, _IFILTER_HIT, _ICACHE_HIT = 0, 1, 2


class InvariantError(AssertionError):
    pass


@dataclass
class RunStats:
    instructions: int = 0
    ifilter_hits: int = 0
    icache_hits: int = 0
    victim_cache_hits: int = 0
    misses: int = 0
    ifilter_evictions: int = 0
    inserts_to_icache: int = 0
    bypasses: int = 0
    free_way_fills: int = 0
    prefetch_fills: int = 0
    resolutions_won: int = 0
    resolutions_lost: int = 0
    benefit_of_doubt_evictions: int = 0
    cshr_dedups: int = 0

    @property
    def mpki(self):
        if self.instructions == 0:
            raise ZeroDivisionError("MPKI is undefined for a zero-instruction run")
        return self.misses * 1000.0 / self.instructions

    @property
    def insert_rate(self):
        """Share of i-Filter victims inserted in place of an i-cache contender."""
        if self.ifilter_evictions == 0:
            return float("nan")
        return self.inserts_to_icache / self.ifilter_evictions

    def check(self, uses_ifilter=False):
        hits = self.ifilter_hits + self.icache_hits + self.victim_cache_hits
        if hits + self.misses != self.instructions:
            raise InvariantError(f"hit/miss identity broken: {self}")
        if uses_ifilter:
            placed = self.inserts_to_icache + self.bypasses + self.free_way_fills
            if placed != self.ifilter_evictions:
                raise InvariantError(f"eviction identity broken: {self}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


class BaseEngine(BaseEstimator):
    """Common fit/warmup/chunking machinery.

    Subclasses implement ``_reset()`` (build fresh structures) and
    ``_run_chunk(frames, t0, stats)`` (simulate a list of frames whose first
    element sits at trace position ``t0``).
    """

    uses_ifilter = False

    @property
    def geometry(self):
        return CacheGeometry(self.size_bytes, self.ways, self.block_bits)

    def fit(self, X, y=None):
        addresses = check_addresses(X)
        frames = addresses >> np.uint64(self.geometry.block_bits)
        warmup = check_positive_int("warmup", self.warmup, minimum=0)
        self._reset()
        self._prev = None
        self._prev_kind = _MISS
        self.warmup_stats_ = RunStats()
        stats = self.warmup_stats_
        for start in range(0, len(frames), CHUNK):
            stop = min(start + CHUNK, len(frames))
            if start < warmup < stop:
                self._run_chunk(frames[start:warmup].tolist(), start, stats)
                stats = RunStats()
                self._run_chunk(frames[warmup:stop].tolist(), warmup, stats)
            else:
                if start == warmup:
                    stats = RunStats()
                self._run_chunk(frames[start:stop].tolist(), start, stats)
        if warmup >= len(frames):
            stats = RunStats()
        self.stats_ = stats
        self.stats_.check(self.uses_ifilter)
        return self

    @property
    def mpki_(self):
        check_is_fitted(self, "stats_")
        return self.stats_.mpki

    def resident_frames(self):
        """Frames held in each storage structure, keyed by structure name."""
        return {}

    def check_exclusive(self):
        held = self.resident_frames()
        names = list(held)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                both = held[a] & held[b]
                if both:
                    raise InvariantError(
                        f"{len(both)} frame(s) resident in both {a} and {b}, e.g. {min(both):#x}"
                    )


class CacheOnlyEngine(BaseEngine):
    """Plain i-cache (``lru_only`` / ``srrip_only`` / ``random_only``)."""

    def __init__(self, policy=LRU, size_bytes=32768, ways=8, block_bits=6, seed=0,
                 warmup=0, record_evictions=False):
        self.policy = policy
        self.size_bytes = size_bytes
        self.ways = ways
        self.block_bits = block_bits
        self.seed = seed
        self.warmup = warmup
        self.record_evictions = record_evictions

    def _reset(self):
        self.icache_ = SetAssociativeCache(self.geometry, self.policy, seed=self.seed)
        self.evictions_ = []

    def resident_frames(self):
        return {"icache": self.icache_.resident()}

    def _run_chunk(self, frames, t0, st):
        ic = self.icache_
        lookup, insert = ic.lookup, ic.insert
        tags, mask = ic.tags, ic.set_mask
        log = self.evictions_.append if self.record_evictions else None
        prev, prev_hit = self._prev, self._prev_kind
        hits = misses = 0
        t = t0 - 1
        for f in frames:
            t += 1
            if f == prev and prev_hit:
                hits += 1
                continue
            prev = f
            if lookup(f):
                hits += 1
                prev_hit = _ICACHE_HIT
                continue
            misses += 1
            prev_hit = _MISS
            if log is not None and INVALID not in tags[f & mask]:
                row = tuple(tags[f & mask])
                log((t, row, insert(f)))
            else:
                insert(f)
        self._prev, self._prev_kind = prev, prev_hit
        st.instructions += len(frames)
        st.icache_hits += hits
        st.misses += misses


class VictimCacheEngine(BaseEngine):
    """LRU i-cache backed by a small victim cache (``victim_cache_lru``)."""

    def __init__(self, vc_blocks=48, vc_ways=None, size_bytes=32768, ways=8, block_bits=6,
                 warmup=0):
        self.vc_blocks = vc_blocks
        self.vc_ways = vc_ways
        self.size_bytes = size_bytes
        self.ways = ways
        self.block_bits = block_bits
        self.warmup = warmup

    def _reset(self):
        self.icache_ = SetAssociativeCache(self.geometry, LRU)
        self.victim_cache_ = VictimCache(self.vc_blocks, self.vc_ways)

    def resident_frames(self):
        return {"icache": self.icache_.resident(), "victim_cache": self.victim_cache_.resident()}

    def _run_chunk(self, frames, t0, st):
        ic, vc = self.icache_, self.victim_cache_
        lookup, insert, probe, put = ic.lookup, ic.insert, vc.probe, vc.put
        prev, prev_hit = self._prev, self._prev_kind
        hits = vc_hits = misses = 0
        for f in frames:
            if f == prev and prev_hit:
                hits += 1
                continue
            prev = f
            if lookup(f):
                hits += 1
                prev_hit = _ICACHE_HIT
                continue
            # Victim-cache hits swap the block back with the displaced one.
            prev_hit = _MISS
            if probe(f):
                vc_hits += 1
            else:
                misses += 1
            evicted = insert(f)
            if evicted is not None:
                put(evicted)
        self._prev, self._prev_kind = prev, prev_hit
        st.instructions += len(frames)
        st.icache_hits += hits
        st.victim_cache_hits += vc_hits
        st.misses += misses


ALWAYS = "always"
ACCESS_COUNT = "access_count"


class FilteredEngine(BaseEngine):
    """i-Filter in front of an LRU i-cache; subclasses decide victim admission.

    Per fetch: probe i-Filter, then i-cache; on a miss the block fills the
    i-Filter and its LRU victim (if any) is offered to the i-cache via
    ``_place_victim``. With ``prefetch`` a demand miss on frame ``f`` also
    fills ``f + 1`` into the i-Filter when it is absent from both structures.
    """

    uses_ifilter = True
    _count_accesses = False

    def _reset_filtered(self):
        self.ifilter_ = IFilter(self.ifilter_capacity)
        self.icache_ = SetAssociativeCache(self.geometry, LRU)
        self.counts_ = {}

    def resident_frames(self):
        return {"ifilter": set(self.ifilter_.frames()), "icache": self.icache_.resident()}

    def _before_fetch(self, f, t, st):
        """Per-fetch hook ahead of lookup (CSHR resolution in ACIC)."""

    def _fill(self, f, t, st):
        victim = self.ifilter_.fill(f)
        if self._count_accesses:
            self.counts_[f] = 0
        if victim is not None:
            st.ifilter_evictions += 1
            self._place_victim(victim, t, st)

    def _run_chunk(self, frames, t0, st):
        od = self.ifilter_._entries
        move = od.move_to_end
        lookup = self.icache_.lookup
        ic_tags, mask = self.icache_.tags, self.icache_.set_mask
        fill = self._fill
        before = self._before_fetch if self._has_before_fetch else None
        counts = self.counts_ if self._count_accesses else None
        prefetch = self.prefetch
        check_every = self.check_every
        prev, prev_kind = self._prev, self._prev_kind
        ifh = ich = misses = 0
        t = t0 - 1
        for f in frames:
            t += 1
            if before is not None:
                before(f, t, st)
            if f == prev and prev_kind:
                if prev_kind == _IFILTER_HIT:
                    ifh += 1
                else:
                    ich += 1
                if counts is not None:
                    counts[f] += 1
                continue
            prev = f
            if f in od:
                move(f)
                ifh += 1
                prev_kind = _IFILTER_HIT
                if counts is not None:
                    counts[f] += 1
            elif lookup(f):
                ich += 1
                prev_kind = _ICACHE_HIT
                if counts is not None:
                    counts[f] += 1
            else:
                misses += 1
                prev_kind = _MISS
                fill(f, t, st)
                if counts is not None:
                    counts[f] += 1
                if prefetch:
                    nf = f + 1
                    if nf not in od and nf not in ic_tags[nf & mask]:
                        st.prefetch_fills += 1
                        fill(nf, t, st)
            if check_every and t % check_every == 0:
                self.check_exclusive()
        self._prev, self._prev_kind = prev, prev_kind
        st.instructions += len(frames)
        st.ifilter_hits += ifh
        st.icache_hits += ich
        st.misses += misses

    _has_before_fetch = False


class IFilterEngine(FilteredEngine):
    """``ifilter_always_insert`` and ``access_count_bypass`` baselines.

    ``admission="always"`` inserts every i-Filter victim, evicting the LRU
    contender. ``admission="access_count"`` inserts the victim only if its
    access count during the current residency exceeds the contender's.
    """

    def __init__(self, admission=ALWAYS, ifilter_capacity=16, size_bytes=32768, ways=8,
                 block_bits=6, prefetch=False, warmup=0, check_every=0):
        self.admission = admission
        self.ifilter_capacity = ifilter_capacity
        self.size_bytes = size_bytes
        self.ways = ways
        self.block_bits = block_bits
        self.prefetch = prefetch
        self.warmup = warmup
        self.check_every = check_every

    def _reset(self):
        if self.admission not in (ALWAYS, ACCESS_COUNT):
            raise ValueError(f"admission must be {ALWAYS!r} or {ACCESS_COUNT!r}, got {self.admission!r}")
        self._count_accesses = self.admission == ACCESS_COUNT
        self._reset_filtered()

    def _place_victim(self, v, t, st):
        ic = self.icache_
        s = v & ic.set_mask
        if INVALID in ic.tags[s]:
            ic.insert(v)
            st.free_way_fills += 1
            return
        if self._count_accesses:
            counts = self.counts_
            c = ic.lru_frame(s)
            if counts.get(v, 0) > counts.get(c, 0):
                ic.insert(v)
                counts.pop(c, None)
                st.inserts_to_icache += 1
            else:
                counts.pop(v, None)
                st.bypasses += 1
            return
        ic.insert(v)
        st.inserts_to_icache += 1


FREE_WAY_PREDICT = "predict"
FREE_WAY_ALWAYS = "always"


class ACICEngine(FilteredEngine):
    """Admission-controlled i-cache: i-Filter + two-level predictor + CSHR.

    Per demand fetch, CSHR entries decided by the fetched block are resolved
    and trained first; then the i-Filter/i-cache lookup runs. An i-Filter
    victim facing a full set is admitted (evicting the set's LRU contender)
    or discarded according to the predictor, and the pair is tracked in the
    CSHR until one of the two blocks is fetched again.

    ``free_way_admission`` governs victims whose set still has an empty way:
    ``"predict"`` consults the predictor without tracking (there is no
    contender), ``"always"`` fills the empty way unconditionally.
    """

    _has_before_fetch = True

    def __init__(self, ifilter_capacity=16, hrt_entries=1024, history_bits=4,
                 pt_counter_bits=5, threshold=None, update_mode="instant", queue_slots=10,
                 cshr_entries=256, cshr_sets=8, tag_bits=12, tag_scheme=SQUEEZED,
                 free_way_admission=FREE_WAY_PREDICT, size_bytes=32768, ways=8,
                 block_bits=6, prefetch=False, warmup=0, check_every=0,
                 record_decisions=False):
        self.ifilter_capacity = ifilter_capacity
        self.hrt_entries = hrt_entries
        self.history_bits = history_bits
        self.pt_counter_bits = pt_counter_bits
        self.threshold = threshold
        self.update_mode = update_mode
        self.queue_slots = queue_slots
        self.cshr_entries = cshr_entries
        self.cshr_sets = cshr_sets
        self.tag_bits = tag_bits
        self.tag_scheme = tag_scheme
        self.free_way_admission = free_way_admission
        self.size_bytes = size_bytes
        self.ways = ways
        self.block_bits = block_bits
        self.prefetch = prefetch
        self.warmup = warmup
        self.check_every = check_every
        self.record_decisions = record_decisions

    @property
    def predictor_config(self):
        return PredictorConfig(
            hrt_entries=self.hrt_entries, history_bits=self.history_bits,
            pt_counter_bits=self.pt_counter_bits, threshold=self.threshold,
            update_mode=self.update_mode, queue_slots=self.queue_slots, tag_bits=self.tag_bits,
        )

    @property
    def cshr_config(self):
        return CshrConfig(entries=self.cshr_entries, sets=self.cshr_sets, tag_bits=self.tag_bits,
                          tag_scheme=self.tag_scheme)

    def _reset(self):
        if self.free_way_admission not in (FREE_WAY_PREDICT, FREE_WAY_ALWAYS):
            raise ValueError(f"unknown free_way_admission {self.free_way_admission!r}")
        self._reset_filtered()
        self.predictor_ = AdmissionPredictor(self.predictor_config)
        self.cshr_ = Cshr(self.cshr_config)
        geom = self.geometry
        self._sib = geom.set_index_bits
        self._cshr_shift = cshr_shift(geom, self.cshr_config)
        self._tag_mask = (1 << self.tag_bits) - 1
        # the "upper" scheme keeps no low set-index bits in the tag
        self._squeeze = self._cshr_shift if self.tag_scheme == SQUEEZED else 0
        self._low_mask = (1 << self._squeeze) - 1
        self._set_mask = geom.sets - 1
        self._delayed = self.predictor_.delayed
        self._last_resolved = None
        self.decisions_ = []

    def _tag(self, frame):
        squeezed = ((frame >> self._sib) << self._squeeze) | (frame & self._low_mask)
        return (frame & self._set_mask) >> self._cshr_shift, squeezed & self._tag_mask

    def _train_all(self, resolutions):
        train = self.predictor_.train
        for r in resolutions:
            train(r.victim_tag, r.outcome)

    def _before_fetch(self, f, t, st):
        pred = self.predictor_
        if self._delayed and pred.pending:
            pred.drain_one()
        # Re-resolving the same frame with no tracking since cannot match anything.
        if f == self._last_resolved or not self.cshr_.valid:
            return
        self._last_resolved = f
        cshr_set, tag = self._tag(f)
        res = self.cshr_.resolve_fetch(cshr_set, tag)
        if res:
            train = pred.train
            for r in res:
                train(r.victim_tag, r.outcome)
                if r.outcome is Outcome.VICTIM_WON:
                    st.resolutions_won += 1
                else:
                    st.resolutions_lost += 1

    def _place_victim(self, v, t, st):
        ic = self.icache_
        pred = self.predictor_
        s = v & ic.set_mask
        vset, vtag = self._tag(v)
        if INVALID in ic.tags[s]:
            if self.free_way_admission == FREE_WAY_ALWAYS or pred.predict(vtag):
                ic.insert(v)
                st.free_way_fills += 1
            else:
                st.bypasses += 1
            return
        c = ic.lru_frame(s)
        admit = pred.predict(vtag)
        if self.record_decisions:
            self.decisions_.append((t, v, c, admit))
        if admit:
            ic.insert(v)
            st.inserts_to_icache += 1
        else:
            st.bypasses += 1
        cshr = self.cshr_
        capacity_before = cshr.capacity_evictions
        res = cshr.track(vset, vtag, self._tag(c)[1])
        self._last_resolved = None
        if res:
            self._train_all(res)
            capacity = cshr.capacity_evictions - capacity_before
            st.benefit_of_doubt_evictions += capacity
            st.cshr_dedups += len(res) - capacity
