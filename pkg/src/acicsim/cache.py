"""Set-associative cache with pluggable replacement, plus a victim cache."""

import random
from collections import OrderedDict
from dataclasses import dataclass

from .validation import check_block_bits, check_positive_int, check_power_of_two

INVALID = -1

LRU = "lru"
SRRIP = "srrip"
RANDOM = "random"
POLICIES = (LRU, SRRIP, RANDOM)

RRPV_MAX = 3
RRPV_INSERT = 2


@dataclass(frozen=True)
class CacheGeometry:
    """sets x ways x block_size. Default is a 32KB, 8-way, 64B-block i-cache."""

    size_bytes: int = 32 * 1024
    ways: int = 8
    block_bits: int = 6

    def __post_init__(self):
        check_positive_int("ways", self.ways)
        check_block_bits(self.block_bits)
        check_positive_int("size_bytes", self.size_bytes)
        line_bytes = self.block_size * self.ways
        if self.size_bytes % line_bytes:
            raise ValueError(
                f"size_bytes={self.size_bytes} is not a multiple of ways*block_size={line_bytes}"
            )
        check_power_of_two("sets", self.size_bytes // line_bytes)

    @classmethod
    def from_shape(cls, sets, ways, block_bits=6):
        return cls(size_bytes=sets * ways << block_bits, ways=ways, block_bits=block_bits)

    @property
    def block_size(self):
        return 1 << self.block_bits

    @property
    def sets(self):
        return self.size_bytes // (self.block_size * self.ways)

    @property
    def set_index_bits(self):
        return self.sets.bit_length() - 1

    @property
    def blocks(self):
        return self.sets * self.ways

    def set_of(self, frame):
        return frame & (self.sets - 1)


class SetAssociativeCache:
    """sets x ways array of block frames with per-way replacement state.

    ``tags[s][w]`` is the frame in way ``w`` of set ``s`` (``INVALID`` when
    empty). ``state[s][w]`` is an LRU timestamp or an SRRIP RRPV.
    """

    def __init__(self, geometry, policy=LRU, seed=0):
        if policy not in POLICIES:
            raise ValueError(f"unknown replacement policy {policy!r}; choose from {POLICIES}")
        self.geometry = geometry
        self.policy = policy
        self.ways = geometry.ways
        self.set_mask = geometry.sets - 1
        self.tags = [[INVALID] * self.ways for _ in range(geometry.sets)]
        self.state = [[0] * self.ways for _ in range(geometry.sets)]
        self._clock = 0
        self._rng = random.Random(seed)
        self.occupancy = 0

    def __contains__(self, frame):
        return frame in self.tags[frame & self.set_mask]

    def lookup(self, frame):
        """Hit test; a hit promotes the block (LRU: MRU, SRRIP: RRPV 0)."""
        row = self.tags[frame & self.set_mask]
        if frame not in row:
            return False
        way = row.index(frame)
        if self.policy == LRU:
            self._clock += 1
            self.state[frame & self.set_mask][way] = self._clock
        elif self.policy == SRRIP:
            self.state[frame & self.set_mask][way] = 0
        return True

    def has_free_way(self, set_index):
        return INVALID in self.tags[set_index]

    def choose_victim(self, set_index):
        """Way to replace in ``set_index``; invalid ways come first."""
        row = self.tags[set_index]
        if INVALID in row:
            return row.index(INVALID)
        st = self.state[set_index]
        if self.policy == LRU:
            return st.index(min(st))
        if self.policy == SRRIP:
            while RRPV_MAX not in st:
                for w in range(self.ways):
                    st[w] += 1
            return st.index(RRPV_MAX)
        return self._rng.randrange(self.ways)

    def lru_frame(self, set_index):
        """Frame in the LRU way of a full set (the admission contender)."""
        st = self.state[set_index]
        return self.tags[set_index][st.index(min(st))]

    def insert(self, frame):
        """Place a non-resident ``frame``; returns the displaced frame or None."""
        s = frame & self.set_mask
        row = self.tags[s]
        assert frame not in row, f"frame {frame:#x} already resident"
        way = self.choose_victim(s)
        evicted = row[way]
        row[way] = frame
        if self.policy == LRU:
            self._clock += 1
            self.state[s][way] = self._clock
        elif self.policy == SRRIP:
            self.state[s][way] = RRPV_INSERT
        if evicted == INVALID:
            self.occupancy += 1
            return None
        return evicted

    def remove(self, frame):
        s = frame & self.set_mask
        row = self.tags[s]
        if frame not in row:
            return False
        way = row.index(frame)
        row[way] = INVALID
        self.state[s][way] = 0
        self.occupancy -= 1
        return True

    def contents(self, set_index):
        return tuple(f for f in self.tags[set_index] if f != INVALID)

    def resident(self):
        return {f for row in self.tags for f in row if f != INVALID}


class VictimCache:
    """Small LRU cache fed by main-cache evictions; fully associative by default."""

    def __init__(self, blocks=48, ways=None):
        check_positive_int("victim cache blocks", blocks)
        ways = blocks if ways is None else check_positive_int("victim cache ways", ways)
        if blocks % ways:
            raise ValueError(f"victim cache blocks={blocks} not divisible by ways={ways}")
        self.blocks = blocks
        self.ways = ways
        self.nsets = blocks // ways
        self._sets = [OrderedDict() for _ in range(self.nsets)]

    def __contains__(self, frame):
        return frame in self._sets[frame % self.nsets]

    def __len__(self):
        return sum(len(s) for s in self._sets)

    def probe(self, frame):
        """Hit test; a hit removes the block (the caller moves it back)."""
        s = self._sets[frame % self.nsets]
        if frame in s:
            del s[frame]
            return True
        return False

    def put(self, frame):
        """Insert at MRU; returns the LRU frame pushed out, if any."""
        s = self._sets[frame % self.nsets]
        s[frame] = None
        s.move_to_end(frame)
        if len(s) > self.ways:
            return s.popitem(last=False)[0]
        return None

    def resident(self):
        return {f for s in self._sets for f in s}


# Presets for the two victim-cache sizes the comparison table and text mention.
VC3K = {"blocks": 48, "ways": 48}
VC8K = {"blocks": 128, "ways": 4}


def victim_cache_cycle(vc, evicted_frame, probe_frame):
    """Probe ``vc`` for ``probe_frame`` then park ``evicted_frame`` in it."""
    hit = vc.probe(probe_frame)
    if evicted_frame is not None:
        vc.put(evicted_frame)
    return hit
