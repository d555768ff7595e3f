"""Comparison Status Holding Registers (CSHR).

Each entry pairs an i-Filter victim with the i-cache contender it competed
against, both as partial tags. The first of the two to be fetched again
decides the comparison. The table is split into ``sets`` sets selected by the
top ``m`` bits of the i-cache set index; each set is LRU-managed.
"""

from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import NamedTuple

from .predictor import Outcome
from .validation import check_positive_int, check_power_of_two


SQUEEZED = "squeezed"
UPPER = "upper"
TAG_SCHEMES = (SQUEEZED, UPPER)


@dataclass(frozen=True)
class CshrConfig:
    entries: int = 256
    sets: int = 8
    tag_bits: int = 12
    tag_scheme: str = SQUEEZED

    def __post_init__(self):
        if self.tag_scheme not in TAG_SCHEMES:
            raise ValueError(f"unknown cshr tag_scheme {self.tag_scheme!r}; choose from {TAG_SCHEMES}")
        check_positive_int("cshr entries", self.entries)
        check_power_of_two("cshr sets", self.sets)
        check_positive_int("cshr tag_bits", self.tag_bits)
        if self.entries % self.sets:
            raise ValueError(f"cshr entries={self.entries} not divisible by sets={self.sets}")

    @property
    def ways(self):
        return self.entries // self.sets

    @property
    def set_bits(self):
        return self.sets.bit_length() - 1

    def to_dict(self):
        return asdict(self)


class Resolution(NamedTuple):
    victim_tag: int
    outcome: Outcome


def cshr_shift(geometry, cfg):
    """Right shift taking an i-cache set index to its CSHR set."""
    return max(geometry.set_index_bits - cfg.set_bits, 0)


def partial_tag_of(frame, geometry, cfg):
    """``(cshr_set, partial_tag)`` for a block frame.

    The CSHR set is the top ``m`` bits of the i-cache set index. Under the
    ``squeezed`` scheme the partial tag is the low ``tag_bits`` bits of the
    frame number once those ``m`` bits are squeezed out (they are implied by
    the CSHR set), so the stored tag still separates neighbouring i-cache
    sets of one CSHR set. The ``upper`` scheme keeps the low ``tag_bits``
    bits of ``frame // sets`` instead.
    """
    shift = cshr_shift(geometry, cfg)
    cshr_set = (frame & (geometry.sets - 1)) >> shift
    upper = frame >> geometry.set_index_bits
    if cfg.tag_scheme == UPPER:
        return cshr_set, upper & ((1 << cfg.tag_bits) - 1)
    squeezed = (upper << shift) | (frame & ((1 << shift) - 1))
    return cshr_set, squeezed & ((1 << cfg.tag_bits) - 1)


class _CshrSet:
    __slots__ = ("entries", "by_contender")

    def __init__(self):
        # victim_tag -> contender_tag, oldest first. Victim tags are unique per set.
        self.entries = OrderedDict()
        # contender_tag -> {victim_tag: None}, in tracking order.
        self.by_contender = {}


class Cshr:
    def __init__(self, config=None, **params):
        if config is None:
            config = CshrConfig(**params)
        self.config = config
        self.ways = config.ways
        self.tag_mask = (1 << config.tag_bits) - 1
        self._sets = [_CshrSet() for _ in range(config.sets)]
        self.valid = 0
        self.capacity_evictions = 0
        self.dedup_replacements = 0
        self.tracked = 0
        self.resolved = 0

    def __len__(self):
        return self.valid

    def entries(self, cshr_set):
        """Valid ``(victim_tag, contender_tag)`` pairs of a set, LRU first."""
        return list(self._sets[cshr_set].entries.items())

    def _drop(self, s, victim_tag):
        contender_tag = s.entries.pop(victim_tag)
        group = s.by_contender[contender_tag]
        del group[victim_tag]
        if not group:
            del s.by_contender[contender_tag]
        self.valid -= 1

    def track(self, cshr_set, victim_tag, contender_tag):
        """Record a new (victim, contender) pair; returns benefit-of-doubt resolutions.

        A still-valid entry for the same victim tag is retired as a victim win
        before the new one is stored, so each set holds at most one entry per
        victim tag. A full set retires its LRU entry the same way.
        """
        victim_tag &= self.tag_mask
        contender_tag &= self.tag_mask
        s = self._sets[cshr_set]
        out = []
        if victim_tag in s.entries:
            self._drop(s, victim_tag)
            self.dedup_replacements += 1
            out.append(Resolution(victim_tag, Outcome.VICTIM_WON))
        elif len(s.entries) >= self.ways:
            oldest = next(iter(s.entries))
            self._drop(s, oldest)
            self.capacity_evictions += 1
            out.append(Resolution(oldest, Outcome.VICTIM_WON))
        s.entries[victim_tag] = contender_tag
        s.by_contender.setdefault(contender_tag, {})[victim_tag] = None
        self.valid += 1
        self.tracked += 1
        return out

    def resolve_fetch(self, cshr_set, fetched_tag):
        """Resolve every entry of ``cshr_set`` that the fetched block decides."""
        s = self._sets[cshr_set]
        if not s.entries:
            return []
        fetched_tag &= self.tag_mask
        out = []
        if fetched_tag in s.entries:
            self._drop(s, fetched_tag)
            out.append(Resolution(fetched_tag, Outcome.VICTIM_WON))
        group = s.by_contender.pop(fetched_tag, None)
        if group:
            for victim_tag in group:
                del s.entries[victim_tag]
                out.append(Resolution(victim_tag, Outcome.VICTIM_LOST))
            self.valid -= len(group)
        self.resolved += len(out)
        return out
