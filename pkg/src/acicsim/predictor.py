"""Two-level i-cache admission predictor.

Level one is the comparison History Register Table (HRT): one shift register
per hashed victim tag recording recent victim-vs-contender outcomes (1 = the
i-Filter victim was re-fetched first). Level two is the Pattern Table (PT):
saturating counters indexed by a history value. A victim is admitted iff
its PT counter reaches the threshold.
"""

from collections import deque
from dataclasses import asdict, dataclass
from enum import Enum

from .validation import check_positive_int, check_power_of_two


class Outcome(Enum):
    VICTIM_WON = 1
    VICTIM_LOST = 0


INSTANT = "instant"
DELAYED = "delayed"


@dataclass(frozen=True)
class PredictorConfig:
    hrt_entries: int = 1024
    history_bits: int = 4
    pt_counter_bits: int = 5
    threshold: int | None = None
    update_mode: str = INSTANT
    queue_slots: int = 10
    tag_bits: int = 12

    def __post_init__(self):
        check_power_of_two("hrt_entries", self.hrt_entries)
        check_positive_int("history_bits", self.history_bits)
        check_positive_int("pt_counter_bits", self.pt_counter_bits)
        check_positive_int("queue_slots", self.queue_slots)
        check_positive_int("tag_bits", self.tag_bits)
        if self.update_mode not in (INSTANT, DELAYED):
            raise ValueError(f"update_mode must be 'instant' or 'delayed', got {self.update_mode!r}")
        if self.threshold is not None and not (0 <= self.threshold <= self.counter_max + 1):
            raise ValueError(
                f"threshold must lie in [0, {self.counter_max + 1}], got {self.threshold!r}"
            )

    @property
    def pt_entries(self):
        return 1 << self.history_bits

    @property
    def counter_max(self):
        return (1 << self.pt_counter_bits) - 1

    @property
    def counter_init(self):
        return 1 << (self.pt_counter_bits - 1)

    @property
    def effective_threshold(self):
        return self.counter_init if self.threshold is None else self.threshold

    def to_dict(self):
        return asdict(self)


def hash_tag(partial_tag, hrt_entries):
    """XOR-fold a partial tag into ``log2(hrt_entries)`` bits.

    For a 12-bit tag and 1024 entries this is
    ``(tag mod 1024) XOR (tag div 1024)``.
    """
    mask = hrt_entries - 1
    shift = mask.bit_length()
    if shift == 0:
        return 0
    index = 0
    while partial_tag:
        index ^= partial_tag & mask
        partial_tag >>= shift
    return index


class AdmissionPredictor:
    """HRT + PT with a threshold decision and optional delayed PT updates.

    Training reads the PT entry selected by the *pre-shift* history, then
    shifts the outcome bit into the HRT register. In delayed mode the PT
    change waits in a per-entry queue (dropped when the queue is full) and
    ``drain_one`` applies at most one queued update per entry.
    """

    def __init__(self, config=None, **params):
        if config is None:
            config = PredictorConfig(**params)
        elif params:
            raise TypeError("pass either a PredictorConfig or keyword params, not both")
        self.config = config
        self.hrt_entries = config.hrt_entries
        self.history_mask = config.pt_entries - 1
        self.tag_mask = (1 << config.tag_bits) - 1
        self.counter_max = config.counter_max
        self.threshold = config.effective_threshold
        self.delayed = config.update_mode == DELAYED
        self.queue_slots = config.queue_slots
        self.hrt = [0] * config.hrt_entries
        self.pt = [config.counter_init] * config.pt_entries
        self.queues = [deque() for _ in range(config.pt_entries)]
        self.pending = 0
        self.dropped_updates = 0
        # hash_tag is pure; memoise it over the (small) partial-tag space.
        self._index = [hash_tag(t, config.hrt_entries) for t in range(1 << min(config.tag_bits, 20))]

    def _hrt_index(self, partial_tag):
        partial_tag &= self.tag_mask
        if partial_tag < len(self._index):
            return self._index[partial_tag]
        return hash_tag(partial_tag, self.hrt_entries)

    def history(self, partial_tag):
        return self.hrt[self._hrt_index(partial_tag)]

    def counter(self, partial_tag):
        return self.pt[self.history(partial_tag)]

    def predict(self, partial_tag):
        """True to admit the victim into the i-cache, False to bypass it."""
        return self.pt[self.hrt[self._hrt_index(partial_tag)]] >= self.threshold

    def train(self, partial_tag, outcome):
        won = outcome is Outcome.VICTIM_WON
        idx = self._hrt_index(partial_tag)
        h = self.hrt[idx]
        if self.delayed:
            q = self.queues[h]
            if len(q) < self.queue_slots:
                q.append(won)
                self.pending += 1
            else:
                self.dropped_updates += 1
        else:
            self._apply(h, won)
        self.hrt[idx] = ((h << 1) | won) & self.history_mask

    def _apply(self, pt_index, increment):
        c = self.pt[pt_index]
        if increment:
            if c < self.counter_max:
                self.pt[pt_index] = c + 1
        elif c > 0:
            self.pt[pt_index] = c - 1

    def drain_one(self):
        """Pop the head of every non-empty PT update queue and apply it."""
        if not self.pending:
            return
        for pt_index, q in enumerate(self.queues):
            if q:
                self._apply(pt_index, q.popleft())
                self.pending -= 1
