"""i-Filter: small fully associative LRU buffer that absorbs fetch bursts."""

from collections import OrderedDict

from .validation import check_positive_int


class IFilter:
    """Fully associative LRU buffer of block frames (MRU kept at the end)."""

    def __init__(self, capacity=16):
        self.capacity = check_positive_int("ifilter capacity", capacity)
        self._entries = OrderedDict()

    def __contains__(self, frame):
        return frame in self._entries

    def __len__(self):
        return len(self._entries)

    def probe(self, frame):
        if frame in self._entries:
            self._entries.move_to_end(frame)
            return True
        return False

    def fill(self, frame):
        """Insert ``frame`` at MRU; returns the LRU victim if the buffer was full."""
        assert frame not in self._entries, f"frame {frame:#x} already in i-Filter"
        victim = None
        if len(self._entries) >= self.capacity:
            victim = self._entries.popitem(last=False)[0]
        self._entries[frame] = None
        return victim

    def lru(self):
        return next(iter(self._entries), None)

    def frames(self):
        """Resident frames, MRU first."""
        return list(reversed(self._entries))
