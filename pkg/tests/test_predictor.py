import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acicsim.predictor import AdmissionPredictor, Outcome, PredictorConfig, hash_tag

WON, LOST = Outcome.VICTIM_WON, Outcome.VICTIM_LOST


@pytest.mark.parametrize("tag,index", [(0, 0), (2748, 702), (1023, 1023), (1024, 1), (4095, 1020)])
def test_hash_tag(tag, index):
    assert hash_tag(tag, 1024) == index


def test_hash_tag_small_tables():
    assert hash_tag(0b1011_0110, 16) == 0b1011 ^ 0b0110
    assert hash_tag(12345, 1) == 0


def test_config_defaults():
    c = PredictorConfig()
    assert (c.pt_entries, c.counter_max, c.counter_init, c.effective_threshold) == (16, 31, 16, 16)


@pytest.mark.parametrize("kwargs", [
    {"hrt_entries": 1000}, {"history_bits": 0}, {"pt_counter_bits": 0},
    {"update_mode": "late"}, {"queue_slots": 0}, {"threshold": -1},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PredictorConfig(**kwargs)


def test_fresh_predictor_inserts():
    assert AdmissionPredictor().predict(0xABC)


def test_threshold_extremes():
    always = AdmissionPredictor(threshold=0)
    never = AdmissionPredictor(threshold=32)
    for tag in range(0, 4096, 37):
        for p in (always, never):
            p.train(tag, LOST if tag % 2 else WON)
    assert all(always.predict(t) for t in range(4096))
    assert not any(never.predict(t) for t in range(4096))


def test_shift_reads_pre_shift_history():
    p = AdmissionPredictor()
    idx = hash_tag(5, 1024)
    p.hrt[idx] = 0b0101
    p.train(5, WON)
    assert p.pt[0b0101] == 17
    assert p.hrt[idx] == 0b1011
    assert p.pt[0b1011] == 16


def test_lost_shifts_in_zero_and_decrements():
    p = AdmissionPredictor()
    idx = hash_tag(7, 1024)
    p.hrt[idx] = 0b1001
    p.train(7, LOST)
    assert p.pt[0b1001] == 15
    assert p.hrt[idx] == 0b0010


def test_saturation():
    p = AdmissionPredictor()
    p.pt[0] = 31
    p.train(0, WON)  # reads history 0
    assert p.pt[0] == 31
    p.hrt[0] = 0b0011
    p.pt[0b0011] = 0
    p.train(0, LOST)
    assert p.pt[0b0011] == 0


def test_predict_does_not_mutate():
    p = AdmissionPredictor()
    before = (list(p.hrt), list(p.pt))
    for t in range(100):
        p.predict(t)
    assert (p.hrt, p.pt) == before


def test_tags_are_masked_to_tag_bits():
    a, b = AdmissionPredictor(), AdmissionPredictor()
    for k in range(50):
        a.train(k, WON if k % 3 else LOST)
        b.train(k | (0xF5 << 12), WON if k % 3 else LOST)
    assert (a.hrt, a.pt) == (b.hrt, b.pt)


def test_delayed_queue_and_drain():
    p = AdmissionPredictor(update_mode="delayed")
    p.pt[3] = 10
    p.hrt[hash_tag(9, 1024)] = 3
    p.train(9, WON)
    assert p.pt[3] == 10 and p.pending == 1
    assert p.hrt[hash_tag(9, 1024)] == 0b0111  # shift is immediate
    p.drain_one()
    assert p.pt[3] == 11 and p.pending == 0
    p.drain_one()
    assert p.pt[3] == 11


def test_delayed_queue_overflow_drops():
    p = AdmissionPredictor(update_mode="delayed")
    for _ in range(11):
        p.hrt[0] = 2
        p.train(0, LOST)
    assert len(p.queues[2]) == 10 and p.dropped_updates == 1
    for _ in range(12):
        p.drain_one()
    assert p.pt[2] == 6


def test_drain_pops_one_per_entry():
    p = AdmissionPredictor(update_mode="delayed")
    for h in (1, 1, 4):
        p.hrt[0] = h
        p.train(0, WON)
    p.drain_one()
    assert p.pt[1] == 17 and p.pt[4] == 17 and p.pending == 1


def test_drain_is_noop_in_instant_mode():
    p = AdmissionPredictor()
    p.drain_one()
    assert p.pt == [16] * 16


class NaiveTwoLevel:
    """Direct two-level table simulation with its own fold."""

    def __init__(self, hrt_entries, history_bits, counter_bits, threshold):
        self.hrt = {}
        self.pt = {h: 2 ** (counter_bits - 1) for h in range(2 ** history_bits)}
        self.hb, self.cmax, self.thr = history_bits, 2 ** counter_bits - 1, threshold
        self.bits = hrt_entries.bit_length() - 1

    def _idx(self, tag):
        tag &= 0xFFF
        out = 0
        while tag:
            out ^= tag % (1 << self.bits) if self.bits else 0
            tag = tag >> self.bits if self.bits else 0
        return out

    def predict(self, tag):
        return self.pt[self.hrt.get(self._idx(tag), 0)] >= self.thr

    def train(self, tag, won):
        i = self._idx(tag)
        h = self.hrt.get(i, 0)
        self.pt[h] = min(self.cmax, self.pt[h] + 1) if won else max(0, self.pt[h] - 1)
        self.hrt[i] = (h * 2 + int(won)) % (2 ** self.hb)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([16, 64, 1024]),
    st.integers(1, 6),
    st.integers(1, 6),
    st.lists(st.tuples(st.integers(0, 4095), st.booleans(), st.booleans()), max_size=300),
)
def test_matches_naive_reference(hrt_entries, history_bits, counter_bits, ops):
    threshold = 2 ** (counter_bits - 1)
    p = AdmissionPredictor(hrt_entries=hrt_entries, history_bits=history_bits,
                           pt_counter_bits=counter_bits)
    ref = NaiveTwoLevel(hrt_entries, history_bits, counter_bits, threshold)
    for tag, is_train, won in ops:
        if is_train:
            p.train(tag, WON if won else LOST)
            ref.train(tag, won)
        else:
            assert p.predict(tag) == ref.predict(tag)
    assert all(0 <= h < 2 ** history_bits for h in p.hrt)
    assert all(0 <= c <= 2 ** counter_bits - 1 for c in p.pt)
