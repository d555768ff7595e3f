"""Hardware storage budget of an ACIC configuration, computed from its parameters."""

from dataclasses import dataclass

ADDRESS_BITS = 64


def _log2_ceil(n):
    return max(n - 1, 0).bit_length()


@dataclass(frozen=True)
class StorageItem:
    component: str
    entries: int
    bits_per_entry: int
    formula: str

    @property
    def bits(self):
        return self.entries * self.bits_per_entry

    @property
    def bytes(self):
        return self.bits / 8

    @property
    def kilobytes(self):
        return self.bits / 8 / 1024

    def row(self):
        return {
            "component": self.component,
            "entries": self.entries,
            "bits_per_entry": self.bits_per_entry,
            "bits": self.bits,
            "bytes": self.bytes,
            "kilobytes": round(self.kilobytes, 6),
            "formula": self.formula,
        }


def storage_overhead(ifilter_capacity=16, block_bits=6, hrt_entries=1024, history_bits=4,
                     pt_counter_bits=5, queue_slots=10, cshr_entries=256, cshr_sets=8,
                     tag_bits=12, address_bits=ADDRESS_BITS):
    """Line items for the i-Filter, HRT, PT, PT update queues and CSHR.

    The i-Filter keeps a full tag, a valid bit and an LRU rank per entry next
    to the block data. Each queued PT update holds a PT index and one
    direction bit. CSHR entries hold two partial tags, a valid bit and an
    LRU rank within their set.
    """
    pt_entries = 1 << history_bits
    block_data = 8 << block_bits
    ifilter_meta = (address_bits - block_bits) + 1 + _log2_ceil(ifilter_capacity)
    cshr_ways = cshr_entries // cshr_sets
    cshr_entry = 2 * tag_bits + 1 + _log2_ceil(cshr_ways)
    return [
        StorageItem("ifilter", ifilter_capacity, ifilter_meta + block_data,
                    f"{ifilter_capacity} x ({ifilter_meta} bit metadata + {block_data} bit block)"),
        StorageItem("hrt", hrt_entries, history_bits, f"{hrt_entries} x {history_bits} bit history"),
        StorageItem("pt", pt_entries, pt_counter_bits, f"{pt_entries} x {pt_counter_bits} bit counters"),
        StorageItem("pt_update_queues", pt_entries * queue_slots, history_bits + 1,
                    f"{pt_entries} queues x {queue_slots} slots x ({history_bits} bit index + 1 bit update)"),
        StorageItem("cshr", cshr_entries, cshr_entry,
                    f"{cshr_entries} x ({2 * tag_bits} bit tags + 1 bit valid + {_log2_ceil(cshr_ways)} bit LRU)"),
    ]


def storage_summary(**params):
    """Per-component rows plus a ``total`` row (KB rounded to two places as ``total_kb``)."""
    items = storage_overhead(**params)
    rows = [item.row() for item in items]
    bits = sum(item.bits for item in items)
    rows.append({
        "component": "total",
        "entries": None,
        "bits_per_entry": None,
        "bits": bits,
        "bytes": bits / 8,
        "kilobytes": round(bits / 8 / 1024, 6),
        "formula": "sum of the above",
    })
    return {"items": rows, "total_bytes": bits / 8, "total_kb": round(bits / 8 / 1024, 2)}


def acic_storage_params(engine_params):
    """Pick the storage-relevant parameters out of an ACIC engine parameter dict."""
    keys = ("ifilter_capacity", "block_bits", "hrt_entries", "history_bits", "pt_counter_bits",
            "queue_slots", "cshr_entries", "cshr_sets", "tag_bits")
    return {k: engine_params[k] for k in keys if k in engine_params}
