"""Instruction-fetch traces: file I/O, block derivation, synthetic workloads.

A trace is a 1-D ``uint64`` array of byte addresses, one element per
retired-instruction fetch. Everything downstream works on block frames,
``address >> block_bits``.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .validation import check_addresses, check_block_bits, check_positive_int


class TraceFormat(str, Enum):
    TEXT_HEX = "text_hex"
    BINARY_U64LE = "binary_u64le"


class TraceFormatError(ValueError):
    """Raised for malformed trace files."""


def read_trace(path, format="text_hex"):
    """Load a trace file into a ``uint64`` address array.

    ``text_hex`` holds one hexadecimal address per line (``0x`` optional);
    blank lines and ``#`` comments are skipped. ``binary_u64le`` is a flat
    run of little-endian 64-bit unsigned integers.
    """
    fmt = TraceFormat(format)
    path = Path(path)
    if fmt is TraceFormat.BINARY_U64LE:
        raw = path.read_bytes()
        if len(raw) % 8:
            raise TraceFormatError(
                f"{path}: binary trace length {len(raw)} is not a multiple of 8"
            )
        return np.frombuffer(raw, dtype="<u8").astype(np.uint64)

    addresses = []
    with path.open("r") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                value = int(text, 16)
            except ValueError:
                raise TraceFormatError(
                    f"{path}:{lineno}: malformed hex address {text!r}"
                ) from None
            if value < 0 or value >= 1 << 64:
                raise TraceFormatError(f"{path}:{lineno}: address out of 64-bit range")
            addresses.append(value)
    return np.array(addresses, dtype=np.uint64)


def write_trace(path, addresses, format="text_hex"):
    fmt = TraceFormat(format)
    arr = check_addresses(addresses)
    path = Path(path)
    if fmt is TraceFormat.BINARY_U64LE:
        path.write_bytes(arr.astype("<u8").tobytes())
    else:
        with path.open("w") as fh:
            fh.writelines(f"0x{a:x}\n" for a in arr.tolist())


def block_of(address, block_bits):
    """Block-frame number of one fetch address."""
    return int(address) >> check_block_bits(block_bits)


def blocks_of(addresses, block_bits):
    arr = check_addresses(addresses)
    return arr >> np.uint64(check_block_bits(block_bits))


class SyntheticKind(str, Enum):
    BURSTY_LOOP = "bursty_loop"
    SCAN = "scan"
    HOT_PLUS_ONESHOT = "hot_plus_oneshot"
    UNIFORM_RANDOM = "uniform_random"


# Frame where one-shot blocks start; far above any hot working set.
ONESHOT_BASE = 1 << 24


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic fetch stream.

    ``oneshot_ratio`` only matters for ``hot_plus_oneshot``: the number of
    one-shot bursts emitted per hot burst (1.0 interleaves them 1:1).
    """

    kind: str
    block_count: int
    burst_length: int = 1
    repetitions: int = 1
    seed: int = 0
    oneshot_ratio: float = 1.0
    block_bits: int = 6

    def __post_init__(self):
        object.__setattr__(self, "kind", SyntheticKind(self.kind).value)
        check_positive_int("block_count", self.block_count)
        check_positive_int("burst_length", self.burst_length)
        check_positive_int("repetitions", self.repetitions)
        check_positive_int("seed", self.seed, minimum=0)
        check_block_bits(self.block_bits)
        if not self.oneshot_ratio >= 0:
            raise ValueError(f"oneshot_ratio must be >= 0, got {self.oneshot_ratio!r}")

    def to_dict(self):
        return asdict(self)


def _burst_addresses(frames, burst_length, block_bits):
    # Consecutive fetches inside a burst walk 4-byte instruction slots of the block.
    frames = np.asarray(frames, dtype=np.uint64)
    block_size = 1 << block_bits
    offsets = (np.arange(burst_length, dtype=np.uint64) * np.uint64(4)) % np.uint64(block_size)
    return ((frames[:, None] << np.uint64(block_bits)) + offsets[None, :]).ravel()


def generate_frames(spec):
    """Sequence of burst frames (one entry per burst) for ``spec``."""
    kind = SyntheticKind(spec.kind)
    n = spec.block_count
    if kind in (SyntheticKind.SCAN, SyntheticKind.BURSTY_LOOP):
        return np.tile(np.arange(n, dtype=np.uint64), spec.repetitions)
    rng = np.random.default_rng(spec.seed)
    if kind is SyntheticKind.UNIFORM_RANDOM:
        return rng.integers(0, n, size=n * spec.repetitions, dtype=np.uint64)

    order = rng.permutation(n).astype(np.uint64)
    hot = np.tile(order, spec.repetitions)
    # Bresenham-style spreading of one-shot bursts after each hot burst.
    k = np.arange(1, hot.size + 1, dtype=np.float64)
    per_slot = np.diff(np.floor(k * spec.oneshot_ratio + 1e-9), prepend=0.0).astype(np.int64)
    total_oneshots = int(per_slot.sum())
    out = np.empty(hot.size + total_oneshots, dtype=np.uint64)
    hot_positions = np.arange(hot.size) + np.concatenate(([0], np.cumsum(per_slot)[:-1]))
    mask = np.zeros(out.size, dtype=bool)
    mask[hot_positions] = True
    out[mask] = hot
    out[~mask] = np.uint64(ONESHOT_BASE) + np.arange(total_oneshots, dtype=np.uint64)
    return out


def generate(spec):
    """Deterministic synthetic trace (``uint64`` addresses) for ``spec``.

    Every block is visited in bursts of ``burst_length`` consecutive fetches.
    ``hot_plus_oneshot`` cycles through ``block_count`` hot blocks in a fixed
    seeded order, interleaving never-repeating one-shot blocks after them.
    """
    frames = generate_frames(spec)
    return _burst_addresses(frames, spec.burst_length, spec.block_bits)
