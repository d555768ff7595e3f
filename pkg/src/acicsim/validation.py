"""Input validation helpers shared by the estimators and loaders."""

import numbers

import numpy as np

U64_MAX = (1 << 64) - 1


def check_addresses(X):
    """Coerce ``X`` to a 1-D ``uint64`` array of byte addresses.

    Accepts any integer sequence or array. Negative values and values that do
    not fit in 64 bits are rejected rather than silently wrapped.
    """
    if isinstance(X, np.ndarray):
        arr = X
    else:
        arr = np.asarray(list(X) if not hasattr(X, "__len__") else X)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D address sequence, got shape {arr.shape}")
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint64)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind == "b" or arr.dtype.kind not in "iuO":
        raise TypeError(f"addresses must be integers, got dtype {arr.dtype}")
    if arr.dtype.kind == "O":
        for v in arr:
            if not isinstance(v, numbers.Integral):
                raise TypeError(f"addresses must be integers, got {type(v).__name__}")
        if min(arr) < 0 or max(arr) > U64_MAX:
            raise ValueError("addresses must lie in [0, 2**64)")
        return np.array([int(v) for v in arr], dtype=np.uint64)
    if arr.dtype.kind == "i" and arr.min() < 0:
        raise ValueError("addresses must be non-negative")
    return arr.astype(np.uint64)


def check_blocks(blocks):
    """Coerce a block-frame sequence to a list of Python ints (fast to iterate)."""
    if isinstance(blocks, list):
        return blocks
    if isinstance(blocks, np.ndarray):
        return blocks.tolist()
    return [int(b) for b in blocks]


def check_block_bits(block_bits):
    if not isinstance(block_bits, numbers.Integral) or not 0 <= block_bits <= 32:
        raise ValueError(f"block_bits must be an integer in [0, 32], got {block_bits!r}")
    return int(block_bits)


def is_power_of_two(n):
    return isinstance(n, numbers.Integral) and n > 0 and (n & (n - 1)) == 0


def check_power_of_two(name, n):
    if not is_power_of_two(n):
        raise ValueError(f"{name} must be a positive power of two, got {n!r}")
    return int(n)


def check_positive_int(name, n, minimum=1):
    if not isinstance(n, numbers.Integral) or isinstance(n, bool) or n < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)
