"""Counter-based randomness with stable, platform-independent derivation.

Every stream is keyed by hashing its purpose string(s) together with the run
seed, so a stream's output depends only on its key and never on how many
other streams were consumed before it.  That property is what lets a child
trained inside a 64-group supernet match an independently trained copy bit
for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def mix_seed(*parts) -> int:
    """Collapse (seed, labels, indices, ...) into a stable 64-bit key."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def seeded_generator(*parts) -> np.random.Generator:
    """A Philox generator keyed by mix_seed(*parts)."""
    return np.random.Generator(np.random.Philox(key=mix_seed(*parts)))


def init_tensor(spec_init: str, shape: tuple[int, ...], fan_in: int,
                key_parts: tuple, dtype) -> np.ndarray:
    """Materialize an initial tensor for one storage slot."""
    if spec_init == "zeros":
        return np.zeros(shape, dtype=dtype)
    if spec_init == "ones":
        return np.ones(shape, dtype=dtype)
    if spec_init == "kaiming":
        if fan_in <= 0:
            raise ValueError(f"kaiming init needs fan_in > 0, got {fan_in}")
        bound = float(np.sqrt(6.0 / fan_in))
        rng = seeded_generator(*key_parts)
        return rng.uniform(-bound, bound, size=shape).astype(dtype)
    raise ValueError(f"unknown initializer {spec_init!r}")


def permutation(n: int, *key_parts) -> np.ndarray:
    """Stable permutation of range(n) keyed by the given parts."""
    return seeded_generator(*key_parts).permutation(n)
