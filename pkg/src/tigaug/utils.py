"""Small deterministic helpers shared across modules."""

from __future__ import annotations

import hashlib


def stable_hash64(*parts: int | str | bytes) -> int:
    """64-bit hash of the parts, stable across runs, platforms and versions.

    Each part is length-prefixed and type-tagged before hashing so that
    distinct part sequences can never collide by concatenation.
    """
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, bytes):
            tag, payload = b"b", p
        elif isinstance(p, bool):  # bool is an int subclass; reject to avoid surprises
            raise TypeError("bool parts are ambiguous, pass an int or str")
        elif isinstance(p, int):
            tag, payload = b"i", str(p).encode("ascii")
        elif isinstance(p, str):
            tag, payload = b"s", p.encode("utf-8")
        else:
            raise TypeError(f"unhashable part type {type(p).__name__}")
        h.update(tag)
        h.update(str(len(payload)).encode("ascii"))
        h.update(b":")
        h.update(payload)
    return int.from_bytes(h.digest(), "big")


def image_seed(global_seed: int, image_id: str) -> int:
    """Per-image seed: makes parallel runs independent of scheduling order."""
    return stable_hash64(global_seed, image_id)
