"""Deterministic, replayable random streams.

Every sampling operation in the lab takes an explicit :class:`RngStream`.
A stream is an immutable (seed, stream_id) pair; the underlying generator
is counter-based (Philox), keyed by a hash of the pair, and is rebuilt from
scratch on every :meth:`RngStream.generator` call.  Consequently the same
stream always replays the same sequence, bit for bit, on any platform and
under any worker schedule, and derived child streams are independent of how
work is split across workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_PERSON = b"convexlab.rng.v1"


def _digest(parts: tuple[int, ...]) -> bytes:
    h = hashlib.blake2b(digest_size=16, person=_PERSON)
    for p in parts:
        h.update(int(p).to_bytes(16, "little", signed=True))
    return h.digest()


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {type(value).__name__}")
            if not -(2**63) <= int(value) < 2**64:
                raise DomainError(f"{name} must fit in 64 bits, got {value}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream_id", int(self.stream_id))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream's sequence."""
        key = int.from_bytes(_digest((self.seed, self.stream_id)), "little")
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Derived substream; children with distinct indices are independent."""
        sub = int.from_bytes(_digest((self.stream_id, index))[:8], "little")
        return RngStream(self.seed, sub)
