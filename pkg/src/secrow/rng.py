"""Seeded randomness for reproducible runs.

:class:`Drbg` is a SHA-256 counter-mode generator. It is not meant to be a
vetted DRBG; it only has to be uniform-looking and byte-reproducible from a
seed so that two runs with the same seed emit identical transcripts.
"""

from __future__ import annotations

import hashlib

NONCE_SIZE = 16


class Drbg:
    def __init__(self, seed: int | bytes | str = 0):
        if isinstance(seed, int):
            seed = seed.to_bytes(16, "big", signed=seed < 0)
        elif isinstance(seed, str):
            seed = seed.encode()
        self._key = hashlib.sha256(b"secrow-drbg" + seed).digest()
        self._counter = 0
        self._buffer = b""

    def bytes(self, n: int) -> bytes:
        while len(self._buffer) < n:
            block = hashlib.sha256(self._key + self._counter.to_bytes(8, "big")).digest()
            self._counter += 1
            self._buffer += block
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def nonce(self) -> bytes:
        # the all-zero nonce is reserved as a sentinel
        while True:
            value = self.bytes(NONCE_SIZE)
            if any(value):
                return value

    def randbits(self, k: int) -> int:
        return int.from_bytes(self.bytes((k + 7) // 8), "big") >> (-k % 8)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        k = n.bit_length()
        while True:
            r = self.randbits(k)
            if r < n:
                return r

    def fork(self, label: str) -> "Drbg":
        """Independent child stream; the parent stream is not advanced."""
        return Drbg(hashlib.sha256(self._key + b"/" + label.encode()).digest())
