"""Step-clocked token bucket."""

from __future__ import annotations


class TokenBucket:
    """``capacity`` requests, refilled at ``capacity`` per ``window`` steps.

    Token counts are kept scaled by ``window`` so refills stay integral.
    """

    def __init__(self, capacity: int = 100, window: int = 1000, now: int = 0):
        if capacity <= 0 or window <= 0:
            raise ValueError("capacity and window must be positive")
        self.capacity = capacity
        self.window = window
        self._scaled = capacity * window
        self._last = now

    def _refill(self, now: int) -> None:
        if now > self._last:
            self._scaled = min(self.capacity * self.window,
                               self._scaled + (now - self._last) * self.capacity)
            self._last = now

    def tokens(self, now: int) -> float:
        self._refill(now)
        return self._scaled / self.window

    def allow(self, now: int) -> bool:
        self._refill(now)
        if self._scaled < self.window:
            return False
        self._scaled -= self.window
        return True
