"""The vocabulary CD flows use to talk to the world.

A flow is a generator that yields :class:`Send` and is resumed with the
peer's reply. ``Err`` replies are thrown back into the generator as the
matching exception unless ``raw_reply`` is set.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Any, Generator

from .core_types import Message

TS = "ts"


@dataclass(frozen=True)
class Send:
    peer: str
    message: Message | bytes
    raw_reply: bool = False
    # send over the channel of another endpoint (relaying, injection)
    via: str | None = None
    flags: tuple[str, ...] = ()


@dataclass
class FlowSpec:
    owner: str
    gen: Generator[Send, Any, Any]
    label: str


def flow(method):
    """Mark a CD method as a flow; calling it yields a :class:`FlowSpec`."""

    @functools.wraps(method)
    def wrapper(self, *args, **kwargs):
        return FlowSpec(self.name, method(self, *args, **kwargs), method.__name__)

    return wrapper


def exchange(peer: str, data: Message | bytes, **kw):
    """Single request, reply returned as-is (``Err`` included)."""
    return (yield Send(peer, data, raw_reply=True, **kw))
