"""Base class for message-handling endpoints (TDs and the TS)."""

from __future__ import annotations

from .core_types import Err, Message, decode_message, encode_message
from .errors import DecodeError, MalformedMessage, ProtocolError, UnexpectedMessage


class Endpoint:
    name: str

    def handle(self, sender: str, data: bytes) -> bytes | None:
        try:
            msg = decode_message(data)
        except DecodeError:
            return encode_message(Err(MalformedMessage.code))
        try:
            reply = self.dispatch(msg, sender)
        except ProtocolError as exc:
            reply = Err(exc.code)
        return None if reply is None else encode_message(reply)

    def dispatch(self, msg: Message, sender: str) -> Message | None:
        raise UnexpectedMessage(type(msg).__name__)

    def on_step(self, step: int) -> None:
        pass
