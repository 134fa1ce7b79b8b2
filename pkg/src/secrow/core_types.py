"""Identifiers, location fixes, protocol messages and their wire encoding.

Every message is a frozen dataclass registered under a one-byte tag. The
encoding is the tag followed by each field, in declaration order, as a
2-byte big-endian length and the field bytes. Fixed-width fields are still
length-prefixed so a decoder never has to know the schema to skip a field,
but the decoder rejects any width other than the canonical one; that keeps
``encode(decode(b)) == b`` on every accepted input.
"""

from __future__ import annotations

import dataclasses
import enum
import struct
import typing
from dataclasses import dataclass
from typing import ClassVar, Iterable, Sequence

from .errors import MalformedField, TrailingBytes, TruncatedField, UnknownTag

MAX_FIELD = 0xFFFF
ID_SIZE = 6
NONCE_SIZE = 16
E7 = 10_000_000


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

class Kind(enum.IntEnum):
    TD = 0
    CD = 1


@dataclass(frozen=True, order=True)
class Identifier:
    kind: Kind
    value: bytes

    def __post_init__(self):
        if len(self.value) != ID_SIZE:
            raise ValueError(f"identifier must be {ID_SIZE} bytes, got {len(self.value)}")
        object.__setattr__(self, "kind", Kind(self.kind))

    @classmethod
    def td_from_mac(cls, mac: str | bytes) -> "Identifier":
        return cls(Kind.TD, parse_mac(mac) if isinstance(mac, str) else bytes(mac))

    def encode(self) -> bytes:
        return bytes([self.kind]) + self.value

    @classmethod
    def decode(cls, raw: bytes) -> "Identifier":
        if len(raw) != ID_SIZE + 1 or raw[0] not in (0, 1):
            raise MalformedField("bad identifier")
        return cls(Kind(raw[0]), raw[1:])

    @property
    def mac(self) -> str:
        return ":".join(f"{b:02X}" for b in self.value)

    def __str__(self) -> str:
        return f"{self.kind.name}:{self.value.hex()}"


class Nonce(bytes):
    """16 random bytes. Plain ``bytes`` compare equal to a Nonce."""

    def __new__(cls, value: bytes):
        if len(value) != NONCE_SIZE:
            raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
        return super().__new__(cls, value)


@dataclass(frozen=True)
class LocationFix:
    """A GPS fix in 1e-7 degree fixed point."""

    lat_e7: int
    lon_e7: int
    timestamp: int = 0

    SIZE: ClassVar[int] = 16

    def __post_init__(self):
        if not -90 * E7 <= self.lat_e7 <= 90 * E7:
            raise ValueError("latitude out of range")
        if not -180 * E7 <= self.lon_e7 <= 180 * E7:
            raise ValueError("longitude out of range")
        if not 0 <= self.timestamp < 2**64:
            raise ValueError("timestamp out of range")

    @classmethod
    def from_degrees(cls, lat: float, lon: float, timestamp: int = 0) -> "LocationFix":
        return cls(round(lat * E7), round(lon * E7), timestamp)

    @property
    def latitude(self) -> float:
        return self.lat_e7 / E7

    @property
    def longitude(self) -> float:
        return self.lon_e7 / E7

    def encode(self) -> bytes:
        return struct.pack(">iiQ", self.lat_e7, self.lon_e7, self.timestamp)

    @classmethod
    def decode(cls, raw: bytes) -> "LocationFix":
        if len(raw) != cls.SIZE:
            raise MalformedField("bad location width")
        try:
            return cls(*struct.unpack(">iiQ", raw))
        except ValueError as exc:
            raise MalformedField(str(exc)) from None

    def __str__(self) -> str:
        return f"({self.latitude:.7f}, {self.longitude:.7f}) @{self.timestamp}"


class PrimaryCmd(enum.IntEnum):
    UpdateLocKey = 1
    AddSOwner = 2
    RemSOwner = 3


def parse_mac(text: str) -> bytes:
    parts = text.replace("-", ":").split(":")
    if len(parts) != ID_SIZE:
        raise ValueError(f"not a MAC address: {text!r}")
    return bytes(int(p, 16) for p in parts)


def derive_trackerid(mac: bytes | str) -> str:
    """TrackR-style tracker id: ``0000`` + byte-reversed MAC, as 8-8 hex."""
    raw = parse_mac(mac) if isinstance(mac, str) else bytes(mac)
    if len(raw) != ID_SIZE:
        raise ValueError("MAC must be 6 bytes")
    digits = "0000" + raw[::-1].hex()
    return f"{digits[:8]}-{digits[8:]}"


def trackerid_to_mac(trackerid: str) -> bytes:
    head, sep, tail = trackerid.partition("-")
    if not sep or len(head) != 8 or len(tail) != 8 or not head.startswith("0000"):
        raise ValueError(f"not a trackerid: {trackerid!r}")
    return bytes.fromhex(head[4:] + tail)[::-1]


# ---------------------------------------------------------------------------
# Length-prefixed records
# ---------------------------------------------------------------------------

def encode_fields(fields: Iterable[bytes]) -> bytes:
    out = bytearray()
    for f in fields:
        if len(f) > MAX_FIELD:
            raise ValueError(f"field of {len(f)} bytes exceeds the 2-byte length prefix")
        out += len(f).to_bytes(2, "big")
        out += f
    return bytes(out)


def decode_fields(raw: bytes, count: int | None = None) -> list[bytes]:
    """Split a record into fields. With ``count``, exactly that many must be present."""
    fields, pos = [], 0
    while pos < len(raw) and (count is None or len(fields) < count):
        if pos + 2 > len(raw):
            raise TruncatedField("length prefix cut short")
        n = int.from_bytes(raw[pos:pos + 2], "big")
        pos += 2
        if pos + n > len(raw):
            raise TruncatedField(f"field wants {n} bytes, {len(raw) - pos} left")
        fields.append(raw[pos:pos + n])
        pos += n
    if count is not None and len(fields) < count:
        raise TruncatedField(f"expected {count} fields, got {len(fields)}")
    if pos != len(raw):
        raise TrailingBytes(f"{len(raw) - pos} bytes after last field")
    return fields


# ---------------------------------------------------------------------------
# Field codecs
# ---------------------------------------------------------------------------

def _enc_u64(v: int) -> bytes:
    return v.to_bytes(8, "big")


def _dec_u64(raw: bytes) -> int:
    if len(raw) != 8:
        raise MalformedField("u64 must be 8 bytes")
    return int.from_bytes(raw, "big")


def _dec_str(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedField("invalid utf-8") from None


def _dec_nonce(raw: bytes) -> Nonce:
    if len(raw) != NONCE_SIZE:
        raise MalformedField("nonce must be 16 bytes")
    return Nonce(raw)


def _dec_cmd(raw: bytes) -> PrimaryCmd:
    if len(raw) != 1 or raw[0] not in PrimaryCmd._value2member_map_:
        raise MalformedField("bad primary command")
    return PrimaryCmd(raw[0])


def _codec_for(tp) -> tuple:
    if tp is bytes:
        return bytes, bytes
    if tp is Nonce:
        return bytes, _dec_nonce
    if tp is str:
        return (lambda s: s.encode("utf-8")), _dec_str
    if tp is int:
        return _enc_u64, _dec_u64
    if tp is Identifier:
        return Identifier.encode, Identifier.decode
    if tp is LocationFix:
        return LocationFix.encode, LocationFix.decode
    if tp is PrimaryCmd:
        return (lambda c: bytes([int(c)])), _dec_cmd
    origin = typing.get_origin(tp)
    if origin is tuple:
        item_tp = typing.get_args(tp)[0]
        return (lambda items: encode_fields(encode_record(i) for i in items),
                lambda raw: tuple(decode_record(item_tp, f) for f in decode_fields(raw)))
    if dataclasses.is_dataclass(tp):
        return encode_record, (lambda raw: decode_record(tp, raw))
    raise TypeError(f"no wire codec for {tp!r}")


_SCHEMAS: dict[type, list[tuple[str, tuple]]] = {}


def _schema(cls: type) -> list[tuple[str, tuple]]:
    if cls not in _SCHEMAS:
        hints = typing.get_type_hints(cls)
        _SCHEMAS[cls] = [(f.name, _codec_for(hints[f.name])) for f in dataclasses.fields(cls)]
    return _SCHEMAS[cls]


def encode_record(obj) -> bytes:
    return encode_fields(enc(getattr(obj, name)) for name, (enc, _) in _schema(type(obj)))


def decode_record(cls: type, raw: bytes):
    schema = _schema(cls)
    parts = decode_fields(raw, len(schema))
    kwargs = {}
    for (name, (_, dec)), part in zip(schema, parts):
        kwargs[name] = dec(part)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise MalformedField(str(exc)) from None


def _check_field(tp, value) -> None:
    if tp is Nonce and len(value) != NONCE_SIZE:
        raise ValueError("nonce must be 16 bytes")


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------

MESSAGE_TYPES: dict[int, type] = {}


def message(tag: int):
    def wrap(cls):
        cls = dataclass(frozen=True)(cls)
        cls.TAG = tag
        if tag in MESSAGE_TYPES:
            raise ValueError(f"duplicate tag {tag:#x}")
        MESSAGE_TYPES[tag] = cls
        return cls
    return wrap


class Message:
    """Marker base; concrete messages are registered with :func:`message`."""

    TAG: ClassVar[int]

    def __post_init__(self):
        hints = typing.get_type_hints(type(self))
        for f in dataclasses.fields(self):
            _check_field(hints[f.name], getattr(self, f.name))


# pairing and ownership

@message(0x01)
class AddPOwner(Message):
    pk: bytes


@message(0x02)
class PairingChallenge(Message):
    n1: Nonce


@message(0x03)
class PairingProof(Message):
    signature: bytes


@message(0x04)
class AddOwnerRequest(Message):
    session: bytes
    cd_id: Identifier
    td_id: Identifier


@message(0x05)
class OwnershipTicket(Message):
    o_t: bytes


@message(0x06)
class CheckOwner(Message):
    pk: bytes
    o_t: bytes


@message(0x07)
class OwnershipProof(Message):
    o_cd: bytes


@message(0x08)
class CommitOwner(Message):
    session: bytes
    cd_id: Identifier
    td_id: Identifier
    o_cd: bytes


# primary owner commands

@message(0x09)
class PrimaryCmdBegin(Message):
    cmd: PrimaryCmd


@message(0x0A)
class PrimaryCmdChallenge(Message):
    cmd: PrimaryCmd
    e_n: bytes


@message(0x0B)
class PrimaryCmdRequest(Message):
    cmd: PrimaryCmd
    r: bytes


# location update

@message(0x0C)
class LocUpdateRequest(Message):
    td_id: Identifier
    tpk: bytes
    chain: bytes


@message(0x0D)
class LocUpdateGrant(Message):
    e_c: bytes
    e_t: bytes


@message(0x0E)
class SignTokenRequest(Message):
    e_t: bytes
    tpk: bytes
    chain: bytes
    location: LocationFix
    n_c: Nonce
    signature: bytes


@message(0x0F)
class SignTokenResponse(Message):
    s_t: bytes
    e_l: bytes


@message(0x10)
class AttestedLocationUpdate(Message):
    td_id: Identifier
    tpk: bytes
    s_t: bytes
    e_l: bytes


# location query

@message(0x11)
class LocQueryRequest(Message):
    session: bytes
    td_id: Identifier


@message(0x12)
class LocQueryResponse(Message):
    token: bytes


@message(0x13)
class Ack(Message):
    pass


@message(0x14)
class Err(Message):
    code: str


# accounts and login (challenge-response over the account key)

@message(0x20)
class RegisterRequest(Message):
    username: str
    password: str
    cd_id: Identifier
    pk: bytes


@message(0x21)
class LoginRequest(Message):
    username: str
    password: str


@message(0x22)
class LoginChallenge(Message):
    nonce: Nonce


@message(0x23)
class LoginProof(Message):
    username: str
    signature: bytes


@message(0x24)
class SessionGrant(Message):
    session: bytes


# ring/blink, challenge-response against the owner table

@message(0x28)
class RingBegin(Message):
    pk: bytes


@message(0x29)
class RingChallenge(Message):
    nonce: Nonce


@message(0x2A)
class RingRequest(Message):
    signature: bytes


# TrackR-style baseline

@dataclass(frozen=True)
class BaselineItem:
    trackerid: str
    location: LocationFix


@message(0x40)
class BaselinePair(Message):
    pass


@message(0x41)
class BaselineRing(Message):
    pass


@message(0x42)
class BaselineLogin(Message):
    username: str
    password: str


@message(0x43)
class BaselineClaim(Message):
    session: bytes
    trackerid: str


@message(0x44)
class BaselineUpdate(Message):
    trackerid: str
    location: LocationFix


@message(0x45)
class BaselineQuery(Message):
    session: bytes


@message(0x46)
class BaselineItems(Message):
    items: tuple[BaselineItem, ...]


@message(0x47)
class BaselineUpdateBegin(Message):
    trackerid: str


@message(0x48)
class BaselinePresenceChallenge(Message):
    nonce: Nonce


@message(0x49)
class BaselinePresenceProof(Message):
    tag: bytes


@message(0x4A)
class BaselineProvenUpdate(Message):
    trackerid: str
    location: LocationFix
    nonce: Nonce
    tag: bytes


def encode_message(msg: Message) -> bytes:
    return bytes([msg.TAG]) + encode_record(msg)


def decode_message(raw: bytes) -> Message:
    if not raw:
        raise TruncatedField("empty input")
    cls = MESSAGE_TYPES.get(raw[0])
    if cls is None:
        raise UnknownTag(f"tag {raw[0]:#04x}")
    return decode_record(cls, raw[1:])


def message_types() -> dict[str, type]:
    """Message classes by name."""
    return {cls.__name__: cls for cls in MESSAGE_TYPES.values()}


def message_name(raw: bytes) -> str:
    cls = MESSAGE_TYPES.get(raw[0]) if raw else None
    return cls.__name__ if cls else "?"


# ---------------------------------------------------------------------------
# Transcript
# ---------------------------------------------------------------------------

DELIVERED = "delivered"
DROPPED = "dropped"
INJECTED = "injected"
MODIFIED = "modified"
DUPLICATED = "duplicated"
MANGLED = "mangled"


@dataclass(frozen=True)
class TranscriptEntry:
    index: int
    step: int
    channel: str
    sender: str
    receiver: str
    data: bytes
    flags: tuple[str, ...] = ()

    def decoded(self) -> Message | None:
        try:
            return decode_message(self.data)
        except Exception:
            return None

    def encode(self) -> bytes:
        return encode_fields([
            _enc_u64(self.index), _enc_u64(self.step), self.channel.encode(),
            self.sender.encode(), self.receiver.encode(), self.data,
            ",".join(self.flags).encode(),
        ])

    def describe(self) -> str:
        flags = f" [{','.join(self.flags)}]" if self.flags else ""
        return (f"{self.index:5d} step={self.step:<6d} {self.channel:<22s} "
                f"{self.sender} -> {self.receiver}: {message_name(self.data)} "
                f"({len(self.data)}B){flags}")


class Transcript:
    """Append-only log of every message on every channel."""

    def __init__(self):
        self.entries: list[TranscriptEntry] = []

    def append(self, step: int, channel: str, sender: str, receiver: str,
               data: bytes, flags: Sequence[str] = ()) -> TranscriptEntry:
        if self.entries and step < self.entries[-1].step:
            raise ValueError("transcript steps must not go backwards")
        flags = tuple(flags)
        if MANGLED not in flags:
            try:
                decode_message(data)
            except Exception:
                flags += (MANGLED,)
        entry = TranscriptEntry(len(self.entries), step, channel, sender, receiver, data, flags)
        self.entries.append(entry)
        return entry

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def since(self, index: int) -> list[TranscriptEntry]:
        return self.entries[index:]

    def encode(self) -> bytes:
        return b"".join(encode_fields([e.encode()]) for e in self.entries)

    def render(self) -> str:
        return "\n".join(e.describe() for e in self.entries) + ("\n" if self.entries else "")
