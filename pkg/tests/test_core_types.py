from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secrow.core_types import (
    DUPLICATED,
    Ack,
    AddPOwner,
    Err,
    Identifier,
    LocationFix,
    LocQueryRequest,
    Nonce,
    PairingChallenge,
    PrimaryCmd,
    PrimaryCmdBegin,
    SignTokenRequest,
    Transcript,
    decode_fields,
    decode_message,
    derive_trackerid,
    encode_fields,
    encode_message,
    trackerid_to_mac,
)
from secrow.errors import DecodeError, MalformedField, TrailingBytes, TruncatedField, UnknownTag
from strategies import fixes, macs, messages

GOLDEN = Path(__file__).parent / "golden"
N = Nonce(bytes(range(16)))
GOLDEN_MESSAGES = {
    "ack": Ack(),
    "err_not_an_owner": Err("NotAnOwner"),
    "pairing_challenge": PairingChallenge(N),
    "add_powner": AddPOwner(b"\x01" * 32),
    "primary_cmd_begin": PrimaryCmdBegin(PrimaryCmd.AddSOwner),
    "loc_query_request": LocQueryRequest(b"\x5a" * 16, Identifier.td_from_mac("00:1B:44:11:3A:B7")),
    "sign_token_request": SignTokenRequest(b"E" * 4, b"K" * 3, b"C" * 2,
                                           LocationFix.from_degrees(48.8583701, 2.2944813, 1000), N, b"S" * 5),
}


@pytest.mark.parametrize("name", sorted(GOLDEN_MESSAGES))
def test_encoding_matches_golden_file(name):
    expected = bytes.fromhex((GOLDEN / f"{name}.hex").read_text().strip())
    assert encode_message(GOLDEN_MESSAGES[name]) == expected
    assert decode_message(expected) == GOLDEN_MESSAGES[name]


def test_ack_is_a_bare_tag():
    assert encode_message(Ack()) == bytes([Ack.TAG])


def test_pairing_challenge_is_tag_length_and_nonce():
    raw = encode_message(PairingChallenge(N))
    assert len(raw) == 1 + 2 + 16
    assert raw[1:3] == b"\x00\x10" and raw[3:] == bytes(N)


@given(messages)
@settings(max_examples=400)
def test_round_trip(msg):
    raw = encode_message(msg)
    assert decode_message(raw) == msg
    assert encode_message(decode_message(raw)) == raw


@given(messages, messages)
@settings(max_examples=400)
def test_encoding_is_injective(a, b):
    if a != b:
        assert encode_message(a) != encode_message(b)


@given(messages, st.binary(min_size=1, max_size=4))
def test_trailing_bytes_rejected(msg, extra):
    with pytest.raises(DecodeError):
        decode_message(encode_message(msg) + extra)


def test_decode_errors():
    with pytest.raises(TruncatedField):
        decode_message(b"")
    with pytest.raises(TrailingBytes):
        decode_message(encode_message(Ack()) + b"\x00")
    with pytest.raises(UnknownTag):
        decode_message(b"\xff")
    with pytest.raises(TruncatedField):
        decode_message(encode_message(PairingChallenge(N))[:-1])
    with pytest.raises(MalformedField):
        decode_message(bytes([PairingChallenge.TAG]) + encode_fields([b"short"]))


@given(st.binary(max_size=64))
@settings(max_examples=500)
def test_arbitrary_bytes_decode_or_raise_decode_error(raw):
    try:
        msg = decode_message(raw)
    except DecodeError:
        return
    assert encode_message(msg) == raw


def test_fields_round_trip():
    fields = [b"", b"a", b"\x00" * 300]
    assert decode_fields(encode_fields(fields)) == fields
    with pytest.raises(ValueError):
        encode_fields([b"x" * 0x10000])


@pytest.mark.parametrize("mac, expected", [
    ("00:1B:44:11:3A:B7", "0000b73a-11441b00"),
    ("00:00:00:00:00:00", "00000000-00000000"),
    ("FF:EE:DD:CC:BB:AA", "0000aabb-ccddeeff"),
])
def test_trackerid_vectors(mac, expected):
    assert derive_trackerid(mac) == expected


def test_trackerid_against_independent_rule():
    mac = "FF:EE:DD:CC:BB:AA"
    digits = "0000" + "".join(reversed(mac.lower().split(":")))
    assert derive_trackerid(mac) == digits[:8] + "-" + digits[8:]


@given(macs)
def test_trackerid_is_a_bijection(mac):
    tid = derive_trackerid(mac)
    assert len(tid) == 17 and tid[8] == "-" and tid.startswith("0000")
    assert trackerid_to_mac(tid) == mac


@given(fixes)
def test_location_fix_round_trip(fix):
    assert LocationFix.decode(fix.encode()) == fix
    assert len(fix.encode()) == LocationFix.SIZE


def test_location_fix_bounds():
    with pytest.raises(ValueError):
        LocationFix.from_degrees(90.0000001, 0)
    with pytest.raises(ValueError):
        LocationFix.from_degrees(0, -180.0000001)
    assert LocationFix.from_degrees(-90, 180).encode()


def test_nonce_width_enforced():
    with pytest.raises(ValueError):
        Nonce(b"x" * 15)
    with pytest.raises(ValueError):
        PairingChallenge(b"x" * 15)


def test_identifier_width():
    with pytest.raises(ValueError):
        Identifier.td_from_mac(b"\x00" * 5)


def test_transcript_indices_and_encoding_are_deterministic():
    def build():
        t = Transcript()
        t.append(1, "ble:a/b", "a", "b", encode_message(Ack()), ())
        t.append(2, "ble:a/b", "b", "a", b"\xff\x00", (DUPLICATED,))
        return t
    a, b = build(), build()
    assert [e.index for e in a.entries] == [0, 1]
    assert a.encode() == b.encode()
    assert "Ack" in a.render()
