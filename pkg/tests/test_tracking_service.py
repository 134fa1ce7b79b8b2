import pytest

from conftest import TRUE_FIX, owned_world
from secrow.core_types import (
    AddOwnerRequest,
    AttestedLocationUpdate,
    CommitOwner,
    Err,
    LocQueryRequest,
    LocUpdateGrant,
    LocUpdateRequest,
    LoginRequest,
    RegisterRequest,
    decode_message,
    encode_message,
)
from secrow.errors import AccountExists, BadCredentials, NoLocationOnRecord, NotAnOwner, Unauthenticated


def ask(ts, sender, msg):
    return decode_message(ts.handle(sender, encode_message(msg)))


def test_register_and_login():
    world = owned_world()
    ts, alice = world.ts, world.cds["alice"]
    assert alice.session in ts.sessions
    with pytest.raises(AccountExists):
        world.run(alice.register())
    with pytest.raises(BadCredentials):
        world.run(alice.login("wrong"))


def test_account_per_device():
    world = owned_world()
    alice = world.cds["alice"]
    reply = ask(world.ts, "x", RegisterRequest("other", "pw", alice.id, alice.public_key))
    assert reply == Err("AccountExists")


def test_login_challenge_must_be_signed_by_account_key():
    world = owned_world()
    ts = world.ts
    ask(ts, "mallory", LoginRequest("alice", "alice-password"))
    from secrow.core_types import LoginProof
    assert ask(ts, "mallory", LoginProof("alice", b"\x00" * 64)) == Err("BadCredentials")


def test_sessions_expire():
    world = owned_world()
    alice = world.cds["alice"]
    world.tick(world.ts.session_ttl)
    with pytest.raises(Unauthenticated):
        world.run(alice.query_location("tag"))


def test_revoke_drops_sessions():
    world = owned_world(update=True)
    world.ts.revoke("alice")
    with pytest.raises(Unauthenticated):
        world.run(world.cds["alice"].query_location("tag"))


def test_session_bound_to_device():
    world = owned_world()
    alice, td = world.cds["alice"], world.tds["tag"]
    bob = world.add_cd("bob")
    world.run(bob.onboard())
    assert ask(world.ts, "bob", AddOwnerRequest(alice.session, bob.id, td.id)) == Err("Unauthenticated")


def test_commit_without_request():
    world = owned_world()
    alice, td = world.cds["alice"], world.tds["tag"]
    assert ask(world.ts, "alice", CommitOwner(alice.session, alice.id, td.id, b"x")) == Err("NoPendingRequest")


def test_commit_after_ticket_expired():
    world = owned_world()
    alice, td = world.cds["alice"], world.tds["tag"]
    ask(world.ts, "alice", AddOwnerRequest(alice.session, alice.id, td.id))
    world.tick(world.ts.pending_ttl)
    assert ask(world.ts, "alice", CommitOwner(alice.session, alice.id, td.id, b"x")) == Err("TicketExpired")


def test_unknown_td():
    world = owned_world()
    alice, td = world.cds["alice"], world.tds["tag"]
    from secrow.core_types import Identifier
    ghost = Identifier.td_from_mac("01:02:03:04:05:06")
    assert ask(world.ts, "alice", AddOwnerRequest(alice.session, alice.id, ghost)) == Err("UnknownTD")


def test_query_rules():
    world = owned_world()
    alice = world.cds["alice"]
    with pytest.raises(NoLocationOnRecord):
        world.run(alice.query_location("tag"))
    stranger = world.add_cd("stranger")
    world.run(stranger.onboard())
    with pytest.raises(NotAnOwner):
        world.run(stranger.query_location("tag"))
    td = world.tds["tag"]
    assert ask(world.ts, "x", LocQueryRequest(b"\x00" * 16, td.id)) == Err("Unauthenticated")


def test_update_requires_attested_key():
    world = owned_world()
    bob = world.add_cd("bob")
    td = world.tds["tag"]
    tpk, chain = bob.tee.begin_session()
    assert ask(world.ts, "bob", LocUpdateRequest(td.id, b"\x01" * 32, chain)) == Err("BadAttestation")
    assert ask(world.ts, "bob", LocUpdateRequest(td.id, tpk, b"junk")) == Err("BadAttestation")
    assert isinstance(ask(world.ts, "bob", LocUpdateRequest(td.id, tpk, chain)), LocUpdateGrant)


def test_update_without_grant():
    world = owned_world()
    td = world.tds["tag"]
    assert ask(world.ts, "x", AttestedLocationUpdate(td.id, b"k", b"s", b"e")) == Err("NoPendingUpdate")


def test_grants_expire():
    world = owned_world()
    bob = world.add_cd("bob")
    td = world.tds["tag"]
    tpk, chain = bob.tee.begin_session()
    ask(world.ts, "bob", LocUpdateRequest(td.id, tpk, chain))
    world.tick(world.ts.pending_ttl)
    assert ask(world.ts, "bob", AttestedLocationUpdate(td.id, tpk, b"s", b"e")) == Err("NoPendingUpdate")


def test_last_writer_wins_and_owner_reads_it():
    world = owned_world(update=True)
    carol = world.add_cd("carol")
    world.set_proximity("carol", "tag", True)
    later = type(TRUE_FIX).from_degrees(1.5, 2.5, 2000)
    world.set_gps("carol", later)
    world.run(carol.update_location("tag"))
    assert len(world.ts.write_log) == 2
    assert world.run(world.cds["alice"].query_location("tag")) == later


def test_ts_never_stores_plaintext():
    world = owned_world(update=True)
    assert TRUE_FIX.encode() not in world.ts.breach_dump()
    key = world.cds["alice"].key_ring[world.tds["tag"].id]
    assert key not in world.ts.breach_dump()


def test_breach_dump_is_canonical():
    a = owned_world(seed=3, update=True).ts.breach_dump()
    b = owned_world(seed=3, update=True).ts.breach_dump()
    assert a == b
