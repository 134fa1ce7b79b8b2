"""The attack library.

Each attack builds its own world from the system under test, sets up the
honest part of the story, calls :meth:`AttackContext.mark` where the attack
proper begins, then reports whether it achieved its goal. The transcript
from the mark onward is the witness. An attack that has no meaning for a
system (there is nothing of that kind to replay, say) reports itself as not
applicable, which counts as a failed attack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..communication_device import expect
from ..core_types import (
    DUPLICATED,
    AddOwnerRequest,
    AttestedLocationUpdate,
    CommitOwner,
    LocationFix,
    LocUpdateGrant,
    LocUpdateRequest,
    Nonce,
    OwnershipProof,
    PairingProof,
    PrimaryCmd,
    PrimaryCmdBegin,
    PrimaryCmdRequest,
    SignTokenRequest,
    SignTokenResponse,
    decode_message,
    derive_trackerid,
    encode_fields,
    encode_message,
)
from ..crypto import encode_chain
from ..errors import AuthFailure, CryptoError, DecodeError, SecrowError, SpoofedEndpoint, UnknownAttack
from ..flows import TS, FlowSpec, Send
from ..simnet import AdversaryPolicy, Intervention, World
from .sut import SystemUnderTest, resolve
from .verdicts import Condition

TRUE_FIX = LocationFix.from_degrees(48.8583701, 2.2944813, 1_000)
FAKE_FIX = LocationFix.from_degrees(40.6892494, -74.0445004, 1_000)
SYBILS = 50


class NotApplicable(Exception):
    pass


@dataclass(frozen=True)
class AttackResult:
    attack: str
    condition: Condition | None
    sut: str
    seed: int
    applicable: bool
    succeeded: bool
    detail: str
    transcript: bytes
    rendered: str
    disabled: tuple[str, ...] = ()
    entries: tuple = field(default=(), compare=False, repr=False)

    @property
    def outcome(self) -> str:
        if not self.applicable:
            return "n/a"
        return "succeeds" if self.succeeded else "fails"


class AttackContext:
    def __init__(self, world: World):
        self.world = world
        self.start = 0

    def mark(self) -> None:
        self.start = len(self.world.transcript)

    def attempt(self, spec) -> object:
        """Run a flow, turning protocol errors into a returned exception."""
        try:
            return self.world.run(spec)
        except SecrowError as exc:
            return exc


@dataclass(frozen=True)
class AttackSpec:
    name: str
    condition: Condition | None
    capabilities: frozenset[str]
    run: Callable[[AttackContext], tuple[bool, str]]
    summary: str


ATTACKS: dict[str, AttackSpec] = {}


def attack(name: str, condition: Condition | None, capabilities=(), summary: str = ""):
    def register(fn):
        ATTACKS[name] = AttackSpec(name, condition, frozenset(capabilities), fn,
                                   summary or (fn.__doc__ or "").strip().splitlines()[0])
        return fn
    return register


def run_attack(name: str, sut: SystemUnderTest | str, seed: int = 0) -> AttackResult:
    spec = ATTACKS.get(name)
    if spec is None:
        raise UnknownAttack(name)
    sut = resolve(sut)
    world = sut.world(f"{seed}/{name}")
    world.interpose(AdversaryPolicy(spec.capabilities))
    ctx = AttackContext(world)
    try:
        succeeded, detail = spec.run(ctx)
        applicable = True
    except NotApplicable as exc:
        succeeded, detail, applicable = False, str(exc), False
    entries = world.transcript.since(ctx.start)
    return AttackResult(name, spec.condition, sut.label, seed, applicable, succeeded, detail,
                        b"".join(encode_fields([e.encode()]) for e in entries),
                        "\n".join(e.describe() for e in entries), sut.defenses.disabled, tuple(entries))


# ---------------------------------------------------------------------------
# shared setup
# ---------------------------------------------------------------------------

def secrow(world: World) -> bool:
    return world.system.label == "secrow"


def setup_owned(world: World, location: bool = True):
    """A tag owned by alice; with ``location``, bob has reported it once."""
    td = world.add_td("tag")
    alice = world.add_cd("alice")
    world.set_proximity("alice", "tag", True)
    world.run(alice.onboard())
    world.press("tag")
    world.run(alice.pair_and_claim("tag"))
    world.run(alice.register_ownership("tag"))
    if world.system.supports_primary_commands:
        world.run(alice.primary_command("tag", PrimaryCmd.UpdateLocKey))
    world.set_proximity("alice", "tag", False)
    if location:
        bob = world.add_cd("bob")
        world.set_proximity("bob", "tag", True)
        world.set_gps("bob", TRUE_FIX)
        world.run(bob.update_location("tag"))
        world.set_proximity("bob", "tag", False)
    return td, alice


def is_device_owner(world: World, cd, td) -> bool:
    if hasattr(td, "owners"):
        return cd.public_key in td.owners
    return world.ts.is_owner(cd.id, td.id)


def open_stored(world: World, td, e_l: bytes) -> LocationFix | None:
    """Harness-side opening of a stored location; ``None`` if it does not open."""
    if not secrow(world):
        return LocationFix.decode(e_l)
    key = td._location_key
    if key is None:
        return None
    try:
        return LocationFix.decode(world.base_backend.sym_decrypt(key, e_l)[:LocationFix.SIZE])
    except (CryptoError, DecodeError):
        return None


def writes_after(world: World, count: int, td=None) -> list:
    return [w for w in world.ts.write_log[count:] if td is None or w.td_id == td.id]


def forged_update_flow(cd, td_name: str, rng):
    """From anywhere: get a grant, then make up the proximity proof."""
    world = cd.world
    td_id = world.advertised_id(td_name)
    tpk, chain = cd.tee.begin_session()
    grant = yield Send(TS, LocUpdateRequest(td_id, tpk, chain), raw_reply=True)
    if not isinstance(grant, LocUpdateGrant):
        return grant
    forged_st = rng.bytes(64)
    forged_el = rng.bytes(60)
    return (yield Send(TS, AttestedLocationUpdate(td_id, tpk, forged_st, forged_el), raw_reply=True))


# ---------------------------------------------------------------------------
# C1: the TD recognises its owners
# ---------------------------------------------------------------------------

@attack("nonowner_ring", Condition.C1, {"run_rogue_cd"})
def nonowner_ring(ctx: AttackContext):
    """A stranger in range asks the tag to ring."""
    world = ctx.world
    td, _ = setup_owned(world, location=False)
    mallory = world.adversary.rogue_cd("mallory")
    world.set_proximity("mallory", "tag", True)
    ctx.mark()
    before = len(td.events)
    outcome = ctx.attempt(mallory.ring("tag"))
    rang = len(td.events) > before
    return rang, f"tag {'rang' if rang else 'refused'} ({outcome!r})"


@attack("replay_ring_proof", Condition.C1, {"snoop_ble", "replay", "run_rogue_cd"})
def replay_ring_proof(ctx: AttackContext):
    """Replay an owner's recorded ring exchange from another phone."""
    world = ctx.world
    td, alice = setup_owned(world, location=False)
    world.set_proximity("alice", "tag", True)
    mark = len(world.transcript)
    world.run(alice.ring("tag"))
    recorded = [e for e in world.adversary.observed() if e.index >= mark and e.sender == "alice"]
    mallory = world.adversary.rogue_cd("mallory")
    world.set_proximity("mallory", "tag", True)
    ctx.mark()
    before = len(td.events)

    def replay():
        for entry in recorded:
            yield Send("tag", entry.data, raw_reply=True, flags=(DUPLICATED,))

    world.run(FlowSpec("mallory", replay(), "replay_ring"))
    # and straight into alice's own session, which has no open challenge
    for entry in recorded[1:]:
        world.run(world.adversary.replay(entry, "alice", "tag"))
    rang = len(td.events) > before
    return rang, f"replayed {len(recorded)} recorded messages; tag {'rang' if rang else 'stayed silent'}"


@attack("replay_primary_cmd", Condition.C1, {"snoop_ble", "replay", "run_rogue_cd"})
def replay_primary_cmd(ctx: AttackContext):
    """A revoked secondary owner replays the command that once added them."""
    world = ctx.world
    if not world.system.supports_primary_commands:
        raise NotApplicable("no primary owner commands to replay")
    td, alice = setup_owned(world, location=False)
    bob = world.adversary.rogue_cd("bob")
    world.set_proximity("alice", "tag", True)
    mark = len(world.transcript)
    world.run(alice.primary_command("tag", PrimaryCmd.AddSOwner, bob.public_key))
    add_request = next(e for e in world.adversary.observed()
                       if e.index >= mark and e.data[0] == PrimaryCmdRequest.TAG)
    world.run(alice.primary_command("tag", PrimaryCmd.RemSOwner, bob.public_key))
    world.set_proximity("bob", "tag", True)
    ctx.mark()

    def replay():
        yield Send("tag", PrimaryCmdBegin(PrimaryCmd.AddSOwner), raw_reply=True)
        return (yield Send("tag", add_request.data, raw_reply=True, flags=(DUPLICATED,)))

    reply = world.run(FlowSpec("bob", replay(), "replay_primary_cmd"))
    outcome = ctx.attempt(bob.ring("tag"))
    readded = bob.public_key in td.owners
    return readded, f"replayed AddSOwner answered {reply!r}; ring afterwards: {outcome!r}"


# ---------------------------------------------------------------------------
# C2: the TS recognises a TD's owners
# ---------------------------------------------------------------------------

@attack("nonowner_query", Condition.C2, {"run_rogue_cd"})
def nonowner_query(ctx: AttackContext):
    """A logged-in stranger asks the TS where the tag is."""
    world = ctx.world
    setup_owned(world)
    mallory = world.adversary.rogue_cd("mallory")
    world.run(mallory.onboard())
    ctx.mark()
    outcome = ctx.attempt(mallory.query_location("tag"))
    leaked = isinstance(outcome, LocationFix)
    return leaked, f"query returned {outcome!r}"


@attack("unauthenticated_query", Condition.C2, {"run_rogue_cd"})
def unauthenticated_query(ctx: AttackContext):
    """Query with a made-up session token."""
    world = ctx.world
    setup_owned(world)
    mallory = world.adversary.rogue_cd("mallory")
    ctx.mark()
    mallory.session = world.rng.fork("forged-session").bytes(16)
    outcome = ctx.attempt(mallory.query_location("tag"))
    leaked = isinstance(outcome, LocationFix)
    return leaked, f"query returned {outcome!r}"


# ---------------------------------------------------------------------------
# C3: claiming needs a physical action on the TD
# ---------------------------------------------------------------------------

@attack("remote_claim", Condition.C3, {"run_rogue_cd"})
def remote_claim(ctx: AttackContext):
    """Claim a brand-new tag nobody put into pairing mode."""
    world = ctx.world
    td = world.add_td("tag")
    mallory = world.adversary.rogue_cd("mallory")
    world.run(mallory.onboard())
    world.set_proximity("mallory", "tag", True)
    ctx.mark()
    outcome = ctx.attempt(mallory.pair_and_claim("tag"))
    owned = is_device_owner(world, mallory, td)
    return owned, f"pairing returned {outcome!r}"


@attack("replay_pairing_proof", Condition.C3, {"snoop_ble", "replay", "run_rogue_cd"})
def replay_pairing_proof(ctx: AttackContext):
    """While the owner holds the button, answer the challenge with an old proof."""
    world = ctx.world
    td = world.add_td("tag")
    alice = world.add_cd("alice")
    world.set_proximity("alice", "tag", True)
    world.run(alice.onboard())
    world.press("tag")
    world.run(alice.pair_and_claim("tag"))
    recorded = [e for e in world.adversary.observed() if e.sender == "alice"]
    if hasattr(td, "factory_reset"):
        td.factory_reset()
    world.press("tag")
    mallory = world.adversary.rogue_cd("mallory")
    world.run(mallory.onboard())
    world.set_proximity("mallory", "tag", True)
    ctx.mark()

    def replay():
        for entry in recorded:
            msg = decode_message(entry.data)
            if secrow(world) and not isinstance(msg, PairingProof):
                # open a challenge for mallory's own key, then answer with alice's old proof
                msg = type(msg)(mallory.public_key)
            yield Send("tag", encode_message(msg), raw_reply=True, flags=(DUPLICATED,))

    world.run(FlowSpec("mallory", replay(), "replay_pairing"))
    if not secrow(world):
        ctx.attempt(mallory.claim(derive_trackerid(td.id.value)))
    owned = is_device_owner(world, mallory, td)
    return owned, f"mallory {'became' if owned else 'did not become'} an owner"


# ---------------------------------------------------------------------------
# C4: TS ownership needs the TD's approval
# ---------------------------------------------------------------------------

@attack("mac_enumeration_claim", Condition.C4, {"run_rogue_cd"})
def mac_enumeration_claim(ctx: AttackContext):
    """Register as owner of a tag known only by its advertised address."""
    world = ctx.world
    td, _ = setup_owned(world)
    mallory = world.adversary.rogue_cd("mallory")
    world.run(mallory.onboard())
    ctx.mark()
    if secrow(world):
        # the tag is out in the world; mallory walks up to it
        world.set_proximity("mallory", "tag", True)
        outcome = ctx.attempt(mallory.register_ownership("tag"))
    else:
        # no contact at all: the id follows from the MAC
        outcome = ctx.attempt(mallory.claim(derive_trackerid(td.id.value)))
    owned = world.ts.is_owner(mallory.id, td.id)
    return owned, f"registration returned {outcome!r}"


@attack("forged_owner_proof", Condition.C4, {"run_rogue_cd"})
def forged_owner_proof(ctx: AttackContext):
    """Commit ownership with an O_CD made up without the tag."""
    world = ctx.world
    if not secrow(world):
        raise NotApplicable("claims carry no ownership proof")
    td, _ = setup_owned(world)
    mallory = world.adversary.rogue_cd("mallory")
    session = world.run(mallory.onboard())
    rng = world.rng.fork("forgery")
    ctx.mark()

    def forge():
        ticket = yield Send(TS, AddOwnerRequest(session, mallory.id, td.id), raw_reply=True)
        guess = rng.bytes(32)
        o_cd = world.base_backend.sym_encrypt(guess, encode_fields([mallory.public_key, rng.nonce(),
                                                                    rng.nonce()]), rng)
        first = yield Send(TS, CommitOwner(session, mallory.id, td.id, o_cd), raw_reply=True)
        yield Send(TS, AddOwnerRequest(session, mallory.id, td.id), raw_reply=True)
        # the ticket itself, passed off as the proof
        second = yield Send(TS, CommitOwner(session, mallory.id, td.id, ticket.o_t), raw_reply=True)
        return first, second

    replies = world.run(FlowSpec("mallory", forge(), "forge_owner_proof"))
    owned = world.ts.is_owner(mallory.id, td.id)
    return owned, f"commits answered {replies!r}"


@attack("replay_owner_proof", Condition.C4, {"snoop_ble", "run_rogue_cd"})
def replay_owner_proof(ctx: AttackContext):
    """Commit ownership with the owner's recorded O_CD."""
    world = ctx.world
    if not secrow(world):
        raise NotApplicable("claims carry no ownership proof")
    td, alice = setup_owned(world)
    recorded = next(e for e in world.adversary.observed() if e.data[0] == OwnershipProof.TAG)
    o_cd = decode_message(recorded.data).o_cd
    mallory = world.adversary.rogue_cd("mallory")
    session = world.run(mallory.onboard())
    ctx.mark()

    def replay():
        yield Send(TS, AddOwnerRequest(session, mallory.id, td.id), raw_reply=True)
        return (yield Send(TS, CommitOwner(session, mallory.id, td.id, o_cd), raw_reply=True))

    reply = world.run(FlowSpec("mallory", replay(), "replay_owner_proof"))
    owned = world.ts.is_owner(mallory.id, td.id)
    return owned, f"commit answered {reply!r}"


# ---------------------------------------------------------------------------
# C5: an update needs BLE contact with the TD
# ---------------------------------------------------------------------------

def _far_attempts(world: World, cd, rng):
    """Flows a far-away device can try; returns their outcomes."""
    outcomes = [None, None]
    if secrow(world):
        specs = [cd.update_location("tag"), FlowSpec(cd.name, forged_update_flow(cd, "tag", rng), "forged")]
    else:
        specs = [cd.update_location("tag"), cd.report(derive_trackerid(world.tds["tag"].id.value), FAKE_FIX)]
    return specs, outcomes


@attack("far_update", Condition.C5, {"run_rogue_cd"})
def far_update(ctx: AttackContext):
    """Report the tag's location from out of range."""
    world = ctx.world
    td, _ = setup_owned(world)
    mallory = world.adversary.rogue_cd("mallory")
    world.set_gps("mallory", FAKE_FIX)
    count = len(world.ts.write_log)
    ctx.mark()
    specs, _ = _far_attempts(world, mallory, world.rng.fork("far"))
    outcomes = [ctx.attempt(s) for s in specs]
    writes = writes_after(world, count, td)
    return bool(writes), f"{len(writes)} store writes; outcomes {outcomes!r}"


@attack("sybil_far_update", Condition.C5, {"run_rogue_cd"})
def sybil_far_update(ctx: AttackContext):
    """Fifty rogue phones, none in range, all report the tag."""
    world = ctx.world
    td, _ = setup_owned(world)
    sybils = [world.adversary.rogue_cd(f"sybil{i:02d}") for i in range(SYBILS)]
    for s in sybils:
        world.set_gps(s.name, FAKE_FIX)
    count = len(world.ts.write_log)
    ctx.mark()
    specs = []
    for i, s in enumerate(sybils):
        specs.extend(_far_attempts(world, s, world.rng.fork(f"sybil{i}"))[0])
    world.run_all(specs)
    writes = writes_after(world, count, td)
    return bool(writes), f"{len(writes)} store writes from {SYBILS} far devices"


@attack("replay_proximity_proof", Condition.C5, {"run_rogue_cd"})
def replay_proximity_proof(ctx: AttackContext):
    """Report once while in range, walk away, and resend that report."""
    world = ctx.world
    td, _ = setup_owned(world)
    mallory = world.adversary.rogue_cd("mallory")
    world.set_gps("mallory", TRUE_FIX)
    world.set_proximity("mallory", "tag", True)
    mark = len(world.transcript)
    world.run(mallory.update_location("tag"))
    world.set_proximity("mallory", "tag", False)
    # mallory's own last upload to the TS
    own = [e for e in world.transcript.since(mark) if e.channel == world.ts_channel("mallory")
           and e.sender == "mallory"][-1]
    count = len(world.ts.write_log)
    ctx.mark()

    def replay():
        replies = []
        for _ in range(3):
            replies.append((yield Send(TS, own.data, raw_reply=True, flags=(DUPLICATED,))))
        return replies

    replies = world.run(FlowSpec("mallory", replay(), "replay_update"))
    writes = writes_after(world, count, td)
    return bool(writes), f"{len(writes)} store writes from out of range; replies {replies!r}"


# ---------------------------------------------------------------------------
# C6: a TD cannot be mimicked
# ---------------------------------------------------------------------------

@attack("mimic_td", Condition.C6, {"run_mimic_td"})
def mimic_td(ctx: AttackContext):
    """A fake tag advertising the victim's identity feeds honest reporters."""
    world = ctx.world
    td, _ = setup_owned(world, location=False)
    world.adversary.mimic_td("fake", "tag")
    carol = world.add_cd("carol")
    world.set_gps("carol", TRUE_FIX)
    world.set_proximity("carol", "fake", True)
    count = len(world.ts.write_log)
    ctx.mark()
    outcome = ctx.attempt(carol.update_location("fake"))
    writes = writes_after(world, count, td)
    return bool(writes), f"{len(writes)} writes for the victim while it was nowhere near; {outcome!r}"


# ---------------------------------------------------------------------------
# C7: a CD cannot spoof its location
# ---------------------------------------------------------------------------

def _spoofed(world: World, td, count: int) -> list:
    return [w for w in writes_after(world, count, td)
            if (fix := open_stored(world, td, w.e_l)) is not None and fix != TRUE_FIX]


def hostile_driver_flow(cd, td_name: str, fake: LocationFix, rng):
    """Everything a compromised driver can do with the TEE handle."""
    world = cd.world
    td_id = world.advertised_id(td_name)
    replies = []
    for variant in ("hint", "swap", "own-key"):
        tpk, chain = cd.tee.begin_session()
        grant = yield Send(TS, LocUpdateRequest(td_id, tpk, chain), raw_reply=True)
        if not isinstance(grant, LocUpdateGrant):
            replies.append(grant)
            continue
        if variant == "own-key":
            signed = cd.tee.sign_location(grant.e_c)
            own = world.base_backend.generate_keypair(rng)
            sig = world.base_backend.sign(own.private, fake.encode() + signed.n_c, rng)
            request = SignTokenRequest(grant.e_t, own.public, chain, fake, Nonce(signed.n_c), sig)
        else:
            signed = cd.tee.sign_location(grant.e_c, location=fake) if variant == "hint" \
                else cd.tee.sign_location(grant.e_c)
            request = SignTokenRequest(grant.e_t, tpk, chain, fake, Nonce(signed.n_c), signed.signature)
        response = yield Send(td_name, request, raw_reply=True)
        if isinstance(response, SignTokenResponse):
            response = yield Send(TS, AttestedLocationUpdate(td_id, tpk, response.s_t, response.e_l),
                                  raw_reply=True)
        replies.append(response)
    return replies


@attack("hostile_tee_driver", Condition.C7, {"run_rogue_cd"})
def hostile_tee_driver(ctx: AttackContext):
    """A compromised phone in range tries to get a fake fix stored."""
    world = ctx.world
    td, _ = setup_owned(world)
    mallory = world.adversary.rogue_cd("mallory")
    world.set_gps("mallory", TRUE_FIX)
    world.set_proximity("mallory", "tag", True)
    count = len(world.ts.write_log)
    ctx.mark()
    if secrow(world):
        outcome = world.run(FlowSpec("mallory", hostile_driver_flow(mallory, "tag", FAKE_FIX,
                                                                    world.rng.fork("driver")), "hostile"))
    else:
        outcome = ctx.attempt(_baseline_spoof(world, mallory))
    spoofed = _spoofed(world, td, count)
    return bool(spoofed), f"{len(spoofed)} fake fixes stored; replies {outcome!r}"


def _baseline_spoof(world: World, cd):
    if world.system.presence_proof:
        # a real presence proof, wrapped around a made-up fix
        world.set_gps(cd.name, FAKE_FIX)
        return cd.update_location("tag")
    return cd.report(derive_trackerid(world.tds["tag"].id.value), FAKE_FIX)


@attack("spoof_location_update", Condition.C7, {"run_rogue_cd"})
def spoof_location_update(ctx: AttackContext):
    """Finish an honest exchange with the tag, then upload a different E_L."""
    world = ctx.world
    td, _ = setup_owned(world)
    mallory = world.adversary.rogue_cd("mallory")
    world.set_gps("mallory", TRUE_FIX)
    world.set_proximity("mallory", "tag", True)
    count = len(world.ts.write_log)
    rng = world.rng.fork("spoof")
    ctx.mark()
    if not secrow(world):
        outcome = ctx.attempt(_baseline_spoof(world, mallory))
    else:
        def flow():
            td_id = td.id
            tpk, chain = mallory.tee.begin_session()
            grant = expect((yield Send(TS, LocUpdateRequest(td_id, tpk, chain))), LocUpdateGrant)
            signed = mallory.tee.sign_location(grant.e_c)
            response = expect((yield Send("tag", SignTokenRequest(grant.e_t, tpk, chain, signed.location,
                                                                  Nonce(signed.n_c), signed.signature))),
                              SignTokenResponse)
            # mallory has no L_TD, so the best fake E_L is keyed at random
            fake_el = world.base_backend.sym_encrypt(rng.bytes(32), FAKE_FIX.encode() + rng.nonce(), rng)
            return (yield Send(TS, AttestedLocationUpdate(td_id, tpk, response.s_t, fake_el),
                               raw_reply=True))
        outcome = ctx.attempt(FlowSpec("mallory", flow(), "spoof"))
    spoofed = _spoofed(world, td, count)
    return bool(spoofed), f"{len(spoofed)} fake fixes stored; {outcome!r}"


# ---------------------------------------------------------------------------
# C8: the TS cannot be spoofed
# ---------------------------------------------------------------------------

@attack("ts_endpoint_mimicry", Condition.C8)
def ts_endpoint_mimicry(ctx: AttackContext):
    """Stand up a fake TS endpoint and read TS traffic."""
    world = ctx.world
    setup_owned(world)
    ctx.mark()
    try:
        world.adversary.register_ts_endpoint("fake-ts")
        registered = True
    except SpoofedEndpoint:
        registered = False
    read = any(world.adversary.read_ts_channel(cd) for cd in world.cds)
    return registered or read, "rogue endpoint rejected and TS traffic unreadable (holds by model)"


# ---------------------------------------------------------------------------
# beyond the batteries
# ---------------------------------------------------------------------------

@attack("breach_dump_read", None)
def breach_dump_read(ctx: AttackContext):
    """Steal the whole TS state and look for locations in it."""
    world = ctx.world
    td, _ = setup_owned(world)
    ctx.mark()
    dump = world.ts.breach_dump()
    if TRUE_FIX.encode() in dump:
        return True, "plaintext fix found in the dump"
    stored = [w.e_l for w in world.ts.write_log]
    for e_l in stored:
        for i in range(len(dump) - 31):
            try:
                world.base_backend.sym_decrypt(dump[i:i + 32], e_l)
                return True, f"a 32-byte window at offset {i} opens a stored location"
            except AuthFailure:
                continue
    return False, f"0 locations recovered from {len(dump)} bytes"


@attack("el_swap_in_transit", None, {"modify"})
def el_swap_in_transit(ctx: AttackContext):
    """Swap E_L on the BLE hop after the tag signed the nonces."""
    world = ctx.world
    if not secrow(world):
        raise NotApplicable("no encrypted location crosses BLE")
    td, alice = setup_owned(world, location=False)
    rng = world.rng.fork("swap")

    def swap(data: bytes) -> bytes:
        msg = decode_message(data)
        return encode_message(SignTokenResponse(msg.s_t, rng.bytes(len(msg.e_l))))

    world.adversary.policy.script.append(Intervention.on(SignTokenResponse, "modify", swap))
    carol = world.add_cd("carol")
    world.set_gps("carol", TRUE_FIX)
    world.set_proximity("carol", "tag", True)
    count = len(world.ts.write_log)
    ctx.mark()
    accepted = ctx.attempt(carol.update_location("tag"))
    stored = bool(writes_after(world, count, td))
    owner_view = ctx.attempt(alice.query_location("tag"))
    detected = isinstance(owner_view, AuthFailure)
    return stored, (f"TS {'accepted' if stored else 'rejected'} the swapped E_L ({accepted!r}); "
                    f"owner decryption {'failed authentication' if detected else repr(owner_view)}")


@attack("relay_attack", None, {"run_rogue_cd"})
def relay_attack(ctx: AttackContext):
    """A far phone reports through a nearby accomplice that forwards BLE."""
    world = ctx.world
    if not secrow(world):
        raise NotApplicable("updates need no BLE contact to relay")
    td, _ = setup_owned(world)
    far = world.adversary.rogue_cd("far")
    world.adversary.rogue_cd("proxy")
    world.set_gps("far", FAKE_FIX)
    world.set_proximity("proxy", "tag", True)
    count = len(world.ts.write_log)
    ctx.mark()

    def relayed():
        tpk, chain = far.tee.begin_session()
        grant = expect((yield Send(TS, LocUpdateRequest(td.id, tpk, chain))), LocUpdateGrant)
        signed = far.tee.sign_location(grant.e_c)
        response = expect((yield Send("tag", SignTokenRequest(grant.e_t, tpk, chain, signed.location,
                                                              Nonce(signed.n_c), signed.signature),
                                      via="proxy")), SignTokenResponse)
        return (yield Send(TS, AttestedLocationUpdate(td.id, tpk, response.s_t, response.e_l)))

    outcome = ctx.attempt(FlowSpec("far", relayed(), "relay"))
    writes = writes_after(world, count, td)
    return bool(writes), f"{len(writes)} writes carrying the far phone's fix; {outcome!r}"
