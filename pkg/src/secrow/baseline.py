"""A TrackR-style tracker, kept deliberately insecure.

Owners are recorded by tracker id alone, any nearby phone can ring a tag,
location updates are plaintext and unauthenticated, and the service stores
what it is told. Endpoint semantics map onto messages as follows:

=====================  ==========================  ==========================
Vendor endpoint        Message                     Fields
=====================  ==========================  ==========================
login                  BaselineLogin               username, password
add item               BaselineClaim               session token, trackerid
update location        BaselineUpdate              trackerid, latitude/longitude
list items             BaselineQuery / Items       session token / items
ring (BLE write)       BaselineRing                none
=====================  ==========================  ==========================

``presence_proof=True`` builds the patched variant: every update must carry
an HMAC over a TS nonce computed by the tag with a secret it shares with the
TS, so only a phone next to the tag can report for it.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from functools import singledispatchmethod

from .communication_device import expect
from .core_types import (
    Ack,
    BaselineClaim,
    BaselineItem,
    BaselineItems,
    BaselineLogin,
    BaselinePair,
    BaselinePresenceChallenge,
    BaselinePresenceProof,
    BaselineProvenUpdate,
    BaselineQuery,
    BaselineRing,
    BaselineUpdate,
    BaselineUpdateBegin,
    Identifier,
    LocationFix,
    Nonce,
    RegisterRequest,
    SessionGrant,
    derive_trackerid,
    encode_fields,
    trackerid_to_mac,
)
from .endpoint import Endpoint
from .errors import (
    AccountExists,
    BadCredentials,
    BadProximityProof,
    ChannelUnavailable,
    NoLocationOnRecord,
    NoPendingUpdate,
    Unauthenticated,
    UnexpectedMessage,
    Unsupported,
)
from .flows import TS, Send, flow
from .systems import System
from .tracking_device import RingEvent
from .tracking_service import SESSION_TTL, StoreWrite, hash_password


def presence_tag(secret: bytes, nonce: bytes) -> bytes:
    return hmac.new(secret, b"presence" + nonce, hashlib.sha256).digest()


class BaselineTD(Endpoint):
    def __init__(self, name: str, identifier: Identifier, secret: bytes, clock):
        self.name = name
        self.id = identifier
        self.trackerid = derive_trackerid(identifier.value)
        self._secret = secret
        # no key pair; the directory entry is just a placeholder
        self.public_key = b""
        self.clock = clock
        self.events: list[RingEvent] = []
        self.paired_with: list[str] = []

    def set_pairing_mode(self, enabled: bool) -> None:
        pass  # pairing is always open

    def secret_material(self) -> tuple[bytes, ...]:
        return (self._secret,)

    @singledispatchmethod
    def dispatch(self, msg, sender):
        raise UnexpectedMessage(type(msg).__name__)

    @dispatch.register(BaselinePair)
    def _pair(self, msg, sender):
        self.paired_with.append(sender)
        return Ack()

    @dispatch.register(BaselineRing)
    def _ring(self, msg, sender):
        self.events.append(RingEvent(self.clock(), sender.encode()))
        return Ack()

    @dispatch.register(BaselinePresenceChallenge)
    def _presence(self, msg, sender):
        return BaselinePresenceProof(presence_tag(self._secret, msg.nonce))


@dataclass
class BaselineAccount:
    username: str
    salt: bytes
    password_hash: bytes
    cd_id: Identifier


class BaselineTS(Endpoint):
    def __init__(self, rng, clock, presence_proof: bool = False, name: str = TS):
        self.name = name
        self.rng = rng
        self.clock = clock
        self.presence_proof = presence_proof
        self.accounts: dict[str, BaselineAccount] = {}
        self.sessions: dict[bytes, tuple[str, int]] = {}
        self.items: dict[str, set[str]] = {}
        self.locations: dict[str, tuple[LocationFix, int]] = {}
        self.device_secrets: dict[str, bytes] = {}
        self.pending_presence: dict[str, bytes] = {}
        self.write_log: list[StoreWrite] = []

    def on_step(self, step: int) -> None:
        for token in [t for t, (_, exp) in self.sessions.items() if step >= exp]:
            del self.sessions[token]

    def _user(self, session: bytes) -> str:
        entry = self.sessions.get(session)
        if entry is None:
            raise Unauthenticated()
        return entry[0]

    def _store(self, trackerid: str, location: LocationFix) -> Ack:
        step = self.clock()
        self.locations[trackerid] = (location, step)
        td_id = Identifier.td_from_mac(trackerid_to_mac(trackerid))
        self.write_log.append(StoreWrite(step, td_id, location.encode()))
        return Ack()

    def is_owner(self, cd_id: Identifier, td_id: Identifier) -> bool:
        trackerid = derive_trackerid(td_id.value)
        return any(a.cd_id == cd_id and trackerid in self.items.get(a.username, ())
                   for a in self.accounts.values())

    @singledispatchmethod
    def dispatch(self, msg, sender):
        raise UnexpectedMessage(type(msg).__name__)

    @dispatch.register(RegisterRequest)
    def _register(self, msg, sender):
        if msg.username in self.accounts:
            raise AccountExists()
        salt = self.rng.bytes(16)
        self.accounts[msg.username] = BaselineAccount(msg.username, salt, hash_password(msg.password, salt),
                                                      msg.cd_id)
        self.items[msg.username] = set()
        return Ack()

    @dispatch.register(BaselineLogin)
    def _login(self, msg, sender):
        account = self.accounts.get(msg.username)
        if account is None or not hmac.compare_digest(account.password_hash,
                                                      hash_password(msg.password, account.salt)):
            raise BadCredentials()
        token = self.rng.bytes(16)
        self.sessions[token] = (msg.username, self.clock() + SESSION_TTL)
        return SessionGrant(token)

    @dispatch.register(BaselineClaim)
    def _claim(self, msg, sender):
        self.items[self._user(msg.session)].add(msg.trackerid)
        return Ack()

    @dispatch.register(BaselineUpdate)
    def _update(self, msg, sender):
        if self.presence_proof:
            raise BadProximityProof("updates need a presence proof")
        return self._store(msg.trackerid, msg.location)

    @dispatch.register(BaselineUpdateBegin)
    def _update_begin(self, msg, sender):
        if not self.presence_proof:
            raise UnexpectedMessage("BaselineUpdateBegin")
        nonce = self.rng.nonce()
        self.pending_presence[msg.trackerid] = nonce
        return BaselinePresenceChallenge(Nonce(nonce))

    @dispatch.register(BaselineProvenUpdate)
    def _proven_update(self, msg, sender):
        if not self.presence_proof:
            raise UnexpectedMessage("BaselineProvenUpdate")
        nonce = self.pending_presence.get(msg.trackerid)
        if nonce is None or nonce != msg.nonce:
            raise NoPendingUpdate()
        secret = self.device_secrets.get(msg.trackerid)
        if secret is None or not hmac.compare_digest(presence_tag(secret, nonce), msg.tag):
            raise BadProximityProof()
        del self.pending_presence[msg.trackerid]
        return self._store(msg.trackerid, msg.location)

    @dispatch.register(BaselineQuery)
    def _query(self, msg, sender):
        user = self._user(msg.session)
        items = tuple(BaselineItem(t, self.locations[t][0])
                      for t in sorted(self.items[user]) if t in self.locations)
        return BaselineItems(items)

    def breach_dump(self) -> bytes:
        accounts = [encode_fields([a.username.encode(), a.salt, a.password_hash, a.cd_id.encode()])
                    for _, a in sorted(self.accounts.items())]
        items = [encode_fields([u.encode(), *(t.encode() for t in sorted(ts))])
                 for u, ts in sorted(self.items.items())]
        locations = [encode_fields([t.encode(), fix.encode(), step.to_bytes(8, "big")])
                     for t, (fix, step) in sorted(self.locations.items())]
        return encode_fields(encode_fields(s) for s in (accounts, items, locations))


class _Gps:
    def __init__(self):
        self.fix = LocationFix(0, 0, 0)

    def set(self, fix: LocationFix) -> None:
        self.fix = fix

    def get(self) -> LocationFix:
        return self.fix


class BaselineCD:
    def __init__(self, name: str, identifier: Identifier, world, username=None, password=None):
        self.name = name
        self.id = identifier
        self.world = world
        self.username = username or name
        self.password = password or f"{name}-password"
        self.session: bytes | None = None
        self.gps = _Gps()
        self.key_ring: dict = {}
        # the vendor app has no device key; the field is kept for a uniform account record
        self.public_key = b""

    def __repr__(self) -> str:
        return f"BaselineCD({self.name})"

    def secret_material(self) -> tuple[bytes, ...]:
        return ()

    def _trackerid(self, td: str) -> str:
        return derive_trackerid(self.world.advertised_id(td).value)

    def _session(self) -> bytes:
        if self.session is None:
            raise Unauthenticated("not logged in")
        return self.session

    @flow
    def register(self):
        expect((yield Send(TS, RegisterRequest(self.username, self.password, self.id, b""))), Ack)

    @flow
    def login(self, password: str | None = None):
        grant = expect((yield Send(TS, BaselineLogin(self.username, password or self.password))), SessionGrant)
        self.session = grant.session
        return grant.session

    @flow
    def onboard(self):
        yield from self.register().gen
        return (yield from self.login().gen)

    @flow
    def pair_and_claim(self, td: str):
        expect((yield Send(td, BaselinePair())), Ack)
        return expect((yield Send(TS, BaselineClaim(self._session(), self._trackerid(td)))), Ack)

    @flow
    def register_ownership(self, td: str):
        return expect((yield Send(TS, BaselineClaim(self._session(), self._trackerid(td)))), Ack)

    @flow
    def claim(self, trackerid: str):
        return expect((yield Send(TS, BaselineClaim(self._session(), trackerid))), Ack)

    @flow
    def primary_command(self, td: str, cmd, payload=None):
        raise Unsupported("no primary owner commands")
        yield  # pragma: no cover

    def share_location_key(self, peer, td) -> None:
        raise Unsupported("locations are not encrypted")

    @flow
    def ring(self, td: str):
        return expect((yield Send(td, BaselineRing())), Ack)

    @flow
    def update_location(self, td: str):
        # the app only reports tags it can see
        if td not in self.world.scan(self.name):
            raise ChannelUnavailable(f"{td} not visible from {self.name}")
        trackerid = self._trackerid(td)
        if not self.world.system.presence_proof:
            return expect((yield Send(TS, BaselineUpdate(trackerid, self.gps.get()))), Ack)
        challenge = expect((yield Send(TS, BaselineUpdateBegin(trackerid))), BaselinePresenceChallenge)
        proof = expect((yield Send(td, challenge)), BaselinePresenceProof)
        return expect((yield Send(TS, BaselineProvenUpdate(trackerid, self.gps.get(), challenge.nonce,
                                                           proof.tag))), Ack)

    @flow
    def report(self, trackerid: str, location: LocationFix):
        """Raw update call, as any HTTP client could make it."""
        return expect((yield Send(TS, BaselineUpdate(trackerid, location))), Ack)

    @flow
    def list_items(self):
        reply = expect((yield Send(TS, BaselineQuery(self._session()))), BaselineItems)
        return reply.items

    @flow
    def query_location(self, td):
        trackerid = derive_trackerid(td.value) if isinstance(td, Identifier) else self._trackerid(td)
        items = yield from self.list_items().gen
        for item in items:
            if item.trackerid == trackerid:
                return item.location
        raise NoLocationOnRecord()


class BaselineSystem(System):
    def __init__(self, presence_proof: bool = False):
        self.presence_proof = presence_proof
        self.label = "trackr_c5_patched" if presence_proof else "baseline_trackr"

    def make_ts(self, world):
        return BaselineTS(world.rng.fork("ts"), world.clock, self.presence_proof)

    def make_td(self, world, name, identifier):
        secret = world.rng.fork(f"td-secret:{name}").bytes(32)
        td = BaselineTD(name, identifier, secret, world.clock)
        # provisioned at manufacture
        world.ts.device_secrets[td.trackerid] = secret
        return td

    def make_cd(self, world, name, identifier, username, password):
        return BaselineCD(name, identifier, world, username, password)

    def make_mimic(self, world, name, victim):
        # MAC spoofing is enough; the device secret stays unknown
        return BaselineTD(name, victim.id, world.rng.fork(f"mimic:{name}").bytes(32), world.clock)
