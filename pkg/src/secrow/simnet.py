"""Deterministic stepped world: BLE proximity, TS channels, flows, adversary.

Each (CD, TD) pair talks over its own BLE channel and each CD has one channel
to the TS. A step first lets every endpoint expire state, then walks the
channels in sorted order and delivers at most one ready message per channel.
A message queued during step ``k`` becomes ready at step ``k + 1``.

TS channels model an authenticated server channel. The adversary cannot
touch them and only learns message sizes. BLE channels carry whatever the
adversary's policy says: it can snoop, drop, modify, duplicate and inject.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .core_types import (
    DELIVERED,
    DROPPED,
    DUPLICATED,
    INJECTED,
    MODIFIED,
    Err,
    Identifier,
    Kind,
    LocationFix,
    Message,
    Transcript,
    TranscriptEntry,
    decode_message,
    encode_message,
)
from .crypto import CountingBackend, CryptoBackend, get_backend
from .defenses import Defenses
from .errors import (
    CapabilityError,
    ChannelUnavailable,
    DecodeError,
    MalformedMessage,
    SecrowError,
    SpoofedEndpoint,
    Timeout,
    error_for_code,
)
from .flows import TS, FlowSpec, Send, exchange
from .rng import Drbg

CAPABILITIES = frozenset({"snoop_ble", "replay", "modify", "inject", "run_rogue_cd", "run_mimic_td"})
DEFAULT_MAX_STEPS = 10_000


@dataclass
class Packet:
    channel: str
    sender: str
    receiver: str
    data: bytes
    ready: int
    flags: tuple[str, ...] = ()


@dataclass
class Intervention:
    """One scripted adversary action on BLE traffic.

    ``action`` is ``drop``, ``modify`` or ``duplicate``. ``match`` sees the
    packet about to be delivered. With ``once`` the intervention fires a
    single time.
    """

    action: str
    match: Callable[[Packet], bool]
    transform: Callable[[bytes], bytes] | None = None
    once: bool = True
    fired: int = 0

    REQUIRES = {"drop": "modify", "modify": "modify", "duplicate": "replay"}

    @classmethod
    def on(cls, message_type: type, action: str, transform=None, sender: str | None = None,
           receiver: str | None = None, once: bool = True) -> "Intervention":
        def match(p: Packet) -> bool:
            if sender is not None and p.sender != sender:
                return False
            if receiver is not None and p.receiver != receiver:
                return False
            return bool(p.data) and p.data[0] == message_type.TAG
        return cls(action, match, transform, once)


@dataclass
class AdversaryPolicy:
    capabilities: frozenset[str] = frozenset()
    script: list[Intervention] = field(default_factory=list)

    def __post_init__(self):
        self.capabilities = frozenset(self.capabilities)
        unknown = self.capabilities - CAPABILITIES
        if unknown:
            raise ValueError(f"unknown capabilities: {sorted(unknown)}")


class Flow:
    def __init__(self, spec: FlowSpec, start_index: int, start_step: int):
        self.owner = spec.owner
        self.gen = spec.gen
        self.label = spec.label
        self.start_index = start_index
        self.start_step = start_step
        self.done = False
        self.result = None
        self.error: SecrowError | None = None
        self.waiting: str | None = None
        self.raw_reply = False

    def outcome(self):
        if not self.done:
            raise Timeout(f"flow {self.label} still running")
        if self.error is not None:
            raise self.error
        return self.result

    def __repr__(self) -> str:
        state = "done" if self.done else f"waiting on {self.waiting}"
        return f"Flow({self.owner}.{self.label}, {state})"


class Adversary:
    """The attacker's handle on the world; every power is capability-gated."""

    def __init__(self, world: "World"):
        self._world = world
        self.policy = AdversaryPolicy()

    def has(self, capability: str) -> bool:
        return capability in self.policy.capabilities

    def require(self, capability: str) -> None:
        if not self.has(capability):
            raise CapabilityError(capability)

    def observed(self) -> list[TranscriptEntry]:
        self.require("snoop_ble")
        return [e for e in self._world.transcript if e.channel.startswith("ble:")]

    def observed_messages(self, message_type: type) -> list[TranscriptEntry]:
        return [e for e in self.observed() if e.data and e.data[0] == message_type.TAG]

    def ts_traffic(self) -> list[tuple[int, str, int]]:
        """What a network observer sees of TS channels: sizes and timing."""
        return [(e.step, e.channel, len(e.data)) for e in self._world.transcript
                if e.channel.startswith("ts:")]

    def read_ts_channel(self, cd: str) -> list[bytes]:
        # TS channels are confidential by construction
        return []

    def register_ts_endpoint(self, name: str):
        raise SpoofedEndpoint(f"{name!r} cannot authenticate as the tracking service")

    def inject(self, sender: str, receiver: str, data: Message | bytes) -> Flow:
        """Send ``data`` on ``sender``'s BLE channel, posing as ``sender``."""
        self.require("inject")
        return self._world.start(FlowSpec("adversary", exchange(receiver, data, via=sender,
                                                                flags=(INJECTED,)), "inject"))

    def replay(self, entry: TranscriptEntry | bytes, sender: str, receiver: str) -> Flow:
        """Resend recorded bytes from ``sender``'s BLE channel."""
        self.require("replay")
        data = entry.data if isinstance(entry, TranscriptEntry) else entry
        return self._world.start(FlowSpec("adversary", exchange(receiver, data, via=sender,
                                                                flags=(DUPLICATED,)), "replay"))

    def rogue_cd(self, name: str, **kw):
        self.require("run_rogue_cd")
        return self._world.add_cd(name, rogue=True, **kw)

    def mimic_td(self, name: str, victim: str):
        self.require("run_mimic_td")
        return self._world.add_mimic_td(name, victim)


class World:
    def __init__(self, seed: int | bytes | str = 0, system="secrow", backend: str | CryptoBackend = "ec",
                 defenses: Defenses | None = None, ops: Counter | None = None):
        from .systems import get_system

        self.seed = seed
        self.rng = Drbg(seed)
        self.system = get_system(system)
        self.base_backend = get_backend(backend) if isinstance(backend, str) else backend
        self.defenses = defenses or Defenses()
        self.ops = ops if ops is not None else Counter()
        self.step = 0
        self.transcript = Transcript()
        self.adversary = Adversary(self)
        self.endpoints: dict[str, object] = {}
        self.tds: dict[str, object] = {}
        self.cds: dict[str, object] = {}
        self.rogue: set[str] = set()
        self.mimics: set[str] = set()
        self.proximity: set[tuple[str, str]] = set()
        self.directory: dict[Identifier, bytes] = {}
        self._advertised: dict[str, Identifier] = {}
        self._queues: dict[str, deque[Packet]] = {}
        self._waiting: dict[str, deque[Flow]] = {}
        self.flows: list[Flow] = []
        self.orphans: list[TranscriptEntry] = []
        self.handler_log: list[tuple[int, str, str, bool]] = []
        self.attestation_root = self.backend("MFR").generate_keypair(self.rng.fork("attestation-root"))
        self.ts = self.system.make_ts(self)
        self.endpoints[TS] = self.ts

    # -- construction ------------------------------------------------------

    def clock(self) -> int:
        return self.step

    def backend(self, role: str) -> CryptoBackend:
        return CountingBackend(self.base_backend, role, self.ops)

    def add_td(self, name: str, mac: str | bytes | None = None):
        self._check_name(name)
        if mac is None:
            mac = self.rng.fork(f"mac:{name}").bytes(6)
        identifier = Identifier.td_from_mac(mac)
        if identifier in self.directory:
            raise ValueError(f"MAC {identifier.mac} already in use")
        td = self.system.make_td(self, name, identifier)
        self.directory[identifier] = td.public_key
        self._advertised[name] = identifier
        self.endpoints[name] = td
        self.tds[name] = td
        return td

    def add_cd(self, name: str, username: str | None = None, password: str | None = None,
               rogue: bool = False):
        self._check_name(name)
        identifier = Identifier(Kind.CD, self.rng.fork(f"cdid:{name}").bytes(6))
        cd = self.system.make_cd(self, name, identifier, username, password)
        self.cds[name] = cd
        if rogue:
            self.rogue.add(name)
        return cd

    def add_mimic_td(self, name: str, victim: str):
        self._check_name(name)
        mimic = self.system.make_mimic(self, name, self.tds[victim])
        self._advertised[name] = self._advertised[victim]
        self.endpoints[name] = mimic
        self.mimics.add(name)
        return mimic

    def _check_name(self, name: str) -> None:
        if name in self.endpoints or name in self.cds or name in (TS, "adversary") or "/" in name:
            raise ValueError(f"endpoint name {name!r} is taken or invalid")

    def interpose(self, policy: AdversaryPolicy) -> Adversary:
        for iv in policy.script:
            needed = Intervention.REQUIRES.get(iv.action)
            if needed is None:
                raise ValueError(f"unknown intervention {iv.action!r}")
            if needed not in policy.capabilities:
                raise CapabilityError(needed)
        self.adversary.policy = policy
        return self.adversary

    # -- physical world ----------------------------------------------------

    def advertised_id(self, name: str) -> Identifier:
        return self._advertised[name]

    def near(self, cd: str, td: str) -> bool:
        return (cd, td) in self.proximity

    def scan(self, cd: str) -> list[str]:
        return sorted(td for c, td in self.proximity if c == cd)

    def set_proximity(self, cd: str, td: str, near: bool) -> None:
        if near:
            self.proximity.add((cd, td))
            return
        self.proximity.discard((cd, td))
        cid = self.ble_channel(cd, td)
        queue = self._queues.get(cid)
        while queue:
            p = queue.popleft()
            self._log(p, p.flags + (DROPPED,))
        for flow in list(self._waiting.get(cid, ())):
            self._fail_waiting(cid, ChannelUnavailable(f"{cd} moved out of range of {td}"))

    def set_gps(self, cd: str, fix: LocationFix) -> None:
        self.cds[cd].gps.set(fix)

    def press(self, td: str, enabled: bool = True) -> None:
        """Hold the pairing button."""
        self.tds[td].set_pairing_mode(enabled)

    # -- channels ----------------------------------------------------------

    @staticmethod
    def ble_channel(cd: str, td: str) -> str:
        return f"ble:{cd}/{td}"

    @staticmethod
    def ts_channel(cd: str) -> str:
        return f"ts:{cd}"

    def _log(self, p: Packet, flags: Iterable[str]) -> TranscriptEntry:
        return self.transcript.append(self.step, p.channel, p.sender, p.receiver, p.data, tuple(flags))

    def _fail_waiting(self, cid: str, exc: SecrowError) -> None:
        waiting = self._waiting.get(cid)
        if waiting:
            flow = waiting.popleft()
            flow.waiting = None
            self._advance(flow, exc=exc)

    # -- flows -------------------------------------------------------------

    def start(self, spec: FlowSpec) -> Flow:
        flow = Flow(spec, len(self.transcript), self.step)
        self.flows.append(flow)
        self._advance(flow)
        return flow

    def run(self, spec: FlowSpec | Flow, max_steps: int = DEFAULT_MAX_STEPS):
        flow = spec if isinstance(spec, Flow) else self.start(spec)
        self.run_until(lambda: flow.done, max_steps)
        return flow.outcome()

    def run_all(self, specs: Iterable[FlowSpec], max_steps: int = DEFAULT_MAX_STEPS) -> list[Flow]:
        flows = [self.start(s) for s in specs]
        self.run_until(lambda: all(f.done for f in flows), max_steps)
        return flows

    def run_until(self, done: Callable[[], bool], max_steps: int = DEFAULT_MAX_STEPS) -> None:
        budget = max_steps
        while not done():
            if not any(self._queues.values()):
                # nothing in flight: whoever still waits never gets an answer
                for cid in sorted(c for c, w in self._waiting.items() if w):
                    self._fail_waiting(cid, Timeout("no reply in flight"))
                if not any(self._queues.values()):
                    break
            if budget <= 0:
                raise Timeout(f"gave up after {max_steps} steps")
            self.tick()
            budget -= 1

    def _advance(self, flow: Flow, value=None, exc: SecrowError | None = None) -> None:
        while True:
            try:
                cmd = flow.gen.throw(exc) if exc is not None else flow.gen.send(value)
            except StopIteration as stop:
                flow.done, flow.result = True, stop.value
                return
            except SecrowError as err:
                flow.done, flow.error = True, err
                return
            try:
                self._post(flow, cmd)
                return
            except SecrowError as err:
                value, exc = None, err

    def _post(self, flow: Flow, cmd: Send) -> None:
        if not isinstance(cmd, Send):
            raise TypeError(f"flows must yield Send, got {cmd!r}")
        local = cmd.via or flow.owner
        if cmd.via is not None and cmd.via != flow.owner:
            if INJECTED in cmd.flags or DUPLICATED in cmd.flags:
                pass  # capability already checked by the adversary API
            elif cmd.via not in self.rogue:
                raise CapabilityError("relaying through an honest device")
        data = cmd.message if isinstance(cmd.message, bytes) else encode_message(cmd.message)
        if cmd.peer == TS:
            cid = self.ts_channel(local)
        else:
            if cmd.peer not in self.endpoints:
                raise ChannelUnavailable(f"no device {cmd.peer!r}")
            if not self.near(local, cmd.peer):
                raise ChannelUnavailable(f"{local} is not in BLE range of {cmd.peer}")
            cid = self.ble_channel(local, cmd.peer)
        self._queues.setdefault(cid, deque()).append(
            Packet(cid, local, cmd.peer, data, self.step + 1, cmd.flags))
        flow.waiting, flow.raw_reply = cid, cmd.raw_reply
        self._waiting.setdefault(cid, deque()).append(flow)

    # -- scheduler ---------------------------------------------------------

    def tick(self, n: int = 1) -> None:
        for _ in range(n):
            self.step += 1
            for name in sorted(self.endpoints):
                self.endpoints[name].on_step(self.step)
            for cid in sorted(self._queues):
                queue = self._queues[cid]
                if queue and queue[0].ready <= self.step:
                    self._deliver(queue.popleft())

    def _deliver(self, p: Packet) -> None:
        ble = p.channel.startswith("ble:")
        if ble:
            cd, td = p.channel[4:].split("/", 1)
            if not self.near(cd, td):
                self._log(p, p.flags + (DROPPED,))
                self._fail_waiting(p.channel, ChannelUnavailable("out of range at delivery"))
                return
            p = self._intervene(p)
            if p is None:
                return
        entry = self._log(p, p.flags + (DELIVERED,))
        server = self.endpoints.get(p.receiver)
        if server is not None:
            if p.receiver in self.tds or p.receiver in self.mimics:
                self.handler_log.append((self.step, p.receiver, p.sender, self.near(p.sender, p.receiver)))
            reply = server.handle(p.sender, p.data)
            if reply is not None:
                self._queues[p.channel].append(Packet(p.channel, p.receiver, p.sender, reply, self.step + 1))
            return
        waiting = self._waiting.get(p.channel)
        if not waiting:
            self.orphans.append(entry)
            return
        flow = waiting.popleft()
        flow.waiting = None
        if flow.raw_reply:
            try:
                self._advance(flow, decode_message(p.data))
            except DecodeError:
                self._advance(flow, p.data)
            return
        try:
            msg = decode_message(p.data)
        except DecodeError as exc:
            self._advance(flow, exc=MalformedMessage(str(exc)))
            return
        if isinstance(msg, Err):
            self._advance(flow, exc=error_for_code(msg.code)(f"{msg.code} from {p.sender}"))
        else:
            self._advance(flow, msg)

    def _intervene(self, p: Packet) -> Packet | None:
        for iv in self.adversary.policy.script:
            if (iv.once and iv.fired) or not iv.match(p):
                continue
            iv.fired += 1
            if iv.action == "drop":
                self._log(p, p.flags + (DROPPED,))
                self._fail_waiting(p.channel, Timeout("message lost in transit"))
                return None
            if iv.action == "modify":
                p = Packet(p.channel, p.sender, p.receiver, iv.transform(p.data), p.ready,
                           p.flags + (MODIFIED,))
            elif iv.action == "duplicate":
                self._queues[p.channel].append(Packet(p.channel, p.sender, p.receiver, p.data,
                                                      self.step + 1, p.flags + (DUPLICATED,)))
        return p

    # -- audits ------------------------------------------------------------

    def audit_proximity(self) -> list[tuple[int, str, str, bool]]:
        """TD handler runs on messages from out-of-range CDs (should be empty)."""
        return [h for h in self.handler_log if not h[3]]

    def transcript_bytes(self) -> bytes:
        return self.transcript.encode()
