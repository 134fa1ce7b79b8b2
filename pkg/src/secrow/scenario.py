"""Scenario scripts: a line-oriented text format and its runner.

One statement per line; ``#`` starts a comment. Header lines come first and
fix the world's shape::

    system secrow                    # or baseline_trackr, trackr_c5_patched
    backend ec
    disable ts_keep_consumed_grants  # turn a defense off
    adversary snoop_ble replay run_rogue_cd
    intercept drop SignTokenResponse once

Then the story::

    td tag [mac 00:1B:44:11:3A:B7]
    cd alice [rogue]
    mimic fake tag
    near alice tag | far alice tag
    gps bob 48.8584 2.2945 [timestamp]
    press tag | release tag
    tick 5
    do alice onboard
    do alice primary_command tag AddSOwner bob
    replay bob tag PrimaryCmdRequest from alice index -2
    attack replay_primary_cmd

and assertions about what just happened or about the world::

    expect ok | expect error NotAnOwner
    expect location 48.8584 2.2945
    expect owner bob tag no          # ownership as the TD sees it
    expect ts-owner bob tag no
    expect writes tag 1
    expect rings tag 1
    expect attack fails              # or succeeds, n/a
    expect audit clean

An action whose error is not checked by the very next ``expect`` line fails
the scenario.
"""

from __future__ import annotations

import hashlib
import json
import shlex
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .core_types import (
    DUPLICATED,
    LocationFix,
    PrimaryCmd,
    PrimaryCmdBegin,
    RingBegin,
    decode_message,
    message_types,
)
from .defenses import Defenses
from .errors import ParseError, SecrowError
from .flows import FlowSpec, Send
from .harness.attacks import ATTACKS, run_attack
from .harness.sut import SystemUnderTest
from .simnet import CAPABILITIES, AdversaryPolicy, Intervention, World
from .systems import SYSTEM_LABELS

HEADER = {"system", "backend", "disable", "adversary", "intercept"}
FLOWS = {
    "onboard": 0, "register": 0, "login": 0, "pair_and_claim": 1, "register_ownership": 1,
    "primary_command": (2, 3), "ring": 1, "update_location": 1, "query_location": 1,
}
EXPECTS = {
    "ok": 0, "error": 1, "location": 2, "owner": 3, "ts-owner": 3, "writes": 2, "rings": 2,
    "attack": 1, "audit": 1,
}


@dataclass(frozen=True)
class Statement:
    line: int
    verb: str
    args: tuple[str, ...]
    text: str


@dataclass
class Scenario:
    name: str
    statements: list[Statement]
    system: str = "secrow"
    backend: str = "ec"
    disabled: tuple[str, ...] = ()
    capabilities: frozenset[str] = frozenset()
    interventions: list[tuple[str, str, bool]] = field(default_factory=list)


def _arity(stmt: Statement, n, what: str | None = None) -> None:
    lo, hi = n if isinstance(n, tuple) else (n, n)
    if not lo <= len(stmt.args) <= hi:
        raise ParseError(f"{what or stmt.verb!r} takes {lo if lo == hi else f'{lo} to {hi}'} "
                         f"argument(s), got {len(stmt.args)}", stmt.line)


def _number(stmt: Statement, text: str, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", stmt.line) from None


def _check(stmt: Statement) -> None:
    """Static validation of one statement."""
    v, a = stmt.verb, stmt.args
    types = message_types()
    if v == "system":
        _arity(stmt, 1)
        if a[0] not in SYSTEM_LABELS:
            raise ParseError(f"unknown system {a[0]!r}", stmt.line)
    elif v == "backend":
        _arity(stmt, 1)
    elif v == "disable":
        _arity(stmt, (1, 5))
        for knob in a:
            if knob not in Defenses.knobs():
                raise ParseError(f"unknown defense {knob!r}", stmt.line)
    elif v == "adversary":
        for cap in a:
            if cap not in CAPABILITIES:
                raise ParseError(f"unknown capability {cap!r}", stmt.line)
    elif v == "intercept":
        _arity(stmt, (2, 3))
        if a[0] not in Intervention.REQUIRES or a[1] not in types or a[2:] not in ((), ("once",)):
            raise ParseError("usage: intercept drop|modify|duplicate <MessageType> [once]", stmt.line)
    elif v == "td":
        if len(a) not in (1, 3) or (len(a) == 3 and a[1] != "mac"):
            raise ParseError("usage: td <name> [mac <address>]", stmt.line)
    elif v == "cd":
        if len(a) not in (1, 2) or a[1:] not in ((), ("rogue",)):
            raise ParseError("usage: cd <name> [rogue]", stmt.line)
    elif v == "mimic":
        _arity(stmt, 2)
    elif v in ("near", "far"):
        _arity(stmt, 2)
    elif v == "gps":
        _arity(stmt, (3, 4))
        _number(stmt, a[1]), _number(stmt, a[2])
        if len(a) == 4:
            _number(stmt, a[3], int)
    elif v in ("press", "release"):
        _arity(stmt, 1)
    elif v == "tick":
        _arity(stmt, 1)
        _number(stmt, a[0], int)
    elif v == "do":
        if len(a) < 2 or a[1] not in FLOWS:
            raise ParseError(f"usage: do <cd> <flow> ...; flows are {', '.join(sorted(FLOWS))}", stmt.line)
        _arity(Statement(stmt.line, a[1], a[2:], stmt.text), FLOWS[a[1]])
        if a[1] == "primary_command" and a[3] not in PrimaryCmd.__members__:
            raise ParseError(f"unknown primary command {a[3]!r}", stmt.line)
    elif v == "replay":
        options = dict(zip(a[3::2], a[4::2]))
        if len(a) < 3 or len(a) % 2 == 0 or a[2] not in types or not set(options) <= {"from", "index"}:
            raise ParseError("usage: replay <as-cd> <td> <MessageType> [from <cd>] [index <k>]", stmt.line)
        if "index" in options:
            _number(stmt, options["index"], int)
    elif v == "attack":
        _arity(stmt, 1)
        if a[0] not in ATTACKS:
            raise ParseError(f"unknown attack {a[0]!r}", stmt.line)
    elif v == "expect":
        if not a or a[0] not in EXPECTS:
            raise ParseError(f"usage: expect {'|'.join(EXPECTS)} ...", stmt.line)
        _arity(Statement(stmt.line, a[0], a[1:], stmt.text), EXPECTS[a[0]], f"expect {a[0]}")
        if a[0] == "location":
            _number(stmt, a[1]), _number(stmt, a[2])
        if a[0] in ("owner", "ts-owner") and a[3] not in ("yes", "no"):
            raise ParseError("ownership is 'yes' or 'no'", stmt.line)
        if a[0] in ("writes", "rings"):
            _number(stmt, a[2], int)
        if a[0] == "attack" and a[1] not in ("fails", "succeeds", "n/a"):
            raise ParseError("attack outcome is fails, succeeds or n/a", stmt.line)
        if a[0] == "audit" and a[1] != "clean":
            raise ParseError("only 'expect audit clean' is supported", stmt.line)
    else:
        raise ParseError(f"unknown statement {v!r}", stmt.line)


def parse(text: str, name: str = "scenario") -> Scenario:
    statements = []
    in_header = True
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            words = shlex.split(body)
        except ValueError as exc:
            raise ParseError(str(exc), number) from None
        stmt = Statement(number, words[0], tuple(words[1:]), body)
        _check(stmt)
        if stmt.verb in HEADER:
            if not in_header:
                raise ParseError(f"{stmt.verb!r} must come before the first action", number)
        else:
            in_header = False
        statements.append(stmt)
    scenario = Scenario(name, statements)
    caps: set[str] = set()
    for stmt in statements:
        if stmt.verb == "system":
            scenario.system = stmt.args[0]
        elif stmt.verb == "backend":
            scenario.backend = stmt.args[0]
        elif stmt.verb == "disable":
            scenario.disabled += stmt.args
        elif stmt.verb == "adversary":
            caps.update(stmt.args)
        elif stmt.verb == "intercept":
            scenario.interventions.append((stmt.args[0], stmt.args[1], len(stmt.args) == 3))
    scenario.capabilities = frozenset(caps)
    return scenario


def bundled_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("secrow.scenarios").iterdir() if p.name.endswith(".scn"))


def load(path_or_name: str | Path) -> Scenario:
    """Parse a scenario file, or a bundled scenario by name."""
    path = Path(path_or_name)
    if path.is_file():
        return parse(path.read_text(), path.stem)
    bundled = resources.files("secrow.scenarios") / f"{path_or_name}.scn"
    if bundled.is_file():
        return parse(bundled.read_text(), str(path_or_name))
    raise FileNotFoundError(str(path_or_name))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    line: int
    text: str
    outcome: str
    passed: bool | None = None


@dataclass
class ScenarioResult:
    name: str
    system: str
    seed: int
    steps: list[StepRecord]
    transcript: bytes
    rendered: str
    audit: list

    @property
    def failures(self) -> list[StepRecord]:
        return [s for s in self.steps if s.passed is False]

    @property
    def ok(self) -> bool:
        return not self.failures

    def report(self) -> dict:
        return {
            "scenario": self.name,
            "system": self.system,
            "seed": self.seed,
            "passed": self.ok,
            "transcript_sha256": hashlib.sha256(self.transcript).hexdigest(),
            "proximity_audit": [list(a) for a in self.audit],
            "steps": [{"line": s.line, "statement": s.text, "outcome": s.outcome, "passed": s.passed}
                      for s in self.steps],
        }

    def render_report(self) -> str:
        lines = [f"scenario {self.name} on {self.system}, seed {self.seed}"]
        for s in self.steps:
            mark = {True: "PASS", False: "FAIL", None: "    "}[s.passed]
            lines.append(f"  {mark} {s.line:4d}  {s.text:<52s} {s.outcome}")
        lines.append(f"result: {'passed' if self.ok else f'{len(self.failures)} assertion(s) failed'}")
        return "\n".join(lines) + "\n"


def _outcome_text(value) -> str:
    if isinstance(value, SecrowError):
        return f"error {value.code}"
    if value is None:
        return "ok"
    return f"ok {value!r}" if not isinstance(value, bytes) else f"ok <{len(value)} bytes>"


class Runner:
    def __init__(self, scenario: Scenario, seed: int, system: str | None = None):
        self.scenario = scenario
        self.seed = seed
        self.system = system or scenario.system
        self.sut = SystemUnderTest(self.system, Defenses().disable(*scenario.disabled), scenario.backend)
        self.world = self.sut.world(seed)
        script = [Intervention.on(message_types()[t], action, once=once)
                  for action, t, once in scenario.interventions]
        self.world.interpose(AdversaryPolicy(scenario.capabilities, script))
        self.steps: list[StepRecord] = []
        self.last = None
        self.last_checked = True
        self.attack_log: list[tuple[str, bytes, str]] = []

    def run(self) -> ScenarioResult:
        for stmt in self.scenario.statements:
            if stmt.verb in HEADER:
                continue
            if stmt.verb != "expect":
                self._settle()
            try:
                record = self._execute(stmt)
            except (KeyError, ValueError) as exc:
                record = StepRecord(stmt.line, stmt.text, f"bad reference: {exc}", False)
            self.steps.append(record)
        self._settle()
        transcript = self.world.transcript_bytes() + b"".join(t for _, t, _ in self.attack_log)
        rendered = self.world.transcript.render() + "".join(
            f"--- attack {name} ---\n{text}\n" for name, _, text in self.attack_log)
        return ScenarioResult(self.scenario.name, self.system, self.seed, self.steps, transcript, rendered,
                              self.world.audit_proximity())

    def _settle(self) -> None:
        if not self.last_checked and isinstance(self.last, SecrowError):
            self.steps[-1].passed = False
            self.steps[-1].outcome += " (unexpected)"
        self.last_checked = True

    def _act(self, value) -> str:
        self.last, self.last_checked = value, False
        return _outcome_text(value)

    def _flow(self, spec: FlowSpec):
        try:
            return self.world.run(spec)
        except SecrowError as exc:
            return exc

    def _execute(self, stmt: Statement) -> StepRecord:
        w, a = self.world, stmt.args
        outcome = ""
        if stmt.verb == "td":
            w.add_td(a[0], a[2] if len(a) == 3 else None)
        elif stmt.verb == "cd":
            if a[1:] == ("rogue",):
                w.adversary.rogue_cd(a[0])
            else:
                w.add_cd(a[0])
        elif stmt.verb == "mimic":
            w.adversary.mimic_td(a[0], a[1])
        elif stmt.verb in ("near", "far"):
            if a[0] not in w.cds or a[1] not in w.endpoints:
                raise KeyError(f"{a[0]} or {a[1]} is not in the world")
            w.set_proximity(a[0], a[1], stmt.verb == "near")
        elif stmt.verb == "gps":
            w.set_gps(a[0], LocationFix.from_degrees(float(a[1]), float(a[2]), int(a[3]) if len(a) == 4 else 0))
        elif stmt.verb in ("press", "release"):
            w.press(a[0], stmt.verb == "press")
        elif stmt.verb == "tick":
            w.tick(int(a[0]))
        elif stmt.verb == "do":
            outcome = self._act(self._flow(self._do(a)))
        elif stmt.verb == "replay":
            outcome = self._act(self._flow(self._replay(a)))
        elif stmt.verb == "attack":
            result = run_attack(a[0], self.sut, self.seed)
            self.attack_log.append((a[0], result.transcript, result.rendered))
            self.last, self.last_checked = result, True
            outcome = f"attack {result.outcome}: {result.detail}"
        elif stmt.verb == "expect":
            return self._expect(stmt)
        return StepRecord(stmt.line, stmt.text, outcome)

    def _do(self, a: tuple[str, ...]) -> FlowSpec:
        cd = self.world.cds[a[0]]
        name, rest = a[1], a[2:]
        if name == "primary_command":
            payload = None
            if len(rest) == 3:
                # payload names another CD, whose public key is sent
                payload = self.world.cds[rest[2]].public_key
            return cd.primary_command(rest[0], PrimaryCmd[rest[1]], payload)
        return getattr(cd, name)(*rest)

    def _replay(self, a: tuple[str, ...]) -> FlowSpec:
        """Resend the latest recorded BLE message of a type from another CD's session."""
        actor, td, type_name = a[:3]
        options = dict(zip(a[3::2], a[4::2]))
        source = options.get("from")
        msg_type = message_types()[type_name]
        candidates = [e for e in self.world.adversary.observed_messages(msg_type)
                      if e.receiver == td and e.sender != actor and (source is None or e.sender == source)]
        if not candidates:
            raise ValueError(f"no recorded {type_name} to {td}")
        entry = candidates[int(options.get("index", -1))]
        cd = self.world.cds[actor]

        def gen():
            # open the actor's own challenge first, as the replayed answer expects one
            msg = decode_message(entry.data)
            if type_name == "PrimaryCmdRequest":
                yield Send(td, PrimaryCmdBegin(msg.cmd), raw_reply=True)
            elif type_name == "RingRequest":
                yield Send(td, RingBegin(cd.public_key), raw_reply=True)
            reply = yield Send(td, entry.data, flags=(DUPLICATED,))
            return reply

        self.world.adversary.require("replay")
        return FlowSpec(actor, gen(), "replay")

    def _expect(self, stmt: Statement) -> StepRecord:
        w = self.world
        kind, a = stmt.args[0], stmt.args[1:]
        if kind in ("ok", "error", "location"):
            self.last_checked = True
            got = self.last
            if kind == "ok":
                passed = not isinstance(got, SecrowError)
            elif kind == "error":
                passed = isinstance(got, SecrowError) and got.code == a[0]
            else:
                want = LocationFix.from_degrees(float(a[0]), float(a[1]))
                passed = isinstance(got, LocationFix) and (got.lat_e7, got.lon_e7) == (want.lat_e7, want.lon_e7)
            return StepRecord(stmt.line, stmt.text, f"got {_outcome_text(got)}", passed)
        if kind in ("owner", "ts-owner"):
            cd, td = w.cds[a[0]], w.tds[a[1]]
            if kind == "owner" and hasattr(td, "owners"):
                actual = cd.public_key in td.owners
            else:
                actual = w.ts.is_owner(cd.id, td.id)
            return StepRecord(stmt.line, stmt.text, f"got {'yes' if actual else 'no'}", actual == (a[2] == "yes"))
        if kind == "writes":
            td = w.tds[a[0]]
            n = sum(1 for e in w.ts.write_log if e.td_id == td.id)
            return StepRecord(stmt.line, stmt.text, f"got {n}", n == int(a[1]))
        if kind == "rings":
            n = len(w.tds[a[0]].events)
            return StepRecord(stmt.line, stmt.text, f"got {n}", n == int(a[1]))
        if kind == "attack":
            got = self.last.outcome if hasattr(self.last, "outcome") else "none"
            return StepRecord(stmt.line, stmt.text, f"got {got}", got == a[0])
        audit = w.audit_proximity()
        return StepRecord(stmt.line, stmt.text, f"got {len(audit)} out-of-range handler runs", not audit)


def run_scenario(scenario: Scenario, seed: int = 0, system: str | None = None) -> ScenarioResult:
    return Runner(scenario, seed, system).run()


def write_outputs(result: ScenarioResult, out: Path | str) -> dict[str, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{result.name}.{result.system}.{result.seed}"
    paths = {
        "transcript": out / f"{stem}.transcript",
        "transcript_text": out / f"{stem}.transcript.txt",
        "report": out / f"{stem}.report.json",
        "report_text": out / f"{stem}.report.txt",
    }
    paths["transcript"].write_bytes(result.transcript)
    paths["transcript_text"].write_text(result.rendered)
    paths["report"].write_text(json.dumps(result.report(), indent=2, sort_keys=True) + "\n")
    paths["report_text"].write_text(result.render_report())
    return paths


__all__ = ["Scenario", "ScenarioResult", "parse", "load", "run_scenario", "write_outputs", "bundled_names"]
