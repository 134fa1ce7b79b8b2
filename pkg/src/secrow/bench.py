"""Timing and operation counts for primitives and the four user-facing flows.

Wall times depend on the host; only their ordering is meaningful. The
operation counts per role stand in for energy, since they are what the radio
and CPU of each device actually spend effort on.
"""

from __future__ import annotations

import statistics
import time
from collections import Counter
from dataclasses import dataclass, field

from .core_types import LocationFix, PrimaryCmd
from .crypto import get_backend
from .rng import Drbg
from .simnet import World

PAYLOAD = 64
FLOWS = ("Owner Registration", "Primary Owner Operation", "Location Update", "Location Query")
SYSTEMS = ("secrow", "baseline_trackr")
FIX = LocationFix.from_degrees(48.8583701, 2.2944813, 1_000)


@dataclass
class Sample:
    times: list[float] = field(default_factory=list)

    def add(self, seconds: float) -> None:
        self.times.append(seconds)

    @property
    def mean_ms(self) -> float:
        return statistics.fmean(self.times) * 1e3

    @property
    def stdev_ms(self) -> float:
        return statistics.stdev(self.times) * 1e3 if len(self.times) > 1 else 0.0


@dataclass
class FlowRow:
    flow: str
    secrow: Sample | None
    baseline: Sample | None
    ops: dict[str, dict[str, dict[str, int]]]


@dataclass
class BenchReport:
    backend: str
    reps: int
    primitives: dict[str, Sample]
    flows: list[FlowRow]

    def to_json(self) -> dict:
        def cell(s):
            return None if s is None else {"mean_ms": s.mean_ms, "stdev_ms": s.stdev_ms, "samples": len(s.times)}
        return {
            "backend": self.backend,
            "reps": self.reps,
            "payload_bytes": PAYLOAD,
            "primitives": {k: cell(v) for k, v in self.primitives.items()},
            "flows": [{"flow": r.flow, "secrow": cell(r.secrow), "baseline_trackr": cell(r.baseline),
                       "ops": r.ops} for r in self.flows],
        }

    def render_text(self) -> str:
        out = [f"primitives on {PAYLOAD}-byte payloads, backend {self.backend}, {self.reps} rep(s)", ""]
        out.append(f"{'operation':<20s} {'mean ms':>10s} {'stdev':>10s}")
        for name, s in self.primitives.items():
            out.append(f"{name:<20s} {s.mean_ms:>10.3f} {s.stdev_ms:>10.3f}")
        out += ["", f"{'flow':<26s} {'secrow ms':>12s} {'baseline ms':>12s}"]
        for r in self.flows:
            base = "N/A" if r.baseline is None else f"{r.baseline.mean_ms:.3f}"
            out.append(f"{r.flow:<26s} {r.secrow.mean_ms:>12.3f} {base:>12s}")
        out += ["", "crypto operations per flow and role (energy proxy)"]
        for r in self.flows:
            for system in SYSTEMS:
                roles = r.ops.get(system)
                if roles is None:
                    out.append(f"  {r.flow:<26s} {system:<16s} N/A")
                    continue
                text = "; ".join(f"{role} " + ", ".join(f"{op} {n}" for op, n in sorted(ops.items()))
                                 for role, ops in sorted(roles.items())) or "none"
                out.append(f"  {r.flow:<26s} {system:<16s} {text}")
        return "\n".join(out) + "\n"


def time_primitives(backend_name: str, reps: int, seed: int = 0) -> dict[str, Sample]:
    backend = get_backend(backend_name)
    rng = Drbg(seed).fork("bench-primitives")
    pair = backend.generate_keypair(rng)
    key = backend.generate_symmetric_key(rng)
    payload = rng.bytes(PAYLOAD)
    samples = {name: Sample() for name in ("asym_encrypt", "asym_decrypt", "sym_encrypt", "sym_decrypt",
                                           "sign", "verify")}
    for _ in range(reps):
        t = time.perf_counter()
        ct = backend.asym_encrypt(pair.public, payload, rng)
        samples["asym_encrypt"].add(time.perf_counter() - t)
        t = time.perf_counter()
        backend.asym_decrypt(pair.private, ct)
        samples["asym_decrypt"].add(time.perf_counter() - t)
        t = time.perf_counter()
        ct = backend.sym_encrypt(key, payload, rng)
        samples["sym_encrypt"].add(time.perf_counter() - t)
        t = time.perf_counter()
        backend.sym_decrypt(key, ct)
        samples["sym_decrypt"].add(time.perf_counter() - t)
        t = time.perf_counter()
        sig = backend.sign(pair.private, payload, rng)
        samples["sign"].add(time.perf_counter() - t)
        t = time.perf_counter()
        backend.verify(pair.public, payload, sig)
        samples["verify"].add(time.perf_counter() - t)
    return samples


def _prepared_world(system: str, backend: str, seed, stage: str) -> World:
    """A world with everything up to ``stage`` already done, untimed."""
    world = World(seed, system=system, backend=backend)
    world.add_td("tag")
    owner = world.add_cd("owner")
    world.set_proximity("owner", "tag", True)
    world.run(owner.onboard())
    world.press("tag")
    if stage == "registration":
        return world
    world.run(owner.pair_and_claim("tag"))
    world.run(owner.register_ownership("tag"))
    if stage == "primary":
        return world
    if world.system.supports_primary_commands:
        world.run(owner.primary_command("tag", PrimaryCmd.UpdateLocKey))
    world.set_proximity("owner", "tag", False)
    helper = world.add_cd("helper")
    world.set_proximity("helper", "tag", True)
    world.set_gps("helper", FIX)
    if stage == "update":
        return world
    world.run(helper.update_location("tag"))
    return world


def _flow_specs(world: World, flow: str) -> list:
    owner = world.cds["owner"]
    if flow == "Owner Registration":
        return [owner.pair_and_claim("tag"), owner.register_ownership("tag")]
    if flow == "Primary Owner Operation":
        return [owner.primary_command("tag", PrimaryCmd.UpdateLocKey)]
    if flow == "Location Update":
        return [world.cds["helper"].update_location("tag")]
    return [owner.query_location("tag")]


STAGES = {"Owner Registration": "registration", "Primary Owner Operation": "primary",
          "Location Update": "update", "Location Query": "query"}


def measure_flow(system: str, flow: str, backend: str, reps: int) -> tuple[Sample | None, dict]:
    if system != "secrow" and flow == "Primary Owner Operation":
        return None, None
    sample = Sample()
    ops: Counter = Counter()
    for rep in range(reps):
        world = _prepared_world(system, backend, f"bench/{system}/{flow}/{rep}", STAGES[flow])
        before = Counter(world.ops)
        t = time.perf_counter()
        for spec in _flow_specs(world, flow):
            world.run(spec)
        sample.add(time.perf_counter() - t)
        if rep == 0:
            ops = world.ops - before
    roles: dict[str, dict[str, int]] = {}
    for (role, op), n in sorted(ops.items()):
        roles.setdefault(role, {})[op] = n
    return sample, roles


def run_bench(reps: int = 10, backend: str = "ec") -> BenchReport:
    if reps < 1:
        raise ValueError("reps must be at least 1")
    rows = []
    for flow in FLOWS:
        secrow, secrow_ops = measure_flow("secrow", flow, backend, reps)
        baseline, baseline_ops = measure_flow("baseline_trackr", flow, backend, reps)
        ops = {"secrow": secrow_ops}
        if baseline_ops is not None:
            ops["baseline_trackr"] = baseline_ops
        rows.append(FlowRow(flow, secrow, baseline, ops))
    return BenchReport(backend, reps, time_primitives(backend, reps), rows)
