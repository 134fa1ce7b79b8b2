"""End-to-end acceptance checks, one test per criterion."""

import time

import pytest

from conftest import TRUE_FIX, owned_world
from secrow.bench import FLOWS, run_bench
from secrow.communication_device import SignedLocation
from secrow.core_types import (
    AttestedLocationUpdate,
    CommitOwner,
    Err,
    LocationFix,
    PairingProof,
    PrimaryCmd,
    PrimaryCmdRequest,
    decode_message,
    derive_trackerid,
)
from secrow.crypto import get_backend
from secrow.defenses import KNOB_CONDITIONS, Defenses
from secrow.errors import AuthFailure, ChannelUnavailable, SecrowError
from secrow.flows import FlowSpec
from secrow.harness import SystemUnderTest, run_attack, verify
from secrow.harness.attacks import forged_update_flow
from secrow.rng import Drbg
from secrow.scenario import bundled_names, load, run_scenario, write_outputs
from secrow.simnet import World
from secrow.tracking_device import location_claim

TRIALS = 100
BASELINE_ROW = {"C1", "C3", "C4", "C5", "C6", "C7"}


@pytest.mark.criterion(1, "verify reproduces the property matrix for both systems in under 60 s")
def test_criterion_1_property_matrix():
    start = time.perf_counter()
    secure = verify("secrow")
    baseline = verify("baseline_trackr")
    elapsed = time.perf_counter() - start
    assert not secure.violated
    assert all(p.holds for p in secure.properties.values())
    assert {c.value for c in baseline.violated} == BASELINE_ROW
    failed = {p.value: {c.value for c in v.failed_conditions} for p, v in baseline.properties.items()}
    assert failed == {"TD_S1": {"C1"}, "TD_S2": {"C3", "C4"}, "CD_S1": {"C5"}, "TS_S1": {"C6", "C7"}}
    assert elapsed < 60


@pytest.mark.criterion(2, "trackerid vector")
def test_criterion_2_trackerid():
    assert derive_trackerid("00:1B:44:11:3A:B7") == "0000b73a-11441b00"


REPLAYS = {
    "replay_pairing_proof": PairingProof,
    "replay_primary_cmd": PrimaryCmdRequest,
    "replay_owner_proof": CommitOwner,
    "replay_proximity_proof": AttestedLocationUpdate,
}


def _replies_to(entries, msg_type):
    """The reply that followed each attacker-sent message of ``msg_type``."""
    out = []
    for i, e in enumerate(entries):
        if e.data and e.data[0] == msg_type.TAG:
            reply = next((r for r in entries[i + 1:] if r.channel == e.channel and r.sender == e.receiver), None)
            out.append(reply)
    return out


@pytest.mark.criterion(3, "recorded proofs replayed against SECrow are rejected 100/100")
@pytest.mark.parametrize("attack", sorted(REPLAYS))
def test_criterion_3_replay_resistance(attack):
    rejected = 0
    for seed in range(TRIALS):
        result = run_attack(attack, "secrow", seed)
        replies = _replies_to(result.entries, REPLAYS[attack])
        if (not result.succeeded and replies
                and all(r is not None and isinstance(decode_message(r.data), Err) for r in replies)):
            rejected += 1
    assert rejected == TRIALS


def _c5_world(i: int, near: bool):
    """Randomized world: a few tags and phones, one phone tries to report "tag"."""
    rng = Drbg(f"c5/{i}")
    world = World(f"c5/{i}")
    world.add_td("tag")
    for k in range(rng.randbelow(3)):
        world.add_td(f"other{k}")
    owner = world.add_cd("owner")
    world.set_proximity("owner", "tag", True)
    world.press("tag")
    world.run(owner.pair_and_claim("tag"))
    world.run(owner.primary_command("tag", PrimaryCmd.UpdateLocKey))
    world.set_proximity("owner", "tag", False)
    bystanders = [world.add_cd(f"cd{k}") for k in range(rng.randbelow(4))]
    for cd in bystanders:
        for td in sorted(world.tds):
            if td != "tag" and rng.randbelow(2):
                world.set_proximity(cd.name, td, True)
    updater = world.add_cd("updater")
    world.set_gps("updater", LocationFix.from_degrees(rng.randbelow(180) - 90, rng.randbelow(360) - 180))
    if near:
        world.set_proximity("updater", "tag", True)
    return world, updater, rng


@pytest.mark.criterion(4, "no TS write from out of range (1000 worlds, 50 Sybils), all succeed in range")
def test_criterion_4_proximity():
    far_writes = near_ok = 0
    for i in range(1000):
        world, updater, rng = _c5_world(i, near=False)
        spec = updater.update_location("tag") if i % 2 else \
            FlowSpec("updater", forged_update_flow(updater, "tag", rng), "forged")
        try:
            world.run(spec)
        except SecrowError:
            pass
        far_writes += len(world.ts.write_log)
        assert world.audit_proximity() == []

        world, updater, _ = _c5_world(i, near=True)
        try:
            world.run(updater.update_location("tag"))
        except SecrowError:
            continue
        near_ok += len(world.ts.write_log) == 1
    assert far_writes == 0
    assert near_ok == 1000
    sybil = run_attack("sybil_far_update", "secrow", 0)
    assert not sybil.succeeded and sybil.detail.startswith("0 store writes")


@pytest.mark.criterion(5, "breach dump reveals no location; the owner recovers the exact fix")
def test_criterion_5_end_to_end_encryption():
    aead = get_backend("ec")
    for seed in range(TRIALS):
        rng = Drbg(f"e2e/{seed}")
        world = owned_world(seed=f"e2e/{seed}", backend="ec")
        fixes = []
        for k in range(1 + rng.randbelow(3)):
            cd = world.add_cd(f"helper{k}")
            fix = LocationFix.from_degrees(rng.randbelow(180) - 90, rng.randbelow(360) - 180, 100 + k)
            world.set_gps(cd.name, fix)
            world.set_proximity(cd.name, "tag", True)
            world.run(cd.update_location("tag"))
            fixes.append(fix)
        dump = world.ts.breach_dump()
        for fix in fixes:
            assert fix.encode() not in dump
        windows = {dump[i:i + 32] for i in range(len(dump) - 31)}
        for write in world.ts.write_log:
            for key in windows:
                with pytest.raises(AuthFailure):
                    aead.sym_decrypt(key, write.e_l)
        assert world.run(world.cds["alice"].query_location("tag")) == fixes[-1]


@pytest.mark.criterion(6, "a hostile TEE driver never gets a valid L over a fake fix in 10,000 attempts")
def test_criterion_6_location_spoofing():
    world = World("tee", backend="ec")
    cd = world.add_cd("phone")
    world.set_gps("phone", TRUE_FIX)
    backend, rng = cd.backend, Drbg("hostile-driver")
    forged = 0
    tpk = None
    for attempt in range(10_000):
        if attempt % 20 == 0:
            tpk, _ = cd.tee.begin_session()
        fake = LocationFix.from_degrees(rng.randbelow(180) - 90, rng.randbelow(360) - 180, attempt)
        n_c = rng.nonce()
        strategy = attempt % 4
        if strategy == 0:
            e_c = backend.asym_encrypt(tpk, n_c, rng)
        elif strategy == 1:
            # an E_C minted for some other key
            e_c = backend.asym_encrypt(backend.generate_keypair(rng).public, n_c, rng) if attempt % 40 == 1 \
                else rng.bytes(80)
        elif strategy == 2:
            e_c = backend.asym_encrypt(tpk, n_c + b"\x00", rng)
        else:
            e_c = backend.asym_encrypt(tpk, n_c, rng)
        try:
            signed: SignedLocation = cd.tee.sign_location(e_c, location=fake)
        except SecrowError:
            continue
        for claimed in (fake, signed.location):
            if claimed != TRUE_FIX and backend.verify(tpk, location_claim(claimed, signed.n_c), signed.signature):
                forged += 1
    assert forged == 0


@pytest.mark.criterion(7, "update messages carry no CD identifier, account key or session token")
def test_criterion_7_anonymity():
    for seed in range(TRIALS):
        world = owned_world(seed=f"anon/{seed}", backend="ec")
        reporter = world.add_cd("reporter")
        world.run(reporter.onboard())
        world.set_gps("reporter", TRUE_FIX)
        world.set_proximity("reporter", "tag", True)
        flow = world.start(reporter.update_location("tag"))
        world.run(flow)
        secrets = [reporter.id.value, reporter.id.encode(), reporter.public_key, reporter.session]
        entries = world.transcript.since(flow.start_index)
        assert entries
        for entry in entries:
            for secret in secrets:
                assert secret not in entry.data


@pytest.mark.criterion(8, "identical seeds give byte-identical transcripts and reports")
def test_criterion_8_determinism(tmp_path):
    def corpus(out):
        files = {}
        for name in bundled_names():
            for seed in (0, 1, 2**63):
                for system in (None, "baseline_trackr"):
                    paths = write_outputs(run_scenario(load(name), seed, system), out)
                    files.update({p.name: p.read_bytes() for p in paths.values()})
        for sut in ("secrow", "baseline_trackr"):
            report = verify(sut, witness_dir=out / "witnesses")
            files[f"{sut}.txt"] = report.render_text().encode()
        for p in (out / "witnesses").iterdir():
            files[p.name] = p.read_bytes()
        return files

    first, second = corpus(tmp_path / "a"), corpus(tmp_path / "b")
    assert first.keys() == second.keys()
    for name in first:
        # witness paths inside reports name their own directory
        assert first[name].replace(b"/a/", b"/x/") == second[name].replace(b"/b/", b"/x/"), name


@pytest.mark.criterion(9, "bench has four flow rows, N/A for the baseline primary operation, SECrow slower")
def test_criterion_9_bench():
    report = run_bench(10)
    assert [r.flow for r in report.flows] == list(FLOWS)
    rows = {r.flow: r for r in report.flows}
    assert rows["Primary Owner Operation"].baseline is None
    assert "N/A" in report.render_text()
    for flow in ("Owner Registration", "Location Update", "Location Query"):
        assert rows[flow].secrow.mean_ms > rows[flow].baseline.mean_ms, flow
    assert rows["Primary Owner Operation"].secrow.mean_ms > 0


@pytest.mark.criterion(10, "each defense knob flips exactly its mapped condition")
@pytest.mark.parametrize("knob", Defenses.knobs())
def test_criterion_10_knob_soundness(knob):
    report = verify(SystemUnderTest("secrow").with_disabled(knob))
    assert {c.value for c in report.violated} == {KNOB_CONDITIONS[knob]}
