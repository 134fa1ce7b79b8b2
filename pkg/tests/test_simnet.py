import pytest

from conftest import TRUE_FIX, owned_world
from secrow.core_types import (
    DELIVERED,
    DROPPED,
    DUPLICATED,
    INJECTED,
    MODIFIED,
    Ack,
    RingBegin,
    RingChallenge,
    SignTokenResponse,
    decode_message,
)
from secrow.errors import CapabilityError, ChannelUnavailable, SpoofedEndpoint, Timeout
from secrow.flows import FlowSpec, Send, exchange
from secrow.simnet import AdversaryPolicy, Intervention, World


def test_empty_world_steps_are_noops():
    world = World(0, backend="toy")
    world.tick(50)
    assert world.step == 50 and len(world.transcript) == 0


def test_message_delivered_next_step():
    world = owned_world()
    world.set_proximity("alice", "tag", True)
    flow = world.start(FlowSpec("alice", exchange("tag", RingBegin(world.cds["alice"].public_key)), "x"))
    start = world.step
    world.tick()
    assert world.transcript.entries[-1].step == start + 1
    world.tick()
    assert flow.done and isinstance(flow.result, RingChallenge)
    assert world.step == start + 2


def test_two_message_exchange_takes_queue_depth_steps():
    world = owned_world()
    world.set_proximity("alice", "tag", True)
    start = world.step
    world.run(world.cds["alice"].ring("tag"))
    # four messages, one per step on a single channel
    assert world.step - start == 4


def test_send_while_far_fails_immediately():
    world = owned_world()
    with pytest.raises(ChannelUnavailable):
        world.run(world.cds["alice"].ring("tag"))
    assert world.handler_log[-1][3] is True or not world.audit_proximity()


def test_moving_away_drops_in_flight_messages():
    world = owned_world()
    world.set_proximity("alice", "tag", True)
    flow = world.start(world.cds["alice"].ring("tag"))
    world.set_proximity("alice", "tag", False)
    assert flow.done and isinstance(flow.error, ChannelUnavailable)
    assert DROPPED in world.transcript.entries[-1].flags
    assert not world.audit_proximity()


def test_adversary_drop_times_out():
    world = owned_world()
    world.interpose(AdversaryPolicy({"modify"}, [Intervention.on(RingChallenge, "drop")]))
    world.set_proximity("alice", "tag", True)
    with pytest.raises(Timeout):
        world.run(world.cds["alice"].ring("tag"))
    assert any(DROPPED in e.flags for e in world.transcript)


def test_interventions_need_capabilities():
    world = owned_world()
    with pytest.raises(CapabilityError):
        world.interpose(AdversaryPolicy((), [Intervention.on(RingChallenge, "drop")]))
    with pytest.raises(CapabilityError):
        world.adversary.observed()
    with pytest.raises(CapabilityError):
        world.adversary.rogue_cd("m")
    with pytest.raises(CapabilityError):
        world.adversary.mimic_td("m", "tag")


def test_modify_and_duplicate_are_logged():
    world = owned_world()
    world.interpose(AdversaryPolicy({"modify", "replay"}, [
        Intervention.on(RingBegin, "duplicate", once=True),
        Intervention.on(RingChallenge, "modify", lambda d: d[:-1] + bytes([d[-1] ^ 1]), once=True),
    ]))
    world.set_proximity("alice", "tag", True)
    # the duplicate draws a second challenge, which alice takes for the ring reply
    from secrow.errors import UnexpectedMessage
    with pytest.raises(UnexpectedMessage):
        world.run(world.cds["alice"].ring("tag"))
    flags = [f for e in world.transcript for f in e.flags]
    assert MODIFIED in flags and DUPLICATED in flags


def test_inject_and_replay():
    world = owned_world()
    world.interpose(AdversaryPolicy({"inject", "replay", "snoop_ble"}))
    world.set_proximity("alice", "tag", True)
    alice = world.cds["alice"]
    world.run(world.adversary.inject("alice", "tag", RingBegin(alice.public_key)))
    assert INJECTED in world.transcript.entries[-2].flags
    entry = world.adversary.observed()[-2]
    flow = world.run(world.adversary.replay(entry, "alice", "tag"))
    assert isinstance(flow, RingChallenge)


def test_relaying_through_an_honest_device_is_refused():
    world = owned_world()
    world.set_proximity("alice", "tag", True)
    world.add_cd("eve")

    def relay():
        return (yield Send("tag", Ack(), via="alice"))

    with pytest.raises(CapabilityError):
        world.run(FlowSpec("eve", relay(), "relay"))


def test_ts_channel_is_opaque():
    world = owned_world(update=True)
    adv = world.adversary
    assert adv.read_ts_channel("alice") == []
    sizes = adv.ts_traffic()
    assert sizes and all(isinstance(n, int) for _, _, n in sizes)
    with pytest.raises(SpoofedEndpoint):
        adv.register_ts_endpoint("ts2")


def test_same_seed_same_transcript():
    a = owned_world(seed=9, update=True, backend="ec").transcript_bytes()
    b = owned_world(seed=9, update=True, backend="ec").transcript_bytes()
    c = owned_world(seed=10, update=True, backend="ec").transcript_bytes()
    assert a == b and a != c


def test_transcript_steps_never_decrease():
    world = owned_world(update=True)
    steps = [e.step for e in world.transcript]
    assert steps == sorted(steps)
    for e in world.transcript:
        assert DELIVERED in e.flags or DROPPED in e.flags


def test_no_td_handler_runs_for_far_cd():
    world = owned_world(update=True)
    mallory = world.add_cd("mallory")
    world.set_gps("mallory", TRUE_FIX)
    with pytest.raises(ChannelUnavailable):
        world.run(mallory.update_location("tag"))
    assert world.audit_proximity() == []


def test_duplicate_names_rejected():
    world = owned_world()
    with pytest.raises(ValueError):
        world.add_cd("tag")
    with pytest.raises(ValueError):
        world.add_td("ts")


def test_response_swap_intervention_reaches_flow():
    world = owned_world()
    world.interpose(AdversaryPolicy({"modify"}, [Intervention.on(
        SignTokenResponse, "modify", lambda d: d)]))
    bob = world.add_cd("bob")
    world.set_proximity("bob", "tag", True)
    world.set_gps("bob", TRUE_FIX)
    assert world.run(bob.update_location("tag")) == Ack()
    assert any(MODIFIED in e.flags and isinstance(decode_message(e.data), SignTokenResponse)
               for e in world.transcript)
