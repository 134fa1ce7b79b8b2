import pytest
from hypothesis import given
from hypothesis import strategies as st

from secrow.defenses import KNOB_CONDITIONS, Defenses
from secrow.ratelimit import TokenBucket
from secrow.rng import Drbg


def test_bucket_allows_capacity_then_refuses():
    bucket = TokenBucket(100, 1000)
    assert all(bucket.allow(0) for _ in range(100))
    assert not bucket.allow(0)


def test_bucket_refills_proportionally():
    bucket = TokenBucket(100, 1000)
    for _ in range(100):
        bucket.allow(0)
    assert not bucket.allow(9)
    assert bucket.allow(10)
    assert bucket.tokens(1000) == 99.0
    assert bucket.tokens(10_000) == 100.0


@given(st.lists(st.integers(0, 50), max_size=300))
def test_bucket_never_exceeds_rate(gaps):
    bucket = TokenBucket(10, 100)
    now, granted = 0, []
    for gap in gaps:
        now += gap
        if bucket.allow(now):
            granted.append(now)
    # any window of 100 steps sees at most capacity + refill
    for i, t in enumerate(granted):
        in_window = sum(1 for u in granted[i:] if u < t + 100)
        assert in_window <= 20


def test_bucket_rejects_bad_config():
    with pytest.raises(ValueError):
        TokenBucket(0, 10)


def test_drbg_is_reproducible_and_forks_independently():
    a, b = Drbg(5), Drbg(5)
    assert a.bytes(40) == b.bytes(40)
    assert Drbg(5).fork("x").bytes(8) == Drbg(5).fork("x").bytes(8)
    assert Drbg(5).fork("x").bytes(8) != Drbg(5).fork("y").bytes(8)
    assert Drbg("s").bytes(8) != Drbg(b"t").bytes(8)


@given(st.integers(1, 10**6))
def test_randbelow_in_range(n):
    assert 0 <= Drbg(n).randbelow(n) < n


def test_nonce_is_nonzero():
    assert any(Drbg(0).nonce())


def test_defenses_default_on():
    d = Defenses()
    assert d.disabled == ()
    assert d.disable("ts_keep_consumed_grants").disabled == ("ts_keep_consumed_grants",)
    with pytest.raises(ValueError):
        d.disable("no_such_knob")


def test_knob_map_covers_every_knob_once():
    assert tuple(KNOB_CONDITIONS) == Defenses.knobs()
    assert len(set(KNOB_CONDITIONS.values())) == len(KNOB_CONDITIONS)
