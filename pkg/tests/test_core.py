import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specshape.core import (
    ConfigError,
    NetworkConfig,
    PuMode,
    SlotOutcome,
    SuSensingState,
    SuStrategy,
    is_prime_power,
    make_rng,
    sample_arrival,
    sample_arrivals,
    sample_reception,
    sample_receptions,
    validate_config,
)


def test_defaults_accepted():
    cfg = NetworkConfig(num_channels=10, num_receivers=20, batch_size=8, arrival_rate=0.4,
                        erasure_prob=0.2, minislots_per_slot=15, backoff=4)
    assert validate_config(cfg) is cfg


def test_single_channel_tracking_needs_one_channel():
    ok = NetworkConfig(num_channels=1, su_strategy=SuStrategy.SINGLE_CHANNEL)
    assert validate_config(ok) is ok
    with pytest.raises(ConfigError, match="num_channels == 1"):
        validate_config(ok.replace(num_channels=2))


def test_erasure_one_rejected():
    with pytest.raises(ConfigError, match="erasure_prob out of range"):
        validate_config(NetworkConfig(erasure_prob=1.0))


@pytest.mark.parametrize("field,value", [
    ("num_channels", 0), ("num_receivers", 0), ("batch_size", 0), ("minislots_per_slot", 0),
    ("backoff", -1), ("arrival_rate", 1.5), ("arrival_rate", -0.1), ("erasure_prob", -0.01),
    ("field_size", 6), ("field_size", 1), ("batch_size", 2.5), ("num_channels", True),
])
def test_bounds_rejected(field, value):
    with pytest.raises(ConfigError):
        validate_config(NetworkConfig().replace(**{field: value}))


def test_all_violations_reported():
    with pytest.raises(ConfigError) as exc:
        validate_config(NetworkConfig(num_channels=0, erasure_prob=2.0, backoff=-3))
    assert len(exc.value.violations) == 3


def test_prime_powers():
    assert [q for q in range(1, 30) if is_prime_power(q)] == [2, 3, 4, 5, 7, 8, 9, 11, 13, 16, 17, 19, 23, 25, 27, 29]


def test_json_roundtrip():
    cfg = NetworkConfig(num_channels=3, pu_mode=PuMode.ARQ, su_strategy=SuStrategy.ADAPTIVE, backoff=2)
    assert NetworkConfig.from_json(cfg.to_json()) == cfg


def test_from_dict_rejects_unknown_and_bad_enum():
    with pytest.raises(ConfigError, match="unknown key"):
        NetworkConfig.from_dict({"nope": 1})
    with pytest.raises(ConfigError):
        NetworkConfig.from_dict({"pu_mode": "Carrier"})


def test_service_unit():
    assert NetworkConfig(batch_size=5).service_unit == 5
    assert NetworkConfig(batch_size=5, pu_mode=PuMode.ARQ).service_unit == 1


cfg_strategy = st.builds(
    NetworkConfig,
    num_channels=st.integers(1, 30),
    num_receivers=st.integers(1, 50),
    batch_size=st.integers(1, 16),
    arrival_rate=st.floats(0, 1),
    erasure_prob=st.floats(0, 0.99),
    minislots_per_slot=st.integers(1, 40),
    backoff=st.integers(0, 12),
)


@given(cfg_strategy)
def test_validate_idempotent(cfg):
    assert validate_config(validate_config(cfg)) == validate_config(cfg)


# --- sensing state -------------------------------------------------------------


@given(st.lists(st.integers(0, 5), min_size=1, max_size=12))
def test_lists_partition(timers):
    s = SuSensingState(tuple(timers))
    s.check(5)
    assert s.sensing_list | s.backup_list == frozenset(range(len(timers)))
    assert not s.sensing_list & s.backup_list
    assert s.list_size == len(s.sensing_list)


def test_check_flags_timer_out_of_range():
    with pytest.raises(AssertionError):
        SuSensingState((0, 3)).check(2)


def test_slot_outcome_tx():
    assert SlotOutcome(3, True, 15).tx_minislots == 12
    assert SlotOutcome(3, False, 15).tx_minislots == 0


# --- sampling ----------------------------------------------------------------


def test_degenerate_arrival_rates():
    rng = make_rng(1)
    assert all(sample_arrival(0.0, rng) == 0 for _ in range(1000))
    assert all(sample_arrival(1.0, rng) == 1 for _ in range(1000))


def test_arrival_mean():
    n = 10**6
    x = sample_arrivals(0.4, n, make_rng(2))
    assert abs(x.mean() - 0.4) < 3 * math.sqrt(0.24 / n)
    # the scalar path draws from the same distribution
    rng = make_rng(3)
    s = sum(sample_arrival(0.4, rng) for _ in range(20000))
    assert abs(s / 20000 - 0.4) < 4 * math.sqrt(0.24 / 20000)


def test_lossless_reception():
    assert sample_reception(0.0, 7, make_rng(0)).all()


def test_reception_fraction():
    n = 10**6
    x = sample_receptions(0.5, n, make_rng(4))
    assert abs(x.mean() - 0.5) < 3 * math.sqrt(0.25 / n)


def test_reception_independence():
    n = 200_000
    x = sample_receptions(0.9, (n, 3), make_rng(5)).astype(float)
    assert np.all(np.abs(x.mean(axis=0) - 0.1) < 3 * math.sqrt(0.09 / n))
    c = np.corrcoef(x.T)
    # sample correlation of independent columns has se about 1/sqrt(n)
    assert np.all(np.abs(c[np.triu_indices(3, 1)]) < 3 / math.sqrt(n))


@settings(max_examples=25)
@given(st.integers(0, 2**64 - 1))
def test_sampling_reproducible(seed):
    a = sample_receptions(0.3, (50, 4), make_rng(seed))
    b = sample_receptions(0.3, (50, 4), make_rng(seed))
    assert np.array_equal(a, b)
    r1, r2 = make_rng(seed), make_rng(seed)
    assert [sample_arrival(0.5, r1) for _ in range(20)] == [sample_arrival(0.5, r2) for _ in range(20)]
