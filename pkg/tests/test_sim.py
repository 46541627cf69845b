import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specshape.analysis import pu
from specshape.analysis.joint_chain import solve_joint_chain
from specshape.core import NetworkConfig, PuMode, SuSensingState, SuStrategy
from specshape.rlnc import GaloisField
from specshape.sim import engine, kernels
from specshape.sim.engine import SimParams, run_experiment, run_pu_channel, run_trial, simulate_iid_channels
from specshape.sim.payload import run_pu_channel_coded

ADAPT = SuStrategy.ADAPTIVE


def runs_of(mask):
    """(start, length) of each maximal True run."""
    x = np.concatenate([[0], mask.astype(np.int8), [0]])
    d = np.diff(x)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return list(zip(starts, ends - starts))


# --- step-level API ------------------------------------------------------------


def test_random_step_all_idle_all_busy():
    rng = np.random.default_rng(0)
    out = engine.su_step_random([False] * 5, 15, rng)
    assert (out.sensed_count, out.success, out.tx_minislots) == (1, True, 14)
    out = engine.su_step_random([True] * 5, 15, rng)
    assert (out.sensed_count, out.success, out.tx_minislots) == (5, False, 0)
    out = engine.su_step_random([True] * 5, 3, rng)
    assert out.sensed_count == 3 and not out.success


def test_random_step_mean_reward():
    rng = np.random.default_rng(1)
    n = 10**6
    busy = rng.random((n, 2)) < 0.5
    a = engine.SuAgent(NetworkConfig(num_channels=2, minislots_per_slot=4), rng)
    d, ok, *_ = a.step(busy)
    reward = (4 - d) * ok
    assert abs(reward.mean() - 2.0) < 3 * reward.std() / math.sqrt(n)


def test_adaptive_step_k0_matches_random():
    r1, r2 = np.random.default_rng(7), np.random.default_rng(7)
    busy_rng = np.random.default_rng(8)
    state = SuSensingState.fresh(6)
    for _ in range(500):
        busy = busy_rng.random(6) < 0.6
        a, state = engine.su_step_adaptive(state, busy, 4, 0, r1)
        b = engine.su_step_random(busy, 4, r2)
        assert a == b
        assert state.timers == (0,) * 6


def test_adaptive_step_empty_list():
    state = SuSensingState((2, 1, 3))
    out, nxt = engine.su_step_adaptive(state, [True, True, True], 15, 3, np.random.default_rng(0))
    assert (out.sensed_count, out.success) == (3, False)
    assert nxt.timers == (1, 0, 2)


def test_adaptive_timer_semantics():
    # a channel sensed busy in stage one stays off the list for exactly k
    # slot boundaries unless a stage-two idle observation clears it
    k, N = 3, 4
    rng = np.random.default_rng(3)
    state = SuSensingState.fresh(N)
    off_since = {}
    for t in range(5000):
        busy = rng.random(N) < 0.55
        out, nxt = engine.su_step_adaptive(state, busy, 2, k, rng)
        nxt.check(k)
        assert nxt.list_size + len(nxt.backup_list) == N
        for j in range(N):
            if state.timers[j] == 0 and nxt.timers[j] == k:
                off_since[j] = t
            elif j in off_since and nxt.timers[j] == 0:
                if out.success and out.channel == j:
                    off_since.pop(j)  # cleared by stage two
                else:
                    assert t - off_since.pop(j) == k
        state = nxt


def test_adaptive_pi0_vs_joint_chain():
    exact = solve_joint_chain(0.5, 2, 4, 1).pi0
    cfg = NetworkConfig(num_channels=2, minislots_per_slot=4, backoff=1, su_strategy=ADAPT)
    seeds = np.random.SeedSequence(11).spawn(20)
    est = np.array([run_trial(cfg, 50_000, 0, s, source=0.5).timer_zero / (50_000 * 2) for s in seeds])
    assert abs(est.mean() - exact) < 3 * est.std(ddof=1) / math.sqrt(len(est))


def test_single_channel_examples():
    rng = np.random.default_rng(0)
    c = 0
    for _ in range(20):
        out, c = engine.su_step_single_channel(c, False, 15, 4, rng)
        assert out.tx_minislots == 14 and c == 0
    sensed_at = []
    for t in range(40):
        out, c = engine.su_step_single_channel(c, True, 15, 4, rng)
        if out.sensed_count:
            sensed_at.append(t)
        assert not out.success
    assert np.all(np.diff(sensed_at) == 5)


def test_single_channel_no_mid_batch_resensing():
    cfg = NetworkConfig(num_channels=1, num_receivers=1, batch_size=4, arrival_rate=0.2, erasure_prob=0.0,
                        su_strategy=SuStrategy.SINGLE_CHANNEL)
    tr = run_trial(cfg, 20_000, 0, np.random.SeedSequence(5), record_trace=True).trace
    busy = tr["busy"][:, 0]
    busy_sensed = tr["sensed"][:, 0] == kernels.SENSED_BUSY
    checked = 0
    for start, length in runs_of(busy):
        assert length % 4 == 0 or start + length == len(busy)
        for b in range(start, start + length, 4):
            assert busy_sensed[b : b + 4].sum() <= 1
            checked += 1
    assert checked > 500


# --- PU channel ----------------------------------------------------------------


def test_pu_channel_degenerate():
    run = run_pu_channel(NetworkConfig(arrival_rate=0.0), 5000)
    assert run.idle_prob_hat == 1.0
    run = run_pu_channel(NetworkConfig(arrival_rate=1.0, batch_size=1, erasure_prob=0.0, num_receivers=7), 5000)
    assert run.idle_prob_hat == 0.0 and run.throughput_hat == 1.0


def test_pu_channel_matches_analysis():
    cfg = NetworkConfig(batch_size=8, num_receivers=20, arrival_rate=0.4, erasure_prob=0.2)
    run = run_pu_channel(cfg, 10**6, rng=2)
    assert abs(run.idle_prob_hat - pu.idle_probability(cfg)) < 3 * run.idle_prob_se
    assert run.queue_stable


def test_busy_periods_at_least_m():
    cfg = NetworkConfig(batch_size=6, num_receivers=5, arrival_rate=0.3, erasure_prob=0.2)
    run = run_pu_channel(cfg, 50_000, warmup=0, rng=4)
    lengths = [n for s, n in runs_of(run.busy) if s + n < len(run.busy)]
    assert lengths and min(lengths) >= 6


def test_completion_time_sampler():
    t = engine.sample_batch_completion_times(8, 20, 0.2, 200_000, 0)
    assert t.min() >= 8
    et = pu.expected_completion_time_nc(8, 20, 0.2)
    assert abs(t.mean() - et) < 3 * t.std() / math.sqrt(len(t))


# --- whole-system runs -----------------------------------------------------------


def test_conservation_every_slot():
    for mode in PuMode:
        cfg = NetworkConfig(num_channels=3, num_receivers=4, batch_size=3, arrival_rate=0.25, pu_mode=mode)
        res = run_trial(cfg, 3000, 300, np.random.SeedSequence(1), chunk=1)
        assert res.conserved


def test_zero_load():
    cfg = NetworkConfig(arrival_rate=0.0, su_strategy=ADAPT)
    rep = run_experiment(SimParams(cfg, 5000, seed=3))
    assert rep.su_throughput_hat == cfg.minislots_per_slot - 1
    assert rep.su_success_prob_hat == 1.0


def test_deterministic_report():
    p = SimParams(NetworkConfig(su_strategy=ADAPT, batch_size=5), 20_000, seed=42, trials=2)
    a, b = run_experiment(p), run_experiment(p)
    assert engine.report_row(a) == engine.report_row(b)
    assert np.array_equal(a.list_size_hist, b.list_size_hist)


@pytest.mark.skipif(kernels.pu_chunk_numba is None, reason="numba not installed")
@pytest.mark.parametrize("strategy", list(SuStrategy))
def test_numba_and_fallback_identical(strategy):
    n = 1 if strategy is SuStrategy.SINGLE_CHANNEL else 6
    cfg = NetworkConfig(num_channels=n, batch_size=3, num_receivers=5, arrival_rate=0.2, backoff=2,
                        minislots_per_slot=4, su_strategy=strategy)
    ss = np.random.SeedSequence(9)
    fast = run_trial(cfg, 5000, 500, ss, record_trace=True, pu_kernel=kernels.pu_chunk_numba,
                     su_kernel=kernels.su_chunk_numba)
    for pk in (kernels.pu_chunk_numpy, kernels.pu_chunk_python):
        slow = run_trial(cfg, 5000, 500, ss, record_trace=True, pu_kernel=pk, su_kernel=kernels.su_chunk_python)
        for key in fast.trace:
            assert np.array_equal(fast.trace[key], slow.trace[key]), key
        assert (fast.success, fast.cost, fast.reward) == (slow.success, slow.cost, slow.reward)


def test_k0_trace_identical_to_random():
    base = NetworkConfig(num_channels=8, batch_size=4, backoff=0, minislots_per_slot=5)
    ss = np.random.SeedSequence(17)
    a = run_trial(base.replace(su_strategy=ADAPT), 8000, 0, ss, record_trace=True).trace
    b = run_trial(base, 8000, 0, ss, record_trace=True).trace
    for key in a:
        assert np.array_equal(a[key], b[key]), key


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 4), st.sampled_from(list(SuStrategy)),
       st.floats(0.0, 0.3), st.integers(0, 2**32))
def test_sample_path_identity(N, B, k, strategy, lam, seed):
    if strategy is SuStrategy.SINGLE_CHANNEL:
        N = 1
    cfg = NetworkConfig(num_channels=N, minislots_per_slot=B, backoff=k, su_strategy=strategy, batch_size=2,
                        num_receivers=3, arrival_rate=lam)
    rep = run_experiment(SimParams(cfg, 3000, seed=seed))
    t = rep.totals
    assert t["reward"] == B * t["success"] - t["cost"]
    assert rep.su_throughput_hat == t["reward"] / t["slots"]
    assert abs(rep.identity_gap()) < 1e-12
    assert 0 <= rep.su_success_prob_hat <= 1 and 0 <= rep.pu_idle_prob_hat <= 1
    assert rep.list_size_hist.sum() == pytest.approx(1.0)


def test_standard_error_scaling():
    cfg = NetworkConfig(num_channels=4, minislots_per_slot=6)
    se1 = simulate_iid_channels(cfg, 0.4, 40_000, seed=1, trials=8, n_batches=100).su_throughput_se
    se2 = simulate_iid_channels(cfg, 0.4, 80_000, seed=1, trials=8, n_batches=100).su_throughput_se
    assert 1.2 <= se1 / se2 <= 2.8


def test_warmup_validation():
    with pytest.raises(ValueError):
        SimParams(NetworkConfig(), 100, warmup=100)


# --- payload-level PU ----------------------------------------------------------


def test_coded_payload_channel():
    cfg = NetworkConfig(batch_size=4, num_receivers=5, arrival_rate=0.3, erasure_prob=0.2)
    big = run_pu_channel_coded(cfg, 4000, rng=1, field=GaloisField(8))
    assert big.decode_errors == 0 and len(big.completion_times) > 50
    small = run_pu_channel_coded(cfg, 4000, rng=1, field=GaloisField(1))
    assert small.decode_errors == 0
    # binary coefficients waste receptions, large fields almost never do
    assert small.non_innovative / small.receptions > big.non_innovative / big.receptions
    arq = run_pu_channel_coded(cfg.replace(pu_mode=PuMode.ARQ, arrival_rate=0.2), 4000, rng=1)
    assert arq.completion_times.min() >= 1 and arq.receptions == 0
