"""Slotted Monte-Carlo runs of N PU subnetworks and one sensing SU.

Slot order: PU arrivals, batch-start decisions, PU transmission and
receptions, then the SU senses against this slot's busy flags and finally
decrements its timers. The SU never touches PU state.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .. import core
from ..analysis.pu import stable_throughput
from ..core import NetworkConfig, PuMode, SuStrategy, validate_config
from . import kernels

STRATEGY_CODES = {
    SuStrategy.RANDOM: kernels.RANDOM,
    SuStrategy.ADAPTIVE: kernels.ADAPTIVE,
    SuStrategy.SINGLE_CHANNEL: kernels.SINGLE_CHANNEL,
}

DEFAULT_CHUNK = 4096


@dataclass(frozen=True)
class SimParams:
    cfg: NetworkConfig
    horizon: int
    warmup: int | None = None
    seed: int = 0
    trials: int = 1
    n_batches: int = 20

    def __post_init__(self):
        validate_config(self.cfg)
        if self.warmup is None:
            object.__setattr__(self, "warmup", self.horizon // 10)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.warmup < 0 or self.horizon <= self.warmup:
            raise ValueError(f"horizon ({self.horizon}) must exceed warmup ({self.warmup})")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n_batches < 2 or self.horizon - self.warmup < self.n_batches:
            raise ValueError("need at least 2 batches with one slot each")

    @property
    def measured_slots(self) -> int:
        return self.horizon - self.warmup


@dataclass
class TrialResult:
    """Raw integer sums from one replication, post warmup."""

    slots: int
    success: int
    cost: int  # sum of D_t * 1_t
    reward: int  # sum of (B - D_t) * 1_t
    idle_per_channel: np.ndarray
    delivered_per_channel: np.ndarray
    timer_zero: int
    list_size_counts: np.ndarray
    max_queue: int
    conserved: bool
    batch_success: np.ndarray
    batch_cost: np.ndarray
    batch_reward: np.ndarray
    batch_idle: np.ndarray
    trace: dict | None = None


@dataclass
class SimReport:
    params: SimParams
    pu_idle_prob_hat: float
    pu_idle_prob_se: float
    pu_idle_per_channel: np.ndarray
    pu_throughput_hat: float
    su_success_prob_hat: float
    su_success_prob_se: float
    su_sensing_cost_hat: float
    su_sensing_cost_se: float
    su_throughput_hat: float
    su_throughput_se: float
    list_size_hist: np.ndarray
    pi0_hat: float
    queue_stable: bool
    conserved: bool
    totals: dict = field(default_factory=dict)
    trials: list = field(default_factory=list, repr=False)

    def identity_gap(self) -> float:
        """eta_s_hat - (B p_r_hat - cost_hat); zero up to rounding."""
        B = self.params.cfg.minislots_per_slot
        return self.su_throughput_hat - (B * self.su_success_prob_hat - self.su_sensing_cost_hat)


class PuSource:
    """Busy flags produced by the N simulated PU queues."""

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator, kernel=None):
        self.cfg = cfg
        self.rng = rng
        self.kernel = kernel or kernels.pu_chunk
        N, L = cfg.num_channels, cfg.num_receivers
        self.unit = cfg.service_unit
        self.queue = np.zeros(N, dtype=np.int64)
        self.serving = np.zeros(N, dtype=np.bool_)
        self.counts = np.zeros((N, L), dtype=np.int64)
        self.delivered = np.zeros(N, dtype=np.int64)
        self.arrived = np.zeros(N, dtype=np.int64)

    def next(self, T):
        cfg = self.cfg
        N, L = cfg.num_channels, cfg.num_receivers
        arrivals = core.sample_arrivals(cfg.arrival_rate, (T, N), self.rng)
        receptions = core.sample_receptions(cfg.erasure_prob, (T, N, L), self.rng)
        busy = np.empty((T, N), dtype=np.bool_)
        queue_out = np.empty((T, N), dtype=np.int64)
        self.kernel(arrivals, receptions, self.unit, self.queue, self.serving, self.counts,
                    self.delivered, busy, queue_out)
        self.arrived += arrivals.sum(axis=0, dtype=np.int64)
        return busy, queue_out

    def in_service(self):
        return self.serving.astype(np.int64) * self.unit

    def conserved(self) -> bool:
        return bool(np.all(self.delivered + self.queue + self.in_service() == self.arrived))


class IidSource:
    """Channels busy independently each slot with probability 1 - p_idle."""

    def __init__(self, p_idle: float, n_channels: int, rng: np.random.Generator):
        self.p_idle = p_idle
        self.n = n_channels
        self.rng = rng
        self.delivered = np.zeros(n_channels, dtype=np.int64)
        self.queue = np.zeros(n_channels, dtype=np.int64)

    def next(self, T):
        busy = self.rng.random((T, self.n)) >= self.p_idle
        return busy, np.zeros((T, self.n), dtype=np.int64)

    def conserved(self) -> bool:
        return True


class SuAgent:
    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator, kernel=None):
        self.cfg = cfg
        self.rng = rng
        self.kernel = kernel or kernels.su_chunk
        self.strategy = STRATEGY_CODES[cfg.su_strategy]
        self.timers = np.zeros(cfg.num_channels, dtype=np.int64)
        self.counter = np.zeros(1, dtype=np.int64)

    def step(self, busy):
        cfg = self.cfg
        T, N = busy.shape
        S = min(N, cfg.minislots_per_slot)
        u = self.rng.random((T, S))
        d = np.empty(T, dtype=np.int64)
        ok = np.empty(T, dtype=np.bool_)
        ch = np.empty(T, dtype=np.int64)
        listed = np.empty(T, dtype=np.int64)
        sensed = np.empty((T, N), dtype=np.int8)
        self.kernel(busy, u, self.strategy, cfg.minislots_per_slot, cfg.backoff, cfg.batch_size,
                    self.timers, self.counter, d, ok, ch, listed, sensed)
        return d, ok, ch, listed, sensed


def _batch_sums(x, n_batches):
    edges = np.linspace(0, len(x), n_batches + 1).astype(np.int64)
    return np.add.reduceat(x, edges[:-1]), np.diff(edges)


def divergence_threshold(cfg: NetworkConfig) -> float:
    unit = cfg.service_unit
    et, _ = stable_throughput(cfg)
    busy_frac = cfg.arrival_rate * et / unit
    return 100.0 * max(unit, 1) / max(busy_frac, 1e-3)


def run_trial(cfg: NetworkConfig, horizon: int, warmup: int, seed_seq: np.random.SeedSequence,
              n_batches: int = 20, chunk: int = DEFAULT_CHUNK, source: str | float = "pu",
              record_trace: bool = False, pu_kernel=None, su_kernel=None) -> TrialResult:
    """One replication. ``source`` is "pu" or an idle probability for i.i.d. channels."""
    # children derived without spawn(), which would mutate seed_seq
    pu_seed, su_seed = (
        np.random.SeedSequence(seed_seq.entropy, spawn_key=(*seed_seq.spawn_key, i), pool_size=seed_seq.pool_size)
        for i in range(2)
    )
    N, B = cfg.num_channels, cfg.minislots_per_slot
    if source == "pu":
        src = PuSource(cfg, np.random.default_rng(pu_seed), pu_kernel)
    else:
        src = IidSource(float(source), N, np.random.default_rng(pu_seed))
    agent = SuAgent(cfg, np.random.default_rng(su_seed), su_kernel)

    m_slots = horizon - warmup
    succ_all = np.empty(m_slots, dtype=np.int64)
    cost_all = np.empty(m_slots, dtype=np.int64)
    idle_all = np.empty(m_slots, dtype=np.int64)
    idle_per_channel = np.zeros(N, dtype=np.int64)
    list_counts = np.zeros(N + 1, dtype=np.int64)
    timer_zero = 0
    delivered_at_warmup = np.zeros(N, dtype=np.int64)
    conserved = True
    max_queue = 0
    trace = {"busy": [], "sensed": [], "d": [], "success": [], "channel": [], "queue": []} if record_trace else None

    t0 = 0
    while t0 < horizon:
        # split chunks at the warmup edge so delivered counts can be snapshotted
        end = min(t0 + chunk, horizon)
        if t0 < warmup < end:
            end = warmup
        T = end - t0
        busy, queue_out = src.next(T)
        d, ok, ch, listed, sensed = agent.step(busy)
        conserved &= src.conserved()
        if T:
            max_queue = max(max_queue, int(queue_out[-1].max()))
        if trace is not None:
            trace["busy"].append(busy)
            trace["sensed"].append(sensed)
            trace["d"].append(d)
            trace["success"].append(ok)
            trace["channel"].append(ch)
            trace["queue"].append(queue_out)
        if end == warmup:
            delivered_at_warmup = src.delivered.copy()
        if end > warmup:
            lo = max(warmup - t0, 0)
            sl = slice(lo, T)
            dst = slice(t0 + lo - warmup, end - warmup)
            s = ok[sl].astype(np.int64)
            succ_all[dst] = s
            cost_all[dst] = d[sl] * s
            idle = ~busy[sl]
            idle_all[dst] = idle.sum(axis=1)
            idle_per_channel += idle.sum(axis=0)
            list_counts += np.bincount(listed[sl], minlength=N + 1)[: N + 1]
            timer_zero += int(listed[sl].sum())
        t0 = end
    if warmup == 0:
        delivered_at_warmup = np.zeros(N, dtype=np.int64)

    success = int(succ_all.sum())
    cost = int(cost_all.sum())
    reward = B * success - cost
    bs, _ = _batch_sums(succ_all, n_batches)
    bc, _ = _batch_sums(cost_all, n_batches)
    bi, sizes = _batch_sums(idle_all, n_batches)
    if trace is not None:
        trace = {key: np.concatenate(v) for key, v in trace.items()}
    return TrialResult(
        slots=m_slots,
        success=success,
        cost=cost,
        reward=reward,
        idle_per_channel=idle_per_channel,
        delivered_per_channel=src.delivered - delivered_at_warmup,
        timer_zero=timer_zero,
        list_size_counts=list_counts,
        max_queue=max_queue,
        conserved=conserved,
        batch_success=bs / sizes,
        batch_cost=bc / sizes,
        batch_reward=(B * bs - bc) / sizes,
        batch_idle=bi / (sizes * N),
        trace=trace,
    )


def _se(batch_means):
    x = np.asarray(batch_means, dtype=float)
    if len(x) < 2:
        return math.nan
    return float(x.std(ddof=1) / math.sqrt(len(x)))


def aggregate(params: SimParams, results: list[TrialResult], threshold: float | None = None) -> SimReport:
    cfg = params.cfg
    N, B = cfg.num_channels, cfg.minislots_per_slot
    slots = sum(r.slots for r in results)
    success = sum(r.success for r in results)
    cost = sum(r.cost for r in results)
    reward = sum(r.reward for r in results)
    assert reward == B * success - cost
    idle_pc = sum(r.idle_per_channel for r in results)
    delivered = sum(r.delivered_per_channel for r in results)
    lists = sum(r.list_size_counts for r in results)
    cat = lambda name: np.concatenate([getattr(r, name) for r in results])  # noqa: E731
    if threshold is None:
        try:
            threshold = divergence_threshold(cfg)
        except ValueError:
            threshold = math.inf
    max_queue = max(r.max_queue for r in results)
    return SimReport(
        params=params,
        pu_idle_prob_hat=float(idle_pc.sum() / (slots * N)),
        pu_idle_prob_se=_se(cat("batch_idle")),
        pu_idle_per_channel=idle_pc / slots,
        pu_throughput_hat=float(delivered.sum() / (slots * N)),
        su_success_prob_hat=success / slots,
        su_success_prob_se=_se(cat("batch_success")),
        su_sensing_cost_hat=cost / slots,
        su_sensing_cost_se=_se(cat("batch_cost")),
        su_throughput_hat=reward / slots,
        su_throughput_se=_se(cat("batch_reward")),
        list_size_hist=lists / lists.sum(),
        pi0_hat=float(sum(r.timer_zero for r in results) / (slots * N)),
        queue_stable=max_queue <= threshold,
        conserved=all(r.conserved for r in results),
        totals={"slots": slots, "success": success, "cost": cost, "reward": reward, "max_queue": max_queue},
        trials=results,
    )


def run_experiment(params: SimParams, source: str | float = "pu", record_trace: bool = False,
                   chunk: int = DEFAULT_CHUNK, pu_kernel=None, su_kernel=None) -> SimReport:
    """Independent replications with seeds spawned from ``params.seed``."""
    seeds = np.random.SeedSequence(params.seed).spawn(params.trials)
    results = [
        run_trial(params.cfg, params.horizon, params.warmup, s, params.n_batches, chunk, source,
                  record_trace, pu_kernel, su_kernel)
        for s in seeds
    ]
    return aggregate(params, results, threshold=None if source == "pu" else math.inf)


def simulate_iid_channels(cfg: NetworkConfig, p_idle: float, horizon: int, warmup: int = 0,
                          seed: int = 0, trials: int = 1, n_batches: int = 20) -> SimReport:
    """SU alone against channels that are idle i.i.d. per slot with ``p_idle``."""
    params = SimParams(cfg, horizon, warmup, seed, trials, n_batches)
    return run_experiment(params, source=p_idle)


# --- single PU channel ---------------------------------------------------------


@dataclass
class PuChannelRun:
    busy: np.ndarray
    queue: np.ndarray
    idle_prob_hat: float
    idle_prob_se: float
    throughput_hat: float
    delivered: int
    arrived: int
    queue_stable: bool


def run_pu_channel(cfg: NetworkConfig, horizon: int, warmup: int | None = None,
                   rng: np.random.Generator | int | None = 0, n_batches: int = 20,
                   chunk: int = DEFAULT_CHUNK, kernel=None) -> PuChannelRun:
    cfg = dataclasses.replace(cfg, num_channels=1, su_strategy=SuStrategy.RANDOM)
    warmup = horizon // 10 if warmup is None else warmup
    if horizon <= warmup:
        raise ValueError("horizon must exceed warmup")
    src = PuSource(cfg, core.make_rng(rng), kernel)
    busy_parts, queue_parts = [], []
    delivered_at_warmup = 0
    t0 = 0
    while t0 < horizon:
        end = min(t0 + chunk, horizon)
        if t0 < warmup < end:
            end = warmup
        b, q = src.next(end - t0)
        busy_parts.append(b[:, 0])
        queue_parts.append(q[:, 0])
        if end == warmup:
            delivered_at_warmup = int(src.delivered[0])
        t0 = end
    busy = np.concatenate(busy_parts)
    queue = np.concatenate(queue_parts)
    idle = ~busy[warmup:]
    sums, sizes = _batch_sums(idle.astype(np.int64), n_batches)
    try:
        thr = divergence_threshold(cfg)
    except ValueError:
        thr = math.inf
    return PuChannelRun(
        busy=busy,
        queue=queue,
        idle_prob_hat=float(idle.mean()),
        idle_prob_se=_se(sums / sizes),
        throughput_hat=(int(src.delivered[0]) - delivered_at_warmup) / len(idle),
        delivered=int(src.delivered[0]),
        arrived=int(src.arrived[0]),
        queue_stable=int(queue[-1]) <= thr,
    )


def sample_batch_completion_times(m: int, num_receivers: int, erasure_prob: float, n_batches: int,
                                  rng: np.random.Generator | int | None = 0) -> np.ndarray:
    """Slots to deliver one batch: max over receivers of m + NegBin failures."""
    rng = core.make_rng(rng)
    out = np.empty(n_batches, dtype=np.int64)
    step = max(1, 2_000_000 // num_receivers)
    for lo in range(0, n_batches, step):
        hi = min(lo + step, n_batches)
        fails = rng.negative_binomial(m, 1.0 - erasure_prob, size=(hi - lo, num_receivers))
        out[lo:hi] = m + fails.max(axis=1)
    return out


# --- step-level API ------------------------------------------------------------


def _one_slot(strategy, busy, budget, k, m_backoff, timers, counter, rng):
    busy = np.asarray(busy, dtype=np.bool_).reshape(1, -1)
    N = busy.shape[1]
    u = rng.random((1, min(N, budget)))
    d = np.empty(1, dtype=np.int64)
    ok = np.empty(1, dtype=np.bool_)
    ch = np.empty(1, dtype=np.int64)
    listed = np.empty(1, dtype=np.int64)
    sensed = np.empty((1, N), dtype=np.int8)
    kernels.su_chunk_python(busy, u, strategy, budget, k, m_backoff, timers, counter, d, ok, ch, listed, sensed)
    return core.SlotOutcome(int(d[0]), bool(ok[0]), budget, int(ch[0]))


def su_step_random(channels_busy, budget: int, rng: np.random.Generator) -> core.SlotOutcome:
    n = len(channels_busy)
    timers = np.zeros(n, dtype=np.int64)
    return _one_slot(kernels.RANDOM, channels_busy, budget, 0, 0, timers, np.zeros(1, np.int64), rng)


def su_step_adaptive(state: core.SuSensingState, channels_busy, budget: int, k: int,
                     rng: np.random.Generator) -> tuple[core.SlotOutcome, core.SuSensingState]:
    state.check(max(k, max(state.timers, default=0)))
    timers = np.array(state.timers, dtype=np.int64)
    out = _one_slot(kernels.ADAPTIVE, channels_busy, budget, k, 0, timers, np.zeros(1, np.int64), rng)
    nxt = core.SuSensingState(tuple(int(v) for v in timers))
    nxt.check(k)
    return out, nxt


def su_step_single_channel(counter: int, channel_busy: bool, budget: int, m: int,
                           rng: np.random.Generator) -> tuple[core.SlotOutcome, int]:
    c = np.array([counter], dtype=np.int64)
    out = _one_slot(kernels.SINGLE_CHANNEL, [channel_busy], budget, 0, m, np.zeros(1, np.int64), c, rng)
    return out, int(c[0])


def report_row(report: SimReport, trial="pooled") -> dict:
    cfg = report.params.cfg
    return {
        "trial": trial,
        "slots": report.totals["slots"],
        "mode": cfg.pu_mode.value,
        "strategy": cfg.su_strategy.value,
        "N": cfg.num_channels,
        "L": cfg.num_receivers,
        "m": cfg.batch_size,
        "lambda": cfg.arrival_rate,
        "epsilon": cfg.erasure_prob,
        "B": cfg.minislots_per_slot,
        "k": cfg.backoff,
        "seed": report.params.seed,
        "pu_idle_hat": report.pu_idle_prob_hat,
        "pu_tput_hat": report.pu_throughput_hat,
        "p_r_hat": report.su_success_prob_hat,
        "sense_cost_hat": report.su_sensing_cost_hat,
        "eta_s_hat": report.su_throughput_hat,
        "pi0_hat": report.pi0_hat,
        "stderr_eta_s": report.su_throughput_se,
        "queue_stable": report.queue_stable,
    }


CSV_COLUMNS = [
    "trial", "slots", "mode", "strategy", "N", "L", "m", "lambda", "epsilon", "B", "k", "seed",
    "pu_idle_hat", "pu_tput_hat", "p_r_hat", "sense_cost_hat", "eta_s_hat", "pi0_hat",
    "stderr_eta_s", "queue_stable",
]

TRACE_COLUMNS = ["slot", "channel", "busy", "sensed_by_su", "su_success", "D_t"]


def trace_rows(result: TrialResult):
    tr = result.trace
    if tr is None:
        raise ValueError("trial was run without record_trace")
    T, N = tr["busy"].shape
    for t in range(T):
        for j in range(N):
            yield (t, j, int(tr["busy"][t, j]), int(tr["sensed"][t, j] != 0),
                   int(tr["success"][t] and tr["channel"][t] == j), int(tr["d"][t]))
