"""Shared domain types, config validation and the per-slot stochastic primitives."""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field

import numpy as np


class PuMode(str, enum.Enum):
    NETWORK_CODING = "NetworkCoding"
    ARQ = "Arq"


class SuStrategy(str, enum.Enum):
    RANDOM = "Random"
    ADAPTIVE = "AdaptiveTwoStage"
    SINGLE_CHANNEL = "SingleChannelTracking"


class ConfigError(ValueError):
    """Raised when a NetworkConfig violates one or more bounds.

    ``violations`` lists one message per offending field.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnstableRegime(ArithmeticError):
    """The PU queue has no stationary regime (arrival rate >= stable throughput)."""

    def __init__(self, arrival_rate, stable_throughput):
        self.arrival_rate = arrival_rate
        self.stable_throughput = stable_throughput
        super().__init__(
            f"arrival rate {arrival_rate:g} >= maximum stable throughput {stable_throughput:g}"
        )


def is_prime_power(q: int) -> bool:
    if q < 2:
        return False
    p = 2
    while p * p <= q:
        if q % p == 0:
            while q % p == 0:
                q //= p
            return q == 1
        p += 1
    return True


@dataclass(frozen=True)
class NetworkConfig:
    num_channels: int = 10
    num_receivers: int = 20
    batch_size: int = 8
    arrival_rate: float = 0.4
    erasure_prob: float = 0.2
    minislots_per_slot: int = 15
    field_size: int = 256
    backoff: int = 4
    pu_mode: PuMode = PuMode.NETWORK_CODING
    su_strategy: SuStrategy = SuStrategy.RANDOM

    @property
    def service_unit(self) -> int:
        """Packets served per busy period: m under network coding, 1 under ARQ."""
        return 1 if self.pu_mode is PuMode.ARQ else self.batch_size

    def replace(self, **changes) -> NetworkConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["pu_mode"] = self.pu_mode.value
        d["su_strategy"] = self.su_strategy.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> NetworkConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError([f"unknown key {k!r}" for k in unknown])
        kw = dict(d)
        try:
            if "pu_mode" in kw:
                kw["pu_mode"] = PuMode(kw["pu_mode"])
            if "su_strategy" in kw:
                kw["su_strategy"] = SuStrategy(kw["su_strategy"])
        except ValueError as exc:
            raise ConfigError([str(exc)]) from None
        return validate_config(cls(**kw))

    @classmethod
    def from_json(cls, text: str) -> NetworkConfig:
        return cls.from_dict(json.loads(text))


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate_config(cfg: NetworkConfig) -> NetworkConfig:
    """Return ``cfg`` unchanged if every bound holds, else raise ConfigError."""
    errs = []
    for name in ("num_channels", "num_receivers", "batch_size", "minislots_per_slot"):
        v = getattr(cfg, name)
        if not _is_int(v) or v < 1:
            errs.append(f"{name} must be a positive integer, got {v!r}")
    if not _is_int(cfg.backoff) or cfg.backoff < 0:
        errs.append(f"backoff must be a non-negative integer, got {cfg.backoff!r}")
    if not _is_int(cfg.field_size) or not is_prime_power(int(cfg.field_size)):
        errs.append(f"field_size must be a prime power >= 2, got {cfg.field_size!r}")
    lam = cfg.arrival_rate
    if not isinstance(lam, (int, float)) or isinstance(lam, bool) or not 0.0 <= lam <= 1.0:
        errs.append(f"arrival_rate out of range [0, 1]: {lam!r}")
    eps = cfg.erasure_prob
    if not isinstance(eps, (int, float)) or isinstance(eps, bool) or not 0.0 <= eps < 1.0:
        errs.append(f"erasure_prob out of range [0, 1): {eps!r}")
    if not isinstance(cfg.pu_mode, PuMode):
        errs.append(f"pu_mode must be a PuMode, got {cfg.pu_mode!r}")
    if not isinstance(cfg.su_strategy, SuStrategy):
        errs.append(f"su_strategy must be a SuStrategy, got {cfg.su_strategy!r}")
    elif cfg.su_strategy is SuStrategy.SINGLE_CHANNEL and cfg.num_channels != 1:
        errs.append("SingleChannelTracking requires num_channels == 1")
    if errs:
        raise ConfigError(errs)
    return cfg


# --- per-slot state carried by the step-level API -------------------------


@dataclass
class PuChannelState:
    queue_len: int = 0
    serving: bool = False
    received: np.ndarray | None = None  # per-receiver counts while serving
    busy_this_slot: bool = False


@dataclass(frozen=True)
class SuSensingState:
    timers: tuple[int, ...]

    @classmethod
    def fresh(cls, n: int) -> SuSensingState:
        return cls((0,) * n)

    @property
    def sensing_list(self) -> frozenset[int]:
        return frozenset(j for j, v in enumerate(self.timers) if v == 0)

    @property
    def backup_list(self) -> frozenset[int]:
        return frozenset(j for j, v in enumerate(self.timers) if v != 0)

    @property
    def list_size(self) -> int:
        return sum(1 for v in self.timers if v == 0)

    def check(self, k: int) -> None:
        if any(v < 0 or v > k for v in self.timers):
            raise AssertionError(f"timer outside [0, {k}]: {self.timers}")
        if len(self.sensing_list) + len(self.backup_list) != len(self.timers):
            raise AssertionError("sensing/backup lists do not partition the channels")


@dataclass(frozen=True)
class SlotOutcome:
    sensed_count: int
    success: bool
    budget: int = field(repr=False)
    channel: int = -1

    @property
    def tx_minislots(self) -> int:
        return (self.budget - self.sensed_count) if self.success else 0


# --- sampling ----------------------------------------------------------------


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_arrival(rate: float, rng: np.random.Generator) -> int:
    return int(rng.random() < rate)


def sample_reception(erasure_prob: float, num_receivers: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random(num_receivers) >= erasure_prob


def sample_arrivals(rate, shape, rng):
    """Bernoulli(rate) arrival indicators, one per (slot, channel)."""
    return (rng.random(shape) < rate).astype(np.uint8)


def sample_receptions(erasure_prob, shape, rng):
    return rng.random(shape) >= erasure_prob
