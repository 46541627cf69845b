"""PU batch/packet service times, stable throughput and idle probability."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..core import NetworkConfig, PuMode, UnstableRegime, validate_config

DEFAULT_TOL = 1e-12


def expected_completion_time_nc(m: int, num_receivers: int, erasure_prob: float, tol: float = DEFAULT_TOL) -> float:
    """Expected slots until all receivers hold m successful receptions.

    Sums the tail 1 - F(t)^L of the max of L i.i.d. negative-binomial
    completion times. F is built incrementally so large m, t never touch a
    factorial; the sum stops once L * (1 - F(t)) < tol, which bounds the
    current term.
    """
    if m < 1 or num_receivers < 1:
        raise ValueError("m and num_receivers must be >= 1")
    if not 0.0 <= erasure_prob < 1.0:
        raise ValueError("erasure_prob out of range [0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    eps = erasure_prob
    L = num_receivers
    if eps == 0.0:
        return float(m)

    # pmf(a) = C(a-1, m-1) (1-eps)^m eps^(a-m); log-space start avoids underflow for big m
    log_pmf = m * math.log1p(-eps)
    pmf = math.exp(log_pmf)
    cdf = pmf
    total = float(m)
    a = m
    while True:
        surv = max(1.0 - cdf, 0.0)
        # 1 - F^L without cancellation when F is near 1
        term = -math.expm1(L * math.log1p(-surv)) if surv < 1.0 else 1.0
        total += term
        if L * surv < tol:
            break
        pmf *= eps * a / (a - m + 1)
        cdf += pmf
        a += 1
    return total


def expected_completion_time_arq(num_receivers: int, erasure_prob: float, tol: float = DEFAULT_TOL) -> float:
    """Expected slots for one uncoded packet to reach all L receivers."""
    if num_receivers < 1:
        raise ValueError("num_receivers must be >= 1")
    if not 0.0 <= erasure_prob < 1.0:
        raise ValueError("erasure_prob out of range [0, 1)")
    eps = erasure_prob
    L = num_receivers
    total = 1.0
    if eps == 0.0:
        return total
    et = eps
    while True:
        # P(some receiver still missing after t slots) = 1 - (1 - eps^t)^L
        total += -math.expm1(L * math.log1p(-et))
        if L * et < tol:
            break
        et *= eps
    return total


@dataclass(frozen=True)
class ChannelOccupancyProfile:
    mode: PuMode
    batch_size: int
    expected_service_time: float
    max_stable_throughput: float
    idle_prob: float


def stable_throughput(cfg: NetworkConfig, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """(E[T], eta_p) for the configured PU mode."""
    if cfg.pu_mode is PuMode.ARQ:
        et = expected_completion_time_arq(cfg.num_receivers, cfg.erasure_prob, tol)
        return et, 1.0 / et
    et = expected_completion_time_nc(cfg.batch_size, cfg.num_receivers, cfg.erasure_prob, tol)
    return et, cfg.batch_size / et


def pu_profile(cfg: NetworkConfig, tol: float = DEFAULT_TOL) -> ChannelOccupancyProfile:
    validate_config(cfg)
    et, eta = stable_throughput(cfg, tol)
    lam = cfg.arrival_rate
    if lam >= eta:
        raise UnstableRegime(lam, eta)
    return ChannelOccupancyProfile(
        mode=cfg.pu_mode,
        batch_size=cfg.service_unit,
        expected_service_time=et,
        max_stable_throughput=eta,
        # Little's theorem: busy fraction = lambda * E[T] / unit
        idle_prob=1.0 - lam / eta,
    )


def idle_probability(cfg: NetworkConfig, tol: float = DEFAULT_TOL) -> float:
    return pu_profile(cfg, tol).idle_prob


def recommended_backoff(m: int, num_receivers: int, erasure_prob: float) -> int:
    """Half the expected batch completion time, rounded half-to-even."""
    return round(expected_completion_time_nc(m, num_receivers, erasure_prob) / 2)
