"""Exact Markov chain over all N timers when channels are i.i.d. idle per slot.

Enumerates every joint timer vector, idle/busy pattern and sensing order,
so it needs no averaging of the per-channel sensing probabilities. Only
small systems are supported (N <= 3, k <= 3).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MAX_CHANNELS = 3
MAX_BACKOFF = 3


@dataclass(frozen=True)
class JointChainResult:
    states: list
    transition: np.ndarray
    stationary: np.ndarray
    pi0: float
    success_prob: float
    sensing_cost: float
    throughput: float
    list_size_dist: np.ndarray


def _slot_outcomes(timers, idle, budget, k):
    """Yield (prob, next_timers, d, success) over all uniform sensing orders."""
    N = len(timers)
    S = min(N, budget)
    listed = [j for j in range(N) if timers[j] == 0]
    backup = [j for j in range(N) if timers[j] != 0]
    p1 = list(itertools.permutations(listed))
    p2 = list(itertools.permutations(backup))
    w = 1.0 / (len(p1) * len(p2))
    for o1 in p1:
        for o2 in p2:
            sequence = (list(o1) + list(o2))[:S]
            new = [t - 1 if t > 0 else 0 for t in timers]
            d = 0
            ok = False
            for pos, ch in enumerate(sequence):
                d += 1
                stage_one = pos < len(listed)
                if idle[ch]:
                    new[ch] = 0
                    ok = True
                    break
                if stage_one:
                    new[ch] = k
            yield w, tuple(new), d, ok


def solve_joint_chain(p_idle: float, n_channels: int, budget: int, k: int) -> JointChainResult:
    if not 1 <= n_channels <= MAX_CHANNELS or not 0 <= k <= MAX_BACKOFF:
        raise ValueError(f"joint chain limited to N <= {MAX_CHANNELS}, k <= {MAX_BACKOFF}")
    states = list(itertools.product(range(k + 1), repeat=n_channels))
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    succ = np.zeros(n)
    cost = np.zeros(n)
    for s in states:
        i = index[s]
        for pattern in itertools.product((False, True), repeat=n_channels):
            n_idle = sum(pattern)
            pw = p_idle**n_idle * (1.0 - p_idle) ** (n_channels - n_idle)
            if pw == 0.0:
                continue
            for w, nxt, d, ok in _slot_outcomes(s, pattern, budget, k):
                P[i, index[nxt]] += pw * w
                if ok:
                    succ[i] += pw * w
                    cost[i] += pw * w * d
    # stationary vector: solve pi (P - I) = 0 with sum(pi) = 1
    A = np.vstack([(P - np.eye(n)).T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    zeros = np.array([sum(1 for t in s if t == 0) for s in states])
    list_dist = np.bincount(zeros, weights=pi, minlength=n_channels + 1)
    p_r = float(pi @ succ)
    c = float(pi @ cost)
    return JointChainResult(
        states=states,
        transition=P,
        stationary=pi,
        pi0=float(pi @ zeros) / n_channels,
        success_prob=p_r,
        sensing_cost=c,
        throughput=budget * p_r - c,
        list_size_dist=list_dist,
    )
