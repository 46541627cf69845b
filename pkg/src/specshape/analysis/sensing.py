"""SU throughput under random and backoff-based adaptive sensing.

Both throughput routines take a ``formula_mode``:

``rederived``
    p_r and E[D 1] from the joint distribution of the first idle position,
    so that eta_s = B p_r - E[D 1] holds term by term.
``as_printed``
    the displayed closed forms, which weight the sensing cost by extra
    success-probability factors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom


class FormulaMode(str, enum.Enum):
    AS_PRINTED = "as-printed"
    REDERIVED = "rederived"


class Regime(str, enum.Enum):
    BUDGET_COVERS_ALL = "BudgetCoversAll"
    BUDGET_LIMITED = "BudgetLimited"


class NoConvergence(RuntimeError):
    def __init__(self, max_iter, residual):
        self.max_iter = max_iter
        self.residual = residual
        super().__init__(f"fixed point not reached in {max_iter} iterations (residual {residual:.3e})")


@dataclass(frozen=True)
class SuThroughputReport:
    success_prob: float
    expected_sensing_cost: float
    throughput: float
    regime: Regime
    formula_mode: FormulaMode


@dataclass(frozen=True)
class AdaptiveFixedPoint:
    pi0: float
    p_sense_first: float
    p_sense_backup: float
    list_size_dist: np.ndarray
    timer_dist: np.ndarray
    delta: float
    iterations: int


def _regime(n_channels, budget):
    return Regime.BUDGET_COVERS_ALL if budget >= n_channels else Regime.BUDGET_LIMITED


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p!r}")


def first_idle_pmf(p_idle: float, depth: int) -> np.ndarray:
    """P(first idle channel is the d-th one sensed), d = 1..depth."""
    q = 1.0 - p_idle
    return p_idle * q ** np.arange(depth)


def _sensing_cost(p_idle, depth):
    d = np.arange(1, depth + 1)
    return float(np.dot(d, first_idle_pmf(p_idle, depth)))


# --- random sensing ------------------------------------------------------------


def su_throughput_random(
    p_idle: float, n_channels: int, budget: int, formula_mode=FormulaMode.REDERIVED
) -> SuThroughputReport:
    _check_prob("p_idle", p_idle)
    mode = FormulaMode(formula_mode)
    S = min(n_channels, budget)
    p_r = 1.0 - (1.0 - p_idle) ** S
    cost = _sensing_cost(p_idle, S)
    if mode is FormulaMode.AS_PRINTED:
        # (B - cost) * p_r
        cost *= p_r
    return SuThroughputReport(p_r, cost, budget * p_r - cost, _regime(n_channels, budget), mode)


# --- timer chain ---------------------------------------------------------------


def _geometric_factor(x: float, k: int) -> float:
    """sum_{j<k} r^j with r = 1 - x, i.e. 1 + r (1 - r^(k-1)) / (1 - r).

    Written as -expm1(k log1p(-x)) / x to avoid cancellation for small x.
    Below 1e-9 the quotient form is singular, so the k terms are summed
    directly (this tends to k as x -> 0).
    """
    if x < 1e-9:
        r = 1.0 - x
        return float(sum(r**j for j in range(k)))
    if x >= 1.0:
        return 1.0
    return -math.expm1(k * math.log1p(-x)) / x


def pi0_closed_form(k: int, p_idle: float, p_s: float, p_b: float) -> float:
    if k == 0:
        return 1.0
    return 1.0 / (1.0 + p_s * (1.0 - p_idle) * _geometric_factor(p_b * p_idle, k))


def timer_transition_matrix(k: int, p_idle: float, p_s: float, p_b: float) -> np.ndarray:
    """Transition matrix of one channel's backoff timer, states 0..k."""
    if k == 0:
        return np.ones((1, 1))
    P = np.zeros((k + 1, k + 1))
    P[0, k] = p_s * (1.0 - p_idle)
    P[0, 0] = p_s * p_idle + (1.0 - p_s)
    P[1, 0] = 1.0
    for i in range(2, k + 1):
        P[i, i - 1] = 1.0 - p_b * p_idle
        P[i, 0] = p_b * p_idle
    return P


def timer_stationary_distribution(k: int, p_idle: float, p_s: float, p_b: float) -> tuple[np.ndarray, float]:
    """Stationary timer vector (pi_0..pi_k) and pi_0."""
    for name, v in (("p_idle", p_idle), ("p_s", p_s), ("p_b", p_b)):
        _check_prob(name, v)
    if k < 0:
        raise ValueError("k must be >= 0")
    pi0 = pi0_closed_form(k, p_idle, p_s, p_b)
    if k == 0:
        return np.ones(1), 1.0
    r = 1.0 - p_b * p_idle
    pi = np.empty(k + 1)
    pi[0] = pi0
    pi[k] = pi0 * p_s * (1.0 - p_idle)
    for i in range(k, 1, -1):
        pi[i - 1] = pi[i] * r
    return pi, pi0


# --- averaged stage sensing probabilities -------------------------------------


def stage_sensing_probabilities(list_size_dist, p_idle: float, n_channels: int, budget: int) -> tuple[float, float]:
    """Averaged probabilities that a listed (p_s) / backup (p_b) channel is sensed.

    A tagged list channel in position x+1 of a uniform order is sensed when
    the x channels before it were busy; the product over positions collapses
    to 1/n per position. The budget truncates both stages at min(B, N).
    """
    p_n = np.asarray(list_size_dist, dtype=float)
    if p_n.shape != (n_channels + 1,):
        raise ValueError("list_size_dist must have N + 1 entries")
    q = 1.0 - p_idle
    S = min(budget, n_channels)
    p_s = 0.0
    for n in range(1, n_channels + 1):
        if p_n[n] == 0.0:
            continue
        depth = min(S, n)
        p_s += p_n[n] * sum(q**x for x in range(depth)) / n
    p_b = 0.0
    for n in range(0, S):
        if p_n[n] == 0.0:
            continue
        backup = n_channels - n
        p_b += q**n * p_n[n] * sum(q**y for y in range(S - n)) / backup
    return p_s, p_b


def binomial_list_dist(n_channels: int, pi0: float) -> np.ndarray:
    return binom.pmf(np.arange(n_channels + 1), n_channels, pi0)


def fixed_point_map(pi0: float, p_idle: float, n_channels: int, budget: int, k: int) -> float:
    """One application of pi0 -> binomial(N, pi0) -> (p_s, p_b) -> pi0'."""
    p_n = binomial_list_dist(n_channels, pi0)
    p_s, p_b = stage_sensing_probabilities(p_n, p_idle, n_channels, budget)
    return pi0_closed_form(k, p_idle, p_s, p_b)


def solve_adaptive_fixed_point(
    p_idle: float,
    n_channels: int,
    budget: int,
    k: int,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    damping: float = 0.5,
    start: float = 1.0,
) -> AdaptiveFixedPoint:
    _check_prob("p_idle", p_idle)
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = float(start)
    it = 0
    if k == 0:
        x = 1.0
    else:
        resid = math.inf
        while True:
            tx = fixed_point_map(x, p_idle, n_channels, budget, k)
            resid = abs(tx - x)
            if resid < tol:
                break
            if it >= max_iter:
                raise NoConvergence(max_iter, resid)
            x = (1.0 - damping) * x + damping * tx
            it += 1
    p_n = binomial_list_dist(n_channels, x)
    p_s, p_b = stage_sensing_probabilities(p_n, p_idle, n_channels, budget)
    pi, _ = timer_stationary_distribution(k, p_idle, p_s, p_b)
    return AdaptiveFixedPoint(
        pi0=x,
        p_sense_first=p_s,
        p_sense_backup=p_b,
        list_size_dist=p_n,
        timer_dist=pi,
        delta=prediction_distance(x, p_idle),
        iterations=it,
    )


# --- adaptive throughput -------------------------------------------------------


def conditional_outcomes(p_idle: float, n_listed: int, n_channels: int, budget: int) -> np.ndarray:
    """Joint P(D = d, success | N_t = n) for d = 1..min(N, B).

    Stage one walks the n listed channels, stage two the backup list, both
    within the budget; channel states are independent with P(idle) = p_idle.
    """
    S = min(n_channels, budget)
    q = 1.0 - p_idle
    out = np.zeros(S)
    first = min(n_listed, S)
    for d in range(1, first + 1):
        out[d - 1] = p_idle * q ** (d - 1)
    for d in range(first + 1, S + 1):
        # all listed busy, then d - n busy-then-idle in the backup list
        out[d - 1] = q**n_listed * p_idle * q ** (d - n_listed - 1)
    return out


def _printed_cost_given_n(p_idle, n, n_channels, budget):
    q = 1.0 - p_idle
    S = min(n_channels, budget)
    if n > S:
        return (1.0 - q**budget) * sum(d * p_idle * q ** (d - 1) for d in range(1, budget + 1))
    first = (1.0 - q**n) * sum(d * p_idle * q ** (d - 1) for d in range(1, n + 1))
    second = sum(d * p_idle * q ** (d - n - 1) for d in range(n + 1, S + 1))
    return first + second * (1.0 - q ** (S - n)) * q**n


def _printed_success_given_n(p_idle, n, n_channels, budget):
    q = 1.0 - p_idle
    S = min(n_channels, budget)
    if n > S:
        return 1.0 - q**budget
    return (1.0 - q**n) + q**n * (1.0 - q ** (S - n))


def throughput_given_list_dist(
    p_idle: float, n_channels: int, budget: int, list_size_dist, formula_mode=FormulaMode.REDERIVED
) -> SuThroughputReport:
    """Average the per-list-size outcomes over p_n."""
    mode = FormulaMode(formula_mode)
    p_n = np.asarray(list_size_dist, dtype=float)
    p_r = 0.0
    cost = 0.0
    S = min(n_channels, budget)
    d = np.arange(1, S + 1)
    for n in range(n_channels + 1):
        if p_n[n] == 0.0:
            continue
        if mode is FormulaMode.REDERIVED:
            joint = conditional_outcomes(p_idle, n, n_channels, budget)
            p_r += p_n[n] * joint.sum()
            cost += p_n[n] * float(np.dot(d, joint))
        else:
            p_r += p_n[n] * _printed_success_given_n(p_idle, n, n_channels, budget)
            cost += p_n[n] * _printed_cost_given_n(p_idle, n, n_channels, budget)
    return SuThroughputReport(p_r, cost, budget * p_r - cost, _regime(n_channels, budget), mode)


def su_throughput_adaptive(
    p_idle: float,
    n_channels: int,
    budget: int,
    k: int,
    formula_mode=FormulaMode.REDERIVED,
    fixed_point: AdaptiveFixedPoint | None = None,
    **solver_kw,
) -> SuThroughputReport:
    if k == 0:
        # the list is always full, which is random sensing by definition
        return su_throughput_random(p_idle, n_channels, budget, formula_mode)
    fp = fixed_point or solve_adaptive_fixed_point(p_idle, n_channels, budget, k, **solver_kw)
    return throughput_given_list_dist(p_idle, n_channels, budget, fp.list_size_dist, formula_mode)


# --- prediction accuracy -------------------------------------------------------


def prediction_distance(pi0: float, p_idle: float) -> float:
    _check_prob("pi0", pi0)
    _check_prob("p_idle", p_idle)
    return abs(pi0 - p_idle)


def optimal_backoff(p_idle: float, n_channels: int, budget: int, k_max: int, **solver_kw) -> tuple[int, np.ndarray]:
    """Grid-search k in 0..k_max for the smallest |pi0 - P_idle|.

    Returns the minimizer (lowest k on ties) and the whole delta curve.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    curve = np.array([
        solve_adaptive_fixed_point(p_idle, n_channels, budget, k, **solver_kw).delta
        for k in range(k_max + 1)
    ])
    return int(np.argmin(curve)), curve
