"""Closed-form predictions and statistical validators for the dynamics.

Covers the exact outcomes of the deterministic exploration schedules
(pairwise and full-permutation), the minimum pairwise group size that
keeps the better creator ahead with >= 95% probability under noise, and
Monte Carlo validators that re-derive those claims from the simulator
itself rather than from the formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import InvalidSignalError
from .metrics import aggregate, fairness_vector
from .model import PlatformState, _bulk_follow, apply_step
from .policies import recommend_popularity

# Users per vectorized batch when stacking independent trials.
_BATCH_USERS = 2_000_000


def min_group_size(p) -> int:
    """Smallest per-pair group size k with >= 95% P(better creator leads).

    Evaluates ceil(20(1-p)(3+4p^2) / (p(2p-1)^2)) in exact rational
    arithmetic (decimal literals are honored exactly), floored at 1: the
    comparison still needs one user per group even when the bound is 0.
    """
    q = Fraction(str(p)) if isinstance(p, float) else Fraction(p)
    if q < 0 or q > 1:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if q <= Fraction(1, 2):
        raise InvalidSignalError(
            f"group-size bound needs p > 0.5 (got {p}): at p <= 0.5 the "
            "expected follower lead vanishes"
        )
    bound = 20 * (1 - q) * (3 + 4 * q * q) / (q * (2 * q - 1) ** 2)
    return max(1, math.ceil(bound))


def expected_pairwise_counts(n: int, k: int) -> np.ndarray:
    """Follower counts after the two pairwise steps from empty, p=1: k(2n-i-1)."""
    if n < 2 or k < 1:
        raise ValueError(f"need n >= 2 and k >= 1, got n={n}, k={k}")
    i = np.arange(1, n + 1, dtype=np.int64)
    return k * (2 * n - i - 1)


def expected_permutation_counts(n: int, k: int) -> np.ndarray:
    """Follower counts after the n permutation steps from empty, p=1: k*n!/i."""
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if n > 12:
        raise ValueError(
            f"exact permutation counts supported up to n=12 (got n={n}); "
            "beyond that the factorials leave the exact-integer range"
        )
    fact = math.factorial(n)
    return np.array([k * fact // i for i in range(1, n + 1)], dtype=np.int64)


@dataclass(frozen=True)
class PairwiseNoiseTrial:
    """One simulated two-step comparison between adjacent creators."""

    p: float
    k: int
    xi: int
    xj: int

    @property
    def s(self) -> int:
        return self.xi - self.xj


def run_pairwise_trial(p: float, k: int, rng: np.random.Generator) -> PairwiseNoiseTrial:
    """Simulate one pairwise comparison: 2k users, creator 1 vs creator 2.

    Group A (users 1..k) sees 1 then 2; group B sees 2 then 1. Runs the
    real two-step dynamics and reads off the follower counts.
    """
    state = PlatformState(2, 2 * k)
    block_a = np.full(k, 1, dtype=np.int32)
    block_b = np.full(k, 2, dtype=np.int32)
    apply_step(state, np.concatenate([block_a, block_b]), p=p, rng=rng)
    apply_step(state, np.concatenate([block_b, block_a]), p=p, rng=rng)
    return PairwiseNoiseTrial(
        p=p, k=k, xi=int(state.followers[0]), xj=int(state.followers[1])
    )


@dataclass(frozen=True)
class PairwiseNoiseReport:
    """Empirical behaviour of S = X_i - X_j over many simulated trials."""

    p: float
    k: int
    trials: int
    prob_s_positive: float
    ci_lo: float
    ci_hi: float
    mean_s: float
    var_s: float
    expected_mean_s: float
    expected_var_s: float

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "k": self.k,
            "trials": self.trials,
            "prob_s_positive": self.prob_s_positive,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "mean_s": self.mean_s,
            "var_s": self.var_s,
            "expected_mean_s": self.expected_mean_s,
            "expected_var_s": self.expected_var_s,
        }


def expected_s_moments(p: float, k: int) -> tuple[float, float]:
    """Closed-form mean and variance of S: kp(2p-1) and kp(1-p)(3+4p^2)."""
    return k * p * (2 * p - 1), k * p * (1 - p) * (3 + 4 * p * p)


def validate_pairwise_noise(
    p: float, k: int, trials: int, rng: np.random.Generator
) -> PairwiseNoiseReport:
    """Estimate P(S > 0) by running the two-step comparison many times.

    Trials are stacked as independent 2k-user blocks inside one platform
    and stepped together, so the whole run is a few vectorized passes.
    Output depends only on (p, k, trials, rng state).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    per_batch = max(1, _BATCH_USERS // (2 * k))
    s_values = np.empty(trials, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(per_batch, trials - done)
        state = PlatformState(2, 2 * k * b)
        block_a = np.full(k, 1, dtype=np.int32)
        block_b = np.full(k, 2, dtype=np.int32)
        rec1 = np.tile(np.concatenate([block_a, block_b]), b)
        rec2 = np.tile(np.concatenate([block_b, block_a]), b)
        apply_step(state, rec1, p=p, rng=rng)
        apply_step(state, rec2, p=p, rng=rng)
        one = np.uint64(1)
        follows_1 = (state._bits[:, 0] & one).astype(np.int64)
        follows_2 = ((state._bits[:, 0] >> one) & one).astype(np.int64)
        xi = follows_1.reshape(b, 2 * k).sum(axis=1)
        xj = follows_2.reshape(b, 2 * k).sum(axis=1)
        s_values[done : done + b] = xi - xj
        done += b
    positive = s_values > 0
    if trials >= 2:
        agg = aggregate(positive.astype(np.float64), proportion=True)
        prob, lo, hi = float(agg.mean), float(agg.ci_lo), float(agg.ci_hi)
    else:
        prob = float(positive.mean())
        lo = hi = prob
    exp_mean, exp_var = expected_s_moments(p, k)
    return PairwiseNoiseReport(
        p=p,
        k=k,
        trials=trials,
        prob_s_positive=prob,
        ci_lo=lo,
        ci_hi=hi,
        mean_s=float(s_values.mean()),
        var_s=float(s_values.var(ddof=1)) if trials >= 2 else 0.0,
        expected_mean_s=exp_mean,
        expected_var_s=exp_var,
    )


def sample_fair_state(n: int, m: int, rng: np.random.Generator) -> PlatformState:
    """Random fair state with strictly decreasing follower counts.

    Draws a non-increasing bulk via a sorted multinomial and adds the
    minimal strict staircase (n-1, ..., 1, 0), so a_1 > a_2 > ... > a_n
    always holds, which makes the state fair for every creator. Each
    follower is realized as one user following exactly that creator (the
    simplest network consistent with any follower vector); leftover users
    follow nobody.
    """
    base = n * (n - 1) // 2
    if m < base:
        raise ValueError(
            f"need m >= n(n-1)/2 = {base} users to realize a strict ranking, got {m}"
        )
    total = int(rng.integers(0, m - base + 1))
    bulk = rng.multinomial(total, np.full(n, 1.0 / n))
    counts = np.sort(bulk)[::-1] + np.arange(n - 1, -1, -1)
    state = PlatformState(n, m)
    users0 = np.arange(int(counts.sum()), dtype=np.int64)
    ranks0 = np.repeat(np.arange(n, dtype=np.int64), counts)
    if users0.size:
        _bulk_follow(state, users0, ranks0)
    return state


@dataclass(frozen=True)
class MaintenanceReport:
    """Fraction of fair states still fair after one popularity step."""

    n: int
    m: int
    trials: int
    prob_fair: float
    ci_lo: float
    ci_hi: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "trials": self.trials,
            "prob_fair": self.prob_fair,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
        }


def validate_fair_maintenance(
    n: int,
    m: int,
    fair_state_sampler: Callable[[np.random.Generator], PlatformState],
    trials: int,
    rng: np.random.Generator,
) -> MaintenanceReport:
    """Probability that one noiseless popularity step preserves fairness.

    Each trial samples a fair state, applies one popularity-drawn
    recommendation round at p=1, and checks the successor. A sampler
    that yields an unfair state is a contract violation.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    fair = np.empty(trials, dtype=np.float64)
    for trial in range(trials):
        state = fair_state_sampler(rng)
        if not fairness_vector(state.followers).overall:
            raise ValueError("fair_state_sampler produced an unfair state")
        rec = recommend_popularity(state, rng)
        apply_step(state, rec)
        fair[trial] = fairness_vector(state.followers).overall
    if trials >= 2:
        agg = aggregate(fair, proportion=True)
        prob, lo, hi = float(agg.mean), float(agg.ci_lo), float(agg.ci_hi)
    else:
        prob = float(fair.mean())
        lo = hi = prob
    return MaintenanceReport(
        n=n, m=m, trials=trials, prob_fair=prob, ci_lo=lo, ci_hi=hi
    )
