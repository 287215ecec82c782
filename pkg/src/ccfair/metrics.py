"""Evaluation metrics: per-creator fairness, dissatisfaction, and CIs.

Creator i (rank i, 1 best) is treated fairly when at most i creators
have at least as many followers, i.e. |{j : a_j >= a_i}| <= i, ties
included. The platform is fair overall when that holds for every i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import AggregationError
from .model import NO_FOLLOW, PlatformState


@dataclass(frozen=True)
class FairnessVector:
    """Per-creator fairness indicators; index i is rank i+1."""

    per_creator: np.ndarray

    @property
    def overall(self) -> bool:
        return bool(self.per_creator.all())

    @property
    def fraction_fair(self) -> float:
        return float(self.per_creator.mean())


class Dissatisfaction(NamedTuple):
    """Mean best followed rank over users who follow anyone.

    ``mean`` is None when nobody follows anyone; the excluded fraction is
    always reported so downstream plots can annotate it.
    """

    mean: Optional[float]
    fraction_no_follow: float


@dataclass(frozen=True)
class MetricsRecord:
    """Everything recorded about one simulation at one timestep."""

    t: int
    fairness: FairnessVector
    dissatisfaction: Optional[float]
    fraction_no_follow: float
    followers: np.ndarray

    def __post_init__(self):
        has_mean = self.dissatisfaction is not None
        if has_mean == (self.fraction_no_follow >= 1.0):
            raise ValueError(
                "dissatisfaction must be present exactly when some user follows"
            )


def is_cc_fair(followers: np.ndarray, i: int) -> bool:
    followers = np.asarray(followers)
    if not 1 <= i <= followers.shape[0]:
        raise ValueError(f"creator rank {i} out of range 1..{followers.shape[0]}")
    return int(np.count_nonzero(followers >= followers[i - 1])) <= i


def fairness_vector(followers: np.ndarray) -> FairnessVector:
    """All n fairness indicators in one pass (sort + binary search)."""
    followers = np.asarray(followers)
    n = followers.shape[0]
    ordered = np.sort(followers)
    # count of j with a_j >= a_i, then compare against the rank itself
    n_at_least = n - np.searchsorted(ordered, followers, side="left")
    return FairnessVector(per_creator=n_at_least <= np.arange(1, n + 1))


def dissatisfaction(state: PlatformState) -> Dissatisfaction:
    best = state.best_ranks()
    active = best != NO_FOLLOW
    count = int(np.count_nonzero(active))
    if count == 0:
        return Dissatisfaction(mean=None, fraction_no_follow=1.0)
    return Dissatisfaction(
        mean=float(best[active].mean()),
        fraction_no_follow=1.0 - count / state.m,
    )


def record_metrics(state: PlatformState) -> MetricsRecord:
    dis = dissatisfaction(state)
    return MetricsRecord(
        t=state.t,
        fairness=fairness_vector(state.followers),
        dissatisfaction=dis.mean,
        fraction_no_follow=dis.fraction_no_follow,
        followers=state.followers.copy(),
    )


@dataclass(frozen=True)
class Aggregated:
    """Mean with a normal-approximation 95% CI, computed across seeds."""

    mean: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    nobs: int


Z95 = 1.959963984540054


def aggregate(samples: np.ndarray, proportion: bool = False, axis: int = 0) -> Aggregated:
    """Mean +- 1.96 stderr along ``axis``.

    With ``proportion`` the samples are 0/1 indicators and the binomial
    stderr sqrt(p(1-p)/N) is used, with the interval clipped to [0, 1].
    """
    samples = np.asarray(samples, dtype=np.float64)
    nobs = samples.shape[axis]
    if nobs < 2:
        raise AggregationError(f"confidence interval needs >= 2 samples, got {nobs}")
    mean = samples.mean(axis=axis)
    if proportion:
        half = Z95 * np.sqrt(mean * (1.0 - mean) / nobs)
        lo = np.clip(mean - half, 0.0, 1.0)
        hi = np.clip(mean + half, 0.0, 1.0)
    else:
        half = Z95 * samples.std(axis=axis, ddof=1) / np.sqrt(nobs)
        lo = mean - half
        hi = mean + half
    return Aggregated(mean=mean, ci_lo=lo, ci_hi=hi, nobs=nobs)
