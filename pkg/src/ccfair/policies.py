"""Recommendation policies: one recommended creator per user per step.

Four families are supported, selected by name:

- ``random``: uniform over creators.
- ``popularity``: creator i drawn with probability (1+a_i)/sum_j(1+a_j).
- ``permutation``: deterministic schedule showing each of the n!
  quality-rank permutations to a block of k users, one position per step.
- ``pairwise+<base>``: users are split into the n(n-1) ordered creator
  pairs; group (i, j) sees i at t=1 and j at t=2, then the base policy
  (random or popularity) takes over from t=3.

Policies are built once per simulation and may reuse internal buffers:
the array returned by ``recommend`` is only valid until the next call.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConfigurationError

POLICY_NAMES = (
    "random",
    "popularity",
    "permutation",
    "pairwise+random",
    "pairwise+popularity",
)

# Exact n! permutation schedules get unwieldy fast; past this the table
# alone outgrows memory and the strategy is out of its useful range.
MAX_PERMUTATION_N = 10


@dataclass(frozen=True)
class PolicySpec:
    """Parsed policy selector; ``base`` is set only for pairwise kinds."""

    kind: str
    base: Optional[str] = None

    def __post_init__(self):
        if self.kind == "pairwise":
            if self.base not in ("random", "popularity"):
                raise ConfigurationError(
                    f"pairwise policy needs base 'random' or 'popularity', got {self.base!r}"
                )
        elif self.kind in ("random", "popularity", "permutation"):
            if self.base is not None:
                raise ConfigurationError(f"policy {self.kind!r} takes no base")
        else:
            raise ConfigurationError(
                f"unknown policy kind {self.kind!r}; choose one of {', '.join(POLICY_NAMES)}"
            )

    @classmethod
    def parse(cls, name: str) -> "PolicySpec":
        if "+" in name:
            kind, _, base = name.partition("+")
            return cls(kind, base)
        return cls(name)

    @property
    def name(self) -> str:
        return self.kind if self.base is None else f"{self.kind}+{self.base}"


@dataclass(frozen=True)
class GroupAssignment:
    """Users dealt into the n(n-1) ordered creator pairs.

    ``first``/``second`` give, per user (index u = user u+1), the rank
    shown at t=1 and t=2. ``members[g]`` lists the user ids of the group
    for ``pairs[g]``. In lenient mode the first m mod n(n-1) groups carry
    one extra user.
    """

    n: int
    k: int
    pairs: tuple
    members: tuple
    first: np.ndarray
    second: np.ndarray


def popularity_distribution(followers: np.ndarray) -> np.ndarray:
    """Recommendation probabilities (1+a_i)/sum_j(1+a_j)."""
    followers = np.asarray(followers)
    if followers.size and followers.min() < 0:
        raise ValueError("follower counts must be non-negative")
    w = followers + 1.0
    return w / w.sum()


def recommend_random(state, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(1, state.n + 1, size=state.m, dtype=np.int32)


def recommend_popularity(state, rng: np.random.Generator) -> np.ndarray:
    probs = popularity_distribution(state.followers)
    return rng.choice(state.n, size=state.m, p=probs).astype(np.int32) + 1


def recommend_permutation(n: int, m: int, t: int) -> np.ndarray:
    """Step-t column of the permutation schedule (k users per permutation)."""
    table = _permutation_table(n)
    k, rem = divmod(m, table.shape[0])
    if rem or k < 1:
        raise ConfigurationError(
            f"permutation policy needs m to be a positive multiple of {n}! = "
            f"{table.shape[0]}, got m={m}"
        )
    if not 1 <= t <= n:
        raise ConfigurationError(
            f"permutation schedule has exactly n={n} steps, got t={t}"
        )
    return np.repeat(table[:, t - 1], k)


def _permutation_table(n: int) -> np.ndarray:
    if n > MAX_PERMUTATION_N:
        raise ConfigurationError(
            f"permutation policy supported up to n={MAX_PERMUTATION_N}, got n={n}"
        )
    # itertools.permutations of a sorted input enumerates lexicographically.
    return np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int32)


def make_pairwise_schedule(
    n: int, m: int, rng: np.random.Generator, strict: bool = True
) -> GroupAssignment:
    """Shuffle users uniformly and deal them into ordered-pair groups."""
    if n < 2:
        raise ConfigurationError("pairwise exploration needs n >= 2")
    groups = n * (n - 1)
    if m < groups:
        raise ConfigurationError(
            f"pairwise exploration needs m >= n(n-1) = {groups}, got m={m}"
        )
    k, rem = divmod(m, groups)
    if rem and strict:
        raise ConfigurationError(
            f"strict pairwise mode needs m divisible by n(n-1) = {groups}, "
            f"got m={m} (remainder {rem})"
        )
    if rem:
        warnings.warn(
            f"m={m} not divisible by n(n-1)={groups}; {rem} groups get one "
            "extra user, equal-size guarantees are approximate",
            stacklevel=2,
        )
    pairs = tuple((i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j)
    order = rng.permutation(m)
    first = np.empty(m, dtype=np.int32)
    second = np.empty(m, dtype=np.int32)
    members = []
    pos = 0
    for g, (i, j) in enumerate(pairs):
        size = k + (1 if g < rem else 0)
        sel = order[pos : pos + size]
        first[sel] = i
        second[sel] = j
        members.append(np.sort(sel + 1))
        pos += size
    return GroupAssignment(
        n=n, k=k, pairs=pairs, members=tuple(members), first=first, second=second
    )


def recommend_pairwise(assignment: GroupAssignment, t: int) -> np.ndarray:
    if t == 1:
        return assignment.first
    if t == 2:
        return assignment.second
    raise ValueError(f"pairwise exploration covers t=1 and t=2 only, got t={t}")


class _RandomPolicy:
    def __init__(self, n: int, m: int):
        self.n = n
        self.m = m

    def recommend(self, state, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(1, self.n + 1, size=self.m, dtype=np.int32)


class _PopularityPolicy:
    """Alias-method sampler rebuilt from the follower counts each step."""

    def __init__(self, n: int, m: int):
        self.n = n
        self.m = m
        self._probs = np.empty(n, dtype=np.float64)
        self._keep = np.empty(n, dtype=np.float64)
        self._alias = np.empty(n, dtype=np.int64)
        self._small = np.empty(n, dtype=np.int64)
        self._large = np.empty(n, dtype=np.int64)
        self._draws = np.empty(m, dtype=np.float64)
        self._rec = np.empty(m, dtype=np.int32)

    def recommend(self, state, rng: np.random.Generator) -> np.ndarray:
        np.add(state.followers, 1.0, out=self._probs)
        self._probs /= self._probs.sum()
        _kernels.alias_build(self._probs, self._keep, self._alias, self._small, self._large)
        rng.random(out=self._draws)
        _kernels.alias_sample(self._draws, self._keep, self._alias, self._rec)
        return self._rec


class _PermutationPolicy:
    def __init__(self, n: int, m: int):
        table = _permutation_table(n)
        k, rem = divmod(m, table.shape[0])
        if rem or k < 1:
            raise ConfigurationError(
                f"permutation policy needs m to be a positive multiple of {n}! = "
                f"{table.shape[0]}, got m={m}"
            )
        self.n = n
        self.m = m
        # Column t-1 repeated k times is the whole step-t recommendation.
        self._schedule = np.repeat(table.T, k, axis=1)

    def recommend(self, state, rng: np.random.Generator) -> np.ndarray:
        t = state.t + 1
        if t > self.n:
            raise ConfigurationError(
                f"permutation schedule has exactly n={self.n} steps, got t={t}"
            )
        return self._schedule[t - 1]


class _PairwiseThenBase:
    def __init__(self, assignment: GroupAssignment, base):
        self.assignment = assignment
        self.base = base

    def recommend(self, state, rng: np.random.Generator) -> np.ndarray:
        t = state.t + 1
        if t <= 2:
            return recommend_pairwise(self.assignment, t)
        return self.base.recommend(state, rng)


def build_policy(spec, n: int, m: int, rng: Optional[np.random.Generator] = None,
                 strict: bool = True):
    """Instantiate a policy for an (n, m) platform.

    ``spec`` is a PolicySpec or a policy name string. Pairwise kinds draw
    their group shuffle from ``rng`` at build time, so the schedule is
    fixed for the simulation.
    """
    if isinstance(spec, str):
        spec = PolicySpec.parse(spec)
    if spec.kind == "random":
        return _RandomPolicy(n, m)
    if spec.kind == "popularity":
        return _PopularityPolicy(n, m)
    if spec.kind == "permutation":
        return _PermutationPolicy(n, m)
    if rng is None:
        raise ConfigurationError("pairwise policy needs an rng for the group shuffle")
    assignment = make_pairwise_schedule(n, m, rng, strict=strict)
    base = build_policy(PolicySpec(spec.base), n, m, rng)
    return _PairwiseThenBase(assignment, base)


def recommend(policy, state, rng: np.random.Generator) -> np.ndarray:
    """One recommendation per user for the upcoming step (state.t + 1)."""
    return policy.recommend(state, rng)
