"""Platform state and one-step follow dynamics.

Creators are identified by quality rank 1..n (1 best); users by 1..m.
Each timestep every user sees one recommended creator and follows it iff
it is strictly better (lower rank) than the best creator they already
follow, a user with no follows counts anything as better. Under noise
p < 1 the comparison is only heeded with probability p (and inverted
with probability 1-p); an already-followed creator is never re-followed.

All decisions within a step read the pre-step state, so the result does
not depend on user evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from . import _kernels
from .errors import InputDataError

# Sentinel for "follows nobody yet": larger than any real rank.
NO_FOLLOW = np.iinfo(np.int32).max


@dataclass(frozen=True)
class QualityRanking:
    """Bijection creator-id -> rank, stored as ids ordered best to worst.

    ``ids[i]`` is the creator with rank i+1. Ids can be anything hashable
    (movie ids, plain ints); ``identity(n)`` gives the trivial ranking
    where id == rank.
    """

    ids: tuple

    def __post_init__(self):
        if len(self.ids) == 0:
            raise ValueError("ranking needs at least one creator")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("creator ids must be unique")
        object.__setattr__(
            self, "_rank_of", {cid: r + 1 for r, cid in enumerate(self.ids)}
        )

    @classmethod
    def identity(cls, n: int) -> "QualityRanking":
        return cls(tuple(range(1, n + 1)))

    @property
    def n(self) -> int:
        return len(self.ids)

    def rank_of(self, creator_id) -> int:
        return self._rank_of[creator_id]

    def id_of(self, rank: int):
        return self.ids[rank - 1]


@dataclass(frozen=True)
class NoiseParams:
    """Signal strength p; p=1 is the noiseless maximizer rule."""

    p: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class StepDelta:
    """New follows produced by one step (users and ranks are 1-based)."""

    n: int
    users: np.ndarray
    ranks: np.ndarray

    @property
    def count(self) -> int:
        return int(self.users.shape[0])

    @property
    def new_follows(self) -> list[tuple[int, int]]:
        return list(zip(self.users.tolist(), self.ranks.tolist()))

    @property
    def gains(self) -> np.ndarray:
        """Per-creator follower gain, index i = rank i+1."""
        return np.bincount(self.ranks - 1, minlength=self.n).astype(np.int64)


class PlatformState:
    """Mutable follower network: who follows whom, and each user's best.

    Followed sets are per-user bitsets over the n creators (8 bytes per
    64 creators per user), so n is assumed to stay in the low thousands.
    ``followers[i]`` counts the users following rank i+1.
    """

    __slots__ = ("n", "m", "t", "followers", "_best", "_bits", "_acc_users", "_acc_ranks")

    def __init__(self, n: int, m: int):
        if n < 1 or m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
        self.n = n
        self.m = m
        self.t = 0
        self.followers = np.zeros(n, dtype=np.int64)
        self._best = np.full(m, NO_FOLLOW, dtype=np.int32)
        self._bits = np.zeros((m, (n + 63) // 64), dtype=np.uint64)
        # Scratch for apply_step; contents are only valid within a step.
        self._acc_users = np.empty(m, dtype=np.int64)
        self._acc_ranks = np.empty(m, dtype=np.int32)

    def best_rank(self, user: int) -> Optional[int]:
        """Best (lowest) followed rank of a user, None if they follow nobody."""
        if not 1 <= user <= self.m:
            raise ValueError(f"user {user} out of range 1..{self.m}")
        b = int(self._best[user - 1])
        return None if b == NO_FOLLOW else b

    def best_ranks(self) -> np.ndarray:
        """Per-user best rank with NO_FOLLOW for users following nobody."""
        return self._best.copy()

    @property
    def n_following(self) -> int:
        return int(np.count_nonzero(self._best != NO_FOLLOW))

    def follows(self, user: int, rank: int) -> bool:
        if not 1 <= user <= self.m:
            raise ValueError(f"user {user} out of range 1..{self.m}")
        if not 1 <= rank <= self.n:
            raise ValueError(f"rank {rank} out of range 1..{self.n}")
        r0 = rank - 1
        return bool((self._bits[user - 1, r0 >> 6] >> np.uint64(r0 & 63)) & np.uint64(1))

    def followed_set(self, user: int) -> frozenset[int]:
        if not 1 <= user <= self.m:
            raise ValueError(f"user {user} out of range 1..{self.m}")
        row = np.unpackbits(self._bits[user - 1].view(np.uint8), bitorder="little")
        return frozenset((np.flatnonzero(row[: self.n]) + 1).tolist())

    def follows_matrix(self) -> np.ndarray:
        """Dense bool matrix, entry [u, i] = user u+1 follows rank i+1."""
        flat = np.unpackbits(self._bits.view(np.uint8).reshape(self.m, -1),
                             axis=1, bitorder="little")
        return flat[:, : self.n].astype(bool)

    def copy(self) -> "PlatformState":
        out = PlatformState(self.n, self.m)
        out.t = self.t
        out.followers[:] = self.followers
        out._best[:] = self._best
        out._bits[:] = self._bits
        return out

    @property
    def nbytes(self) -> int:
        return self.followers.nbytes + self._best.nbytes + self._bits.nbytes

    def check_consistency(self):
        """Recount followers and best ranks from the bitsets; raise on drift."""
        mat = self.follows_matrix()
        counts = mat.sum(axis=0, dtype=np.int64)
        if not np.array_equal(counts, self.followers):
            bad = int(np.flatnonzero(counts != self.followers)[0])
            raise ValueError(
                f"follower count for rank {bad + 1} is {self.followers[bad]}, "
                f"bitsets say {counts[bad]}"
            )
        any_follow = mat.any(axis=1)
        best = np.where(any_follow, mat.argmax(axis=1) + 1, NO_FOLLOW).astype(np.int32)
        if not np.array_equal(best, self._best):
            bad = int(np.flatnonzero(best != self._best)[0])
            raise ValueError(
                f"best rank for user {bad + 1} is {self._best[bad]}, "
                f"bitsets say {best[bad]}"
            )

    def __repr__(self):
        return (f"PlatformState(n={self.n}, m={self.m}, t={self.t}, "
                f"following={self.n_following}/{self.m})")


def _bulk_follow(state: PlatformState, users0: np.ndarray, ranks0: np.ndarray):
    """Install (user, rank) follow pairs (0-based arrays, duplicates allowed)."""
    code = users0.astype(np.int64) * state.n + ranks0
    code = np.unique(code)
    u0 = code // state.n
    r0 = (code % state.n).astype(np.int32)
    np.bitwise_or.at(state._bits, (u0, r0 >> 6),
                     np.uint64(1) << (r0.astype(np.uint64) & np.uint64(63)))
    np.minimum.at(state._best, u0, r0 + 1)
    state.followers += np.bincount(r0, minlength=state.n)


def new_platform(
    n: int, m: int, init: Optional[Mapping[int, Iterable[int]]] = None
) -> PlatformState:
    """Fresh platform at t=0, optionally preloaded from a follows snapshot.

    ``init`` maps 1-based user ids to iterables of 1-based creator ranks;
    users absent from the mapping start with no follows.
    """
    state = PlatformState(n, m)
    if init:
        users = []
        ranks = []
        for user, followed in init.items():
            for rank in followed:
                users.append(user)
                ranks.append(rank)
        users0 = np.asarray(users, dtype=np.int64) - 1
        ranks0 = np.asarray(ranks, dtype=np.int64) - 1
        if users0.size:
            if users0.min() < 0 or users0.max() >= m:
                bad = users[int(np.argmax((users0 < 0) | (users0 >= m)))]
                raise InputDataError(f"snapshot user {bad} out of range 1..{m}")
            if ranks0.min() < 0 or ranks0.max() >= n:
                bad = ranks[int(np.argmax((ranks0 < 0) | (ranks0 >= n)))]
                raise InputDataError(f"snapshot rank {bad} out of range 1..{n}")
            _bulk_follow(state, users0, ranks0)
    return state


def follow_decision(
    best_rank: Optional[int],
    recommended: int,
    already_followed: bool,
    p: float,
    rng: np.random.Generator,
) -> bool:
    """Single-user follow rule; the per-step kernels apply this in bulk."""
    if recommended < 1:
        raise ValueError(f"recommended rank must be >= 1, got {recommended}")
    if already_followed:
        return False
    better = best_rank is None or recommended < best_rank
    pr = p if better else 1.0 - p
    return bool(rng.random() < pr)


def apply_step(
    state: PlatformState,
    recommendations: np.ndarray,
    p: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    draws: Optional[np.ndarray] = None,
) -> StepDelta:
    """Apply one recommendation round to every user and advance t.

    ``recommendations`` holds one 1-based rank per user. With p < 1 the
    accept decisions consume one uniform per user, taken from ``draws``
    when given (length m) and otherwise drawn from ``rng``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    rec = np.ascontiguousarray(recommendations, dtype=np.int32)
    if rec.shape != (state.m,):
        raise ValueError(
            f"need one recommendation per user, got shape {rec.shape} for m={state.m}"
        )
    if p == 1.0:
        ret = _kernels.apply_noiseless(
            rec, state._best, state._bits, state.followers,
            state._acc_users, state._acc_ranks,
        )
    else:
        if draws is None:
            if rng is None:
                raise ValueError("p < 1 needs an rng or explicit draws")
            draws = rng.random(state.m)
        elif draws.shape != (state.m,):
            raise ValueError(f"need one draw per user, got shape {draws.shape}")
        ret = _kernels.apply_noisy(
            rec, state._best, state._bits, state.followers, p, draws,
            state._acc_users, state._acc_ranks,
        )
    if ret < 0:
        bad = -ret - 1
        raise ValueError(
            f"recommendation {rec[bad]} for user {bad + 1} out of range 1..{state.n}"
        )
    state.t += 1
    return StepDelta(
        n=state.n,
        users=state._acc_users[:ret] + 1,
        ranks=state._acc_ranks[:ret].copy(),
    )


def is_absorbing_noiseless(state: PlatformState) -> bool:
    """True iff no recommendation can cause a follow at p=1 (everyone is at rank 1)."""
    return bool(np.all(state._best == 1))
