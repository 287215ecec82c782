"""Numba kernels for the hot simulation loop.

Everything here operates on preallocated arrays so that a timestep at
m ~ 50k users costs a handful of linear passes and no Python-level work
per user. Creator ranks are 1-based in the ``rec`` arrays (matching the
public API); the kernels translate to 0-based indices internally.

The kernels are deterministic: no threading, no fastmath.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_ONE = np.uint64(1)


@njit(cache=True)
def alias_build(probs, keep, alias, small, large):
    """Fill Vose alias tables for one categorical distribution.

    ``keep[i]`` is the within-column acceptance threshold, ``alias[i]``
    the fallback outcome. ``small``/``large`` are scratch index stacks of
    length n.
    """
    n = probs.shape[0]
    ns = 0
    nl = 0
    for i in range(n):
        keep[i] = probs[i] * n
        alias[i] = i
    for i in range(n):
        if keep[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        s = small[ns - 1]
        ns -= 1
        big = large[nl - 1]
        nl -= 1
        alias[s] = big
        keep[big] -= 1.0 - keep[s]
        if keep[big] < 1.0:
            small[ns] = big
            ns += 1
        else:
            large[nl] = big
            nl += 1
    # Leftovers are numerically 1.0; pin them so sampling never aliases.
    for i in range(ns):
        keep[small[i]] = 1.0
    for i in range(nl):
        keep[large[i]] = 1.0


@njit(cache=True)
def alias_sample(draws, keep, alias, out):
    """Draw 1-based ranks from the alias tables, one uniform per entry."""
    n = keep.shape[0]
    m = draws.shape[0]
    for i in range(m):
        x = draws[i] * n
        idx = int(x)
        if idx >= n:
            idx = n - 1
        if x - idx < keep[idx]:
            out[i] = idx + 1
        else:
            out[i] = alias[idx] + 1


@njit(cache=True)
def apply_noiseless(rec, best, bits, followers, acc_users, acc_ranks):
    """One noiseless timestep: follow iff the recommended rank beats best.

    A recommended rank below the user's best is never already followed
    (every followed rank is >= the best), so no membership test is needed.
    Returns the number of new follows, or -(j+1) if the recommendation for
    user j is out of range.
    """
    n = followers.shape[0]
    m = rec.shape[0]
    cnt = 0
    for i in range(m):
        r = rec[i]
        if r < 1 or r > n:
            return -(i + 1)
        if r < best[i]:
            best[i] = r
            r0 = r - 1
            bits[i, r0 >> 6] |= _ONE << np.uint64(r0 & 63)
            followers[r0] += 1
            acc_users[cnt] = i
            acc_ranks[cnt] = r
            cnt += 1
    return cnt


@njit(cache=True)
def apply_noisy(rec, best, bits, followers, p, draws, acc_users, acc_ranks):
    """One noisy timestep.

    A not-yet-followed recommendation is followed with probability p when
    it beats the user's best rank and 1-p otherwise; an already-followed
    creator is never re-followed. Consumes one uniform per user (position
    i of ``draws``), whether or not the user acts on it.
    """
    n = followers.shape[0]
    m = rec.shape[0]
    cnt = 0
    for i in range(m):
        r = rec[i]
        if r < 1 or r > n:
            return -(i + 1)
        r0 = r - 1
        w = r0 >> 6
        b = np.uint64(r0 & 63)
        if (bits[i, w] >> b) & _ONE:
            continue
        pr = p if r < best[i] else 1.0 - p
        if draws[i] < pr:
            bits[i, w] |= _ONE << b
            if r < best[i]:
                best[i] = r
            followers[r0] += 1
            acc_users[cnt] = i
            acc_ranks[cnt] = r
            cnt += 1
    return cnt
