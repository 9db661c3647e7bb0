"""Independent reference implementations the real code is checked against.

Everything here is deliberately written a different way than the library
(distance-only DP, brute-force rule enumeration) so agreement means
something.
"""

from __future__ import annotations

import numpy as np


def edit_distance_oracle(ref, hyp) -> int:
    """Plain Levenshtein distance, vectorized row DP, no backtrace."""
    n, m = len(ref), len(hyp)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1, dtype=np.int64)
    hyp_arr = np.asarray(hyp, dtype=object)
    for i in range(1, n + 1):
        cur = np.empty(m + 1, dtype=np.int64)
        cur[0] = i
        sub = prev[:-1] + (hyp_arr != ref[i - 1])
        # insertions depend on cur left-to-right; propagate with a scan
        cand = np.minimum(sub, prev[1:] + 1)
        running = cur[0]
        for j in range(m):
            running = min(running + 1, cand[j])
            cur[j + 1] = running
        prev = cur
    return int(prev[m])


def edit_distance_batch(pairs) -> list[int]:
    return [edit_distance_oracle(r, h) for r, h in pairs]


def edit_distance_grid_oracle(refs: np.ndarray, hyps: np.ndarray) -> np.ndarray:
    """Distances for many same-length pairs at once.

    refs is (n, lr) and hyps is (n, lh), both integer-coded.  The DP runs
    cell by cell but vectorized across the n pairs, which is what makes an
    exhaustive sweep over a million pairs affordable.
    """
    n, lr = refs.shape
    lh = hyps.shape[1]
    prev = np.tile(np.arange(lh + 1, dtype=np.int64), (n, 1))
    for i in range(1, lr + 1):
        cur = np.empty_like(prev)
        cur[:, 0] = i
        ri = refs[:, i - 1]
        for j in range(1, lh + 1):
            sub = prev[:, j - 1] + (ri != hyps[:, j - 1])
            cur[:, j] = np.minimum(np.minimum(prev[:, j] + 1, cur[:, j - 1] + 1), sub)
        prev = cur
    return prev[:, lh]


def fanout_oracle(channels) -> int:
    """Translation-job count by direct rule reading: EN booth feeds the other
    six languages, every other booth feeds EN, the floor feeds EN."""
    count = 0
    for ch in channels:
        name = str(ch)
        if name == "floor":
            count += 1
        elif name == "booth-EN":
            count += 6
        else:
            count += 1
    return count


def fanout_routes_oracle(channels) -> set[tuple[str, str]]:
    routes: set[tuple[str, str]] = set()
    for ch in channels:
        name = str(ch)
        if name == "floor":
            routes.add(("floor", "EN"))
        elif name == "booth-EN":
            for tgt in ("AR", "ZH", "FR", "RU", "ES", "PT"):
                routes.add(("booth-EN", tgt))
        else:
            routes.add((name, "EN"))
    return routes
