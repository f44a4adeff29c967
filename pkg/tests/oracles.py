"""Independent reference implementations used as test oracles.

Nothing here imports the miner: window sums are naive k-loops over raw
arrays, envelopes are plain min/max, clusters are counted by a loop.
"""

import numpy as np


def naive_window_sums(a1, a2, days, n, l):
    """sum_{k=0}^{n-1} (a1[j-k-l] + a2[j-k-l]) for 1-based days j; NaN if any term missing."""
    days = np.asarray(days, dtype=np.int64)
    s = np.zeros(len(days))
    for k in range(n):
        idx = days - k - l - 1
        s = s + (a1[idx] + a2[idx])
    return s


def brute_force_rules(values, flags, known, target_sign, dataset_ids, n_set, l_set, learning,
                      min_clusters=4, gap=30, allow_equal=False):
    """Every qualifying (i1, i2, n, l) with its envelope, hits and cluster count.

    ``values`` maps id -> anomaly array with NaN for missing days.
    """
    start, end = learning
    ids = sorted(dataset_ids)
    days = np.arange(start, end + 1)
    ok = known[days - 1]
    normal = days[ok & (flags[days - 1] == 0)]
    extreme = days[ok & (flags[days - 1] == target_sign)]
    out = {}
    for x in range(len(ids)):
        for y in range(x, len(ids)):
            if x == y and not allow_equal:
                continue
            i1, i2 = ids[x], ids[y]
            for n in sorted(n_set):
                for l in sorted(l_set):
                    env = naive_window_sums(values[i1], values[i2], normal, n, l)
                    env = env[~np.isnan(env)]
                    if len(env) == 0:
                        continue
                    lo, hi = env.min(), env.max()
                    sums = naive_window_sums(values[i1], values[i2], extreme, n, l)
                    hits = [int(j) for j, s in zip(extreme, sums) if s > hi or s < lo]
                    clusters = 0
                    prev = None
                    for h in hits:
                        if prev is None or h - prev > gap:
                            clusters += 1
                        prev = h
                    if clusters >= min_clusters:
                        out[(i1, i2, n, l)] = (float(lo), float(hi), tuple(hits), clusters)
    return out
