"""NumPy versions of the hot loops, used when the compiled module is unavailable."""

import numpy as np

_CHUNK = 1 << 14


def first_exceed(values, ties, thr_values, thr_ties):
    """Index of the first tagged exceedance in each row, or -1."""
    hit = (values > thr_values) | ((values == thr_values) & (ties > thr_ties))
    stop = np.argmax(hit, axis=1).astype(np.int64)
    stop[~hit.any(axis=1)] = -1
    return stop


def enumerate_outcomes(w, origin, is_y, ranks, start, stop):
    """Sum prophet, gambler (one per arrival order) and adversary rewards over coin masks."""
    w = np.asarray(w, dtype=float)
    origin = np.asarray(origin, dtype=np.int64)
    is_y = np.asarray(is_y, dtype=np.int64)
    ranks = np.asarray(ranks, dtype=np.int64)
    positions = np.arange(len(w))
    rank_at = ranks[:, origin]
    w_pad = np.append(w, 0.0)

    prophet = 0.0
    adversary = 0.0
    gambler = np.zeros(len(ranks))
    for lo in range(start, stop, _CHUNK):
        masks = np.arange(lo, min(lo + _CHUNK, stop), dtype=np.int64)
        real = ((masks[:, None] >> origin[None, :]) & 1) == is_y[None, :]
        first_real = np.argmax(real, axis=1)
        tpos = np.argmax(~real, axis=1)
        prophet += w[first_real].sum()
        adversary += w_pad[tpos - 1].sum(where=tpos > 0)
        before = positions[None, :] < tpos[:, None]
        for p in range(len(ranks)):
            masked = np.where(before, rank_at[p][None, :], np.iinfo(np.int64).max)
            best = np.argmin(masked, axis=1)
            gambler[p] += np.where(tpos > 0, w[best], 0.0).sum()
    return prophet, gambler, adversary
