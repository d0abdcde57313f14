"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same signatures and same arithmetic order, so both back ends agree to the
last bit on identical input.
"""

import numpy as np


def antitone_project(y, w, lo, hi, tol=1e-13, max_sweeps=200000):
    x = [float(v) for v in y]
    inv = [1.0 / float(v) for v in w]
    lo = [int(v) for v in lo]
    hi = [int(v) for v in hi]
    m = len(lo)
    lam = [0.0] * m
    scale = max((abs(v) for v in x), default=0.0)
    thresh = tol * (1.0 + scale)
    sweep = 0
    biggest = 0.0
    while sweep < max_sweeps:
        sweep += 1
        biggest = 0.0
        for k in range(m):
            a = lo[k]
            b = hi[k]
            g = x[b] - x[a]
            lam_new = lam[k] + g / (inv[a] + inv[b])
            if lam_new < 0.0:
                lam_new = 0.0
            delta = lam_new - lam[k]
            if delta != 0.0:
                lam[k] = lam_new
                x[b] -= delta * inv[b]
                x[a] += delta * inv[a]
                change = abs(delta) * (inv[a] + inv[b])
                if change > biggest:
                    biggest = change
        if biggest <= thresh:
            break
    if biggest > thresh:
        sweep = -sweep
    return np.array(x, dtype=np.float64), np.array(lam, dtype=np.float64), sweep


def quantile_positions(cum, totals, percents):
    cum = np.asarray(cum, dtype=np.int64)
    out = np.full((cum.shape[0], len(percents)), -1, dtype=np.int64)
    for i in range(cum.shape[0]):
        total = int(totals[i])
        if total <= 0:
            continue
        row = 100 * cum[i]
        for t, p in enumerate(percents):
            out[i, t] = int(np.searchsorted(row, int(p) * total, side="left"))
    return out
