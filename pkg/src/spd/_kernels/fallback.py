"""Numpy implementations of the hot kernels.

Reference semantics for the compiled backend: every function documents
its exact floating-point evaluation order, and `_ext.pyx` replicates it
operation for operation (compiled with -ffp-contract=off so no fused
multiply-adds sneak in).  tests/test_kernels.py asserts bit equality.
"""

import numpy as np

BACKEND = "python"


def adamw_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, bias_c1, bias_c2):
    """One decoupled-weight-decay adaptive update, in place on p, m, v.

    Per element, in this exact order:

        m    = beta1 * m + (1 - beta1) * g
        v    = beta2 * v + (1 - beta2) * (g * g)
        p    = p * (1 - lr * weight_decay)
        p    = p - (lr * (m / bias_c1)) / (sqrt(v / bias_c2) + eps)

    bias_c1/bias_c2 are the bias corrections 1 - beta^t, computed by the
    caller so both optimizer instances and both backends share them.
    """
    omb1 = 1.0 - beta1
    omb2 = 1.0 - beta2
    m *= beta1
    m += omb1 * g
    v *= beta2
    v += omb2 * (g * g)
    p *= 1.0 - lr * weight_decay
    p -= (lr * (m / bias_c1)) / (np.sqrt(v / bias_c2) + eps)


def subset_sums(weights):
    """All 2**k subset sums of `weights`, in doubling order.

    Index m holds the sum over set bits of m, accumulated left to right
    in increasing bit order: sums[m] = sums[m - 2**i] + weights[i] where
    i is the highest set bit.  The accumulation order is part of the
    contract (the compiled backend reproduces it bit for bit).
    """
    weights = np.asarray(weights, dtype=np.float64)
    sums = np.zeros(1, dtype=np.float64)
    for w in weights:
        sums = np.concatenate([sums, sums + w])
    return sums


def min_gap_grid(sums_a, sorted_b, targets):
    """For each target t: min over (a, b) of |(t - a) - b|.

    The gap is evaluated exactly as |(t - a) - b| (two rounded
    subtractions); the inner minimum over b is found by binary search in
    sorted_b, which is exact because |(t - a) - b| is monotone in the
    distance of b from (t - a).
    """
    sums_a = np.asarray(sums_a, dtype=np.float64)
    sorted_b = np.asarray(sorted_b, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    nb = sorted_b.shape[0]
    out = np.empty(targets.shape[0], dtype=np.float64)
    for ti in range(targets.shape[0]):
        need = targets[ti] - sums_a
        pos = np.searchsorted(sorted_b, need)
        lo = np.clip(pos - 1, 0, nb - 1)
        hi = np.clip(pos, 0, nb - 1)
        err = np.minimum(np.abs(need - sorted_b[lo]), np.abs(need - sorted_b[hi]))
        out[ti] = err.min()
    return out


def min_gap_closest(sums_a, sorted_b, target):
    """Argmin version of min_gap_grid for a single target.

    Returns (error, a_index, b_sorted_index); ties resolve to the lowest
    a_index, then the lower neighbor in sorted_b.
    """
    sums_a = np.asarray(sums_a, dtype=np.float64)
    sorted_b = np.asarray(sorted_b, dtype=np.float64)
    nb = sorted_b.shape[0]
    need = target - sums_a
    pos = np.searchsorted(sorted_b, need)
    lo = np.clip(pos - 1, 0, nb - 1)
    hi = np.clip(pos, 0, nb - 1)
    err_lo = np.abs(need - sorted_b[lo])
    err_hi = np.abs(need - sorted_b[hi])
    take_lo = err_lo <= err_hi
    err = np.where(take_lo, err_lo, err_hi)
    b_idx = np.where(take_lo, lo, hi)
    a_idx = int(np.argmin(err))
    return float(err[a_idx]), a_idx, int(b_idx[a_idx])
