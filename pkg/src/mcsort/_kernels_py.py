"""Pure numpy implementations of the hot kernels.

Signatures mirror ``_kernels.pyx`` exactly; ``mcsort.kernels`` picks one of the
two at import time.
"""

import numpy as np

FORM_NONE = 0
FORM_PRODUCT = 1
FORM_MINIMUM = 2


def encoded_dimension(gamma, form):
    gamma = np.asarray(gamma, dtype=np.int64)
    dim = int(gamma.sum())
    if form != FORM_NONE:
        n = gamma.size
        for j in range(n):
            for k in range(j + 1, n):
                dim += 2 * int(gamma[j] * gamma[k])
    return dim


def encode_rows(X, alpha, beta, gamma, form):
    """Piecewise-linear features for every row of ``X``.

    Rows are clamped to [alpha, beta] per criterion before encoding.
    Layout: marginal blocks in criterion order, then per pair (j, k), j < k in
    lexicographic order, the positive block (s-major) followed by its negation.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.int64)
    N, n = X.shape
    out = np.empty((N, encoded_dimension(gamma, form)), dtype=np.float64)
    blocks = []
    col = 0
    for j in range(n):
        g = int(gamma[j])
        span = beta[j] - alpha[j]
        x = np.clip(X[:, j], alpha[j], beta[j])
        lo = alpha[j] + span * np.arange(g) / g
        hi = alpha[j] + span * np.arange(1, g + 1) / g
        hi[-1] = beta[j]
        v = np.clip((x[:, None] - lo[None, :]) / (hi - lo)[None, :], 0.0, 1.0)
        out[:, col:col + g] = v
        blocks.append(v)
        col += g
    if form != FORM_NONE:
        for j in range(n):
            for k in range(j + 1, n):
                vj = blocks[j][:, :, None]
                vk = blocks[k][:, None, :]
                if form == FORM_PRODUCT:
                    pos = (vj * vk).reshape(N, -1)
                else:
                    pos = np.minimum(vj, vk).reshape(N, -1)
                w = pos.shape[1]
                out[:, col:col + w] = pos
                out[:, col + w:col + 2 * w] = -pos
                col += 2 * w
    return out


def supporter_mass(ref_u, ref_cls, weights, q, queries):
    """Per query and class k, the weight of references voting for class k.

    A reference of class c < k votes when its value is strictly below the
    query, one of class c > k when strictly above. Returns shape (nq, q).
    """
    ref_u = np.asarray(ref_u, dtype=np.float64)
    ref_cls = np.asarray(ref_cls, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    nq = queries.size
    below = np.zeros((nq, q))
    above = np.zeros((nq, q))
    for c in range(1, q + 1):
        mask = ref_cls == c
        order = np.argsort(ref_u[mask], kind="stable")
        u = ref_u[mask][order]
        csum = np.concatenate(([0.0], np.cumsum(weights[mask][order])))
        lo = np.searchsorted(u, queries, side="left")
        hi = np.searchsorted(u, queries, side="right")
        below[:, c - 1] = csum[lo]
        above[:, c - 1] = csum[-1] - csum[hi]
    # numerator(k) = sum_{c<k} below_c + sum_{c>k} above_c
    cum_below = np.concatenate((np.zeros((nq, 1)), np.cumsum(below, axis=1)[:, :-1]), axis=1)
    rev_above = np.cumsum(above[:, ::-1], axis=1)[:, ::-1]
    cum_above = np.concatenate((rev_above[:, 1:], np.zeros((nq, 1))), axis=1)
    return cum_below + cum_above


def m3_scores(ref_u, ref_cls, q, queries):
    """Average same-class share over the value interval between each member and the query."""
    ref_u = np.asarray(ref_u, dtype=np.float64)
    ref_cls = np.asarray(ref_cls, dtype=np.int64)
    queries = np.asarray(queries, dtype=np.float64)
    all_sorted = np.sort(ref_u)
    out = np.zeros((queries.size, q))
    for c in range(1, q + 1):
        members = np.sort(ref_u[ref_cls == c])
        m = members.size
        if m == 0:
            continue
        for i, ua in enumerate(queries):
            low = members[members <= ua]
            high = members[members > ua]
            total = 0.0
            if low.size:
                num = np.searchsorted(members, ua, "right") - np.searchsorted(members, low, "left")
                den = np.searchsorted(all_sorted, ua, "right") - np.searchsorted(all_sorted, low, "left")
                total += np.sum(num / den)
            if high.size:
                num = np.searchsorted(members, high, "right") - np.searchsorted(members, ua, "right")
                den = np.searchsorted(all_sorted, high, "right") - np.searchsorted(all_sorted, ua, "right")
                total += np.sum(num / den)
            out[i, c - 1] = total / m
    return out


def m4_scores(ref_u, ref_cls, q, queries, K):
    """Reciprocal-distance vote among the K nearest references.

    Ties at equal distance keep the reference that comes first in input order.
    Zero-distance neighbours, if any, share the full unit mass equally.
    """
    ref_u = np.asarray(ref_u, dtype=np.float64)
    ref_cls = np.asarray(ref_cls, dtype=np.int64)
    queries = np.asarray(queries, dtype=np.float64)
    out = np.zeros((queries.size, q))
    for i, ua in enumerate(queries):
        dist = np.abs(ref_u - ua)
        nearest = np.argsort(dist, kind="stable")[:K]
        d = dist[nearest]
        zero = d == 0.0
        if zero.any():
            mass = zero.astype(np.float64)
        else:
            mass = 1.0 / d
        np.add.at(out[i], ref_cls[nearest] - 1, mass)
        out[i] /= mass.sum()
    return out
