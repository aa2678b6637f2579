"""Exact policy LP for groups that partition the contexts (at most two groups).

Each context contributes the upper concave hull of its (cost, reward) points,
starting from its cheapest action. Without a parity penalty the LP is a
fractional multiple-choice knapsack: take hull segments in order of reward per
dollar until the budget or the positive segments run out.

With two groups of mass P0, P1 and weights lam0, lam1 the penalty collapses to
kappa * |S0/P0 - S1/P1| with kappa = lam0 * P1 + lam1 * P0 and S_g the spend on
group g. Fixing the sign of the difference makes the objective linear, which
is again a knapsack with group-shifted efficiencies; if the relaxed optimum
has the wrong sign the constrained optimum sits on the parity face, solved by
walking both groups' hull chains together at equal per-capita spend. The best
of the three candidates is the LP optimum.
"""

import numpy as np
from numba import njit

OK = 0
INFEASIBLE = 1


@njit(cache=True, nogil=True)
def build_chains(f, c, p, start, seg_ctx, seg_from, seg_to, seg_eff, seg_len, seg_gain):
    X, K = f.shape
    m = 0
    for x in range(X):
        s = 0
        for k in range(1, K):
            if c[x, k] < c[x, s] or (c[x, k] == c[x, s] and f[x, k] > f[x, s]):
                s = k
        start[x] = s
        cur = s
        while True:
            best = -1
            beff = -np.inf
            for k in range(K):
                dc = c[x, k] - c[x, cur]
                if dc > 0.0:
                    e = (f[x, k] - f[x, cur]) / dc
                    if e > beff or (e == beff and c[x, k] > c[x, best]):
                        best = k
                        beff = e
            if best < 0:
                break
            seg_ctx[m] = x
            seg_from[m] = cur
            seg_to[m] = best
            seg_eff[m] = beff
            seg_len[m] = p[x] * (c[x, best] - c[x, cur])
            seg_gain[m] = p[x] * (f[x, best] - f[x, cur])
            m += 1
            cur = best
    return m


@njit(cache=True, nogil=True)
def _radix_argsort(key):
    """Stable ascending argsort of float64 keys (LSD radix on the bit patterns)."""
    n = key.size
    u = np.empty(n, dtype=np.uint64)
    bits = key.view(np.uint64)
    sign = np.uint64(1) << np.uint64(63)
    for i in range(n):
        b = bits[i] if key[i] != 0.0 else np.uint64(0)  # fold -0.0 onto +0.0
        u[i] = ~b if b & sign else b | sign
    idx = np.arange(n)
    u2 = np.empty(n, dtype=np.uint64)
    idx2 = np.empty(n, dtype=np.int64)
    cnt = np.zeros((8, 256), dtype=np.int64)
    mask = np.uint64(255)
    for i in range(n):
        for d in range(8):
            cnt[d, (u[i] >> np.uint64(8 * d)) & mask] += 1
    for d in range(8):
        sh = np.uint64(8 * d)
        if n == 0 or cnt[d, (u[0] >> sh) & mask] == n:
            continue
        tot = 0
        for b in range(256):
            k = cnt[d, b]
            cnt[d, b] = tot
            tot += k
        for i in range(n):
            b = (u[i] >> sh) & mask
            j = cnt[d, b]
            u2[j] = u[i]
            idx2[j] = idx[i]
            cnt[d, b] = j + 1
        u, u2 = u2, u
        idx, idx2 = idx2, idx
    return idx


@njit(cache=True, nogil=True)
def _sorted_group(seg_ctx, seg_eff, m, grp, g):
    # stability keeps a context's hull segments in chain order under ties
    n = 0
    for s in range(m):
        if grp[seg_ctx[s]] == g:
            n += 1
    idx = np.empty(n, dtype=np.int64)
    key = np.empty(n)
    j = 0
    for s in range(m):
        if grp[seg_ctx[s]] == g:
            idx[j] = s
            key[j] = -seg_eff[s]
            j += 1
    return idx[_radix_argsort(key)]


@njit(cache=True, nogil=True)
def _greedy(o0, o1, eff, slen, sh0, sh1, remaining, take):
    i = 0
    j = 0
    n0 = o0.size
    n1 = o1.size
    while remaining > 0.0:
        if i < n0 and (j >= n1 or eff[o0[i]] + sh0 >= eff[o1[j]] + sh1):
            s = o0[i]
            e = eff[s] + sh0
            i += 1
        elif j < n1:
            s = o1[j]
            e = eff[s] + sh1
            j += 1
        else:
            break
        if e <= 0.0:
            break
        if slen[s] <= remaining:
            take[s] = 1.0
            remaining -= slen[s]
        else:
            take[s] = remaining / slen[s]
            break


@njit(cache=True, nogil=True)
def _feed(order, slen, ptr, used, amount, take):
    """Consume ``amount`` of spend along ``order`` from position (ptr, used)."""
    n = order.size
    while amount > 0.0 and ptr < n:
        s = order[ptr]
        room = slen[s] - used
        if amount < room * (1.0 - 1e-14):
            used += amount
            take[s] = used / slen[s]
            return ptr, used
        take[s] = 1.0
        amount -= room
        ptr += 1
        used = 0.0
    return ptr, used


@njit(cache=True, nogil=True)
def _parity(o0, o1, eff, slen, P0, P1, base0, base1, max0, max1, budget, take):
    tlo = max(base0 / P0, base1 / P1)
    thi = min(budget, max0 / P0, max1 / P1)
    if tlo > thi * (1.0 + 1e-12) + 1e-15:
        return False
    if tlo > thi:
        tlo = thi
    p0, u0 = _feed(o0, slen, 0, 0.0, P0 * tlo - base0, take)
    p1, u1 = _feed(o1, slen, 0, 0.0, P1 * tlo - base1, take)
    t = tlo
    while t < thi and p0 < o0.size and p1 < o1.size:
        s0 = o0[p0]
        s1 = o1[p1]
        if P0 * eff[s0] + P1 * eff[s1] <= 0.0:
            break
        dt = min((slen[s0] - u0) / P0, (slen[s1] - u1) / P1, thi - t)
        if dt <= 0.0:
            break
        p0, u0 = _feed(o0, slen, p0, u0, P0 * dt, take)
        p1, u1 = _feed(o1, slen, p1, u1, P1 * dt, take)
        t += dt
    return True


@njit(cache=True, nogil=True)
def _evaluate(take, m, seg_ctx, grp, slen, sgain, base_r, base0, base1, P0, P1, kappa):
    r = base_r
    s0 = base0
    s1 = base1
    for s in range(m):
        if take[s] > 0.0:
            r += take[s] * sgain[s]
            if grp[seg_ctx[s]] == 0:
                s0 += take[s] * slen[s]
            else:
                s1 += take[s] * slen[s]
    d = 0.0
    if P1 > 0.0:
        d = s0 / P0 - s1 / P1
    return r - kappa * abs(d), d


@njit(cache=True, nogil=True)
def solve_partition(f, c, p, grp, lam0, lam1, budget):
    """Optimal assignment for at most two partitioning groups.

    ``grp`` holds each context's group (0 or 1). Returns ``(status, v, value)``.
    """
    X, K = f.shape
    cap = X * max(K - 1, 1)
    start = np.empty(X, dtype=np.int64)
    seg_ctx = np.empty(cap, dtype=np.int64)
    seg_from = np.empty(cap, dtype=np.int64)
    seg_to = np.empty(cap, dtype=np.int64)
    seg_eff = np.empty(cap)
    seg_len = np.empty(cap)
    seg_gain = np.empty(cap)
    m = build_chains(f, c, p, start, seg_ctx, seg_from, seg_to, seg_eff, seg_len, seg_gain)

    P0 = 0.0
    P1 = 0.0
    base0 = 0.0
    base1 = 0.0
    base_r = 0.0
    for x in range(X):
        cs = p[x] * c[x, start[x]]
        base_r += p[x] * f[x, start[x]]
        if grp[x] == 0:
            P0 += p[x]
            base0 += cs
        else:
            P1 += p[x]
            base1 += cs
    max0 = base0
    max1 = base1
    for s in range(m):
        if grp[seg_ctx[s]] == 0:
            max0 += seg_len[s]
        else:
            max1 += seg_len[s]

    v = np.zeros((X, K))
    remaining = budget - base0 - base1
    if remaining < -1e-12 * max(1.0, budget):
        return INFEASIBLE, v, np.nan
    remaining = max(remaining, 0.0)

    o0 = _sorted_group(seg_ctx, seg_eff, m, grp, 0)
    o1 = _sorted_group(seg_ctx, seg_eff, m, grp, 1)
    kappa = lam0 * P1 + lam1 * P0 if P1 > 0.0 and P0 > 0.0 else 0.0

    best = np.zeros(m)
    if kappa == 0.0:
        _greedy(o0, o1, seg_eff, seg_len, 0.0, 0.0, remaining, best)
        best_val, _ = _evaluate(best, m, seg_ctx, grp, seg_len, seg_gain, base_r, base0, base1, P0, P1, 0.0)
    else:
        best_val = -np.inf
        for sigma in (1.0, -1.0):
            take = np.zeros(m)
            _greedy(o0, o1, seg_eff, seg_len, -sigma * kappa / P0, sigma * kappa / P1, remaining, take)
            val, d = _evaluate(take, m, seg_ctx, grp, seg_len, seg_gain, base_r, base0, base1, P0, P1, kappa)
            if sigma * d >= -1e-12 and val > best_val:
                best_val = val
                best = take
        take = np.zeros(m)
        if _parity(o0, o1, seg_eff, seg_len, P0, P1, base0, base1, max0, max1, budget, take):
            val, d = _evaluate(take, m, seg_ctx, grp, seg_len, seg_gain, base_r, base0, base1, P0, P1, kappa)
            if val > best_val:
                best_val = val
                best = take

    for x in range(X):
        v[x, start[x]] = 1.0
    for s in range(m):
        t = best[s]
        if t > 0.0:
            v[seg_ctx[s], seg_from[s]] -= t
            v[seg_ctx[s], seg_to[s]] += t
    # scrub rounding residue so rows stay exactly nonnegative
    for x in range(X):
        tot = 0.0
        for k in range(K):
            if v[x, k] < 1e-15:
                v[x, k] = 0.0
            tot += v[x, k]
        for k in range(K):
            v[x, k] /= tot
    return OK, v, best_val
