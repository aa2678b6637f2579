"""Shared random-instance builders and brute-force oracles.

The oracles here deliberately avoid the library's solvers: LP optima come
from explicit vertex enumeration, policy optima from exhaustive grids.
"""

import itertools

import numpy as np
import pytest
from numba import njit

from fairalloc.population import Population

FIXTURES = "src/fairalloc/data"


def random_population(rng, X, K, G=1, partition=True, zero_action=True, features_d=None):
    G = min(G, X)
    probs = rng.dirichlet(np.ones(X))
    probs /= probs.sum()
    costs = rng.integers(0, 4, size=(X, K)).astype(float) + rng.random((X, K)).round(2)
    if zero_action:
        costs[:, 0] = 0.0
    if partition:
        g = np.arange(X) % G
        rng.shuffle(g)
        member = np.zeros((X, G), dtype=bool)
        member[np.arange(X), g] = True
    else:
        member = rng.random((X, G)) < 0.6
        member[np.arange(X), rng.integers(G, size=X)] = True
    feats = None if features_d is None else rng.standard_normal((X, K, features_d))
    return Population(tuple(f"x{i}" for i in range(X)), probs, costs, member,
                      tuple(f"a{k}" for k in range(K)), tuple(f"g{j}" for j in range(G)), feats)


def utility_direct(v, pop, f, lam):
    """Utility written out term by term, independent of the library."""
    reward = sum(pop.probs[x] * v[x, k] * f[x, k] for x in range(pop.n_contexts) for k in range(pop.n_actions))
    spend = [pop.probs[x] * sum(v[x, k] * pop.costs[x, k] for k in range(pop.n_actions))
             for x in range(pop.n_contexts)]
    total = sum(spend)
    pen = 0.0
    for g in range(pop.n_groups):
        members = [x for x in range(pop.n_contexts) if pop.membership[x, g]]
        mass = sum(pop.probs[x] for x in members)
        pen += lam[g] * abs(sum(spend[x] for x in members) / mass - total)
    return reward - pen


# ---------------------------------------------------------------- vertex enumeration


def vertex_enumeration_max(c, G, h, E=None, e=None, chunk=50000):
    """max c.x over {G x <= h, E x = e} by solving every square active set.

    Returns (value, x); value is -inf when no vertex is feasible. Assumes the
    optimum is attained at a vertex (bounded, pointed polyhedron).
    """
    c = np.asarray(c, float)
    n = c.size
    G = np.asarray(G, float).reshape(-1, n)
    h = np.asarray(h, float)
    E = np.zeros((0, n)) if E is None else np.asarray(E, float).reshape(-1, n)
    e = np.zeros(0) if e is None else np.asarray(e, float)
    k = n - E.shape[0]
    best, bx = -np.inf, None
    combos = itertools.combinations(range(G.shape[0]), k)
    scale = 1.0 + np.abs(h).max(initial=0.0) + np.abs(e).max(initial=0.0)
    while True:
        batch = list(itertools.islice(combos, chunk))
        idx = np.array(batch, dtype=np.int64).reshape(len(batch), k)
        if idx.shape[0] == 0:
            break
        M = np.concatenate([np.broadcast_to(E, (idx.shape[0],) + E.shape), G[idx]], axis=1)
        r = np.concatenate([np.broadcast_to(e, (idx.shape[0], e.size)), h[idx]], axis=1)
        s = np.linalg.svd(M, compute_uv=False)
        ok = s[:, -1] > 1e-9 * s[:, 0]
        if not ok.any():
            continue
        x = np.linalg.solve(M[ok], r[ok][..., None])[..., 0]
        feas = (x @ G.T <= h + 1e-9 * scale).all(axis=1)
        if E.shape[0]:
            feas &= (np.abs(x @ E.T - e) <= 1e-9 * scale).all(axis=1)
        if feas.any():
            vals = x[feas] @ c
            j = int(vals.argmax())
            if vals[j] > best:
                best, bx = float(vals[j]), x[feas][j]
    return best, bx


def vertex_walk_max(c, A, b):
    """max c.x over {A x <= b, x >= 0} by enumerating every vertex (b > 0, nondegenerate).

    Breadth-first search over the vertex graph from the origin: at a vertex
    with tight set T, relaxing one tight constraint gives an edge direction;
    the ratio test finds the neighbouring vertex. No objective is used to
    steer the walk. Returns (value, x, n_vertices) or +inf when an edge is a
    ray with positive objective slope.
    """
    m, n = A.shape
    rows = np.vstack([A, -np.eye(n)])
    rhs = np.concatenate([b, np.zeros(n)])
    start = frozenset(range(m, m + n))
    seen = {start}
    queue = [start]
    best, bx = -np.inf, None
    while queue:
        T = queue.pop()
        Ti = sorted(T)
        M = rows[Ti]
        x = np.linalg.solve(M, rhs[Ti])
        val = float(c @ x)
        if val > best:
            best, bx = val, x
        Minv = np.linalg.inv(M)
        for pos, i in enumerate(Ti):
            d = -Minv[:, pos]  # rows[i] . d = -1, other tight rows stay tight
            slope = rows @ d
            slack = rhs - rows @ x
            cand = [(slack[j] / slope[j], j) for j in range(m + n) if j not in T and slope[j] > 1e-12]
            if not cand:
                if c @ d > 1e-12:
                    return np.inf, None, len(seen)
                continue
            _, j = min(cand)
            nxt = (T - {i}) | {j}
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return best, bx, len(seen)


def policy_vertex_oracle(pop, f, lam, budget):
    """Policy LP optimum by enumerating vertices of each fixed-sign piece.

    For a sign pattern s, |beta_g . v| = s_g beta_g . v on the cone
    s_g beta_g . v >= 0, where the objective is linear; the best piece wins.
    """
    X, K = f.shape
    n = X * K
    mass = pop.probs @ pop.membership
    alpha = (pop.probs[:, None] * f).ravel()
    betas = []
    for g in range(pop.n_groups):
        w = pop.membership[:, g] * pop.probs / mass[g] - pop.probs
        betas.append((w[:, None] * pop.costs).ravel())
    E = np.zeros((X, n))
    for x in range(X):
        E[x, x * K:(x + 1) * K] = 1.0
    base_G = [-np.eye(n), (pop.probs[:, None] * pop.costs).ravel()[None, :]]
    base_h = [np.zeros(n), np.array([budget])]
    active = [g for g in range(pop.n_groups) if lam[g] > 0]
    best, bx = -np.inf, None
    for signs in itertools.product((1.0, -1.0), repeat=len(active)):
        c = alpha.copy()
        Gs, hs = list(base_G), list(base_h)
        for s, g in zip(signs, active):
            c -= lam[g] * s * betas[g]
            Gs.append(-s * betas[g][None, :])
            hs.append(np.zeros(1))
        val, x = vertex_enumeration_max(c, np.vstack(Gs), np.concatenate(hs), E, np.ones(X))
        if val > best:
            best, bx = val, x
    return best, None if bx is None else bx.reshape(X, K)


# ---------------------------------------------------------------- policy grid


def simplex_grid(K, step=0.01):
    m = int(round(1 / step))
    pts = [c for c in itertools.product(range(m + 1), repeat=K - 1) if sum(c) <= m]
    return np.array([[m - sum(c), *c] for c in pts], dtype=float) / m


@njit(cache=True)
def _grid_search(rew, spend, member, mass, lam, budget):
    # rew/spend: (X, R) per-context contributions of each grid row
    X, R = rew.shape
    G = member.shape[1]
    idx = np.zeros(X, dtype=np.int64)
    best = -np.inf
    tol = 1e-12 * max(1.0, budget)
    while True:
        s = 0.0
        for x in range(X):
            s += spend[x, idx[x]]
        if s <= budget + tol:
            r = 0.0
            for x in range(X):
                r += rew[x, idx[x]]
            pen = 0.0
            for g in range(G):
                sg = 0.0
                for x in range(X):
                    if member[x, g]:
                        sg += spend[x, idx[x]]
                pen += lam[g] * abs(sg / mass[g] - s)
            if r - pen > best:
                best = r - pen
        j = X - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < R:
                break
            idx[j] = 0
            j -= 1
        if j < 0:
            break
    return best


def grid_size(X, K, step=0.01):
    return simplex_grid(K, step).shape[0] ** X


def policy_grid_oracle(pop, f, lam, budget, step=0.01):
    """Best utility over all policies whose rows lie on a ``step`` grid of the simplex."""
    grid = simplex_grid(pop.n_actions, step)
    rew = pop.probs[:, None] * (f @ grid.T)
    spend = pop.probs[:, None] * (pop.costs @ grid.T)
    return _grid_search(rew, spend, pop.membership.copy(), pop.probs @ pop.membership,
                        np.asarray(lam, float), float(budget))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
