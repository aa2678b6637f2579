"""Online policy learning: warm-up, then fit / solve / act for each arrival.

Each replication draws a candidate set C (the discretized population the LP
is solved on) and a stream of arrivals from a base population. New
individuals act on the LP row of their nearest same-group candidate, where
distance compares estimated rewards per dollar.

Every random number a replication needs is drawn up front from
``(seed, rep)``, and all methods consume the same draws, so method
comparisons are paired. The per-replication loop is a numba kernel that
releases the GIL; replications run on a thread pool capped by the
``FAIRALLOC_THREADS`` environment variable.
"""

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy.stats import norm

from . import _fastlp
from .estimators import TAU_DEFAULT, backward, forward, irls
from .population import Population, sigmoid

__all__ = [
    "METHODS",
    "LearnerConfig",
    "ExperimentConfig",
    "BudgetTracker",
    "ExperimentTrace",
    "Summary",
    "adjust_budget",
    "random_allocation_fraction",
    "nearest_neighbor",
    "run_experiment",
    "summarize",
    "thread_count",
    "saturated_features",
]

METHODS = ("rct", "rct_stop_at_n", "egreedy", "thompson", "ucb", "oracle")
_CODE = {m: i for i, m in enumerate(METHODS)}
RCT, RCT_STOP, EGREEDY, THOMPSON, UCB, ORACLE = range(6)

# per-step flags
POLICY, WARMUP, EXPLORE, FALLBACK = 0, 1, 2, 3

BUDGET_FLOOR, BUDGET_CEIL = 0.1, 10.0


def thread_count():
    env = os.environ.get("FAIRALLOC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"FAIRALLOC_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class LearnerConfig:
    method: str = "thompson"
    epsilon: float = 0.1
    alpha: float = 0.975
    warmup: int = 4
    # None: actions 1, 2, ..., K-1 for the first individuals, control for the rest
    warmup_actions: Optional[tuple] = None
    stop_n: int = 250
    model: str = "logistic"
    tau: float = TAU_DEFAULT

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.warmup < 0 or self.stop_n < 0:
            raise ValueError("warmup and stop_n must be >= 0")
        if self.model not in ("logistic", "tabular"):
            raise ValueError(f"unknown model kind {self.model!r}")
        if not self.tau > 0:
            raise ValueError("prior precision tau must be > 0")

    def warmup_plan(self, n_actions):
        if self.warmup_actions is not None:
            plan = tuple(int(a) for a in self.warmup_actions)
            if len(plan) != self.warmup or any(not 0 <= a < n_actions for a in plan):
                raise ValueError("warmup_actions must list one valid action per warm-up individual")
            return plan
        return tuple(k if k < n_actions else 0 for k in range(1, self.warmup + 1))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1000
    reps: int = 500
    seed: int = 0
    candidates: int = 1000
    snapshot_every: int = 50
    # boolean masks over the base population; the warm-up draw is repeated
    # until each mask has at least one member among the warm-up individuals
    warmup_require: tuple = ()

    def checkpoints(self):
        s = list(range(self.snapshot_every, self.n + 1, self.snapshot_every)) if self.snapshot_every > 0 else []
        if not s or s[-1] != self.n:
            s.append(self.n)
        return np.array(s, dtype=np.int64)


# ---------------------------------------------------------------- budget


@njit(cache=True, nogil=True)
def _nominal_budget(b, seen, spend):
    if b <= 0.0:
        return 0.0
    if spend <= 0.0:
        return b
    return min(max(b * (b * seen) / spend, BUDGET_FLOOR * b), BUDGET_CEIL * b)


@dataclass
class BudgetTracker:
    """Running spend ledger; ``seen`` counts individuals charged to the budget."""

    target: float
    spend: float = 0.0
    seen: int = 0

    def record(self, cost):
        self.spend += float(cost)
        self.seen += 1


def adjust_budget(tracker):
    """b* = b (b (i - 1)) / sum_{j < i} c_j, clamped to [b/10, 10 b]; b when nothing is spent."""
    return float(_nominal_budget(float(tracker.target), float(tracker.seen), float(tracker.spend)))


def random_allocation_fraction(pop, b):
    """Share p = min(1, b / c~) of individuals given a uniformly random action, c~ = sum_k E[c(X, a_k)] / K."""
    c_tilde = float(pop.probs @ pop.costs.sum(axis=1)) / pop.n_actions
    if c_tilde <= 0.0:
        return 1.0 if b > 0 else 0.0
    return min(1.0, b / c_tilde)


# ---------------------------------------------------------------- nearest neighbour


@njit(cache=True, nogil=True)
def _nearest(fq, cq, gq, fC, cC, gC):
    best = -1
    bd = np.inf
    K = fq.size
    for r in range(fC.shape[0]):
        if gC[r] != gq:
            continue
        dist = 0.0
        for k in range(K):
            if cC[r, k] > 0.0 and cq[k] > 0.0:
                diff = fC[r, k] / cC[r, k] - fq[k] / cq[k]
                dist += diff * diff
        if dist < bd:
            bd = dist
            best = r
    return best


def nearest_neighbor(f_x, c_x, groups_x, f_cand, c_cand, groups_cand):
    """Index of the candidate sharing ``groups_x`` whose f-hat/c vector is closest to x's.

    Actions with zero cost for either side are left out of the distance; ties
    go to the lowest candidate index. ``groups_*`` are hashable group keys
    (e.g. a frozenset s(x) or an integer code).
    """
    keys = {}
    gq = keys.setdefault(groups_x, len(keys))
    gC = np.array([keys.setdefault(g, len(keys)) for g in groups_cand], dtype=np.int64)
    r = _nearest(np.asarray(f_x, dtype=float), np.asarray(c_x, dtype=float), gq,
                 np.ascontiguousarray(f_cand, dtype=float), np.ascontiguousarray(c_cand, dtype=float), gC)
    if r < 0:
        raise LookupError("no candidate shares the query's group membership")
    return int(r)


# ---------------------------------------------------------------- kernel


@njit(cache=True, nogil=True)
def _draw_action(row, u):
    acc = 0.0
    last = 0
    for k in range(row.size):
        if row[k] > 0.0:
            acc += row[k]
            last = k
            if u < acc:
                return k
    return last


@njit(cache=True, nogil=True)
def _run_rep(method, warm_actions, stop_n, eps, z_alpha, tau, budget, p_rand, lam0, lam1,
             cPhi, cCost, cGrp, cF, cP, aPhi, aCost, aGrp, aF, aInC, Y,
             u_act, u_alloc, u_eps, z_ts, snaps,
             o_act, o_y, o_cost, o_bstar, o_cum, o_flag, o_theta):
    C, K = cCost.shape
    n = aGrp.size
    d = cPhi.shape[1]
    warm = warm_actions.size
    data = np.empty((n, d))
    ydat = np.empty(n)
    nd = 0
    theta = np.zeros(d)
    L = np.zeros((d, d))
    fitted = -1
    frozen = np.zeros(d)
    have_frozen = False
    Minv = np.zeros((d, d))
    eye = np.eye(d)
    col = np.empty(d)
    tmp = np.empty(d)
    fq = np.empty(K)
    th = np.empty(d)
    fC = np.empty((C, K))
    gsum = np.zeros(2)
    gcnt = np.zeros(2)
    total = 0.0
    cum_y = 0.0
    spend_post = 0.0
    si = 0
    for j in range(n):
        flag = POLICY
        bstar = _nominal_budget(budget, float(j - warm), spend_post) if j >= warm else budget
        a = 0
        if j < warm:
            a = warm_actions[j]
            flag = WARMUP
        elif method == RCT or (method == RCT_STOP and j < stop_n) or (method == EGREEDY and u_eps[j] < eps):
            flag = EXPLORE
            if u_alloc[j] < p_rand:
                a = min(int(u_act[j] * K), K - 1)
        else:
            ok = True
            if method == ORACLE:
                for r in range(C):
                    for k in range(K):
                        fC[r, k] = cF[r, k]
                for k in range(K):
                    fq[k] = aF[j, k]
            else:
                if method == RCT_STOP and have_frozen:
                    for q in range(d):
                        th[q] = frozen[q]
                else:
                    if fitted != nd:
                        st, _ = irls(data, ydat, nd, tau, theta, L, 100, 1e-8)
                        fitted = nd
                        ok = st == 0
                    for q in range(d):
                        th[q] = theta[q]
                    if method == RCT_STOP:
                        for q in range(d):
                            frozen[q] = theta[q]
                        have_frozen = True
                    elif method == THOMPSON and ok:
                        backward(L, z_ts[j], tmp)
                        for q in range(d):
                            th[q] += tmp[q]
                eta = cPhi @ th
                if method == UCB and ok:
                    # rows of Minv = L^-1, so |L^-1 phi| is the posterior sd of phi' theta
                    for q in range(d):
                        forward(L, eye[q], col)
                        for r in range(d):
                            Minv[r, q] = col[r]
                    S = cPhi @ Minv.T
                    for r in range(eta.size):
                        s2 = 0.0
                        for q in range(d):
                            s2 += S[r, q] * S[r, q]
                        eta[r] += z_alpha * np.sqrt(s2)
                for r in range(C):
                    for k in range(K):
                        e = eta[r * K + k]
                        fC[r, k] = 1.0 / (1.0 + np.exp(-e)) if e >= 0 else np.exp(e) / (1.0 + np.exp(e))
                for k in range(K):
                    e = 0.0
                    s2 = 0.0
                    for q in range(d):
                        e += aPhi[j * K + k, q] * th[q]
                    if method == UCB and ok:
                        for q in range(d):
                            col[q] = aPhi[j * K + k, q]
                        forward(L, col, tmp)
                        for q in range(d):
                            s2 += tmp[q] * tmp[q]
                        e += z_alpha * np.sqrt(s2)
                    fq[k] = 1.0 / (1.0 + np.exp(-e)) if e >= 0 else np.exp(e) / (1.0 + np.exp(e))
            if ok:
                status, v, _ = _fastlp.solve_partition(fC, cCost, cP, cGrp, lam0, lam1, bstar)
                ok = status == _fastlp.OK
            if ok:
                r = aInC[j]
                if r < 0:
                    r = _nearest(fq, aCost[j], aGrp[j], fC, cCost, cGrp)
                if r < 0:
                    ok = False
                else:
                    a = _draw_action(v[r], u_act[j])
            if not ok:
                a = 0
                flag = FALLBACK
        y = Y[j, a]
        c = aCost[j, a]
        o_act[j] = a
        o_y[j] = y
        o_cost[j] = c
        o_bstar[j] = bstar
        o_flag[j] = flag
        if j >= warm:
            spend_post += c
        g = aGrp[j]
        gsum[g] += c
        gcnt[g] += 1.0
        total += c
        cum_y += y
        pen = 0.0
        mean_all = total / (j + 1)
        if gcnt[0] > 0:
            pen += lam0 * abs(gsum[0] / gcnt[0] - mean_all)
        if gcnt[1] > 0:
            pen += lam1 * abs(gsum[1] / gcnt[1] - mean_all)
        o_cum[j] = cum_y - (j + 1) * pen
        for q in range(d):
            data[nd, q] = aPhi[j * K + a, q]
        ydat[nd] = y
        nd += 1
        while si < snaps.size and snaps[si] == j + 1:
            if method != ORACLE:
                if fitted != nd:
                    st, _ = irls(data, ydat, nd, tau, theta, L, 100, 1e-8)
                    fitted = nd
                for q in range(d):
                    o_theta[si, q] = theta[q]
            si += 1


# ---------------------------------------------------------------- experiment


def saturated_features(n_contexts, n_actions):
    """One-hot phi(x, k) = e_{x K + k}: a logistic model with one free logit per cell."""
    eye = np.eye(n_contexts * n_actions)
    return eye.reshape(n_contexts, n_actions, -1)


@dataclass
class MethodTrace:
    method: str
    action: np.ndarray  # (reps, n) int8
    outcome: np.ndarray  # (reps, n) int8
    cost: np.ndarray  # (reps, n)
    nominal_budget: np.ndarray  # (reps, n)
    cum_utility: np.ndarray  # (reps, n)
    flag: np.ndarray  # (reps, n) int8
    snapshot_utility: np.ndarray  # (reps, S)


@dataclass
class ExperimentTrace:
    """Per-step records for each method and the oracle, plus snapshot utilities.

    ``context`` and ``group`` are shared by all methods (paired arrivals).
    ``u_star``/``u_none`` are the true utilities of the oracle LP policy and
    of treating nobody on each replication's candidate set.
    """

    config: ExperimentConfig
    budget: float
    parity_weights: tuple
    warmup: int
    checkpoints: np.ndarray
    context: np.ndarray  # (reps, n) base-population index
    group: np.ndarray  # (reps, n)
    u_star: np.ndarray  # (reps,)
    u_none: np.ndarray  # (reps,)
    methods: dict = field(default_factory=dict)
    oracle: Optional[MethodTrace] = None
    ids: Optional[tuple] = None
    group_names: tuple = ()

    def regret(self, method):
        """Cumulative regret (reps, n) of ``method`` against the oracle run."""
        return self.oracle.cum_utility - self.methods[method].cum_utility

    def to_csv(self, methods=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rep", "i", "method", "context_id", "action", "outcome", "cost", "nominal_budget",
                    "utility_increment", "oracle_increment", "flag"])
        names = list(self.methods) if methods is None else list(methods)
        orc = self.oracle.cum_utility
        d_orc = np.diff(orc, axis=1, prepend=0.0)
        for m in names:
            t = self.methods[m]
            d_cum = np.diff(t.cum_utility, axis=1, prepend=0.0)
            for r in range(self.context.shape[0]):
                for i in range(self.context.shape[1]):
                    cid = self.context[r, i] if self.ids is None else self.ids[self.context[r, i]]
                    w.writerow([r, i + 1, m, cid, int(t.action[r, i]), int(t.outcome[r, i]),
                                repr(float(t.cost[r, i])), repr(float(t.nominal_budget[r, i])),
                                repr(float(d_cum[r, i])), repr(float(d_orc[r, i])), int(t.flag[r, i])])
        return buf.getvalue()


class _RepInputs:
    pass


def _rep_inputs(seed, rep, pop, f_true, n, cfg, warm, d):
    """Candidate set, arrivals and every random number replication ``rep`` consumes."""
    rng = np.random.default_rng([seed, rep])
    N = pop.n_contexts
    C = min(cfg.candidates, N)
    cand = np.sort(rng.choice(N, size=C, replace=False))
    require = [np.asarray(m, dtype=bool) for m in cfg.warmup_require]
    for _ in range(100000):
        w_idx = rng.integers(N, size=warm)
        if all(m[w_idx].any() for m in require):
            break
    else:
        raise RuntimeError("could not draw a warm-up group meeting the composition constraints")
    arrivals = np.concatenate([w_idx, rng.integers(N, size=n - warm)]).astype(np.int64)
    u_y = rng.random(n)
    r = _RepInputs()
    r.cand = cand
    r.arrivals = arrivals
    r.Y = (u_y[:, None] <= f_true[arrivals]).astype(np.int8)
    r.u_act = rng.random(n)
    r.u_alloc = rng.random(n)
    r.u_eps = rng.random(n)
    r.z_ts = rng.standard_normal((n, d))
    pos = np.searchsorted(cand, arrivals)
    pos = np.minimum(pos, C - 1)
    r.in_cand = np.where(cand[pos] == arrivals, pos, -1).astype(np.int64)
    return r


def _true_utility(v, f, cost, grp, lam):
    """Utility on equiprobable candidates with partition groups ``grp``."""
    reward = float((v * f).sum(axis=1).mean())
    spend = (v * cost).sum(axis=1)
    total = spend.mean()
    pen = 0.0
    for g in range(2):
        m = grp == g
        if m.any():
            pen += lam[g] * abs(spend[m].mean() - total)
    return reward - pen


def run_experiment(pop, model, spec, learners, n=1000, reps=500, seed=0, config=None, features=None):
    """Run Algorithm-style online learning for each learner on paired replications.

    ``pop`` is the base population (partitioned into at most two groups, with
    a zero-cost action 0) and ``model`` a binary-outcome model exposing
    ``mean()``. Learners with ``model="logistic"`` use ``features`` (default
    ``pop.features``); ``model="tabular"`` uses one free logit per cell.
    """
    if isinstance(learners, LearnerConfig):
        learners = [learners]
    learners = list(learners)
    cfg = config or ExperimentConfig(n=n, reps=reps, seed=seed)
    n, reps, seed = cfg.n, cfg.reps, cfg.seed
    if not getattr(model, "binary", False):
        raise ValueError("online learning needs a binary-outcome model")
    if not pop.is_partition() or pop.n_groups > 2:
        raise ValueError("online learning supports at most two disjoint groups")
    if np.any(pop.costs[:, 0] != 0):
        raise ValueError("action 0 must be the no-cost action")
    names = [lc.method for lc in learners]
    if len(set(names)) != len(names):
        raise ValueError("each method may appear once per experiment")
    warms = {lc.warmup for lc in learners}
    if len(warms) > 1:
        raise ValueError("learners in one experiment must share the warm-up length")
    warm = warms.pop() if warms else 4
    if warm > n:
        raise ValueError("warm-up longer than the experiment")
    kinds = {lc.model for lc in learners}
    if len(kinds) > 1:
        raise ValueError("learners in one experiment must share the model kind")
    kind = kinds.pop() if kinds else "logistic"
    if kind == "tabular":
        feats = saturated_features(pop.n_contexts, pop.n_actions)
    else:
        feats = pop.features if features is None else np.asarray(features, dtype=float)
        if feats is None:
            raise ValueError("logistic learners need features")
    f_true = np.asarray(model.mean(), dtype=float)
    K = pop.n_actions
    grp_all = pop.group_index().astype(np.int64)
    lam = spec.weights(pop.n_groups)
    lam0 = float(lam[0])
    lam1 = float(lam[1]) if lam.size > 1 else 0.0
    b = float(spec.budget)
    snaps = cfg.checkpoints()
    oracle_cfg = LearnerConfig("oracle", warmup=warm, warmup_actions=learners[0].warmup_actions if learners else None)
    plan = np.array((learners[0] if learners else oracle_cfg).warmup_plan(K), dtype=np.int64)
    all_cfgs = [oracle_cfg] + [lc for lc in learners if lc.method != "oracle"]

    def one_rep(rep):
        ri = _rep_inputs(seed, rep, pop, f_true, n, cfg, warm, feats.shape[2])
        cand = ri.cand
        C = cand.size
        cPhi = np.ascontiguousarray(feats[cand].reshape(C * K, -1))
        cCost = np.ascontiguousarray(pop.costs[cand])
        cGrp = np.ascontiguousarray(grp_all[cand])
        cF = np.ascontiguousarray(f_true[cand])
        cP = np.full(C, 1.0 / C)
        if not all(np.any(cGrp == g) for g in np.unique(grp_all[ri.arrivals])):
            raise LookupError(f"replication {rep}: candidate set misses a group present among arrivals")
        aPhi = np.ascontiguousarray(feats[ri.arrivals].reshape(n * K, -1))
        aCost = np.ascontiguousarray(pop.costs[ri.arrivals])
        aGrp = np.ascontiguousarray(grp_all[ri.arrivals])
        aF = np.ascontiguousarray(f_true[ri.arrivals])
        st, v_star, _ = _fastlp.solve_partition(cF, cCost, cP, cGrp, lam0, lam1, b)
        u_star = _true_utility(v_star, cF, cCost, cGrp, (lam0, lam1))
        u_none = float(cF[:, 0].mean())
        out = {}
        for lc in all_cfgs:
            code = _CODE[lc.method]
            p_rand = random_allocation_fraction(_CandView(cP, cCost), b)
            o = [np.empty(n, np.int8), np.empty(n, np.int8), np.empty(n), np.empty(n), np.empty(n),
                 np.empty(n, np.int8), np.zeros((snaps.size, cPhi.shape[1]))]
            _run_rep(code, plan, lc.stop_n, lc.epsilon, float(norm.ppf(lc.alpha)), lc.tau, b, p_rand, lam0, lam1,
                     cPhi, cCost, cGrp, cF, cP, aPhi, aCost, aGrp, aF, ri.in_cand, ri.Y,
                     ri.u_act, ri.u_alloc, ri.u_eps, ri.z_ts, snaps, *o)
            if code == ORACLE:
                snap_u = np.full(snaps.size, u_star)
            else:
                snap_u = np.empty(snaps.size)
                for s in range(snaps.size):
                    fh = sigmoid(cPhi @ o[6][s]).reshape(C, K)
                    _, v, _ = _fastlp.solve_partition(np.ascontiguousarray(fh), cCost, cP, cGrp, lam0, lam1, b)
                    snap_u[s] = _true_utility(v, cF, cCost, cGrp, (lam0, lam1))
            out[lc.method] = (o[:6], snap_u)
        return ri.arrivals, aGrp, u_star, u_none, out

    workers = max(1, min(thread_count(), reps))
    if workers == 1:
        results = [one_rep(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one_rep, range(reps)))

    def stack(method):
        cols = list(zip(*[res[4][method][0] for res in results]))
        snap = np.array([res[4][method][1] for res in results])
        return MethodTrace(method, *[np.array(c) for c in cols], snapshot_utility=snap)

    trace = ExperimentTrace(
        config=cfg, budget=b, parity_weights=(lam0, lam1), warmup=warm, checkpoints=snaps,
        context=np.array([r[0] for r in results]), group=np.array([r[1] for r in results]),
        u_star=np.array([r[2] for r in results]), u_none=np.array([r[3] for r in results]),
        ids=pop.ids, group_names=pop.groups,
    )
    trace.oracle = stack("oracle")
    for lc in learners:
        trace.methods[lc.method] = stack(lc.method)
    return trace


class _CandView:
    """Just enough of a Population for :func:`random_allocation_fraction`."""

    def __init__(self, probs, costs):
        self.probs = probs
        self.costs = costs
        self.n_actions = costs.shape[1]


# ---------------------------------------------------------------- summaries


@dataclass
class Summary:
    method: str
    regret_mean: np.ndarray  # (n,)
    regret_se: np.ndarray
    pct_mean: np.ndarray  # (S,)
    pct_se: np.ndarray
    group_spend: np.ndarray  # (reps, G) mean post-warm-up spend per group
    disparity: np.ndarray  # (reps, G) group spend minus target budget
    spend_per_person: np.ndarray  # (reps,)
    pct: np.ndarray  # (reps, S)


class UndefinedPercentError(ZeroDivisionError):
    pass


def _se(a, axis=0):
    k = a.shape[axis]
    return a.std(axis=axis, ddof=1) / np.sqrt(k) if k > 1 else np.zeros(a.shape[1 - axis] if a.ndim > 1 else ())


def summarize(trace, method):
    """Regret and pct-of-optimal curves, per-group spend and budget adherence for ``method``.

    pct-of-optimal = (U(pi-hat) - U(none)) / (U(pi*) - U(none)) * 100 with
    snapshot policies evaluated under the true rewards. Spend statistics use
    post-warm-up individuals only, matching the budget ledger.
    """
    t = trace.oracle if method == "oracle" else trace.methods[method]
    denom = trace.u_star - trace.u_none
    if np.any(denom <= 0):
        raise UndefinedPercentError("oracle utility equals the no-treatment utility; pct-of-optimal undefined")
    pct = (t.snapshot_utility - trace.u_none[:, None]) / denom[:, None] * 100.0
    reg = trace.oracle.cum_utility - t.cum_utility
    w = trace.warmup
    cost = t.cost[:, w:]
    grp = trace.group[:, w:]
    G = max(2, len(trace.group_names))
    gs = np.full((cost.shape[0], G), np.nan)
    for g in range(G):
        m = grp == g
        cnt = m.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            gs[:, g] = np.where(cnt > 0, (cost * m).sum(axis=1) / cnt, np.nan)
    return Summary(
        method=method,
        regret_mean=reg.mean(axis=0), regret_se=_se(reg),
        pct_mean=pct.mean(axis=0), pct_se=_se(pct),
        group_spend=gs, disparity=gs - trace.budget,
        spend_per_person=cost.mean(axis=1), pct=pct,
    )
