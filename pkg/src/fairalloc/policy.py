"""Policy optimization: utilities, the policy LP, threshold rules, Pareto frontiers."""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _fastlp
from .lp import LpInstance, linearize_abs, solve_lp
from .population import UtilitySpec

__all__ = [
    "Policy",
    "ThresholdPolicy",
    "ParetoPoint",
    "ReferencePoints",
    "GapBound",
    "InfeasibleBudgetError",
    "UndefinedConditionalError",
    "NotApplicableError",
    "utility",
    "spend_by_group",
    "parity_coefficients",
    "build_policy_lp",
    "solve_policy",
    "extract_threshold",
    "greedy_per_dollar",
    "pareto_frontier",
    "reference_points",
    "utility_gap_bound",
]

ROW_TOL = 1e-9


class InfeasibleBudgetError(ValueError):
    """No policy meets the budget (no zero-cost action and budget below the cheapest mixture)."""


class UndefinedConditionalError(ValueError):
    """A group with zero probability mass makes E[c | g] undefined."""


class NotApplicableError(ValueError):
    """A structural precondition of an operation does not hold."""


@dataclass(frozen=True, eq=False)
class Policy:
    """Row-stochastic matrix ``assignment[x, k] = P(pi(x) = a_k)``."""

    assignment: np.ndarray

    def __post_init__(self):
        v = np.array(self.assignment, dtype=float)
        if v.ndim != 2:
            raise ValueError("assignment must be a 2-D matrix")
        if np.any(v < -ROW_TOL) or np.any(np.abs(v.sum(axis=1) - 1.0) > ROW_TOL):
            raise ValueError("assignment rows must be nonnegative and sum to 1")
        v.setflags(write=False)
        object.__setattr__(self, "assignment", v)

    @classmethod
    def deterministic(cls, actions, n_actions):
        actions = np.asarray(actions)
        v = np.zeros((actions.size, n_actions))
        v[np.arange(actions.size), actions] = 1.0
        return cls(v)

    @classmethod
    def constant(cls, n_contexts, n_actions, action=0):
        return cls.deterministic(np.full(n_contexts, action), n_actions)

    def __array__(self, dtype=None, copy=None):
        return self.assignment if dtype is None else self.assignment.astype(dtype)


def _as_matrix(policy):
    return policy.assignment if isinstance(policy, Policy) else np.asarray(policy, dtype=float)


def _group_mass(pop):
    mass = pop.group_mass()
    if np.any(mass <= 0):
        g = pop.groups[int(np.argmin(mass))]
        raise UndefinedConditionalError(f"group {g!r} has zero probability mass")
    return mass


def spend_by_group(policy, pop):
    """(E[c], E[c | g] for each g)."""
    v = _as_matrix(policy)
    per_ctx = (v * pop.costs).sum(axis=1) * pop.probs
    mass = _group_mass(pop)
    return per_ctx.sum(), (per_ctx @ pop.membership) / mass


def utility(policy, pop, f, spec):
    """sum_x p_x sum_k v_xk f(x,k) - sum_g lam_g |E[c | g] - E[c]|."""
    v = _as_matrix(policy)
    f = np.asarray(f, dtype=float)
    if v.shape != f.shape or f.shape != pop.costs.shape:
        raise ValueError(f"shape mismatch: policy {v.shape}, rewards {f.shape}, costs {pop.costs.shape}")
    lam = spec.weights(pop.n_groups)
    reward = float(pop.probs @ (v * f).sum(axis=1))
    total, by_group = spend_by_group(v, pop)
    return reward - float(lam @ np.abs(by_group - total))


def parity_coefficients(pop):
    """beta[g, x, k] = (I(g in s(x)) p_x / P(g in s(X)) - p_x) c(x, a_k)."""
    mass = _group_mass(pop)
    w = pop.membership.T * pop.probs[None, :] / mass[:, None] - pop.probs[None, :]
    return w[:, :, None] * pop.costs[None, :, :]


def build_policy_lp(pop, f, spec):
    """The policy LP over v[x, k] (named ``v_<x>_<k>``) and parity slacks ``w<g>``."""
    X, K = pop.costs.shape
    f = np.asarray(f, dtype=float)
    names = [f"v_{x}_{k}" for x in range(X) for k in range(K)]
    alpha = (pop.probs[:, None] * f).ravel()
    lam = spec.weights(pop.n_groups)
    beta = parity_coefficients(pop).reshape(pop.n_groups, -1)
    lp, slacks = linearize_abs(alpha, list(zip(lam, beta)), names=names)
    for x in range(X):
        lp.add_constraint({names[x * K + k]: 1.0 for k in range(K)}, "=", 1.0)
    lp.add_constraint(dict(zip(names, (pop.probs[:, None] * pop.costs).ravel())), "<=", spec.budget)
    return lp, slacks


def _fast_applicable(pop, spec):
    lam = spec.weights(pop.n_groups)
    if not np.any(lam > 0):
        return True
    return pop.is_partition() and pop.n_groups <= 2


def _solve_fast(pop, f, spec):
    lam = spec.weights(pop.n_groups)
    if np.any(lam > 0):
        grp = pop.group_index().astype(np.int64)
        lam0, lam1 = float(lam[0]), float(lam[1]) if pop.n_groups > 1 else 0.0
    else:
        grp = np.zeros(pop.n_contexts, dtype=np.int64)
        lam0 = lam1 = 0.0
    status, v, _ = _fastlp.solve_partition(
        np.ascontiguousarray(f, dtype=float), np.ascontiguousarray(pop.costs),
        np.ascontiguousarray(pop.probs), grp, lam0, lam1, float(spec.budget))
    if status != _fastlp.OK:
        raise InfeasibleBudgetError(_infeasible_message(pop, spec))
    return v


def _infeasible_message(pop, spec):
    cheapest = float(pop.probs @ pop.costs.min(axis=1))
    return f"budget {spec.budget:g} is below the cheapest achievable expected cost {cheapest:g}"


def solve_policy(pop, f, spec, solver="auto"):
    """Maximize utility subject to row-stochasticity and E[c] <= budget.

    ``solver`` is ``"simplex"`` (the general LP), ``"partition"`` (exact hull
    greedy, needs partitioning groups with at most two penalized groups) or
    ``"auto"`` (partition when applicable). Returns ``(Policy, utility)``.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != pop.costs.shape:
        raise ValueError(f"rewards shape {f.shape} != costs shape {pop.costs.shape}")
    _group_mass(pop)
    if solver == "auto":
        solver = "partition" if _fast_applicable(pop, spec) else "simplex"
    if solver == "partition":
        if not _fast_applicable(pop, spec):
            raise NotApplicableError("partition solver needs disjoint groups (at most two)")
        v = _solve_fast(pop, f, spec)
    elif solver == "simplex":
        lp, _ = build_policy_lp(pop, f, spec)
        sol = solve_lp(lp)
        if sol.status == "infeasible":
            raise InfeasibleBudgetError(_infeasible_message(pop, spec))
        if not sol.optimal:
            raise ArithmeticError(f"policy LP returned status {sol.status}")
        v = np.clip(sol.x[: f.size].reshape(f.shape), 0.0, None)
        v /= v.sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    policy = Policy(v)
    return policy, utility(policy, pop, f, spec)


# ---------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class ThresholdPolicy:
    """Treat x in group g when Delta(x)/c(x, a1) > t_g; with probability p_g at equality."""

    thresholds: tuple
    boundary_probs: tuple

    def materialize(self, pop, f):
        ratio = _threshold_ratio(pop, f)
        g = pop.group_index()
        t = np.asarray(self.thresholds)[g]
        pg = np.asarray(self.boundary_probs)[g]
        treat = np.where(ratio > t, 1.0, np.where(ratio == t, pg, 0.0))
        return Policy(np.column_stack([1.0 - treat, treat]))


def _threshold_ratio(pop, f):
    f = np.asarray(f, dtype=float)
    return (f[:, 1] - f[:, 0]) / pop.costs[:, 1]


def _check_threshold_setting(pop, f):
    f = np.asarray(f, dtype=float)
    if pop.n_actions != 2:
        raise NotApplicableError(f"needs K = 2 actions, got {pop.n_actions}")
    if np.any(pop.costs[:, 0] != 0):
        raise NotApplicableError("needs c(x, a0) = 0 for every context")
    if np.any(pop.costs[:, 1] <= 0):
        raise NotApplicableError("needs c(x, a1) > 0 for every context")
    if not pop.is_partition():
        raise NotApplicableError("needs groups that partition the contexts")
    if np.any(f[:, 1] - f[:, 0] <= 0):
        raise NotApplicableError("needs Delta(x) > 0 for every context")


def extract_threshold(policy, pop, f):
    """Threshold policy with the same per-group spend and no lower utility."""
    _check_threshold_setting(pop, f)
    v = _as_matrix(policy)
    ratio = _threshold_ratio(pop, f)
    gidx = pop.group_index()
    spend = pop.probs * pop.costs[:, 1]
    ts, ps = [], []
    for g in range(pop.n_groups):
        rows = np.flatnonzero(gidx == g)
        target = float(spend[rows] @ v[rows, 1])
        r = ratio[rows]
        levels = np.unique(r)[::-1]
        acc = 0.0
        t, pb = (levels[0] if levels.size else np.inf), 0.0
        for lev in levels:
            block = float(spend[rows][r == lev].sum())
            if acc + block >= target - 1e-15 * max(1.0, target):
                t = lev
                pb = 0.0 if block == 0 else min(1.0, max(0.0, (target - acc) / block))
                break
            acc += block
        else:
            if levels.size:
                t, pb = levels[-1], 1.0
        ts.append(float(t))
        ps.append(float(pb))
    return ThresholdPolicy(tuple(ts), tuple(ps))


def greedy_per_dollar(pop, f, budget):
    """Treat contexts in order of their best gain per dollar until ``budget`` runs out.

    Each context's candidate is the costly action maximizing
    (f(x,k) - f(x,0)) / (c(x,k) - c(x,0)); the last context reached is
    treated fractionally and the rest keep action 0. Optimal for K = 2
    threshold settings, not in general.
    """
    f = np.asarray(f, dtype=float)
    X, K = f.shape
    c = pop.costs
    extra = c[:, 1:] - c[:, :1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(extra > 0, (f[:, 1:] - f[:, :1]) / extra, -np.inf)
    best = ratio.argmax(axis=1) + 1
    r = ratio[np.arange(X), best - 1]
    v = np.zeros((X, K))
    v[:, 0] = 1.0
    left = budget - float(pop.probs @ c[:, 0])
    if left < 0:
        raise InfeasibleBudgetError(f"budget {budget:g} is below the cost of action 0")
    for x in np.argsort(-r, kind="mergesort"):
        if not r[x] > 0 or left <= 0:
            break
        need = pop.probs[x] * extra[x, best[x] - 1]
        t = min(1.0, left / need)
        v[x, 0] -= t
        v[x, best[x]] += t
        left -= t * need
    return Policy(v)


# ---------------------------------------------------------------- Pareto frontier


@dataclass(frozen=True, eq=False)
class ParetoPoint:
    q: float
    appearances: float
    penalty: float
    utility: float
    feasible: bool
    policy: Optional[Policy] = None


def _two_group_unit_cost(pop):
    if pop.n_groups != 2 or not pop.is_partition():
        raise NotApplicableError("needs exactly two disjoint groups")
    if pop.n_actions != 2 or np.any(pop.costs[:, 0] != 0) or np.any(pop.costs[:, 1] != 1):
        raise NotApplicableError("needs two actions with costs 0 and 1")


def _group_fill(delta, probs, share):
    """Treat the fraction ``share`` of a group's mass with the largest ``delta``; returns v1."""
    order = np.argsort(-delta, kind="mergesort")
    mass = probs[order]
    total = mass.sum()
    need = share * total
    cum = np.concatenate([[0.0], np.cumsum(mass)])
    treat = np.clip((need - cum[:-1]) / mass, 0.0, 1.0)
    out = np.empty_like(treat)
    out[order] = treat
    return out


def _l1_penalty(v, pop, lam):
    """lam * sum_g || D(pi | g) - D(pi) ||_1 over the action distribution."""
    mass = _group_mass(pop)
    overall = pop.probs @ v
    by_group = (pop.membership.T * pop.probs) @ v / mass[:, None]
    return float(lam * np.abs(by_group - overall).sum())


def _frontier_point(pop, f, b, q, target, lam, keep_policy):
    gidx = pop.group_index()
    mass = pop.group_mass()
    other = 1 - target
    delta = f[:, 1] - f[:, 0]
    q_other = (b - mass[target] * q) / mass[other]
    v1 = np.zeros(pop.n_contexts)
    for g, share in ((target, q), (other, q_other)):
        rows = gidx == g
        v1[rows] = _group_fill(delta[rows], pop.probs[rows], share)
    v = np.column_stack([1.0 - v1, v1])
    app = float(pop.probs @ (v * f).sum(axis=1))
    pen = _l1_penalty(v, pop, lam)
    return ParetoPoint(q, app, pen, app - pen, True, Policy(v) if keep_policy else None)


def feasible_range(pop, b, target=1):
    mass = pop.group_mass()
    other = 1 - target
    lo = max(0.0, (b - mass[other]) / mass[target])
    hi = min(1.0, b / mass[target])
    return lo, hi


def pareto_frontier(pop, f, b, q_grid=None, target=1, lam=0.0, keep_policy=False):
    """Maximum expected outcome with P(pi = 1 | target group) = q and the budget spent.

    Each point is the optimum of the policy LP with the extra equality rows;
    with unit costs and fixed per-group treatment rates the LP separates by
    group and is solved exactly by treating the largest effects first.
    Infeasible q values are reported with ``feasible=False``.
    """
    _two_group_unit_cost(pop)
    f = np.asarray(f, dtype=float)
    if q_grid is None:
        q_grid = np.linspace(0.0, 1.0, 101)
    lo, hi = feasible_range(pop, b, target)
    eps = 1e-12
    out = []
    for q in np.asarray(q_grid, dtype=float):
        if q < lo - eps or q > hi + eps:
            out.append(ParetoPoint(float(q), np.nan, np.nan, np.nan, False))
            continue
        out.append(_frontier_point(pop, f, b, float(min(max(q, lo), hi)), target, lam, keep_policy))
    return out


class ReferencePoints(NamedTuple):
    random_alloc: ParetoPoint
    equal_fnr: ParetoPoint
    max_appearance: ParetoPoint
    parity: ParetoPoint


def _fnr(v1, rows):
    return float((1.0 - v1[rows]).mean())


def reference_points(pop, f, b, outcomes, target=1, lam=0.0, iters=60):
    """Random allocation, equal false-negative rate, max-appearance and parity points.

    ``outcomes`` is the (X, 2) matrix of realized potential outcomes; the
    benefiting individuals are those with Y(0) = 0 and Y(1) = 1.
    """
    _two_group_unit_cost(pop)
    f = np.asarray(f, dtype=float)
    y = np.asarray(outcomes)
    gidx = pop.group_index()
    benefit = (y[:, 0] == 0) & (y[:, 1] == 1)
    rows = [np.flatnonzero(benefit & (gidx == g)) for g in range(2)]
    for g, r in enumerate(rows):
        if r.size == 0:
            raise ValueError(f"FNR undefined: no benefiting individuals in group {pop.groups[g]!r}")

    lo, hi = feasible_range(pop, b, target)

    def gap(q):
        v1 = _frontier_point(pop, f, b, q, target, lam, True).policy.assignment[:, 1]
        return _fnr(v1, rows[target]) - _fnr(v1, rows[1 - target])

    # the target group's FNR falls and the other group's rises as q grows
    a, z = lo, hi
    ga, gz = gap(a), gap(z)
    if ga < 0 or gz > 0:
        raise ValueError("no budget split equalizes the group FNRs")
    for _ in range(iters):
        mid = 0.5 * (a + z)
        if gap(mid) > 0:
            a = mid
        else:
            z = mid
    q_fnr = 0.5 * (a + z)
    fnr_pt = _frontier_point(pop, f, b, q_fnr, target, lam, True)

    base = float(pop.probs @ f[:, 0])
    gain = float(pop.probs @ (f[:, 1] - f[:, 0]))
    v_rand = np.column_stack([np.full(pop.n_contexts, 1.0 - b), np.full(pop.n_contexts, b)])
    rand_app = base + b * gain
    rand_pt = ParetoPoint(b, rand_app, _l1_penalty(v_rand, pop, lam), rand_app - _l1_penalty(v_rand, pop, lam), True,
                          Policy(v_rand))

    v_max, _ = solve_policy(pop, f, UtilitySpec((0.0, 0.0), b))
    q_max = float(pop.probs[gidx == target] @ v_max.assignment[gidx == target, 1] / pop.group_mass()[target])
    max_pt = _frontier_point(pop, f, b, min(max(q_max, lo), hi), target, lam, True)
    par_pt = _frontier_point(pop, f, b, float(b), target, lam, True)
    return ReferencePoints(rand_pt, fnr_pt, max_pt, par_pt)


# ---------------------------------------------------------------- utility gap


class GapBound(NamedTuple):
    gap: float
    bound1: float
    bound2: float

    def holds(self, slack=1e-9):
        return self.gap <= self.bound1 + slack and self.bound1 <= self.bound2 + slack


def utility_gap_bound(pop, f, f_hat, spec, solver="auto"):
    """U(pi*) - U(pi_hat) under the true rewards, with its two reward-error bounds."""
    f = np.asarray(f, dtype=float)
    f_hat = np.asarray(f_hat, dtype=float)
    pi_star, u_star = solve_policy(pop, f, spec, solver)
    pi_hat, _ = solve_policy(pop, f_hat, spec, solver)
    err = np.abs(f - f_hat)
    return GapBound(
        u_star - utility(pi_hat, pop, f, spec),
        float(2.0 * pop.probs @ err.max(axis=1)),
        float(2.0 * err.max()),
    )
