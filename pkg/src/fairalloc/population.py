"""Discrete decision problems: contexts, groups, costs, outcome models, rewards.

A :class:`Population` is an immutable bundle of arrays describing a finite
context distribution. Outcome models map (context, action) pairs to outcome
distributions; binary models share a single latent uniform per individual so
potential outcomes can be compared pointwise.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "ContextSpec",
    "Population",
    "RewardFunction",
    "UtilitySpec",
    "TabularModel",
    "LinearModel",
    "LogisticModel",
    "StructuralModel",
    "StylizedModel",
    "SyntheticPopConfig",
    "PopulationError",
    "MissingRewardError",
    "expected_rewards",
    "gen_structural_population",
    "gen_stylized_population",
    "sigmoid",
    "logit",
]


class PopulationError(ValueError):
    """Population data violating a structural invariant."""


class MissingRewardError(KeyError):
    """A reward table lacks an entry for an outcome the model can emit."""


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ContextSpec:
    id: object
    prob: float
    group_ids: frozenset
    costs: tuple
    features: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "group_ids", frozenset(self.group_ids))
        object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))
        if self.features is not None:
            feats = tuple(tuple(float(v) for v in row) for row in self.features)
            if len(feats) != len(self.costs):
                raise PopulationError(f"context {self.id!r}: features length != costs length")
            if len({len(r) for r in feats}) > 1:
                raise PopulationError(f"context {self.id!r}: feature vectors differ in dimension")
            object.__setattr__(self, "features", feats)


@dataclass(frozen=True, eq=False)
class Population:
    """A finite context distribution.

    Attributes
    ----------
    ids : tuple of context identifiers, length X
    probs : (X,) array, strictly positive, sums to one
    costs : (X, K) array of nonnegative finite costs
    membership : (X, G) boolean array, row x marks the groups in s(x)
    actions, groups : identifiers for the K actions and G groups
    features : optional (X, K, d) array
    """

    ids: tuple
    probs: np.ndarray
    costs: np.ndarray
    membership: np.ndarray
    actions: tuple
    groups: tuple
    features: Optional[np.ndarray] = None

    def __post_init__(self):
        probs = _frozen(self.probs)
        costs = _frozen(self.costs)
        member = _frozen(self.membership, bool)
        ids = tuple(self.ids)
        if probs.ndim != 1 or probs.size == 0:
            raise PopulationError("empty population")
        X = probs.size
        if len(ids) != X or len(set(ids)) != X:
            raise PopulationError("context ids must be unique, one per context")
        if costs.shape != (X, len(self.actions)):
            raise PopulationError(f"costs shape {costs.shape} != ({X}, {len(self.actions)})")
        if member.shape != (X, len(self.groups)):
            raise PopulationError(f"membership shape {member.shape} != ({X}, {len(self.groups)})")
        if np.any(~np.isfinite(probs)) or np.any(probs <= 0):
            raise PopulationError("context probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise PopulationError(f"context probabilities sum to {probs.sum()!r}, not 1")
        if np.any(~np.isfinite(costs)) or np.any(costs < 0):
            raise PopulationError("costs must be finite and nonnegative")
        if not member.any(axis=1).all():
            raise PopulationError("every context needs at least one group")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "membership", member)
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.features is not None:
            feats = _frozen(self.features)
            if feats.ndim != 3 or feats.shape[:2] != costs.shape:
                raise PopulationError(f"features shape {feats.shape} incompatible with costs {costs.shape}")
            object.__setattr__(self, "features", feats)

    @property
    def n_contexts(self):
        return self.probs.size

    @property
    def n_actions(self):
        return len(self.actions)

    @property
    def n_groups(self):
        return len(self.groups)

    @property
    def dim(self):
        return None if self.features is None else self.features.shape[2]

    def group_mass(self):
        """P(g in s(X)) for every group."""
        return self.probs @ self.membership

    def is_partition(self):
        return bool((self.membership.sum(axis=1) == 1).all())

    def group_index(self):
        """Group index of each context; only meaningful for partitions."""
        if not self.is_partition():
            raise PopulationError("groups overlap; no single group per context")
        return np.argmax(self.membership, axis=1)

    def index(self, context_id):
        if not hasattr(self, "_lookup"):
            object.__setattr__(self, "_lookup", {c: i for i, c in enumerate(self.ids)})
        return self._lookup[context_id]

    @classmethod
    def from_contexts(cls, contexts, actions, groups=None):
        contexts = list(contexts)
        if not contexts:
            raise PopulationError("empty population")
        if groups is None:
            groups = sorted({g for c in contexts for g in c.group_ids}, key=str)
        gidx = {g: j for j, g in enumerate(groups)}
        member = np.zeros((len(contexts), len(groups)), dtype=bool)
        for i, c in enumerate(contexts):
            unknown = set(c.group_ids) - set(gidx)
            if unknown:
                raise PopulationError(f"context {c.id!r} references unknown groups {sorted(unknown, key=str)}")
            for g in c.group_ids:
                member[i, gidx[g]] = True
        for c in contexts:
            if len(c.costs) != len(actions):
                raise PopulationError(f"context {c.id!r}: {len(c.costs)} costs for {len(actions)} actions")
        has_feats = [c.features is not None for c in contexts]
        feats = None
        if any(has_feats):
            if not all(has_feats):
                raise PopulationError("features must be given for all contexts or none")
            dims = {len(c.features[0]) for c in contexts}
            if len(dims) != 1:
                raise PopulationError("feature dimension differs across contexts")
            feats = np.array([c.features for c in contexts], dtype=float)
        return cls(
            ids=tuple(c.id for c in contexts),
            probs=np.array([c.prob for c in contexts], dtype=float),
            costs=np.array([c.costs for c in contexts], dtype=float),
            membership=member,
            actions=tuple(actions),
            groups=tuple(groups),
            features=feats,
        )

    def contexts(self):
        out = []
        for i, cid in enumerate(self.ids):
            gs = frozenset(g for g, m in zip(self.groups, self.membership[i]) if m)
            feats = None if self.features is None else self.features[i].tolist()
            out.append(ContextSpec(cid, float(self.probs[i]), gs, self.costs[i].tolist(), feats))
        return out

    def subset(self, rows):
        """Population restricted to ``rows`` with probabilities renormalized."""
        rows = np.asarray(rows)
        p = self.probs[rows]
        return Population(
            ids=tuple(self.ids[i] for i in rows),
            probs=p / p.sum(),
            costs=self.costs[rows],
            membership=self.membership[rows],
            actions=self.actions,
            groups=self.groups,
            features=None if self.features is None else self.features[rows],
        )


# ---------------------------------------------------------------- outcome models


class _OutcomeModel:
    kind = None
    binary = False

    def mean(self):
        raise NotImplementedError

    def sample(self, rng, contexts, actions):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class TabularModel(_OutcomeModel):
    """Y = f(x, k) + sigma * N(0, 1)."""

    table: np.ndarray
    sigma: float = 1.0
    kind = "tabular"

    def __post_init__(self):
        object.__setattr__(self, "table", _frozen(self.table))

    def mean(self):
        return np.array(self.table)

    def sample(self, rng, contexts, actions):
        mu = self.table[contexts, actions]
        return mu + self.sigma * rng.standard_normal(np.shape(mu))


@dataclass(frozen=True, eq=False)
class LinearModel(_OutcomeModel):
    """Y = phi(x, k) . theta + sigma * N(0, 1)."""

    features: np.ndarray
    theta: np.ndarray
    sigma: float = 1.0
    kind = "linear"

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features))
        object.__setattr__(self, "theta", _frozen(self.theta))

    def mean(self):
        return self.features @ self.theta

    def sample(self, rng, contexts, actions):
        mu = self.features[contexts, actions] @ self.theta
        return mu + self.sigma * rng.standard_normal(np.shape(mu))


class _LatentLogit(_OutcomeModel):
    """Binary outcomes Y(k) = I(U <= sigmoid(L[x, k])) with one latent U per individual."""

    binary = True

    def logits(self):
        raise NotImplementedError

    def mean(self):
        return sigmoid(self.logits())

    def potential_outcomes(self, contexts, u):
        """All K potential outcomes for individuals at ``contexts`` with latent draws ``u``."""
        p = self.mean()[np.asarray(contexts)]
        return (np.asarray(u, dtype=float)[..., None] <= p).astype(np.int8)

    def sample(self, rng, contexts, actions):
        p = self.mean()[contexts, actions]
        return (rng.random(np.shape(p)) <= p).astype(np.int8)


@dataclass(frozen=True, eq=False)
class LogisticModel(_LatentLogit):
    features: np.ndarray
    theta: np.ndarray
    kind = "logistic"

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features))
        object.__setattr__(self, "theta", _frozen(self.theta))

    def logits(self):
        return self.features @ self.theta


@dataclass(frozen=True, eq=False)
class StructuralModel(_LatentLogit):
    """Baseline logit shifted by gamma1 for action 1 and gamma2 * x_dist for action 2.

    With gamma1 >= 0 and gamma2 * x_dist >= 0 every treated outcome dominates
    the untreated one under a shared latent draw.
    """

    base_logit: np.ndarray
    x_dist: np.ndarray
    gamma1: float = 4.0
    gamma2: float = -0.75
    kind = "structural"

    def __post_init__(self):
        object.__setattr__(self, "base_logit", _frozen(self.base_logit))
        object.__setattr__(self, "x_dist", _frozen(self.x_dist))

    def logits(self):
        b = self.base_logit
        return np.stack([b, b + self.gamma1, b + self.gamma2 * self.x_dist], axis=1)


@dataclass(frozen=True, eq=False)
class StylizedModel(_LatentLogit):
    """Two actions; logit (1 + a) x + (1 - g) x a - 1 for covariate x and group g."""

    x: np.ndarray
    g: np.ndarray
    kind = "stylized"

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        object.__setattr__(self, "g", _frozen(self.g, np.int8))

    def logits(self):
        x, g = self.x, self.g
        return np.stack([x - 1.0, 2.0 * x + (1 - g) * x - 1.0], axis=1)


# ---------------------------------------------------------------- rewards


@dataclass(frozen=True, eq=False)
class RewardFunction:
    """r(x, a, y).

    ``kind="identity"``: r = y.
    ``kind="table"``: ``table[x, k, y]`` for binary outcomes, NaN marks a missing entry.
    ``kind="structured"``: r = (a + c1 y)(1 + c2 I_frequent(x)) with a = I(k > 0).
    """

    kind: str = "identity"
    table: Optional[np.ndarray] = None
    c1: float = 1.0
    c2: float = 0.0
    frequent: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("identity", "table", "structured"):
            raise ValueError(f"unknown reward kind {self.kind!r}")
        if self.kind == "table":
            t = _frozen(self.table)
            if t.ndim != 3 or t.shape[2] != 2:
                raise ValueError("reward table must have shape (X, K, 2)")
            object.__setattr__(self, "table", t)
        if self.frequent is not None:
            object.__setattr__(self, "frequent", _frozen(self.frequent, bool))

    @classmethod
    def identity(cls):
        return cls("identity")

    def __call__(self, x, k, y):
        if self.kind == "identity":
            return float(y)
        if self.kind == "table":
            v = self.table[x, k, int(y)]
            if np.isnan(v):
                raise MissingRewardError((x, k, int(y)))
            return float(v)
        freq = 0.0 if self.frequent is None else float(self.frequent[x])
        return (float(k > 0) + self.c1 * y) * (1.0 + self.c2 * freq)


@dataclass(frozen=True)
class UtilitySpec:
    """Parity weights (one per group, in population group order) and per-capita budget."""

    parity_weights: tuple = ()
    budget: float = 0.0

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(self.parity_weights))
        if any(not np.isfinite(v) or v < 0 for v in lam):
            raise ValueError(f"parity weights must be finite and >= 0, got {lam}")
        if not np.isfinite(self.budget) or self.budget < 0:
            raise ValueError(f"budget must be finite and >= 0, got {self.budget}")
        object.__setattr__(self, "parity_weights", lam)
        object.__setattr__(self, "budget", float(self.budget))

    def weights(self, n_groups):
        lam = np.asarray(self.parity_weights, dtype=float)
        if lam.size == 1 and n_groups != 1:
            lam = np.full(n_groups, lam[0])
        if lam.size == 0:
            lam = np.zeros(n_groups)
        if lam.size != n_groups:
            raise ValueError(f"{lam.size} parity weights for {n_groups} groups")
        return lam


def expected_rewards(pop, reward, model):
    """f(x, k) = E[r(x, a_k, Y(a_k)) | X = x], in closed form."""
    mean = np.asarray(model.mean(), dtype=float)
    if mean.shape != (pop.n_contexts, pop.n_actions):
        raise PopulationError(f"model mean shape {mean.shape} does not match population")
    if reward is None or reward.kind == "identity":
        return mean
    if reward.kind == "structured":
        a = (np.arange(pop.n_actions) > 0).astype(float)[None, :]
        freq = np.zeros(pop.n_contexts) if reward.frequent is None else reward.frequent.astype(float)
        return (a + reward.c1 * mean) * (1.0 + reward.c2 * freq)[:, None]
    if not getattr(model, "binary", False):
        raise ValueError("table rewards need a binary outcome model")
    t = reward.table
    if t.shape[:2] != mean.shape:
        raise ValueError(f"reward table shape {t.shape} does not match population")
    reach1 = mean > 0
    reach0 = mean < 1
    for y, reach in ((0, reach0), (1, reach1)):
        bad = np.argwhere(np.isnan(t[:, :, y]) & reach)
        if bad.size:
            x, k = bad[0]
            raise MissingRewardError(f"reward undefined at (x={pop.ids[x]!r}, k={k}, y={y})")
    r0 = np.where(reach0, t[:, :, 0], 0.0)
    r1 = np.where(reach1, t[:, :, 1], 0.0)
    return r0 * (1.0 - mean) + r1 * mean


# ---------------------------------------------------------------- generators


@dataclass(frozen=True)
class SyntheticPopConfig:
    """Attribute distributions and coefficients for the structural population.

    Attribute columns, in order: vietnamese, felony, male, age (decades from 35),
    x_dist = log(miles / 20), failures to appear (two years), inverse required
    appearances (two years). ``beta`` holds one coefficient per attribute and
    ``intercept`` the constant.
    """

    n: int = 5000
    intercept: float = 0.0
    beta: tuple = (1.0, -0.3, -0.2, 0.15, -0.3, -0.4, 0.5)
    gamma1: float = 4.0
    gamma2: float = -0.75
    cost_per_mile: float = 10.0
    voucher_cost: float = 7.5
    max_miles: float = 20.0
    p_vietnamese: float = 0.3
    p_felony: float = 0.4
    p_male: float = 0.75
    age_mean: float = 35.0
    age_sd: float = 11.0
    # log-miles ~ Normal(mean, sd) truncated to [log(min_miles), log(max_miles)]
    log_miles_mean: tuple = (1.2, 1.9)  # (white, vietnamese)
    log_miles_sd: float = 0.6
    min_miles: float = 0.5
    fta_rate: float = 0.6
    appearances_rate: float = 3.0

    def __post_init__(self):
        if len(self.beta) != len(ATTRIBUTES):
            raise ValueError(f"beta needs {len(ATTRIBUTES)} coefficients")


ATTRIBUTES = ("vietnamese", "felony", "male", "age", "x_dist", "fta", "inv_appearances")
STRUCTURAL_ACTIONS = ("none", "rideshare", "voucher")
STRUCTURAL_GROUPS = ("white", "vietnamese")


def sample_attributes(cfg, n, rng):
    """(n, 7) attribute matrix and the miles column."""
    viet = rng.random(n) < cfg.p_vietnamese
    felony = rng.random(n) < cfg.p_felony
    male = rng.random(n) < cfg.p_male
    age = np.clip(rng.normal(cfg.age_mean, cfg.age_sd, n), 18.0, 80.0)
    lo, hi = np.log(cfg.min_miles), np.log(cfg.max_miles)
    mu = np.where(viet, cfg.log_miles_mean[1], cfg.log_miles_mean[0])
    lmiles = mu + cfg.log_miles_sd * rng.standard_normal(n)
    # resample out-of-range draws so the distance law stays a proper truncation
    bad = (lmiles < lo) | (lmiles > hi)
    while bad.any():
        lmiles[bad] = mu[bad] + cfg.log_miles_sd * rng.standard_normal(bad.sum())
        bad = (lmiles < lo) | (lmiles > hi)
    miles = np.exp(lmiles)
    x_dist = lmiles - hi
    fta = rng.poisson(cfg.fta_rate, n)
    inv_app = 1.0 / (1.0 + rng.poisson(cfg.appearances_rate, n))
    attrs = np.column_stack([
        viet.astype(float), felony.astype(float), male.astype(float),
        (age - 35.0) / 10.0, x_dist, fta.astype(float), inv_app,
    ])
    return attrs, miles


def structural_features(attrs):
    """phi(x, k) = [1, attributes, I(k=1), I(k=2) x_dist]; shape (n, 3, 10)."""
    n = attrs.shape[0]
    base = np.column_stack([np.ones(n), attrs])
    feats = np.zeros((n, 3, base.shape[1] + 2))
    feats[:, :, : base.shape[1]] = base[:, None, :]
    feats[:, 1, -2] = 1.0
    feats[:, 2, -1] = attrs[:, 4]
    return feats


def gen_structural_population(cfg=None, rng_seed=0):
    """Synthetic court-appearance population with three actions.

    Returns ``(population, model, attributes)``; contexts are equiprobable.
    """
    cfg = cfg or SyntheticPopConfig()
    if cfg.n <= 0:
        raise PopulationError("empty population: n must be positive")
    rng = np.random.default_rng(rng_seed)
    attrs, miles = sample_attributes(cfg, cfg.n, rng)
    base = cfg.intercept + attrs @ np.asarray(cfg.beta, dtype=float)
    model = StructuralModel(base, attrs[:, 4], cfg.gamma1, cfg.gamma2)
    costs = np.column_stack([
        np.zeros(cfg.n), cfg.cost_per_mile * miles, np.full(cfg.n, cfg.voucher_cost),
    ])
    viet = attrs[:, 0] > 0.5
    pop = Population(
        ids=tuple(range(cfg.n)),
        probs=np.full(cfg.n, 1.0 / cfg.n),
        costs=costs,
        membership=np.column_stack([~viet, viet]),
        actions=STRUCTURAL_ACTIONS,
        groups=STRUCTURAL_GROUPS,
        features=structural_features(attrs),
    )
    return pop, model, attrs


def stylized_features(x, g):
    """phi(x, a) = [1, x, a x, a x (1 - g)], matching the stylized logit with theta = (-1, 1, 1, 1)."""
    n = x.size
    feats = np.zeros((n, 2, 4))
    feats[:, :, 0] = 1.0
    feats[:, :, 1] = x[:, None]
    feats[:, 1, 2] = x
    feats[:, 1, 3] = x * (1 - g)
    return feats


def gen_stylized_population(n, rng_seed=0):
    """Two equal-odds groups, one covariate, unit-cost treatment.

    Returns ``(population, model, u)`` where ``u`` holds each individual's
    latent uniform, so realized potential outcomes are
    ``model.potential_outcomes(range(n), u)``. Group ``"g1"`` (G = 1) is the
    target group with the smaller treatment effect.
    """
    if n <= 0:
        raise PopulationError("empty population: n must be positive")
    rng = np.random.default_rng(rng_seed)
    x = rng.random(n)
    g = (rng.random(n) < 0.5).astype(np.int8)
    u = rng.random(n)
    pop = Population(
        ids=tuple(range(n)),
        probs=np.full(n, 1.0 / n),
        costs=np.column_stack([np.zeros(n), np.ones(n)]),
        membership=np.column_stack([g == 0, g == 1]),
        actions=("none", "treat"),
        groups=("g0", "g1"),
        features=stylized_features(x, g),
    )
    return pop, StylizedModel(x, g), u
