"""Reward-model estimation from logged (context, action, outcome) data.

Tabular means, least squares and penalized logistic regression, each with a
Gaussian (or, for binary tabular cells, Beta) posterior used by Thompson
sampling and UCB. The IRLS core is compiled with numba and shared with the
bandit kernel.
"""

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit
from scipy import stats

from .population import sigmoid

__all__ = [
    "Dataset",
    "FittedModel",
    "ConvergenceError",
    "RankError",
    "TAU_DEFAULT",
    "fit_tabular",
    "fit_linear",
    "fit_logistic",
    "posterior_draw",
    "optimistic_estimate",
    "optimistic_table",
]

# independent N(0, 2.5^2) prior on every coefficient
TAU_DEFAULT = 1.0 / 2.5 ** 2
GRAD_TOL = 1e-8


class ConvergenceError(RuntimeError):
    def __init__(self, msg, theta):
        super().__init__(msg)
        self.theta = theta


class RankError(np.linalg.LinAlgError):
    pass


@dataclass
class Dataset:
    """Logged records; ``context`` indexes the population the data came from."""

    context: np.ndarray
    action: np.ndarray
    outcome: np.ndarray
    iteration: Optional[np.ndarray] = None
    cost: Optional[np.ndarray] = None
    method: str = ""
    rep: int = 0

    def __post_init__(self):
        self.context = np.asarray(self.context, dtype=np.int64)
        self.action = np.asarray(self.action, dtype=np.int64)
        self.outcome = np.asarray(self.outcome, dtype=float)
        n = self.context.size
        if self.action.size != n or self.outcome.size != n:
            raise ValueError("context, action and outcome lengths differ")
        if not np.isfinite(self.outcome).all():
            raise ValueError("outcomes must be finite")
        if self.iteration is None:
            self.iteration = np.arange(1, n + 1)
        if self.cost is None:
            self.cost = np.full(n, np.nan)

    @classmethod
    def from_records(cls, records, **kw):
        records = list(records)
        if not records:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0), **kw)
        x, a, y = zip(*records)
        return cls(np.array(x), np.array(a), np.array(y, dtype=float), **kw)

    def __len__(self):
        return self.context.size

    def check_actions(self, n_actions):
        if self.action.size and (self.action.min() < 0 or self.action.max() >= n_actions):
            raise ValueError(f"action index outside [0, {n_actions})")

    def rows(self, features):
        """Feature row phi(x_i, a_i) for each record."""
        return np.asarray(features, dtype=float)[self.context, self.action]

    def to_csv(self, ids=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "context_id", "action", "outcome", "cost", "method", "rep"])
        for i in range(len(self)):
            cid = self.context[i] if ids is None else ids[self.context[i]]
            w.writerow([int(self.iteration[i]), cid, int(self.action[i]), repr(float(self.outcome[i])),
                        repr(float(self.cost[i])), self.method, self.rep])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Point estimate plus posterior.

    tabular: ``mean`` and ``var`` are (X, K) tables; binary cells carry
    Jeffreys Beta parameters in ``beta_a``/``beta_b``.
    linear/logistic: ``mean`` is theta-hat and ``cov`` its covariance.
    """

    kind: str
    mean: np.ndarray
    cov: Optional[np.ndarray] = None
    var: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    unobserved: Optional[np.ndarray] = None
    beta_a: Optional[np.ndarray] = None
    beta_b: Optional[np.ndarray] = None
    sigma2: float = float("nan")
    ridge: float = 0.0
    iterations: int = 0

    @property
    def binary(self):
        return self.beta_a is not None

    def predict(self, features=None, params=None):
        """Expected-reward table under the point estimate (or ``params``)."""
        p = self.mean if params is None else params
        if self.kind == "tabular":
            return np.array(p, dtype=float)
        idx = np.asarray(features, dtype=float) @ p
        return sigmoid(idx) if self.kind == "logistic" else idx


# ---------------------------------------------------------------- tabular


def fit_tabular(data, n_contexts, n_actions, prior_mean=0.5, sigma=None, binary=None):
    """Cell means with counts; unobserved cells get ``prior_mean`` and are flagged.

    Binary outcomes (auto-detected unless ``binary`` is given) get a Jeffreys
    Beta(s + 1/2, n - s + 1/2) posterior per cell. Otherwise the posterior is
    Normal(mean, sigma^2 / n) with sigma pooled from within-cell residuals when
    not supplied.
    """
    data.check_actions(n_actions)
    shape = (n_contexts, n_actions)
    counts = np.zeros(shape, dtype=np.int64)
    sums = np.zeros(shape)
    np.add.at(counts, (data.context, data.action), 1)
    np.add.at(sums, (data.context, data.action), data.outcome)
    seen = counts > 0
    mean = np.full(shape, float(prior_mean))
    mean[seen] = sums[seen] / counts[seen]
    if binary is None:
        binary = bool(len(data)) and bool(np.isin(data.outcome, (0.0, 1.0)).all())
    if binary:
        a = sums + 0.5
        b = counts - sums + 0.5
        var = a * b / ((a + b) ** 2 * (a + b + 1.0))
        return FittedModel("tabular", mean, var=var, counts=counts, unobserved=~seen, beta_a=a, beta_b=b)
    if sigma is None:
        resid = data.outcome - mean[data.context, data.action]
        dof = len(data) - int(seen.sum())
        sigma2 = float(resid @ resid / dof) if dof > 0 else 1.0
    else:
        sigma2 = float(sigma) ** 2
    var = np.where(seen, sigma2 / np.maximum(counts, 1), sigma2)
    return FittedModel("tabular", mean, var=var, counts=counts, unobserved=~seen, sigma2=sigma2)


# ---------------------------------------------------------------- linear


def fit_linear(data, features, sigma=None, ridge="auto"):
    """Ordinary least squares on phi(x_i, a_i).

    ``ridge="auto"`` adds a small ridge term when the design is rank
    deficient (recorded in ``FittedModel.ridge``); ``ridge=None`` raises
    :class:`RankError` instead. Posterior covariance is sigma-hat^2 (X'X)^-1.
    """
    X = data.rows(features)
    y = data.outcome
    n, d = X.shape
    rank = np.linalg.matrix_rank(X) if n else 0
    lam = 0.0
    if rank < d:
        if ridge is None:
            raise RankError(f"design has rank {rank} < d = {d} ({n} rows)")
        lam = 1e-8 * max(1.0, float(np.trace(X.T @ X)) / d) if ridge == "auto" else float(ridge)
        G = X.T @ X + lam * np.eye(d)
        theta = np.linalg.solve(G, X.T @ y)
    else:
        theta = np.linalg.lstsq(X, y, rcond=None)[0]
        G = X.T @ X
    resid = y - X @ theta
    if sigma is not None:
        sigma2 = float(sigma) ** 2
    elif n > d:
        sigma2 = float(resid @ resid) / (n - d)
    else:
        sigma2 = 0.0
    cov = sigma2 * np.linalg.inv(G)
    cov = 0.5 * (cov + cov.T)
    return FittedModel("linear", theta, cov=cov, sigma2=sigma2, ridge=lam)


# ---------------------------------------------------------------- logistic (IRLS)


@njit(cache=True, nogil=True)
def _logpost(Phi, y, n, tau, theta, grad, A):
    """Penalized log-likelihood at theta; fills its gradient and A = H + tau I."""
    P = Phi[:n]
    d = theta.size
    eta = P @ theta
    W = np.empty_like(P)
    r = np.empty(n)
    obj = 0.0
    for i in range(n):
        et = eta[i]
        e = np.exp(-abs(et))
        obj += y[i] * et - (max(et, 0.0) + np.log1p(e))
        p = 1.0 / (1.0 + e) if et >= 0.0 else e / (1.0 + e)
        r[i] = y[i] - p
        w = p * (1.0 - p)
        for a in range(d):
            W[i, a] = w * P[i, a]
    g = r @ P
    H = P.T @ W
    for a in range(d):
        grad[a] = g[a] - tau * theta[a]
        obj -= 0.5 * tau * theta[a] * theta[a]
        for b in range(d):
            A[a, b] = 0.5 * (H[a, b] + H[b, a])
        A[a, a] += tau
    return obj


@njit(cache=True, nogil=True)
def cholesky(A, L):
    """Lower Cholesky factor into L; False if A is not positive definite."""
    d = A.shape[0]
    for j in range(d):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, d):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
        for i in range(j):
            L[i, j] = 0.0
    return True


@njit(cache=True, nogil=True)
def forward(L, b, out):
    """Solve L out = b."""
    d = b.size
    for i in range(d):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * out[k]
        out[i] = s / L[i, i]


@njit(cache=True, nogil=True)
def backward(L, b, out):
    """Solve L' out = b."""
    d = b.size
    for i in range(d - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, d):
            s -= L[k, i] * out[k]
        out[i] = s / L[i, i]


@njit(cache=True, nogil=True)
def irls(Phi, y, n, tau, theta, L, max_iter, tol):
    """Newton/IRLS with step halving on the first ``n`` rows, updating ``theta`` in place.

    On return L holds the Cholesky factor of H + tau I at the final iterate.
    Returns (status, iterations) with status 0 converged, 1 iteration cap,
    2 line search failure, 3 non-positive-definite system.
    """
    d = theta.size
    grad = np.empty(d)
    A = np.empty((d, d))
    g2 = np.empty(d)
    A2 = np.empty((d, d))
    tmp = np.empty(d)
    step = np.empty(d)
    trial = np.empty(d)
    obj = _logpost(Phi, y, n, tau, theta, grad, A)
    it = 0
    while True:
        if not cholesky(A, L):
            return 3, it
        gmax = 0.0
        for a in range(d):
            gmax = max(gmax, abs(grad[a]))
        if gmax < tol:
            return 0, it
        if it >= max_iter:
            return 1, it
        it += 1
        forward(L, grad, tmp)
        backward(L, tmp, step)
        t = 1.0
        while True:
            for a in range(d):
                trial[a] = theta[a] + t * step[a]
            obj2 = _logpost(Phi, y, n, tau, trial, g2, A2)
            if obj2 >= obj - 1e-12 * (1.0 + abs(obj)):
                break
            t *= 0.5
            if t < 1e-10:
                return 2, it
        for a in range(d):
            theta[a] = trial[a]
            grad[a] = g2[a]
            for b in range(d):
                A[a, b] = A2[a, b]
        obj = obj2


def fit_logistic(data, features, tau=TAU_DEFAULT, max_iter=100, tol=GRAD_TOL, theta0=None):
    """Penalized logistic MLE by IRLS with a Laplace posterior N(theta-hat, (H + tau I)^-1)."""
    Phi = np.ascontiguousarray(data.rows(features))
    return fit_logistic_rows(Phi, data.outcome, tau, max_iter, tol, theta0)


def fit_logistic_rows(Phi, y, tau=TAU_DEFAULT, max_iter=100, tol=GRAD_TOL, theta0=None):
    Phi = np.ascontiguousarray(Phi, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("logistic fit needs binary outcomes")
    if tau <= 0 and Phi.shape[0] == 0:
        raise RankError("no data and no prior")
    d = Phi.shape[1]
    theta = np.zeros(d) if theta0 is None else np.array(theta0, dtype=float)
    L = np.zeros((d, d))
    status, its = irls(Phi, y, Phi.shape[0], float(tau), theta, L, int(max_iter), float(tol))
    if status != 0:
        why = {1: "iteration cap reached", 2: "line search failed", 3: "Hessian not positive definite"}[status]
        raise ConvergenceError(f"IRLS did not converge after {its} iterations: {why}", theta)
    Linv = np.linalg.inv(L)
    cov = Linv.T @ Linv
    return FittedModel("logistic", theta, cov=0.5 * (cov + cov.T), iterations=its)


# ---------------------------------------------------------------- posterior use


def _cov_sqrt(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        return V * np.sqrt(np.clip(w, 0.0, None))


def posterior_draw(model, rng, features=None):
    """One posterior sample and the f-hat table it induces: ``(params, f_hat)``."""
    if model.kind == "tabular":
        if model.binary:
            params = rng.beta(model.beta_a, model.beta_b)
        else:
            params = model.mean + np.sqrt(model.var) * rng.standard_normal(model.mean.shape)
        return params, params
    z = rng.standard_normal(model.mean.size)
    params = model.mean + _cov_sqrt(model.cov) @ z
    return params, model.predict(features, params)


def _index_sd(model, phi):
    phi = np.asarray(phi, dtype=float)
    return np.sqrt(np.clip(np.einsum("...i,ij,...j->...", phi, model.cov, phi), 0.0, None))


def optimistic_table(model, alpha, features=None):
    """alpha-quantile of the posterior of every expected reward."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if model.kind == "tabular":
        if model.binary:
            return stats.beta.ppf(alpha, model.beta_a, model.beta_b)
        return model.mean + stats.norm.ppf(alpha) * np.sqrt(model.var)
    feats = np.asarray(features, dtype=float)
    idx = feats @ model.mean + stats.norm.ppf(alpha) * _index_sd(model, feats)
    return sigmoid(idx) if model.kind == "logistic" else idx


def optimistic_estimate(model, alpha, x, k, features=None):
    """alpha-quantile of the posterior of f(x, k).

    Gaussian quantile of the linear index, pushed through the (monotone)
    mean function for logistic models.
    """
    if model.kind == "tabular":
        sub = FittedModel("tabular", model.mean[x:x + 1, k:k + 1], var=model.var[x:x + 1, k:k + 1],
                          beta_a=None if model.beta_a is None else model.beta_a[x:x + 1, k:k + 1],
                          beta_b=None if model.beta_b is None else model.beta_b[x:x + 1, k:k + 1])
        return float(optimistic_table(sub, alpha)[0, 0])
    phi = np.asarray(features, dtype=float)[x, k][None, None, :]
    return float(optimistic_table(model, alpha, phi)[0, 0])
