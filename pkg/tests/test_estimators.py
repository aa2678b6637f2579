import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from fairalloc.estimators import (
    TAU_DEFAULT,
    ConvergenceError,
    Dataset,
    FittedModel,
    RankError,
    fit_linear,
    fit_logistic,
    fit_tabular,
    optimistic_estimate,
    optimistic_table,
    posterior_draw,
)
from fairalloc.population import sigmoid


def _logit_data(rng, theta, n):
    Phi = rng.standard_normal((n, theta.size))
    y = (rng.random(n) < sigmoid(Phi @ theta)).astype(float)
    # one context per row, one action: features[x, 0] = Phi[x]
    return Dataset(np.arange(n), np.zeros(n), y), Phi[:, None, :]


def _penalized_nll(theta, Phi, y, tau):
    z = Phi @ theta
    return float(np.sum(np.logaddexp(0, z) - y * z) + 0.5 * tau * theta @ theta)


def _penalized_grad(theta, Phi, y, tau):
    return Phi.T @ (sigmoid(Phi @ theta) - y) + tau * theta


# ---------------------------------------------------------------- dataset


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset([0, 1], [0], [1.0, 2.0])
    with pytest.raises(ValueError):
        Dataset([0], [0], [np.nan])
    with pytest.raises(ValueError):
        fit_tabular(Dataset([0], [3], [1.0]), 1, 2)


def test_dataset_csv_columns():
    d = Dataset.from_records([(0, 1, 1.0), (1, 0, 0.0)], method="rct", rep=3)
    lines = d.to_csv(ids=("a", "b")).splitlines()
    assert lines[0] == "iter,context_id,action,outcome,cost,method,rep"
    assert lines[1] == "1,a,1,1.0,nan,rct,3"


# ---------------------------------------------------------------- tabular


def test_tabular_cell_mean():
    m = fit_tabular(Dataset.from_records([(0, 1, 1), (0, 1, 0), (0, 1, 1), (0, 1, 0)]), 1, 2)
    assert m.mean[0, 1] == 0.5 and m.counts[0, 1] == 4
    assert m.unobserved[0, 0] and m.mean[0, 0] == 0.5
    assert m.binary


def test_tabular_constant_data():
    m = fit_tabular(Dataset([0, 0, 1], [0, 0, 1], [0.37] * 3), 2, 2, prior_mean=0.1)
    assert m.mean[0, 0] == 0.37 and m.mean[1, 1] == 0.37 and m.mean[0, 1] == 0.1


def test_tabular_concentration():
    rng = np.random.default_rng(8)
    f = rng.random((3, 2))
    n, sigma = 10 ** 4, 0.5
    ctx = np.repeat(np.arange(3), 2 * n)
    act = np.tile(np.repeat([0, 1], n), 3)
    y = f[ctx, act] + sigma * rng.standard_normal(ctx.size)
    m = fit_tabular(Dataset(ctx, act, y), 3, 2)
    assert np.abs(m.mean - f).max() < 4 * sigma / np.sqrt(n)
    assert m.sigma2 == pytest.approx(sigma ** 2, rel=0.02)


# ---------------------------------------------------------------- linear


def test_linear_exact_interpolation():
    rng = np.random.default_rng(1)
    for d in (1, 2, 4):
        feats = rng.standard_normal((d, 1, d))
        theta = rng.standard_normal(d)
        m = fit_linear(Dataset(np.arange(d), np.zeros(d), feats[:, 0] @ theta), feats)
        assert np.abs(m.mean - theta).max() < 1e-10


def test_linear_noiseless():
    rng = np.random.default_rng(2)
    feats = rng.standard_normal((50, 1, 2))
    m = fit_linear(Dataset(np.arange(50), np.zeros(50), feats[:, 0] @ [1.0, -2.0]), feats)
    assert np.allclose(m.mean, [1.0, -2.0], rtol=0, atol=1e-12)


def test_linear_rank_deficiency():
    feats = np.ones((3, 1, 2))
    data = Dataset([0, 1, 2], [0, 0, 0], [1.0, 2.0, 3.0])
    with pytest.raises(RankError):
        fit_linear(data, feats, ridge=None)
    m = fit_linear(data, feats)
    assert m.ridge > 0 and np.isfinite(m.mean).all()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_linear_matches_qr(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(5, 60)), int(rng.integers(1, 5))
    feats = rng.standard_normal((n, 1, d))
    y = rng.standard_normal(n)
    m = fit_linear(Dataset(np.arange(n), np.zeros(n), y), feats)
    Q, R = np.linalg.qr(feats[:, 0])
    ref = np.linalg.solve(R, Q.T @ y)
    assert np.abs(m.mean - ref).max() <= 1e-9 * max(1.0, np.abs(ref).max())
    evals = np.linalg.eigvalsh(m.cov)
    assert evals.min() >= -1e-10 and np.allclose(m.cov, m.cov.T)


def test_linear_error_within_fixed_design_bound():
    rng = np.random.default_rng(77)
    d, n, sigma, delta = 3, 10 ** 4, 0.7, 0.05
    theta = np.array([0.5, -1.0, 2.0])
    rhs = sigma ** 2 * (d + 2 * np.sqrt(d * np.log(3 / delta)) + 2 * np.log(3 / delta)) / n
    hits = 0
    for _ in range(100):
        Phi = rng.standard_normal((n, d))
        y = Phi @ theta + sigma * rng.standard_normal(n)
        m = fit_linear(Dataset(np.arange(n), np.zeros(n), y), Phi[:, None, :])
        S = Phi.T @ Phi / n
        e = m.mean - theta
        hits += e @ S @ e <= rhs
    assert hits >= 95


# ---------------------------------------------------------------- logistic


def test_logistic_symmetric_data():
    Phi = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    y = np.array([1.0, 0.0, 0.0, 1.0])
    m = fit_logistic(Dataset(np.arange(4), np.zeros(4), y), Phi[:, None, :])
    assert np.abs(m.mean).max() < 1e-12


def test_logistic_separable_is_finite():
    Phi = np.array([[1.0], [2.0], [-1.0], [-3.0]])
    y = np.array([1.0, 1.0, 0.0, 0.0])
    m = fit_logistic(Dataset(np.arange(4), np.zeros(4), y), Phi[:, None, :], tau=0.1)
    assert np.isfinite(m.mean).all() and m.mean[0] > 0


def test_logistic_consistency():
    rng = np.random.default_rng(4)
    theta = np.array([0.5, -1.0])
    data, feats = _logit_data(rng, theta, 5 * 10 ** 4)
    m = fit_logistic(data, feats, tau=0.01)
    assert np.abs(m.mean - theta).max() < 0.05


def test_logistic_nonbinary_rejected():
    with pytest.raises(ValueError):
        fit_logistic(Dataset([0], [0], [0.5]), np.ones((1, 1, 1)))


def test_logistic_iteration_cap():
    rng = np.random.default_rng(0)
    data, feats = _logit_data(rng, np.array([1.0, 2.0, -1.0]), 500)
    with pytest.raises(ConvergenceError) as info:
        fit_logistic(data, feats, max_iter=1)
    assert info.value.theta.shape == (3,)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_irls_matches_bfgs_and_certificates(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    theta = rng.standard_normal(d)
    data, feats = _logit_data(rng, theta, int(rng.integers(20, 400)))
    Phi, y = feats[:, 0], data.outcome
    m = fit_logistic(data, feats)
    ref = optimize.minimize(_penalized_nll, np.zeros(d), args=(Phi, y, TAU_DEFAULT), jac=_penalized_grad,
                            method="BFGS", options={"gtol": 1e-10})
    assert np.abs(m.mean - ref.x).max() < 1e-5
    assert np.abs(_penalized_grad(m.mean, Phi, y, TAU_DEFAULT)).max() < 1e-8
    # Laplace precision vs central differences of the gradient
    h = 1e-5
    fd = np.column_stack([(_penalized_grad(m.mean + h * e, Phi, y, TAU_DEFAULT)
                           - _penalized_grad(m.mean - h * e, Phi, y, TAU_DEFAULT)) / (2 * h) for e in np.eye(d)])
    prec = np.linalg.inv(m.cov)
    assert np.abs(prec - fd).max() <= 1e-4 * np.abs(fd).max()
    assert np.linalg.eigvalsh(m.cov).min() >= -1e-10


# ---------------------------------------------------------------- posterior


def test_zero_covariance_draw_is_mean():
    m = FittedModel("linear", np.array([0.3, -0.2]), cov=np.zeros((2, 2)))
    feats = np.ones((1, 2, 2))
    params, f_hat = posterior_draw(m, np.random.default_rng(0), feats)
    assert np.array_equal(params, m.mean)
    for a in (0.1, 0.5, 0.975):
        assert optimistic_estimate(m, a, 0, 1, feats) == pytest.approx(0.1, abs=1e-15)


def test_draw_deterministic():
    m = FittedModel("logistic", np.array([0.3, -0.2]), cov=np.array([[0.5, 0.1], [0.1, 0.2]]))
    feats = np.random.default_rng(1).standard_normal((3, 2, 2))
    a = posterior_draw(m, np.random.default_rng(9), feats)
    b = posterior_draw(m, np.random.default_rng(9), feats)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()


def test_draw_moments():
    cov = np.array([[0.4, -0.15], [-0.15, 0.3]])
    m = FittedModel("linear", np.array([1.0, 2.0]), cov=cov)
    rng = np.random.default_rng(5)
    draws = np.array([posterior_draw(m, rng, np.eye(2)[None])[0] for _ in range(10 ** 5)])
    S = np.cov(draws.T)
    assert np.linalg.norm(S - cov) / np.linalg.norm(cov) < 0.02


def test_tabular_draws_and_quantiles():
    m = fit_tabular(Dataset([0] * 6, [1] * 6, [1, 0, 1, 1, 0, 1]), 1, 2)
    assert optimistic_table(m, 0.9)[0, 1] == pytest.approx(stats.beta.ppf(0.9, 4.5, 2.5))
    g = fit_tabular(Dataset([0] * 4, [0] * 4, [0.2, 0.4, 0.1, 0.5]), 1, 1, sigma=1.0)
    assert optimistic_estimate(g, 0.5, 0, 0) == pytest.approx(g.mean[0, 0], abs=1e-15)
    p, _ = posterior_draw(m, np.random.default_rng(0))
    assert p.shape == (1, 2) and ((p > 0) & (p < 1)).all()


def test_logistic_quantile_closed_form():
    rng = np.random.default_rng(6)
    for _ in range(20):
        d = 3
        A = rng.standard_normal((d, d))
        m = FittedModel("logistic", rng.standard_normal(d), cov=A @ A.T / d)
        feats = rng.standard_normal((4, 2, d))
        x, k = int(rng.integers(4)), int(rng.integers(2))
        phi = feats[x, k]
        want = sigmoid(phi @ m.mean + 1.959963984540054 * np.sqrt(phi @ m.cov @ phi))
        assert abs(optimistic_estimate(m, 0.975, x, k, feats) - want) < 1e-9
        assert optimistic_estimate(m, 0.5, x, k, feats) == pytest.approx(sigmoid(phi @ m.mean), abs=1e-15)


def test_quantile_commutes_with_logit():
    rng = np.random.default_rng(7)
    m = FittedModel("logistic", np.array([0.2, -0.4]), cov=np.array([[0.3, 0.05], [0.05, 0.2]]))
    feats = rng.standard_normal((3, 2, 2))
    theta = rng.multivariate_normal(m.mean, m.cov, size=2 * 10 ** 5)
    z = theta @ feats[1, 0]
    q_then = sigmoid(np.quantile(z, 0.9, method="inverted_cdf"))
    then_q = np.quantile(sigmoid(z), 0.9, method="inverted_cdf")
    assert q_then == then_q
    assert abs(optimistic_table(m, 0.9, feats)[1, 0] - then_q) < 3e-3


def test_alpha_range():
    m = FittedModel("linear", np.zeros(1), cov=np.eye(1))
    with pytest.raises(ValueError):
        optimistic_table(m, 1.0, np.ones((1, 1, 1)))
