import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fairalloc.fileio import dumps, load_population, population_from_dict, population_to_dict
from fairalloc.population import (
    LogisticModel,
    MissingRewardError,
    Population,
    PopulationError,
    RewardFunction,
    StructuralModel,
    StylizedModel,
    SyntheticPopConfig,
    TabularModel,
    expected_rewards,
    gen_structural_population,
    gen_stylized_population,
    sigmoid,
)

from conftest import FIXTURES, random_population


def test_identity_reward_symmetric_logit():
    pop = Population(("a", "b"), [0.5, 0.5], np.zeros((2, 2)), [[True], [True]], ("k0", "k1"), ("g",),
                     features=np.ones((2, 2, 3)))
    model = LogisticModel(pop.features, np.zeros(3))
    assert np.array_equal(expected_rewards(pop, RewardFunction.identity(), model), np.full((2, 2), 0.5))


def test_counterexample_rewards_match_fixture():
    doc = load_population(f"{FIXTURES}/counterexample.json")
    f = expected_rewards(doc.population, None, doc.model)
    assert f[0, 2] == 0.3
    assert np.array_equal(f, doc.expected_rewards)
    assert np.array_equal(f, [[0.1, 0.6, 0.3], [0.1, 0.2, 0.12]])


def test_structural_reward_matches_monte_carlo():
    # one context, structured reward r = (a + c1 y)(1 + c2 I_freq), 10^6 latent draws
    model = StructuralModel(np.array([-0.4]), np.array([-1.3]), 4.0, -0.75)
    pop = Population((0,), [1.0], [[0.0, 5.0, 7.5]], [[True]], ("n", "r", "v"), ("g",))
    reward = RewardFunction("structured", c1=2.0, c2=0.5, frequent=np.array([True]))
    f = expected_rewards(pop, reward, model)[0]
    rng = np.random.default_rng(0)
    u = rng.random(10 ** 6)
    y = model.potential_outcomes(np.zeros(u.size, dtype=int), u)
    for k in range(3):
        r = (float(k > 0) + 2.0 * y[:, k]) * 1.5
        se = r.std() / np.sqrt(r.size)
        assert abs(r.mean() - f[k]) < 3 * se


def test_missing_reward_names_cell():
    pop = Population((0, 1), [0.5, 0.5], np.zeros((2, 2)), [[True], [True]], ("k0", "k1"), ("g",))
    model = StylizedModel(np.array([0.2, 0.7]), np.array([0, 1]))
    table = np.ones((2, 2, 2))
    table[1, 0, 1] = np.nan
    with pytest.raises(MissingRewardError, match=r"x=1, k=0, y=1"):
        expected_rewards(pop, RewardFunction("table", table), model)


def test_table_reward_unreachable_entry_is_not_needed():
    pop = Population((0,), [1.0], np.zeros((1, 2)), [[True]], ("k0", "k1"), ("g",))

    class Certain:  # Bernoulli outcomes with means exactly 0 and 1
        binary = True

        def mean(self):
            return np.array([[0.0, 1.0]])

    model = Certain()
    table = np.array([[[2.0, np.nan], [np.nan, 3.0]]])
    assert np.array_equal(expected_rewards(pop, RewardFunction("table", table), model), [[2.0, 3.0]])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_expected_rewards_linear_in_table(seed):
    rng = np.random.default_rng(seed)
    X, K = rng.integers(1, 6), rng.integers(1, 4)
    pop = Population(tuple(range(X)), np.full(X, 1.0 / X), np.zeros((X, K)), np.ones((X, 1), bool),
                     tuple(range(K)), ("g",), features=rng.standard_normal((X, K, 2)))
    model = LogisticModel(pop.features, rng.standard_normal(2))
    t1, t2 = rng.standard_normal((2, X, K, 2))
    f1 = expected_rewards(pop, RewardFunction("table", t1), model)
    f2 = expected_rewards(pop, RewardFunction("table", t2), model)
    f12 = expected_rewards(pop, RewardFunction("table", t1 + t2), model)
    assert np.allclose(f12, f1 + f2, rtol=0, atol=1e-12)


def test_structural_collapse_without_treatment_effects():
    pop, model, _ = gen_structural_population(SyntheticPopConfig(n=200, gamma1=0.0, gamma2=0.0), 3)
    u = np.linspace(0, 1, 101)
    for x in range(0, 200, 17):
        y = model.potential_outcomes(np.full(u.size, x), u)
        assert (y[:, 0] == y[:, 1]).all() and (y[:, 0] == y[:, 2]).all()


def test_structural_default_is_monotone():
    pop, model, _ = gen_structural_population(SyntheticPopConfig(n=3000), 11)
    u = np.linspace(0, 1, 257)
    y = model.potential_outcomes(np.repeat(np.arange(3000), u.size), np.tile(u, 3000))
    assert (y[:, 0] <= y[:, 1]).all() and (y[:, 0] <= y[:, 2]).all()


def test_structural_is_deterministic():
    a = gen_structural_population(SyntheticPopConfig(n=100), 5)
    b = gen_structural_population(SyntheticPopConfig(n=100), 5)
    assert dumps(population_to_dict(a[0], a[1])) == dumps(population_to_dict(b[0], b[1]))


def test_structural_costs_and_shape():
    cfg = SyntheticPopConfig(n=500, cost_per_mile=5.0)
    pop, model, attrs = gen_structural_population(cfg, 0)
    assert pop.actions == ("none", "rideshare", "voucher")
    assert np.allclose(pop.probs, 1 / 500)
    assert (pop.costs[:, 0] == 0).all() and (pop.costs[:, 2] == 7.5).all()
    miles = np.exp(attrs[:, 4]) * cfg.max_miles
    assert np.allclose(pop.costs[:, 1], 5.0 * miles)
    assert model.binary


def test_empty_populations_rejected():
    with pytest.raises(PopulationError):
        gen_structural_population(SyntheticPopConfig(n=0))
    with pytest.raises(PopulationError):
        gen_stylized_population(0)


def test_stylized_monotone_and_zero_covariate():
    pop, model, u = gen_stylized_population(2000, 1)
    y = model.potential_outcomes(np.arange(2000), u)
    assert (y[:, 0] <= y[:, 1]).all()
    m = StylizedModel(np.array([0.0, 0.0]), np.array([0, 1]))
    assert np.allclose(m.mean(), sigmoid(-1.0), rtol=0, atol=1e-15)


def test_stylized_control_mean_matches_quadrature():
    pop, model, u = gen_stylized_population(10 ** 5, 2024)
    y0 = model.potential_outcomes(np.arange(10 ** 5), u)[:, 0]
    exact, _ = integrate.quad(lambda x: 1 / (1 + np.exp(1 - x)), 0, 1)
    assert abs(y0.mean() - exact) < 0.005


def test_monotone_over_latent_grid():
    u = np.linspace(0, 1, 1001)
    m = StylizedModel(np.linspace(0, 1, 11), np.array([0, 1] * 5 + [0]))
    for x in range(11):
        y = m.potential_outcomes(np.full(u.size, x), u)
        assert (y[:, 0] <= y[:, 1]).all()


def test_population_validation():
    with pytest.raises(PopulationError, match="sum"):
        Population((0, 1), [0.5, 0.6], np.zeros((2, 1)), [[True], [True]], ("a",), ("g",))
    with pytest.raises(PopulationError, match="positive"):
        Population((0, 1), [1.0, 0.0], np.zeros((2, 1)), [[True], [True]], ("a",), ("g",))
    with pytest.raises(PopulationError, match="nonnegative"):
        Population((0,), [1.0], [[-1.0]], [[True]], ("a",), ("g",))
    with pytest.raises(PopulationError, match="at least one group"):
        Population((0,), [1.0], [[0.0]], [[False]], ("a",), ("g",))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), partition=st.booleans(), d=st.sampled_from([None, 1, 3]))
def test_population_round_trip_bit_exact(seed, partition, d):
    rng = np.random.default_rng(seed)
    pop = random_population(rng, int(rng.integers(1, 7)), int(rng.integers(1, 4)), 2, partition, features_d=d)
    f = rng.random((pop.n_contexts, pop.n_actions))
    text = dumps(population_to_dict(pop, TabularModel(f, 0.3), f))
    back = population_from_dict(json.loads(text))
    p2 = back.population
    assert p2.ids == pop.ids and p2.actions == pop.actions and p2.groups == pop.groups
    for a, b in ((p2.probs, pop.probs), (p2.costs, pop.costs), (back.expected_rewards, f), (back.model.table, f)):
        assert a.tobytes() == np.asarray(b, dtype=float).tobytes()
    assert np.array_equal(p2.membership, pop.membership)
    if d is not None:
        assert p2.features.tobytes() == pop.features.tobytes()
    assert dumps(population_to_dict(p2, back.model, back.expected_rewards)) == text
