"""Cross-entropy search, policies and exploration-policy training."""

import math

import numpy as np
import pytest

from asidlab.envlab import ParamDistribution, make_env
from asidlab.errors import ConfigurationError, OptimizationError
from asidlab.explore import CemConfig, cem_minimize, random_policy, search_space, train_exploration_policy
from asidlab.fisher import a_optimal_objective
from asidlab.policy import Policy

LIN_PRIOR = ParamDistribution([1.5], [0.7], [0.1], [3.0])


# --- CEM ----------------------------------------------------------------------


def test_cem_quadratic_minimum():
    x0 = np.array([0.7, -1.2, 2.0])
    res = cem_minimize(lambda x: float(np.sum((x - x0) ** 2)), np.zeros(3), CemConfig(iterations=30, seed=1))
    assert np.max(np.abs(res.best_params - x0)) <= 1e-3
    assert res.best_value == pytest.approx(np.sum((res.best_params - x0) ** 2))


def test_cem_best_value_history_non_increasing():
    gen = np.random.default_rng(0)
    noisy = lambda x: float(np.sum(x**2) + 0.1 * gen.standard_normal())
    res = cem_minimize(noisy, np.ones(2), CemConfig(iterations=20))
    values = [h.best_value for h in res.history]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_cem_minimal_population():
    res = cem_minimize(lambda x: float(x[0] ** 2), [1.0], CemConfig(population=2, elite_frac=0.5, iterations=5))
    assert len(res.history) == 5 and math.isfinite(res.best_value)


def test_cem_config_invariants():
    with pytest.raises(ConfigurationError):
        CemConfig(population=1)
    with pytest.raises(ConfigurationError):
        CemConfig(elite_frac=0.0)
    with pytest.raises(ConfigurationError):
        CemConfig(min_std=-1.0)
    assert CemConfig(population=10, elite_frac=0.01).n_elite == 1


def test_cem_deterministic_in_seed():
    f = lambda x: float(np.sum(np.cos(3 * x) + x**2))
    a = cem_minimize(f, np.zeros(2), CemConfig(seed=9, iterations=10))
    b = cem_minimize(f, np.zeros(2), CemConfig(seed=9, iterations=10))
    c = cem_minimize(f, np.zeros(2), CemConfig(seed=10, iterations=10))
    np.testing.assert_array_equal(a.best_params, b.best_params)
    assert not np.array_equal(a.history[0].mean, c.history[0].mean)


def test_cem_non_finite_values_are_penalised():
    f = lambda x: math.nan if x[0] < 0 else float((x[0] - 1) ** 2)
    res = cem_minimize(f, [0.0], CemConfig(iterations=20))
    assert res.best_params[0] >= 0
    assert res.best_params[0] == pytest.approx(1.0, abs=1e-3)


def test_cem_all_infinite_raises():
    with pytest.raises(OptimizationError):
        cem_minimize(lambda x: math.inf, [0.0], CemConfig(iterations=3))


def test_cem_keeps_distribution_on_ties():
    res = cem_minimize(lambda x: 1.0, [0.5], CemConfig(init_std=0.2, iterations=5))
    assert all(not h.refit for h in res.history)
    assert res.final_std[0] == pytest.approx(0.2)
    assert res.final_mean[0] == 0.5


def test_cem_reaches_optimum_on_bound():
    res = cem_minimize(lambda x: -float(x[0]), [0.5], CemConfig(iterations=15), lower=[0.0], upper=[1.0])
    assert res.best_params[0] == 1.0


def test_cem_interior_optimum_next_to_bound():
    # candidates clipped onto the bound must not freeze the search there
    f = lambda x: float((x[0] - 2.9) ** 2)
    res = cem_minimize(f, [1.5], CemConfig(init_std=2.1, iterations=40, min_std=1e-10), lower=[0.1], upper=[3.0])
    assert res.best_params[0] == pytest.approx(2.9, abs=1e-6)


def test_cem_batched_objective_sees_iteration():
    seen = []

    def f(X, it):
        seen.append((it, X.shape))
        return np.sum(X**2, axis=1)

    cem_minimize(f, np.ones(2), CemConfig(population=8, iterations=3), batched=True)
    assert seen == [(0, (8, 2)), (1, (8, 2)), (2, (8, 2))]


# --- policies -------------------------------------------------------------------


def test_policy_parameter_count():
    env = make_env("pointmass-friction")
    assert Policy.zeros(env, "linear_feedback").n_params == 2 * 6 + 2
    assert Policy.zeros(env, "open_loop").n_params == env.horizon * 2
    with pytest.raises(ConfigurationError):
        Policy.for_env(env, "open_loop", np.zeros(3))
    with pytest.raises(ConfigurationError):
        Policy.for_env(env, "mlp", np.zeros(3))


def test_policy_is_stateless_and_clipped():
    env = make_env("pointmass-friction")
    pol = Policy.for_env(env, "linear_feedback", np.r_[np.full(12, 3.0), 0.0, 0.0])
    s = np.array([0.1, 0.2, 0.4, 0.17, 0.0, 0.0])
    a1 = pol.act(4, s, env)
    pol.act(0, -s, env)
    np.testing.assert_array_equal(pol.act(4, s, env), a1)
    assert np.all(np.abs(a1) <= 1.0)


def test_policy_record_version_checked():
    env = make_env("linear1d")
    rec = Policy.zeros(env, "open_loop").to_dict()
    assert rec["version"] == 1
    rec["version"] = 99
    with pytest.raises(ConfigurationError):
        Policy.from_dict(rec)


def test_random_policy_inside_search_box():
    env = make_env("multi-region")
    space = search_space(env, "linear_feedback")
    for seed in range(20):
        p = random_policy(env, "linear_feedback", seed).params
        assert np.all(p >= space.lower) and np.all(p <= space.upper)


# --- exploration training -----------------------------------------------------


def test_linear1d_exploration_is_bang_bang():
    env = make_env("linear1d")
    pol = train_exploration_policy(env, LIN_PRIOR, "open_loop", CemConfig(seed=0))
    assert np.all(np.abs(pol.params) >= 0.95)


def test_trained_objective_beats_zero_and_random_policies():
    env = make_env("linear1d")
    pol = train_exploration_policy(env, LIN_PRIOR, "open_loop", CemConfig(seed=3))
    score = lambda p: a_optimal_objective(p, env, LIN_PRIOR, 16, seed=123)
    trained = score(pol)
    assert trained <= score(Policy.zeros(env, "open_loop"))
    randoms = [score(random_policy(env, "open_loop", s)) for s in range(100)]
    assert trained <= np.median(randoms)


def test_exploration_seed_symmetry():
    env = make_env("linear1d")
    values = []
    for seed in (0, 1):
        pol = train_exploration_policy(env, LIN_PRIOR, "open_loop", CemConfig(seed=seed))
        values.append(a_optimal_objective(pol, env, LIN_PRIOR, 16, seed=7))
    assert abs(values[0] - values[1]) <= 0.05 * min(values)


def test_rod_exploration_excites_the_rod():
    env = make_env("rod-pivot")
    prior = ParamDistribution([0.0], [0.3], [-0.5], [0.5])
    pol, res = train_exploration_policy(env, prior, "open_loop", CemConfig(seed=0), return_result=True)
    impulses = pol.params.reshape(env.horizon, 2)[:, 0]
    assert np.all(np.abs(impulses) >= 0.9)
    assert res.best_value < a_optimal_objective(Policy.zeros(env, "open_loop"), env, prior, 8)
