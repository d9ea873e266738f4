from ampg.sampling import *
from ampg.datastore import AMPGDataStore
from ampg.algorithms import project_policy
from ampg.oracle import average_reward, policy_gradient
from ampg.harness import run_experiment
from ampg.configs.config import ExperimentConfig
from ampg.configs.manual_fixture import ManualSampledPGConfig
from ampg.errors import LengthError, ZeroSupportError
from ampg.tests.test_cases import *
from unittest.mock import patch
from concurrent.futures import ThreadPoolExecutor
import numpy as np
import pytest

GRADIENT_PARAMS = {"K": 10, "N1": 10, "N2": 5, "alpha": 0.01}
Q_PARAMS = {"B": 60, "N1": 5, "alpha": 0.01}


def one_agent_trajectory(states, actions, rewards):
    """Hand-built single-agent trajectory with no policy hashes."""
    return Trajectory(np.asarray(states), np.asarray(actions)[:, np.newaxis], np.asarray(rewards)[:, np.newaxis])


def test_random_streams():
    """Each (iteration, channel) pair is reproducible and distinct from the others."""
    streams = RandomStreams(42)
    first = streams.environment(3).random(5)
    assert np.array_equal(first, RandomStreams(42).environment(3).random(5))
    assert not np.array_equal(first, streams.environment(4).random(5))
    assert not np.array_equal(first, streams.agent(3, 0).random(5))
    assert not np.array_equal(streams.agent(3, 0).random(5), streams.agent(3, 1).random(5))
    assert not np.array_equal(first, RandomStreams(43).environment(3).random(5))
    assert "42" in streams.lineage()


def test_simulate_is_reproducible(manual_game):
    """The same seed and iteration reproduce a trajectory exactly."""
    policy = uniform_policy(manual_game)
    first = simulate(manual_game, policy, 200, 7, iteration=2)
    second = simulate(manual_game, policy, 200, RandomStreams(7), iteration=2)
    assert np.array_equal(first.get_states(), second.get_states())
    assert np.array_equal(first.get_actions(), second.get_actions())
    other = simulate(manual_game, policy, 200, 7, iteration=3)
    assert not np.array_equal(first.get_actions(), other.get_actions())


def test_simulate_contents(manual_game):
    """Trajectories stay in range and carry the rewards of the visited joint actions."""
    policy = uniform_policy(manual_game)
    trajectory = simulate(manual_game, policy, 300, 0)
    assert len(trajectory) == 300
    assert trajectory.get_num_agents() == 2
    states = trajectory.get_states()
    actions = trajectory.get_actions()
    assert set(np.unique(states)) <= {0, 1}
    assert set(np.unique(actions)) <= {0, 1}
    expected = manual_game.get_rewards()[:, states, actions[:, 0], actions[:, 1]].T
    assert np.array_equal(trajectory.get_rewards(), expected)
    assert trajectory.get_seed() == 0
    assert trajectory.get_policy_hash() == policy.get_hash()
    assert trajectory.get_policy_hash(1) == policy.get_hash(1)


def test_simulate_deterministic_policy(manual_game):
    """A deterministic policy always plays its chosen actions."""
    trajectory = simulate(manual_game, manual_optimal_policy(), 100, 1)
    states = trajectory.get_states()
    assert np.array_equal(trajectory.get_actions(0), np.where(states == 0, 0, 1))
    assert np.all(trajectory.get_actions(1) == 0)
    assert np.all(trajectory.get_rewards(0) == 1.0)


def test_simulate_initial_distribution(manual_game):
    """A point-mass initial distribution fixes the first state."""
    policy = uniform_policy(manual_game)
    for seed in range(5):
        assert simulate(manual_game, policy, 3, seed, initial_distribution=[0.0, 1.0]).get_states()[0] == 1
    with pytest.raises(ValueError):
        simulate(manual_game, policy, 3, 0, initial_distribution=[1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        simulate(manual_game, policy, 0, 0)


def test_simulate_many_matches_simulate(random_game):
    """The vectorized simulator reproduces the scalar one seed by seed."""
    rng = np.random.Generator(np.random.Philox(9))
    policy = JointPolicy.dirichlet(rng, random_game.get_num_states(), random_game.get_action_counts())
    seeds = [0, 5, 11]
    batch = simulate_many(random_game, policy, 150, seeds, iteration=4)
    for seed, trajectory in zip(seeds, batch):
        single = simulate(random_game, policy, 150, seed, iteration=4)
        assert np.array_equal(trajectory.get_states(), single.get_states())
        assert np.array_equal(trajectory.get_actions(), single.get_actions())
        assert np.array_equal(trajectory.get_rewards(), single.get_rewards())
        assert trajectory.get_seed() == seed


def test_trajectory_shapes():
    """Inconsistent array shapes are rejected."""
    with pytest.raises(ValueError):
        Trajectory(np.zeros(3), np.zeros((2, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        Trajectory(np.zeros(3), np.zeros((3, 2)), np.zeros((3, 1)))


def test_trajectory_binary(manual_game, tmp_path):
    """The raw dump holds one u32 state, N u32 actions and N f64 rewards per step and reloads exactly."""
    trajectory = simulate(manual_game, uniform_policy(manual_game), 50, 3)
    path = tmp_path / "trajectory.bin"
    trajectory.save_binary(path)
    assert path.stat().st_size == 50 * (4 + 2 * 4 + 2 * 8)
    loaded = Trajectory.load_binary(path, num_agents=2, seed=3)
    assert np.array_equal(loaded.get_states(), trajectory.get_states())
    assert np.array_equal(loaded.get_actions(), trajectory.get_actions())
    assert np.array_equal(loaded.get_rewards(), trajectory.get_rewards())


def test_trajectory_netcdf(manual_game, tmp_path):
    """The netCDF archive keeps arrays, seed, iteration and policy hashes."""
    policy = uniform_policy(manual_game)
    trajectory = simulate(manual_game, policy, 40, 8, iteration=6)
    path = f"{tmp_path}/trajectory.nc"
    trajectory.to_netcdf(path)

    with AMPGDataStore(path, "r") as ds:
        assert "state" in ds
        assert len(ds) == 3
        assert ds.getncattr("ampg_version") == get_version()

    loaded = Trajectory.from_netcdf(path)
    assert np.array_equal(loaded.get_states(), trajectory.get_states())
    assert np.array_equal(loaded.get_actions(), trajectory.get_actions())
    assert np.array_equal(loaded.get_rewards(), trajectory.get_rewards())
    assert loaded.get_seed() == 8
    assert loaded.get_iteration() == 6
    assert loaded.get_policy_hash() == policy.get_hash()
    assert loaded.get_policy_hash(0) == policy.get_hash(0)


def test_estimator_params():
    """Gradient parameters need an even N1; Q parameters need B > N1; alpha lies in (0, 1]."""
    params = EstimatorParams(**GRADIENT_PARAMS).validate_gradient()
    assert params.gradient_length() == 60
    assert params.to_dict() == GRADIENT_PARAMS
    with pytest.raises(ValueError):
        EstimatorParams(K=10, N1=9, N2=5).validate_gradient()
    with pytest.raises(ValueError):
        EstimatorParams(K=0, N1=10, N2=5).validate_gradient()
    with pytest.raises(ValueError):
        EstimatorParams(K=10, N1=10, N2=5, alpha=0.0).validate_gradient()
    with pytest.raises(ValueError):
        EstimatorParams(B=5, N1=5).validate_q()
    EstimatorParams(**Q_PARAMS).validate_q()


def test_estimate_rho():
    """The burn-in estimate averages steps N1/2 .. N1-1."""
    trajectory = one_agent_trajectory([0] * 6, [0] * 6, [0.0, 1.0, 0.25, 0.75, 9.0, 9.0])
    assert estimate_rho(trajectory, 4, 0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        estimate_rho(trajectory, 3, 0)
    with pytest.raises(LengthError):
        estimate_rho(trajectory, 8, 0)


def test_estimate_gradient_by_hand():
    """Two episodes of length 2 after a burn-in of 2 give the hand-computed estimate."""
    trajectory = one_agent_trajectory(
        [0, 0, 0, 1, 1, 0],
        [0, 0, 0, 1, 1, 0],
        [0.1, 0.3, 0.5, 0.7, 0.2, 0.4]
    )
    params = EstimatorParams(K=2, N1=2, N2=2)
    gradient = estimate_gradient(trajectory, np.full((2, 2), 0.5), params, 0)
    assert gradient[0, 0] == pytest.approx(0.6)
    assert gradient[1, 1] == pytest.approx(0.0, abs=1e-12)
    assert gradient[0, 1] == 0.0
    assert gradient[1, 0] == 0.0

    overridden = estimate_gradient(trajectory, np.full((2, 2), 0.5), params, 0, rho_hat=0.0)
    assert overridden[0, 0] == pytest.approx(1.2)
    assert overridden[1, 1] == pytest.approx(0.6)


def test_estimate_gradient_errors():
    """Short trajectories and zero-probability actions are rejected."""
    trajectory = one_agent_trajectory([0] * 6, [1] * 6, [0.5] * 6)
    with pytest.raises(LengthError):
        estimate_gradient(trajectory, np.full((1, 2), 0.5), EstimatorParams(K=3, N1=2, N2=2), 0)
    with pytest.raises(ZeroSupportError):
        estimate_gradient(trajectory, np.array([[1.0, 0.0]]), EstimatorParams(K=2, N1=2, N2=2), 0)


def test_estimate_gradient_policy_mismatch(manual_game):
    """A policy that did not generate the trajectory triggers a RuntimeWarning."""
    trajectory = simulate(manual_game, uniform_policy(manual_game), 60, 0)
    params = EstimatorParams(**GRADIENT_PARAMS)
    other = np.array([[0.6, 0.4], [0.5, 0.5]])
    with pytest.warns(RuntimeWarning):
        estimate_gradient(trajectory, other, params, 0)


def test_estimate_q_by_hand():
    """Visits at least 2 N1 apart each contribute R / pi on the taken action."""
    trajectory = one_agent_trajectory(
        [0, 1, 0, 0, 1, 0, 0, 0],
        [1, 0, 0, 1, 1, 0, 0, 1],
        np.arange(8) * 0.1
    )
    estimate, visits = estimate_q(trajectory, 0, np.full((2, 2), 0.5), 8, 2, 0, return_visits=True)
    assert visits == [0, 5]
    assert np.allclose(estimate, [1.1, 0.1])


def test_estimate_q_edge_cases():
    """Unvisited states give zeros; B must fit the trajectory and exceed N1."""
    trajectory = one_agent_trajectory([0] * 8, [0] * 8, [0.5] * 8)
    policy = np.full((2, 2), 0.5)
    assert np.array_equal(estimate_q(trajectory, 1, policy, 8, 2, 0), [0.0, 0.0])
    with pytest.raises(LengthError):
        estimate_q(trajectory, 0, policy, 9, 2, 0)
    with pytest.raises(LengthError):
        estimate_q(trajectory, 0, policy, 2, 2, 0)
    with pytest.raises(ZeroSupportError):
        estimate_q(trajectory, 0, np.array([[0.0, 1.0], [0.5, 0.5]]), 8, 2, 0)


def test_gradient_error_bound(manual_constants):
    """The bound is positive and shrinks as the number of episodes grows."""
    small = gradient_error_bound(manual_constants, EstimatorParams(K=10, N1=100, N2=20, alpha=0.1))
    large = gradient_error_bound(manual_constants, EstimatorParams(K=1000, N1=100, N2=20, alpha=0.1))
    assert 0 < large < small


def test_sampled_pg_run(manual_game):
    """A short sampled gradient run records every iterate inside the truncated class."""
    trace = run_sampled_pg(manual_game, 3, 0.05, seed=1, eval_period=1, keep_policies=True, **GRADIENT_PARAMS)
    assert trace.get_status() == "completed"
    assert list(trace.get_column("t")) == [0, 1, 2, 3]
    assert trace.get_params()["N1"] == 10
    assert trace.get_seed_lineage() == RandomStreams(1).lineage()
    assert all(policy.is_truncated(GRADIENT_PARAMS["alpha"]) for policy in trace.get_policies().values())

    repeat = run_sampled_pg(manual_game, 3, 0.05, seed=1, eval_period=1, **GRADIENT_PARAMS)
    assert np.array_equal(trace.get_column("nash_gap"), repeat.get_column("nash_gap"))


def test_sampled_run_with_reference(manual_game):
    """A reference policy adds the l1 distance column."""
    reference = manual_optimal_policy()
    trace = run_sampled_proxq(manual_game, 2, 0.05, seed=2, eval_period=1, reference=reference, **Q_PARAMS)
    assert trace.get_status() == "completed"
    assert trace[0]["l1_distance"] == pytest.approx(2.0)
    assert "l1_distance" in trace.get_columns()


def test_sampled_zero_rate(manual_game):
    """A zero step size leaves the uniform policy in place."""
    trace = run_sampled_pg(manual_game, 2, 0.0, seed=0, eval_period=1, **GRADIENT_PARAMS)
    assert np.allclose(trace.get_column("nash_gap"), MANUAL_UNIFORM_GAP)


def test_sampled_invalid_parameters(manual_game):
    """Invalid estimator parameters are rejected before any simulation."""
    with pytest.raises(ValueError):
        run_sampled_pg(manual_game, 3, 0.05, K=10, N1=9, N2=5, alpha=0.01, seed=0)
    with pytest.raises(ValueError):
        run_sampled_proxq(manual_game, 3, 0.05, B=5, N1=5, alpha=0.01, seed=0)


@pytest.mark.slow
def test_state_frequencies(manual_game):
    """Long-run state frequencies approach the stationary distribution."""
    trajectory = simulate(manual_game, uniform_policy(manual_game), 20000, 13)
    assert np.mean(trajectory.get_states() == 0) == pytest.approx(MANUAL_STATIONARY[0], abs=0.03)
    assert estimate_rho(trajectory, 20000, 0) == pytest.approx(MANUAL_UNIFORM_GAIN, abs=0.03)


@pytest.mark.slow
def test_q_estimate_monte_carlo(manual_game):
    """The Q estimator targets Qbar + N1 rho on a long trajectory."""
    n1 = 20
    trajectory = simulate(manual_game, uniform_policy(manual_game), 200000, 21)
    estimate = estimate_q(trajectory, 0, np.full((2, 2), 0.5), len(trajectory), n1, 0)
    target = np.array(MANUAL_UNIFORM_QBAR_S1) + n1 * MANUAL_UNIFORM_GAIN
    assert np.allclose(estimate, target, atol=1.0)


def test_q_shift_leaves_projection_unchanged(manual_game):
    """Dropping the N1 rho offset from the Q estimates gives the same proximal step."""
    policy = uniform_policy(manual_game)
    trajectory = simulate(manual_game, policy, Q_PARAMS["B"], 4)
    rho = average_reward(manual_game, policy, 0)
    estimates = np.stack([estimate_q(trajectory, s, policy[0], Q_PARAMS["B"], Q_PARAMS["N1"], 0) for s in range(2)])
    shifted = project_policy([policy[0] + 0.05 * estimates], Q_PARAMS["alpha"])
    centered = project_policy([policy[0] + 0.05 * (estimates - Q_PARAMS["N1"] * rho)], Q_PARAMS["alpha"])
    assert np.allclose(shifted[0], centered[0], atol=1e-12)


def test_estimate_gradient_reward_shift(manual_game):
    """Adding a constant to every reward leaves the gradient estimate unchanged."""
    policy = uniform_policy(manual_game)
    trajectory = simulate(manual_game, policy, 60, 5)
    shifted = Trajectory(trajectory.get_states(), trajectory.get_actions(), trajectory.get_rewards() + 0.75,
                         seed=trajectory.get_seed())
    params = EstimatorParams(**GRADIENT_PARAMS)
    base = estimate_gradient(trajectory, policy[0], params, 0)
    assert np.allclose(estimate_gradient(shifted, policy[0], params, 0), base, atol=1e-12)

    rho_hat = estimate_rho(trajectory, params.N1, 0)
    injected = estimate_gradient(shifted, policy[0], params, 0, rho_hat=rho_hat + 0.75)
    assert np.allclose(injected, estimate_gradient(trajectory, policy[0], params, 0, rho_hat=rho_hat), atol=1e-12)


def test_estimate_q_scan_window(manual_game):
    """Visits stay within B - N1, are at least 2 N1 apart, and nothing after B is read."""
    B, n1 = Q_PARAMS["B"], Q_PARAMS["N1"]
    policy = uniform_policy(manual_game)
    trajectory = simulate(manual_game, policy, B + 40, 6)
    states = trajectory.get_states()
    for state in (0, 1):
        estimate, visits = estimate_q(trajectory, state, policy[0], B, n1, 0, return_visits=True)
        assert len(visits) > 0
        assert all(states[tau] == state for tau in visits)
        assert max(visits) <= B - n1
        assert all(later - earlier >= 2 * n1 for earlier, later in zip(visits, visits[1:]))

        # every skipped visit falls inside the blocked window of the previous recorded one
        for tau in np.flatnonzero(states[:B - n1 + 1] == state):
            previous = [v for v in visits if v <= tau]
            assert tau in visits or (len(previous) > 0 and tau < previous[-1] + 2 * n1)

        expected = np.zeros(2)
        for tau in visits:
            expected[trajectory.get_actions(0)[tau]] += trajectory.get_rewards(0)[tau:tau + n1].sum() / 0.5
        assert np.allclose(estimate, expected / len(visits))

        truncated = Trajectory(states[:B], trajectory.get_actions()[:B], trajectory.get_rewards()[:B])
        assert np.array_equal(estimate_q(truncated, state, policy[0], B, n1, 0), estimate)


@pytest.mark.slow
def test_gradient_estimate_statistics(manual_game):
    """At uniform the estimate is nearly unbiased and four times the episodes cut its error."""
    policy = uniform_policy(manual_game)
    gradient = policy_gradient(manual_game, policy, 0, 0)
    small = EstimatorParams(K=1000, N1=50, N2=50, alpha=0.01)
    large = EstimatorParams(K=4000, N1=50, N2=50, alpha=0.01)

    estimates = {1000: [], 4000: []}
    seeds = list(range(200))
    for start in range(0, len(seeds), 20):
        for trajectory in simulate_many(manual_game, policy, large.gradient_length(), seeds[start:start + 20]):
            estimates[1000].append(estimate_gradient(trajectory, policy[0], small, 0))
            estimates[4000].append(estimate_gradient(trajectory, policy[0], large, 0))

    errors = {K: np.mean([np.sum((g - gradient) ** 2) for g in values]) for K, values in estimates.items()}
    assert np.linalg.norm(np.mean(estimates[1000], axis=0) - gradient) <= 0.05
    assert errors[1000] >= 1.67 * errors[4000]


@pytest.mark.slow
@patch("ampg.harness.ProcessPoolExecutor", ThreadPoolExecutor)
def test_sampled_pg_approaches_reference(tmp_path):
    """Over seven seeds the mean distance to the reference policy at least halves."""
    config = ManualSampledPGConfig().copy(output_dir=str(tmp_path))
    summary = run_experiment(config, show_progress=False)
    assert summary["num_failures"] == 0
    distances = summary["l1_distance_mean"]
    assert summary["t"][-1] == config.get_num_iterations()
    assert distances[-1] <= 0.5 * distances[0]


@pytest.mark.slow
@patch("ampg.harness.ProcessPoolExecutor", ThreadPoolExecutor)
def test_sampled_proxq_improves_gap(tmp_path):
    """At its theorem rate the median final gap over five seeds beats the uniform policy."""
    config = ExperimentConfig(name="manual_sampled_proxq", algorithm="sampled_proxq", num_iterations=200,
                              eval_period=200, estimator={"B": 50000, "N1": 50, "alpha": "0.01"},
                              seeds=[0, 1, 2, 3, 4], output_dir=str(tmp_path))
    summary = run_experiment(config, show_progress=False)
    assert summary["rate_rule"] == "proxq_theorem3"
    final_gaps = [run["final_nash_gap"] for run in summary["runs"]]
    assert len(final_gaps) == 5
    assert np.median(final_gaps) < MANUAL_UNIFORM_GAP
