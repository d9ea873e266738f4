from ampg.algorithms import *
from ampg.oracle import OracleReport, potential_value
from ampg.errors import InfeasibleError, ZeroSupportError
from ampg.tests.test_cases import *
import numpy as np
import pytest


def test_project_simplex():
    """Projection keeps simplex points, clips negative mass and honors the floor."""
    assert np.allclose(project_simplex([0.2, 0.8]), [0.2, 0.8])
    assert np.allclose(project_simplex([0.6, 0.6]), [0.5, 0.5])
    assert np.allclose(project_simplex([2.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
    assert np.allclose(project_simplex([1.0, 0.0, 0.0], lower_bound=0.1), [0.8, 0.1, 0.1])
    assert np.allclose(project_simplex([5.0, -3.0], lower_bound=0.5), [0.5, 0.5])


def test_project_simplex_infeasible():
    """A floor above 1/n leaves no feasible point."""
    with pytest.raises(InfeasibleError):
        project_simplex([0.5, 0.5], lower_bound=0.6)
    with pytest.raises(ValueError):
        project_rows(np.ones((1, 2)), lower_bound=-0.1)


def test_project_rows_random():
    """Projected rows are feasible and no farther from the input than any random feasible point."""
    rng = np.random.Generator(np.random.Philox(2))
    matrix = rng.normal(size=(20, 4))
    projected = project_rows(matrix, lower_bound=0.05)
    assert np.allclose(projected.sum(axis=1), 1.0)
    assert np.all(projected >= 0.05 - 1e-15)
    feasible = 0.05 + 0.8 * rng.dirichlet(np.ones(4), size=20)
    assert np.all(np.linalg.norm(matrix - projected, axis=1) <= np.linalg.norm(matrix - feasible, axis=1) + 1e-12)


def test_project_policy():
    """The truncated projection floors agent i at alpha / A_i."""
    policy = project_policy([np.array([[1.0, 0.0]]), np.array([[1.0, 0.0, 0.0, 0.0]])], alpha=0.2)
    assert np.allclose(policy[0], [[0.9, 0.1]])
    assert np.allclose(policy[1], [[0.85, 0.05, 0.05, 0.05]])
    assert policy.is_truncated(0.2)


def test_pg_step(manual_game):
    """One projected gradient step from uniform play matches hand calculation."""
    updated = pg_step(manual_game, uniform_policy(manual_game), MANUAL_PG_STEP_BETA)
    assert np.allclose(updated[0][0], MANUAL_PG_STEP_ROW_S1)
    assert pg_step(manual_game, updated, 0.0) is updated


def test_proxq_step(manual_game):
    """One proximal-Q step from uniform play matches hand calculation."""
    updated = proxq_step(manual_game, uniform_policy(manual_game), MANUAL_PROXQ_STEP_BETA)
    assert np.allclose(updated[0][0], MANUAL_PROXQ_STEP_ROW_S1)


def test_npg_step(manual_game):
    """The natural gradient step reweights by exp(beta A) and returns unshifted normalizers."""
    policy = uniform_policy(manual_game)
    updated, normalizers = npg_step(manual_game, policy, 1.0)
    assert updated[0][0, 0] / updated[0][0, 1] == pytest.approx(np.exp(0.7))
    assert normalizers[0][0] == pytest.approx(np.cosh(0.35))
    assert len(normalizers) == 2

    same, _ = npg_step(manual_game, policy, 1.0, use_advantage=False)
    assert np.allclose(same[0], updated[0])
    assert np.allclose(same[1], updated[1])

    unchanged, ones = npg_step(manual_game, policy, 0.0)
    assert unchanged is policy
    assert np.array_equal(ones[0], np.ones(2))


def test_npg_step_zero_support(manual_game):
    """Natural gradient steps need interior policies."""
    with pytest.raises(ZeroSupportError):
        npg_step(manual_game, manual_optimal_policy(), 0.1)


def test_step_schedule():
    """Constant and decaying schedules return the step in force at each iteration."""
    assert StepSchedule.constant(0.3)(1000) == 0.3
    schedule = StepSchedule.decaying(0.5, 1e-4, 20, 0.5)
    assert schedule(0) == 0.5
    assert schedule(19) == 0.5
    assert schedule(20) == 0.25
    assert schedule(10**6) == 1e-4
    assert len(schedule) == 14
    assert StepSchedule(schedule.to_list())(45) == 0.125


def test_step_schedule_invalid():
    """Schedules must start at iteration 0 and have nonnegative steps."""
    with pytest.raises(ValueError):
        StepSchedule([(5, 0.1)])
    with pytest.raises(ValueError):
        StepSchedule([(0, -0.1)])


def test_theorem_rates(manual_constants):
    """Theorem rates follow their closed forms on the manual constants."""
    assert theorem_rate("pg_theorem1", manual_constants) == pytest.approx(1.0 / MANUAL_L_PHI)
    coupling = manual_constants["kappa_q"] + 2 * manual_constants["kappa"] ** 2
    proxq = max((1 - MANUAL_GAMMA) / (2 * MANUAL_L_PHI), (1 - MANUAL_GAMMA) / (coupling * 2))
    assert theorem_rate("proxq_theorem3", manual_constants) == pytest.approx(proxq)
    npg = min(max((1 - MANUAL_GAMMA) / coupling, (1 - MANUAL_GAMMA) / MANUAL_L_PHI), 1 / (2 * manual_constants["kappa"]))
    assert theorem_rate("npg_theorem4", manual_constants) == pytest.approx(npg)
    with pytest.raises(ValueError):
        theorem_rate("manual", manual_constants)


def test_learning_rate_rule(manual_constants):
    """Manual rules carry their step; theorem rules carry the constants' provenance."""
    manual = LearningRateRule("manual", beta=0.05)
    assert manual(10) == 0.05
    assert manual.get_provenance() is None
    assert manual.get_schedule()(0) == 0.05

    rule = LearningRateRule.for_algorithm("pg", manual_constants)
    assert rule.get_rule() == "pg_theorem1"
    assert rule.get_beta() == pytest.approx(1.0 / MANUAL_L_PHI)
    assert rule.get_provenance()["kappa_0"] == "exact"

    with pytest.raises(ValueError):
        LearningRateRule("manual")
    with pytest.raises(ValueError):
        LearningRateRule("pg_theorem1")
    with pytest.raises(ValueError):
        LearningRateRule("fastest")


def test_regret_bounds(manual_constants):
    """The natural gradient bound appears only with a positive exploration factor."""
    bounds = regret_bounds(manual_constants, 0.01, 1000)
    assert set(bounds) == {"pg", "proxq"}
    assert all(value > 0 for value in bounds.values())
    assert bounds["pg"] == pytest.approx(32 * MANUAL_D**2 * MANUAL_L_PHI * MANUAL_C_PHI * 2 / 1000)
    bounds = regret_bounds(manual_constants, 0.01, 1000, exploration=0.5)
    expected = 3 * MANUAL_C_PHI / (0.5 * 0.01 * (1 - MANUAL_GAMMA) * 1000)
    assert bounds["npg"] == pytest.approx(expected)


def test_run_trace_regret():
    """Nash-Regret averages clipped gaps before T; Nash-Regret* averages their squares."""
    trace = RunTrace("pg", seed=3)
    for t, gap in enumerate([0.3, 0.2, -0.1, 0.5]):
        trace.add_record(t, 0.0, gap, 1.0, 0.1)
    assert len(trace) == 4
    assert trace.nash_regret(3) == pytest.approx(0.5 / 3)
    assert trace.nash_regret_star(3) == pytest.approx(0.13 / 3)
    assert trace.nash_regret() == pytest.approx(0.5 / 3)
    assert RunTrace("pg").nash_regret() == 0.0
    assert trace.is_regret_exact(3)
    assert trace.summary()["regret_exact"] is True

    sparse = RunTrace("pg")
    for t in (0, 10, 20):
        sparse.add_record(t, 0.0, 0.1, 1.0, 0.1)
    assert not sparse.is_regret_exact()
    assert not RunTrace("pg").is_regret_exact()


def test_run_trace_csv(tmp_path):
    """CSV traces keep iterations, metrics and estimator parameters."""
    trace = RunTrace("sampled_pg", seed=4, params={"K": 10, "N1": 4, "N2": 2, "alpha": 0.01})
    trace.add_record(0, 0.5, 0.25, 0.5, 0.1, l1_distance=1.5)
    trace.add_record(10, 0.75, 0.125, 0.5, 0.1, l1_distance=0.5)
    path = tmp_path / "trace.csv"
    trace.write_csv(path)

    with open(path) as handle:
        header = handle.readline().strip().split(",")
    assert header[:7] == list(TRACE_COLUMNS)
    assert "K" in header and "l1_distance" in header

    loaded = RunTrace.read_csv(path)
    assert loaded.get_algorithm() == "sampled_pg"
    assert loaded.get_seed() == 4
    assert loaded.get_params()["K"] == "10"
    assert np.array_equal(loaded.get_column("t"), [0, 10])
    assert np.array_equal(loaded.get_column("nash_gap"), [0.25, 0.125])
    assert np.array_equal(loaded.get_column("l1_distance"), [1.5, 0.5])


def test_oracle_pg_is_monotone(manual_game, manual_constants):
    """Projected gradient at its theorem rate never decreases the potential."""
    rate = LearningRateRule.for_algorithm("pg", manual_constants)
    trace = run_oracle_algorithm(manual_game, "pg", 25, rate, eval_period=1)
    assert trace.get_status() == "completed"
    assert trace.get_rate_rule() == "pg_theorem1"
    assert np.all(np.diff(trace.get_column("phi")) >= -1e-12)


def test_oracle_eval_points(manual_game):
    """Records are taken every eval_period iterations and at T."""
    trace = run_oracle_algorithm(manual_game, "proxq", 25, 0.1, eval_period=10, keep_policies=True)
    assert list(trace.get_column("t")) == [0, 10, 20, 25]
    assert sorted(trace.get_policies()) == [0, 10, 20, 25]
    assert trace[0]["nash_gap"] == pytest.approx(MANUAL_UNIFORM_GAP)
    assert trace[0]["c_t"] == pytest.approx(0.5)
    assert trace.get_rate_rule() == "manual"


def test_oracle_npg_reduces_gap(manual_game):
    """Natural policy gradient shrinks the Nash gap of the manual fixture."""
    trace = run_oracle_algorithm(manual_game, "npg", 300, 1.0, eval_period=100)
    assert trace[-1]["nash_gap"] < 0.1 * MANUAL_UNIFORM_GAP
    assert trace[-1]["phi"] > MANUAL_UNIFORM_GAIN


@pytest.mark.slow
@pytest.mark.parametrize("algorithm", ["pg", "proxq", "npg"])
def test_oracle_convergence(manual_game, manual_constants, algorithm):
    """Each oracle algorithm at its theorem rate reaches a Nash gap of 1e-3 within 10^4 iterations."""
    rate = LearningRateRule.for_algorithm(algorithm, manual_constants)
    eval_period = 1 if algorithm == "npg" else 1000
    trace = run_oracle_algorithm(manual_game, algorithm, 10**4, rate, eval_period=eval_period)
    assert trace.get_status() == "completed"
    assert trace[-1]["t"] == 10**4
    assert trace[-1]["nash_gap"] <= 1e-3
    if algorithm == "npg":
        assert np.all(np.diff(trace.get_column("phi")) >= -1e-9)


def test_oracle_pg_regret_trend(manual_game, manual_constants):
    """Doubling T cuts the Nash-Regret* of projected gradient by at least a quarter."""
    rate = LearningRateRule.for_algorithm("pg", manual_constants)
    trace = run_oracle_algorithm(manual_game, "pg", 800, rate, eval_period=1)
    assert trace.is_regret_exact(800)
    for horizon in (100, 200, 400):
        assert trace.nash_regret_star(2 * horizon) <= 0.75 * trace.nash_regret_star(horizon)


def test_oracle_zero_iterations(manual_game):
    """T = 0 evaluates the initial policy only."""
    trace = run_oracle_algorithm(manual_game, "pg", 0, 0.1)
    assert len(trace) == 1
    assert trace[0]["t"] == 0


def test_oracle_invalid_arguments(manual_game):
    """Unknown algorithms and eval periods below 1 are rejected."""
    with pytest.raises(ValueError):
        run_oracle_algorithm(manual_game, "sgd", 10, 0.1)
    with pytest.raises(ValueError):
        run_oracle_algorithm(manual_game, "pg", 10, 0.1, eval_period=0)


def test_oracle_aborts_on_reducible_chain():
    """A reducible induced chain ends the run with an aborted status."""
    game = absorbing_game()
    trace = run_oracle_algorithm(game, "pg", 5, 0.1)
    assert trace.get_status().startswith("aborted")
    assert len(trace) == 0


def test_evaluate_iterate(manual_game):
    """phi, gap and exploration factor of the uniform policy."""
    policy = uniform_policy(manual_game)
    phi, gap, c = evaluate_iterate(manual_game, policy, OracleReport(manual_game, policy))
    assert phi == pytest.approx(potential_value(manual_game, policy))
    assert gap == pytest.approx(MANUAL_UNIFORM_GAP)
    assert c == pytest.approx(0.5)
