from ampg.generators import GeneratorSpec, generate, manual_fixture
from ampg.game import JointPolicy
from ampg.oracle import OracleReport, nash_gap, estimate_constants
from ampg.algorithms import npg_step, pg_step, run_oracle_algorithm
from ampg.sampling import RandomStreams, EstimatorParams, simulate, estimate_gradient

RANDOM_SUITE_NUM_STATES = 100
RANDOM_SUITE_ACTION_COUNTS = (4, 3, 2)


class OracleSuite:
    def setup(self):
        self.game = generate(GeneratorSpec(RANDOM_SUITE_NUM_STATES, RANDOM_SUITE_ACTION_COUNTS, seed=0))
        self.policy = JointPolicy.uniform(self.game.get_num_states(), self.game.get_action_counts())

    def time_oracle_report(self):
        OracleReport(self.game, self.policy).get_gradient(0)

    def time_nash_gap(self):
        nash_gap(self.game, self.policy)

    def time_pg_step(self):
        pg_step(self.game, self.policy, 0.01)

    def time_npg_step(self):
        npg_step(self.game, self.policy, 0.1)

    def time_sampled_constants(self):
        estimate_constants(self.game, policy_sample_budget=8)


class ManualSuite:
    def setup(self):
        self.game = manual_fixture()
        self.policy = JointPolicy.uniform(2, (2, 2))

    def time_enumerated_constants(self):
        estimate_constants(self.game)

    def time_oracle_npg(self):
        run_oracle_algorithm(self.game, "npg", 500, 1.0, eval_period=50)

    def time_simulate(self):
        simulate(self.game, self.policy, 51000, RandomStreams(0))

    def time_estimate_gradient(self):
        trajectory = simulate(self.game, self.policy, 1000 + 100 * 50, RandomStreams(0))
        estimate_gradient(trajectory, self.policy[0], EstimatorParams(K=100, N1=1000, N2=50), 0)
