from ampg.configs.config import ExperimentConfig


class ManualSampledPGConfig(ExperimentConfig):
    """
    Sampled projected gradient on the two-state fixture with 51000-step
    trajectories (``K=1000``, ``N1=1000``, ``N2=50``) and a step size halved
    every 20 iterations from 0.5 down to 1e-4.
    """
    name = "manual_sampled_pg"
    game = {"fixture": "manual"}
    algorithm = "sampled_pg"
    num_iterations = 300
    eval_period = 10
    rate = {"rule": "manual", "decaying": {"initial": "0.5", "final": "0.0001", "period": 20, "factor": "0.5"}}
    estimator = {"K": 1000, "N1": 1000, "N2": 50, "alpha": "0.01"}
    seeds = [0, 1, 2, 3, 4, 5, 6]
    reference = True


class ManualOracleConfig(ExperimentConfig):
    """Oracle natural policy gradient on the two-state fixture at its theorem rate."""
    name = "manual_oracle_npg"
    game = {"fixture": "manual"}
    algorithm = "npg"
    num_iterations = 10000
    eval_period = 100
